use osdl::data::{gen_synthetic, SyntheticSpec};
use osdl::eval::{grid_search, item_mean_baseline, item_means, split, GridOptions, Grids, SplitSpec};
use osdl::groups::StructureSpec;
use osdl::recommender::Scheme;
use std::time::Instant;

fn main() {
    for (radius, sparsity, noise) in [(2usize, 25usize, 0.1), (4, 81, 0.1), (4, 81, 0.05)] {
        let t0 = Instant::now();
        let spec = SyntheticSpec {
            n_users: 3000,
            obs_dim: 100,
            structure: StructureSpec::Toroid { d: 10, radius },
            sparsity,
            noise_sigma: noise,
            missing_fraction: 0.44,
            seed: 777,
        };
        let ds = gen_synthetic(&spec).unwrap().dataset;
        let grids = Grids {
            structures: vec![
                StructureSpec::Toroid { d: 10, radius: 0 },
                StructureSpec::Toroid { d: 10, radius: 4 },
            ],
            kappas: vec![1.0/64.0, 1.0/1024.0, 1.0/16384.0],
            rhos: vec![0.0, 0.5],
            batch_sizes: vec![8],
            betas: vec![1.0, 1.8, 2.6, 3.4],
            schemes: Scheme::ALL.to_vec(),
            seed: 42,
            passes: 4,
            ..Grids::paper(vec![], 42)
        };
        let out = grid_search(&ds, &grids, &GridOptions::default()).unwrap();
        let sets = split(&ds, &SplitSpec::new(grids.seed));
        let means = item_means(&sets.train, ds.n_items());
        let (baseline_rmse, _) = item_mean_baseline(&means, &sets.test).unwrap();
        let best = |r: usize| out.ranked.iter().find(|t| t.key.structure == StructureSpec::Toroid { d: 10, radius: r }).unwrap();
        let (b0, b4) = (best(0), best(4));
        println!("truth r={radius} noise={noise}: baseline={baseline_rmse:.4} r0={:.4} (k={}) r4={:.4} (k={}) [{:.0}s]",
            b0.test_rmse, b0.key.kappa, b4.test_rmse, b4.key.kappa, t0.elapsed().as_secs_f64());
    }
}
