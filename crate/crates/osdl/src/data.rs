//! Rating data: the sparse dataset type, the dense Jester CSV layout
//! (count column, 99 sentinel for unrated cells), and a seeded synthetic
//! generator used for verification.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::groups::StructureSpec;
use crate::seeding::subseed;

pub const RATING_MIN: f64 = -10.0;
pub const RATING_MAX: f64 = 10.0;
/// Sentinel marking an unrated cell in the dense Jester layout.
pub const NOT_RATED: f64 = 99.0;

/// One observed rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingCell {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
}

/// Sparse user-by-item rating matrix with explicit observed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    n_users: usize,
    n_items: usize,
    cells: Vec<RatingCell>,
}

impl RatingDataset {
    /// Validates bounds, the rating range, and uniqueness of (user, item).
    pub fn new(n_users: usize, n_items: usize, cells: Vec<RatingCell>) -> Result<RatingDataset> {
        if n_users == 0 || n_items == 0 {
            return Err(Error::param("dataset dimensions must be positive"));
        }
        for c in &cells {
            if c.user as usize >= n_users || c.item as usize >= n_items {
                return Err(Error::shape(format!(
                    "cell ({}, {}) outside {n_users} x {n_items}",
                    c.user, c.item
                )));
            }
            if !(RATING_MIN..=RATING_MAX).contains(&c.rating) {
                return Err(Error::param(format!(
                    "rating {} outside [{RATING_MIN}, {RATING_MAX}]",
                    c.rating
                )));
            }
        }
        let mut keys: Vec<(u32, u32)> = cells.iter().map(|c| (c.user, c.item)).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("duplicate (user, item) cell"));
        }
        Ok(RatingDataset {
            n_users,
            n_items,
            cells,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn cells(&self) -> &[RatingCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Keeps `n` users chosen without replacement by the seeded generator,
    /// remapping user indices to `0..n` in ascending original order.
    pub fn subsample_users(&self, n: usize, seed: u64) -> Result<RatingDataset> {
        if n == 0 || n > self.n_users {
            return Err(Error::param(format!(
                "cannot subsample {n} of {} users",
                self.n_users
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen: Vec<usize> = sample(&mut rng, self.n_users, n).into_vec();
        chosen.sort_unstable();
        let mut remap = vec![u32::MAX; self.n_users];
        for (new, &old) in chosen.iter().enumerate() {
            remap[old] = new as u32;
        }
        let cells = self
            .cells
            .iter()
            .filter(|c| remap[c.user as usize] != u32::MAX)
            .map(|c| RatingCell {
                user: remap[c.user as usize],
                item: c.item,
                rating: c.rating,
            })
            .collect();
        RatingDataset::new(n, self.n_items, cells)
    }
}

/// A parsed Jester file plus non-fatal diagnostics.
#[derive(Debug)]
pub struct JesterLoad {
    pub dataset: RatingDataset,
    pub warnings: Vec<String>,
}

/// Reads the dense Jester CSV layout: one row per user; column 0 holds the
/// number of rated items, the remaining columns hold ratings on
/// [-10, 10] with 99 meaning "not rated". The item count is taken from the
/// first row. A mismatch between the count column and the non-sentinel
/// entries is a warning, not an error.
pub fn load_jester(path: &Path) -> Result<JesterLoad> {
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let mut n_items: Option<usize> = None;
    let mut n_users = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::DataFormat {
                path: display,
                line: line_no,
                message: "expected a count column plus at least one rating".into(),
            });
        }
        let declared: u64 = fields[0].trim().parse().map_err(|_| Error::DataFormat {
            path: display.clone(),
            line: line_no,
            message: format!("bad rating count {:?}", fields[0]),
        })?;
        let items_here = fields.len() - 1;
        match n_items {
            None => n_items = Some(items_here),
            Some(n) if n != items_here => {
                return Err(Error::DataFormat {
                    path: display,
                    line: line_no,
                    message: format!("expected {n} rating columns, found {items_here}"),
                });
            }
            _ => {}
        }
        let user = n_users as u32;
        let mut rated = 0u64;
        for (col, field) in fields[1..].iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::DataFormat {
                path: display.clone(),
                line: line_no,
                message: format!("bad rating {field:?} in column {}", col + 1),
            })?;
            if value == NOT_RATED {
                continue;
            }
            if !(RATING_MIN..=RATING_MAX).contains(&value) {
                return Err(Error::DataFormat {
                    path: display,
                    line: line_no,
                    message: format!("rating {value} outside [-10, 10] and not the 99 sentinel"),
                });
            }
            cells.push(RatingCell {
                user,
                item: col as u32,
                rating: value,
            });
            rated += 1;
        }
        if rated != declared {
            warnings.push(format!(
                "row {line_no}: declared {declared} ratings, found {rated}"
            ));
        }
        n_users += 1;
    }

    let n_items = n_items.ok_or(Error::EmptyInput("rating file has no rows"))?;
    let dataset = RatingDataset::new(n_users, n_items, cells)?;
    Ok(JesterLoad { dataset, warnings })
}

/// Writes the dense Jester layout; an exact inverse of [`load_jester`] for
/// datasets whose users all fit the declared item count.
pub fn write_jester(ds: &RatingDataset, path: &Path) -> Result<()> {
    let mut dense: Vec<Vec<Option<f64>>> = vec![vec![None; ds.n_items]; ds.n_users];
    for c in ds.cells() {
        dense[c.user as usize][c.item as usize] = Some(c.rating);
    }
    let mut w = BufWriter::new(File::create(path)?);
    for row in dense {
        let count = row.iter().filter(|v| v.is_some()).count();
        write!(w, "{count}")?;
        for v in row {
            match v {
                Some(r) => write!(w, ",{r}")?,
                None => write!(w, ",99")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub obs_dim: usize,
    pub structure: StructureSpec,
    /// Support-size cap per sample: each sample activates one group chosen
    /// uniformly among the groups with at most `sparsity` members, so codes
    /// are at most `sparsity`-sparse and always group-aligned.
    pub sparsity: usize,
    pub noise_sigma: f64,
    /// Fraction of cells hidden, applied as an exact count.
    pub missing_fraction: f64,
    pub seed: u64,
}

/// Synthetic data plus its generating ground truth.
#[derive(Debug)]
pub struct Synthetic {
    pub dataset: RatingDataset,
    pub dictionary: Dictionary,
    pub codes: Array2<f64>,
}

/// Draws a ground-truth dictionary with unit columns, group-aligned sparse
/// codes (one group per sample, chosen uniformly among groups no larger
/// than the sparsity cap, its support filled from a standard normal), adds
/// Gaussian noise, and hides an exact fraction of the cells. Fully
/// determined by the seed.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.n_users == 0 || spec.obs_dim == 0 {
        return Err(Error::param("synthetic dimensions must be positive"));
    }
    if !(0.0..1.0).contains(&spec.missing_fraction) {
        return Err(Error::param("missing fraction must lie in [0, 1)"));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::param("noise sigma must be non-negative"));
    }
    let gs = spec.structure.build()?;
    let eligible: Vec<usize> = (0..gs.group_count())
        .filter(|&g| gs.group(g).len() <= spec.sparsity)
        .collect();
    if eligible.is_empty() {
        let smallest = gs.groups().iter().map(|g| g.len()).min().unwrap_or(0);
        return Err(Error::param(format!(
            "sparsity cap {} admits no group (smallest group has {smallest} members)",
            spec.sparsity
        )));
    }

    let dictionary = Dictionary::init(spec.obs_dim, gs.code_dim(), subseed(spec.seed, 0));
    let mut code_rng = ChaCha8Rng::seed_from_u64(subseed(spec.seed, 1));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(subseed(spec.seed, 2));
    let mut mask_rng = ChaCha8Rng::seed_from_u64(subseed(spec.seed, 3));
    let normal = StandardNormal;

    let mut codes = Array2::zeros((spec.n_users, gs.code_dim()));
    let mut values = Array2::zeros((spec.n_users, spec.obs_dim));
    for u in 0..spec.n_users {
        let g = eligible[code_rng.random_range(0..eligible.len())];
        for &j in gs.group(g) {
            codes[[u, j]] = normal.sample(&mut code_rng);
        }
        let code = codes.row(u).to_owned();
        let mut x: Array1<f64> = dictionary.matrix().dot(&code);
        if spec.noise_sigma > 0.0 {
            for v in x.iter_mut() {
                let n: f64 = normal.sample(&mut noise_rng);
                *v += spec.noise_sigma * n;
            }
        }
        for (i, &v) in x.iter().enumerate() {
            values[[u, i]] = v.clamp(RATING_MIN, RATING_MAX);
        }
    }

    let total = spec.n_users * spec.obs_dim;
    let hidden_count = (spec.missing_fraction * total as f64).round() as usize;
    let mut hidden = vec![false; total];
    for idx in sample(&mut mask_rng, total, hidden_count) {
        hidden[idx] = true;
    }
    let mut cells = Vec::with_capacity(total - hidden_count);
    for u in 0..spec.n_users {
        for i in 0..spec.obs_dim {
            if !hidden[u * spec.obs_dim + i] {
                cells.push(RatingCell {
                    user: u as u32,
                    item: i as u32,
                    rating: values[[u, i]],
                });
            }
        }
    }
    let dataset = RatingDataset::new(spec.n_users, spec.obs_dim, cells)?;
    Ok(Synthetic {
        dataset,
        dictionary,
        codes,
    })
}
