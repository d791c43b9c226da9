//! Small dense routines used by the coder and the learner. Problem sizes are
//! modest (code dimension at most a few hundred), so an unblocked Cholesky on
//! contiguous storage is all that is needed.

use ndarray::{Array1, Array2, ArrayView1};

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
/// Returns `None` when a pivot is non-positive or non-finite.
pub fn solve_spd(a: &Array2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.len(), n);

    // Lower-triangular factor, row-major flat storage.
    let mut l = a.as_standard_layout().as_slice().unwrap().to_vec();
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }

    // Forward substitution L y = b, then back substitution L^T x = y.
    let mut x: Vec<f64> = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Array1::from_vec(x))
}

/// [`solve_spd`] with one retry after adding `jitter` to the diagonal.
pub fn solve_spd_with_jitter(
    a: &Array2<f64>,
    b: ArrayView1<f64>,
    jitter: f64,
) -> Option<Array1<f64>> {
    if let Some(x) = solve_spd(a, b) {
        return Some(x);
    }
    let mut damped = a.clone();
    for i in 0..damped.nrows() {
        damped[[i, i]] += jitter;
    }
    solve_spd(&damped, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_identity() {
        let a = Array2::eye(3);
        let b = array![1.0, -2.0, 3.0];
        let x = solve_spd(&a, b.view()).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solves_random_spd_against_residual() {
        let g = array![[2.0, 1.0, 0.0], [0.5, 3.0, 1.0], [1.0, 0.0, 2.5]];
        let a = g.t().dot(&g); // SPD for full-rank g
        let b = array![0.3, -1.2, 2.2];
        let x = solve_spd(&a, b.view()).unwrap();
        let r = &a.dot(&x) - &b;
        assert!(r.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10);
    }

    #[test]
    fn rejects_indefinite() {
        let a = array![[1.0, 0.0], [0.0, -1.0]];
        assert!(solve_spd(&a, array![1.0, 1.0].view()).is_none());
    }

    #[test]
    fn jitter_recovers_semidefinite() {
        let a = array![[1.0, 1.0], [1.0, 1.0]]; // rank one
        let b = array![1.0, 1.0];
        assert!(solve_spd_with_jitter(&a, b.view(), 1e-10).is_some());
    }
}
