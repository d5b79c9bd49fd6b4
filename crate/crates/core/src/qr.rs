//! Row-wise QR factorization under a weighted inner product.
//!
//! `M = R * Q` with the rows of `Q` orthonormal in `<a, b> = w * sum(a_i b_i)`
//! and `R` lower triangular with a non-negative diagonal. Classical
//! Gram-Schmidt with one reorthogonalization pass.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pivots below this fraction of the largest row norm count as deficient.
pub const DEFICIENCY_THRESHOLD: f64 = 1e-14;

const FILL_SEED: u64 = 0x5eed_f111;

#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: Array2<f64>,
    pub r: Array2<f64>,
    /// At least one pivot was deficient and its row of `Q` was completed.
    pub deficient: bool,
}

fn weighted_dot(a: ArrayView1<f64>, b: ArrayView1<f64>, weight: f64) -> f64 {
    weight * a.dot(&b)
}

/// Removes the components of `w` along the first `k` rows of `q`, twice.
/// Returns the accumulated coefficients.
fn project_out(q: ArrayView2<f64>, k: usize, w: &mut Array1<f64>, weight: f64) -> Array1<f64> {
    let mut coef = Array1::zeros(k);
    if k == 0 {
        return coef;
    }
    let basis = q.slice(ndarray::s![..k, ..]);
    for _ in 0..2 {
        let c = basis.dot(&w.view()) * weight;
        // w -= basis^T c
        let correction = basis.t().dot(&c);
        *w -= &correction;
        coef += &c;
    }
    coef
}

pub fn qr_orthonormalize(m: ArrayView2<f64>, weight: f64) -> QrFactors {
    let (r_rows, n) = m.dim();
    assert!(weight > 0.0, "quadrature weight must be positive");
    assert!(r_rows <= n, "more rows than grid points");
    let scale = m
        .outer_iter()
        .map(|row| weighted_dot(row, row, weight).sqrt())
        .fold(0.0, f64::max);
    let tol = DEFICIENCY_THRESHOLD * scale;

    let mut q = Array2::<f64>::zeros((r_rows, n));
    let mut r = Array2::<f64>::zeros((r_rows, r_rows));
    let mut deficient = false;
    let mut fill_rng = ChaCha8Rng::seed_from_u64(FILL_SEED);

    for i in 0..r_rows {
        let mut w = m.row(i).to_owned();
        let coef = project_out(q.view(), i, &mut w, weight);
        r.row_mut(i).slice_mut(ndarray::s![..i]).assign(&coef);
        let norm = weighted_dot(w.view(), w.view(), weight).sqrt();
        if norm > tol && norm > 0.0 {
            r[[i, i]] = norm;
            Zip::from(q.row_mut(i)).and(&w).for_each(|d, s| *d = s / norm);
            continue;
        }
        deficient = true;
        loop {
            let mut fill = Array1::from_iter((0..n).map(|_| fill_rng.gen_range(-1.0..1.0)));
            project_out(q.view(), i, &mut fill, weight);
            let fnorm = weighted_dot(fill.view(), fill.view(), weight).sqrt();
            let raw = (n as f64 * weight / 3.0).sqrt();
            if fnorm > 1e-3 * raw {
                Zip::from(q.row_mut(i)).and(&fill).for_each(|d, s| *d = s / fnorm);
                break;
            }
        }
    }
    QrFactors { q, r, deficient }
}

/// Max-norm deviation of the weighted Gram matrix of `q`'s rows from the identity.
pub fn orthonormality_defect(q: ArrayView2<f64>, weight: f64) -> f64 {
    let gram = q.dot(&q.t()) * weight;
    let mut worst = 0.0f64;
    for ((i, j), g) in gram.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((g - target).abs());
    }
    worst
}
