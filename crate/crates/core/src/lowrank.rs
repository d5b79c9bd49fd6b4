//! Factored representation `f(x, v) = sum_ij X_i(x) S_ij V_j(v)` and its
//! velocity moments.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::grid::GridError;
use crate::phase::PhaseSpace;
use crate::qr::orthonormality_defect;

/// Low-rank state. Rows of `x` (r x n_x) and `v` (r x n_v) are basis functions,
/// orthonormal under the quadrature-weighted inner product of their axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankState {
    pub x: Array2<f64>,
    pub s: Array2<f64>,
    pub v: Array2<f64>,
}

impl LowRankState {
    pub fn new(x: Array2<f64>, s: Array2<f64>, v: Array2<f64>) -> Self {
        let r = s.nrows();
        assert_eq!(s.ncols(), r, "coupling matrix must be square");
        assert_eq!(x.nrows(), r, "X basis rank mismatch");
        assert_eq!(v.nrows(), r, "V basis rank mismatch");
        Self { x, s, v }
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    /// `K_j = sum_i X_i S_ij`, one row per `j`.
    pub fn k_factor(&self) -> Array2<f64> {
        self.s.t().dot(&self.x)
    }

    /// `L_i = sum_j S_ij V_j`, one row per `i`.
    pub fn l_factor(&self) -> Array2<f64> {
        self.s.dot(&self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.s.iter().chain(self.x.iter()).chain(self.v.iter()).all(|v| v.is_finite())
    }

    /// Largest orthonormality defect of the two bases.
    pub fn orthonormality_defect(&self, phase: &PhaseSpace) -> f64 {
        let g = phase.grid();
        orthonormality_defect(self.x.view(), g.h_x()).max(orthonormality_defect(self.v.view(), g.h_v()))
    }
}

/// `sum_i X_i(x) * quad_v(weight * L_i)` for a space basis and velocity factors.
pub fn factored_moment(
    phase: &PhaseSpace,
    x_basis: ArrayView2<f64>,
    l_factors: ArrayView2<f64>,
    weight: Option<ArrayView1<f64>>,
) -> Array1<f64> {
    let hv = phase.grid().h_v();
    let integrals: Array1<f64> = match weight {
        Some(w) => l_factors.dot(&w) * hv,
        None => l_factors.sum_axis(ndarray::Axis(1)) * hv,
    };
    x_basis.t().dot(&integrals)
}

/// `rho(x) = int f dv`.
pub fn charge_density(phase: &PhaseSpace, state: &LowRankState) -> Array1<f64> {
    factored_moment(phase, state.x.view(), state.l_factor().view(), None)
}

/// `(j1, j2)(x) = int (v1, v2) f dv`.
pub fn current_density(phase: &PhaseSpace, state: &LowRankState) -> (Array1<f64>, Array1<f64>) {
    current_from_factors(phase, state.x.view(), state.l_factor().view())
}

/// Current density of `sum_i X_i(x) L_i(v)`.
pub fn current_from_factors(
    phase: &PhaseSpace,
    x_basis: ArrayView2<f64>,
    l_factors: ArrayView2<f64>,
) -> (Array1<f64>, Array1<f64>) {
    (
        factored_moment(phase, x_basis, l_factors, Some(phase.v1().view())),
        factored_moment(phase, x_basis, l_factors, Some(phase.v2().view())),
    )
}

/// Materializes `f` as an `n_x x n_v` matrix. Refuses grids above the size limit.
pub fn reconstruct_full(phase: &PhaseSpace, state: &LowRankState) -> Result<Array2<f64>, GridError> {
    phase.grid().check_materializable()?;
    Ok(state.x.t().dot(&state.l_factor()))
}
