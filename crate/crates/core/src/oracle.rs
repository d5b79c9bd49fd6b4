//! Unsplit method-of-lines solver on the full `n_x x n_v` grid.
//!
//! Shares the spectral kernels and the field updates with the low-rank path,
//! so at full rank the two differ only by projection and splitting.

use ndarray::{Array1, Array2, Zip};

use crate::grid::GridError;
use crate::lowrank::{reconstruct_full, LowRankState};
use crate::maxwell::{advance_b, advance_e, divergence_correction, half_step_e, EMField, FrozenFields};
use crate::phase::PhaseSpace;
use crate::rk::{integrate, NonFiniteStage, SubstepConfig};
use crate::spectral::VAxis;

/// Distribution function on the whole grid: one row per x point, one column per velocity point.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTensorState {
    pub f: Array2<f64>,
}

impl FullTensorState {
    pub fn new(phase: &PhaseSpace, f: Array2<f64>) -> Result<Self, GridError> {
        let g = phase.grid();
        g.check_materializable()?;
        assert_eq!(f.dim(), (g.n_x(), g.n_v()), "tensor shape does not match the grid");
        Ok(Self { f })
    }

    pub fn from_lowrank(phase: &PhaseSpace, state: &LowRankState) -> Result<Self, GridError> {
        Ok(Self {
            f: reconstruct_full(phase, state)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().all(|v| v.is_finite())
    }

    pub fn mass(&self, phase: &PhaseSpace) -> f64 {
        let g = phase.grid();
        g.h_x() * g.h_v() * self.f.sum()
    }
}

/// `-v1 dx f + E . grad_v f + B3 (v2 dv1 f - v1 dv2 f)`.
pub fn vlasov_rhs(phase: &PhaseSpace, fields: FrozenFields, f: &Array2<f64>) -> Array2<f64> {
    let dx = phase.x_transform().deriv_columns(f.view(), 1);
    let d1 = phase.spectral_deriv_v_rows(f.view(), VAxis::V1);
    let d2 = phase.spectral_deriv_v_rows(f.view(), VAxis::V2);
    let mut out = Array2::zeros(f.raw_dim());
    for m in 0..f.nrows() {
        let (e1, e2, b) = (fields.e1[m], fields.e2[m], fields.b3[m]);
        Zip::from(out.row_mut(m))
            .and(dx.row(m))
            .and(d1.row(m))
            .and(d2.row(m))
            .and(phase.v1())
            .and(phase.v2())
            .for_each(|o, &fx, &f1, &f2, &v1, &v2| {
                *o = -v1 * fx + e1 * f1 + e2 * f2 + b * (v2 * f1 - v1 * f2);
            });
    }
    out
}

/// `(rho, j1, j2)` by direct quadrature over the velocity grid.
pub fn moments_full(phase: &PhaseSpace, f: &Array2<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let hv = phase.grid().h_v();
    (
        f.sum_axis(ndarray::Axis(1)) * hv,
        f.dot(phase.v1()) * hv,
        f.dot(phase.v2()) * hv,
    )
}

#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub state: FullTensorState,
    pub field: EMField,
    pub j_half: (Array1<f64>, Array1<f64>),
}

/// One step with the same field staging as the Strang stepper. The phase-space
/// flow is unsplit: `f` is integrated from the step start to `tau / 2` for the
/// mid-step current and, independently, to `tau`.
pub fn oracle_strang_step(
    phase: &PhaseSpace,
    state: &FullTensorState,
    field: &EMField,
    tau: f64,
    cfg: SubstepConfig,
    correction: bool,
) -> Result<OracleOutput, NonFiniteStage> {
    let (_, j1, j2) = moments_full(phase, &state.f);
    let (e1_half, e2_half) = half_step_e(phase, field, (j1.view(), j2.view()), tau);
    let fields = FrozenFields {
        e1: e1_half.view(),
        e2: e2_half.view(),
        b3: field.b3.view(),
    };
    let rhs = |f: &Array2<f64>| vlasov_rhs(phase, fields, f);
    let f_half = integrate(&state.f, 0.5 * tau, cfg, rhs)?;
    let (_, jh1, jh2) = moments_full(phase, &f_half);
    let f_new = integrate(&state.f, tau, cfg, rhs)?;

    let mut next = field.clone();
    advance_e(phase, &mut next, (jh1.view(), jh2.view()), tau);
    if correction {
        let (rho, _, _) = moments_full(phase, &f_new);
        next.e1 = divergence_correction(phase, next.e1.view(), rho.view(), tau);
    }
    advance_b(phase, &mut next, tau);
    Ok(OracleOutput {
        state: FullTensorState { f: f_new },
        field: next,
        j_half: (jh1, jh2),
    })
}
