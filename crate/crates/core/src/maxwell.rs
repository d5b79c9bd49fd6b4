//! Reduced electromagnetic field `(E1, E2, B3)` on the periodic x-grid.
//!
//! `E` lives on integer time levels and `B3` half a step ahead when driven by
//! the staggered stepper. Curl terms reduce to `(0, -dx B3)` for `E` and
//! `-dx E2` for `B3`.
//!
//! `j = int v f dv` is the electron particle flux, so the field is driven by
//! `dE/dt = curl B + j`: with `dx E1 = n0 - rho` and `d(rho)/dt + dx j1 = 0`
//! this is the only sign that keeps Gauss' law and the total energy invariant.

use ndarray::{Array1, ArrayView1};

use crate::phase::PhaseSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct EMField {
    pub e1: Array1<f64>,
    pub e2: Array1<f64>,
    pub b3: Array1<f64>,
    /// Artificial diffusion coefficient; zero disables damping.
    pub eps_dissipation: f64,
}

/// Field values held constant during one sub-flow.
#[derive(Debug, Clone, Copy)]
pub struct FrozenFields<'a> {
    pub e1: ArrayView1<'a, f64>,
    pub e2: ArrayView1<'a, f64>,
    pub b3: ArrayView1<'a, f64>,
}

impl EMField {
    pub fn zeros(n_x: usize) -> Self {
        Self {
            e1: Array1::zeros(n_x),
            e2: Array1::zeros(n_x),
            b3: Array1::zeros(n_x),
            eps_dissipation: 0.0,
        }
    }

    pub fn frozen(&self) -> FrozenFields<'_> {
        FrozenFields {
            e1: self.e1.view(),
            e2: self.e2.view(),
            b3: self.b3.view(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.e1.iter().chain(self.e2.iter()).chain(self.b3.iter()).all(|v| v.is_finite())
    }

    fn damp(&self, phase: &PhaseSpace, u: Array1<f64>, tau: f64) -> Array1<f64> {
        if self.eps_dissipation > 0.0 {
            phase.implicit_diffusion_step(u.view(), self.eps_dissipation, tau)
        } else {
            u
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussReport {
    pub l2_residual: f64,
    /// Mean of the numerical charge density.
    pub numerical_n0: f64,
}

/// Zero-mean `E1` with `dx E1 = mean(rho) - rho`.
pub fn init_e_from_gauss(phase: &PhaseSpace, rho: ArrayView1<f64>) -> Array1<f64> {
    -phase.x_transform().antiderivative(rho)
}

/// Discrete L2 norm of `dx E1 - (mean(rho) - rho)`.
pub fn gauss_residual(phase: &PhaseSpace, e1: ArrayView1<f64>, rho: ArrayView1<f64>) -> GaussReport {
    let n0 = phase.grid().mean_x(rho);
    let mut r = phase.spectral_deriv_x(e1, 1);
    r += &rho;
    r -= n0;
    let sq = r.mapv(|v| v * v);
    GaussReport {
        l2_residual: phase.quad_x(sq.view()).sqrt(),
        numerical_n0: n0,
    }
}

/// `B3 - (tau/2) dx E2`: the half-level magnetic field that starts the staggered stepper.
pub fn bootstrap_half_step_b(phase: &PhaseSpace, b0: ArrayView1<f64>, e2: ArrayView1<f64>, tau: f64) -> Array1<f64> {
    &b0 - &(phase.spectral_deriv_x(e2, 1) * (0.5 * tau))
}

/// `E + (tau/2) curl B + (tau/2) j` with `field.b3` at the half level. No damping.
pub fn half_step_e(
    phase: &PhaseSpace,
    field: &EMField,
    j: (ArrayView1<f64>, ArrayView1<f64>),
    tau: f64,
) -> (Array1<f64>, Array1<f64>) {
    let h = 0.5 * tau;
    let e1 = &field.e1 + &(&j.0 * h);
    let curl = phase.spectral_deriv_x(field.b3.view(), 1);
    let e2 = &field.e2 + &((&j.1 - &curl) * h);
    (e1, e2)
}

/// Full `E` update from the half-level `B3` and current, followed by damping.
/// Returns the uncorrected field in place.
pub fn advance_e(phase: &PhaseSpace, field: &mut EMField, j: (ArrayView1<f64>, ArrayView1<f64>), tau: f64) {
    let e1 = &field.e1 + &(&j.0 * tau);
    let curl = phase.spectral_deriv_x(field.b3.view(), 1);
    let e2 = &field.e2 + &((&j.1 - &curl) * tau);
    field.e1 = field.damp(phase, e1, tau);
    field.e2 = field.damp(phase, e2, tau);
}

/// `B3 - tau dx E2` using the current `E2`, followed by damping.
pub fn advance_b(phase: &PhaseSpace, field: &mut EMField, tau: f64) {
    let b = &field.b3 - &(phase.spectral_deriv_x(field.e2.view(), 1) * tau);
    field.b3 = field.damp(phase, b, tau);
}

/// Leapfrog update: `E^n, B^{n+1/2}` to `E^{n+1}, B^{n+3/2}` with the mid-step current.
pub fn advance_fields_staggered(
    phase: &PhaseSpace,
    field: &mut EMField,
    j_half: (ArrayView1<f64>, ArrayView1<f64>),
    tau: f64,
) {
    advance_e(phase, field, j_half, tau);
    advance_b(phase, field, tau);
}

/// Non-staggered update: `E^1` from `B^0, j^0`, then `B^1` from `E^1`.
pub fn advance_fields_first_order(
    phase: &PhaseSpace,
    field: &mut EMField,
    j0: (ArrayView1<f64>, ArrayView1<f64>),
    tau: f64,
) {
    advance_e(phase, field, j0, tau);
    advance_b(phase, field, tau);
}

/// Projects `e1_bar` onto the Gauss-consistent set for the charge density `rho_new`:
/// `E1 = e1_bar - tau dx phi` with `-phi'' = (mean(rho) - rho - dx e1_bar) / tau`.
pub fn divergence_correction(
    phase: &PhaseSpace,
    e1_bar: ArrayView1<f64>,
    rho_new: ArrayView1<f64>,
    tau: f64,
) -> Array1<f64> {
    let n0 = phase.grid().mean_x(rho_new);
    let div = phase.spectral_deriv_x(e1_bar, 1);
    let g = (-&rho_new - &div + n0) / tau;
    let phi = phase.poisson_solve_periodic(g.view());
    &e1_bar - &(phase.spectral_deriv_x(phi.view(), 1) * tau)
}
