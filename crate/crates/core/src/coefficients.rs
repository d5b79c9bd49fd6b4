//! Projected coefficient matrices of the split sub-flows.
//!
//! Velocity integrals (from the V basis):
//!   c1_jl = int v1 V_j V_l,  c2_jl = int V_j grad_v V_l,
//!   c3_jl = int V_j (v2 d_v1 V_l - v1 d_v2 V_l).
//! Space integrals (from the X basis and the frozen fields):
//!   d1_ik = int X_i E X_k,  d2_ik = int X_i d_x X_k,  d3_ik = int X_i B3 X_k.
//! Vector-valued coefficients are stored per component.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::phase::PhaseSpace;
use crate::spectral::VAxis;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCoefficients {
    pub c1: Array2<f64>,
    pub c2: [Array2<f64>; 2],
    pub c3: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceCoefficients {
    pub d1: [Array2<f64>; 2],
    pub d2: Array2<f64>,
    pub d3: Array2<f64>,
}

fn scale_columns(a: ArrayView2<f64>, w: ArrayView1<f64>) -> Array2<f64> {
    &a * &w
}

pub fn compute_c_coefficients(phase: &PhaseSpace, v: ArrayView2<f64>) -> VelocityCoefficients {
    let hv = phase.grid().h_v();
    let dv1 = phase.spectral_deriv_v_rows(v, VAxis::V1);
    let dv2 = phase.spectral_deriv_v_rows(v, VAxis::V2);
    let c1 = v.dot(&scale_columns(v, phase.v1().view()).t()) * hv;
    let c2 = [v.dot(&dv1.t()) * hv, v.dot(&dv2.t()) * hv];
    let rotated = scale_columns(dv1.view(), phase.v2().view()) - scale_columns(dv2.view(), phase.v1().view());
    let c3 = v.dot(&rotated.t()) * hv;
    VelocityCoefficients { c1, c2, c3 }
}

pub fn compute_d_coefficients(
    phase: &PhaseSpace,
    x: ArrayView2<f64>,
    e1: ArrayView1<f64>,
    e2: ArrayView1<f64>,
    b3: ArrayView1<f64>,
) -> SpaceCoefficients {
    let hx = phase.grid().h_x();
    let weighted = |f: ArrayView1<f64>| x.dot(&scale_columns(x, f).t()) * hx;
    let dx = phase.spectral_deriv_x_rows(x, 1);
    SpaceCoefficients {
        d1: [weighted(e1), weighted(e2)],
        d2: x.dot(&dx.t()) * hx,
        d3: weighted(b3),
    }
}

/// `int X_i dx` for every basis row.
pub fn x_integrals(phase: &PhaseSpace, x: ArrayView2<f64>) -> Array1<f64> {
    x.sum_axis(ndarray::Axis(1)) * phase.grid().h_x()
}

/// Largest `|a_ij - sign * a_ji|`.
pub fn symmetry_defect(a: ArrayView2<f64>, sign: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[[i, j]] - sign * a[[j, i]]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::qr::qr_orthonormalize;
    use ndarray::{stack, Array1, Axis};
    use std::f64::consts::PI;

    fn landau_phase(n_v: usize) -> PhaseSpace {
        PhaseSpace::new(GridSpec::new(33, n_v, n_v, 2.0 * PI / 0.4, (-5.0, 5.0), (-5.0, 5.0)).unwrap())
    }

    fn hermite_pair(phase: &PhaseSpace) -> Array2<f64> {
        let g = phase.grid();
        let v1 = g.sample_v(|a, b| PI.powf(-0.5) * (-(a * a + b * b) / 2.0).exp());
        let v2 = g.sample_v(|a, b| (2.0 / PI).sqrt() * a * (-(a * a + b * b) / 2.0).exp());
        stack(Axis(0), &[v1.view(), v2.view()]).unwrap()
    }

    #[test]
    fn gaussian_basis_coefficients() {
        let phase = landau_phase(128);
        let v = hermite_pair(&phase);
        let c = compute_c_coefficients(&phase, v.view());
        // Boundary truncation of exp(-v^2/2) at |v| = 5 is ~4e-6 in the integrand.
        assert!(c.c1[[0, 0]].abs() < 1e-10);
        assert!(c.c2[0][[0, 0]].abs() < 1e-10 && c.c2[1][[0, 0]].abs() < 1e-10);
        assert!(c.c3[[0, 0]].abs() < 1e-10);
        assert!((c.c1[[0, 1]] - 0.5f64.sqrt()).abs() < 1e-8);
        assert!((c.c2[0][[0, 1]] + c.c2[0][[1, 0]]).abs() < 1e-8);
        assert!((c.c2[1][[0, 1]] + c.c2[1][[1, 0]]).abs() < 1e-8);
    }

    #[test]
    fn constant_x_basis_averages_fields() {
        let phase = landau_phase(8);
        let g = *phase.grid();
        let l = g.x.length();
        let x = Array2::from_elem((1, 33), 1.0 / l.sqrt());
        let e1 = g.sample_x(|x| 0.3 + (0.4 * x).sin());
        let e2 = g.sample_x(|x| -1.2 + (0.8 * x).cos());
        let b = Array1::zeros(33);
        let d = compute_d_coefficients(&phase, x.view(), e1.view(), e2.view(), b.view());
        assert!(d.d2[[0, 0]].abs() < 1e-14);
        assert!((d.d1[0][[0, 0]] - 0.3).abs() < 1e-12);
        assert!((d.d1[1][[0, 0]] + 1.2).abs() < 1e-12);
        assert_eq!(d.d3[[0, 0]], 0.0);
    }

    #[test]
    fn zero_fields_and_unit_magnetic_field() {
        let phase = landau_phase(8);
        let g = *phase.grid();
        let raw = Array2::from_shape_fn((4, 33), |(i, m)| ((i + 1) as f64 * 0.37 * m as f64).sin() + i as f64);
        let x = qr_orthonormalize(raw.view(), g.h_x()).q;
        let zero = Array1::zeros(33);
        let one = Array1::from_elem(33, 1.0);
        let d = compute_d_coefficients(&phase, x.view(), zero.view(), zero.view(), one.view());
        assert!(d.d1[0].iter().chain(d.d1[1].iter()).all(|v| *v == 0.0));
        assert!((&d.d3 - &Array2::<f64>::eye(4)).iter().all(|v| v.abs() < 1e-10));
    }
}
