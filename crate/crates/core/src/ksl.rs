//! Projector-splitting sub-flows and the Lie and Strang steppers.
//!
//! K-flow (`K_j = sum_i X_i S_ij`, V frozen):
//!   dK/dt = -c1 dx K + c2_1 (E1 K) + c2_2 (E2 K) + c3 (B3 K)
//! S-flow (backward, both bases frozen):
//!   dS/dt = d2 S c1^T - d1_1 S c2_1^T - d1_2 S c2_2^T - d3 S c3^T
//! L-flow (`L_i = sum_j S_ij V_j`, X frozen):
//!   dL/dt = -d2 (v1 L) + d1_1 dv1 L + d1_2 dv2 L + d3 (v2 dv1 L - v1 dv2 L)

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis, Zip};
use thiserror::Error;

use crate::coefficients::{compute_c_coefficients, compute_d_coefficients, SpaceCoefficients, VelocityCoefficients};
use crate::lowrank::{charge_density, current_density, current_from_factors, LowRankState};
use crate::maxwell::{
    advance_b, advance_e, advance_fields_first_order, divergence_correction, half_step_e, EMField, FrozenFields,
};
use crate::phase::PhaseSpace;
use crate::qr::qr_orthonormalize;
use crate::rk::{integrate, NonFiniteStage, SubstepConfig};
use crate::spectral::VAxis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    K,
    S,
    L,
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("{flow:?}-flow: {source}")]
pub struct StepError {
    pub flow: Flow,
    pub source: NonFiniteStage,
}

fn tag(flow: Flow) -> impl Fn(NonFiniteStage) -> StepError {
    move |source| StepError { flow, source }
}

fn scale_rows_by(a: &Array2<f64>, w: ArrayView1<f64>) -> Array2<f64> {
    a * &w
}

/// Right-hand side of the K-flow.
pub fn k_rhs(phase: &PhaseSpace, c: &VelocityCoefficients, fields: FrozenFields, k: &Array2<f64>) -> Array2<f64> {
    let dk = phase.spectral_deriv_x_rows(k.view(), 1);
    let mut out = Array2::zeros(k.raw_dim());
    general_mat_mul(-1.0, &c.c1, &dk, 0.0, &mut out);
    general_mat_mul(1.0, &c.c2[0], &scale_rows_by(k, fields.e1), 1.0, &mut out);
    general_mat_mul(1.0, &c.c2[1], &scale_rows_by(k, fields.e2), 1.0, &mut out);
    general_mat_mul(1.0, &c.c3, &scale_rows_by(k, fields.b3), 1.0, &mut out);
    out
}

/// Right-hand side of the S-flow.
pub fn s_rhs(c: &VelocityCoefficients, d: &SpaceCoefficients, s: &Array2<f64>) -> Array2<f64> {
    let mut out = d.d2.dot(s).dot(&c.c1.t());
    out -= &d.d1[0].dot(s).dot(&c.c2[0].t());
    out -= &d.d1[1].dot(s).dot(&c.c2[1].t());
    out -= &d.d3.dot(s).dot(&c.c3.t());
    out
}

/// Right-hand side of the L-flow, evaluated as
/// `dv1[(d1_1 + v2 d3) L] + dv2[(d1_2 - v1 d3) L] - v1 (d2 L)`:
/// row mixing and multiplication by the other velocity coordinate commute with each derivative.
pub fn l_rhs(phase: &PhaseSpace, d: &SpaceCoefficients, l: &Array2<f64>) -> Array2<f64> {
    let r = l.nrows();
    let stacked = concatenate![Axis(0), d.d1[0], d.d1[1], d.d3, d.d2];
    let mut prod = Array2::zeros((4 * r, l.ncols()));
    general_mat_mul(1.0, &stacked, l, 0.0, &mut prod);
    let mut a = prod.slice(s![..r, ..]).to_owned();
    let mut b = prod.slice(s![r..2 * r, ..]).to_owned();
    let (d3l, d2l) = (prod.slice(s![2 * r..3 * r, ..]), prod.slice(s![3 * r.., ..]));
    Zip::from(&mut a)
        .and(&mut b)
        .and(&d3l)
        .and_broadcast(phase.v1())
        .and_broadcast(phase.v2())
        .for_each(|a, b, t, v1, v2| {
            *a += v2 * t;
            *b -= v1 * t;
        });
    phase.spectral_deriv_v_rows_in_place(&mut a, VAxis::V1);
    phase.spectral_deriv_v_rows_in_place(&mut b, VAxis::V2);
    Zip::from(&mut a)
        .and(&b)
        .and(&d2l)
        .and_broadcast(phase.v1())
        .for_each(|a, b, t, v1| *a += b - v1 * t);
    a
}

/// Output of one Strang step: state at `t + tau`, `E` at `t + tau`, `B3` at `t + 3 tau / 2`.
#[derive(Debug, Clone)]
pub struct StrangOutput {
    pub state: LowRankState,
    pub field: EMField,
    /// Current density at `t + tau / 2` that drove the field update.
    pub j_half: (Array1<f64>, Array1<f64>),
}

/// Splitting integrator bound to one phase-space grid.
#[derive(Debug, Clone, Copy)]
pub struct KslIntegrator<'a> {
    pub phase: &'a PhaseSpace,
    pub cfg: SubstepConfig,
}

impl<'a> KslIntegrator<'a> {
    pub fn new(phase: &'a PhaseSpace, cfg: SubstepConfig) -> Self {
        Self { phase, cfg }
    }

    pub fn integrate_k(
        &self,
        k0: &Array2<f64>,
        c: &VelocityCoefficients,
        fields: FrozenFields,
        tau: f64,
    ) -> Result<Array2<f64>, StepError> {
        integrate(k0, tau, self.cfg, |k| k_rhs(self.phase, c, fields, k)).map_err(tag(Flow::K))
    }

    pub fn integrate_s(
        &self,
        s0: &Array2<f64>,
        c: &VelocityCoefficients,
        d: &SpaceCoefficients,
        tau: f64,
    ) -> Result<Array2<f64>, StepError> {
        integrate(s0, tau, self.cfg, |s| s_rhs(c, d, s)).map_err(tag(Flow::S))
    }

    pub fn integrate_l(&self, l0: &Array2<f64>, d: &SpaceCoefficients, tau: f64) -> Result<Array2<f64>, StepError> {
        integrate(l0, tau, self.cfg, |l| l_rhs(self.phase, d, l)).map_err(tag(Flow::L))
    }

    /// `K = R Q` gives `X = Q`, `S = R^T`.
    fn refactor_k(&self, k: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let f = qr_orthonormalize(k.view(), self.phase.grid().h_x());
        (f.q, f.r.reversed_axes())
    }

    /// `L = R Q` gives `S = R`, `V = Q`.
    fn refactor_l(&self, l: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let f = qr_orthonormalize(l.view(), self.phase.grid().h_v());
        (f.r, f.q)
    }

    fn d_coefficients(&self, x: &Array2<f64>, fields: FrozenFields) -> SpaceCoefficients {
        compute_d_coefficients(self.phase, x.view(), fields.e1, fields.e2, fields.b3)
    }

    /// K-flow over `tau` followed by QR; `V` unchanged.
    pub fn k_step(&self, state: &LowRankState, fields: FrozenFields, tau: f64) -> Result<LowRankState, StepError> {
        let c = compute_c_coefficients(self.phase, state.v.view());
        let k = self.integrate_k(&state.k_factor(), &c, fields, tau)?;
        let (x, s) = self.refactor_k(&k);
        Ok(LowRankState::new(x, s, state.v.clone()))
    }

    pub fn s_step(
        &self,
        s: &Array2<f64>,
        c: &VelocityCoefficients,
        d: &SpaceCoefficients,
        tau: f64,
    ) -> Result<Array2<f64>, StepError> {
        self.integrate_s(s, c, d, tau)
    }

    /// L-flow over `tau` followed by QR; `X` unchanged.
    pub fn l_step(&self, state: &LowRankState, fields: FrozenFields, tau: f64) -> Result<LowRankState, StepError> {
        let d = self.d_coefficients(&state.x, fields);
        let l = self.integrate_l(&state.l_factor(), &d, tau)?;
        let (s, v) = self.refactor_l(&l);
        Ok(LowRankState::new(state.x.clone(), s, v))
    }

    /// First-order step: K, S, L over `tau` with the fields at the step start,
    /// then the non-staggered field update with the initial current.
    pub fn lie_step(&self, state: &LowRankState, field: &EMField, tau: f64) -> Result<(LowRankState, EMField), StepError> {
        let fields = field.frozen();
        let j0 = current_density(self.phase, state);
        let c = compute_c_coefficients(self.phase, state.v.view());
        let k = self.integrate_k(&state.k_factor(), &c, fields, tau)?;
        let (x, s) = self.refactor_k(&k);
        let d = self.d_coefficients(&x, fields);
        let s = self.integrate_s(&s, &c, &d, tau)?;
        let l = self.integrate_l(&s.dot(&state.v), &d, tau)?;
        let (s, v) = self.refactor_l(&l);

        let mut next = field.clone();
        advance_fields_first_order(self.phase, &mut next, (j0.0.view(), j0.1.view()), tau);
        Ok((LowRankState::new(x, s, v), next))
    }

    /// Second-order step. `field.b3` must hold `B3` half a step ahead of `E`.
    /// With `correction`, `E1` is projected onto Gauss' law for the new state.
    pub fn strang_step(
        &self,
        state: &LowRankState,
        field: &EMField,
        tau: f64,
        correction: bool,
    ) -> Result<StrangOutput, StepError> {
        let half = 0.5 * tau;
        let j0 = current_density(self.phase, state);
        let (e1_half, e2_half) = half_step_e(self.phase, field, (j0.0.view(), j0.1.view()), tau);
        let fields = FrozenFields {
            e1: e1_half.view(),
            e2: e2_half.view(),
            b3: field.b3.view(),
        };

        let c0 = compute_c_coefficients(self.phase, state.v.view());
        let k = self.integrate_k(&state.k_factor(), &c0, fields, half)?;
        let (x_half, s_half) = self.refactor_k(&k);

        let d = self.d_coefficients(&x_half, fields);
        let s1 = self.integrate_s(&s_half, &c0, &d, half)?;

        let l0 = s1.dot(&state.v);
        let l_half = self.integrate_l(&l0, &d, half)?;
        let j_half = current_from_factors(self.phase, x_half.view(), l_half.view());
        let l1 = self.integrate_l(&l0, &d, tau)?;
        let (s2, v1) = self.refactor_l(&l1);

        let c1 = compute_c_coefficients(self.phase, v1.view());
        let s_52 = self.integrate_s(&s2, &c1, &d, half)?;
        let k = self.integrate_k(&s_52.t().dot(&x_half), &c1, fields, half)?;
        let (x1, s3) = self.refactor_k(&k);
        let next_state = LowRankState::new(x1, s3, v1);

        let mut next = field.clone();
        advance_e(self.phase, &mut next, (j_half.0.view(), j_half.1.view()), tau);
        if correction {
            let rho = charge_density(self.phase, &next_state);
            next.e1 = divergence_correction(self.phase, next.e1.view(), rho.view(), tau);
        }
        advance_b(self.phase, &mut next, tau);
        Ok(StrangOutput {
            state: next_state,
            field: next,
            j_half,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::rk::RkScheme;
    use ndarray::{stack, Axis};
    use std::f64::consts::PI;

    fn phase(n_x: usize, n_v: usize) -> PhaseSpace {
        PhaseSpace::new(GridSpec::new(n_x, n_v, n_v, 2.0 * PI / 0.4, (-8.0, 8.0), (-8.0, 8.0)).unwrap())
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn normalized_rows(phase: &PhaseSpace, rows: &[Array1<f64>], weight: f64) -> Array2<f64> {
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        let _ = phase;
        qr_orthonormalize(stack(Axis(0), &views).unwrap().view(), weight).q
    }

    fn maxwellian(phase: &PhaseSpace) -> Array1<f64> {
        phase.grid().sample_v(|a, b| (-(a * a + b * b) / 2.0).exp())
    }

    fn homogeneous_state(phase: &PhaseSpace, r: usize) -> LowRankState {
        let g = phase.grid();
        let mut xs = vec![Array1::from_elem(g.n_x(), 1.0)];
        let mut vs = vec![maxwellian(phase)];
        for m in 1..r {
            xs.push(g.sample_x(|x| (0.4 * m as f64 * x).cos()));
            vs.push(g.sample_v(|a, b| a.powi(m as i32) * (-(a * a + b * b) / 2.0).exp()));
        }
        let x = normalized_rows(phase, &xs, g.h_x());
        let v = normalized_rows(phase, &vs, g.h_v());
        let mut s = Array2::zeros((r, r));
        s[[0, 0]] = 3.0;
        LowRankState::new(x, s, v)
    }

    #[test]
    fn k_flow_without_fields_and_even_basis_is_stationary() {
        let ph = phase(17, 24);
        let g = *ph.grid();
        let v = normalized_rows(&ph, &[maxwellian(&ph)], g.h_v());
        let x = normalized_rows(&ph, &[g.sample_x(|x| 1.0 + 0.3 * (0.4 * x).cos())], g.h_x());
        let state = LowRankState::new(x, Array2::from_elem((1, 1), 2.0), v);
        let zero = EMField::zeros(17);
        let ksl = KslIntegrator::new(&ph, SubstepConfig::default());
        let next = ksl.k_step(&state, zero.frozen(), 0.1).unwrap();
        assert!(max_abs(&(&next.k_factor() - &state.k_factor())) < 1e-12);
    }

    #[test]
    fn k_flow_of_constant_factor_is_stationary() {
        let ph = phase(17, 16);
        let st = homogeneous_state(&ph, 1);
        let zero = EMField::zeros(17);
        let ksl = KslIntegrator::new(&ph, SubstepConfig::default());
        let c = compute_c_coefficients(&ph, st.v.view());
        let k0 = st.k_factor();
        let k = ksl.integrate_k(&k0, &c, zero.frozen(), 0.3).unwrap();
        assert!(max_abs(&(&k - &k0)) < 1e-13);
    }

    #[test]
    fn s_flow_zero_and_diagonal_cases() {
        let r = 3;
        let zero = Array2::<f64>::zeros((r, r));
        let c = VelocityCoefficients {
            c1: zero.clone(),
            c2: [zero.clone(), zero.clone()],
            c3: zero.clone(),
        };
        let d = SpaceCoefficients {
            d1: [zero.clone(), zero.clone()],
            d2: zero.clone(),
            d3: zero.clone(),
        };
        let s0 = Array2::from_shape_fn((r, r), |(i, j)| (i as f64 + 1.0) * 0.3 - j as f64);
        let ph = phase(9, 8);
        let cfg = SubstepConfig::default();
        let ksl = KslIntegrator::new(&ph, cfg);
        assert_eq!(ksl.s_step(&s0, &c, &d, 0.7).unwrap(), s0);

        let c1 = Array2::from_diag(&ndarray::arr1(&[0.5, -1.0, 2.0]));
        let d2 = Array2::from_diag(&ndarray::arr1(&[1.0, 0.25, -0.5]));
        let c = VelocityCoefficients { c1: c1.clone(), ..c };
        let d = SpaceCoefficients { d2: d2.clone(), ..d };
        let tau = 0.1;
        let s = ksl.s_step(&s0, &c, &d, tau).unwrap();
        for i in 0..r {
            for j in 0..r {
                let z = c1[[j, j]] * d2[[i, i]] * tau;
                let exact = z.exp() * s0[[i, j]];
                // local RK4 truncation summed over the substeps
                let n = cfg.n_substeps as f64;
                let bound = 2.0 * s0[[i, j]].abs() * z.abs().powi(5) / (120.0 * n.powi(4)) + 1e-15;
                assert!((s[[i, j]] - exact).abs() < bound, "{i}{j}");
            }
        }
    }

    #[test]
    fn l_rhs_matches_the_uncommuted_form() {
        use rand::{Rng, SeedableRng};
        let ph = phase(9, 24);
        let r = 4;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rand_mat = |rows, cols| Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0));
        let d = SpaceCoefficients {
            d1: [rand_mat(r, r), rand_mat(r, r)],
            d2: rand_mat(r, r),
            d3: rand_mat(r, r),
        };
        let l = rand_mat(r, ph.grid().n_v());
        let dv1 = ph.spectral_deriv_v_rows(l.view(), VAxis::V1);
        let dv2 = ph.spectral_deriv_v_rows(l.view(), VAxis::V2);
        let direct = d.d1[0].dot(&dv1) + d.d1[1].dot(&dv2) + &d.d3.dot(&dv1) * ph.v2()
            - &(d.d2.dot(&l) + d.d3.dot(&dv2)) * ph.v1();
        let scale = max_abs(&direct);
        assert!(max_abs(&(&l_rhs(&ph, &d, &l) - &direct)) < 1e-13 * scale);
    }

    #[test]
    fn l_flow_zero_coefficients_and_v1_translation() {
        let ph = phase(9, 64);
        let g = *ph.grid();
        let r = 2;
        let zero = Array2::<f64>::zeros((r, r));
        let mut d = SpaceCoefficients {
            d1: [zero.clone(), zero.clone()],
            d2: zero.clone(),
            d3: zero,
        };
        let bump = |shift: f64| g.sample_v(move |a, b| (-((a + shift).powi(2) + b * b)).exp());
        let l0 = stack(Axis(0), &[bump(0.0).view(), (bump(0.0) * 0.5).view()]).unwrap();
        let ksl = KslIntegrator::new(&ph, SubstepConfig::default());
        assert_eq!(ksl.integrate_l(&l0, &d, 0.4).unwrap(), l0);

        // dL/dt = e dv1 L translates by e t towards negative v1
        let e = 0.8;
        let tau = 0.25;
        d.d1[0] = Array2::eye(r) * e;
        let l = ksl.integrate_l(&l0, &d, tau).unwrap();
        let target = bump(e * tau);
        assert!((&l.row(0) - &target).iter().all(|v| v.abs() < 1e-6));
        assert!((&l.row(1) - &(&target * 0.5)).iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let ph = phase(17, 24);
        let st = homogeneous_state(&ph, 4);
        let field = EMField::zeros(17);
        let ksl = KslIntegrator::new(&ph, SubstepConfig::default());
        let f0 = st.x.t().dot(&st.l_factor());
        let out = ksl.strang_step(&st, &field, 0.1, false).unwrap();
        let f1 = out.state.x.t().dot(&out.state.l_factor());
        assert!(max_abs(&(&f1 - &f0)) < 1e-12);
        assert!(out.field.is_finite());
        assert!(out.field.e1.iter().chain(out.field.e2.iter()).chain(out.field.b3.iter()).all(|v| v.abs() < 1e-12));

        let (lie, lie_field) = ksl.lie_step(&st, &field, 0.1).unwrap();
        let f2 = lie.x.t().dot(&lie.l_factor());
        assert!(max_abs(&(&f2 - &f0)) < 1e-12);
        assert!(lie_field.e1.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bases_stay_orthonormal() {
        let ph = phase(17, 16);
        let g = *ph.grid();
        let mut st = homogeneous_state(&ph, 4);
        st.s = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 1.0 } else { 0.1 * (i + 2 * j) as f64 });
        let mut field = EMField::zeros(17);
        field.e1 = g.sample_x(|x| 0.2 * (0.4 * x).sin());
        field.b3 = g.sample_x(|x| 0.1 * (0.4 * x).cos());
        let cfg = SubstepConfig {
            n_substeps: 3,
            scheme: RkScheme::Dopri5,
        };
        let ksl = KslIntegrator::new(&ph, cfg);
        let k = ksl.k_step(&st, field.frozen(), 0.1).unwrap();
        assert!(k.orthonormality_defect(&ph) < 1e-10);
        let l = ksl.l_step(&k, field.frozen(), 0.1).unwrap();
        assert!(l.orthonormality_defect(&ph) < 1e-10);
        let out = ksl.strang_step(&l, &field, 0.1, true).unwrap();
        assert!(out.state.orthonormality_defect(&ph) < 1e-10);
    }

    #[test]
    fn non_finite_data_aborts_with_flow() {
        let ph = phase(9, 8);
        let mut st = homogeneous_state(&ph, 2);
        st.s[[1, 1]] = f64::NAN;
        let field = EMField::zeros(9);
        let ksl = KslIntegrator::new(&ph, SubstepConfig::default());
        let err = ksl.strang_step(&st, &field, 0.1, false).unwrap_err();
        assert_eq!(err.flow, Flow::K);
        assert_eq!(err.source.substep, 0);
    }
}
