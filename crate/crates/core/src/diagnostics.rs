//! Conserved quantities and monitoring values. All functions are read-only.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView1, ArrayView2};
use thiserror::Error;

use crate::coefficients::x_integrals;
use crate::lowrank::{charge_density, LowRankState};
use crate::maxwell::gauss_residual;
use crate::phase::PhaseSpace;

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("reference {quantity} is zero; relative error undefined")]
    ZeroReference { quantity: &'static str },
    #[error("Fourier mode {mode} is not resolved on {n} points")]
    UnresolvedMode { mode: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub electric: f64,
    pub magnetic: f64,
    pub kinetic: f64,
}

impl Energies {
    pub fn total(&self) -> f64 {
        self.electric + self.magnetic + self.kinetic
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub electric_energy: f64,
    pub magnetic_energy: f64,
    pub kinetic_energy: f64,
    pub total_energy: f64,
    pub gauss_l2: f64,
    pub sigma_min: f64,
    pub mode1_e1: f64,
    pub mode1_e2: f64,
    pub mode1_b3: f64,
}

impl DiagnosticsRecord {
    /// Measures everything at one time level. `b3` must be at the same level as `e1`, `e2`.
    pub fn measure(
        phase: &PhaseSpace,
        time: f64,
        state: &LowRankState,
        e1: ArrayView1<f64>,
        e2: ArrayView1<f64>,
        b3: ArrayView1<f64>,
    ) -> Self {
        let rho = charge_density(phase, state);
        let en = energies(phase, state, e1, e2, b3);
        let mode = |u: ArrayView1<f64>| fourier_mode_amplitude(phase, u, 1).unwrap_or(0.0);
        Self {
            time,
            mass: phase.quad_x(rho.view()),
            electric_energy: en.electric,
            magnetic_energy: en.magnetic,
            kinetic_energy: en.kinetic,
            total_energy: en.total(),
            gauss_l2: gauss_residual(phase, e1, rho.view()).l2_residual,
            sigma_min: sigma_min(state.s.view()),
            mode1_e1: mode(e1),
            mode1_e2: mode(e2),
            mode1_b3: mode(b3),
        }
    }

    /// Same measurements for a materialized distribution. `sigma_min` is the smallest
    /// singular value of `f` in the quadrature-weighted norm, matching that of `S`.
    pub fn measure_full(
        phase: &PhaseSpace,
        time: f64,
        f: &Array2<f64>,
        e1: ArrayView1<f64>,
        e2: ArrayView1<f64>,
        b3: ArrayView1<f64>,
    ) -> Self {
        let g = phase.grid();
        let rho = f.sum_axis(ndarray::Axis(1)) * g.h_v();
        let electric = half_l2_squared(phase, e1) + half_l2_squared(phase, e2);
        let magnetic = half_l2_squared(phase, b3);
        let kinetic = kinetic_energy_full(phase, f);
        let mode = |u: ArrayView1<f64>| fourier_mode_amplitude(phase, u, 1).unwrap_or(0.0);
        Self {
            time,
            mass: phase.quad_x(rho.view()),
            electric_energy: electric,
            magnetic_energy: magnetic,
            kinetic_energy: kinetic,
            total_energy: electric + magnetic + kinetic,
            gauss_l2: gauss_residual(phase, e1, rho.view()).l2_residual,
            sigma_min: sigma_min((f * (g.h_x() * g.h_v()).sqrt()).view()),
            mode1_e1: mode(e1),
            mode1_e2: mode(e2),
            mode1_b3: mode(b3),
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.mass,
            self.electric_energy,
            self.magnetic_energy,
            self.kinetic_energy,
            self.total_energy,
            self.gauss_l2,
            self.sigma_min,
            self.mode1_e1,
            self.mode1_e2,
            self.mode1_b3,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// `int int f dx dv`.
pub fn mass(phase: &PhaseSpace, state: &LowRankState) -> f64 {
    phase.quad_x(charge_density(phase, state).view())
}

/// `1/2 int int |v|^2 f` in factored form.
pub fn kinetic_energy(phase: &PhaseSpace, state: &LowRankState) -> f64 {
    let speed2 = phase.v1().mapv(|a| a * a) + phase.v2().mapv(|b| b * b);
    let v_moments = state.v.dot(&speed2) * phase.grid().h_v();
    let x_moments = x_integrals(phase, state.x.view());
    0.5 * x_moments.dot(&state.s.dot(&v_moments))
}

fn half_l2_squared(phase: &PhaseSpace, u: ArrayView1<f64>) -> f64 {
    0.5 * phase.quad_x(u.mapv(|a| a * a).view())
}

pub fn energies(
    phase: &PhaseSpace,
    state: &LowRankState,
    e1: ArrayView1<f64>,
    e2: ArrayView1<f64>,
    b3: ArrayView1<f64>,
) -> Energies {
    Energies {
        electric: half_l2_squared(phase, e1) + half_l2_squared(phase, e2),
        magnetic: half_l2_squared(phase, b3),
        kinetic: kinetic_energy(phase, state),
    }
}

/// `(|m(t) - m(0)| / m(0), |E(t) - E(0)| / E(0)`.
pub fn relative_errors(record: &DiagnosticsRecord, reference: &DiagnosticsRecord) -> Result<(f64, f64), DiagnosticsError> {
    if reference.mass == 0.0 {
        return Err(DiagnosticsError::ZeroReference { quantity: "mass" });
    }
    if reference.total_energy == 0.0 {
        return Err(DiagnosticsError::ZeroReference { quantity: "total energy" });
    }
    Ok((
        ((record.mass - reference.mass) / reference.mass).abs(),
        ((record.total_energy - reference.total_energy) / reference.total_energy).abs(),
    ))
}

pub fn sigma_min(s: ArrayView2<f64>) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[[i, j]]);
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `|u_hat(mode)| / n`.
pub fn fourier_mode_amplitude(phase: &PhaseSpace, u: ArrayView1<f64>, mode: usize) -> Result<f64, DiagnosticsError> {
    phase
        .x_transform()
        .mode_amplitude(u, mode)
        .ok_or(DiagnosticsError::UnresolvedMode { mode, n: u.len() })
}

/// Materialized `n_x x n_v` reference for the factored kinetic energy.
pub fn kinetic_energy_full(phase: &PhaseSpace, f: &Array2<f64>) -> f64 {
    let speed2 = phase.v1().mapv(|a| a * a) + phase.v2().mapv(|b| b * b);
    let g = phase.grid();
    0.5 * g.h_x() * g.h_v() * f.dot(&speed2).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::lowrank::reconstruct_full;
    use crate::qr::qr_orthonormalize;
    use ndarray::{arr1, Array1};
    use proptest::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn small_phase() -> PhaseSpace {
        PhaseSpace::new(GridSpec::new(11, 12, 10, 2.0 * PI, (-4.0, 4.0), (-3.0, 3.5)).unwrap())
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    fn random_state(phase: &PhaseSpace, r: usize, seed: u64) -> LowRankState {
        let g = phase.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = qr_orthonormalize(random_matrix(&mut rng, r, g.n_x()).view(), g.h_x()).q;
        let v = qr_orthonormalize(random_matrix(&mut rng, r, g.n_v()).view(), g.h_v()).q;
        LowRankState::new(x, random_matrix(&mut rng, r, r), v)
    }

    fn record(mass: f64, total: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            time: 0.0,
            mass,
            electric_energy: 0.0,
            magnetic_energy: 0.0,
            kinetic_energy: total,
            total_energy: total,
            gauss_l2: 0.0,
            sigma_min: 1.0,
            mode1_e1: 0.0,
            mode1_e2: 0.0,
            mode1_b3: 0.0,
        }
    }

    #[test]
    fn factored_energy_and_mass_match_full_tensor() {
        let phase = small_phase();
        let g = *phase.grid();
        for seed in 0..5 {
            let st = random_state(&phase, 4, seed);
            let f = reconstruct_full(&phase, &st).unwrap();
            let full_mass = g.h_x() * g.h_v() * f.sum();
            assert!((mass(&phase, &st) - full_mass).abs() < 1e-12);
            let full = kinetic_energy_full(&phase, &f);
            assert!((kinetic_energy(&phase, &st) - full).abs() < 1e-12 * full.abs().max(1.0));
        }
        let mut st = random_state(&phase, 3, 9);
        st.s.fill(0.0);
        assert_eq!(mass(&phase, &st), 0.0);
    }

    #[test]
    fn zero_fields_carry_no_field_energy() {
        let phase = small_phase();
        let st = random_state(&phase, 2, 1);
        let z = Array1::zeros(11);
        let e = energies(&phase, &st, z.view(), z.view(), z.view());
        assert_eq!((e.electric, e.magnetic), (0.0, 0.0));
        assert_eq!(e.kinetic, kinetic_energy(&phase, &st));
    }

    #[test]
    fn diagnostics_do_not_touch_the_state() {
        let phase = small_phase();
        let st = random_state(&phase, 3, 4);
        let copy = st.clone();
        let e = phase.grid().sample_x(|x| x.sin());
        let rec = DiagnosticsRecord::measure(&phase, 0.5, &st, e.view(), e.view(), e.view());
        assert!(rec.is_finite());
        assert_eq!(rec.total_energy, rec.electric_energy + rec.magnetic_energy + rec.kinetic_energy);
        assert_eq!(st, copy);
    }

    #[test]
    fn full_tensor_measurements_agree_at_full_rank() {
        let phase = small_phase();
        let st = random_state(&phase, 11, 8);
        let e = phase.grid().sample_x(|x| (2.0 * x).cos() + 0.1);
        let rec = DiagnosticsRecord::measure(&phase, 0.5, &st, e.view(), e.view(), e.view());
        let f = reconstruct_full(&phase, &st).unwrap();
        let full = DiagnosticsRecord::measure_full(&phase, 0.5, &f, e.view(), e.view(), e.view());
        for (a, b) in [
            (rec.mass, full.mass),
            (rec.kinetic_energy, full.kinetic_energy),
            (rec.total_energy, full.total_energy),
            (rec.gauss_l2, full.gauss_l2),
            (rec.sigma_min, full.sigma_min),
            (rec.mode1_b3, full.mode1_b3),
        ] {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn relative_error_arithmetic() {
        let a = record(15.708, 3.0);
        assert_eq!(relative_errors(&a, &a).unwrap(), (0.0, 0.0));
        let b = record(15.708 + 1.5708e-6, 3.0);
        let (m, _) = relative_errors(&b, &a).unwrap();
        assert!((m - 1e-7).abs() < 1e-15);
        assert!(matches!(
            relative_errors(&a, &record(0.0, 1.0)),
            Err(DiagnosticsError::ZeroReference { quantity: "mass" })
        ));
        assert!(relative_errors(&a, &record(1.0, 0.0)).is_err());
    }

    #[test]
    fn smallest_singular_value_examples() {
        assert!((sigma_min(Array2::<f64>::eye(3).view()) - 1.0).abs() < 1e-15);
        let d = Array2::from_diag(&arr1(&[3.0, 2.0, 1e-8]));
        assert!((sigma_min(d.view()) - 1e-8).abs() < 1e-20);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = random_matrix(&mut rng, 5, 5);
        let m = DMatrix::from_fn(5, 5, |i, j| s[[i, j]]);
        let eig = (m.transpose() * &m).symmetric_eigen();
        let oracle = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
        assert!((sigma_min(s.view()) - oracle).abs() < 1e-12);
    }

    #[test]
    fn mode_amplitudes() {
        let phase = small_phase();
        let g = phase.grid();
        let u = g.sample_x(|x| 0.7 * x.cos());
        assert!((fourier_mode_amplitude(&phase, u.view(), 1).unwrap() - 0.35).abs() < 1e-15);
        let c = Array1::from_elem(11, 2.0);
        assert!(fourier_mode_amplitude(&phase, c.view(), 1).unwrap() < 1e-15);
        let two = g.sample_x(|x| 0.2 * x.sin() + 1.5 * (3.0 * x).cos());
        let direct = |m: f64| {
            let (re, im) = two.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, v)| {
                let a = -2.0 * PI * m * j as f64 / 11.0;
                (re + v * a.cos(), im + v * a.sin())
            });
            (re * re + im * im).sqrt() / 11.0
        };
        for m in [1usize, 2, 3] {
            let got = fourier_mode_amplitude(&phase, two.view(), m).unwrap();
            assert!((got - direct(m as f64)).abs() < 1e-14);
        }
        assert!(matches!(
            fourier_mode_amplitude(&phase, u.view(), 6),
            Err(DiagnosticsError::UnresolvedMode { mode: 6, n: 11 })
        ));
    }

    proptest! {
        #[test]
        fn sigma_min_is_orthogonally_invariant(seed in 0u64..5000, r in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_matrix(&mut rng, r, r);
            let q1 = qr_orthonormalize(random_matrix(&mut rng, r, r).view(), 1.0).q;
            let q2 = qr_orthonormalize(random_matrix(&mut rng, r, r).view(), 1.0).q;
            let rotated = q1.dot(&s).dot(&q2);
            prop_assert!((sigma_min(s.view()) - sigma_min(rotated.view())).abs() < 1e-12);
        }
    }
}
