//! Initial data of the four benchmark problems in factored form.
//!
//! Each initial density is a short sum of products `a_t(x) b_t(v)`. Stacking
//! the factors as rows and factoring `A = Rx Qx`, `B = Rv Qv` gives
//! `f = Qx^T (Rx^T Rv) Qv` exactly. Rows beyond the intrinsic rank are seeded
//! random completions carrying `PAD_SINGULAR_VALUE` on the diagonal of `S`.

use std::f64::consts::PI;
use std::fmt;

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{GridError, GridSpec};
use crate::lowrank::{charge_density, LowRankState};
use crate::maxwell::{init_e_from_gauss, EMField};
use crate::phase::PhaseSpace;
use crate::qr::qr_orthonormalize;

/// Diagonal entry of `S` for padded rank slots.
pub const PAD_SINGULAR_VALUE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Landau,
    TwoStream,
    BumpOnTail,
    Weibel,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Landau,
        ScenarioKind::TwoStream,
        ScenarioKind::BumpOnTail,
        ScenarioKind::Weibel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Landau => "landau",
            ScenarioKind::TwoStream => "two_stream",
            ScenarioKind::BumpOnTail => "bump_on_tail",
            ScenarioKind::Weibel => "weibel",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Number of separable terms in the initial density.
    pub fn intrinsic_rank(self) -> usize {
        match self {
            ScenarioKind::BumpOnTail => 2,
            _ => 1,
        }
    }

    /// `(n_x, n_v1, n_v2)` used by the reference runs.
    pub fn default_grid(self) -> (usize, usize, usize) {
        match self {
            ScenarioKind::Landau => (33, 128, 128),
            ScenarioKind::TwoStream => (33, 64, 64),
            ScenarioKind::BumpOnTail => (65, 128, 128),
            ScenarioKind::Weibel => (65, 192, 192),
        }
    }

    /// Parameter names and default values, in canonical order.
    pub fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            ScenarioKind::Landau => &[("alpha", 0.01), ("k", 0.4), ("v_max", 5.0)],
            ScenarioKind::TwoStream => &[("alpha", 1e-3), ("beta", 2e-3), ("v0", 0.2), ("v_max", 0.4)],
            ScenarioKind::BumpOnTail => &[
                ("alpha", 0.9),
                ("beta", 0.2),
                ("gamma", 0.03),
                ("k", 0.3),
                ("v_max", 9.0),
            ],
            ScenarioKind::Weibel => &[
                ("alpha", 1e-4),
                ("beta", 1e-4),
                ("k", 1.25),
                ("t_r", 12.0),
                ("v_th", 0.02),
                ("v_max", 0.3),
            ],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScenarioError {
    #[error("{kind} needs rank >= {min}, got {rank}")]
    RankTooSmall { kind: ScenarioKind, rank: usize, min: usize },
    #[error("rank {rank} exceeds the {axis} grid size {max}")]
    RankTooLarge { rank: usize, max: usize, axis: &'static str },
    #[error("{kind} has no parameter `{name}`")]
    UnknownParameter { kind: ScenarioKind, name: String },
    #[error("parameter `{name}` must be finite and positive, got {value}")]
    InvalidParameter { name: String, value: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub rank: usize,
    pub n_x: usize,
    pub n_v1: usize,
    pub n_v2: usize,
    params: Vec<(&'static str, f64)>,
    /// Seed of the completion vectors.
    pub seed: u64,
}

impl ScenarioSpec {
    /// Default grid and parameters for `kind`.
    pub fn new(kind: ScenarioKind, rank: usize) -> Self {
        let (n_x, n_v1, n_v2) = kind.default_grid();
        Self {
            kind,
            rank,
            n_x,
            n_v1,
            n_v2,
            params: kind.default_params().to_vec(),
            seed: 0,
        }
    }

    pub fn with_grid(mut self, n_x: usize, n_v1: usize, n_v2: usize) -> Self {
        self.n_x = n_x;
        self.n_v1 = n_v1;
        self.n_v2 = n_v2;
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self, ScenarioError> {
        self.set_param(name, value)?;
        Ok(self)
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), ScenarioError> {
        let kind = self.kind;
        let slot = self
            .params
            .iter_mut()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownParameter {
                kind,
                name: name.to_string(),
            })?;
        let must_be_positive = !matches!(name, "alpha" | "beta" | "gamma" | "v0");
        if !value.is_finite() || (must_be_positive && value <= 0.0) {
            return Err(ScenarioError::InvalidParameter {
                name: name.to_string(),
                value,
            });
        }
        slot.1 = value;
        Ok(())
    }

    pub fn param(&self, name: &str) -> f64 {
        self.params
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("{} has no parameter {name}", self.kind))
    }

    pub fn params(&self) -> &[(&'static str, f64)] {
        &self.params
    }

    pub fn x_length(&self) -> f64 {
        match self.kind {
            ScenarioKind::Landau | ScenarioKind::Weibel => 2.0 * PI / self.param("k"),
            ScenarioKind::TwoStream => 2.0 * PI,
            ScenarioKind::BumpOnTail => 20.0 * PI,
        }
    }

    pub fn grid(&self) -> Result<GridSpec, GridError> {
        let v = self.param("v_max");
        GridSpec::new(self.n_x, self.n_v1, self.n_v2, self.x_length(), (-v, v), (-v, v))
    }

    /// Analytic initial density at one point.
    pub fn density(&self, x: f64, v1: f64, v2: f64) -> f64 {
        self.terms_at(x, v1, v2).iter().map(|(a, b)| a * b).sum()
    }

    fn terms_at(&self, x: f64, v1: f64, v2: f64) -> Vec<(f64, f64)> {
        let p = |n| self.param(n);
        match self.kind {
            ScenarioKind::Landau => {
                let a = 1.0 + p("alpha") * (p("k") * x).cos();
                let b = (-(v1 * v1 + v2 * v2) / 2.0).exp() / (2.0 * PI);
                vec![(a, b)]
            }
            ScenarioKind::TwoStream => {
                let beta = p("beta");
                let v0 = p("v0");
                let b = (-v2 * v2 / beta).exp() * ((-(v1 - v0).powi(2) / beta).exp() + (-(v1 + v0).powi(2) / beta).exp())
                    / (2.0 * PI * beta);
                vec![(1.0, b)]
            }
            ScenarioKind::BumpOnTail => {
                let norm = 1.0 / (2f64.sqrt() * PI);
                let tail = (-v2 * v2).exp() * norm;
                let bulk = p("alpha") * (-v1 * v1 / 2.0).exp() * tail;
                let bump = p("beta") * (-2.0 * (v1 - 4.5).powi(2)).exp() * tail;
                vec![(1.0, bulk), (1.0 + p("gamma") * (p("k") * x).cos(), bump)]
            }
            ScenarioKind::Weibel => {
                let vth2 = p("v_th").powi(2);
                let tr = p("t_r");
                let a = 1.0 + p("alpha") * (p("k") * x).cos();
                let b = (-(v1 * v1 + v2 * v2 / tr) / vth2).exp() / (PI * vth2 * tr.sqrt());
                vec![(a, b)]
            }
        }
    }

    /// Builds the factored initial state and the initial fields (`eps_dissipation = 0`).
    pub fn build(&self) -> Result<(LowRankState, EMField), ScenarioError> {
        let min = self.kind.intrinsic_rank();
        if self.rank < min {
            return Err(ScenarioError::RankTooSmall {
                kind: self.kind,
                rank: self.rank,
                min,
            });
        }
        let grid = self.grid()?;
        for (axis, max) in [("x", grid.n_x()), ("velocity", grid.n_v())] {
            if self.rank > max {
                return Err(ScenarioError::RankTooLarge {
                    rank: self.rank,
                    max,
                    axis,
                });
            }
        }
        let phase = PhaseSpace::new(grid);
        let state = self.factor(&phase);
        let field = self.initial_field(&phase, &state);
        Ok((state, field))
    }

    fn factor(&self, phase: &PhaseSpace) -> LowRankState {
        let g = phase.grid();
        let t = self.kind.intrinsic_rank();
        let r = self.rank;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let mut a = Array2::zeros((r, g.n_x()));
        for (m, x) in g.x.points().iter().enumerate() {
            for (term, (av, _)) in self.terms_at(*x, 0.0, 0.0).into_iter().enumerate() {
                a[[term, m]] = av;
            }
        }
        let mut b = Array2::zeros((r, g.n_v()));
        let (v1s, v2s) = (g.v1_coords(), g.v2_coords());
        for p in 0..g.n_v() {
            for (term, (_, bv)) in self.terms_at(0.0, v1s[p], v2s[p]).into_iter().enumerate() {
                b[[term, p]] = bv;
            }
        }
        // Each term is a product a(x) b(v): sampling at v = 0 and at x = 0 separates it.
        for mut row in a.slice_mut(s![t.., ..]).rows_mut() {
            row.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        }
        for mut row in b.slice_mut(s![t.., ..]).rows_mut() {
            row.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        }
        let fx = qr_orthonormalize(a.view(), g.h_x());
        let fv = qr_orthonormalize(b.view(), g.h_v());
        let mut s = Array2::zeros((r, r));
        let rx = fx.r.slice(s![..t, ..t]);
        let rv = fv.r.slice(s![..t, ..t]);
        s.slice_mut(s![..t, ..t]).assign(&rx.t().dot(&rv));
        for i in t..r {
            s[[i, i]] = PAD_SINGULAR_VALUE;
        }
        LowRankState::new(fx.q, s, fv.q)
    }

    fn initial_field(&self, phase: &PhaseSpace, state: &LowRankState) -> EMField {
        let g = phase.grid();
        let mut field = EMField::zeros(g.n_x());
        let gauss = || {
            let rho = charge_density(phase, state);
            init_e_from_gauss(phase, rho.view())
        };
        match self.kind {
            ScenarioKind::Landau => {
                let (alpha, k) = (self.param("alpha"), self.param("k"));
                field.e1 = gauss();
                field.b3 = g.sample_x(|x| alpha / k * (k * x).sin());
            }
            ScenarioKind::TwoStream => {
                let alpha = self.param("alpha");
                field.b3 = g.sample_x(|x| alpha * x.sin());
            }
            ScenarioKind::BumpOnTail => field.e1 = gauss(),
            ScenarioKind::Weibel => {
                let (beta, k) = (self.param("beta"), self.param("k"));
                field.e1 = gauss();
                field.b3 = g.sample_x(|x| beta * (k * x).cos());
            }
        }
        field
    }

    /// Analytic density sampled on the grid as an `n_x x n_v` matrix.
    pub fn sample_full(&self) -> Result<Array2<f64>, ScenarioError> {
        let g = self.grid()?;
        g.check_materializable()?;
        let (v1s, v2s) = (g.v1_coords(), g.v2_coords());
        let xs: Array1<f64> = g.x.points();
        let mut f = Array2::zeros((g.n_x(), g.n_v()));
        for (mut row, x) in f.axis_iter_mut(Axis(0)).zip(xs.iter()) {
            for p in 0..g.n_v() {
                row[p] = self.density(*x, v1s[p], v2s[p]);
            }
        }
        Ok(f)
    }
}
