//! Fixed-step explicit Runge-Kutta integration of autonomous matrix ODEs.

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkScheme {
    /// Classical fourth-order Runge-Kutta.
    Rk4,
    /// Dormand-Prince 5(4) tableau used with fixed steps (fifth-order weights).
    Dopri5,
}

impl RkScheme {
    pub fn name(&self) -> &'static str {
        match self {
            RkScheme::Rk4 => "rk4",
            RkScheme::Dopri5 => "dopri5",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rk4" => Some(RkScheme::Rk4),
            "dopri5" => Some(RkScheme::Dopri5),
            _ => None,
        }
    }
}

/// How each sub-flow of the splitting is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubstepConfig {
    pub n_substeps: usize,
    pub scheme: RkScheme,
}

impl Default for SubstepConfig {
    fn default() -> Self {
        Self {
            n_substeps: 5,
            scheme: RkScheme::Rk4,
        }
    }
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("non-finite value in Runge-Kutta stage {stage} of substep {substep}")]
pub struct NonFiniteStage {
    pub substep: usize,
    pub stage: usize,
}

struct Tableau {
    a: &'static [&'static [f64]],
    b: &'static [f64],
}

const RK4: Tableau = Tableau {
    a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
};

const DOPRI5: Tableau = Tableau {
    a: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
    ],
    b: &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
};

fn all_finite(a: &Array2<f64>) -> bool {
    // x - x is NaN exactly for non-finite x, and NaN survives summation.
    match a.as_slice_memory_order() {
        Some(s) => {
            let mut acc = [0.0f64; 8];
            let chunks = s.chunks_exact(8);
            let tail: f64 = chunks.remainder().iter().map(|x| x - x).sum();
            for c in chunks {
                for (a, x) in acc.iter_mut().zip(c) {
                    *a += x - x;
                }
            }
            (acc.iter().sum::<f64>() + tail).is_finite()
        }
        None => a.iter().all(|v| v.is_finite()),
    }
}

/// Integrates `y' = rhs(y)` over `duration` with `cfg.n_substeps` equal steps.
/// Negative durations integrate backwards.
pub fn integrate<F>(
    y0: &Array2<f64>,
    duration: f64,
    cfg: SubstepConfig,
    mut rhs: F,
) -> Result<Array2<f64>, NonFiniteStage>
where
    F: FnMut(&Array2<f64>) -> Array2<f64>,
{
    assert!(cfg.n_substeps >= 1, "at least one substep");
    let tableau = match cfg.scheme {
        RkScheme::Rk4 => &RK4,
        RkScheme::Dopri5 => &DOPRI5,
    };
    let h = duration / cfg.n_substeps as f64;
    let mut y = y0.clone();
    let mut arg = y0.clone();
    let mut stages: Vec<Array2<f64>> = Vec::with_capacity(tableau.b.len());
    for substep in 0..cfg.n_substeps {
        stages.clear();
        for (stage, row) in tableau.a.iter().enumerate() {
            arg.assign(&y);
            for (coef, k) in row.iter().zip(stages.iter()) {
                if *coef != 0.0 {
                    arg.scaled_add(h * coef, k);
                }
            }
            let k = rhs(&arg);
            if !all_finite(&k) {
                return Err(NonFiniteStage { substep, stage });
            }
            stages.push(k);
        }
        for (coef, k) in tableau.b.iter().zip(stages.iter()) {
            if *coef != 0.0 {
                y.scaled_add(h * coef, k);
            }
        }
        if !all_finite(&y) {
            return Err(NonFiniteStage {
                substep,
                stage: tableau.b.len(),
            });
        }
    }
    Ok(y)
}
