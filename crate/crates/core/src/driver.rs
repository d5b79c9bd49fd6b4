//! Time loop, diagnostics sampling and file output for one run.
//!
//! `E` is kept at integer time levels and `B3` half a step ahead. Records use
//! `B3` at the integer level, taken as the mean of the two neighbouring half levels.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

use crate::config::RunConfig;
use crate::diagnostics::{relative_errors, DiagnosticsRecord};
use crate::ksl::{KslIntegrator, StepError};
use crate::lowrank::LowRankState;
use crate::maxwell::{bootstrap_half_step_b, EMField};
use crate::oracle::{oracle_strang_step, FullTensorState};
use crate::phase::PhaseSpace;
use crate::rk::NonFiniteStage;
use crate::scenarios::ScenarioError;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const META_FILE: &str = "run_meta";
pub const FAILURE_FILE: &str = "FAILED";

pub const CSV_COLUMNS: [&str; 13] = [
    "time",
    "mass",
    "energy_e",
    "energy_m",
    "energy_k",
    "energy_total",
    "err_mass_rel",
    "err_energy_rel",
    "gauss_l2",
    "sigma_min",
    "mode1_E1",
    "mode1_E2",
    "mode1_B3",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    LowRank,
    /// Unsplit full-tensor reference; small grids only.
    FullTensor,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::LowRank => "low_rank",
            Solver::FullTensor => "full_tensor",
        }
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

/// Why a step could not be completed.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum StepFailure {
    #[error(transparent)]
    Stage(#[from] StepError),
    #[error("unsplit flow: {0}")]
    Unsplit(#[from] NonFiniteStage),
    #[error("non-finite values in the state or fields")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    /// Index of the step that failed (the state is the one before it).
    pub step: usize,
    pub time: f64,
    pub reason: StepFailure,
}

#[derive(Debug, Clone)]
enum Model {
    LowRank(LowRankState),
    Full(FullTensorState),
}

/// One simulation advanced step by step with the Strang stepper.
#[derive(Debug, Clone)]
pub struct Simulation {
    phase: PhaseSpace,
    config: RunConfig,
    model: Model,
    /// `E` at level `n`, `B3` at level `n + 1/2`.
    field: EMField,
    /// `B3` at level `n`.
    b_integer: Array1<f64>,
    step: usize,
}

impl Simulation {
    pub fn new(config: &RunConfig, solver: Solver) -> Result<Self, DriverError> {
        let spec = &config.scenario;
        let grid = spec.grid().map_err(ScenarioError::from)?;
        let phase = PhaseSpace::new(grid);
        let (state, mut field) = spec.build()?;
        field.eps_dissipation = config.eps_dissipation.resolve(grid.h_x());
        let b_integer = field.b3.clone();
        field.b3 = bootstrap_half_step_b(&phase, field.b3.view(), field.e2.view(), config.tau);
        let model = match solver {
            Solver::LowRank => Model::LowRank(state),
            Solver::FullTensor => Model::Full(FullTensorState::new(&phase, spec.sample_full()?).map_err(ScenarioError::from)?),
        };
        Ok(Self {
            phase,
            config: config.clone(),
            model,
            field,
            b_integer,
            step: 0,
        })
    }

    pub fn phase(&self) -> &PhaseSpace {
        &self.phase
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.tau
    }

    /// `E` at the current level and `B3` half a step ahead.
    pub fn field(&self) -> &EMField {
        &self.field
    }

    pub fn low_rank_state(&self) -> Option<&LowRankState> {
        match &self.model {
            Model::LowRank(s) => Some(s),
            Model::Full(_) => None,
        }
    }

    /// The distribution as an `n_x x n_v` matrix.
    pub fn distribution(&self) -> Result<Array2<f64>, DriverError> {
        match &self.model {
            Model::LowRank(s) => {
                Ok(crate::lowrank::reconstruct_full(&self.phase, s).map_err(ScenarioError::from)?)
            }
            Model::Full(f) => Ok(f.f.clone()),
        }
    }

    /// Advances one step. On failure the simulation is left unchanged.
    pub fn step(&mut self) -> Result<(), StepFailure> {
        let tau = self.config.tau;
        let correction = self.config.correction;
        let (model, field) = match &self.model {
            Model::LowRank(state) => {
                let out = KslIntegrator::new(&self.phase, self.config.substeps).strang_step(state, &self.field, tau, correction)?;
                if !out.state.is_finite() {
                    return Err(StepFailure::NonFinite);
                }
                (Model::LowRank(out.state), out.field)
            }
            Model::Full(state) => {
                let out = oracle_strang_step(&self.phase, state, &self.field, tau, self.config.substeps, correction)?;
                if !out.state.is_finite() {
                    return Err(StepFailure::NonFinite);
                }
                (Model::Full(out.state), out.field)
            }
        };
        if !field.is_finite() {
            return Err(StepFailure::NonFinite);
        }
        self.b_integer = (&self.field.b3 + &field.b3) * 0.5;
        self.model = model;
        self.field = field;
        self.step += 1;
        Ok(())
    }

    /// Diagnostics at the current integer time level.
    pub fn record(&self) -> DiagnosticsRecord {
        let (e1, e2, b3) = (self.field.e1.view(), self.field.e2.view(), self.b_integer.view());
        match &self.model {
            Model::LowRank(s) => DiagnosticsRecord::measure(&self.phase, self.time(), s, e1, e2, b3),
            Model::Full(f) => DiagnosticsRecord::measure_full(&self.phase, self.time(), &f.f, e1, e2, b3),
        }
    }

    /// `f(x, v1, v2*)` with `v2*` the grid point nearest to zero: `n_x x n_v1`.
    pub fn slice_at_v2_zero(&self) -> Array2<f64> {
        let g = self.phase.grid();
        let j = g.v2.nearest_index(0.0);
        let cols: Vec<usize> = (0..g.v1.n).map(|i| i * g.v2.n + j).collect();
        match &self.model {
            Model::LowRank(s) => {
                let v = s.v.select(Axis(1), &cols);
                s.x.t().dot(&s.s.dot(&v))
            }
            Model::Full(f) => f.f.select(Axis(1), &cols),
        }
    }
}

/// Records sampled at the configured cadence, plus the abort if one occurred.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub abort: Option<Abort>,
}

impl Trajectory {
    /// Steps at which a record is taken: every `cadence` steps and the last one.
    fn is_sampled(step: usize, cadence: usize, n_steps: usize) -> bool {
        step % cadence == 0 || step == n_steps
    }
}

/// Runs the whole time loop, calling `at_step` after every completed step
/// (and once for the initial state).
pub fn run_with<F: FnMut(&Simulation)>(config: &RunConfig, solver: Solver, mut at_step: F) -> Result<Trajectory, DriverError> {
    let mut sim = Simulation::new(config, solver)?;
    let n_steps = config.n_steps();
    let mut records = vec![sim.record()];
    at_step(&sim);
    for n in 1..=n_steps {
        if let Err(reason) = sim.step() {
            return Ok(Trajectory {
                records,
                abort: Some(Abort {
                    step: n,
                    time: sim.time(),
                    reason,
                }),
            });
        }
        let rec = sim.record();
        log::info!(
            "step {n}/{n_steps} t={:.4} mass={:.10e} energy={:.10e} gauss={:.3e}",
            rec.time,
            rec.mass,
            rec.total_energy,
            rec.gauss_l2
        );
        if Trajectory::is_sampled(n, config.cadence, n_steps) {
            records.push(rec);
        }
        at_step(&sim);
    }
    Ok(Trajectory { records, abort: None })
}

/// Runs in memory without writing files.
pub fn run_in_memory(config: &RunConfig, solver: Solver) -> Result<Trajectory, DriverError> {
    run_with(config, solver, |_| {})
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trajectory: Trajectory,
    pub output_dir: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Runs and writes `timeseries.csv`, the requested snapshots and `run_meta` into
/// `config.output_dir`. After an abort the partial outputs and a `FAILED` marker are written.
pub fn run(config: &RunConfig, solver: Solver) -> Result<RunReport, DriverError> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(dir.join(FAILURE_FILE));
    write_meta(config, solver, &dir)?;

    let snapshot_steps: Vec<(f64, usize)> = config
        .snapshot_times
        .iter()
        .map(|&t| (t, ((t / config.tau).round() as usize).min(config.n_steps())))
        .collect();
    let mut snapshots = Vec::new();
    let mut io_error = None;
    let trajectory = run_with(config, solver, |sim| {
        for &(requested, step) in &snapshot_steps {
            if step == sim.step_index() && io_error.is_none() {
                match write_snapshot(sim, requested, &dir) {
                    Ok(path) => snapshots.push(path),
                    Err(e) => io_error = Some(e),
                }
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    write_timeseries(&trajectory.records, &dir.join(TIMESERIES_FILE))?;
    if let Some(abort) = &trajectory.abort {
        fs::write(
            dir.join(FAILURE_FILE),
            format!("step {} (t = {:?}): {}\n", abort.step, abort.time, abort.reason),
        )?;
    }
    Ok(RunReport {
        trajectory,
        output_dir: dir,
        snapshots,
    })
}

fn write_meta(config: &RunConfig, solver: Solver, dir: &Path) -> io::Result<()> {
    let h_x = config.scenario.grid().map(|g| g.h_x()).unwrap_or(f64::NAN);
    let mut text = String::new();
    text.push_str(&format!("# solver: {}\n", solver.name()));
    text.push_str(&format!("# n_steps: {}\n", config.n_steps()));
    text.push_str(&format!(
        "# eps_dissipation resolved: {:?}\n",
        config.eps_dissipation.resolve(h_x)
    ));
    text.push_str(&config.emit());
    fs::write(dir.join(META_FILE), text)
}

/// Writes one CSV row per record with every value in `{:.16e}`.
pub fn write_timeseries(records: &[DiagnosticsRecord], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    if let Some(first) = records.first() {
        for r in records {
            let (em, ee) = relative_errors(r, first).unwrap_or((f64::NAN, f64::NAN));
            let row = [
                r.time,
                r.mass,
                r.electric_energy,
                r.magnetic_energy,
                r.kinetic_energy,
                r.total_energy,
                em,
                ee,
                r.gauss_l2,
                r.sigma_min,
                r.mode1_e1,
                r.mode1_e2,
                r.mode1_b3,
            ];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
    }
    w.flush()
}

pub fn snapshot_file_name(requested_time: f64) -> String {
    format!("snapshot_t{requested_time}.csv")
}

fn write_snapshot(sim: &Simulation, requested_time: f64, dir: &Path) -> io::Result<PathBuf> {
    let g = sim.phase().grid();
    let slice = sim.slice_at_v2_zero();
    let path = dir.join(snapshot_file_name(requested_time));
    let mut w = BufWriter::new(fs::File::create(&path)?);
    writeln!(
        w,
        "# time={:.16e} n_x={} x_lower={:.16e} h_x={:.16e} n_v1={} v1_lower={:.16e} h_v1={:.16e} v2={:.16e}",
        sim.time(),
        g.n_x(),
        g.x.lower,
        g.h_x(),
        g.v1.n,
        g.v1.lower,
        g.v1.h(),
        g.v2.point(g.v2.nearest_index(0.0)),
    )?;
    for row in slice.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(path)
}
