use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error as ThisError;

use super::{AtomicState, Model, Simulation};
use crate::error::{invalid, Error, Result};
use crate::spectral::{Spectral, TransverseGrid};

/// Lowest tolerated sublevel population before the run counts as broken.
const POPULATION_FLOOR: f64 = -1e-6;
/// Relative drift of the mean density tolerated per run.
const MEAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationTarget {
    /// δρ = A cos(qx), w = 0.
    Density,
    /// w = A cos(qx), ρ = 1.
    Orientation,
    /// Uniform noise in [−A, A] on both fields, resolved modes only.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub target: PerturbationTarget,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: TransverseGrid,
    /// Defaults to `Simulation::default_dt`.
    pub dt: Option<f64>,
    pub n_steps: usize,
    pub seed: u64,
    pub perturbation: Perturbation,
    /// Keep the full state every this many steps (0: final state only).
    pub snapshot_every: usize,
    /// Diagnostics cadence in steps (at least 1).
    pub diagnostics_every: usize,
    pub abort_on_invariant_violation: bool,
}

impl SimConfig {
    pub fn new(grid: TransverseGrid, n_steps: usize, perturbation: Perturbation) -> Self {
        Self {
            grid,
            dt: None,
            n_steps,
            seed: 0,
            perturbation,
            snapshot_every: 0,
            diagnostics_every: 1,
            abort_on_invariant_violation: true,
        }
    }
}

/// Initial state: homogeneous cloud plus a perturbation with zero mean.
pub fn seed_perturbation(grid: &TransverseGrid, q: f64, perturbation: Perturbation, seed: u64) -> Result<AtomicState> {
    let amp = perturbation.amplitude;
    if !(amp.is_finite() && amp >= 0.0) {
        return Err(invalid("perturbation_amplitude", format!("must be finite and non-negative, got {amp}")));
    }
    if amp >= 1.0 {
        return Err(invalid("perturbation_amplitude", "must stay below 1 to keep ρ± positive"));
    }
    grid.mode_index(q)?;
    let n = grid.len();
    let nx = grid.points_per_axis();
    let stripe = |i: usize| amp * (q * grid.x(i % nx)).cos();
    let mut state = AtomicState::homogeneous(n);
    match perturbation.target {
        PerturbationTarget::Density => {
            let mut d: Vec<f64> = (0..n).map(stripe).collect();
            remove_mean(&mut d);
            state.rho.iter_mut().zip(&d).for_each(|(r, d)| *r += d);
        }
        PerturbationTarget::Orientation => {
            state.w = (0..n).map(stripe).collect();
        }
        PerturbationTarget::Noise => {
            let spectral = Spectral::new(*grid);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || -> Vec<f64> {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-amp..=amp)).collect();
                spectral.dealias(&raw)
            };
            let mut d = draw();
            remove_mean(&mut d);
            state.rho.iter_mut().zip(&d).for_each(|(r, d)| *r += d);
            state.w = draw();
        }
    }
    Ok(state)
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRecord {
    pub step: usize,
    pub time: f64,
    /// Amplitude of cos(qx) in ρ − 1.
    pub amp_rho_q: f64,
    pub amp_w_q: f64,
    /// min over the grid of ρ±.
    pub min_rho_pm: f64,
    pub mean_rho: f64,
    pub max_w: f64,
    pub min_w: f64,
    pub min_rho: f64,
    pub max_rho: f64,
}

impl DiagRecord {
    pub fn of(sim: &Simulation, step: usize, state: &AtomicState) -> Self {
        let (amp_rho_q, amp_w_q) = sim.mode_amplitudes(state, 1);
        let ext = |v: &[f64]| {
            v.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
        };
        let (min_rho, max_rho) = ext(&state.rho);
        let (min_w, max_w) = ext(&state.w);
        Self {
            step,
            time: state.time,
            amp_rho_q,
            amp_w_q,
            min_rho_pm: state.min_population(),
            mean_rho: state.mean_rho(),
            max_w,
            min_w,
            min_rho,
            max_rho,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub records: Vec<DiagRecord>,
}

impl Diagnostics {
    /// Column header line followed by one row per record.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", super::DIAGNOSTICS_COLUMNS)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.step, r.time, r.amp_rho_q, r.amp_w_q, r.min_rho_pm, r.mean_rho, r.max_w
            )?;
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn last(&self) -> Option<&DiagRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dt: f64,
    pub diagnostics: Diagnostics,
    pub snapshots: Vec<AtomicState>,
    pub final_state: AtomicState,
    pub warnings: Vec<String>,
}

/// A run stopped by a runtime failure, with everything produced so far.
#[derive(Debug, Clone, PartialEq, ThisError)]
#[error("run aborted: {error}")]
pub struct RunAborted {
    pub error: Error,
    pub partial: RunOutput,
}

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum RunError {
    /// Rejected before the first step.
    #[error(transparent)]
    Setup(#[from] Error),
    #[error(transparent)]
    Aborted(Box<RunAborted>),
}

fn check_invariants(state: &AtomicState, step: usize) -> std::result::Result<(), (bool, Error)> {
    let violation = |detail: String| Error::InvariantViolation {
        step,
        time: state.time,
        detail,
    };
    if state.rho.iter().chain(&state.w).any(|v| !v.is_finite()) {
        return Err((true, violation("non-finite value in ρ or w".into())));
    }
    let min_pop = state.min_population();
    if min_pop < POPULATION_FLOOR {
        return Err((false, violation(format!("negative sublevel population {min_pop:e}"))));
    }
    let mean = state.mean_rho();
    if (mean - 1.0).abs() > MEAN_TOL {
        return Err((false, violation(format!("mean density drifted to {mean}"))));
    }
    Ok(())
}

/// Seed, integrate and record a simulation.
pub fn run(model: Model, config: &SimConfig) -> std::result::Result<RunOutput, RunError> {
    if config.diagnostics_every == 0 {
        return Err(invalid("diagnostics_every", "must be at least 1").into());
    }
    let q = model.params.lattice_wavenumber();
    let grid_q = config.grid.lattice_wavenumber();
    if (grid_q - q).abs() > 1e-9 * q {
        return Err(Error::NotOnGrid(q).into());
    }
    let sim = Simulation::new(model, config.grid)?;
    let dt = config.dt.unwrap_or_else(|| sim.default_dt());
    if !(dt > 0.0) || dt > sim.dt_bound() {
        return Err(Error::TimeStep {
            dt,
            bound: sim.dt_bound(),
        }
        .into());
    }
    let mut state = seed_perturbation(&config.grid, q, config.perturbation, config.seed)?;
    let mut out = RunOutput {
        dt,
        diagnostics: Diagnostics::default(),
        snapshots: Vec::new(),
        final_state: state.clone(),
        warnings: Vec::new(),
    };
    out.diagnostics.records.push(DiagRecord::of(&sim, 0, &state));
    if config.snapshot_every > 0 {
        out.snapshots.push(state.clone());
    }

    let phi = sim.derived().coeffs.phi_lin.abs();
    let mut thin_warned = false;
    let mut invariant_warned = false;
    for step in 1..=config.n_steps {
        state = match sim.step(&state, dt) {
            Ok(s) => s,
            Err(error) => return Err(abort(out, state, error)),
        };
        if let Err((fatal, error)) = check_invariants(&state, step) {
            if fatal || config.abort_on_invariant_violation {
                return Err(abort(out, state, error));
            }
            if !invariant_warned {
                log::warn!("{error}");
                out.warnings.push(error.to_string());
                invariant_warned = true;
            }
        }
        if !thin_warned {
            let dev = state.rho.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
            if phi * dev >= 1.0 {
                let msg = format!("step {step}: phase modulation φ·δρ = {:.2} is no longer small", phi * dev);
                log::warn!("{msg}");
                out.warnings.push(msg);
                thin_warned = true;
            }
        }
        if step % config.diagnostics_every == 0 || step == config.n_steps {
            out.diagnostics.records.push(DiagRecord::of(&sim, step, &state));
        }
        if config.snapshot_every > 0 && step % config.snapshot_every == 0 {
            out.snapshots.push(state.clone());
        }
    }
    out.final_state = state;
    Ok(out)
}

fn abort(mut partial: RunOutput, last: AtomicState, error: Error) -> RunError {
    partial.final_state = last;
    RunError::Aborted(Box::new(RunAborted { error, partial }))
}
