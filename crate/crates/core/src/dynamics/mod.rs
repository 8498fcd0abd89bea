//! Nonlinear evolution of total density ρ and orientation w = ρ₊ − ρ₋.
//!
//! The populations obey drift-diffusion equations in the optical dipole
//! potentials P± + aP∓, and optical pumping at rates a'P± transfers atoms
//! between the Zeeman sublevels. The pump rates are recomputed from the
//! instantaneous atomic state through the single-mirror feedback loop at
//! every integrator stage.
//!
//! Drift terms are evaluated in divergence form, (2σD/Γ)∇·(ρ±∇(P± + aP∓)),
//! which expands to the grad-grad plus Laplacian terms of the (ρ, w)
//! equations and conserves the atom number exactly in spectral space.

mod growth;
mod io;
mod run;

pub use growth::{measure_growth_rate, GrowthFit};
pub use io::{params_hash, read_snapshot, write_snapshot, Snapshot, DIAGNOSTICS_COLUMNS};
pub use run::{
    run, seed_perturbation, DiagRecord, Diagnostics, Perturbation, PerturbationTarget,
    RunAborted, RunError, RunOutput, SimConfig,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lsa::{Relaxation, RepumpModel};
use crate::optics::{self, FieldPair, PumpRates};
use crate::physics::{AtomSpecies, Derived, SystemParams};
use crate::spectral::{Spectral, TransverseGrid};

/// Physical content of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub species: AtomSpecies,
    pub params: SystemParams,
    pub relaxation: Relaxation,
    /// Dipole-force drift on/off (off is equivalent to σ = 0).
    pub optomech: bool,
    pub repump: RepumpModel,
}

impl Model {
    pub fn new(species: AtomSpecies, params: SystemParams) -> Self {
        Self {
            species,
            params,
            relaxation: Relaxation::Diffusive,
            optomech: true,
            repump: RepumpModel::Literal,
        }
    }
}

/// Transverse profiles of ρ and w at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicState {
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    pub time: f64,
}

impl AtomicState {
    /// ρ = 1, w = 0.
    pub fn homogeneous(len: usize) -> Self {
        Self {
            rho: vec![1.0; len],
            w: vec![0.0; len],
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn rho_plus(&self) -> Vec<f64> {
        self.rho.iter().zip(&self.w).map(|(r, w)| 0.5 * (r + w)).collect()
    }

    pub fn rho_minus(&self) -> Vec<f64> {
        self.rho.iter().zip(&self.w).map(|(r, w)| 0.5 * (r - w)).collect()
    }

    pub fn mean_rho(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    /// min over the grid of (ρ ± w)/2.
    pub fn min_population(&self) -> f64 {
        self.rho
            .iter()
            .zip(&self.w)
            .map(|(r, w)| 0.5 * (r - w.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    /// State with the orientation reversed.
    pub fn spin_flipped(&self) -> Self {
        Self {
            rho: self.rho.clone(),
            w: self.w.iter().map(|v| -v).collect(),
            time: self.time,
        }
    }
}

/// Integrator for one model on one grid.
#[derive(Debug, Clone)]
pub struct Simulation {
    model: Model,
    derived: Derived,
    spectral: Spectral,
    transfer: Vec<Complex64>,
    diffusion: f64,
    drift: f64,
    relax: f64,
    repump: f64,
}

impl Simulation {
    pub fn new(model: Model, grid: TransverseGrid) -> Result<Self> {
        let derived = Derived::new(&model.species, &model.params)?;
        if model.optomech && model.relaxation == Relaxation::Ballistic {
            return Err(Error::IncompatibleOptions(
                "ballistic relaxation cannot be combined with optomechanical drift".into(),
            ));
        }
        let spectral = Spectral::new(grid);
        let transfer = optics::transfer_function(
            &spectral,
            model.params.mirror_distance,
            &model.species,
            model.params.reflectivity,
        );
        let (diffusion, relax) = match model.relaxation {
            Relaxation::Diffusive => (derived.molasses.diff, 0.0),
            Relaxation::Ballistic => (0.0, derived.ballistic_rate),
        };
        let drift = if model.optomech {
            2.0 * derived.sigma * diffusion / model.species.gamma
        } else {
            0.0
        };
        Ok(Self {
            model,
            derived,
            spectral,
            transfer,
            diffusion,
            drift,
            relax,
            repump: 6.0 * model.repump.factor() * derived.p_m,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    pub fn grid(&self) -> &TransverseGrid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Fastest rate handled explicitly (everything except diffusion).
    pub fn explicit_rate(&self) -> f64 {
        let d = &self.derived;
        let c = d.coeffs;
        let r = self.model.params.reflectivity;
        let local = self.repump
            + self.relax
            + 2.0 * c.a_prime * d.p0 * (1.0 + r)
            + 4.0 * r * d.p0 * c.phi_lin.abs() * c.a_prime * c.orientation_contrast();
        let drift = 2.0 * self.drift.abs() * (1.0 + c.a) * r * d.p0 * c.phi_lin.abs()
            * self.spectral.k2_max_retained();
        local.max(drift)
    }

    /// 0.1 over the fastest rate, diffusion included.
    pub fn default_dt(&self) -> f64 {
        let fastest = (self.diffusion * self.spectral.k2_max_retained()).max(self.explicit_rate());
        if fastest > 0.0 {
            0.1 / fastest
        } else {
            1e-6
        }
    }

    /// Largest admissible explicit step.
    pub fn dt_bound(&self) -> f64 {
        let rate = self.explicit_rate();
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    fn check_state(&self, state: &AtomicState) -> Result<()> {
        let n = self.grid().len();
        for got in [state.rho.len(), state.w.len()] {
            if got != n {
                return Err(Error::ShapeMismatch { expected: n, got });
            }
        }
        Ok(())
    }

    /// Pump rates seen by the cloud, from the σ± sublevel populations.
    pub fn pump_rates(&self, rho_plus: &[f64], rho_minus: &[f64]) -> Result<PumpRates> {
        let input = FieldPair::linear_input(rho_plus.len(), self.derived.p0);
        let transmitted =
            optics::imprint_phase(&input, rho_plus, rho_minus, self.derived.coeffs.phi_s)?;
        let backward = optics::propagate_with(&self.spectral, &transmitted, &self.transfer);
        let raw = optics::assemble_pump_rates(self.derived.p0, &backward);
        Ok(PumpRates {
            p_plus: self.spectral.dealias(&raw.p_plus),
            p_minus: self.spectral.dealias(&raw.p_minus),
        })
    }

    /// All terms except D∇², with the optical loop closed on (ρ, w).
    fn reaction(&self, rho: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.derived.coeffs.a;
        let a_prime = self.derived.coeffs.a_prime;
        let rho_f = self.spectral.dealias(rho);
        let w_f = self.spectral.dealias(w);
        let rho_p: Vec<f64> = rho_f.iter().zip(&w_f).map(|(r, w)| 0.5 * (r + w)).collect();
        let rho_m: Vec<f64> = rho_f.iter().zip(&w_f).map(|(r, w)| 0.5 * (r - w)).collect();
        let pump = self.pump_rates(&rho_p, &rho_m)?;
        let n = rho.len();

        let mut drho = vec![0.0; n];
        let mut dw_drift = vec![0.0; n];
        if self.drift != 0.0 {
            let potential = |own: &[f64], other: &[f64]| -> Vec<f64> {
                own.iter().zip(other).map(|(p, o)| p + a * o).collect()
            };
            let grad_p = self
                .spectral
                .gradient(&potential(&pump.p_plus, &pump.p_minus));
            let grad_m = self
                .spectral
                .gradient(&potential(&pump.p_minus, &pump.p_plus));
            let flux = |pop: &[f64], grad: &[Vec<f64>]| -> Vec<Vec<f64>> {
                grad.iter()
                    .map(|g| pop.iter().zip(g).map(|(p, g)| p * g).collect())
                    .collect()
            };
            let div_p = self.spectral.divergence(&flux(&rho_p, &grad_p));
            let div_m = self.spectral.divergence(&flux(&rho_m, &grad_m));
            for i in 0..n {
                drho[i] = self.drift * (div_p[i] + div_m[i]);
                dw_drift[i] = self.drift * (div_p[i] - div_m[i]);
            }
        }

        let damping = self.relax + self.repump;
        let local: Vec<f64> = (0..n)
            .map(|i| {
                let (pp, pm) = (pump.p_plus[i], pump.p_minus[i]);
                a_prime * (pp - pm) * rho_f[i] - a_prime * (pp + pm) * w_f[i] - damping * w_f[i]
            })
            .collect();
        let local = self.spectral.dealias(&local);
        let dw = dw_drift.iter().zip(&local).map(|(d, l)| d + l).collect();
        Ok((drho, dw))
    }

    /// Time derivatives (dρ/dt, dw/dt) of the full equations of motion.
    pub fn rhs(&self, state: &AtomicState) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_state(state)?;
        let (mut drho, mut dw) = self.reaction(&state.rho, &state.w)?;
        if self.diffusion != 0.0 {
            let lap_r = self.spectral.laplacian(&state.rho);
            let lap_w = self.spectral.laplacian(&state.w);
            for i in 0..drho.len() {
                drho[i] += self.diffusion * lap_r[i];
                dw[i] += self.diffusion * lap_w[i];
            }
        }
        Ok((drho, dw))
    }

    /// One Strang step: exact half-step of diffusion, explicit midpoint for
    /// everything else, second diffusion half-step.
    pub fn step(&self, state: &AtomicState, dt: f64) -> Result<AtomicState> {
        self.check_state(state)?;
        let bound = self.dt_bound();
        if !(dt > 0.0) || dt > bound {
            return Err(Error::TimeStep { dt, bound });
        }
        let half = 0.5 * dt * self.diffusion;
        let mut rho = state.rho.clone();
        let mut w = state.w.clone();
        self.spectral.heat_step(&mut rho, half);
        self.spectral.heat_step(&mut w, half);

        let (k_rho, k_w) = self.reaction(&rho, &w)?;
        let mid_rho: Vec<f64> = rho.iter().zip(&k_rho).map(|(u, k)| u + 0.5 * dt * k).collect();
        let mid_w: Vec<f64> = w.iter().zip(&k_w).map(|(u, k)| u + 0.5 * dt * k).collect();
        let (k_rho, k_w) = self.reaction(&mid_rho, &mid_w)?;
        rho.iter_mut().zip(&k_rho).for_each(|(u, k)| *u += dt * k);
        w.iter_mut().zip(&k_w).for_each(|(u, k)| *u += dt * k);

        self.spectral.heat_step(&mut rho, half);
        self.spectral.heat_step(&mut w, half);
        Ok(AtomicState {
            rho,
            w,
            time: state.time + dt,
        })
    }

    /// Amplitudes |ρ̂(q)|, |ŵ(q)| of the lattice mode along x.
    pub fn mode_amplitudes(&self, state: &AtomicState, harmonic: usize) -> (f64, f64) {
        let j = harmonic * self.grid().periods();
        let rho_dev: Vec<f64> = state.rho.iter().map(|r| r - 1.0).collect();
        (
            self.spectral.mode_amplitude(&rho_dev, j),
            self.spectral.mode_amplitude(&state.w, j),
        )
    }
}
