//! Physical constants, system parameters and the closed-form quantities
//! derived from them.
//!
//! Everything here is SI except the detunings, which are kept in units of
//! the natural linewidth, and the saturation intensity, which is in
//! mW/cm² so that intensities can be compared with laboratory values.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380_649e-23;

/// Relative strength of the weak σ transition of a J=1/2 → J'=3/2 line.
pub const A_WEAK: f64 = 1.0 / 3.0;
/// Optical pumping efficiency of the same transition.
pub const A_PUMP: f64 = 2.0 / 9.0;

/// Fixed constants of the atomic transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpecies {
    /// Natural linewidth Γ [1/s].
    pub gamma: f64,
    /// Transition wavelength [m].
    pub lambda: f64,
    /// Atomic mass [kg].
    pub mass: f64,
    /// Saturation intensity [mW/cm²].
    pub i_sat: f64,
}

impl AtomSpecies {
    pub fn new(gamma: f64, lambda: f64, mass: f64, i_sat: f64) -> Result<Self> {
        let species = Self {
            gamma,
            lambda,
            mass,
            i_sat,
        };
        species.validate()?;
        Ok(species)
    }

    /// ⁸⁷Rb D₂ line, σ-polarized saturation intensity.
    pub fn rb87_d2() -> Self {
        Self {
            gamma: 2.0 * PI * 6.0666e6,
            lambda: 780.241e-9,
            mass: 1.443_16e-25,
            i_sat: 1.669,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("mass", self.mass),
            ("i_sat", self.i_sat),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Optical wavenumber k = 2π/λ [1/m].
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda
    }
}

impl Default for AtomSpecies {
    fn default() -> Self {
        Self::rb87_d2()
    }
}

/// Experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Pump detuning in units of Γ.
    pub delta: f64,
    /// Line-centre optical density for equal Zeeman populations.
    pub b0: f64,
    /// Mirror reflectivity R.
    pub reflectivity: f64,
    /// Cloud-to-mirror distance d [m].
    pub mirror_distance: f64,
    /// Longitudinal cloud extent L [m].
    pub cloud_length: f64,
    /// Transverse lattice period Λ [m].
    pub lattice_period: f64,
    /// Cloud temperature [K].
    pub temperature: f64,
    /// Molasses detuning in units of Γ (only the magnitude is used).
    pub molasses_detuning: f64,
    /// Saturation parameter of one molasses beam.
    pub molasses_sat: f64,
    /// Pump saturation parameter per circular component.
    pub pump_sat: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        let species = AtomSpecies::rb87_d2();
        let lattice_period = 100e-6;
        Self {
            delta: -8.6,
            b0: 80.0,
            reflectivity: 1.0,
            mirror_distance: quarter_talbot_distance(lattice_period, &species),
            cloud_length: 5e-3,
            lattice_period,
            temperature: 150e-6,
            molasses_detuning: 1.8,
            molasses_sat: 0.0,
            pump_sat: 0.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("delta", self.delta),
            ("b0", self.b0),
            ("reflectivity", self.reflectivity),
            ("mirror_distance", self.mirror_distance),
            ("cloud_length", self.cloud_length),
            ("lattice_period", self.lattice_period),
            ("temperature", self.temperature),
            ("molasses_detuning", self.molasses_detuning),
            ("molasses_sat", self.molasses_sat),
            ("pump_sat", self.pump_sat),
        ];
        if let Some((name, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(name, format!("must be finite, got {v}")));
        }
        if self.lattice_period <= 0.0 {
            return Err(invalid("lattice_period", "must be > 0"));
        }
        if self.temperature <= 0.0 {
            return Err(invalid("temperature", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(invalid("reflectivity", "must lie in [0, 1]"));
        }
        if self.b0 < 0.0 {
            return Err(invalid("b0", "must be >= 0"));
        }
        if self.molasses_sat < 0.0 {
            return Err(invalid("molasses_sat", "must be >= 0"));
        }
        if self.pump_sat < 0.0 {
            return Err(invalid("pump_sat", "must be >= 0"));
        }
        if self.mirror_distance < 0.0 {
            return Err(invalid("mirror_distance", "must be >= 0"));
        }
        if self.cloud_length < 0.0 {
            return Err(invalid("cloud_length", "must be >= 0"));
        }
        Ok(())
    }

    /// Lattice wavenumber q = 2π/Λ [1/m].
    pub fn lattice_wavenumber(&self) -> f64 {
        2.0 * PI / self.lattice_period
    }

    /// Smallest transverse period compatible with a diffractively thin cloud.
    pub fn min_thin_period(&self, species: &AtomSpecies) -> f64 {
        (species.lambda * self.cloud_length).sqrt()
    }

    /// Whether Λ ≥ √(λL) holds.
    pub fn thin_medium_valid(&self, species: &AtomSpecies) -> bool {
        self.lattice_period >= self.min_thin_period(species)
    }
}

/// Dimensionless transition coefficients for a given cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCoefficients {
    pub a: f64,
    pub a_prime: f64,
    /// Phase shift with all atoms in one stretched state [rad].
    pub phi_s: f64,
    /// Phase shift for equal populations [rad].
    pub phi_lin: f64,
}

impl TransitionCoefficients {
    pub fn new(b0: f64, delta: f64) -> Self {
        let (phi_lin, phi_s) = derive_phases(b0, delta);
        Self {
            a: A_WEAK,
            a_prime: A_PUMP,
            phi_s,
            phi_lin,
        }
    }

    /// (1 − a)/(1 + a), the weight of the orientation in the σ± phases.
    pub fn orientation_contrast(&self) -> f64 {
        (1.0 - self.a) / (1.0 + self.a)
    }
}

/// Molasses damping and diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MolassesDerived {
    /// Velocity damping α [kg/s].
    pub alpha: f64,
    /// Spatial diffusion D [m²/s].
    pub diff: f64,
    /// Momentum diffusion D_p [kg² m²/s³].
    pub d_p: f64,
}

/// Optomechanical coupling strength σ = ħΓΔ/(2k_B T).
pub fn derive_sigma(species: &AtomSpecies, delta: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(HBAR * species.gamma * delta / (2.0 * K_B * temperature))
}

/// Returns `(phi_lin, phi_s)`.
pub fn derive_phases(b0: f64, delta: f64) -> (f64, f64) {
    let phi_lin = b0 * delta / (1.0 + 4.0 * delta * delta);
    (phi_lin, 2.0 * phi_lin / (1.0 + A_WEAK))
}

/// Effective orientation decay from ballistic transit across one period [1/s].
pub fn ballistic_rate(lattice_period: f64, temperature: f64, species: &AtomSpecies) -> Result<f64> {
    if !(lattice_period > 0.0) {
        return Err(Error::Domain(format!(
            "lattice period must be positive, got {lattice_period}"
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mean_speed = (8.0 * K_B * temperature / (PI * species.mass)).sqrt();
    Ok(4.0 / (PI * lattice_period) * mean_speed)
}

/// Lin-perp-lin molasses estimate α ≈ (3/7)ħk²|Δ_M| with D = k_B T/α.
pub fn molasses_derived(
    species: &AtomSpecies,
    molasses_detuning: f64,
    temperature: f64,
) -> Result<MolassesDerived> {
    if molasses_detuning == 0.0 || !molasses_detuning.is_finite() {
        return Err(Error::Domain("molasses detuning must be non-zero".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let k = species.wavenumber();
    let alpha = 3.0 / 7.0 * HBAR * k * k * molasses_detuning.abs();
    let thermal = K_B * temperature;
    Ok(MolassesDerived {
        alpha,
        diff: thermal / alpha,
        d_p: alpha * thermal,
    })
}

/// Round-trip diffraction phase Θ = q²d/k of a transverse sideband.
pub fn talbot_phase(q: f64, mirror_distance: f64, species: &AtomSpecies) -> f64 {
    q * q * mirror_distance / species.wavenumber()
}

/// Mirror distance at which Θ(2π/Λ) = π/2.
pub fn quarter_talbot_distance(lattice_period: f64, species: &AtomSpecies) -> f64 {
    let q = 2.0 * PI / lattice_period;
    0.5 * PI * species.wavenumber() / (q * q)
}

/// Pump rate P = Γs/2 [1/s].
pub fn sat_to_rate(s: f64, species: &AtomSpecies) -> f64 {
    0.5 * species.gamma * s
}

pub fn rate_to_sat(p: f64, species: &AtomSpecies) -> f64 {
    2.0 * p / species.gamma
}

/// Intensity [mW/cm²] for a detuned saturation parameter.
pub fn sat_to_intensity(s0: f64, delta: f64, species: &AtomSpecies) -> f64 {
    s0 * (1.0 + 4.0 * delta * delta) * species.i_sat
}

pub fn intensity_to_sat(intensity: f64, delta: f64, species: &AtomSpecies) -> f64 {
    intensity / ((1.0 + 4.0 * delta * delta) * species.i_sat)
}

/// All closed-form quantities needed by the stability analysis and the
/// integrator, evaluated once for a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    pub k: f64,
    pub q: f64,
    pub sigma: f64,
    pub coeffs: TransitionCoefficients,
    pub molasses: MolassesDerived,
    /// Homogeneous pump rate per circular component [1/s].
    pub p0: f64,
    /// Pump rate of one molasses beam [1/s].
    pub p_m: f64,
    pub ballistic_rate: f64,
    /// Θ at the lattice wavenumber.
    pub theta: f64,
}

impl Derived {
    pub fn new(species: &AtomSpecies, params: &SystemParams) -> Result<Self> {
        species.validate()?;
        params.validate()?;
        let q = params.lattice_wavenumber();
        Ok(Self {
            k: species.wavenumber(),
            q,
            sigma: derive_sigma(species, params.delta, params.temperature)?,
            coeffs: TransitionCoefficients::new(params.b0, params.delta),
            molasses: molasses_derived(species, params.molasses_detuning, params.temperature)?,
            p0: sat_to_rate(params.pump_sat, species),
            p_m: sat_to_rate(params.molasses_sat, species),
            ballistic_rate: ballistic_rate(params.lattice_period, params.temperature, species)?,
            theta: talbot_phase(q, params.mirror_distance, species),
        })
    }
}
