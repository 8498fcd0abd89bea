//! Linear stability of the homogeneous state (ρ = 1, w = 0).
//!
//! Density and orientation perturbations at a single transverse wavenumber
//! decouple at linear order, so each has its own growth rate and its own
//! threshold pump rate. All rates are in 1/s, thresholds are reported both
//! as a pump rate and as a saturation parameter per circular component.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::physics::{self, AtomSpecies, Derived, SystemParams, TransitionCoefficients};
use crate::roots::{bisect, Midpoint, MAX_ITER, REL_TOL};

/// Denominators at or below this value are treated as "no threshold".
pub const MARGINAL: f64 = 1e-12;

/// How the orientation relaxes in the absence of pumping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Relaxation {
    /// Molasses-damped motion: relaxation Dq².
    #[default]
    Diffusive,
    /// Free flight across a period: relaxation r, no optomechanics.
    Ballistic,
}

/// Prefactor applied to the molasses repumping rate 6P_m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepumpModel {
    #[default]
    Literal,
    /// Multiplies 6P_m by a' for sensitivity checks.
    ScaledByAPrime,
}

impl RepumpModel {
    pub fn factor(self) -> f64 {
        match self {
            RepumpModel::Literal => 1.0,
            RepumpModel::ScaledByAPrime => physics::A_PUMP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstabilityMode {
    Density,
    Orientation,
}

/// Which terms enter the orientation growth rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientationOptions {
    pub include_optomech: bool,
    pub include_molasses: bool,
    pub relaxation: Relaxation,
    pub repump: RepumpModel,
}

impl OrientationOptions {
    /// Optical pumping only (plus molasses repumping if P_m > 0).
    pub fn magnetic() -> Self {
        Self {
            include_optomech: false,
            include_molasses: true,
            relaxation: Relaxation::Diffusive,
            repump: RepumpModel::Literal,
        }
    }

    /// Optical pumping and optomechanical driving together.
    pub fn combined() -> Self {
        Self {
            include_optomech: true,
            ..Self::magnetic()
        }
    }

    fn check(&self) -> Result<()> {
        if self.include_optomech && self.relaxation == Relaxation::Ballistic {
            return Err(Error::IncompatibleOptions(
                "ballistic relaxation leaves D undefined; disable the optomechanical term".into(),
            ));
        }
        Ok(())
    }
}

impl Default for OrientationOptions {
    fn default() -> Self {
        Self::combined()
    }
}

/// Record of what went into a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOptions {
    pub sin_theta: f64,
    /// `None` for the density threshold.
    pub orientation: Option<OrientationOptions>,
}

/// A growth rate with its contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRate {
    pub rate: f64,
    /// Damping contributions (non-positive).
    pub decay_terms: BTreeMap<&'static str, f64>,
    /// Driving contributions; these change sign with φ_lin sinΘ.
    pub drive_terms: BTreeMap<&'static str, f64>,
}

impl GrowthRate {
    fn from_terms(decay: Vec<(&'static str, f64)>, drive: Vec<(&'static str, f64)>) -> Self {
        let rate = decay.iter().chain(drive.iter()).map(|(_, v)| v).sum();
        Self {
            rate,
            decay_terms: decay.into_iter().collect(),
            drive_terms: drive.into_iter().collect(),
        }
    }

    pub fn largest_decay(&self) -> f64 {
        self.decay_terms
            .values()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Threshold pump rate `p0_th = numerator / denominator`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub mode: InstabilityMode,
    pub s0_th: Option<f64>,
    pub p0_th: Option<f64>,
    /// Net drive coefficient (dimensionless).
    pub denominator: f64,
    /// Rate that has to be overcome [1/s].
    pub numerator: f64,
    /// Contributions to `numerator`.
    pub decay_terms: BTreeMap<&'static str, f64>,
    /// Contributions to `denominator`.
    pub drive_terms: BTreeMap<&'static str, f64>,
    pub options: ThresholdOptions,
}

impl ThresholdResult {
    pub fn exists(&self) -> bool {
        self.s0_th.is_some()
    }

    fn build(
        mode: InstabilityMode,
        gamma: f64,
        decay: Vec<(&'static str, f64)>,
        drive: Vec<(&'static str, f64)>,
        options: ThresholdOptions,
    ) -> Self {
        let numerator: f64 = decay.iter().map(|(_, v)| v).sum();
        let denominator: f64 = drive.iter().map(|(_, v)| v).sum();
        let p0_th = (denominator > MARGINAL).then(|| numerator / denominator);
        Self {
            mode,
            s0_th: p0_th.map(|p| 2.0 * p / gamma),
            p0_th,
            denominator,
            numerator,
            decay_terms: decay.into_iter().collect(),
            drive_terms: drive.into_iter().collect(),
            options,
        }
    }
}

/// sinΘ giving the lowest threshold: +1 except for magnetic ordering at
/// blue detuning, which prefers −1.
pub fn optimal_sin_theta(mode: InstabilityMode, delta: f64) -> f64 {
    match mode {
        InstabilityMode::Orientation if delta > 0.0 => -1.0,
        _ => 1.0,
    }
}

fn check_sin_theta(sin_theta: f64) -> Result<()> {
    if !(sin_theta.abs() <= 1.0) {
        return Err(Error::Domain(format!("|sin Θ| must be <= 1, got {sin_theta}")));
    }
    Ok(())
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
    }
    Ok(())
}

/// Optomechanical coupling 4σDφ_lin sinΘ R q²/Γ per unit pump rate,
/// without the Clebsch-Gordan factor.
fn optomech_gain(d: &Derived, params: &SystemParams, species: &AtomSpecies, q: f64, sin_theta: f64) -> f64 {
    4.0 * d.sigma * d.molasses.diff * d.coeffs.phi_lin * sin_theta * params.reflectivity * q * q
        / species.gamma
}

/// Growth rate of a density perturbation at wavenumber `q` and pump rate `p0`.
pub fn growth_rate_density(
    species: &AtomSpecies,
    params: &SystemParams,
    q: f64,
    p0: f64,
    sin_theta: f64,
) -> Result<GrowthRate> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    check_rate("p0", p0)?;
    check_sin_theta(sin_theta)?;
    let d = Derived::new(species, params)?;
    let a = d.coeffs.a;
    Ok(GrowthRate::from_terms(
        vec![("diffusion", -d.molasses.diff * q * q)],
        vec![(
            "optomechanical",
            optomech_gain(&d, params, species, q, sin_theta) * p0 * (1.0 + a),
        )],
    ))
}

/// Growth rate of an orientation perturbation at wavenumber `q`.
pub fn growth_rate_orientation(
    species: &AtomSpecies,
    params: &SystemParams,
    q: f64,
    p0: f64,
    p_m: f64,
    sin_theta: f64,
    options: OrientationOptions,
) -> Result<GrowthRate> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    check_rate("p0", p0)?;
    check_rate("p_m", p_m)?;
    check_sin_theta(sin_theta)?;
    options.check()?;
    let d = Derived::new(species, params)?;
    let TransitionCoefficients { a, a_prime, phi_lin, .. } = d.coeffs;
    let r_fb = params.reflectivity;

    let relaxation = match options.relaxation {
        Relaxation::Diffusive => d.molasses.diff * q * q,
        Relaxation::Ballistic => physics::ballistic_rate(2.0 * std::f64::consts::PI / q, params.temperature, species)?,
    };
    let mut decay = vec![
        ("relaxation", -relaxation),
        ("pump_saturation", -2.0 * a_prime * p0 * (1.0 + r_fb)),
    ];
    if options.include_molasses {
        decay.push(("molasses_repump", -6.0 * options.repump.factor() * p_m));
    }
    let mut drive = vec![(
        "optical_pumping",
        -4.0 * r_fb * p0 * phi_lin * sin_theta * a_prime * (1.0 - a) / (1.0 + a),
    )];
    if options.include_optomech {
        drive.push((
            "optomechanical",
            optomech_gain(&d, params, species, q, sin_theta) * p0 * (1.0 - a).powi(2) / (1.0 + a),
        ));
    }
    Ok(GrowthRate::from_terms(decay, drive))
}

fn check_threshold_pre(params: &SystemParams) -> Result<()> {
    params.validate()?;
    if params.reflectivity == 0.0 {
        return Err(Error::NoFeedback);
    }
    if params.b0 <= 0.0 {
        return Err(Error::Domain("threshold needs b0 > 0".into()));
    }
    if params.delta == 0.0 {
        return Err(Error::Domain("threshold needs a non-zero detuning".into()));
    }
    Ok(())
}

/// Optomechanical bunching threshold, independent of the lattice period.
pub fn threshold_density(
    species: &AtomSpecies,
    params: &SystemParams,
    sin_theta: f64,
) -> Result<ThresholdResult> {
    check_threshold_pre(params)?;
    check_sin_theta(sin_theta)?;
    let d = Derived::new(species, params)?;
    let coupling =
        4.0 * d.coeffs.phi_lin * sin_theta * d.sigma * params.reflectivity * (1.0 + d.coeffs.a);
    Ok(ThresholdResult::build(
        InstabilityMode::Density,
        species.gamma,
        vec![("linewidth", species.gamma)],
        vec![("optomechanical", coupling)],
        ThresholdOptions {
            sin_theta,
            orientation: None,
        },
    ))
}

/// Magnetic ordering threshold at the lattice wavenumber of `params`.
///
/// The molasses pump rate is taken from `params.molasses_sat`.
pub fn threshold_orientation(
    species: &AtomSpecies,
    params: &SystemParams,
    sin_theta: f64,
    options: OrientationOptions,
) -> Result<ThresholdResult> {
    check_threshold_pre(params)?;
    check_sin_theta(sin_theta)?;
    options.check()?;
    let d = Derived::new(species, params)?;
    let TransitionCoefficients { a, a_prime, phi_lin, .. } = d.coeffs;
    let r_fb = params.reflectivity;
    let q = d.q;

    let relaxation = match options.relaxation {
        Relaxation::Diffusive => d.molasses.diff * q * q,
        Relaxation::Ballistic => d.ballistic_rate,
    };
    let mut decay = vec![("relaxation", relaxation)];
    if options.include_molasses {
        decay.push(("molasses_repump", 6.0 * options.repump.factor() * d.p_m));
    }
    let mut drive = vec![
        ("pump_saturation", -2.0 * a_prime * (1.0 + r_fb)),
        (
            "optical_pumping",
            -4.0 * r_fb * phi_lin * sin_theta * a_prime * (1.0 - a) / (1.0 + a),
        ),
    ];
    if options.include_optomech {
        drive.push((
            "optomechanical",
            4.0 * r_fb * phi_lin * sin_theta * q * q * d.sigma * d.molasses.diff / species.gamma
                * (1.0 - a).powi(2)
                / (1.0 + a),
        ));
    }
    Ok(ThresholdResult::build(
        InstabilityMode::Orientation,
        species.gamma,
        decay,
        drive,
        ThresholdOptions {
            sin_theta,
            orientation: Some(options),
        },
    ))
}

/// Smallest optical density supporting magnetic ordering (optical pumping
/// only), from |φ_lin| (1−a)/(1+a) · 2R/(1+R) = 1.
pub fn min_b0(delta: f64, reflectivity: f64) -> Result<f64> {
    if !(reflectivity > 0.0 && reflectivity <= 1.0) {
        return Err(Error::Domain(format!(
            "reflectivity must be in (0, 1], got {reflectivity}"
        )));
    }
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::Domain("detuning must be non-zero".into()));
    }
    let a = physics::A_WEAK;
    let phi_needed = (1.0 + reflectivity) / (2.0 * reflectivity) * (1.0 + a) / (1.0 - a);
    Ok(phi_needed * (1.0 + 4.0 * delta * delta) / delta.abs())
}

pub const PERIOD_BRACKET: (f64, f64) = (1e-6, 1e-3);
pub const MOLASSES_BRACKET: (f64, f64) = (0.0, 1.0);

fn s0_or_inf(res: &ThresholdResult) -> f64 {
    res.s0_th.unwrap_or(f64::INFINITY)
}

/// Lattice period Λ* where the magnetic and optomechanical thresholds meet.
///
/// Both thresholds use the same `sin_theta`. Below Λ* the density
/// instability has the lower threshold.
pub fn crossover_period(
    species: &AtomSpecies,
    params: &SystemParams,
    sin_theta: f64,
    options: OrientationOptions,
    bracket: (f64, f64),
) -> Result<f64> {
    let dens = threshold_density(species, params, sin_theta)?;
    let s_dens = dens.s0_th.ok_or(Error::NoCrossover {
        lo: bracket.0,
        hi: bracket.1,
    })?;
    let mut err = None;
    let root = bisect(
        |period| {
            let p = SystemParams {
                lattice_period: period,
                ..*params
            };
            match threshold_orientation(species, &p, sin_theta, options) {
                Ok(res) => s0_or_inf(&res) - s_dens,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        bracket.0,
        bracket.1,
        Midpoint::Geometric,
        REL_TOL,
        MAX_ITER,
    );
    if let Some(e) = err {
        return Err(e);
    }
    root
}

/// Molasses saturation parameter at which molasses repumping lifts the
/// magnetic threshold up to the optomechanical one. Returns 0 if the
/// magnetic threshold is already the higher one without molasses.
pub fn crossover_molasses(
    species: &AtomSpecies,
    params: &SystemParams,
    sin_theta: f64,
    options: OrientationOptions,
    bracket: (f64, f64),
) -> Result<f64> {
    let options = OrientationOptions {
        include_molasses: true,
        ..options
    };
    let at = |s_m: f64| SystemParams {
        molasses_sat: s_m,
        ..*params
    };
    let s_dens = threshold_density(species, params, sin_theta)?
        .s0_th
        .ok_or(Error::NoCrossover {
            lo: bracket.0,
            hi: bracket.1,
        })?;
    let base = threshold_orientation(species, &at(0.0), sin_theta, options)?;
    let s_mag = base.s0_th.ok_or_else(|| {
        Error::Domain("magnetic threshold does not exist without molasses".into())
    })?;
    if s_mag >= s_dens {
        return Ok(0.0);
    }
    let mut err = None;
    let root = bisect(
        |s_m| match threshold_orientation(species, &at(s_m), sin_theta, options) {
            Ok(res) => s0_or_inf(&res) - s_dens,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        bracket.0,
        bracket.1,
        Midpoint::Arithmetic,
        REL_TOL,
        MAX_ITER,
    );
    if let Some(e) = err {
        return Err(e);
    }
    root
}
