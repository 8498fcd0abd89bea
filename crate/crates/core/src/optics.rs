//! Thin-cloud phase imprint, diffraction to the mirror and back, and the
//! resulting σ± pump rates.
//!
//! Field amplitudes are scaled so that |E|² is a pump rate in 1/s. The
//! forward beam is linearly polarized: both circular components carry the
//! homogeneous rate p0 with zero relative phase.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::physics::{talbot_phase, AtomSpecies, A_WEAK};
use crate::spectral::Spectral;

/// σ⁺ and σ⁻ amplitudes on a transverse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub e_plus: Vec<Complex64>,
    pub e_minus: Vec<Complex64>,
}

impl FieldPair {
    /// Linearly polarized input carrying pump rate `p0` per component.
    pub fn linear_input(len: usize, p0: f64) -> Self {
        let amp = Complex64::new(p0.sqrt(), 0.0);
        Self {
            e_plus: vec![amp; len],
            e_minus: vec![amp; len],
        }
    }

    pub fn len(&self) -> usize {
        self.e_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_plus.is_empty()
    }

    /// Total power Σ(|E₊|² + |E₋|²).
    pub fn power(&self) -> f64 {
        self.e_plus
            .iter()
            .chain(&self.e_minus)
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Same field with the circular components exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            e_plus: self.e_minus.clone(),
            e_minus: self.e_plus.clone(),
        }
    }
}

/// Pump rates of the two circular components [1/s].
#[derive(Debug, Clone, PartialEq)]
pub struct PumpRates {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
}

impl PumpRates {
    pub fn uniform(len: usize, p: f64) -> Self {
        Self {
            p_plus: vec![p; len],
            p_minus: vec![p; len],
        }
    }

    pub fn total(&self) -> Vec<f64> {
        self.p_plus.iter().zip(&self.p_minus).map(|(a, b)| a + b).collect()
    }

    pub fn swapped(&self) -> Self {
        Self {
            p_plus: self.p_minus.clone(),
            p_minus: self.p_plus.clone(),
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// Transmission through the cloud: E±(L) = E±(0)·exp(iφ_S ρ± + i a φ_S ρ∓).
/// Phase-only, so |E| is preserved pointwise.
pub fn imprint_phase(
    input: &FieldPair,
    rho_plus: &[f64],
    rho_minus: &[f64],
    phi_s: f64,
) -> Result<FieldPair> {
    let n = input.e_plus.len();
    check_len(n, input.e_minus.len())?;
    check_len(n, rho_plus.len())?;
    check_len(n, rho_minus.len())?;
    let phase = |own: f64, other: f64| Complex64::from_polar(1.0, phi_s * (own + A_WEAK * other));
    Ok(FieldPair {
        e_plus: input
            .e_plus
            .iter()
            .zip(rho_plus.iter().zip(rho_minus))
            .map(|(e, (&p, &m))| e * phase(p, m))
            .collect(),
        e_minus: input
            .e_minus
            .iter()
            .zip(rho_minus.iter().zip(rho_plus))
            .map(|(e, (&m, &p))| e * phase(m, p))
            .collect(),
    })
}

/// Per-mode round-trip transfer √R·exp(iΘ(k)), Θ = |k|²d/k₀.
pub fn transfer_function(
    spectral: &Spectral,
    mirror_distance: f64,
    species: &AtomSpecies,
    reflectivity: f64,
) -> Vec<Complex64> {
    let amp = reflectivity.sqrt();
    spectral
        .k2()
        .iter()
        .map(|&k2| Complex64::from_polar(amp, talbot_phase(k2.sqrt(), mirror_distance, species)))
        .collect()
}

/// Apply a precomputed transfer function to both components.
pub fn propagate_with(spectral: &Spectral, field: &FieldPair, transfer: &[Complex64]) -> FieldPair {
    let apply = |e: &[Complex64]| {
        let mut buf = e.to_vec();
        spectral.forward(&mut buf);
        buf.iter_mut().zip(transfer).for_each(|(c, h)| *c *= h);
        spectral.inverse(&mut buf);
        buf
    };
    FieldPair {
        e_plus: apply(&field.e_plus),
        e_minus: apply(&field.e_minus),
    }
}

/// Free-space propagation over the round trip 2d back to the cloud.
pub fn feedback_propagate(
    spectral: &Spectral,
    field: &FieldPair,
    mirror_distance: f64,
    species: &AtomSpecies,
    reflectivity: f64,
) -> FieldPair {
    let transfer = transfer_function(spectral, mirror_distance, species, reflectivity);
    propagate_with(spectral, field, &transfer)
}

/// P± = p0 + |E±,back|²; interference between the counter-propagating
/// beams is neglected.
pub fn assemble_pump_rates(p0: f64, backward: &FieldPair) -> PumpRates {
    let rates = |e: &[Complex64]| e.iter().map(|c| p0 + c.norm_sqr()).collect();
    PumpRates {
        p_plus: rates(&backward.e_plus),
        p_minus: rates(&backward.e_minus),
    }
}
