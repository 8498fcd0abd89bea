use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;
/// Amplitudes above this are outside the linear regime.
pub const MAX_LINEAR_AMPLITUDE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    /// Slope of ln(amplitude) against time [1/s].
    pub rate: f64,
    pub intercept: f64,
    /// RMS residual of the log fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of ln A(t) = intercept + rate·t.
pub fn measure_growth_rate(times: &[f64], amplitudes: &[f64]) -> Result<GrowthFit> {
    if times.len() != amplitudes.len() {
        return Err(Error::ShapeMismatch {
            expected: times.len(),
            got: amplitudes.len(),
        });
    }
    let n = times.len();
    if n < MIN_POINTS {
        return Err(Error::Fit(format!("{n} samples, need at least {MIN_POINTS}")));
    }
    if let Some(a) = amplitudes.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::Fit(format!("non-positive amplitude {a}")));
    }
    if let Some(a) = amplitudes.iter().find(|a| **a > MAX_LINEAR_AMPLITUDE) {
        return Err(Error::Fit(format!(
            "amplitude {a:e} above {MAX_LINEAR_AMPLITUDE:e}, outside the linear regime"
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Fit("times must increase strictly".into()));
    }
    let logs: Vec<f64> = amplitudes.iter().map(|a| a.ln()).collect();
    let nf = n as f64;
    let t_mean = times.iter().sum::<f64>() / nf;
    let y_mean = logs.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, y) in times.iter().zip(&logs) {
        sxx += (t - t_mean).powi(2);
        sxy += (t - t_mean) * (y - y_mean);
    }
    let rate = sxy / sxx;
    let intercept = y_mean - rate * t_mean;
    let ss: f64 = times
        .iter()
        .zip(&logs)
        .map(|(t, y)| (y - intercept - rate * t).powi(2))
        .sum();
    Ok(GrowthFit {
        rate,
        intercept,
        residual: (ss / nf).sqrt(),
        points: n,
    })
}
