//! Bracketing root finder shared by the threshold scans.

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 80;
pub const REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Midpoint {
    Arithmetic,
    /// Bisect in log space; both bracket ends must be positive.
    Geometric,
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops once the bracket width drops below `rel_tol` times its upper end,
/// or errors after `max_iter` halvings. Non-finite values of `f` are
/// treated as `+inf`, which lets callers encode "threshold does not exist".
pub fn bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    midpoint: Midpoint,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut f_lo = eval(lo);
    let f_hi = eval(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoCrossover { lo, hi });
    }
    for _ in 0..max_iter {
        if (hi - lo).abs() <= rel_tol * hi.abs().max(lo.abs()) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = match midpoint {
            Midpoint::Arithmetic => 0.5 * (lo + hi),
            Midpoint::Geometric => (lo * hi).sqrt(),
        };
        let f_mid = eval(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NotConverged(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt2() {
        let x = bisect(|x| x * x - 2.0, 0.0, 2.0, Midpoint::Arithmetic, 1e-12, 80).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn geometric_bracket() {
        let x = bisect(|x| x.ln() - 1e-3f64.ln(), 1e-6, 1.0, Midpoint::Geometric, 1e-3, 80).unwrap();
        assert!((x - 1e-3).abs() / 1e-3 < 1e-3);
    }

    #[test]
    fn no_sign_change() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, Midpoint::Arithmetic, 1e-6, 80),
            Err(Error::NoCrossover { .. })
        ));
    }

    #[test]
    fn nan_counts_as_positive() {
        let x = bisect(
            |x| if x > 0.5 { f64::NAN } else { -1.0 },
            0.0,
            1.0,
            Midpoint::Arithmetic,
            1e-9,
            80,
        )
        .unwrap();
        assert!((x - 0.5).abs() < 1e-8);
    }

    #[test]
    fn iteration_cap() {
        assert!(matches!(
            bisect(|x| x - 0.3, 0.0, 1.0, Midpoint::Arithmetic, 0.0, 10),
            Err(Error::NotConverged(10))
        ));
    }
}
