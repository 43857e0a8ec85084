//! Closed-form recovery of the control delay from an observed
//! state-to-input ratio ρ = x/u of the scalar loop.
//!
//! With `E = e^{-A h}` and `q = 1 + k − k·e^{A h}`, the delay is
//!
//! ```text
//! τ = −(1/A) · ln L,   L = (A/B)·E·q·ρ + k·E + 1
//! ```
//!
//! `L` is affine in ρ. It equals 1 (τ = 0) at the admissibility bound
//! `ρ* = (B/A)·(−k)/q` and vanishes at the edge of the inversion domain.
//! For `B > 0` both are upper bounds on ρ, with ρ* below the domain edge.

use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::plant::ScalarLoopGains;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub gains: ScalarLoopGains,
    pub h: f64,
    pub ratio: f64,
}

impl OperatingPoint {
    pub fn new(gains: ScalarLoopGains, h: f64, ratio: f64) -> Result<Self> {
        check_period(h)?;
        if !ratio.is_finite() {
            return Err(Error::Invalid(format!("ratio must be finite, got {ratio}")));
        }
        Ok(OperatingPoint { gains, h, ratio })
    }
}

/// Recovered delay together with the log argument it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    pub tau: f64,
    pub log_argument: f64,
    /// Set when `tau <= 0`.
    pub warning: Option<Warning>,
}

fn check_period(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("sampling period must be positive, got {h}")))
    }
}

/// `q = 1 + k − k·e^{Ah}`, computed without cancellation.
fn loop_factor(gains: &ScalarLoopGains, h: f64) -> f64 {
    1.0 - gains.k() as f64 * (gains.a() * h).exp_m1()
}

/// Slope of the log argument in ρ: `(A/B)·e^{−Ah}·q`.
fn ratio_coefficient(gains: &ScalarLoopGains, h: f64) -> Result<f64> {
    let coef = gains.a() / gains.b() * (-gains.a() * h).exp() * loop_factor(gains, h);
    if coef == 0.0 || !coef.is_finite() {
        return Err(Error::DegenerateLoop(format!(
            "ratio coefficient is {coef} at h={h}"
        )));
    }
    Ok(coef)
}

fn log_argument(gains: &ScalarLoopGains, h: f64, ratio: f64) -> Result<f64> {
    let coef = ratio_coefficient(gains, h)?;
    Ok(coef * ratio + gains.k() as f64 * (-gains.a() * h).exp() + 1.0)
}

/// Delay recovered from an operating point.
///
/// Fails with [`Error::OutOfDomain`] when the log argument is not positive.
/// A zero or negative delay is returned with [`Warning::NonpositiveDelay`].
pub fn delay_from_ratio(pt: &OperatingPoint) -> Result<DelayEstimate> {
    check_period(pt.h)?;
    let l = log_argument(&pt.gains, pt.h, pt.ratio)?;
    if !(l > 0.0) {
        return Err(Error::OutOfDomain { h: pt.h, ratio: pt.ratio, log_argument: l });
    }
    let tau = -l.ln() / pt.gains.a();
    let warning = (tau <= 0.0).then_some(Warning::NonpositiveDelay { ratio: pt.ratio, tau });
    Ok(DelayEstimate { tau, log_argument: l, warning })
}

/// The ratio that produces delay `tau` at period `h`; inverse of
/// [`delay_from_ratio`].
pub fn ratio_from_delay(gains: &ScalarLoopGains, h: f64, tau: f64) -> Result<f64> {
    check_period(h)?;
    if !tau.is_finite() {
        return Err(Error::Invalid(format!("delay must be finite, got {tau}")));
    }
    let coef = ratio_coefficient(gains, h)?;
    let e = (-gains.a() * h).exp();
    Ok(((-gains.a() * tau).exp() - gains.k() as f64 * e - 1.0) / coef)
}

/// Ratio at which the recovered delay is exactly zero: `(B/A)·(−k)/q`.
pub fn max_admissible_ratio(gains: &ScalarLoopGains, h: f64) -> Result<f64> {
    check_period(h)?;
    let q = loop_factor(gains, h);
    if q == 0.0 || !q.is_finite() {
        return Err(Error::DegenerateLoop(format!("1 + k - k e^(Ah) is {q} at h={h}")));
    }
    Ok(gains.b() / gains.a() * -(gains.k() as f64) / q)
}

/// Ratio at which the log argument vanishes:
/// `(B/A)·e^{Ah}·(k·e^{−Ah} + 1)/(k·e^{Ah} − k − 1)`.
pub fn exact_domain_ratio(gains: &ScalarLoopGains, h: f64) -> Result<f64> {
    check_period(h)?;
    let k = gains.k() as f64;
    let grow = (gains.a() * h).exp();
    let denom = -loop_factor(gains, h);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateLoop(format!("k e^(Ah) - k - 1 is {denom} at h={h}")));
    }
    Ok(gains.b() / gains.a() * grow * (k / grow + 1.0) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case1() -> ScalarLoopGains {
        ScalarLoopGains::new(-6.0, 6.0, 32).unwrap()
    }

    fn case2() -> ScalarLoopGains {
        ScalarLoopGains::new(-11.0, 6.0, 32).unwrap()
    }

    fn tau(g: ScalarLoopGains, h: f64, ratio: f64) -> f64 {
        delay_from_ratio(&OperatingPoint::new(g, h, ratio).unwrap()).unwrap().tau
    }

    #[test]
    fn table_rows() {
        assert!((tau(case1(), 0.001, 26.0) - 0.118).abs() < 5e-4);
        assert!((tau(case2(), 0.001, 12.0) - 0.109).abs() < 5e-4);
        // printed as 0.107; the formula gives 0.10650 (see README)
        assert!((tau(case1(), 0.005, 16.0) - 0.1064970).abs() < 1e-6);
    }

    #[test]
    fn bound_gives_zero_delay() {
        let bound = max_admissible_ratio(&case1(), 0.001).unwrap();
        assert!((bound - 26.858).abs() < 1e-3);
        let est = delay_from_ratio(&OperatingPoint::new(case1(), 0.001, bound).unwrap()).unwrap();
        assert!(est.tau.abs() < 1e-9);
        assert!((est.log_argument - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_edge() {
        let edge = exact_domain_ratio(&case1(), 0.001).unwrap();
        assert!((edge - 27.693).abs() < 5e-4);
        let err = delay_from_ratio(&OperatingPoint::new(case1(), 0.001, edge + 0.01).unwrap());
        assert!(matches!(err, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn between_bounds_is_negative_with_warning() {
        let est = delay_from_ratio(&OperatingPoint::new(case1(), 0.001, 27.2).unwrap()).unwrap();
        assert!(est.tau < 0.0 && est.tau.is_finite());
        assert!(matches!(est.warning, Some(Warning::NonpositiveDelay { .. })));
    }

    #[test]
    fn zero_k_bound_is_zero() {
        let g = ScalarLoopGains::new(-6.0, 6.0, 0).unwrap();
        assert_eq!(max_admissible_ratio(&g, 0.001).unwrap(), 0.0);
    }

    #[test]
    fn inverse_round_trip_on_table_rows() {
        let rows = [
            (case1(), 0.001, 26.0),
            (case1(), 0.003, 20.0),
            (case2(), 0.003, 8.5),
            (case2(), 0.005, 6.0),
        ];
        for (g, h, ratio) in rows {
            let t = tau(g, h, ratio);
            let back = ratio_from_delay(&g, h, t).unwrap();
            assert!(((back - ratio) / ratio).abs() < 1e-10);
        }
    }

    #[test]
    fn ratio_from_printed_delay() {
        let r = ratio_from_delay(&case1(), 0.001, 0.118).unwrap();
        assert_eq!(r.round(), 26.0);
        let at_zero = ratio_from_delay(&case1(), 0.001, 0.0).unwrap();
        let bound = max_admissible_ratio(&case1(), 0.001).unwrap();
        assert!(((at_zero - bound) / bound).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_period() {
        assert!(OperatingPoint::new(case1(), 0.0, 1.0).is_err());
        assert!(ratio_from_delay(&case1(), -1.0, 0.1).is_err());
        assert!(max_admissible_ratio(&case1(), f64::NAN).is_err());
    }
}
