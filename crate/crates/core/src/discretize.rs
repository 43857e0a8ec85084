//! Zero-order-hold discretization with a constant input delay.
//!
//! Over one period of length `h`, the held input is the previous command for
//! the first `tau` seconds and the current command afterwards:
//!
//! ```text
//! x[k+1] = Φ x[k] + Γ₀ u[k] + Γ₁ u[k-1]
//! Φ  = e^{A h}
//! Γ₀ = ∫₀^{h-τ} e^{A s} ds · B
//! Γ₁ = ∫_{h-τ}^{h} e^{A s} ds · B = e^{A(h-τ)} ∫₀^{τ} e^{A s} ds · B
//! ```
//!
//! For a scalar loop these reduce to `Γ₀ = (B/A)(e^{A(h-τ)} - 1)` and
//! `Γ₁ = (B/A) e^{Ah} (1 - e^{-Aτ})`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::expm::{expm, zoh_pair};
use crate::plant::{ScalarLoopGains, StateSpacePlant};

/// Below this |a·s| the integral (e^{as} − 1)/a switches to its series.
const SERIES_THRESHOLD: f64 = 1e-8;

/// `∫₀ˢ e^{aσ} dσ = (e^{as} − 1)/a`, well defined as `a → 0`.
pub fn exp_integral(a: f64, s: f64) -> f64 {
    let z = a * s;
    if z.abs() < SERIES_THRESHOLD {
        s * (1.0 + z / 2.0 + z * z / 6.0)
    } else {
        z.exp_m1() / a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarDiscretization {
    pub phi: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub h: f64,
    pub tau: f64,
    /// Set when `tau > h`.
    pub warning: Option<Warning>,
}

fn check_period(h: f64, tau: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("sampling period must be positive, got {h}")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain(format!("delay must be nonnegative, got {tau}")));
    }
    Ok(())
}

/// Closed-form delayed discretization of the scalar loop `x' = A x + B u`.
///
/// Any `tau >= 0` is accepted; `tau > h` evaluates the same formulas and
/// carries a [`Warning::DelayExceedsPeriod`].
pub fn discretize_scalar_delayed(gains: &ScalarLoopGains, h: f64, tau: f64) -> Result<ScalarDiscretization> {
    check_period(h, tau)?;
    let (a, b) = (gains.a(), gains.b());
    let phi = (a * h).exp();
    let gamma0 = b * exp_integral(a, h - tau);
    let gamma1 = b * phi * exp_integral(-a, tau);
    let warning = (tau > h).then_some(Warning::DelayExceedsPeriod { h, tau });
    Ok(ScalarDiscretization { phi, gamma0, gamma1, h, tau, warning })
}

impl ScalarDiscretization {
    pub fn step(&self, x: f64, u_now: f64, u_prev: f64) -> f64 {
        self.phi * x + self.gamma0 * u_now + self.gamma1 * u_prev
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDiscretization {
    pub phi: DMatrix<f64>,
    pub gamma0: DVector<f64>,
    pub gamma1: DVector<f64>,
    pub h: f64,
    pub tau: f64,
}

/// Delayed discretization of a state-space plant. Requires `0 <= tau <= h`.
pub fn discretize_matrix_delayed(plant: &StateSpacePlant, h: f64, tau: f64) -> Result<MatrixDiscretization> {
    check_period(h, tau)?;
    if tau > h {
        return Err(Error::Domain(format!(
            "matrix discretization needs tau <= h, got tau={tau}, h={h}"
        )));
    }
    let n = plant.order();
    let phi = expm(plant.a(), h)?;
    let (head_phi, gamma0) = if tau == h {
        (DMatrix::identity(n, n), DVector::zeros(n))
    } else {
        zoh_pair(plant.a(), plant.b(), h - tau)?
    };
    let gamma1 = if tau == 0.0 {
        DVector::zeros(n)
    } else {
        let (_, tail) = zoh_pair(plant.a(), plant.b(), tau)?;
        head_phi * tail
    };
    Ok(MatrixDiscretization { phi, gamma0, gamma1, h, tau })
}

impl MatrixDiscretization {
    pub fn order(&self) -> usize {
        self.phi.nrows()
    }

    pub fn step(&self, x: &DVector<f64>, u_now: f64, u_prev: f64) -> Result<DVector<f64>> {
        if x.len() != self.order() {
            return Err(Error::Dimension(format!(
                "state has length {}, model order is {}",
                x.len(),
                self.order()
            )));
        }
        Ok(&self.phi * x + &self.gamma0 * u_now + &self.gamma1 * u_prev)
    }
}

fn check_oracle_delay(h: f64, tau: f64) -> Result<()> {
    check_period(h, tau)?;
    if tau > h {
        return Err(Error::Domain(format!("oracle needs tau in [0, h], got tau={tau}, h={h}")));
    }
    Ok(())
}

/// Exact state after one period, computed as two undelayed hold segments:
/// `u_prev` for `tau` seconds, then `u_now` for `h - tau` seconds.
pub fn oracle_two_segment_step_scalar(
    gains: &ScalarLoopGains,
    h: f64,
    tau: f64,
    x: f64,
    u_now: f64,
    u_prev: f64,
) -> Result<f64> {
    check_oracle_delay(h, tau)?;
    let (a, b) = (gains.a(), gains.b());
    let hold = |x: f64, u: f64, dur: f64| (a * dur).exp() * x + b * exp_integral(a, dur) * u;
    Ok(hold(hold(x, u_prev, tau), u_now, h - tau))
}

/// Matrix counterpart of [`oracle_two_segment_step_scalar`].
pub fn oracle_two_segment_step_matrix(
    plant: &StateSpacePlant,
    h: f64,
    tau: f64,
    x: &DVector<f64>,
    u_now: f64,
    u_prev: f64,
) -> Result<DVector<f64>> {
    check_oracle_delay(h, tau)?;
    if x.len() != plant.order() {
        return Err(Error::Dimension(format!(
            "state has length {}, plant order is {}",
            x.len(),
            plant.order()
        )));
    }
    let hold = |x: &DVector<f64>, u: f64, dur: f64| -> Result<DVector<f64>> {
        let (e, g) = zoh_pair(plant.a(), plant.b(), dur)?;
        Ok(e * x + g * u)
    };
    hold(&hold(x, u_prev, tau)?, u_now, h - tau)
}

/// A discretized model ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayedModel {
    /// Scalar loop; the output is the state itself.
    Scalar(ScalarDiscretization),
    Plant {
        disc: MatrixDiscretization,
        plant: StateSpacePlant,
    },
}

impl DelayedModel {
    pub fn scalar(gains: &ScalarLoopGains, h: f64, tau: f64) -> Result<Self> {
        discretize_scalar_delayed(gains, h, tau).map(DelayedModel::Scalar)
    }

    pub fn plant(plant: &StateSpacePlant, h: f64, tau: f64) -> Result<Self> {
        let disc = discretize_matrix_delayed(plant, h, tau)?;
        Ok(DelayedModel::Plant { disc, plant: plant.clone() })
    }

    pub fn order(&self) -> usize {
        match self {
            DelayedModel::Scalar(_) => 1,
            DelayedModel::Plant { disc, .. } => disc.order(),
        }
    }

    pub fn period(&self) -> f64 {
        match self {
            DelayedModel::Scalar(d) => d.h,
            DelayedModel::Plant { disc, .. } => disc.h,
        }
    }

    pub fn warning(&self) -> Option<Warning> {
        match self {
            DelayedModel::Scalar(d) => d.warning,
            DelayedModel::Plant { .. } => None,
        }
    }

    fn step(&self, x: &DVector<f64>, u_now: f64, u_prev: f64) -> Result<DVector<f64>> {
        match self {
            DelayedModel::Scalar(d) => Ok(DVector::from_element(1, d.step(x[0], u_now, u_prev))),
            DelayedModel::Plant { disc, .. } => disc.step(x, u_now, u_prev),
        }
    }

    fn output(&self, x: &DVector<f64>, u: f64) -> f64 {
        match self {
            DelayedModel::Scalar(_) => x[0],
            DelayedModel::Plant { plant, .. } => (plant.c() * x)[0] + plant.d() * u,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub t: f64,
    pub state: Vec<f64>,
    pub output: f64,
}

/// Runs `steps` delayed updates from `x0`.
///
/// `inputs[k]` is the command issued at sample `k`; the command before the
/// first sample is `u_prev0`. The returned trajectory has `steps + 1` points
/// stamped `t = k·h`.
pub fn simulate(
    model: &DelayedModel,
    x0: &[f64],
    inputs: &[f64],
    steps: usize,
    u_prev0: f64,
) -> Result<Vec<TrajectoryPoint>> {
    if x0.len() != model.order() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, model order is {}",
            x0.len(),
            model.order()
        )));
    }
    if inputs.len() < steps {
        return Err(Error::Dimension(format!(
            "{} inputs supplied for {steps} steps",
            inputs.len()
        )));
    }
    let h = model.period();
    // the command held at sample k, for the D·u feedthrough
    let held = |k: usize| inputs.get(k).or(inputs.last()).copied().unwrap_or(u_prev0);

    let mut x = DVector::from_column_slice(x0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(TrajectoryPoint { step: 0, t: 0.0, state: x.as_slice().to_vec(), output: model.output(&x, held(0)) });
    let mut u_prev = u_prev0;
    for k in 0..steps {
        let u_now = inputs[k];
        x = model.step(&x, u_now, u_prev)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: k + 1 });
        }
        u_prev = u_now;
        let step = k + 1;
        out.push(TrajectoryPoint {
            step,
            t: step as f64 * h,
            state: x.as_slice().to_vec(),
            output: model.output(&x, held(step)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains() -> ScalarLoopGains {
        ScalarLoopGains::new(-6.0, 6.0, 32).unwrap()
    }

    #[test]
    fn zero_delay_is_plain_zoh() {
        let d = discretize_scalar_delayed(&gains(), 0.005, 0.0).unwrap();
        assert!((d.phi - 0.970446).abs() < 5e-7);
        assert!((d.gamma0 - 0.029554).abs() < 5e-7);
        assert_eq!(d.gamma1, 0.0);
        assert!(d.warning.is_none());
    }

    #[test]
    fn full_period_delay() {
        let d = discretize_scalar_delayed(&gains(), 0.005, 0.005).unwrap();
        assert_eq!(d.gamma0, 0.0);
        assert!((d.gamma1 - 0.029554).abs() < 5e-7);
    }

    #[test]
    fn partial_delay_closed_forms() {
        let d = discretize_scalar_delayed(&gains(), 0.005, 0.002).unwrap();
        // direct evaluation with exp(), independent of exp_m1
        let (a, b, h, tau) = (-6.0f64, 6.0f64, 0.005f64, 0.002f64);
        let g0 = (b / a) * ((a * (h - tau)).exp() - 1.0);
        let g1 = (b / a) * (a * h).exp() * (1.0 - (-a * tau).exp());
        assert!((d.gamma0 - g0).abs() < 1e-14);
        assert!((d.gamma1 - g1).abs() < 1e-14);
        assert!((d.gamma0 - 0.017839).abs() < 5e-7);
        assert!((d.gamma1 - 0.011716).abs() < 1e-6);
        assert!((d.gamma0 + d.gamma1 - 0.029554).abs() < 1e-6);
    }

    #[test]
    fn long_delay_warns() {
        let d = discretize_scalar_delayed(&gains(), 0.001, 0.118).unwrap();
        assert_eq!(d.warning, Some(Warning::DelayExceedsPeriod { h: 0.001, tau: 0.118 }));
        assert!(d.gamma0.is_finite() && d.gamma1.is_finite());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(discretize_scalar_delayed(&gains(), 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(discretize_scalar_delayed(&gains(), 0.01, -1e-3), Err(Error::Domain(_))));
        let p = StateSpacePlant::benchmark();
        assert!(matches!(discretize_matrix_delayed(&p, 0.01, 0.02), Err(Error::Domain(_))));
        assert!(oracle_two_segment_step_scalar(&gains(), 0.01, 0.02, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn exp_integral_series_branch() {
        let a = -1e-12;
        let s = 0.01;
        assert!((exp_integral(a, s) - s).abs() < 1e-16);
        assert!((exp_integral(-6.0, 0.0)).abs() == 0.0);
    }

    #[test]
    fn step_examples() {
        let d = discretize_scalar_delayed(&gains(), 0.005, 0.002).unwrap();
        assert_eq!(d.step(0.0, 0.0, 0.0), 0.0);
        // Φ + Γ₀ + Γ₁ = e^{Ah} − (e^{Ah} − 1) = 1
        assert!((d.step(1.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        let undelayed = discretize_scalar_delayed(&gains(), 0.005, 0.0).unwrap();
        assert!((d.step(0.3, 0.7, 0.7) - undelayed.step(0.3, 0.7, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn oracle_agrees_on_example() {
        let d = discretize_scalar_delayed(&gains(), 0.005, 0.002).unwrap();
        let got = d.step(1.0, 2.0, -1.0);
        let want = oracle_two_segment_step_scalar(&gains(), 0.005, 0.002, 1.0, 2.0, -1.0).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn oracle_endpoints() {
        let g = gains();
        let seg = |x: f64, u: f64, dur: f64| (-6.0 * dur).exp() * x + (1.0 - (-6.0 * dur).exp()) * u;
        let at0 = oracle_two_segment_step_scalar(&g, 0.01, 0.0, 0.5, 2.0, -3.0).unwrap();
        assert!((at0 - seg(0.5, 2.0, 0.01)).abs() < 1e-14);
        let ath = oracle_two_segment_step_scalar(&g, 0.01, 0.01, 0.5, 2.0, -3.0).unwrap();
        assert!((ath - seg(0.5, -3.0, 0.01)).abs() < 1e-14);
    }

    #[test]
    fn matrix_zero_delay_has_no_previous_gain() {
        let d = discretize_matrix_delayed(&StateSpacePlant::benchmark(), 0.01, 0.0).unwrap();
        assert!(d.gamma1.iter().all(|v| *v == 0.0));
        let d = discretize_matrix_delayed(&StateSpacePlant::benchmark(), 0.01, 0.01).unwrap();
        assert!(d.gamma0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn first_order_matrix_matches_scalar() {
        let p = StateSpacePlant::first_order(-6.0, 6.0).unwrap();
        let m = discretize_matrix_delayed(&p, 0.005, 0.002).unwrap();
        let s = discretize_scalar_delayed(&gains(), 0.005, 0.002).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        assert!(rel(m.phi[(0, 0)], s.phi) < 1e-12);
        assert!(rel(m.gamma0[0], s.gamma0) < 1e-12);
        assert!(rel(m.gamma1[0], s.gamma1) < 1e-12);
    }

    #[test]
    fn matrix_step_dimension_mismatch() {
        let d = discretize_matrix_delayed(&StateSpacePlant::benchmark(), 0.01, 0.0).unwrap();
        assert!(matches!(d.step(&DVector::zeros(2), 0.0, 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn simulate_zero_steps() {
        let m = DelayedModel::plant(&StateSpacePlant::benchmark(), 0.01, 0.0).unwrap();
        let traj = simulate(&m, &[0.0; 3], &[], 0, 0.0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj[0].t, 0.0);
    }

    #[test]
    fn benchmark_step_response_reaches_dc_gain() {
        let m = DelayedModel::plant(&StateSpacePlant::benchmark(), 0.01, 0.0).unwrap();
        let n = 2000;
        let traj = simulate(&m, &[0.0; 3], &vec![1.0; n], n, 0.0).unwrap();
        let last = traj.last().unwrap();
        assert!((last.output - 1.0).abs() < 1e-3);
        assert_eq!(last.t, n as f64 * 0.01);
    }

    #[test]
    fn scalar_fixed_point() {
        let m = DelayedModel::scalar(&gains(), 0.001, 0.0).unwrap();
        let traj = simulate(&m, &[0.0], &vec![1.0; 10_000], 10_000, 0.0).unwrap();
        assert!((traj.last().unwrap().state[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn simulate_reports_divergence_step() {
        // |Φ| > 1 cannot occur for A < 0, so force it through the inputs
        let m = DelayedModel::scalar(&gains(), 0.001, 0.0).unwrap();
        let inputs = [1.0, f64::INFINITY, 1.0, 1.0];
        let err = simulate(&m, &[0.0], &inputs, 4, 0.0).unwrap_err();
        assert_eq!(err, Error::Divergence { step: 2 });
    }

    #[test]
    fn simulate_input_length_checked() {
        let m = DelayedModel::scalar(&gains(), 0.001, 0.0).unwrap();
        assert!(matches!(simulate(&m, &[0.0], &[1.0], 2, 0.0), Err(Error::Dimension(_))));
        assert!(matches!(simulate(&m, &[0.0, 1.0], &[1.0], 1, 0.0), Err(Error::Dimension(_))));
    }
}
