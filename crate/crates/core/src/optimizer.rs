//! Least-squares parabola `τ(h) = a + b·h + c·h²` and its minimizer.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::ProfileTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Sum of squared residuals over the points the model was built on.
    pub sse: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalPoint {
    pub h_star: f64,
    pub tau_star: f64,
}

pub fn evaluate_model(model: &QuadraticModel, h: f64) -> f64 {
    model.a + h * (model.b + h * model.c)
}

pub fn sum_squared_residuals(a: f64, b: f64, c: f64, points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .map(|&(h, tau)| {
            let r = tau - (a + h * (b + h * c));
            r * r
        })
        .sum()
}

impl QuadraticModel {
    /// A model with given coefficients, scored against `points`.
    pub fn from_coefficients(a: f64, b: f64, c: f64, points: &[(f64, f64)]) -> Self {
        QuadraticModel { a, b, c, sse: sum_squared_residuals(a, b, c, points), n_points: points.len() }
    }

    /// Coefficients rounded to the given decimal places, rescored on `points`.
    pub fn rounded(&self, decimals: [u32; 3], points: &[(f64, f64)]) -> Self {
        use crate::profile::round_to;
        QuadraticModel::from_coefficients(
            round_to(self.a, decimals[0]),
            round_to(self.b, decimals[1]),
            round_to(self.c, decimals[2]),
            points,
        )
    }
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            v[row] -= f * v[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (v[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Normal equations `[Σ1 Σh Σh²; Σh Σh² Σh³; Σh² Σh³ Σh⁴]·(a,b,c) = (Στ, Σhτ, Σh²τ)`
/// for abscissae `xs`.
fn normal_equations(xs: impl Iterator<Item = (f64, f64)>) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for (x, tau) in xs {
        let mut p = 1.0;
        for (i, acc) in s.iter_mut().enumerate() {
            *acc += p;
            if i < 3 {
                t[i] += p * tau;
            }
            p *= x;
        }
    }
    ([[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]], t)
}

/// Least-squares quadratic through `(h, tau)` points.
///
/// The abscissa is centred on its mean and scaled to unit half-range before
/// forming the normal equations; with `h` in milliseconds the raw system
/// spans about twelve orders of magnitude.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<QuadraticModel> {
    if points.iter().any(|(h, t)| !h.is_finite() || !t.is_finite()) {
        return Err(Error::Invalid("fit points must be finite".into()));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "a quadratic needs 3 distinct abscissae, got {}",
            distinct.len()
        )));
    }

    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let half_range = points.iter().map(|p| (p.0 - mean).abs()).fold(0.0, f64::max);
    let (m, v) = normal_equations(points.iter().map(|&(h, tau)| ((h - mean) / half_range, tau)));
    let [p0, p1, p2] = solve3(m, v)
        .ok_or_else(|| Error::RankDeficient("normal equations are singular".into()))?;

    // τ = p0 + p1·x + p2·x², x = (h − mean)/s
    let s = half_range;
    let c = p2 / (s * s);
    let b = p1 / s - 2.0 * p2 * mean / (s * s);
    let a = p0 - p1 * mean / s + p2 * mean * mean / (s * s);
    Ok(QuadraticModel::from_coefficients(a, b, c, points))
}

/// Relative residual `‖N·θ − v‖ / ‖v‖` of the raw (uncentred) normal
/// equations at the model's coefficients.
pub fn normal_equation_residual(model: &QuadraticModel, points: &[(f64, f64)]) -> f64 {
    let (m, v) = normal_equations(points.iter().copied());
    let theta = [model.a, model.b, model.c];
    let r: f64 = (0..3)
        .map(|i| {
            let lhs: f64 = (0..3).map(|j| m[i][j] * theta[j]).sum();
            (lhs - v[i]).powi(2)
        })
        .sum();
    let norm: f64 = v.iter().map(|x| x * x).sum();
    (r / norm).sqrt()
}

/// Minimizer of the parabola: `h* = −b/(2c)`, `τ* = a − b²/(4c)`.
pub fn vertex(model: &QuadraticModel) -> Result<OptimalPoint> {
    if !(model.c > 0.0) {
        return Err(Error::NoInteriorMinimum(model.c));
    }
    Ok(OptimalPoint {
        h_star: -model.b / (2.0 * model.c),
        tau_star: model.a - model.b * model.b / (4.0 * model.c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedRow {
    pub h: f64,
    pub tau_data: f64,
    pub tau_model: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimization {
    pub model: QuadraticModel,
    pub optimum: OptimalPoint,
    pub evaluated: Vec<EvaluatedRow>,
}

/// Fit, minimize and evaluate the model on the profile's own grid.
pub fn optimize_sampling(profile: &ProfileTable) -> Result<Optimization> {
    if profile.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "optimization needs at least 3 rows, got {}",
            profile.len()
        )));
    }
    let points = profile.points();
    let model = fit_quadratic(&points)?;
    let optimum = vertex(&model)?;
    let evaluated = points
        .iter()
        .map(|&(h, tau)| EvaluatedRow { h, tau_data: tau, tau_model: evaluate_model(&model, h) })
        .collect();
    Ok(Optimization { model, optimum, evaluated })
}
