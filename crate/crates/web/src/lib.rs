//! Browser bindings: three operations returning JSON for the static page in
//! `www/`.
//!
//! * [`delay_curve`]: τ(ρ) for a scalar loop with its admissibility bound.
//! * [`analyze`]: samples → delay profile → correction → fit → optimal period.
//! * [`step_response`]: delayed step response of the scalar loop or the
//!   benchmark plant.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use delayopt::discretize::{simulate, DelayedModel};
use delayopt::inversion::{delay_from_ratio, exact_domain_ratio, max_admissible_ratio, OperatingPoint};
use delayopt::optimizer::{evaluate_model, fit_quadratic, vertex};
use delayopt::profile::{build_profile, correct_piecewise, detect_irregular};
use delayopt::{Error, Result, ScalarLoopGains, StateSpacePlant};

#[derive(Debug, Serialize)]
pub struct DelayCurve {
    pub bound: f64,
    pub edge: f64,
    pub ratio: Vec<f64>,
    pub tau: Vec<f64>,
}

/// `n` samples of τ over `(0, edge)`, stopping short of the log singularity.
pub fn delay_curve_data(a: f64, b: f64, k: u32, h: f64, n: usize) -> Result<DelayCurve> {
    let gains = ScalarLoopGains::new(a, b, k)?;
    let bound = max_admissible_ratio(&gains, h)?;
    let edge = exact_domain_ratio(&gains, h)?;
    let n = n.clamp(2, 2000);
    let (mut ratio, mut tau) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let r = edge * 0.999 * i as f64 / (n - 1) as f64;
        if let Ok(est) = delay_from_ratio(&OperatingPoint::new(gains, h, r)?) {
            ratio.push(r);
            tau.push(est.tau);
        }
    }
    Ok(DelayCurve { bound, edge, ratio, tau })
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub h: Vec<f64>,
    pub tau: Vec<f64>,
    pub corrected: Vec<f64>,
    pub flagged_h: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub h_star: Option<f64>,
    pub tau_star: Option<f64>,
    pub curve_h: Vec<f64>,
    pub curve_tau: Vec<f64>,
}

/// Parses `h ratio` pairs, one per line; commas or whitespace separate.
pub fn parse_samples(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: Vec<f64> = fields.iter().filter_map(|f| f.parse().ok()).collect();
        if fields.len() != 2 || parsed.len() != 2 {
            return Err(Error::Parse { line: i as u64 + 1, message: format!("expected `h ratio`, got {line:?}") });
        }
        out.push((parsed[0], parsed[1]));
    }
    Ok(out)
}

pub fn analyze_data(a: f64, b: f64, k: u32, samples: &str, tolerance: f64, decimals: Option<u32>) -> Result<Analysis> {
    let gains = ScalarLoopGains::new(a, b, k)?;
    let profile = build_profile(&gains, &parse_samples(samples)?)?;
    let working = match decimals {
        Some(d) => profile.tabulated(d),
        None => profile.clone(),
    };
    let flagged = detect_irregular(&working, tolerance)?;
    let corrected = correct_piecewise(&working, &flagged, &[])?.table;
    let points = corrected.points();
    let model = fit_quadratic(&points)?;
    let optimum = vertex(&model).ok();
    let (lo, hi) = (points[0].0, points[points.len() - 1].0);
    let curve_h: Vec<f64> = (0..200).map(|i| lo + (hi - lo) * i as f64 / 199.0).collect();
    Ok(Analysis {
        h: profile.rows().iter().map(|r| r.h).collect(),
        tau: profile.rows().iter().map(|r| r.tau).collect(),
        corrected: points.iter().map(|p| p.1).collect(),
        flagged_h: flagged.iter().map(|&i| working.rows()[i].h).collect(),
        a: model.a,
        b: model.b,
        c: model.c,
        h_star: optimum.map(|o| o.h_star),
        tau_star: optimum.map(|o| o.tau_star),
        curve_tau: curve_h.iter().map(|&h| evaluate_model(&model, h)).collect(),
        curve_h,
    })
}

#[derive(Debug, Serialize)]
pub struct Response {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub warning: Option<String>,
}

/// Unit-step response; `plant` is `"benchmark"` or `"scalar"` (uses `a`, `b`).
pub fn step_response_data(plant: &str, a: f64, b: f64, h: f64, tau: f64, steps: usize) -> Result<Response> {
    let model = match plant {
        "benchmark" => DelayedModel::plant(&StateSpacePlant::benchmark(), h, tau)?,
        "scalar" => DelayedModel::scalar(&ScalarLoopGains::new(a, b, 0)?, h, tau)?,
        other => return Err(Error::Invalid(format!("unknown plant {other:?}"))),
    };
    let steps = steps.min(100_000);
    let traj = simulate(&model, &vec![0.0; model.order()], &vec![1.0; steps], steps, 0.0)?;
    Ok(Response {
        t: traj.iter().map(|p| p.t).collect(),
        y: traj.iter().map(|p| p.output).collect(),
        warning: model.warning().map(|w| w.to_string()),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen]
pub fn delay_curve(a: f64, b: f64, k: u32, h: f64, n: usize) -> std::result::Result<String, JsValue> {
    to_js(delay_curve_data(a, b, k, h, n))
}

/// `decimals < 0` disables tabulation.
#[wasm_bindgen]
pub fn analyze(a: f64, b: f64, k: u32, samples: &str, tolerance: f64, decimals: i32) -> std::result::Result<String, JsValue> {
    to_js(analyze_data(a, b, k, samples, tolerance, u32::try_from(decimals).ok()))
}

#[wasm_bindgen]
pub fn step_response(plant: &str, a: f64, b: f64, h: f64, tau: f64, steps: usize) -> std::result::Result<String, JsValue> {
    to_js(step_response_data(plant, a, b, h, tau, steps))
}
