//! Scenario files and the end-to-end run: profile → correct → fit →
//! optimize → plot, followed by golden checks against reference values.
//!
//! Scenarios are TOML:
//!
//! ```toml
//! name = "case2"
//! outputs = ["profile", "corrected", "fit", "vertex", "evaluated", "plot"]
//!
//! [gains]
//! a = -11.0
//! b = 6.0
//! k = 32
//!
//! [samples]            # or: profile_csv = "measured.csv"
//! h = [0.001, 0.002, 0.003, 0.004, 0.005]
//! ratio = [12.0, 10.0, 8.5, 7.0, 6.0]
//!
//! [correction]
//! tolerance = 0.05             # concavity threshold, fraction of the delay span
//! tabulate_decimals = 3        # round delays before correcting and fitting
//! overrides = [{ h = 0.004, tau = 0.063 }]
//!
//! [fit]
//! rounding_decimals = { a = 2, b = 2, c = 0 }
//!
//! [printed]                    # values as printed in the reference, cross-checked
//! slope = 3914.0
//!
//! [[golden]]
//! name = "delay profile"
//! quantity = "profile.tau"
//! expected = [0.109, 0.059, 0.019, 0.085, 0.108]
//! tolerance = 5e-4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::inversion::{delay_from_ratio, OperatingPoint};
use crate::optimizer::{evaluate_model, fit_quadratic, vertex, OptimalPoint, QuadraticModel};
use crate::plant::ScalarLoopGains;
use crate::plot::{argmin, curve, Series, CURVE_POINTS};
use crate::profile::{
    build_profile, correct_piecewise, detect_irregular, load_profile_csv, Correction, CorrectionNote,
    ProfileTable, DEFAULT_IRREGULAR_TOLERANCE,
};

const CASE1: &str = include_str!("../scenarios/case1.toml");
const CASE2: &str = include_str!("../scenarios/case2.toml");

/// Relative slack on golden tolerances, so a bound like ±5e-4 is not
/// missed by binary rounding of decimal inputs.
const TOLERANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Profile,
    Correct,
    Fit,
    Optimize,
    Plot,
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profile" => Ok(Stage::Profile),
            "correct" => Ok(Stage::Correct),
            "fit" => Ok(Stage::Fit),
            "optimize" => Ok(Stage::Optimize),
            "plot" | "all" => Ok(Stage::Plot),
            other => Err(Error::Config(format!("unknown stage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Profile,
    Corrected,
    Fit,
    Vertex,
    Evaluated,
    Plot,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Samples {
    pub h: Vec<f64>,
    pub ratio: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub h: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionConfig {
    pub tolerance: f64,
    pub tabulate_decimals: Option<u32>,
    pub overrides: Vec<Override>,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig { tolerance: DEFAULT_IRREGULAR_TOLERANCE, tabulate_decimals: None, overrides: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decimals {
    pub a: u32,
    pub b: u32,
    pub c: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Decimal places the reference rounds each coefficient to.
    pub rounding_decimals: Option<Decimals>,
}

/// Values printed in the reference that are cross-checked against the fit.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Printed {
    /// Quadratic coefficient as printed in the fitted equation.
    pub c: Option<f64>,
    /// Slope of the printed derivative `dτ/dh = b + slope·h`.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
pub enum Quantity {
    #[serde(rename = "profile.tau")]
    ProfileTau,
    #[serde(rename = "flagged.h")]
    FlaggedH,
    #[serde(rename = "correction.interpolated")]
    CorrectionInterpolated,
    #[serde(rename = "corrected.tau")]
    CorrectedTau,
    #[serde(rename = "fit.a")]
    FitA,
    #[serde(rename = "fit.b")]
    FitB,
    #[serde(rename = "fit.c")]
    FitC,
    #[serde(rename = "vertex.h_star")]
    HStar,
    #[serde(rename = "vertex.h_star_rounded")]
    HStarRounded,
    #[serde(rename = "vertex.tau_star")]
    TauStar,
    #[serde(rename = "vertex.tau_star_rounded")]
    TauStarRounded,
    #[serde(rename = "evaluated.tau_exact")]
    EvaluatedExact,
    #[serde(rename = "evaluated.tau_rounded")]
    EvaluatedRounded,
    #[serde(rename = "plot.h_min")]
    PlotMinimum,
}

impl Quantity {
    fn stage(self) -> Stage {
        use Quantity::*;
        match self {
            ProfileTau => Stage::Profile,
            FlaggedH | CorrectionInterpolated | CorrectedTau => Stage::Correct,
            FitA | FitB | FitC => Stage::Fit,
            HStar | HStarRounded | TauStar | TauStarRounded | EvaluatedExact | EvaluatedRounded => Stage::Optimize,
            PlotMinimum => Stage::Plot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenCheck {
    pub name: String,
    pub quantity: Quantity,
    pub expected: Vec<f64>,
    /// Restricts row-valued quantities to these sampling periods.
    #[serde(default)]
    pub h: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub gains: Option<ScalarLoopGains>,
    pub samples: Option<Samples>,
    pub profile_csv: Option<PathBuf>,
    #[serde(default)]
    pub correction: CorrectionConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub printed: Printed,
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub golden: Vec<GoldenCheck>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Loads a scenario file; a relative `profile_csv` resolves against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::parse(&text)?;
        if let (Some(csv), Some(dir)) = (&s.profile_csv, path.parent()) {
            if csv.is_relative() {
                s.profile_csv = Some(dir.join(csv));
            }
        }
        Ok(s)
    }

    /// The two shipped reproduction scenarios, `case1` and `case2`.
    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "case1" => Scenario::parse(CASE1),
            "case2" => Scenario::parse(CASE2),
            other => Err(Error::Config(format!("no bundled scenario {other:?} (expected case1 or case2)"))),
        }
    }

    pub fn bundled_source(name: &str) -> Option<&'static str> {
        match name {
            "case1" => Some(CASE1),
            "case2" => Some(CASE2),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match (&self.samples, &self.profile_csv) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config("give exactly one of [samples] or profile_csv".into()))
            }
            (Some(s), None) => {
                if s.h.is_empty() {
                    return Err(Error::Config("samples are empty".into()));
                }
                if s.h.len() != s.ratio.len() {
                    return Err(Error::Config(format!(
                        "samples have {} periods but {} ratios",
                        s.h.len(),
                        s.ratio.len()
                    )));
                }
                if self.gains.is_none() {
                    return Err(Error::Config("[gains] are required with inline samples".into()));
                }
            }
            (None, Some(_)) => {}
        }
        if self.outputs.is_empty() {
            return Err(Error::Config("outputs must not be empty".into()));
        }
        if !(self.correction.tolerance >= 0.0) {
            return Err(Error::Config("correction.tolerance must be nonnegative".into()));
        }
        for g in &self.golden {
            if !g.h.is_empty() && g.h.len() != g.expected.len() {
                return Err(Error::Config(format!("golden check {:?}: h and expected differ in length", g.name)));
            }
        }
        Ok(())
    }

    pub fn wants(&self, output: Output) -> bool {
        self.outputs.contains(&output)
    }
}

/// Coefficients of the least-squares fit, plus the reference's rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct FitStage {
    pub exact: QuadraticModel,
    pub rounded: Option<QuadraticModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedRow {
    pub h: f64,
    pub tau_data: f64,
    pub tau_exact: f64,
    pub tau_rounded: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeStage {
    pub exact: OptimalPoint,
    pub rounded: Option<OptimalPoint>,
    /// `τ*` with only `a` replaced by its rounded value.
    pub tau_star_rounded_a: Option<f64>,
    pub evaluated: Vec<EvaluatedRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStage {
    /// Profile before correction.
    pub raw: Series,
    /// Fitted curve(s) sampled over the profile's period range.
    pub fit: Series,
    /// Data points after correction.
    pub markers: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenResult {
    pub name: String,
    pub quantity: Quantity,
    pub expected: Vec<f64>,
    pub actual: Vec<f64>,
    pub tolerance: f64,
    pub max_error: f64,
    pub passed: bool,
}

/// Everything a run produced, up to the requested stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub name: String,
    pub stage: Stage,
    /// Delays at full precision.
    pub profile: ProfileTable,
    /// The profile that feeds correction and fitting (tabulated if configured).
    pub working: ProfileTable,
    pub flagged: Vec<usize>,
    pub correction: Option<Correction>,
    pub fit: Option<FitStage>,
    pub optimize: Option<OptimizeStage>,
    pub plot: Option<PlotStage>,
    pub warnings: Vec<String>,
    pub golden: Vec<GoldenResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub a_exact: Option<f64>,
    pub b_exact: Option<f64>,
    pub c_exact: Option<f64>,
    pub a_paper: Option<f64>,
    pub b_paper: Option<f64>,
    pub c_paper: Option<f64>,
    pub h_star: Option<f64>,
    pub h_star_paper: Option<f64>,
    pub tau_star_exact: Option<f64>,
    pub tau_star_paper: Option<f64>,
    pub tau_star_rounded_a: Option<f64>,
    pub sse: Option<f64>,
    pub sse_paper: Option<f64>,
    pub n_points: usize,
    pub flagged_h: Vec<f64>,
    pub corrections: Vec<CorrectionNote>,
    pub warnings: Vec<String>,
    pub golden: Vec<GoldenResult>,
    pub golden_passed: bool,
}

impl Run {
    pub fn golden_passed(&self) -> bool {
        self.golden.iter().all(|g| g.passed)
    }

    /// The table after correction, or the working table when correction
    /// was not reached.
    pub fn corrected(&self) -> &ProfileTable {
        self.correction.as_ref().map(|c| &c.table).unwrap_or(&self.working)
    }

    pub fn report(&self) -> Report {
        let exact = self.fit.as_ref().map(|f| f.exact);
        let rounded = self.fit.as_ref().and_then(|f| f.rounded);
        let opt = self.optimize.as_ref();
        Report {
            scenario: self.name.clone(),
            a_exact: exact.map(|m| m.a),
            b_exact: exact.map(|m| m.b),
            c_exact: exact.map(|m| m.c),
            a_paper: rounded.map(|m| m.a),
            b_paper: rounded.map(|m| m.b),
            c_paper: rounded.map(|m| m.c),
            h_star: opt.map(|o| o.exact.h_star),
            h_star_paper: opt.and_then(|o| o.rounded).map(|p| p.h_star),
            tau_star_exact: opt.map(|o| o.exact.tau_star),
            tau_star_paper: opt.and_then(|o| o.rounded).map(|p| p.tau_star),
            tau_star_rounded_a: opt.and_then(|o| o.tau_star_rounded_a),
            sse: exact.map(|m| m.sse),
            sse_paper: rounded.map(|m| m.sse),
            n_points: self.corrected().len(),
            flagged_h: self.flagged.iter().map(|&i| self.working.rows()[i].h).collect(),
            corrections: self.correction.as_ref().map(|c| c.notes.clone()).unwrap_or_default(),
            warnings: self.warnings.clone(),
            golden: self.golden.clone(),
            golden_passed: self.golden_passed(),
        }
    }
}

fn initial_profile(scenario: &Scenario, warnings: &mut Vec<String>) -> Result<ProfileTable> {
    match (&scenario.samples, &scenario.profile_csv, &scenario.gains) {
        (Some(s), _, Some(gains)) => {
            let samples: Vec<(f64, f64)> = s.h.iter().copied().zip(s.ratio.iter().copied()).collect();
            for &(h, ratio) in &samples {
                let est = delay_from_ratio(&OperatingPoint::new(*gains, h, ratio)?);
                if let Ok(est) = est {
                    if let Some(w) = est.warning {
                        warnings.push(w.to_string());
                    }
                }
            }
            build_profile(gains, &samples)
        }
        (None, Some(path), _) => {
            let mut table = load_profile_csv(path)?;
            table.gains = scenario.gains;
            Ok(table)
        }
        _ => Err(Error::Config("scenario has no usable sample source".into())),
    }
}

/// Runs the scenario through `until` and evaluates the golden checks that
/// belong to the stages reached.
pub fn run(scenario: &Scenario, until: Stage) -> Result<Run> {
    let mut warnings = Vec::new();
    let profile = initial_profile(scenario, &mut warnings)?;
    if profile.is_empty() {
        return Err(Error::Config("profile is empty".into()));
    }
    let long = profile.rows().iter().filter(|r| r.tau > r.h).count();
    if long > 0 {
        let first = profile.rows().iter().find(|r| r.tau > r.h).unwrap();
        warnings.push(format!(
            "{}: {long} of {} rows exceed one sampling period (the one-step delayed hold model covers tau <= h)",
            Warning::DelayExceedsPeriod { h: first.h, tau: first.tau },
            profile.len()
        ));
    }
    let working = match scenario.correction.tabulate_decimals {
        Some(d) => profile.tabulated(d),
        None => profile.clone(),
    };

    let mut out = Run {
        name: scenario.name.clone(),
        stage: until,
        profile,
        working,
        flagged: Vec::new(),
        correction: None,
        fit: None,
        optimize: None,
        plot: None,
        warnings,
        golden: Vec::new(),
    };

    if until >= Stage::Correct {
        let flagged = detect_irregular(&out.working, scenario.correction.tolerance)?;
        let overrides: Vec<(f64, f64)> = scenario.correction.overrides.iter().map(|o| (o.h, o.tau)).collect();
        let correction = correct_piecewise(&out.working, &flagged, &overrides)?;
        for note in &correction.notes {
            if let (crate::profile::Source::ManualOverride, Some(interp)) = (note.source, note.interpolated) {
                out.warnings.push(format!(
                    "override at h={}: applied tau={}, neighbour interpolation gives {:.6} (original {})",
                    note.h, note.applied, interp, note.original
                ));
            } else if note.source == crate::profile::Source::ManualOverride {
                out.warnings.push(format!(
                    "override at h={}: applied tau={} in place of {} (no two-sided interpolation)",
                    note.h, note.applied, note.original
                ));
            }
        }
        out.flagged = flagged;
        out.correction = Some(correction);
    }

    if until >= Stage::Fit {
        let points = out.corrected().points();
        let exact = fit_quadratic(&points)?;
        let rounded = scenario.fit.rounding_decimals.map(|d| exact.rounded([d.a, d.b, d.c], &points));
        printed_checks(&scenario.printed, &exact, rounded.as_ref(), &mut out.warnings);
        out.fit = Some(FitStage { exact, rounded });
    }

    if until >= Stage::Optimize {
        let fit = out.fit.as_ref().unwrap();
        let exact_opt = vertex(&fit.exact)?;
        let rounded_opt = fit.rounded.as_ref().map(vertex).transpose()?;
        let tau_star_rounded_a = fit.rounded.map(|p| {
            p.a - fit.exact.b * fit.exact.b / (4.0 * fit.exact.c)
        });
        let evaluated = out
            .corrected()
            .points()
            .iter()
            .map(|&(h, tau)| EvaluatedRow {
                h,
                tau_data: tau,
                tau_exact: evaluate_model(&fit.exact, h),
                tau_rounded: fit.rounded.map(|p| evaluate_model(&p, h)),
            })
            .collect();
        out.optimize = Some(OptimizeStage { exact: exact_opt, rounded: rounded_opt, tau_star_rounded_a, evaluated });
    }

    if until >= Stage::Plot {
        let fit = out.fit.as_ref().unwrap();
        let mut raw = Series::new("raw", &["h", "tau"]);
        raw.rows = out.profile.points().iter().map(|&(h, t)| vec![h, t]).collect();
        let mut markers = Series::new("markers", &["h", "tau"]);
        markers.rows = out.corrected().points().iter().map(|&(h, t)| vec![h, t]).collect();
        let rows = out.corrected().rows();
        let (lo, hi) = (rows[0].h, rows[rows.len() - 1].h);
        let mut models = vec![("tau_exact", &fit.exact)];
        if let Some(p) = &fit.rounded {
            models.push(("tau_rounded", p));
        }
        let fit_series = curve("fit", &models, lo, hi, CURVE_POINTS);
        out.plot = Some(PlotStage { raw, fit: fit_series, markers });
    }

    out.golden = scenario
        .golden
        .iter()
        .filter(|g| g.quantity.stage() <= until)
        .map(|g| check(&out, g))
        .collect::<Result<_>>()?;
    Ok(out)
}

fn printed_checks(printed: &Printed, exact: &QuadraticModel, rounded: Option<&QuadraticModel>, warnings: &mut Vec<String>) {
    let c = rounded.map(|p| p.c).unwrap_or(exact.c);
    if let Some(pc) = printed.c {
        if (pc - c).abs() > 1e-3 * c.abs() {
            warnings.push(format!(
                "printed quadratic coefficient {pc} disagrees with the fitted c={:.2}; the fitted value is used",
                exact.c
            ));
        }
    }
    if let Some(slope) = printed.slope {
        if (slope - 2.0 * c).abs() > 1e-3 * c.abs() {
            let b = rounded.map(|p| p.b).unwrap_or(exact.b);
            warnings.push(format!(
                "printed derivative slope {slope} disagrees with 2c={:.1}; it would put the minimum at h={:.4} instead of {:.6}",
                2.0 * c,
                -b / slope,
                -b / (2.0 * c)
            ));
        }
    }
}

fn select(rows: &[(f64, f64)], hs: &[f64]) -> Result<Vec<f64>> {
    if hs.is_empty() {
        return Ok(rows.iter().map(|r| r.1).collect());
    }
    hs.iter()
        .map(|&h| {
            rows.iter()
                .find(|r| (r.0 - h).abs() <= 1e-9 * h.abs())
                .map(|r| r.1)
                .ok_or_else(|| Error::Config(format!("golden check refers to h={h}, which is not in the profile")))
        })
        .collect()
}

fn check(run: &Run, g: &GoldenCheck) -> Result<GoldenResult> {
    use Quantity::*;
    let missing = || Error::Config(format!("golden check {:?}: quantity not available", g.name));
    let fit = run.fit.as_ref();
    let opt = run.optimize.as_ref();
    let actual = match g.quantity {
        ProfileTau => select(&run.profile.points(), &g.h)?,
        FlaggedH => run.flagged.iter().map(|&i| run.working.rows()[i].h).collect(),
        CorrectionInterpolated => {
            let notes = &run.correction.as_ref().ok_or_else(missing)?.notes;
            let pairs: Vec<(f64, f64)> =
                notes.iter().map(|n| (n.h, n.interpolated.unwrap_or(f64::NAN))).collect();
            select(&pairs, &g.h)?
        }
        CorrectedTau => select(&run.corrected().points(), &g.h)?,
        FitA => vec![fit.ok_or_else(missing)?.exact.a],
        FitB => vec![fit.ok_or_else(missing)?.exact.b],
        FitC => vec![fit.ok_or_else(missing)?.exact.c],
        HStar => vec![opt.ok_or_else(missing)?.exact.h_star],
        TauStar => vec![opt.ok_or_else(missing)?.exact.tau_star],
        HStarRounded => vec![opt.and_then(|o| o.rounded).ok_or_else(missing)?.h_star],
        TauStarRounded => vec![opt.and_then(|o| o.rounded).ok_or_else(missing)?.tau_star],
        EvaluatedExact => {
            let rows: Vec<_> = opt.ok_or_else(missing)?.evaluated.iter().map(|r| (r.h, r.tau_exact)).collect();
            select(&rows, &g.h)?
        }
        EvaluatedRounded => {
            let rows: Vec<_> = opt
                .ok_or_else(missing)?
                .evaluated
                .iter()
                .map(|r| (r.h, r.tau_rounded.unwrap_or(f64::NAN)))
                .collect();
            select(&rows, &g.h)?
        }
        PlotMinimum => vec![argmin(&run.plot.as_ref().ok_or_else(missing)?.fit, 1).ok_or_else(missing)?],
    };
    let max_error = if actual.len() == g.expected.len() {
        actual
            .iter()
            .zip(&g.expected)
            .map(|(a, e)| if a.is_finite() { (a - e).abs() } else { f64::INFINITY })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(GoldenResult {
        name: g.name.clone(),
        quantity: g.quantity,
        expected: g.expected.clone(),
        actual,
        tolerance: g.tolerance,
        max_error,
        passed: max_error <= g.tolerance * (1.0 + TOLERANCE_SLACK),
    })
}
