//! Sampling-period / delay profiles and single-point correction.

mod csv;

pub use self::csv::{csv_number, load_profile_csv, read_profile_csv, save_profile_csv, write_profile_csv};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{delay_from_ratio, OperatingPoint};
use crate::plant::ScalarLoopGains;

/// Default concavity tolerance for [`detect_irregular`], as a fraction of
/// the profile's delay span.
pub const DEFAULT_IRREGULAR_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Computed,
    Measured,
    Interpolated,
    ManualOverride,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Computed => "computed",
            Source::Measured => "measured",
            Source::Interpolated => "interpolated",
            Source::ManualOverride => "manual_override",
        }
    }

    pub fn is_correction(self) -> bool {
        matches!(self, Source::Interpolated | Source::ManualOverride)
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "computed" => Ok(Source::Computed),
            "measured" => Ok(Source::Measured),
            "interpolated" => Ok(Source::Interpolated),
            "manual_override" => Ok(Source::ManualOverride),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub h: f64,
    /// Absent for externally measured delays.
    pub ratio: Option<f64>,
    pub tau: f64,
    pub source: Source,
}

impl ProfileRow {
    pub fn measured(h: f64, tau: f64) -> Self {
        ProfileRow { h, ratio: None, tau, source: Source::Measured }
    }

    pub fn corrected(&self) -> bool {
        self.source.is_correction()
    }
}

/// Rows strictly increasing in `h`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileTable {
    pub gains: Option<ScalarLoopGains>,
    rows: Vec<ProfileRow>,
}

impl ProfileTable {
    /// Sorts the rows by `h` and validates them.
    pub fn new(gains: Option<ScalarLoopGains>, mut rows: Vec<ProfileRow>) -> Result<Self> {
        for r in &rows {
            if !(r.h.is_finite() && r.h > 0.0) {
                return Err(Error::Validation(format!("sampling period must be positive, got {}", r.h)));
            }
            if !r.tau.is_finite() {
                return Err(Error::Validation(format!("delay at h={} is not finite", r.h)));
            }
        }
        rows.sort_by(|x, y| x.h.total_cmp(&y.h));
        if let Some(w) = rows.windows(2).find(|w| w[0].h == w[1].h) {
            return Err(Error::Validation(format!("duplicate sampling period h={}", w[0].h)));
        }
        Ok(ProfileTable { gains, rows })
    }

    /// Like [`ProfileTable::new`] but rejects unsorted input instead of sorting it.
    pub fn from_sorted(gains: Option<ScalarLoopGains>, rows: Vec<ProfileRow>) -> Result<Self> {
        if let Some(w) = rows.windows(2).find(|w| w[0].h >= w[1].h) {
            return Err(Error::Validation(format!(
                "rows must be strictly increasing in h ({} then {})",
                w[0].h, w[1].h
            )));
        }
        ProfileTable::new(gains, rows)
    }

    pub fn rows(&self) -> &[ProfileRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.h, r.tau)).collect()
    }

    /// Index of the row with sampling period `h` (relative match at 1e-9).
    pub fn find(&self, h: f64) -> Option<usize> {
        self.rows.iter().position(|r| (r.h - h).abs() <= 1e-9 * h.abs())
    }

    /// Delays rounded to `decimals` places, the way printed tables carry
    /// them into later stages.
    pub fn tabulated(&self, decimals: u32) -> ProfileTable {
        let rows = self
            .rows
            .iter()
            .map(|r| ProfileRow { tau: round_to(r.tau, decimals), ..*r })
            .collect();
        ProfileTable { gains: self.gains, rows }
    }
}

pub fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale).round() / scale
}

/// One row per `(h, ratio)` sample, with the delay recovered from the ratio.
pub fn build_profile(gains: &ScalarLoopGains, samples: &[(f64, f64)]) -> Result<ProfileTable> {
    let rows = samples
        .iter()
        .map(|&(h, ratio)| {
            let pt = OperatingPoint::new(*gains, h, ratio)?;
            let est = delay_from_ratio(&pt).map_err(|e| match e {
                Error::OutOfDomain { .. } => Error::Domain(format!("row h={h}: {e}")),
                other => other,
            })?;
            Ok(ProfileRow { h, ratio: Some(ratio), tau: est.tau, source: Source::Computed })
        })
        .collect::<Result<Vec<_>>>()?;
    ProfileTable::new(Some(*gains), rows)
}

fn chord(left: (f64, f64), right: (f64, f64), h: f64) -> f64 {
    let w = (h - left.0) / (right.0 - left.0);
    left.1 + w * (right.1 - left.1)
}

/// Signed excess of each interior row over the chord through its two
/// neighbours; positive values are local concavities.
pub fn chord_residuals(table: &ProfileTable) -> Vec<(usize, f64)> {
    let r = table.rows();
    (1..r.len().saturating_sub(1))
        .map(|i| {
            let line = chord((r[i - 1].h, r[i - 1].tau), (r[i + 1].h, r[i + 1].tau), r[i].h);
            (i, r[i].tau - line)
        })
        .collect()
}

/// Flags interior rows that sit above the chord of their neighbours by more
/// than `rel_tolerance` times the delay span of the table.
///
/// Delay-versus-period profiles are expected to be convex around a single
/// minimum, so a point bulging above its neighbours is the irregular one.
/// Indices come back ordered by decreasing excess, then by position.
pub fn detect_irregular(table: &ProfileTable, rel_tolerance: f64) -> Result<Vec<usize>> {
    if table.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "irregular-point detection needs at least 3 rows, got {}",
            table.len()
        )));
    }
    if !(rel_tolerance.is_finite() && rel_tolerance >= 0.0) {
        return Err(Error::Invalid(format!("tolerance must be nonnegative, got {rel_tolerance}")));
    }
    let (lo, hi) = table
        .rows()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.tau), hi.max(r.tau)));
    let limit = rel_tolerance * (hi - lo);
    let mut flagged: Vec<(usize, f64)> =
        chord_residuals(table).into_iter().filter(|&(_, excess)| excess > limit).collect();
    flagged.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    Ok(flagged.into_iter().map(|(i, _)| i).collect())
}

/// What happened to one corrected row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectionNote {
    pub h: f64,
    pub original: f64,
    /// Neighbour interpolation, when the row has unflagged neighbours on
    /// both sides. Reported even when an override wins.
    pub interpolated: Option<f64>,
    pub applied: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub table: ProfileTable,
    pub notes: Vec<CorrectionNote>,
}

/// Replaces each flagged row by linear interpolation between its nearest
/// unflagged neighbours, or by the override given for its `h`.
///
/// Override keys may also name rows that were not flagged; such rows are
/// corrected too. A flagged row without neighbours on both sides needs an
/// override. Rows that are neither flagged nor overridden are untouched.
pub fn correct_piecewise(
    table: &ProfileTable,
    indices: &[usize],
    overrides: &[(f64, f64)],
) -> Result<Correction> {
    let rows = table.rows();
    let mut chosen = vec![None::<f64>; rows.len()];
    let mut marked = vec![false; rows.len()];
    for &i in indices {
        if i >= rows.len() {
            return Err(Error::Invalid(format!("row index {i} out of range")));
        }
        marked[i] = true;
    }
    for &(h, tau) in overrides {
        let i = table
            .find(h)
            .ok_or_else(|| Error::Invalid(format!("override for h={h} matches no row")))?;
        if !tau.is_finite() {
            return Err(Error::Invalid(format!("override for h={h} is not finite")));
        }
        marked[i] = true;
        chosen[i] = Some(tau);
    }

    let mut out = rows.to_vec();
    let mut notes = Vec::new();
    for i in (0..rows.len()).filter(|&i| marked[i]) {
        let left = (0..i).rev().find(|&j| !marked[j]);
        let right = (i + 1..rows.len()).find(|&j| !marked[j]);
        let interpolated = match (left, right) {
            (Some(l), Some(r)) => Some(chord((rows[l].h, rows[l].tau), (rows[r].h, rows[r].tau), rows[i].h)),
            _ => None,
        };
        let (applied, source) = match (chosen[i], interpolated) {
            (Some(tau), _) => (tau, Source::ManualOverride),
            (None, Some(tau)) => (tau, Source::Interpolated),
            (None, None) => {
                return Err(Error::UnsupportedCorrection(format!(
                    "row h={} has no unflagged neighbour on one side",
                    rows[i].h
                )))
            }
        };
        out[i].tau = applied;
        out[i].source = source;
        notes.push(CorrectionNote { h: rows[i].h, original: rows[i].tau, interpolated, applied, source });
    }
    Ok(Correction { table: ProfileTable { gains: table.gains, rows: out }, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measured(points: &[(f64, f64)]) -> ProfileTable {
        ProfileTable::new(None, points.iter().map(|&(h, t)| ProfileRow::measured(h, t)).collect()).unwrap()
    }

    const TABLE_I: [(f64, f64); 5] = [(0.001, 0.118), (0.002, 0.034), (0.003, 0.078), (0.004, 0.050), (0.005, 0.107)];
    const TABLE_IV: [(f64, f64); 5] = [(0.001, 0.109), (0.002, 0.059), (0.003, 0.019), (0.004, 0.085), (0.005, 0.108)];

    #[test]
    fn rows_are_sorted_and_unique() {
        let t = measured(&[(0.002, 1.0), (0.001, 2.0)]);
        assert_eq!(t.rows()[0].h, 0.001);
        let dup = ProfileTable::new(None, vec![ProfileRow::measured(0.001, 1.0), ProfileRow::measured(0.001, 2.0)]);
        assert!(matches!(dup, Err(Error::Validation(_))));
        assert!(ProfileTable::from_sorted(None, vec![ProfileRow::measured(0.002, 1.0), ProfileRow::measured(0.001, 2.0)]).is_err());
    }

    #[test]
    fn empty_samples_give_empty_table() {
        let g = ScalarLoopGains::new(-6.0, 6.0, 32).unwrap();
        assert!(build_profile(&g, &[]).unwrap().is_empty());
    }

    #[test]
    fn out_of_domain_names_row() {
        let g = ScalarLoopGains::new(-6.0, 6.0, 32).unwrap();
        let err = build_profile(&g, &[(0.001, 26.0), (0.002, 1000.0)]).unwrap_err();
        assert!(err.to_string().contains("h=0.002"), "{err}");
    }

    #[test]
    fn chord_residuals_from_tables() {
        let r = chord_residuals(&measured(&TABLE_IV));
        assert!((r[2].1 - (0.085 - 0.0635)).abs() < 1e-12);
        let r = chord_residuals(&measured(&TABLE_I));
        assert!((r[1].1 - (0.078 - 0.042)).abs() < 1e-12);
    }

    #[test]
    fn detects_case_outliers() {
        assert_eq!(detect_irregular(&measured(&TABLE_I), DEFAULT_IRREGULAR_TOLERANCE).unwrap(), vec![2]);
        assert_eq!(detect_irregular(&measured(&TABLE_IV), DEFAULT_IRREGULAR_TOLERANCE).unwrap(), vec![3]);
    }

    #[test]
    fn parabola_flags_nothing() {
        let pts: Vec<_> = (1..=7).map(|i| {
            let h = i as f64 * 1e-3;
            (h, 0.2 - 120.0 * h + 20000.0 * h * h)
        }).collect();
        assert!(detect_irregular(&measured(&pts), DEFAULT_IRREGULAR_TOLERANCE).unwrap().is_empty());
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            detect_irregular(&measured(&TABLE_I[..2]), 0.05),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ordering_by_excess() {
        let t = measured(&[(1.0, 0.0), (2.0, 1.0), (3.0, 0.0), (4.0, 3.0), (5.0, 0.0)]);
        assert_eq!(detect_irregular(&t, 0.0).unwrap(), vec![3, 1]);
    }

    #[test]
    fn interpolation_correction() {
        let t = measured(&TABLE_IV);
        let c = correct_piecewise(&t, &[3], &[]).unwrap();
        assert!((c.table.rows()[3].tau - 0.0635).abs() < 1e-15);
        assert_eq!(c.table.rows()[3].source, Source::Interpolated);
        assert!(c.table.rows()[3].corrected());
        for i in [0, 1, 2, 4] {
            assert_eq!(c.table.rows()[i].tau.to_bits(), t.rows()[i].tau.to_bits());
            assert!(!c.table.rows()[i].corrected());
        }
        // idempotent: nothing left to flag
        assert!(detect_irregular(&c.table, DEFAULT_IRREGULAR_TOLERANCE).unwrap().is_empty());
    }

    #[test]
    fn override_wins_and_reports_interpolation() {
        let c = correct_piecewise(&measured(&TABLE_I), &[2], &[(0.003, 0.026)]).unwrap();
        assert_eq!(c.table.rows()[2].tau, 0.026);
        assert_eq!(c.table.rows()[2].source, Source::ManualOverride);
        let note = c.notes[0];
        assert!((note.interpolated.unwrap() - 0.042).abs() < 1e-12);
        assert_eq!(note.original, 0.078);
    }

    #[test]
    fn endpoint_needs_override() {
        let t = measured(&TABLE_I);
        assert!(matches!(correct_piecewise(&t, &[4], &[]), Err(Error::UnsupportedCorrection(_))));
        let c = correct_piecewise(&t, &[], &[(0.005, 0.108)]).unwrap();
        assert_eq!(c.table.rows()[4].tau, 0.108);
        assert_eq!(c.notes[0].interpolated, None);
    }

    #[test]
    fn adjacent_flags_use_outer_neighbours() {
        let t = measured(&[(1.0, 1.0), (2.0, 9.0), (3.0, 9.0), (4.0, 4.0)]);
        let c = correct_piecewise(&t, &[1, 2], &[]).unwrap();
        assert!((c.table.rows()[1].tau - 2.0).abs() < 1e-12);
        assert!((c.table.rows()[2].tau - 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_flags_is_identity() {
        let t = measured(&TABLE_I);
        let c = correct_piecewise(&t, &[], &[]).unwrap();
        assert_eq!(c.table, t);
        assert!(c.notes.is_empty());
    }

    #[test]
    fn unknown_override_key() {
        assert!(correct_piecewise(&measured(&TABLE_I), &[], &[(0.0035, 0.1)]).is_err());
    }

    #[test]
    fn tabulation_rounds_delays() {
        let t = measured(&[(0.001, 0.1179322), (0.002, 0.0336119)]).tabulated(3);
        assert_eq!(t.points(), vec![(0.001, 0.118), (0.002, 0.034)]);
    }
}
