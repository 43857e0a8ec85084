//! Matrix exponential by scaling and squaring around a Taylor core.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest 1-norm of the scaled matrix fed to the Taylor series.
const SCALED_NORM_MAX: f64 = 0.5;
const MAX_TERMS: usize = 40;

/// Returns `e^{M t}`.
///
/// The matrix `M t` is divided by `2^s` until its 1-norm is at most 0.5,
/// exponentiated by a truncated Taylor series and squared back `s` times.
pub fn expm(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !t.is_finite() || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("expm input must be finite".into()));
    }
    let n = m.nrows();
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }

    let scaled = m * t;
    let norm = one_norm(&scaled);
    let squarings = if norm > SCALED_NORM_MAX {
        (norm / SCALED_NORM_MAX).log2().ceil() as i32
    } else {
        0
    };
    let x = scaled / 2f64.powi(squarings);

    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..=MAX_TERMS {
        term = &term * &x / j as f64;
        result += &term;
        if one_norm(&term) <= f64::EPSILON * one_norm(&result) * 1e-2 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("expm overflowed".into()));
    }
    Ok(result)
}

/// Maximum absolute column sum.
pub(crate) fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Returns `(e^{A t}, ∫₀ᵗ e^{A s} ds · B)` from one exponential of the
/// augmented matrix `[[A, B], [0, 0]]`. `A` is never inverted.
pub fn zoh_pair(a: &DMatrix<f64>, b: &DVector<f64>, t: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = a.nrows();
    if !a.is_square() || b.len() != n {
        return Err(Error::Dimension(format!(
            "A is {}x{}, B has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if t == 0.0 {
        return Ok((DMatrix::identity(n, n), DVector::zeros(n)));
    }
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, 1)).copy_from(b);
    let e = expm(&aug, t)?;
    let phi = e.view((0, 0), (n, n)).into_owned();
    let gamma = DVector::from_iterator(n, e.view((0, n), (n, 1)).iter().copied());
    Ok((phi, gamma))
}
