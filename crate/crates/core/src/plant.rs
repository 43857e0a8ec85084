//! Loop and plant models.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar loop gains: feedback factor `a` (1/s, negative), input gain `b`
/// (1/s, nonzero) and loop execution count `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGains")]
pub struct ScalarLoopGains {
    a: f64,
    b: f64,
    k: u32,
}

#[derive(Deserialize)]
struct RawGains {
    a: f64,
    b: f64,
    k: u32,
}

impl TryFrom<RawGains> for ScalarLoopGains {
    type Error = Error;

    fn try_from(raw: RawGains) -> Result<Self> {
        ScalarLoopGains::new(raw.a, raw.b, raw.k)
    }
}

impl ScalarLoopGains {
    pub fn new(a: f64, b: f64, k: u32) -> Result<Self> {
        if !(a.is_finite() && a < 0.0) {
            return Err(Error::Invalid(format!(
                "feedback factor A must be finite and negative, got {a}"
            )));
        }
        if !(b.is_finite() && b != 0.0) {
            return Err(Error::Invalid(format!(
                "input gain B must be finite and nonzero, got {b}"
            )));
        }
        Ok(ScalarLoopGains { a, b, k })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k(&self) -> u32 {
        self.k
    }
}

/// Single-input single-output LTI plant `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpacePlant {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
    d: f64,
}

impl StateSpacePlant {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() || b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}, C {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        let finite = a.iter().chain(b.iter()).chain(c.iter()).all(|v| v.is_finite());
        if !finite || !d.is_finite() {
            return Err(Error::Invalid("plant entries must be finite".into()));
        }
        Ok(StateSpacePlant { a, b, c, d })
    }

    /// The third-order benchmark plant with characteristic polynomial
    /// s³ + 6s² + 11s + 6 (poles −1, −2, −3), unit DC gain and output x₁.
    pub fn benchmark() -> Self {
        StateSpacePlant {
            a: DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -6.0, -11.0, -6.0]),
            b: DVector::from_vec(vec![0.0, 0.0, 6.0]),
            c: RowDVector::from_vec(vec![1.0, 0.0, 0.0]),
            d: 0.0,
        }
    }

    /// A first-order plant with the same dynamics as the scalar loop.
    pub fn first_order(a: f64, b: f64) -> Result<Self> {
        StateSpacePlant::new(
            DMatrix::from_element(1, 1, a),
            DVector::from_element(1, b),
            RowDVector::from_element(1, 1.0),
            0.0,
        )
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}
