//! Boundary-condition parameters (b, theta).

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("theta must be 0 or 1, got {0}")]
    ThetaOutOfRange(i64),
    #[error("boundary parameter b is not finite")]
    NonFiniteB,
}

/// The pair (b, theta) entering the boundary conditions
/// u'(0) + (-1)^theta u'(pi) + b u(pi) = 0, u(0) + (-1)^(theta+1) u(pi) = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    pub b: Complex64,
    pub theta: u8,
}

impl BoundaryParams {
    pub fn new(b: Complex64, theta: i64) -> Result<Self, BoundaryError> {
        if theta != 0 && theta != 1 {
            return Err(BoundaryError::ThetaOutOfRange(theta));
        }
        if !b.re.is_finite() || !b.im.is_finite() {
            return Err(BoundaryError::NonFiniteB);
        }
        Ok(Self { b, theta: theta as u8 })
    }

    /// The sign factor (-1)^(theta+1) multiplying b in the determinant.
    pub fn sign(&self) -> f64 {
        if self.theta == 0 {
            -1.0
        } else {
            1.0
        }
    }
}
