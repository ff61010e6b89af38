//! Complex-valued potentials sampled on a uniform grid over `[0, pi]`.

use num_complex::Complex64;
use thiserror::Error;

/// Errors raised when constructing or reading a [`PotentialGrid`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("potential grid needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("potential sample {index} is not finite")]
    NonFiniteSample { index: usize },
}

/// A complex potential q(x) sampled at the uniform nodes x_i = i*pi/(n-1).
///
/// The grid always spans exactly `[0, pi]`. Values between samples are
/// produced by cubic Lagrange interpolation on the four nearest nodes
/// (the interpolation order is fixed at 3).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    samples: Vec<Complex64>,
}

impl PotentialGrid {
    /// Minimum number of sample points accepted.
    pub const MIN_POINTS: usize = 9;
    /// Interpolation order between samples (cubic).
    pub const INTERPOLATION_ORDER: usize = 3;
    /// Default sample count used by the solvers.
    pub const DEFAULT_POINTS: usize = 2049;

    pub fn new(samples: Vec<Complex64>) -> Result<Self, GridError> {
        if samples.len() < Self::MIN_POINTS {
            return Err(GridError::TooFewPoints {
                min: Self::MIN_POINTS,
                got: samples.len(),
            });
        }
        for (index, s) in samples.iter().enumerate() {
            if !s.re.is_finite() || !s.im.is_finite() {
                return Err(GridError::NonFiniteSample { index });
            }
        }
        Ok(Self { samples })
    }

    /// The zero potential on `point_count` nodes.
    pub fn zero(point_count: usize) -> Result<Self, GridError> {
        Self::new(vec![Complex64::new(0.0, 0.0); point_count])
    }

    /// A constant potential q(x) = q0.
    pub fn constant(q0: Complex64, point_count: usize) -> Result<Self, GridError> {
        Self::new(vec![q0; point_count])
    }

    /// Sample a closure q(x) at the grid nodes.
    pub fn from_fn(
        point_count: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, GridError> {
        if point_count < Self::MIN_POINTS {
            return Err(GridError::TooFewPoints {
                min: Self::MIN_POINTS,
                got: point_count,
            });
        }
        let h = std::f64::consts::PI / (point_count - 1) as f64;
        Self::new((0..point_count).map(|i| f(i as f64 * h)).collect())
    }

    pub fn point_count(&self) -> usize {
        self.samples.len()
    }

    /// Grid spacing pi/(n-1).
    pub fn spacing(&self) -> f64 {
        std::f64::consts::PI / (self.samples.len() - 1) as f64
    }

    /// Node abscissa x_i.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Cubic interpolation of q at an arbitrary x in `[0, pi]`.
    ///
    /// Uses the Lagrange cubic through the four nodes nearest to x, with the
    /// stencil clamped at the interval ends. x outside `[0, pi]` is clamped.
    pub fn value_at(&self, x: f64) -> Complex64 {
        let n = self.samples.len();
        let h = self.spacing();
        let u = (x / h).clamp(0.0, (n - 1) as f64);
        let cell = (u.floor() as usize).min(n - 2);
        // Four-point window starting at ws, shifted inward at the ends.
        let ws = cell.saturating_sub(1).min(n - 4);
        let t = u - ws as f64; // local coordinate in [0, 3]
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..4usize {
            let mut w = 1.0;
            for m in 0..4usize {
                if m != j {
                    w *= (t - m as f64) / (j as f64 - m as f64);
                }
            }
            acc += self.samples[ws + j] * w;
        }
        acc
    }

    /// Sup norm over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Discrete L2(0,pi) norm (trapezoid rule over the samples).
    pub fn l2_norm(&self) -> f64 {
        let h = self.spacing();
        let n = self.samples.len();
        let mut acc = 0.0;
        for (i, s) in self.samples.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * s.norm_sqr();
        }
        (acc * h).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_short_grids() {
        let err = PotentialGrid::zero(8).unwrap_err();
        assert_eq!(err, GridError::TooFewPoints { min: 9, got: 8 });
        assert!(PotentialGrid::zero(9).is_ok());
    }

    #[test]
    fn rejects_non_finite_samples() {
        let mut v = vec![Complex64::new(0.0, 0.0); 16];
        v[7] = Complex64::new(f64::NAN, 0.0);
        assert_eq!(
            PotentialGrid::new(v).unwrap_err(),
            GridError::NonFiniteSample { index: 7 }
        );
    }

    #[test]
    fn grid_spans_zero_to_pi() {
        let q = PotentialGrid::zero(17).unwrap();
        assert_eq!(q.x(0), 0.0);
        assert!((q.x(16) - PI).abs() < 1e-15);
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        // interpolation order 3 means exact on polynomials of degree <= 3
        let poly = |x: f64| Complex64::new(1.0 + x - 0.5 * x * x + 0.125 * x * x * x, 2.0 * x);
        let q = PotentialGrid::from_fn(33, poly).unwrap();
        for k in 0..200 {
            let x = PI * k as f64 / 199.0;
            assert!((q.value_at(x) - poly(x)).norm() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn interpolation_matches_samples_at_nodes() {
        let q = PotentialGrid::from_fn(21, |x| Complex64::new(x.sin(), x.cos())).unwrap();
        for i in 0..21 {
            assert!((q.value_at(q.x(i)) - q.samples()[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn smooth_function_interpolation_error_is_fourth_order() {
        let f = |x: f64| Complex64::new((2.0 * x).sin(), (3.0 * x).cos());
        let coarse = PotentialGrid::from_fn(65, f).unwrap();
        let fine = PotentialGrid::from_fn(129, f).unwrap();
        let err = |g: &PotentialGrid| {
            (0..500)
                .map(|k| {
                    let x = PI * k as f64 / 499.0;
                    (g.value_at(x) - f(x)).norm()
                })
                .fold(0.0, f64::max)
        };
        let (e_c, e_f) = (err(&coarse), err(&fine));
        assert!(e_f < e_c / 8.0, "e_c={e_c}, e_f={e_f}");
    }
}
