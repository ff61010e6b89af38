//! Spectral toolkit for the Sturm-Liouville equation u'' - q(x)u + mu^2 u = 0
//! on (0, pi) with complex potential and irregular boundary conditions.
//!
//! The crate covers:
//! - the fundamental system c(x,mu), s(x,mu) and the characteristic
//!   determinant Delta(mu) = c(pi,mu) - s'(pi,mu) + (-1)^(theta+1) b s(pi,mu);
//! - evaluable models of the relevant entire functions (sine quotient,
//!   node products, spectrum products, two closed-form example families);
//! - zero location with multiplicities via Newton refinement cross-checked
//!   by argument-principle contour counts, plus tail-regularity diagnostics;
//! - inverse reconstruction of the potential from prescribed spectral data
//!   through the Gelfand-Levitan integral equation, with round-trip
//!   verification against the forward solver.

pub mod boundary;
pub mod fundamental;
pub mod gl;
pub mod grid;
pub mod models;
pub mod schema;
pub mod spectral;

pub use boundary::{BoundaryError, BoundaryParams};
pub use fundamental::{
    solve_fundamental, solve_fundamental_path, solve_fundamental_path_with,
    solve_fundamental_with, wronskian_defect, FundamentalEndpoint, FundamentalPath, SolveError,
    SolverOptions,
};
pub use grid::{GridError, PotentialGrid};
pub use models::{EntireFunctionModel, ModelError};
pub use spectral::{
    count_zeros, determinant, determinant_derivative, find_eigenvalues, tail_regularity,
    SpectralError, SpectrumList,
};
