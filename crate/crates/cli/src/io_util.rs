//! File loading, validation, and the exit-code contract.

use std::fmt;
use std::path::Path;

use slspec_core::boundary::BoundaryParams;
use slspec_core::gl::GlError;
use slspec_core::grid::PotentialGrid;
use slspec_core::schema::{BoundaryFile, PotentialGridFile, SchemaError};

/// Errors split by exit code: schema/parameter problems exit 2,
/// computation failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Computation(_) => 3,
        }
    }

    pub fn schema(location: &str, err: impl fmt::Display) -> Self {
        CliError::Schema(format!("{location}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "schema violation: {m}"),
            CliError::Computation(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::Schema(e.to_string())
    }
}

impl From<GlError> for CliError {
    fn from(e: GlError) -> Self {
        CliError::Computation(e.to_string())
    }
}

pub const GRID_RANGE: std::ops::RangeInclusive<usize> = 9..=(1 << 20);
pub const TOL_RANGE: std::ops::RangeInclusive<f64> = 1e-14..=1e-2;

pub fn check_grid(points: usize) -> Result<(), CliError> {
    if GRID_RANGE.contains(&points) {
        Ok(())
    } else {
        Err(CliError::Schema(format!(
            "--grid {points} outside the sane range {}..{}",
            GRID_RANGE.start(),
            GRID_RANGE.end()
        )))
    }
}

pub fn check_tol(tol: Option<f64>) -> Result<(), CliError> {
    match tol {
        Some(t) if !TOL_RANGE.contains(&t) => Err(CliError::Schema(format!(
            "--tol {t} outside the sane range 1e-14..1e-2"
        ))),
        _ => Ok(()),
    }
}

pub fn load_potential(path: &str) -> Result<PotentialGrid, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::schema(path, e))?;
    let file: PotentialGridFile =
        serde_json::from_str(&text).map_err(|e| CliError::schema(path, e))?;
    file.to_grid().map_err(CliError::from)
}

/// The --boundary flag carries inline JSON, not a path.
pub fn parse_boundary(json: &str) -> Result<BoundaryParams, CliError> {
    let file: BoundaryFile =
        serde_json::from_str(json).map_err(|e| CliError::schema("--boundary", e))?;
    file.to_params().map_err(CliError::from)
}

pub fn write_text(path: &str, text: &str) -> Result<(), CliError> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::schema(path, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::schema(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::schema(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

/// Sibling path with an extra suffix before consuming tools see it
/// (report and trace files land next to the primary output).
pub fn sibling(path: &str, suffix: &str) -> String {
    format!("{path}{suffix}")
}
