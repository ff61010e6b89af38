//! Serialization schemas: potentials, boundary parameters, spectra, model
//! descriptors, inverse-problem data and reconstruction reports. Complex
//! values are stored as parallel `_re`/`_im` arrays.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::BoundaryParams;
use crate::fundamental::SolverOptions;
use crate::gl::{GLData, GlError, NodeSequence, ReconstructionReport};
use crate::grid::PotentialGrid;
use crate::models::EntireFunctionModel;
use crate::spectral::{SpectrumEntry, SpectrumList, TailReport, TailVerdict};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at {location}: {reason}")]
    Invalid { location: String, reason: String },
    #[error("{0}")]
    Gl(#[from] GlError),
}

fn invalid(location: &str, reason: impl Into<String>) -> SchemaError {
    SchemaError::Invalid {
        location: location.into(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// potential
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PotentialGridFile {
    pub point_count: usize,
    pub samples_re: Vec<f64>,
    pub samples_im: Vec<f64>,
}

impl PotentialGridFile {
    pub fn from_grid(grid: &PotentialGrid) -> Self {
        Self {
            point_count: grid.point_count(),
            samples_re: grid.samples().iter().map(|s| s.re).collect(),
            samples_im: grid.samples().iter().map(|s| s.im).collect(),
        }
    }

    pub fn to_grid(&self) -> Result<PotentialGrid, SchemaError> {
        if self.samples_re.len() != self.point_count {
            return Err(invalid(
                "samples_re",
                format!(
                    "length {} does not match point_count {}",
                    self.samples_re.len(),
                    self.point_count
                ),
            ));
        }
        if self.samples_im.len() != self.point_count {
            return Err(invalid(
                "samples_im",
                format!(
                    "length {} does not match point_count {}",
                    self.samples_im.len(),
                    self.point_count
                ),
            ));
        }
        let samples = self
            .samples_re
            .iter()
            .zip(&self.samples_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        PotentialGrid::new(samples).map_err(|e| invalid("samples", e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// boundary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundaryFile {
    pub b_re: f64,
    pub b_im: f64,
    pub theta: i64,
}

impl BoundaryFile {
    pub fn from_params(bc: &BoundaryParams) -> Self {
        Self {
            b_re: bc.b.re,
            b_im: bc.b.im,
            theta: bc.theta as i64,
        }
    }

    pub fn to_params(&self) -> Result<BoundaryParams, SchemaError> {
        BoundaryParams::new(Complex64::new(self.b_re, self.b_im), self.theta)
            .map_err(|e| invalid("boundary", e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectrumEntryFile {
    pub n: usize,
    pub mu_re: f64,
    pub mu_im: f64,
    pub mult: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectrumListFile {
    pub entries: Vec<SpectrumEntryFile>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl SpectrumListFile {
    pub fn from_list(list: &SpectrumList, meta: serde_json::Value) -> Self {
        Self {
            entries: list
                .entries
                .iter()
                .map(|e| SpectrumEntryFile {
                    n: e.index,
                    mu_re: e.mu.re,
                    mu_im: e.mu.im,
                    mult: e.multiplicity,
                })
                .collect(),
            meta,
        }
    }

    pub fn to_list(&self) -> Result<SpectrumList, SchemaError> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for (k, e) in self.entries.iter().enumerate() {
            if e.mult < 1 {
                return Err(invalid(
                    &format!("entries[{k}].mult"),
                    "multiplicity must be >= 1",
                ));
            }
            entries.push(SpectrumEntry {
                index: e.n,
                mu: Complex64::new(e.mu_re, e.mu_im),
                multiplicity: e.mult,
            });
        }
        let contour_total = entries.iter().map(|e| e.multiplicity).sum();
        Ok(SpectrumList {
            entries,
            warnings: Vec::new(),
            contour_total,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TailReportFile {
    pub r_re: Vec<f64>,
    pub r_im: Vec<f64>,
    pub partial_l2_sums: Vec<f64>,
    pub last_quarter_fraction: f64,
    pub verdict: String,
}

impl TailReportFile {
    pub fn from_report(r: &TailReport) -> Self {
        Self {
            r_re: r.residuals.iter().map(|z| z.re).collect(),
            r_im: r.residuals.iter().map(|z| z.im).collect(),
            partial_l2_sums: r.partial_sums.clone(),
            last_quarter_fraction: r.last_quarter_fraction,
            verdict: match r.verdict {
                TailVerdict::ConvergentLike => "CONVERGENT_LIKE".into(),
                TailVerdict::Inconclusive => "INCONCLUSIVE".into(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelDescriptor {
    OdeDeterminant {
        potential: PotentialGridFile,
        boundary: BoundaryFile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    SineQuotient,
    NodeProduct {
        head_re: Vec<f64>,
        head_im: Vec<f64>,
    },
    SpectrumProduct {
        b_re: f64,
        b_im: f64,
        theta: i64,
        head_re: Vec<f64>,
        head_im: Vec<f64>,
    },
    Example1 {
        k: u32,
        alpha: f64,
    },
    Example2 {
        p0: u32,
        p_max: u32,
    },
}

fn zip_head(re: &[f64], im: &[f64], location: &str) -> Result<Vec<Complex64>, SchemaError> {
    if re.len() != im.len() {
        return Err(invalid(location, "head_re and head_im lengths differ"));
    }
    Ok(re
        .iter()
        .zip(im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect())
}

impl ModelDescriptor {
    pub fn from_model(model: &EntireFunctionModel) -> Self {
        match model {
            EntireFunctionModel::OdeDeterminant { q, bc, solver } => Self::OdeDeterminant {
                potential: PotentialGridFile::from_grid(q),
                boundary: BoundaryFile::from_params(bc),
                tol: Some(solver.tol),
            },
            EntireFunctionModel::SineQuotient => Self::SineQuotient,
            EntireFunctionModel::NodeProduct { head } => Self::NodeProduct {
                head_re: head.iter().map(|z| z.re).collect(),
                head_im: head.iter().map(|z| z.im).collect(),
            },
            EntireFunctionModel::SpectrumProduct { b, theta, head } => Self::SpectrumProduct {
                b_re: b.re,
                b_im: b.im,
                theta: *theta as i64,
                head_re: head.iter().map(|z| z.re).collect(),
                head_im: head.iter().map(|z| z.im).collect(),
            },
            EntireFunctionModel::Example1 { k, alpha } => Self::Example1 {
                k: *k,
                alpha: *alpha,
            },
            EntireFunctionModel::Example2 { p0, p_max } => Self::Example2 {
                p0: *p0,
                p_max: *p_max,
            },
        }
    }

    pub fn to_model(&self) -> Result<EntireFunctionModel, SchemaError> {
        Ok(match self {
            Self::OdeDeterminant {
                potential,
                boundary,
                tol,
            } => EntireFunctionModel::OdeDeterminant {
                q: potential.to_grid()?,
                bc: boundary.to_params()?,
                solver: tol
                    .map(SolverOptions::with_tol)
                    .unwrap_or_default(),
            },
            Self::SineQuotient => EntireFunctionModel::SineQuotient,
            Self::NodeProduct { head_re, head_im } => EntireFunctionModel::NodeProduct {
                head: zip_head(head_re, head_im, "node_product.head")?,
            },
            Self::SpectrumProduct {
                b_re,
                b_im,
                theta,
                head_re,
                head_im,
            } => {
                if *theta != 0 && *theta != 1 {
                    return Err(invalid("spectrum_product.theta", "theta must be 0 or 1"));
                }
                EntireFunctionModel::SpectrumProduct {
                    b: Complex64::new(*b_re, *b_im),
                    theta: *theta as u8,
                    head: zip_head(head_re, head_im, "spectrum_product.head")?,
                }
            }
            Self::Example1 { k, alpha } => EntireFunctionModel::example1(*k, *alpha)
                .map_err(|e| invalid("example1", e.to_string()))?,
            Self::Example2 { p0, p_max } => EntireFunctionModel::example2(*p0, *p_max)
                .map_err(|e| invalid("example2", e.to_string()))?,
        })
    }
}

// ---------------------------------------------------------------------------
// inverse-problem data
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GlDataFile {
    #[serde(rename = "N")]
    pub n: usize,
    /// The perturbed head nodes; the tail is implied (mu_n = n).
    pub nodes: Vec<f64>,
    pub c_re: Vec<f64>,
    pub c_im: Vec<f64>,
    pub target: ModelDescriptor,
}

impl GlDataFile {
    pub fn from_data(data: &GLData) -> Self {
        Self {
            n: data.n_cond(),
            nodes: data.nodes().head().to_vec(),
            c_re: data.constants().iter().map(|z| z.re).collect(),
            c_im: data.constants().iter().map(|z| z.im).collect(),
            target: ModelDescriptor::from_model(data.target()),
        }
    }

    /// Rebuild the data set; weights are regenerated from the target and
    /// node product derivative (the file stores only the primary data).
    pub fn to_data(&self) -> Result<GLData, SchemaError> {
        self.to_data_with_terms(self.c_re.len())
    }

    /// Same, generating at least `terms` constants by the parity rule; the
    /// stored constants are validated as a prefix.
    pub fn to_data_with_terms(&self, terms: usize) -> Result<GLData, SchemaError> {
        if self.nodes.len() != self.n {
            return Err(invalid(
                "nodes",
                format!("expected {} head nodes, got {}", self.n, self.nodes.len()),
            ));
        }
        if self.c_re.len() != self.c_im.len() {
            return Err(invalid("c_im", "c_re and c_im lengths differ"));
        }
        let target = self.target.to_model()?;
        let nodes = NodeSequence::from_head(self.nodes.clone())?;
        let count = terms.max(self.c_re.len()).max(self.n);
        let data = GLData::from_nodes(target, nodes, count)?;
        for (i, (&re, &im)) in self.c_re.iter().zip(&self.c_im).enumerate() {
            let stored = Complex64::new(re, im);
            let derived = data.constants()[i];
            if (stored - derived).norm() > 1e-9 {
                return Err(invalid(
                    &format!("c[{i}]"),
                    format!("stored constant {stored} disagrees with the parity rule ({derived})"),
                ));
            }
        }
        Ok(data)
    }
}

// ---------------------------------------------------------------------------
// reconstruction report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeResidualFile {
    pub n: usize,
    pub mu: f64,
    pub s_abs: f64,
    pub c_err: f64,
    pub s_prime_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReconstructionReportFile {
    pub node_residuals: Vec<NodeResidualFile>,
    pub det_mismatch_max: f64,
    pub node_threshold: f64,
    pub det_threshold: f64,
    pub pass: bool,
}

impl ReconstructionReportFile {
    pub fn from_report(r: &ReconstructionReport) -> Self {
        Self {
            node_residuals: r
                .node_residuals
                .iter()
                .map(|x| NodeResidualFile {
                    n: x.n,
                    mu: x.mu,
                    s_abs: x.s_abs,
                    c_err: x.c_err,
                    s_prime_err: x.s_prime_err,
                })
                .collect(),
            det_mismatch_max: r.det_mismatch_max,
            node_threshold: r.node_threshold,
            det_threshold: r.det_threshold,
            pass: r.pass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn potential_round_trip() {
        let grid =
            PotentialGrid::from_fn(17, |x| Complex64::new(x.sin(), 0.3 * x.cos())).unwrap();
        let file = PotentialGridFile::from_grid(&grid);
        let json = serde_json::to_string(&file).unwrap();
        let back: PotentialGridFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file, back);
        assert_eq!(back.to_grid().unwrap(), grid);
    }

    #[test]
    fn potential_rejects_length_mismatch() {
        let file = PotentialGridFile {
            point_count: 9,
            samples_re: vec![0.0; 9],
            samples_im: vec![0.0; 8],
        };
        assert!(matches!(
            file.to_grid().unwrap_err(),
            SchemaError::Invalid { .. }
        ));
    }

    #[test]
    fn boundary_round_trip_and_validation() {
        let bc = BoundaryParams::new(Complex64::new(2.0, -0.5), 1).unwrap();
        let file = BoundaryFile::from_params(&bc);
        let json = serde_json::to_string(&file).unwrap();
        let back: BoundaryFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_params().unwrap(), bc);

        let bad = BoundaryFile {
            b_re: 0.0,
            b_im: 0.0,
            theta: 5,
        };
        assert!(bad.to_params().is_err());
    }

    #[test]
    fn model_descriptor_uses_variant_tag() {
        let m = EntireFunctionModel::example1(2, 0.7).unwrap();
        let d = ModelDescriptor::from_model(&m);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"variant\":\"example1\""), "{json}");
        let back: ModelDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(d, back);
        assert!(back.to_model().is_ok());
    }

    #[test]
    fn model_descriptor_rejects_bad_parameters() {
        let bad: ModelDescriptor =
            serde_json::from_str(r#"{"variant":"example1","k":0,"alpha":0.5}"#).unwrap();
        assert!(bad.to_model().is_err());
        let bad: ModelDescriptor =
            serde_json::from_str(r#"{"variant":"example2","p0":3,"p_max":12}"#).unwrap();
        assert!(bad.to_model().is_err());
    }

    #[test]
    fn gl_data_file_extends_stored_constants_as_a_prefix() {
        let file = GlDataFile {
            n: 1,
            nodes: vec![1.5],
            c_re: vec![-1.0, 1.0, -1.0, 1.0],
            c_im: vec![0.0; 4],
            target: ModelDescriptor::SpectrumProduct {
                b_re: 0.0,
                b_im: 0.0,
                theta: 0,
                head_re: vec![],
                head_im: vec![],
            },
        };
        let data = file.to_data_with_terms(64).unwrap();
        assert_eq!(data.constants().len(), 64);
        // the generated tail keeps following the parity rule
        assert!((data.constants()[63] - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        // a stored constant violating the parity rule is rejected
        let mut bad = file;
        bad.c_re[1] = -1.0;
        assert!(matches!(
            bad.to_data().unwrap_err(),
            SchemaError::Invalid { .. }
        ));
    }

    #[test]
    fn spectrum_round_trip() {
        let list = SpectrumList::from_roots(vec![
            (Complex64::new(1.5, 0.0), 2),
            (Complex64::new(3.0, 0.1), 1),
        ]);
        let file = SpectrumListFile::from_list(&list, serde_json::json!({"note": "x"}));
        let json = serde_json::to_string(&file).unwrap();
        let back: SpectrumListFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file, back);
        let relisted = back.to_list().unwrap();
        assert_eq!(relisted.entries.len(), 2);
        assert_eq!(relisted.entries[0].multiplicity, 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn potential_file_round_trips_any_samples(
            values in proptest::collection::vec(-10.0f64..10.0, 18..40)
        ) {
            let n = values.len() / 2;
            let samples: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(values[2 * i], values[2 * i + 1]))
                .collect();
            let grid = PotentialGrid::new(samples).unwrap();
            let file = PotentialGridFile::from_grid(&grid);
            let json = serde_json::to_string(&file).unwrap();
            let back: PotentialGridFile = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back.to_grid().unwrap(), grid);
        }
    }
}
