//! Evaluable models of the entire functions of the problem: the sine
//! quotient sin(pi mu)/mu, node products with prescribed zeros, spectrum
//! products, two closed-form example families, and the structural check
//! that a determinant has the form (-1)^(theta+1) b sin(pi mu)/mu + f(mu)/mu
//! with f odd and square-integrable on the real axis.
//!
//! Infinite products are never truncated raw: they are folded against the
//! closed form sin(pi mu) = pi mu prod (n^2 - mu^2)/n^2, leaving a finite
//! quotient whose integer-pole factors are combined analytically with the
//! sine before dividing.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::boundary::BoundaryParams;
use crate::fundamental::{SolveError, SolverOptions};
use crate::grid::PotentialGrid;
use crate::spectral;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0}")]
    Solve(#[from] SolveError),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

/// sin(z)/z with the removable singularity filled by its Taylor series.
pub fn csinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0)
            + z2 * (Complex64::new(-1.0 / 6.0, 0.0)
                + z2 * (Complex64::new(1.0 / 120.0, 0.0)
                    + z2 * Complex64::new(-1.0 / 5040.0, 0.0)))
    } else {
        z.sin() / z
    }
}

/// sin(pi mu)/mu, with value pi at mu = 0.
pub fn sine_quotient(mu: Complex64) -> Complex64 {
    PI * csinc(PI * mu)
}

/// Raw N-term truncation pi * prod_{n<=N} (n^2 - mu^2)/n^2 of the sine
/// product. Converges like mu^2/N; kept for documenting why the finite
/// quotient regularization is used instead.
pub fn sine_quotient_truncated(mu: Complex64, terms: usize) -> Complex64 {
    let mut acc = Complex64::new(PI, 0.0);
    for n in 1..=terms {
        let nf = n as f64;
        acc *= (nf - mu) * (nf + mu) / (nf * nf);
    }
    acc
}

/// Core finite-quotient evaluator:
/// (sin(pi mu)/mu) * prod_{n=1..N} (head_n^2 - mu^2)/(n^2 - mu^2),
/// with the numerator factor at `skip_numerator` (1-based) omitted.
///
/// When mu lies within 1/2 of an integer pole m <= N, the sine and the
/// (m^2 - mu^2) denominator are combined analytically, so the value stays
/// finite (the pole cancels; a genuine zero survives only if head_m = m).
fn quotient_against_sine(
    head: &[Complex64],
    mu: Complex64,
    skip_numerator: Option<usize>,
) -> Complex64 {
    // Even in mu by construction; fold to Re mu >= 0 so the nearest-pole
    // logic only looks at positive integers.
    let mu = if mu.re < 0.0 { -mu } else { mu };
    let n_head = head.len();

    let nearest = mu.re.round();
    let combine = nearest >= 1.0
        && (nearest as usize) <= n_head
        && (mu - Complex64::new(nearest, 0.0)).norm() <= 0.5;

    let mut acc = if combine {
        let m = nearest as usize;
        let mf = Complex64::new(nearest, 0.0);
        // sin(pi mu) / (mu (m^2 - mu^2)) = (-1)^(m+1) pi csinc(pi(mu-m)) / (mu (mu+m))
        let parity = if m % 2 == 0 { -1.0 } else { 1.0 };
        let mut v = parity * PI * csinc(PI * (mu - mf)) / (mu * (mu + mf));
        if skip_numerator != Some(m) {
            v *= (head[m - 1] - mu) * (head[m - 1] + mu);
        }
        v
    } else {
        sine_quotient(mu)
    };

    for n in 1..=n_head {
        if combine && n == nearest as usize {
            continue; // already folded in
        }
        let nf = Complex64::new(n as f64, 0.0);
        if skip_numerator != Some(n) {
            acc *= (head[n - 1] - mu) * (head[n - 1] + mu);
        }
        acc /= (nf - mu) * (nf + mu);
    }
    acc
}

/// The node product s(mu) = pi prod (mu_n^2 - mu^2)/n^2 for a node sequence
/// whose first `head.len()` entries are `head` and which equals n beyond,
/// evaluated through the finite quotient against sin(pi mu)/mu.
pub fn node_product_s(head: &[Complex64], mu: Complex64) -> Complex64 {
    quotient_against_sine(head, mu, None)
}

/// d s / d mu at the node mu_n (1-based n). For perturbed nodes n <= N the
/// product rule leaves -2 mu_n times the quotient with that numerator factor
/// removed; for tail nodes mu_n = n the sine factor supplies the zero and
/// ds/dmu = pi (-1)^n / n times the remaining finite quotient.
pub fn node_product_sdot(head: &[Complex64], n: usize) -> Result<Complex64, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParameter(
            "node index must be >= 1".into(),
        ));
    }
    let n_head = head.len();
    if n <= n_head {
        let mu_n = head[n - 1];
        Ok(-2.0 * mu_n * quotient_against_sine(head, mu_n, Some(n)))
    } else {
        let nf = n as f64;
        let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut acc = Complex64::new(parity * PI / nf, 0.0);
        let mu2 = Complex64::new(nf * nf, 0.0);
        for (j, h) in head.iter().enumerate() {
            let jf = ((j + 1) * (j + 1)) as f64;
            acc *= (h * h - mu2) / (Complex64::new(jf, 0.0) - mu2);
        }
        Ok(acc)
    }
}

/// u(mu) = (-1)^(theta+1) b pi mu prod (mu_n^2 - mu^2)/n^2, evaluated as
/// (-1)^(theta+1) b mu times the node product. The associated determinant
/// model is u(mu)/mu.
pub fn spectrum_product_u(
    b: Complex64,
    theta: u8,
    head: &[Complex64],
    mu: Complex64,
) -> Complex64 {
    let sign = if theta == 0 { -1.0 } else { 1.0 };
    sign * b * mu * node_product_s(head, mu)
}

/// Example-family f1(mu) = sin^k(a mu) sin^k(c mu) / mu^(2k-1) with
/// a = alpha pi / k, c = (1-alpha) pi / k, written as
/// mu (a csinc(a mu))^k (c csinc(c mu))^k so the origin is regular.
pub fn example1_f(k: u32, alpha: f64, mu: Complex64) -> Complex64 {
    mu * example1_det(k, alpha, mu)
}

fn example1_det(k: u32, alpha: f64, mu: Complex64) -> Complex64 {
    assert!(k >= 1, "example1 requires k >= 1");
    assert!(alpha > 0.0 && alpha < 1.0, "example1 requires 0 < alpha < 1");
    let a = alpha * PI / k as f64;
    let c = (1.0 - alpha) * PI / k as f64;
    let fa = a * csinc(a * mu);
    let fc = c * csinc(c * mu);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..k {
        acc *= fa * fc;
    }
    acc
}

/// Perturbed indices of the example-2 node rule: for p in p0..=p_max and
/// k in 1..=[ln p], node index n = 2^p + k carries mu_n = 2^(p+1) instead
/// of 2n. Returns (B, A) = (2(2^p + k), 2^(p+1)) pairs sorted by B.
fn example2_perturbations(p0: u32, p_max: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for p in p0..=p_max {
        let cluster = (p as f64).ln().floor() as u64;
        let base = 2f64.powi(p as i32);
        for k in 1..=cluster {
            out.push((2.0 * (base + k as f64), 2.0 * base));
        }
    }
    out
}

/// u(mu) = pi^2/4 mu prod ((mu_n^2 - mu^2)/(2n)^2)^2 of the second example,
/// with cluster perturbations truncated at p <= p_max. Evaluated against the
/// closed form sin^2(pi mu / 2)/mu; odd in mu.
pub fn example2_u(p0: u32, p_max: u32, mu: Complex64) -> Complex64 {
    mu * example2_det(p0, p_max, mu)
}

fn example2_det(p0: u32, p_max: u32, mu: Complex64) -> Complex64 {
    assert!(p0 >= 10, "example2 requires p0 >= 10");
    assert!(p_max >= p0, "example2 requires p_max >= p0");
    let mu = if mu.re < 0.0 { -mu } else { mu };
    let perturbed = example2_perturbations(p0, p_max);

    let nearest_even = 2.0 * (mu.re / 2.0).round();
    let hit = perturbed
        .iter()
        .position(|&(b, _)| b == nearest_even && (mu - Complex64::new(b, 0.0)).norm() <= 1.0);

    // csinc(pi mu/2) * (A^2-mu^2)/(B^2-mu^2) for the matched pole, combined
    // analytically: (-1)^(m+1) (A^2-mu^2) csinc(pi(mu-B)/2) / (mu (B+mu)).
    let mut acc = match hit {
        Some(j) => {
            let (b, a) = perturbed[j];
            let bf = Complex64::new(b, 0.0);
            let af = Complex64::new(a, 0.0);
            let parity = if (b / 2.0) as i64 % 2 == 0 { -1.0 } else { 1.0 };
            parity * (af - mu) * (af + mu) * csinc(PI * (mu - bf) / 2.0) / (mu * (bf + mu))
        }
        None => csinc(PI * mu / 2.0),
    };
    for (j, &(b, a)) in perturbed.iter().enumerate() {
        if hit == Some(j) {
            continue;
        }
        let bf = Complex64::new(b, 0.0);
        let af = Complex64::new(a, 0.0);
        acc *= (af - mu) * (af + mu) / ((bf - mu) * (bf + mu));
    }
    // square the product, restore the pi^2/4 prefactor
    acc = acc * acc;
    PI * PI / 4.0 * acc
}

/// An evaluable model of an entire function tied to the spectral problem.
///
/// `eval` returns the function the variant names (Delta, s, u, f1);
/// `det_value` returns the associated characteristic-determinant
/// normalization (u/mu, f1/mu) used for zero counting and root search.
#[derive(Debug, Clone)]
pub enum EntireFunctionModel {
    /// Delta(mu) computed from the ODE endpoint values for (q, b, theta).
    OdeDeterminant {
        q: PotentialGrid,
        bc: BoundaryParams,
        solver: SolverOptions,
    },
    /// sin(pi mu)/mu.
    SineQuotient,
    /// Node product s(mu) with perturbed head nodes, mu_n = n beyond.
    NodeProduct { head: Vec<Complex64> },
    /// Spectrum product u(mu) = (-1)^(theta+1) b pi mu prod (mu_n^2-mu^2)/n^2.
    SpectrumProduct {
        b: Complex64,
        theta: u8,
        head: Vec<Complex64>,
    },
    /// f1(mu) of the first example family.
    Example1 { k: u32, alpha: f64 },
    /// u(mu) of the second example family (cluster nodes).
    Example2 { p0: u32, p_max: u32 },
}

impl EntireFunctionModel {
    pub fn ode(q: PotentialGrid, bc: BoundaryParams) -> Self {
        Self::OdeDeterminant {
            q,
            bc,
            solver: SolverOptions::default(),
        }
    }

    pub fn example1(k: u32, alpha: f64) -> Result<Self, ModelError> {
        if k < 1 {
            return Err(ModelError::InvalidParameter("example1: k must be >= 1".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ModelError::InvalidParameter(
                "example1: alpha must lie strictly between 0 and 1".into(),
            ));
        }
        Ok(Self::Example1 { k, alpha })
    }

    pub fn example2(p0: u32, p_max: u32) -> Result<Self, ModelError> {
        if p0 < 10 {
            return Err(ModelError::InvalidParameter("example2: p0 must be >= 10".into()));
        }
        if p_max < p0 || p_max > 40 {
            return Err(ModelError::InvalidParameter(
                "example2: p_max must satisfy p0 <= p_max <= 40".into(),
            ));
        }
        Ok(Self::Example2 { p0, p_max })
    }

    /// The function this variant models.
    pub fn eval(&self, mu: Complex64) -> Result<Complex64, ModelError> {
        match self {
            Self::OdeDeterminant { q, bc, solver } => {
                Ok(spectral::determinant_with(q, bc, mu, solver)?)
            }
            Self::SineQuotient => Ok(sine_quotient(mu)),
            Self::NodeProduct { head } => Ok(node_product_s(head, mu)),
            Self::SpectrumProduct { b, theta, head } => Ok(spectrum_product_u(*b, *theta, head, mu)),
            Self::Example1 { k, alpha } => Ok(example1_f(*k, *alpha, mu)),
            Self::Example2 { p0, p_max } => Ok(example2_u(*p0, *p_max, mu)),
        }
    }

    /// The characteristic-determinant normalization of this variant:
    /// Delta itself for determinant models, u(mu)/mu and f1(mu)/mu for the
    /// odd product families (with the removable singularity at 0 filled).
    pub fn det_value(&self, mu: Complex64) -> Result<Complex64, ModelError> {
        match self {
            Self::OdeDeterminant { q, bc, solver } => {
                Ok(spectral::determinant_with(q, bc, mu, solver)?)
            }
            Self::SineQuotient => Ok(sine_quotient(mu)),
            Self::NodeProduct { head } => Ok(node_product_s(head, mu)),
            Self::SpectrumProduct { b, theta, head } => {
                let sign = if *theta == 0 { -1.0 } else { 1.0 };
                Ok(sign * b * node_product_s(head, mu))
            }
            Self::Example1 { k, alpha } => Ok(example1_det(*k, *alpha, mu)),
            Self::Example2 { p0, p_max } => Ok(example2_det(*p0, *p_max, mu)),
        }
    }

    /// b of the associated boundary conditions, when the variant has one.
    pub fn boundary_b(&self) -> Option<Complex64> {
        match self {
            Self::OdeDeterminant { bc, .. } => Some(bc.b),
            Self::SpectrumProduct { b, .. } => Some(*b),
            _ => None,
        }
    }

    /// Whether zeros sit near the integers, so Newton seeding at mu = n is
    /// valid. False exactly when the b sin(pi mu) term is absent.
    pub fn integer_seeding_valid(&self) -> bool {
        match self {
            Self::OdeDeterminant { bc, .. } => bc.b.norm() > 0.0,
            Self::SpectrumProduct { b, .. } => b.norm() > 0.0,
            Self::SineQuotient | Self::NodeProduct { .. } => true,
            Self::Example1 { .. } | Self::Example2 { .. } => false,
        }
    }

    /// Copy of the model with the ODE solver tolerance replaced (no-op for
    /// closed-form variants). Contour sampling uses a relaxed tolerance.
    pub fn with_solver_tol(&self, tol: f64) -> Self {
        match self {
            Self::OdeDeterminant { q, bc, .. } => Self::OdeDeterminant {
                q: q.clone(),
                bc: *bc,
                solver: SolverOptions::with_tol(tol),
            },
            other => other.clone(),
        }
    }
}

/// Options for the structural membership check.
#[derive(Debug, Clone)]
pub struct PwOptions {
    /// Dyadic window range on the real axis.
    pub window_lo: f64,
    pub window_hi: f64,
    /// Trapezoid samples per window.
    pub samples_per_window: usize,
    /// ODE evaluation tolerance while sampling.
    pub eval_tol: f64,
    /// Relative oddness threshold.
    pub odd_rel_tol: f64,
    /// Solver noise in f(mu) = mu Delta - b sin(pi mu) is ~ eval_tol * mu *
    /// noise_scale; windows below this floor times the factor count as zero
    /// in the decay comparison.
    pub noise_floor_factor: f64,
    pub noise_scale: f64,
}

impl Default for PwOptions {
    fn default() -> Self {
        Self {
            window_lo: 8.0,
            window_hi: 512.0,
            samples_per_window: 17,
            eval_tol: 1e-8,
            odd_rel_tol: 1e-8,
            noise_floor_factor: 10.0,
            noise_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwVerdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone)]
pub struct PwReport {
    /// max |f(mu) + f(-mu)| over the sample set.
    pub odd_defect: f64,
    /// max |f(mu)| over the sample set (the scale the defect is judged by).
    pub odd_scale: f64,
    /// Dyadic-window L2 estimates (lo, hi, value), ascending windows.
    pub windows: Vec<(f64, f64, f64)>,
    pub odd_ok: bool,
    pub decay_ok: bool,
    pub verdict: PwVerdict,
}

/// Structural check of Delta(mu) = (-1)^(theta+1) b sin(pi mu)/mu + f(mu)/mu:
/// forms f(mu) = mu Delta(mu) - (-1)^(theta+1) b sin(pi mu), reports its
/// oddness defect and dyadic L2 windows on the real axis, and passes when
/// the defect is below tolerance and the windows are non-increasing after
/// the first. Numerical evidence only, never a proof.
pub fn pw_structure_check(
    model: &EntireFunctionModel,
    bc: &BoundaryParams,
) -> Result<PwReport, ModelError> {
    pw_structure_check_with(model, bc, &PwOptions::default())
}

pub fn pw_structure_check_with(
    model: &EntireFunctionModel,
    bc: &BoundaryParams,
    opts: &PwOptions,
) -> Result<PwReport, ModelError> {
    let fast = model.with_solver_tol(opts.eval_tol);
    let f = |mu: Complex64| -> Result<Complex64, ModelError> {
        Ok(mu * fast.det_value(mu)? - bc.sign() * bc.b * (PI * mu).sin())
    };
    let opts = PwOptions {
        noise_scale: bc.b.norm().max(1.0),
        ..opts.clone()
    };
    pw_structure_check_fn(f, &opts)
}

/// Same check over an arbitrary determinant evaluation (used to probe
/// deliberately corrupted models).
pub fn pw_structure_check_fn(
    f: impl Fn(Complex64) -> Result<Complex64, ModelError>,
    opts: &PwOptions,
) -> Result<PwReport, ModelError> {
    // Oddness over a mixed real/complex sample set.
    let mut samples: Vec<Complex64> = (0..16)
        .map(|k| Complex64::new(0.31 + 0.97 * k as f64, 0.0))
        .collect();
    samples.extend([
        Complex64::new(1.3, 0.7),
        Complex64::new(2.7, -0.4),
        Complex64::new(5.1, 0.9),
        Complex64::new(8.3, -0.6),
        Complex64::new(0.9, 1.0),
        Complex64::new(3.3, -1.0),
        Complex64::new(12.7, 0.5),
        Complex64::new(6.9, -0.8),
    ]);
    let mut odd_defect = 0.0f64;
    let mut odd_scale = 0.0f64;
    for &mu in &samples {
        let plus = f(mu)?;
        let minus = f(-mu)?;
        odd_defect = odd_defect.max((plus + minus).norm());
        odd_scale = odd_scale.max(plus.norm());
    }
    let odd_ok = odd_defect <= opts.odd_rel_tol * odd_scale;

    // Dyadic L2 windows [lo, 2lo], [2lo, 4lo], ... on the real axis.
    let mut windows = Vec::new();
    let mut floors = Vec::new();
    let mut lo = opts.window_lo;
    while 2.0 * lo <= opts.window_hi + 1e-9 {
        let hi = 2.0 * lo;
        let m = opts.samples_per_window.max(3);
        let h = (hi - lo) / (m - 1) as f64;
        let mut acc = 0.0;
        for j in 0..m {
            let x = lo + j as f64 * h;
            let v = f(Complex64::new(x, 0.0))?.norm_sqr();
            let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
            acc += w * v;
        }
        windows.push((lo, hi, (acc * h).sqrt()));
        // L2 of the eval-noise model tol * mu * scale over this window
        floors.push(
            opts.noise_floor_factor
                * opts.eval_tol
                * opts.noise_scale
                * ((hi.powi(3) - lo.powi(3)) / 3.0).sqrt(),
        );
        lo = hi;
    }
    let decay_ok = (2..windows.len()).all(|i| windows[i].2 <= windows[i - 1].2.max(floors[i]));

    let verdict = if odd_ok && decay_ok {
        PwVerdict::Pass
    } else {
        PwVerdict::Fail
    };
    Ok(PwReport {
        odd_defect,
        odd_scale,
        windows,
        odd_ok,
        decay_ok,
        verdict,
    })
}
