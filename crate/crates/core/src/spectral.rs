//! Characteristic determinant evaluation, zero location with multiplicity,
//! and tail asymptotics of the spectrum.
//!
//! Roots are found by Newton refinement from asymptotic integer seeds when
//! the b sin(pi mu) term dominates, or by recursive contour subdivision
//! otherwise; every search is cross-checked against an argument-principle
//! count over the covering rectangle.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

use crate::boundary::BoundaryParams;
use crate::fundamental::{solve_fundamental_with, SolveError, SolverOptions};
use crate::grid::PotentialGrid;
use crate::models::{EntireFunctionModel, ModelError};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("zero of the model on the contour near {re} + {im}i")]
    ZeroOnBoundary { re: f64, im: f64 },
    #[error("winding number did not settle on an integer (last value {value})")]
    NonIntegerWinding { value: f64 },
    #[error("root count mismatch: refined roots total {refined}, contour count {contour}")]
    Miscount { refined: usize, contour: usize },
    #[error("spectrum indices are not contiguous at entry {index}")]
    NonContiguousIndices { index: usize },
    #[error("root search failed: {0}")]
    SearchFailed(String),
}

impl From<SolveError> for SpectralError {
    fn from(e: SolveError) -> Self {
        SpectralError::Model(ModelError::Solve(e))
    }
}

/// Delta(mu) = c(pi,mu) - s'(pi,mu) + (-1)^(theta+1) b s(pi,mu).
pub fn determinant(
    q: &PotentialGrid,
    bc: &BoundaryParams,
    mu: Complex64,
) -> Result<Complex64, SolveError> {
    determinant_with(q, bc, mu, &SolverOptions::default())
}

pub fn determinant_with(
    q: &PotentialGrid,
    bc: &BoundaryParams,
    mu: Complex64,
    opts: &SolverOptions,
) -> Result<Complex64, SolveError> {
    let e = solve_fundamental_with(q, mu, opts)?;
    Ok(e.c - e.s_prime + bc.sign() * bc.b * e.s)
}

/// d Delta / d mu by the central difference with step h = 1e-5 (1 + |mu|),
/// applied to the model's determinant normalization.
pub fn determinant_derivative(
    model: &EntireFunctionModel,
    mu: Complex64,
) -> Result<Complex64, ModelError> {
    derivative_of(&|z| model.det_value(z), mu)
}

fn derivative_of(
    f: &dyn Fn(Complex64) -> Result<Complex64, ModelError>,
    mu: Complex64,
) -> Result<Complex64, ModelError> {
    let h = 1e-5 * (1.0 + mu.norm());
    let plus = f(mu + Complex64::new(h, 0.0))?;
    let minus = f(mu - Complex64::new(h, 0.0))?;
    Ok((plus - minus) / (2.0 * h))
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn centered(center: Complex64, half_width: f64) -> Self {
        Self {
            re_min: center.re - half_width,
            re_max: center.re + half_width,
            im_min: center.im - half_width,
            im_max: center.im + half_width,
        }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn contains(&self, z: Complex64) -> bool {
        z.re > self.re_min && z.re <= self.re_max && z.im > self.im_min && z.im <= self.im_max
    }
}

/// Number of zeros of the model's determinant inside `rect`, counted with
/// multiplicity by trapezoid integration of Delta'/Delta over the boundary.
/// The point count doubles (64 per side up to 4096) until the winding
/// stabilizes; a non-integer limit or a boundary zero is an error.
pub fn count_zeros(model: &EntireFunctionModel, rect: &Rect) -> Result<usize, SpectralError> {
    count_zeros_fn(&|z| model.det_value(z), rect)
}

pub(crate) fn count_zeros_fn(
    f: &(dyn Fn(Complex64) -> Result<Complex64, ModelError> + Sync),
    rect: &Rect,
) -> Result<usize, SpectralError> {
    let mut per_side = 64usize;
    let mut previous: Option<f64> = None;
    while per_side <= 4096 {
        let winding = winding_number(f, rect, per_side)?;
        if let Some(prev) = previous {
            let rounded = winding.round();
            if (winding - prev).abs() <= 0.05 && (winding - rounded).abs() <= 0.1 {
                if rounded < -0.1 {
                    return Err(SpectralError::NonIntegerWinding { value: winding });
                }
                return Ok(rounded.max(0.0) as usize);
            }
        }
        previous = Some(winding);
        per_side *= 2;
    }
    Err(SpectralError::NonIntegerWinding {
        value: previous.unwrap_or(f64::NAN),
    })
}

fn winding_number(
    f: &(dyn Fn(Complex64) -> Result<Complex64, ModelError> + Sync),
    rect: &Rect,
    per_side: usize,
) -> Result<f64, SpectralError> {
    let corners = rect.corners();
    // nodes along the whole contour, side by side
    let mut nodes = Vec::with_capacity(4 * per_side + 4);
    let mut side_of = Vec::with_capacity(4 * per_side + 4);
    for side in 0..4 {
        let a = corners[side];
        let b = corners[(side + 1) % 4];
        for j in 0..=per_side {
            nodes.push(a + (b - a) * (j as f64 / per_side as f64));
            side_of.push(side);
        }
    }

    // evaluate value and log-derivative at every node (parallel map, ordered)
    let evals: Result<Vec<(Complex64, Complex64)>, ModelError> = nodes
        .par_iter()
        .map(|&z| Ok((f(z)?, derivative_of(&|w| f(w), z)?)))
        .collect();
    let evals = evals?;

    // minimum-modulus screen for boundary zeros
    let mut norms: Vec<f64> = evals.iter().map(|(v, _)| v.norm()).collect();
    norms.sort_by(|a, b| a.total_cmp(b));
    let median = norms[norms.len() / 2];
    let (min_idx, min_norm) = evals
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (i, v.norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("contour has nodes");
    if min_norm <= 1e-9 * median {
        let z = nodes[min_idx];
        return Err(SpectralError::ZeroOnBoundary { re: z.re, im: z.im });
    }

    // trapezoid of Delta'/Delta along each side
    let mut integral = Complex64::new(0.0, 0.0);
    let mut k = 0usize;
    for side in 0..4 {
        let a = corners[side];
        let b = corners[(side + 1) % 4];
        let dz = (b - a) / per_side as f64;
        let mut side_sum = Complex64::new(0.0, 0.0);
        for j in 0..=per_side {
            debug_assert_eq!(side_of[k], side);
            let (v, d) = evals[k];
            let weight = if j == 0 || j == per_side { 0.5 } else { 1.0 };
            side_sum += weight * (d / v);
            k += 1;
        }
        integral += side_sum * dz;
    }
    Ok((integral / (2.0 * PI * Complex64::new(0.0, 1.0))).re)
}

/// One zero of the determinant with its multiplicity and cumulative index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    /// 1-based index of the first slot this zero occupies (a zero of
    /// multiplicity m occupies indices index..index+m-1).
    pub index: usize,
    pub mu: Complex64,
    pub multiplicity: usize,
}

impl SpectrumEntry {
    pub fn lambda(&self) -> Complex64 {
        self.mu * self.mu
    }
}

/// Zeros of a determinant model on a strip window, sorted by Re mu.
#[derive(Debug, Clone)]
pub struct SpectrumList {
    pub entries: Vec<SpectrumEntry>,
    pub warnings: Vec<String>,
    /// Argument-principle total over the covering rectangle.
    pub contour_total: usize,
}

impl SpectrumList {
    /// Total zero count with multiplicity.
    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Build a list from explicit (mu, multiplicity) pairs (test and file
    /// loading support; indices are assigned cumulatively after sorting).
    pub fn from_roots(mut roots: Vec<(Complex64, usize)>) -> Self {
        roots.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
        let mut entries = Vec::with_capacity(roots.len());
        let mut index = 1usize;
        for (mu, multiplicity) in roots {
            entries.push(SpectrumEntry { index, mu, multiplicity });
            index += multiplicity;
        }
        let contour_total = index - 1;
        Self { entries, warnings: Vec::new(), contour_total }
    }
}

/// Search configuration for [`find_eigenvalues_with`].
#[derive(Debug, Clone)]
pub struct FindConfig {
    pub n_max: usize,
    /// Half-height of the search strip |Im mu| <= im_band.
    pub im_band: f64,
    /// Newton roots closer than this collapse to one zero.
    pub cluster_radius: f64,
    /// Half-width of the box used for multiplicity attribution.
    pub mult_box_half_width: f64,
    pub newton_max_iter: usize,
    /// Refinement target |Delta| <= residual_rel * max(1, |b|).
    pub residual_rel: f64,
    /// Relaxed ODE tolerance for contour sampling (counting is robust).
    pub contour_tol: f64,
    /// Explicit search rectangles override the seeded strategy.
    pub search_rects: Option<Vec<Rect>>,
    /// Roots this close to the band edge trigger a warning.
    pub band_escape_margin: f64,
}

impl FindConfig {
    pub fn new(n_max: usize) -> Self {
        Self {
            n_max,
            im_band: 2.0,
            cluster_radius: 1e-6,
            mult_box_half_width: 1e-3,
            newton_max_iter: 80,
            residual_rel: 1e-10,
            contour_tol: 1e-6,
            search_rects: None,
            band_escape_margin: 1e-3,
        }
    }
}

struct NewtonOutcome {
    mu: Complex64,
    converged: bool,
}

fn newton_refine(
    f: &dyn Fn(Complex64) -> Result<Complex64, ModelError>,
    seed: Complex64,
    target_abs: f64,
    max_iter: usize,
) -> Result<NewtonOutcome, ModelError> {
    let mut mu = seed;
    let mut value = f(mu)?;
    for _ in 0..max_iter {
        if value.norm() <= target_abs {
            return Ok(NewtonOutcome { mu, converged: true });
        }
        let d = derivative_of(&f, mu)?;
        if d.norm() < 1e-300 {
            break;
        }
        let mut step = value / d;
        // safeguard: halve the step while it fails to reduce |Delta|
        let mut improved = false;
        for _ in 0..6 {
            let cand = mu - step;
            let cand_value = f(cand)?;
            if cand_value.norm() < value.norm() {
                mu = cand;
                value = cand_value;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(NewtonOutcome {
        mu,
        converged: value.norm() <= target_abs,
    })
}

/// Newton refinement of a root of an arbitrary analytic evaluation,
/// starting from `seed` (used by round-trip verification on s(pi, mu)).
pub fn refine_root(
    f: impl Fn(Complex64) -> Result<Complex64, ModelError>,
    seed: Complex64,
    target_abs: f64,
) -> Result<Option<Complex64>, ModelError> {
    let out = newton_refine(&f, seed, target_abs, 80)?;
    Ok(if out.converged { Some(out.mu) } else { None })
}

/// All zeros of the determinant with Re mu in (1/2, n_max + 1/2] and
/// |Im mu| <= im_band, Newton-refined and cross-checked against the
/// argument-principle count on the covering rectangle.
pub fn find_eigenvalues(
    model: &EntireFunctionModel,
    n_max: usize,
) -> Result<SpectrumList, SpectralError> {
    find_eigenvalues_with(model, &FindConfig::new(n_max))
}

pub fn find_eigenvalues_with(
    model: &EntireFunctionModel,
    cfg: &FindConfig,
) -> Result<SpectrumList, SpectralError> {
    if cfg.n_max < 1 {
        return Err(SpectralError::SearchFailed("n_max must be >= 1".into()));
    }
    let scale = model
        .boundary_b()
        .map(|b| b.norm().max(1.0))
        .unwrap_or(1.0);
    let target = cfg.residual_rel * scale;
    let covering = Rect::new(
        0.5,
        cfg.n_max as f64 + 0.5,
        -cfg.im_band,
        cfg.im_band,
    );
    let relaxed = model.with_solver_tol(cfg.contour_tol);
    let relaxed_eval = |z: Complex64| relaxed.det_value(z);

    let mut roots: Vec<(Complex64, usize)>;
    if let Some(rects) = &cfg.search_rects {
        roots = Vec::new();
        for r in rects {
            roots.extend(subdivision_roots(model, &relaxed, r, target, cfg)?);
        }
    } else if model.integer_seeding_valid() {
        // Newton from each asymptotic seed mu ~ n
        let refined: Result<Vec<Option<Complex64>>, ModelError> = (1..=cfg.n_max)
            .into_par_iter()
            .map(|n| {
                let out = newton_refine(
                    &|z| model.det_value(z),
                    Complex64::new(n as f64, 0.0),
                    target,
                    cfg.newton_max_iter,
                )?;
                Ok(out.converged.then_some(out.mu))
            })
            .collect();
        let mut points: Vec<Complex64> =
            refined?.into_iter().flatten().filter(|z| covering.contains(*z)).collect();
        points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

        // collapse clusters; multiplicity from a contour box when a cluster
        // has collapsed (or is attributed 1 for an isolated simple root)
        roots = Vec::new();
        let mut i = 0usize;
        while i < points.len() {
            let mut j = i + 1;
            while j < points.len() && (points[j] - points[j - 1]).norm() <= cfg.cluster_radius {
                j += 1;
            }
            let rep = points[i];
            let mult = if j - i == 1 {
                1
            } else {
                let bx = Rect::centered(rep, cfg.mult_box_half_width);
                count_zeros_fn(&relaxed_eval, &bx)?
            };
            roots.push((rep, mult.max(1)));
            i = j;
        }
    } else {
        roots = subdivision_roots(model, &relaxed, &covering, target, cfg)?;
    }

    let refined_total: usize = roots.iter().map(|(_, m)| m).sum();
    let contour_total = count_zeros_fn(&relaxed_eval, &covering)?;

    if refined_total != contour_total && cfg.search_rects.is_none() {
        // one rescue pass: authoritative subdivision over the covering rect
        roots = subdivision_roots(model, &relaxed, &covering, target, cfg)?;
        let rescued: usize = roots.iter().map(|(_, m)| m).sum();
        if rescued != contour_total {
            return Err(SpectralError::Miscount {
                refined: rescued,
                contour: contour_total,
            });
        }
    }

    let mut warnings = Vec::new();
    for (mu, _) in &roots {
        if cfg.im_band - mu.im.abs() <= cfg.band_escape_margin {
            warnings.push(format!(
                "root {:.6}+{:.6}i lies within {} of the imaginary band edge {}",
                mu.re, mu.im, cfg.band_escape_margin, cfg.im_band
            ));
        }
    }

    let mut list = SpectrumList::from_roots(roots);
    list.warnings = warnings;
    list.contour_total = contour_total;
    Ok(list)
}

/// Recursive contour subdivision: bisect until each cell either holds no
/// zeros or is small enough to polish, then attribute the cell count as the
/// multiplicity. Valid regardless of where zeros sit (b = 0 regime).
fn subdivision_roots(
    model: &EntireFunctionModel,
    relaxed: &EntireFunctionModel,
    rect: &Rect,
    target: f64,
    cfg: &FindConfig,
) -> Result<Vec<(Complex64, usize)>, SpectralError> {
    let relaxed_eval = |z: Complex64| relaxed.det_value(z);
    let mut out = Vec::new();
    let mut stack = vec![*rect];
    let min_size = 1e-2;
    while let Some(r) = stack.pop() {
        let count = count_zeros_fn(&relaxed_eval, &r)?;
        if count == 0 {
            continue;
        }
        if r.width() <= min_size && r.height() <= min_size {
            let center = Complex64::new(
                0.5 * (r.re_min + r.re_max),
                0.5 * (r.im_min + r.im_max),
            );
            let polished = newton_refine(
                &|z| model.det_value(z),
                center,
                target,
                cfg.newton_max_iter,
            )?;
            let mu = if polished.converged && (polished.mu - center).norm() <= 2.0 * min_size {
                polished.mu
            } else {
                center
            };
            out.push((mu, count));
            continue;
        }
        let (a, b) = split_rect(&relaxed_eval, &r)?;
        stack.push(a);
        stack.push(b);
    }
    // merge duplicates that straddled a cell edge after polishing
    out.sort_by(|x, y| x.0.re.total_cmp(&y.0.re).then(x.0.im.total_cmp(&y.0.im)));
    let mut merged: Vec<(Complex64, usize)> = Vec::new();
    for (mu, m) in out {
        if let Some(last) = merged.last_mut() {
            if (last.0 - mu).norm() <= cfg.cluster_radius {
                last.1 += m;
                continue;
            }
        }
        merged.push((mu, m));
    }
    Ok(merged)
}

/// Split a rectangle across its longer side, nudging the cut when a zero
/// sits on the new edge.
fn split_rect(
    f: &(dyn Fn(Complex64) -> Result<Complex64, ModelError> + Sync),
    r: &Rect,
) -> Result<(Rect, Rect), SpectralError> {
    let vertical = r.width() >= r.height(); // cut perpendicular to the longer side
    let len = if vertical { r.width() } else { r.height() };
    for &frac in &[0.5, 0.513, 0.487, 0.537, 0.463, 0.561] {
        let (a, b) = if vertical {
            let cut = r.re_min + frac * len;
            (
                Rect::new(r.re_min, cut, r.im_min, r.im_max),
                Rect::new(cut, r.re_max, r.im_min, r.im_max),
            )
        } else {
            let cut = r.im_min + frac * len;
            (
                Rect::new(r.re_min, r.re_max, r.im_min, cut),
                Rect::new(r.re_min, r.re_max, cut, r.im_max),
            )
        };
        // a zero at or near the new edge shows up as a boundary-zero error
        // or as a winding that refuses to settle; either way shift the cut
        match (count_zeros_fn(f, &a), count_zeros_fn(f, &b)) {
            (Ok(_), Ok(_)) => return Ok((a, b)),
            (Err(SpectralError::ZeroOnBoundary { .. }), _)
            | (_, Err(SpectralError::ZeroOnBoundary { .. }))
            | (Err(SpectralError::NonIntegerWinding { .. }), _)
            | (_, Err(SpectralError::NonIntegerWinding { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Err(SpectralError::SearchFailed(
        "could not place a cut free of boundary zeros".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailVerdict {
    ConvergentLike,
    Inconclusive,
}

/// Residuals r_n = mu_n - n, their partial l2 sums, and a convergence
/// verdict. Finite data cannot prove l2 membership; the verdict only says
/// whether the partial sums have plateaued (last-quarter increment below
/// 5% of the total).
#[derive(Debug, Clone)]
pub struct TailReport {
    pub residuals: Vec<Complex64>,
    pub partial_sums: Vec<f64>,
    pub last_quarter_fraction: f64,
    pub verdict: TailVerdict,
}

pub fn tail_regularity(spec: &SpectrumList) -> Result<TailReport, SpectralError> {
    if spec.entries.is_empty() {
        return Err(SpectralError::SearchFailed("empty spectrum".into()));
    }
    let mut expected = 1usize;
    let mut residuals = Vec::new();
    for (k, e) in spec.entries.iter().enumerate() {
        if e.index != expected {
            return Err(SpectralError::NonContiguousIndices { index: k });
        }
        for slot in 0..e.multiplicity {
            let n = (e.index + slot) as f64;
            residuals.push(e.mu - Complex64::new(n, 0.0));
        }
        expected += e.multiplicity;
    }
    let mut partial_sums = Vec::with_capacity(residuals.len());
    let mut acc = 0.0;
    for r in &residuals {
        acc += r.norm_sqr();
        partial_sums.push(acc);
    }
    let m = residuals.len();
    let total = partial_sums[m - 1];
    let q = ((3 * m) / 4).max(1).min(m);
    let increment = total - partial_sums[q - 1];
    let last_quarter_fraction = if total > 0.0 { increment / total } else { 0.0 };
    let verdict = if total == 0.0 || last_quarter_fraction < 0.05 {
        TailVerdict::ConvergentLike
    } else {
        TailVerdict::Inconclusive
    };
    Ok(TailReport {
        residuals,
        partial_sums,
        last_quarter_fraction,
        verdict,
    })
}
