//! Sampled unitary paths and homotopies over [0,1], exponential
//! factorizations u = prod_j exp(i h_j), rectifiable path length, and the
//! shrinking homotopy u_s = prod_j exp(i h_j (1-s)).
//!
//! Paths generated analytically carry their closure so that refinement
//! re-evaluates exact values; sample-only paths refine along geodesics.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{CelError, Result};
use crate::matcore::{
    self, herm_defect, identity, mat_exp_i, op_norm, principal_log_unitary, unitary_defect, CMat,
    DEFAULT_TOL,
};

/// Closure producing the exact sample at parameter t.
pub type MatFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Strictly increasing grid on [0,1] with endpoints exactly 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CelError::InvalidParams(
                "grid needs at least two points".into(),
            ));
        }
        if points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(CelError::InvalidParams(
                "grid endpoints must be exactly 0 and 1".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CelError::InvalidParams(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Grid { points })
    }

    /// Uniform grid with `n_points` points (n_points - 1 intervals).
    pub fn uniform(n_points: usize) -> Self {
        let m = (n_points.max(2) - 1) as f64;
        let points = (0..n_points.max(2)).map(|i| i as f64 / m).collect();
        Grid { points }
    }

    /// Default grid: 257 uniform points.
    pub fn default_grid() -> Self {
        Grid::uniform(257)
    }

    /// Uniform grid with extra points merged in (deduplicated).
    pub fn uniform_plus(n_points: usize, extra: &[f64]) -> Result<Self> {
        let mut pts: Vec<f64> = Grid::uniform(n_points).points;
        for &t in extra {
            if !(0.0..=1.0).contains(&t) {
                return Err(CelError::InvalidParams(format!(
                    "extra grid point {t} outside [0,1]"
                )));
            }
            pts.push(t);
        }
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        Grid::from_points(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point equal to t within 1e-12, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| (p - t).abs() <= 1e-12)
    }

    /// Grid refined by `factor`: every interval split into `factor` equal
    /// parts; original points preserved exactly.
    pub fn refined(&self, factor: usize) -> Self {
        let mut pts = Vec::with_capacity((self.len() - 1) * factor + 1);
        for w in self.points.windows(2) {
            pts.push(w[0]);
            for k in 1..factor {
                pts.push(w[0] + (w[1] - w[0]) * k as f64 / factor as f64);
            }
        }
        pts.push(1.0);
        Grid { points: pts }
    }
}

/// Grid-sampled unitary path t -> U(t).
#[derive(Clone)]
pub struct UnitaryPath {
    n: usize,
    grid: Grid,
    samples: Vec<CMat>,
    source: Option<MatFn>,
}

impl std::fmt::Debug for UnitaryPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryPath")
            .field("n", &self.n)
            .field("grid_len", &self.grid.len())
            .field("analytic", &self.source.is_some())
            .finish()
    }
}

impl UnitaryPath {
    /// Build from raw samples, checking unitarity and the aliasing guard
    /// ||U_{i+1} - U_i|| < 2 on every step.
    pub fn from_samples(grid: Grid, samples: Vec<CMat>, tol: f64) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(CelError::InvalidParams(format!(
                "{} samples for {} grid points",
                samples.len(),
                grid.len()
            )));
        }
        let n = samples[0].nrows();
        for (i, s) in samples.iter().enumerate() {
            if s.nrows() != n || s.ncols() != n || !matcore::all_finite(s) {
                return Err(CelError::InvalidParams(format!(
                    "sample {i} is not a finite {n}x{n} matrix"
                )));
            }
            let defect = unitary_defect(s);
            if defect > tol {
                return Err(CelError::NotUnitary { defect, tol });
            }
        }
        for (i, w) in samples.windows(2).enumerate() {
            let step = op_norm(&(&w[1] - &w[0]));
            if step >= 2.0 {
                return Err(CelError::AliasedPhase {
                    index: i,
                    jump: step,
                });
            }
        }
        Ok(UnitaryPath {
            n,
            grid,
            samples,
            source: None,
        })
    }

    /// Build by evaluating a closure on the grid; the closure is retained
    /// for exact refinement and off-grid evaluation.
    pub fn from_fn(grid: Grid, f: MatFn, tol: f64) -> Result<Self> {
        let samples: Vec<CMat> = grid.points().par_iter().map(|&t| f(t)).collect();
        let mut p = UnitaryPath::from_samples(grid, samples, tol)?;
        p.source = Some(f);
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &CMat {
        &self.samples[i]
    }

    pub fn is_analytic(&self) -> bool {
        self.source.is_some()
    }

    /// Exact evaluation at arbitrary t (analytic paths only).
    pub fn eval(&self, t: f64) -> Option<CMat> {
        self.source.as_ref().map(|f| f(t))
    }

    pub fn first(&self) -> &CMat {
        &self.samples[0]
    }

    pub fn last(&self) -> &CMat {
        self.samples.last().unwrap()
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        op_norm(&(self.first() - self.last())) <= tol
    }

    /// Orientation-reversed path t -> U(1-t).
    pub fn reversed(&self) -> UnitaryPath {
        let pts: Vec<f64> = self
            .grid
            .points()
            .iter()
            .rev()
            .map(|&t| {
                let r = 1.0 - t;
                if r == -0.0 {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        let samples: Vec<CMat> = self.samples.iter().rev().cloned().collect();
        let source = self.source.clone().map(|f| {
            let g: MatFn = Arc::new(move |t: f64| f(1.0 - t));
            g
        });
        UnitaryPath {
            n: self.n,
            grid: Grid { points: pts },
            samples,
            source,
        }
    }

    /// Refine the grid by `factor`. Analytic paths re-evaluate exactly;
    /// sampled paths interpolate along geodesics
    /// U_i exp(θ i log(U_i* U_{i+1})).
    pub fn refine(&self, factor: usize) -> Result<UnitaryPath> {
        if factor < 2 {
            return Ok(self.clone());
        }
        let grid = self.grid.refined(factor);
        if let Some(f) = &self.source {
            return UnitaryPath::from_fn(grid, f.clone(), DEFAULT_TOL);
        }
        let segments: Vec<Vec<CMat>> = self
            .samples
            .par_windows(2)
            .map(|w| {
                let step = w[0].adjoint() * &w[1];
                let h = principal_log_unitary(&step, 1e-9)?;
                let mut out = Vec::with_capacity(factor);
                out.push(w[0].clone());
                for k in 1..factor {
                    let frac = k as f64 / factor as f64;
                    let part = mat_exp_i(&h.map(|z| z * frac))?;
                    out.push(&w[0] * part);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut samples = Vec::with_capacity(grid.len());
        for seg in segments {
            samples.extend(seg);
        }
        samples.push(self.samples.last().unwrap().clone());
        UnitaryPath::from_samples(grid, samples, DEFAULT_TOL)
    }
}

/// Chord-sum path length over the grid: a lower bound for the rectifiable
/// length, nondecreasing under refinement.
pub fn path_length(p: &UnitaryPath) -> f64 {
    p.samples
        .par_windows(2)
        .map(|w| op_norm(&(&w[1] - &w[0])))
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// Grid-sampled Hermitian-valued path.
#[derive(Clone)]
pub struct HermPath {
    n: usize,
    grid: Grid,
    samples: Vec<CMat>,
    source: Option<MatFn>,
}

impl std::fmt::Debug for HermPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HermPath")
            .field("n", &self.n)
            .field("grid_len", &self.grid.len())
            .finish()
    }
}

impl HermPath {
    pub fn from_samples(grid: Grid, samples: Vec<CMat>, tol: f64) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(CelError::InvalidParams(format!(
                "{} samples for {} grid points",
                samples.len(),
                grid.len()
            )));
        }
        let n = samples[0].nrows();
        for (i, s) in samples.iter().enumerate() {
            if s.nrows() != n || s.ncols() != n || !matcore::all_finite(s) {
                return Err(CelError::InvalidParams(format!(
                    "sample {i} is not a finite {n}x{n} matrix"
                )));
            }
            let defect = herm_defect(s);
            if defect > tol {
                return Err(CelError::NotHermitian { defect, tol });
            }
        }
        Ok(HermPath {
            n,
            grid,
            samples,
            source: None,
        })
    }

    pub fn from_fn(grid: Grid, f: MatFn, tol: f64) -> Result<Self> {
        let samples: Vec<CMat> = grid.points().par_iter().map(|&t| f(t)).collect();
        let mut p = HermPath::from_samples(grid, samples, tol)?;
        p.source = Some(f);
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &CMat {
        &self.samples[i]
    }

    pub fn eval(&self, t: f64) -> Option<CMat> {
        self.source.as_ref().map(|f| f(t))
    }

    /// sup over the grid of the operator norm.
    pub fn sup_norm(&self) -> f64 {
        self.samples
            .par_iter()
            .map(op_norm)
            .collect::<Vec<_>>()
            .iter()
            .fold(0.0f64, |m, &x| m.max(x))
    }
}

/// Ordered exponential factorization u(t) = prod_j exp(i h_j(t)).
#[derive(Debug, Clone)]
pub struct ExpFactorization {
    terms: Vec<HermPath>,
    total_norm: f64,
}

impl ExpFactorization {
    pub fn new(terms: Vec<HermPath>) -> Result<Self> {
        if terms.is_empty() {
            return Err(CelError::InvalidParams("factorization needs terms".into()));
        }
        let n = terms[0].n();
        let grid = terms[0].grid().clone();
        for t in &terms {
            if t.n() != n || t.grid() != &grid {
                return Err(CelError::InvalidParams(
                    "factorization terms must share dimension and grid".into(),
                ));
            }
        }
        let total_norm = terms.iter().map(|t| t.sup_norm()).sum();
        Ok(ExpFactorization { terms, total_norm })
    }

    pub fn terms(&self) -> &[HermPath] {
        &self.terms
    }

    /// r = sum_j sup_t ||h_j(t)||, the Lipschitz constant of the homotopy.
    pub fn total_norm(&self) -> f64 {
        self.total_norm
    }

    pub fn n(&self) -> usize {
        self.terms[0].n()
    }

    pub fn grid(&self) -> &Grid {
        self.terms[0].grid()
    }

    /// Exact slice sample at (t, s); prefers term closures when present.
    fn slice_sample_at(&self, idx: usize, s: f64) -> Result<CMat> {
        let scale = 1.0 - s;
        let n = self.n();
        let mut acc = identity(n);
        for term in &self.terms {
            let h = term.sample(idx).map(|z| z * scale);
            acc *= mat_exp_i(&h)?;
        }
        Ok(acc)
    }
}

/// The homotopy slice u_s: t -> prod_j exp(i h_j(t) (1-s)).
///
/// s = 0 reproduces the factorized path, s = 1 the constant identity.
pub fn eval_factorization(f: &ExpFactorization, s: f64) -> Result<UnitaryPath> {
    if !(0.0..=1.0).contains(&s) {
        return Err(CelError::InvalidParams(format!("s = {s} outside [0,1]")));
    }
    let grid = f.grid().clone();
    let samples: Vec<CMat> = (0..grid.len())
        .into_par_iter()
        .map(|i| f.slice_sample_at(i, s))
        .collect::<Result<_>>()?;
    UnitaryPath::from_samples(grid, samples, DEFAULT_TOL)
}

/// Homotopy sampled on a (t, s) product grid; samples indexed [s][t].
#[derive(Debug, Clone)]
pub struct Homotopy {
    n: usize,
    t_grid: Grid,
    s_grid: Grid,
    slices: Vec<UnitaryPath>,
}

impl Homotopy {
    pub fn from_factorization(f: &ExpFactorization, s_grid: Grid) -> Result<Self> {
        let slices: Vec<UnitaryPath> = s_grid
            .points()
            .iter()
            .map(|&s| eval_factorization(f, s))
            .collect::<Result<_>>()?;
        // Fixed-t slices must be valid paths in the s direction too.
        let t_grid = f.grid().clone();
        for j in 0..t_grid.len() {
            for w in slices.windows(2) {
                let step = op_norm(&(w[1].sample(j) - w[0].sample(j)));
                if step >= 2.0 {
                    return Err(CelError::AliasedPhase { index: j, jump: step });
                }
            }
        }
        Ok(Homotopy {
            n: f.n(),
            t_grid,
            s_grid,
            slices,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_grid(&self) -> &Grid {
        &self.t_grid
    }

    pub fn s_grid(&self) -> &Grid {
        &self.s_grid
    }

    pub fn slice_at_s(&self, i: usize) -> &UnitaryPath {
        &self.slices[i]
    }

    /// The path s -> W(t_j, s) at a fixed t index.
    pub fn path_in_s(&self, j: usize) -> Result<UnitaryPath> {
        let samples: Vec<CMat> = self.slices.iter().map(|p| p.sample(j).clone()).collect();
        UnitaryPath::from_samples(self.s_grid.clone(), samples, DEFAULT_TOL)
    }
}

/// Length of the homotopy s-path in the sup norm over t, measured by chord
/// sums over `s_steps` uniform s-intervals. Streams slices; memory stays
/// at two slices.
pub fn homotopy_s_length(f: &ExpFactorization, s_steps: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut prev = eval_factorization(f, 0.0)?;
    for k in 1..=s_steps {
        let s = k as f64 / s_steps as f64;
        let cur = eval_factorization(f, s)?;
        let sup = prev
            .samples()
            .par_iter()
            .zip(cur.samples().par_iter())
            .map(|(a, b)| op_norm(&(b - a)))
            .collect::<Vec<_>>()
            .iter()
            .fold(0.0f64, |m, &x| m.max(x));
        total += sup;
        prev = cur;
    }
    Ok(total)
}

/// Result of sampling the Lipschitz bound ||u_{s1} - u_{s2}|| <= r |s1 - s2|.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LipschitzReport {
    pub total_norm: f64,
    pub worst_ratio: f64,
    pub worst_witness: (f64, f64, f64),
    pub triples_checked: usize,
}

/// Check the homotopy Lipschitz bound with constant r = total_norm across
/// `samples` s-levels and all grid t. The worst ratio must stay below
/// 1 + 1e-6; a larger value indicates an implementation bug.
pub fn lipschitz_check(f: &ExpFactorization, samples: usize) -> Result<LipschitzReport> {
    if samples < 2 {
        return Err(CelError::InvalidParams("need at least 2 s-samples".into()));
    }
    let r = f.total_norm();
    let s_values: Vec<f64> = (0..samples)
        .map(|i| i as f64 / (samples - 1) as f64)
        .collect();
    let slices: Vec<UnitaryPath> = s_values
        .iter()
        .map(|&s| eval_factorization(f, s))
        .collect::<Result<_>>()?;
    let t_pts = f.grid().points();
    let mut worst = 0.0f64;
    let mut witness = (0.0, 0.0, 0.0);
    let mut triples = 0usize;
    for a in 0..samples {
        for b in (a + 1)..samples {
            let denom = r * (s_values[b] - s_values[a]);
            let diffs: Vec<f64> = slices[a]
                .samples()
                .par_iter()
                .zip(slices[b].samples().par_iter())
                .map(|(x, y)| op_norm(&(y - x)))
                .collect();
            for (j, &d) in diffs.iter().enumerate() {
                triples += 1;
                let ratio = d / denom;
                if ratio > worst {
                    worst = ratio;
                    witness = (t_pts[j], s_values[a], s_values[b]);
                }
            }
        }
    }
    if worst > 1.0 + 1e-6 {
        return Err(CelError::BoundViolated {
            ratio: worst,
            t: witness.0,
            s1: witness.1,
            s2: witness.2,
        });
    }
    Ok(LipschitzReport {
        total_norm: r,
        worst_ratio: worst,
        worst_witness: witness,
        triples_checked: triples,
    })
}
