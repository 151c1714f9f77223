//! Continuous eigenvalue selections along paths, distinct-eigenvalue
//! branch decompositions, and empirical spectral measures with arc masses.
//!
//! Branch phases are stored in units of π (so a branch value h has
//! eigenvalue e^{iπh}); conversion to radians happens only at module
//! boundaries. Eigenvalue pairing across grid points is a minimal-cost
//! perfect matching on circular chord distance; greedy matching can swap
//! branches at near-crossings.

use rayon::prelude::*;

use crate::assign::min_cost_assignment;
use crate::error::{CelError, Result};
use crate::matcore::{
    chord, circ_dist, diag_unitary, op_norm, unitary_eigphases, wrap_phase, CMat, C64,
    DEFAULT_TOL, PI,
};
use crate::pathalg::{Grid, UnitaryPath};

/// One continuous eigenphase selection along a path.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectralSelection {
    pub phases: Vec<f64>,
    pub length: f64,
    /// Max over steps of ||ΔU|| - |chord of the selection step|. The
    /// matching construction only guarantees the selection moves no
    /// further than the path; this records how far below equality the
    /// grid actually is.
    pub equality_defect: f64,
}

/// Track a single spectral point along the path, starting from a phase in
/// the spectrum of P(0). At each step the nearest (chord distance)
/// eigenphase of the next sample continues the selection; the returned
/// phases are a continuous lift.
pub fn track_selection(p: &UnitaryPath, start_phase: f64) -> Result<SpectralSelection> {
    let all_phases: Vec<Vec<f64>> = p
        .samples()
        .par_iter()
        .map(|u| unitary_eigphases(u, DEFAULT_TOL).map(|(ph, _)| ph))
        .collect::<Result<_>>()?;
    let nearest = all_phases[0]
        .iter()
        .map(|&ph| chord(ph, start_phase))
        .fold(f64::INFINITY, f64::min);
    if nearest > 1e-6 {
        return Err(CelError::StartNotInSpectrum {
            phase: start_phase,
            dist: nearest,
        });
    }
    let mut lift = start_phase;
    let mut phases = vec![lift];
    let mut length = 0.0;
    let mut equality_defect = 0.0f64;
    for (i, w) in p.samples().windows(2).enumerate() {
        let step_norm = op_norm(&(&w[1] - &w[0]));
        let cur = wrap_phase(lift);
        let best = all_phases[i + 1]
            .iter()
            .copied()
            .min_by(|&a, &b| chord(a, cur).total_cmp(&chord(b, cur)))
            .unwrap();
        let delta = wrap_phase(best - cur);
        lift += delta;
        phases.push(lift);
        let c = chord(best, cur);
        length += c;
        equality_defect = equality_defect.max(step_norm - c);
    }
    Ok(SpectralSelection {
        phases,
        length,
        equality_defect,
    })
}

/// Continuous branch decomposition of a path with (perturbed) distinct
/// eigenvalues: n phase lifts h_j (units of π) and the rank-one
/// projections p_j(t) given by the ordered eigenbasis.
#[derive(Debug, Clone)]
pub struct EigenBranchSet {
    grid: Grid,
    /// branches[j][i]: lift of branch j at grid point i, units of π.
    branches: Vec<Vec<f64>>,
    /// basis[i]: eigenvector matrix at grid point i, column j = branch j.
    basis: Vec<CMat>,
}

impl EigenBranchSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn branch(&self, j: usize) -> &[f64] {
        &self.branches[j]
    }

    pub fn branches(&self) -> &[Vec<f64>] {
        &self.branches
    }

    pub fn basis(&self, i: usize) -> &CMat {
        &self.basis[i]
    }

    /// Rank-one projection of branch j at grid point i.
    pub fn projection(&self, j: usize, i: usize) -> CMat {
        let v = self.basis[i].column(j);
        let n = v.len();
        CMat::from_fn(n, n, |r, c| v[r] * v[c].conj())
    }

    /// ||Σ_j p_j - 1|| at grid point i.
    pub fn projection_sum_defect(&self, i: usize) -> f64 {
        let n = self.basis[i].nrows();
        let mut sum = CMat::zeros(n, n);
        for j in 0..n {
            sum += self.projection(j, i);
        }
        op_norm(&(sum - crate::matcore::identity(n)))
    }

    /// Chord length of one branch lift (radians along the circle).
    pub fn branch_chord_length(&self, j: usize) -> f64 {
        self.branches[j]
            .windows(2)
            .map(|w| 2.0 * ((w[1] - w[0]) * PI / 2.0).sin().abs())
            .sum()
    }
}

/// Van der Corput sequence in base 2.
fn van_der_corput(k: usize) -> f64 {
    let mut x = 0.0;
    let mut denom = 1.0;
    let mut k = k + 1;
    while k > 0 {
        denom *= 2.0;
        x += (k % 2) as f64 / denom;
        k /= 2;
    }
    x
}

/// Zero-sum perturbation pattern with distinct entries, sup |δ| <= scale.
fn perturbation_pattern(n: usize, scale: f64, attempt: usize) -> Vec<f64> {
    let shift = 0.381966011250105 * attempt as f64;
    let mut d: Vec<f64> = (0..n)
        .map(|j| scale * (2.0 * ((van_der_corput(j) + shift).fract()) - 1.0) * 0.5)
        .collect();
    let sum: f64 = d.iter().sum();
    let last = d.len() - 1;
    d[last] -= sum;
    d
}

fn min_circular_gap(sorted_phases: &[f64]) -> f64 {
    let n = sorted_phases.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut gap = f64::INFINITY;
    for i in 0..n {
        let a = sorted_phases[i];
        let b = sorted_phases[(i + 1) % n];
        gap = gap.min(circ_dist(a, b));
    }
    gap
}

/// Decompose a path into continuous eigenvalue branches after an
/// ε-perturbation that makes eigenvalues distinct at every grid point.
///
/// The perturbation adds a fixed zero-sum diagonal pattern in the sample's
/// own eigenbasis, so pointwise determinants are preserved exactly. When
/// P(0) already has distinct eigenvalues the branch lifts start at its
/// principal phases (units of π, values in (-1, 1]).
pub fn branch_decompose(p: &UnitaryPath, eps: f64) -> Result<(EigenBranchSet, UnitaryPath)> {
    if eps <= 0.0 {
        return Err(CelError::InvalidParams("eps must be positive".into()));
    }
    let n = p.n();
    let distinct_gap = 1e-9;
    let max_attempts = 8;

    // Per grid point: distinct (possibly perturbed) phases and basis.
    let pointwise: Vec<(Vec<f64>, CMat)> = p
        .samples()
        .par_iter()
        .map(|u| {
            let (phases, vecs) = unitary_eigphases(u, DEFAULT_TOL)?;
            if min_circular_gap(&phases) >= distinct_gap {
                return Ok((phases, vecs));
            }
            for attempt in 0..max_attempts {
                let pattern = perturbation_pattern(n, eps * 0.5, attempt);
                let mut perturbed: Vec<f64> =
                    phases.iter().zip(&pattern).map(|(&ph, &d)| ph + d).collect();
                let mut sorted = perturbed.clone();
                sorted.sort_by(|a, b| a.total_cmp(b));
                if min_circular_gap(&sorted) >= distinct_gap {
                    for x in perturbed.iter_mut() {
                        *x = wrap_phase(*x);
                    }
                    return Ok((perturbed, vecs));
                }
            }
            Err(CelError::PerturbationFailed {
                eps,
                attempts: max_attempts,
            })
        })
        .collect::<Result<_>>()?;

    // Sequential left-to-right matching pass.
    let mut branches: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut basis: Vec<CMat> = Vec::with_capacity(p.grid().len());

    let (first_phases, first_vecs) = &pointwise[0];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| first_phases[a].total_cmp(&first_phases[b]));
    let mut lifts: Vec<f64> = order.iter().map(|&j| first_phases[j] / PI).collect();
    for &l in &lifts {
        branches.push(vec![l]);
    }
    basis.push(reorder_columns(first_vecs, &order));

    for i in 1..pointwise.len() {
        let (phases, vecs) = &pointwise[i];
        let cost: Vec<Vec<f64>> = lifts
            .iter()
            .map(|&l| {
                let cur = wrap_phase(l * PI);
                phases.iter().map(|&ph| chord(ph, cur)).collect()
            })
            .collect();
        let assign = min_cost_assignment(&cost);
        let mut new_order = vec![0usize; n];
        for (branch, &col) in assign.iter().enumerate() {
            new_order[branch] = col;
        }
        for (branch, &col) in new_order.iter().enumerate() {
            let cur = wrap_phase(lifts[branch] * PI);
            let delta = wrap_phase(phases[col] - cur);
            if delta.abs() >= PI / 2.0 {
                return Err(CelError::StepTooLarge {
                    index: i,
                    step: delta.abs() / (2.0 * PI),
                });
            }
            lifts[branch] += delta / PI;
            branches[branch].push(lifts[branch]);
        }
        basis.push(reorder_columns(vecs, &new_order));
    }

    // Reassemble the perturbed path from the matched decomposition.
    let samples: Vec<CMat> = (0..p.grid().len())
        .map(|i| {
            let phases_pi: Vec<f64> = branches.iter().map(|b| b[i] * PI).collect();
            &basis[i] * diag_unitary(&phases_pi) * basis[i].adjoint()
        })
        .collect();
    let perturbed = UnitaryPath::from_samples(p.grid().clone(), samples, DEFAULT_TOL)?;

    Ok((
        EigenBranchSet {
            grid: p.grid().clone(),
            branches,
            basis,
        },
        perturbed,
    ))
}

fn reorder_columns(m: &CMat, order: &[usize]) -> CMat {
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        out.set_column(col, &m.column(src));
    }
    out
}

/// Atom of an empirical spectral measure: eigenphase with its exact
/// multiplicity over dimension `dim`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MeasureAtom {
    pub phase: f64,
    pub multiplicity: usize,
}

/// Empirical eigenphase distribution of a unitary; masses are exact
/// rationals multiplicity/dim and sum to 1.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<MeasureAtom>,
    pub dim: usize,
}

impl EmpiricalMeasure {
    pub fn total(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.multiplicity as f64 / self.dim as f64)
            .sum()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.atoms.iter().map(|a| a.multiplicity).sum()
    }
}

/// Spectral measure of a unitary: atoms at the eigenphases with mass
/// multiplicity/n. Phases within 1e-9 are merged into one atom.
pub fn spectral_measure(u: &CMat) -> Result<EmpiricalMeasure> {
    let (phases, _) = unitary_eigphases(u, DEFAULT_TOL)?;
    let dim = phases.len();
    let mut atoms: Vec<MeasureAtom> = Vec::new();
    for &ph in &phases {
        match atoms.last_mut() {
            Some(a) if circ_dist(a.phase, ph) <= 1e-9 => a.multiplicity += 1,
            _ => atoms.push(MeasureAtom {
                phase: ph,
                multiplicity: 1,
            }),
        }
    }
    // The sort order puts -π and +π at opposite ends; merge across the cut.
    if atoms.len() >= 2 {
        let first = atoms[0];
        let last = *atoms.last().unwrap();
        if circ_dist(first.phase, last.phase) <= 1e-9 {
            atoms[0].multiplicity += last.multiplicity;
            atoms.pop();
        }
    }
    Ok(EmpiricalMeasure { atoms, dim })
}

/// Mass of the closed arc {e^{is}: |s - center| <= halfwidth (circularly)}.
/// Atoms exactly on the boundary count as inside.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ArcMass {
    pub mass: f64,
    pub multiplicity: usize,
    pub dim: usize,
}

pub fn arc_mass(mu: &EmpiricalMeasure, center: f64, halfwidth: f64) -> ArcMass {
    let multiplicity = mu
        .atoms
        .iter()
        .filter(|a| circ_dist(a.phase, center) <= halfwidth)
        .map(|a| a.multiplicity)
        .sum();
    ArcMass {
        mass: multiplicity as f64 / mu.dim as f64,
        multiplicity,
        dim: mu.dim,
    }
}

/// Per-t row of the concentration report for a two-cluster family path.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub i_center: f64,
    pub i_mass: f64,
    pub i_multiplicity: usize,
    pub j_center: f64,
    pub j_mass: f64,
    pub j_multiplicity: usize,
    /// |i_mass - 1/n|
    pub i_deviation: f64,
    /// |j_mass - (n-1)/n|
    pub j_deviation: f64,
    /// Exact integers: i_deviation = num/den.
    pub i_deviation_num: i64,
    pub i_deviation_den: i64,
    pub within_bound: bool,
}

/// Arc masses of the moving arcs I_t (center tθ₀, halfwidth ε/2) and J_t
/// (center -tθ₀/(n-1)) for each requested t, with deviations from 1/n and
/// (n-1)/n and the 5ε/64 concentration flag.
///
/// `n` is the cluster parameter of the family (θ₀ = π(2 - 1/(n-1))),
/// not the matrix dimension.
pub fn measure_concentration_report(
    path: &UnitaryPath,
    n: usize,
    t_values: &[f64],
    eps: f64,
) -> Result<Vec<ConcentrationRow>> {
    if n < 2 {
        return Err(CelError::InvalidParams("need n >= 2".into()));
    }
    let theta0 = PI * (2.0 - 1.0 / (n - 1) as f64);
    let nf = n as f64;
    let dim = path.n() as i64;
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let u = sample_at(path, t)?;
        let mu = spectral_measure(&u)?;
        let i_center = wrap_phase(t * theta0);
        let j_center = wrap_phase(-t * theta0 / (nf - 1.0));
        let i_arc = arc_mass(&mu, i_center, eps / 2.0);
        let j_arc = arc_mass(&mu, j_center, eps / 2.0);
        let i_deviation = (i_arc.mass - 1.0 / nf).abs();
        let j_deviation = (j_arc.mass - (nf - 1.0) / nf).abs();
        let num = (i_arc.multiplicity as i64 * n as i64 - dim).abs();
        let den = dim * n as i64;
        let bound = 5.0 * eps / 64.0;
        rows.push(ConcentrationRow {
            t,
            i_center,
            i_mass: i_arc.mass,
            i_multiplicity: i_arc.multiplicity,
            j_center,
            j_mass: j_arc.mass,
            j_multiplicity: j_arc.multiplicity,
            i_deviation,
            j_deviation,
            i_deviation_num: num,
            i_deviation_den: den,
            within_bound: i_deviation <= bound && j_deviation <= bound,
        });
    }
    Ok(rows)
}

/// Sample a path at arbitrary t: exact for analytic paths, grid lookup
/// otherwise.
pub fn sample_at(path: &UnitaryPath, t: f64) -> Result<CMat> {
    if let Some(u) = path.eval(t) {
        return Ok(u);
    }
    path.grid()
        .index_of(t)
        .map(|i| path.sample(i).clone())
        .ok_or_else(|| {
            CelError::InvalidParams(format!(
                "t = {t} is not a grid point and the path has no closure"
            ))
        })
}

/// Scalar determinant phase sum of branch lifts (units of π), used to
/// check that Σ_j h_j is constant when det is constant.
pub fn branch_sum(set: &EigenBranchSet, i: usize) -> f64 {
    set.branches.iter().map(|b| b[i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag_herm, identity, mat_exp_i, TAU};
    use crate::pathalg::MatFn;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn scalar_circle(points: usize) -> UnitaryPath {
        let f: MatFn = Arc::new(|t: f64| CMat::from_fn(1, 1, |_, _| C64::from_polar(1.0, TAU * t)));
        UnitaryPath::from_fn(Grid::uniform(points), f, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn constant_selection_zero_length() {
        let grid = Grid::uniform(9);
        let u = diag_unitary(&[0.5, -1.0]);
        let p = UnitaryPath::from_samples(grid, vec![u; 9], DEFAULT_TOL).unwrap();
        let sel = track_selection(&p, 0.5).unwrap();
        assert_eq!(sel.length, 0.0);
        for &ph in &sel.phases {
            assert_abs_diff_eq!(ph, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_selection_winds_once() {
        let p = scalar_circle(257);
        let sel = track_selection(&p, 0.0).unwrap();
        assert_abs_diff_eq!(*sel.phases.last().unwrap(), TAU, epsilon = 1e-9);
        assert_abs_diff_eq!(sel.length, TAU, epsilon = 1e-3);
    }

    #[test]
    fn selection_rejects_bad_start() {
        let p = scalar_circle(65);
        assert!(matches!(
            track_selection(&p, 2.0),
            Err(CelError::StartNotInSpectrum { .. })
        ));
    }

    #[test]
    fn branch_decompose_constant_diagonal() {
        let grid = Grid::uniform(17);
        let u = diag_unitary(&[0.3, -2.0, 1.1]);
        let p = UnitaryPath::from_samples(grid, vec![u; 17], DEFAULT_TOL).unwrap();
        let (set, perturbed) = branch_decompose(&p, 1e-6).unwrap();
        assert_eq!(set.n_branches(), 3);
        // Constant branches at the diagonal phases (units of π), ascending.
        let expected = [-2.0 / PI, 0.3 / PI, 1.1 / PI];
        for (j, &e) in expected.iter().enumerate() {
            for &v in set.branch(j) {
                assert_abs_diff_eq!(v, e, epsilon = 1e-12);
            }
        }
        for i in 0..17 {
            assert!(set.projection_sum_defect(i) < 1e-12);
        }
        assert!(op_norm(&(perturbed.sample(0) - p.sample(0))) < 1e-12);
    }

    #[test]
    fn branch_decompose_identity_path_needs_perturbation() {
        let grid = Grid::uniform(9);
        let p = UnitaryPath::from_samples(grid, vec![identity(3); 9], DEFAULT_TOL).unwrap();
        let eps = 1e-4;
        let (set, perturbed) = branch_decompose(&p, eps).unwrap();
        for i in 0..9 {
            let d = op_norm(&(perturbed.sample(i) - p.sample(i)));
            assert!(d < eps, "perturbation {d} not below {eps}");
            let det = crate::matcore::determinant(perturbed.sample(i));
            assert!((det - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        // Branches stay within eps of 0 (units of π: eps/π).
        for j in 0..3 {
            for &v in set.branch(j) {
                assert!(v.abs() * PI < eps);
            }
        }
        // Distinct at every grid point.
        for i in 0..9 {
            let mut vals: Vec<f64> = (0..3).map(|j| wrap_phase(set.branch(j)[i] * PI)).collect();
            vals.sort_by(|a, b| a.total_cmp(b));
            assert!(min_circular_gap(&vals) >= 1e-9);
        }
    }

    #[test]
    fn branch_decompose_tracks_crossing() {
        // Two branches crossing at t = 0.5: lifts must pass through, not swap.
        let f: MatFn = Arc::new(|t: f64| {
            mat_exp_i(&diag_herm(&[0.8 * (t - 0.5), -0.8 * (t - 0.5)])).unwrap()
        });
        let p = UnitaryPath::from_fn(Grid::uniform(65), f, DEFAULT_TOL).unwrap();
        let (set, _) = branch_decompose(&p, 1e-7).unwrap();
        // Each lift is continuous (small steps) and the pointwise values
        // reproduce ±0.8(t-0.5). At the exact crossing either continuation
        // is a valid lift, so only multisets are pinned.
        for j in 0..2 {
            for w in set.branch(j).windows(2) {
                assert!((w[1] - w[0]).abs() < 0.05);
            }
        }
        let ends = [set.branch(0).last().unwrap(), set.branch(1).last().unwrap()];
        let mut ends: Vec<f64> = ends.iter().map(|&&x| x).collect();
        ends.sort_by(|a, b| a.total_cmp(b));
        assert_abs_diff_eq!(ends[0], -0.4 / PI, epsilon = 1e-3);
        assert_abs_diff_eq!(ends[1], 0.4 / PI, epsilon = 1e-3);
    }

    #[test]
    fn measure_and_arcs() {
        let mu = spectral_measure(&identity(4)).unwrap();
        assert_eq!(mu.atoms.len(), 1);
        assert_eq!(mu.atoms[0].multiplicity, 4);
        assert_abs_diff_eq!(mu.total(), 1.0, epsilon = 0.0);

        let u = diag_unitary(&[PI / 2.0, PI / 2.0, PI, 0.0]);
        let mu = spectral_measure(&u).unwrap();
        assert_abs_diff_eq!(arc_mass(&mu, PI / 2.0, 0.1).mass, 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(arc_mass(&mu, PI, 0.1).mass, 0.25, epsilon = 0.0);
        assert_abs_diff_eq!(arc_mass(&mu, 0.0, 0.1).mass, 0.25, epsilon = 0.0);
        // Point mass at 0 inside an arc around 0.
        let single = spectral_measure(&identity(2)).unwrap();
        assert_abs_diff_eq!(arc_mass(&single, 0.0, 0.1).mass, 1.0, epsilon = 0.0);
    }

    #[test]
    fn arc_mass_boundary_and_additivity() {
        let u = diag_unitary(&[0.5, -0.5]);
        let mu = spectral_measure(&u).unwrap();
        // Atom exactly on the boundary counts as inside.
        assert_eq!(arc_mass(&mu, 0.0, 0.5).multiplicity, 2);
        // Disjoint arcs partitioning the circle sum to 1.
        let quarters: f64 = [0.0, PI / 2.0, PI, -PI / 2.0]
            .iter()
            .map(|&c| arc_mass(&mu, c, PI / 4.0 - 1e-12).mass)
            .sum();
        assert_abs_diff_eq!(quarters, 1.0, epsilon = 0.0);
    }

    #[test]
    fn measure_merges_across_cut() {
        let u = diag_unitary(&[PI, -PI + 1e-12]);
        let mu = spectral_measure(&u).unwrap();
        assert_eq!(mu.atoms.len(), 1);
        assert_eq!(mu.atoms[0].multiplicity, 2);
    }
}
