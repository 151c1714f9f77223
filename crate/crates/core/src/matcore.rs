//! Dense complex matrix kernel: Hermitian/unitary eigendecomposition,
//! matrix exponential and principal logarithm, operator norm, normalized
//! trace.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. All decompositions are
//! backed by nalgebra's Hermitian eigensolver; the unitary eigensolver
//! diagonalizes the Hermitian pair (U+U*)/2, (U-U*)/2i on shared
//! eigenspaces, which stays backward stable through eigenvalue clusters.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CelError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;

/// Default tolerance for Hermitian/unitary defects. Two orders above
/// double-precision accumulation at dimensions up to a few hundred.
pub const DEFAULT_TOL: f64 = 1e-8;

pub const TAU: f64 = std::f64::consts::TAU;
pub const PI: f64 = std::f64::consts::PI;

/// Wrap a phase into (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let mut r = x.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Circular distance between two phases, in [0, pi].
pub fn circ_dist(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Chord length |e^{ia} - e^{ib}| between two points of the unit circle.
pub fn chord(a: f64, b: f64) -> f64 {
    2.0 * (0.5 * wrap_phase(a - b)).sin().abs()
}

/// Arc length subtended by a chord of length `d` (inverse of `chord`).
pub fn chord_to_arc(d: f64) -> f64 {
    2.0 * (0.5 * d.clamp(0.0, 2.0)).asin()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Diagonal unitary with the given eigenphases.
pub fn diag_unitary(phases: &[f64]) -> CMat {
    CMat::from_fn(phases.len(), phases.len(), |i, j| {
        if i == j {
            C64::from_polar(1.0, phases[i])
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Diagonal Hermitian with the given real entries.
pub fn diag_herm(values: &[f64]) -> CMat {
    CMat::from_fn(values.len(), values.len(), |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |m, &s| m.max(s))
}

/// (1/n) * sum of diagonal entries.
pub fn normalized_trace(a: &CMat) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        s += a[(i, i)];
    }
    s / n as f64
}

/// Matrix trace (unnormalized).
pub fn trace(a: &CMat) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        s += a[(i, i)];
    }
    s
}

pub fn determinant(a: &CMat) -> C64 {
    a.determinant()
}

/// Operator-norm distance of A from its own adjoint.
pub fn herm_defect(a: &CMat) -> f64 {
    op_norm(&(a - a.adjoint()))
}

/// Operator-norm distance of A*A from the identity.
pub fn unitary_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    op_norm(&(a.adjoint() * a - identity(n)))
}

/// Both defects at once.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct HermCheckReport {
    pub hermitian_defect: f64,
    pub unitary_defect: f64,
}

pub fn herm_check(a: &CMat) -> HermCheckReport {
    HermCheckReport {
        hermitian_defect: herm_defect(a),
        unitary_defect: unitary_defect(a),
    }
}

fn symmetric_eigen_sorted(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let eig = h
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(CelError::ConvergenceFailure { residual: f64::NAN })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and an orthonormal matrix of
/// eigenvectors (columns). Degenerate eigenvalues are returned as ties;
/// disambiguation is the caller's job.
pub fn herm_eig(h: &CMat, tol: f64) -> Result<(Vec<f64>, CMat)> {
    let defect = herm_defect(h);
    if defect > tol {
        return Err(CelError::NotHermitian { defect, tol });
    }
    let hs = (h + h.adjoint()).map(|z| z * 0.5);
    symmetric_eigen_sorted(&hs)
}

/// Eigendecomposition of a unitary matrix.
///
/// Returns eigenphases in (-pi, pi], ascending, and the matching
/// orthonormal eigenvectors. Internally diagonalizes Re(U); clusters of
/// Re-eigenvalue (the cos-degenerate pairs e^{±iθ}) are split by
/// diagonalizing the compression of Im(U).
pub fn unitary_eigphases(u: &CMat, tol: f64) -> Result<(Vec<f64>, CMat)> {
    let defect = unitary_defect(u);
    if defect > tol {
        return Err(CelError::NotUnitary { defect, tol });
    }
    let n = u.nrows();
    let h1 = (u + u.adjoint()).map(|z| z * 0.5);
    let h2 = (u - u.adjoint()).map(|z| z * C64::new(0.0, -0.5));

    let (vals1, mut vecs) = symmetric_eigen_sorted(&h1)?;

    // Split cos-clusters with the compressed Im part. The cluster
    // tolerance ladder guards against an unlucky grouping.
    for ctol in [1e-7, 1e-5, 1e-3] {
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (vals1[end] - vals1[end - 1]).abs() <= ctol {
                end += 1;
            }
            if end - start > 1 {
                let sub = vecs.columns(start, end - start).into_owned();
                let k = sub.adjoint() * &h2 * &sub;
                let (_, w) = symmetric_eigen_sorted(&k)?;
                let rotated = &sub * &w;
                for (off, col) in (start..end).enumerate() {
                    vecs.set_column(col, &rotated.column(off));
                }
            }
            start = end;
        }
        let (phases, verr) = rayleigh_phases(u, &vecs);
        let bound = 1e2 * f64::EPSILON * (n as f64).max(1.0) * 10.0 + 10.0 * defect;
        if verr <= bound.max(1e-11) {
            return Ok(sort_eigenpairs(phases, vecs));
        }
    }
    let (phases, verr) = rayleigh_phases(u, &vecs);
    let bound = 1e2 * f64::EPSILON * (n as f64).max(1.0) * 10.0 + 10.0 * defect;
    if verr <= bound.max(1e-9) {
        Ok(sort_eigenpairs(phases, vecs))
    } else {
        Err(CelError::ConvergenceFailure { residual: verr })
    }
}

/// Rayleigh-quotient phases for a candidate eigenbasis, plus the
/// reconstruction residual ||U - V diag(e^{iθ}) V*||.
fn rayleigh_phases(u: &CMat, vecs: &CMat) -> (Vec<f64>, f64) {
    let n = u.nrows();
    let uv = u * vecs;
    let mut phases = Vec::with_capacity(n);
    for j in 0..n {
        let v = vecs.column(j);
        let mut lam = C64::new(0.0, 0.0);
        for i in 0..n {
            lam += v[i].conj() * uv[(i, j)];
        }
        let mut th = lam.arg();
        if th <= -PI {
            th = PI;
        }
        phases.push(th);
    }
    let recon = vecs * diag_unitary(&phases) * vecs.adjoint();
    let err = op_norm(&(u - recon));
    (phases, err)
}

fn sort_eigenpairs(phases: Vec<f64>, vecs: CMat) -> (Vec<f64>, CMat) {
    let n = phases.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| phases[i]).collect();
    let mut v = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &vecs.column(i));
    }
    (sorted, v)
}

/// exp(iH) for Hermitian H.
pub fn mat_exp_i(h: &CMat) -> Result<CMat> {
    let (vals, vecs) = herm_eig(h, DEFAULT_TOL)?;
    let phases: Vec<f64> = vals;
    Ok(&vecs * diag_unitary(&phases) * vecs.adjoint())
}

/// exp(iH) with an explicit defect tolerance.
pub fn mat_exp_i_tol(h: &CMat, tol: f64) -> Result<CMat> {
    let (vals, vecs) = herm_eig(h, tol)?;
    Ok(&vecs * diag_unitary(&vals) * vecs.adjoint())
}

/// Principal logarithm of a unitary: the Hermitian H with U = exp(iH)
/// and spectrum in (-pi, pi). Fails with `BranchCutHit` when an
/// eigenphase comes within `gap_tol` of the cut at -1.
pub fn principal_log_unitary(u: &CMat, gap_tol: f64) -> Result<CMat> {
    let (phases, vecs) = unitary_eigphases(u, DEFAULT_TOL)?;
    for &th in &phases {
        if PI - th.abs() < gap_tol {
            return Err(CelError::BranchCutHit {
                gap: PI - th.abs(),
            });
        }
    }
    Ok(&vecs * diag_herm(&phases) * vecs.adjoint())
}
