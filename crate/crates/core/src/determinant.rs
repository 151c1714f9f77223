//! Trace-winding determinant of unitary paths, rotation numbers, pointwise
//! determinant winding, and membership in the determinant-one subgroup.
//!
//! Conventions: the determinant of a path carries the 1/2πi prefactor and
//! the normalized trace, so the path t -> e^{2πit} in M_1 has determinant
//! exactly 1 and all values are canonical modulo the trace lattice (1/n)Z.
//! Segment contributions are telescoping principal logarithms, which are
//! exact on geodesic segments and stable away from the branch cut.

use rayon::prelude::*;

use crate::error::{CelError, Result};
use crate::matcore::{
    determinant as mat_det, mat_exp_i, normalized_trace, op_norm, principal_log_unitary,
    wrap_phase, CMat, PI, TAU,
};
use crate::pathalg::{Grid, MatFn, UnitaryPath};
use std::sync::Arc;

/// The subgroup (1/n)Z of the reals; all winding statements are canonical
/// modulo this lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TraceLattice {
    pub n: usize,
}

impl TraceLattice {
    pub fn modulus(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Distance from x to the nearest lattice point.
    pub fn dist(&self, x: f64) -> f64 {
        let n = self.n as f64;
        (x * n - (x * n).round()).abs() / n
    }

    /// Representative of x in [0, 1/n).
    pub fn residue(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let r = (x * n).rem_euclid(1.0);
        // Guard the wrap at 1.0 - epsilon.
        if r >= 1.0 {
            0.0
        } else {
            r / n
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DetReport {
    pub value: f64,
    pub lattice: TraceLattice,
    pub residue: f64,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RotationNumber {
    pub value: f64,
    pub lattice: TraceLattice,
}

/// Trace winding of a unitary path: (1/2πi) ∫ tr(u'(t) u(t)*) dt computed
/// as a telescoping sum of principal logarithms of U_i* U_{i+1}.
///
/// For closed paths the value times n is an integer (within numerics).
/// Fails with `BranchCutHit` when a grid step strays too close to the cut;
/// refine the path and retry.
pub fn dls_determinant(p: &UnitaryPath) -> Result<DetReport> {
    let n = p.n();
    let traces: Vec<f64> = p
        .samples()
        .par_windows(2)
        .map(|w| {
            let step = w[0].adjoint() * &w[1];
            let h = principal_log_unitary(&step, 1e-9)?;
            Ok(normalized_trace(&h).re)
        })
        .collect::<Result<_>>()?;
    let value = traces.iter().sum::<f64>() / TAU;
    let lattice = TraceLattice { n };
    Ok(DetReport {
        value,
        lattice,
        residue: lattice.residue(value),
    })
}

/// Rotation number of the ordered pair (u, v) along a connecting path
/// running from u to v. Canonical only modulo (1/n)Z.
pub fn rotation_number(u: &CMat, v: &CMat, connecting: &UnitaryPath) -> Result<RotationNumber> {
    let start = op_norm(&(connecting.first() - u));
    let end = op_norm(&(connecting.last() - v));
    let tol = 1e-7;
    if start > tol || end > tol {
        return Err(CelError::EndpointMismatch { start, end });
    }
    let det = dls_determinant(connecting)?;
    Ok(RotationNumber {
        value: det.value,
        lattice: det.lattice,
    })
}

/// Phase-unwrapped winding of the pointwise scalar determinant, in turns.
/// Requires |det| = 1 along the path and successive phase jumps < π.
pub fn det_winding(p: &UnitaryPath) -> Result<f64> {
    let dets: Vec<_> = p.samples().par_iter().map(mat_det).collect();
    for (i, d) in dets.iter().enumerate() {
        if (d.norm() - 1.0).abs() > 1e-6 {
            return Err(CelError::NotUnitary {
                defect: (d.norm() - 1.0).abs(),
                tol: 1e-6,
            });
        }
        let _ = i;
    }
    let mut total = 0.0;
    for (i, w) in dets.windows(2).enumerate() {
        let jump = wrap_phase(w[1].arg() - w[0].arg());
        if jump.abs() >= PI - 1e-12 {
            return Err(CelError::AliasedPhase {
                index: i,
                jump: jump.abs(),
            });
        }
        total += jump;
    }
    Ok(total / TAU)
}

/// Pointwise determinant-one report: the finite-dimensional membership
/// criterion for the closed commutator subgroup of C([0,1], M_n).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CuReport {
    pub is_member: bool,
    pub max_deviation: f64,
    pub worst_t: f64,
}

pub fn cu_membership(p: &UnitaryPath, tol: f64) -> CuReport {
    let devs: Vec<f64> = p
        .samples()
        .par_iter()
        .map(|u| {
            let d = mat_det(u);
            (d - num_complex::Complex64::new(1.0, 0.0)).norm()
        })
        .collect();
    let (worst_idx, max_deviation) = devs
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |acc, (i, &d)| {
            if d > acc.1 {
                (i, d)
            } else {
                acc
            }
        });
    CuReport {
        is_member: max_deviation <= tol,
        max_deviation,
        worst_t: p.grid().points()[worst_idx],
    }
}

/// Geodesic connecting path from u to v: t -> u exp(t i log(u* v)).
pub fn geodesic_path(u: &CMat, v: &CMat, grid: Grid) -> Result<UnitaryPath> {
    let h = principal_log_unitary(&(u.adjoint() * v), 1e-9)?;
    let u0 = u.clone();
    let f: MatFn = Arc::new(move |t: f64| {
        let part = mat_exp_i(&h.map(|z| z * t)).expect("hermitian by construction");
        &u0 * part
    });
    UnitaryPath::from_fn(grid, f, crate::matcore::DEFAULT_TOL)
}

/// Concatenation of two paths (reparametrized to half speed each).
/// Endpoints must match: p1(1) = p2(0).
pub fn concat(p1: &UnitaryPath, p2: &UnitaryPath) -> Result<UnitaryPath> {
    let joint = op_norm(&(p1.last() - p2.first()));
    if joint > 1e-7 {
        return Err(CelError::EndpointMismatch {
            start: 0.0,
            end: joint,
        });
    }
    let mut pts: Vec<f64> = p1.grid().points().iter().map(|&t| t / 2.0).collect();
    let mut samples: Vec<CMat> = p1.samples().to_vec();
    for (i, &t) in p2.grid().points().iter().enumerate() {
        if i == 0 {
            continue;
        }
        pts.push(0.5 + t / 2.0);
        samples.push(p2.sample(i).clone());
    }
    UnitaryPath::from_samples(Grid::from_points(pts)?, samples, crate::matcore::DEFAULT_TOL)
}

/// Residual of the conjugation identity: distance from
/// R_{u,v} - (1/2πi) tr log(u w* v* w) to the lattice (1/n)Z.
///
/// Requires ||u w* v* w - 1|| < 2 so the principal log exists.
pub fn check_triv_identity(
    u: &CMat,
    v: &CMat,
    w: &CMat,
    connecting: &UnitaryPath,
) -> Result<f64> {
    let x = u * w.adjoint() * v.adjoint() * w;
    let dist = op_norm(&(&x - crate::matcore::identity(u.nrows())));
    if dist >= 2.0 - 1e-9 {
        return Err(CelError::LogUndefined { norm: dist });
    }
    let h = principal_log_unitary(&x, 1e-9)?;
    let correction = normalized_trace(&h).re / TAU;
    let rot = rotation_number(u, v, connecting)?;
    Ok(rot.lattice.dist(rot.value - correction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag_unitary, identity, C64, DEFAULT_TOL};
    use crate::pathalg::{Grid, MatFn};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn scalar_path(points: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> UnitaryPath {
        let g: MatFn = Arc::new(move |t: f64| {
            CMat::from_fn(1, 1, |_, _| C64::from_polar(1.0, f(t)))
        });
        UnitaryPath::from_fn(Grid::uniform(points), g, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn constant_path_det_zero() {
        let grid = Grid::uniform(9);
        let p = UnitaryPath::from_samples(grid, vec![identity(3); 9], DEFAULT_TOL).unwrap();
        let rep = dls_determinant(&p).unwrap();
        assert_eq!(rep.value, 0.0);
        assert_eq!(rep.residue, 0.0);
        assert_eq!(det_winding(&p).unwrap(), 0.0);
    }

    #[test]
    fn circle_winding_one() {
        let p = scalar_path(257, |t| TAU * t);
        let rep = dls_determinant(&p).unwrap();
        assert_abs_diff_eq!(rep.value, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(det_winding(&p).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn diag_phase_winding() {
        // u(t) = diag(e^{2πit}, 1): det winds once.
        let f: MatFn = Arc::new(|t: f64| diag_unitary(&[TAU * t, 0.0]));
        let p = UnitaryPath::from_fn(Grid::uniform(257), f, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(det_winding(&p).unwrap(), 1.0, epsilon = 1e-10);
        // winding equals n * determinant
        let rep = dls_determinant(&p).unwrap();
        assert_abs_diff_eq!(det_winding(&p).unwrap(), 2.0 * rep.value, epsilon = 1e-8);
    }

    #[test]
    fn rotation_number_scalar_closed_form() {
        // Path e^{iθ(1-t)} from e^{iθ} to 1 has rotation number -θ/2π.
        let theta = 0.8_f64;
        let p = scalar_path(129, move |t| theta * (1.0 - t));
        let u = CMat::from_fn(1, 1, |_, _| C64::from_polar(1.0, theta));
        let v = identity(1);
        let rot = rotation_number(&u, &v, &p).unwrap();
        assert_abs_diff_eq!(rot.value, -theta / TAU, epsilon = 1e-10);
    }

    #[test]
    fn rotation_number_checks_endpoints() {
        let p = scalar_path(65, |t| 0.3 * t);
        let u = identity(1);
        let bad = CMat::from_fn(1, 1, |_, _| C64::from_polar(1.0, 2.0));
        assert!(matches!(
            rotation_number(&u, &bad, &p),
            Err(CelError::EndpointMismatch { .. })
        ));
    }

    #[test]
    fn cu_membership_cases() {
        let grid = Grid::uniform(17);
        let id_path =
            UnitaryPath::from_samples(grid.clone(), vec![identity(2); 17], DEFAULT_TOL).unwrap();
        assert!(cu_membership(&id_path, 1e-10).is_member);

        let f: MatFn = Arc::new(|t: f64| diag_unitary(&[PI * t, 0.0]));
        let p = UnitaryPath::from_fn(grid, f, DEFAULT_TOL).unwrap();
        let rep = cu_membership(&p, 1e-10);
        assert!(!rep.is_member);
        assert!(rep.max_deviation > 1.0);
    }

    #[test]
    fn triv_identity_trivial_case() {
        let grid = Grid::uniform(17);
        let u = diag_unitary(&[0.4, -0.4]);
        let p = UnitaryPath::from_samples(grid, vec![u.clone(); 17], DEFAULT_TOL).unwrap();
        let res = check_triv_identity(&u, &u, &identity(2), &p).unwrap();
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn triv_identity_diagonal_geodesic() {
        // u = diag(e^{i0.4}, e^{-i0.4}), v = w = 1: R_{u,v} along a
        // geodesic equals tr log(u)/2π exactly, so the residual vanishes.
        let u = diag_unitary(&[0.4, -0.4]);
        let v = identity(2);
        let p = geodesic_path(&u, &v, Grid::uniform(129)).unwrap();
        let res = check_triv_identity(&u, &v, &identity(2), &p).unwrap();
        assert!(res <= 1e-6, "residual {res}");
    }

    #[test]
    fn concat_additivity() {
        let p1 = scalar_path(65, |t| 1.3 * t);
        let p2 = {
            let g: MatFn = Arc::new(move |t: f64| {
                CMat::from_fn(1, 1, |_, _| C64::from_polar(1.0, 1.3 + 0.9 * t))
            });
            UnitaryPath::from_fn(Grid::uniform(65), g, DEFAULT_TOL).unwrap()
        };
        let joined = concat(&p1, &p2).unwrap();
        let d1 = dls_determinant(&p1).unwrap().value;
        let d2 = dls_determinant(&p2).unwrap().value;
        let dj = dls_determinant(&joined).unwrap().value;
        assert_abs_diff_eq!(dj, d1 + d2, epsilon = 1e-8);
    }

    #[test]
    fn lattice_ops() {
        let l = TraceLattice { n: 4 };
        assert_abs_diff_eq!(l.modulus(), 0.25, epsilon = 0.0);
        assert_abs_diff_eq!(l.dist(0.26), 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(l.residue(1.3), 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(l.dist(-0.01), 0.01, epsilon = 1e-12);
    }
}
