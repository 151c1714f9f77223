//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by the matrix kernel, path algebra, and certificate
/// machinery.
#[derive(Debug, Error)]
pub enum CelError {
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("matrix is not unitary: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("eigensolver failed to converge (residual {residual:.3e})")]
    ConvergenceFailure { residual: f64 },

    #[error("eigenphase within {gap:.3e} of the branch cut at -1 (principal log undefined)")]
    BranchCutHit { gap: f64 },

    #[error("log hypothesis violated: |uw*v*w - 1| = {norm:.6} is not < 2")]
    LogUndefined { norm: f64 },

    #[error("connecting path endpoints do not match (start defect {start:.3e}, end defect {end:.3e})")]
    EndpointMismatch { start: f64, end: f64 },

    #[error("determinant phase jump of {jump:.4} rad at grid step {index} (grid too coarse)")]
    AliasedPhase { index: usize, jump: f64 },

    #[error("start phase {phase:.6} is not in the spectrum at t=0 (nearest distance {dist:.3e})")]
    StartNotInSpectrum { phase: f64, dist: f64 },

    #[error("could not reach distinct eigenvalues with perturbation < {eps:.3e} after {attempts} attempts")]
    PerturbationFailed { eps: f64, attempts: usize },

    #[error("path does not have pointwise determinant one (|det - 1| = {dev:.3e} at t = {t:.6})")]
    NotDetOne { t: f64, dev: f64 },

    #[error("branch phases do not sum to an integer (sum = {sum:.9})")]
    NonIntegerSum { sum: f64 },

    #[error("branch phases contain duplicates (entries {i} and {j} differ by {diff:.3e})")]
    DuplicateEntries { i: usize, j: usize, diff: f64 },

    #[error("Lipschitz bound violated: ratio {ratio:.9} at (t={t:.6}, s1={s1:.6}, s2={s2:.6})")]
    BoundViolated { ratio: f64, t: f64, s1: f64, s2: f64 },

    #[error("band/rest gap {gap:.3e} below minimum {min_gap:.3e} at t = {t:.6}")]
    GapViolated { t: f64, gap: f64, min_gap: f64 },

    #[error("expected exactly one eigenphase outside the rest arc at t = {t:.6}, found {count}")]
    RankNotOne { t: f64, count: usize },

    #[error("band separation lost at stage {stage} (partial bound {partial:.6})")]
    BandLost { stage: usize, partial: f64 },

    #[error("no single integer L fits all trace windows (first empty intersection at t = {t:.6})")]
    NoConsistentL { t: f64 },

    #[error("arc classification unresolved: {what}")]
    RegimeUnresolved { what: String },

    #[error("multiplicity {mult} is below the {required} point evaluations of the stage")]
    InsufficientMultiplicity { mult: usize, required: usize },

    #[error("defect phases have product {prod:.9} != 1")]
    InvalidDefect { prod: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("branch continuation step of {step:.4} turns at grid index {index} exceeds 1/4 (refine the grid)")]
    StepTooLarge { index: usize, step: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CelError>;
