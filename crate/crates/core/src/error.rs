//! Error type shared by the whole crate.

use thiserror::Error;

/// What kind of admissibility guard was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardKind {
    RhoLinf,
    ThetaLinf,
    Vacuum,
    NonFinite,
}

impl std::fmt::Display for GuardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GuardKind::RhoLinf => "rho_Linf",
            GuardKind::ThetaLinf => "theta_Linf",
            GuardKind::Vacuum => "vacuum",
            GuardKind::NonFinite => "nonfinite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("grids do not match")]
    GridMismatch,

    #[error("expected a {expected}-component field, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("Hermitian symmetry violated: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SymmetryViolation { residual: f64, tol: f64 },

    #[error("guard breach ({kind}) at t = {time}: offending value {value}")]
    GuardBreach {
        kind: GuardKind,
        time: f64,
        value: f64,
    },

    #[error("block index {j} outside [-1, {j_max}]")]
    BlockOutOfRange { j: i32, j_max: i32 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
