use thiserror::Error;

/// Errors surfaced by the analytic pipeline and the simulation oracle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("stability violated: E(B/c - A) = {ey} >= 0")]
    StabilityViolation { ey: f64 },

    #[error("root finder did not converge (degree {degree}, residual {residual:.3e})")]
    NonConvergence { degree: usize, residual: f64 },

    #[error("singular matrix in phase-type evaluation")]
    SingularMatrix,

    #[error(
        "Rouche count mismatch: {context}; plus-side zeros of g-f: {gmf_plus}, of g: {g_plus}"
    )]
    RoucheCountMismatch {
        context: String,
        gmf_plus: usize,
        g_plus: usize,
    },

    #[error("transform has a pole with Re >= 0 at {0}")]
    PoleOnAxis(num_complex::Complex64),

    #[error("duality violated at u = {u}: |Takacs - workload| = {gap:.3e}")]
    DualityViolation { u: f64, gap: f64 },

    #[error("convex ordering violated at t = {t}: {lhs} > {rhs} ({which})")]
    OrderingViolation {
        t: f64,
        lhs: f64,
        rhs: f64,
        which: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
