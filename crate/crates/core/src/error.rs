use thiserror::Error;

/// Errors surfaced by basis construction, field algebra and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution too small: {given} nodes, need at least {needed} ({context})")]
    ResolutionTooSmall {
        given: usize,
        needed: usize,
        context: &'static str,
    },

    #[error("unsupported manifold `{0}`")]
    UnsupportedManifold(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("basis cap {cap} is below the cutoff N = {n}; modes in ({cap}, {n}] would be silently aliased")]
    CapBelowCutoff { cap: f64, n: f64 },

    #[error("grid oversampling factor {have} cannot dealias a degree-{degree} integrand (need {need})")]
    AliasingGuard {
        have: usize,
        need: usize,
        degree: usize,
    },

    #[error("kernel would need {requested} grid-pair entries, above the configured cap {cap}")]
    KernelTooLarge { requested: usize, cap: usize },

    #[error("invalid time mesh: {0}")]
    InvalidTimeMesh(String),

    #[error("remainder left the contraction regime: |w|_H1 = {norm:.3e} > {guard:.3e} at t = {t}")]
    BlowupGuard { t: f64, norm: f64, guard: f64 },

    #[error("effective sample size {ess:.1} fell below the floor {floor:.1} (N too large for importance sampling)")]
    EssTooLow { ess: f64, floor: f64 },

    #[error("importance weight is not finite (G = {potential}); misconfigured ensemble")]
    InvalidWeight { potential: f64 },

    #[error("nonlinearity degree k = {0} must be odd for the defocusing Gibbs experiments")]
    KNotOdd(usize),

    #[error("fields live on different bases")]
    BasisMismatch,

    #[error("empty basis")]
    EmptyBasis,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
