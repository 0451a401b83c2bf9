//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("linearization not rank 2 (singular values {0:.3e} and {1:.3e})")]
    RankDeficient(f64, f64),

    #[error("alpha must lie in (0, 0.5], got {0}")]
    AlphaRange(f64),

    #[error("beta must be nonnegative and finite, got {0}")]
    BetaRange(f64),

    #[error("dispersion exponent d must be positive and finite, got {0}")]
    ExponentRange(f64),

    #[error("|F| = {f_norm:.6e} at |p| = {p:.6e} violates the growth sandwich [{lo:.6e}, {hi:.6e}]")]
    SandwichViolation { p: f64, f_norm: f64, lo: f64, hi: f64 },

    #[error("potential support escapes the unit cell ({0})")]
    SupportEscapes(String),

    #[error("potential is not bounded: {0}")]
    Unbounded(String),

    #[error("quadrature did not converge: successive orders differ by {delta:.3e} (tol {tol:.3e})")]
    QuadratureNonConvergence { delta: f64, tol: f64 },

    #[error("no transverse flux: |Phi_perp| = 0, the gap prediction does not apply")]
    NoTransverseFlux,

    #[error("fiber dimension {dim} exceeds the dense-solver guard {guard}")]
    DimensionGuard { dim: usize, guard: usize },

    #[error("basis has no nonzero modes; the Q0 block is empty")]
    EmptyQ0,

    #[error("Q0 block of H - z is singular at z = {z}: min singular value {sigma_min:.3e}")]
    SingularQ0 { z: f64, sigma_min: f64 },

    #[error("z = {z} outside the validity window |z| <= {window:.6}")]
    WindowViolation { z: f64, window: f64 },

    #[error("eigensolver failed at k = ({k1}, {k2}), dim {dim}")]
    EigenFailure { k1: f64, k2: f64, dim: usize },

    #[error("center {center} lies outside the computed spectral window [{min:.6}, {max:.6}]")]
    CenterOutsideSpectrum { center: f64, min: f64, max: f64 },

    #[error("sqrt-potential Fourier data is only available for indicator presets")]
    SqrtChiUnavailable,

    #[error("kernel quadrature did not converge after {levels} refinement levels (worst region: {region})")]
    KernelNonConvergence { levels: u32, region: &'static str },

    #[error("kernel evaluator built for separations up to {max:.3}, asked for {got:.3}")]
    SeparationRange { got: f64, max: f64 },

    #[error("regulator eps must lie in [1e-4, 1], got {0}")]
    EpsRange(f64),

    #[error("iterative Q-block solve failed to reach residual {target:.3e} (got {got:.3e}); coupling too strong")]
    QSolveDiverged { got: f64, target: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate sweep cell (alpha = {0}, beta = {1})")]
    DuplicateCell(f64, f64),
}
