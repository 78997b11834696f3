//! Solvability, determinacy and the Nevanlinna-type parametrization of the
//! matrix Hamburger moment problem.
//!
//! The pipeline runs on finite sections of the block Hankel matrix:
//!
//! 1. [`MomentSequence`] holds `S_0, …, S_{L-1}` and builds block Hankel
//!    matrices ([`moments`]).
//! 2. [`embed`] factors an `M×M` section into coordinates of `x_0, …, x_{M-1}`
//!    ([`gram`]).
//! 3. [`orthogonalize`] builds the Cayley-transform bases and defect numbers,
//!    and [`classify_determinacy`] decides determinacy from Parseval residuals
//!    ([`cayley`]).
//! 4. [`structure_matrices`] and [`coefficients`] assemble the matrices
//!    `𝐀, 𝐁, 𝐂, 𝐃` ([`coeffs`]).
//! 5. [`evaluate_transform`] applies the linear fractional transformation to a
//!    Schur parameter and [`convergence_driver`] grows the section until the
//!    transform stabilizes ([`transform`]).
//!
//! Heavy lifting (embedding, Gram–Schmidt) runs in MPFR arithmetic at the
//! sequence's precision; the small structure matrices are rounded to `f64`.
//!
//! ```
//! use hamburger::{classify_determinacy, DeterminacyPolicy, MomentSequence, Verdict};
//!
//! // Two atoms at ±1 with weight 1/2 each.
//! let seq = MomentSequence::from_real_scalars(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 53).unwrap();
//! let verdict = classify_determinacy(&seq, &DeterminacyPolicy::default()).unwrap();
//! assert_eq!(verdict.verdict, Verdict::Determinate);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cayley;
pub mod coeffs;
pub mod gram;
pub mod moments;
pub mod mp;
pub mod oracle;
pub mod transform;

pub use cayley::{
    classify_determinacy, determinacy_residual, orthogonalize, unique_solution_atoms, AtomicMeasure,
    CayleyBasis, DeterminacyPolicy, DeterminacyVerdict, SectionEvidence, Side, Verdict,
};
pub use coeffs::{
    coefficients, phi_delta, resolvent_section, structure_matrices, NevanlinnaCoefficients,
    StructureMatrices, DEFAULT_POLE_EPSILON,
};
pub use gram::{embed, EmbedOptions, GramModel, ModelVector, Sign, VectorTag};
pub use moments::{BlockHankel, MomentSequence, SolvabilityReport, SolvabilityVerdict};
pub use mp::{Complex, MpMatrix};
pub use num_complex::Complex64;
pub use transform::{
    convergence_driver, evaluate_transform, herglotz_scan, stieltjes_invert, ConvergencePolicy,
    ConvergedTransform, HerglotzReport, Inversion, NevanlinnaSection, SchurParameter, SectionOptions,
    TransformSample,
};

/// Complex `f64` matrix used for the small structure matrices.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("insufficient moments: {0}")]
    InsufficientMoments(String),
    #[error("moment S_{index} is not Hermitian (defect {defect:e})")]
    NonHermitian { index: usize, defect: f64 },
    #[error("invalid moment sequence: {0}")]
    InvalidSequence(String),
    #[error("section of size {size} is indefinite (eigenvalue {eigenvalue:e})")]
    IndefiniteSection { size: usize, eigenvalue: f64 },
    #[error("model is empty (all moments vanish on the section)")]
    EmptyModel,
    #[error("moment problem is determinate on this section (defect numbers {delta}, {omega})")]
    DeterminateInput { delta: usize, omega: usize },
    #[error("not finite rank: {0}")]
    NotFiniteRank(String),
    #[error("z = {re}{im:+}i is within the excluded disc around i")]
    ExcludedPoint { re: f64, im: f64 },
    #[error("z = {re}{im:+}i is not in the open upper half-plane")]
    LowerHalfPlane { re: f64, im: f64 },
    #[error("I + C(z)F(z) is numerically singular (condition {condition:e})")]
    LftSingular { condition: f64 },
    #[error("Schur parameter is not a contraction (norm {norm})")]
    ContractionViolated { norm: f64 },
    #[error("transform did not converge; Cauchy gaps {gaps:?}")]
    NoConvergence { gaps: Vec<(usize, f64)> },
    #[error("z = {0} lies on the support of the measure")]
    PoleOnSupport(f64),
    #[error("quadrature failed to converge on [{a}, {b}]")]
    QuadratureNonconvergent { a: f64, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Singular(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable cause code.
    pub fn cause(&self) -> &'static str {
        match self {
            Error::IndexOutOfRange(_) => "index-out-of-range",
            Error::InsufficientMoments(_) => "insufficient-moments",
            Error::NonHermitian { .. } => "non-hermitian-input",
            Error::InvalidSequence(_) => "invalid-sequence",
            Error::IndefiniteSection { .. } => "indefinite-section",
            Error::EmptyModel => "empty-model",
            Error::DeterminateInput { .. } => "determinate-input",
            Error::NotFiniteRank(_) => "not-finite-rank",
            Error::ExcludedPoint { .. } => "excluded-point",
            Error::LowerHalfPlane { .. } => "lower-half-plane",
            Error::LftSingular { .. } => "lft-singular",
            Error::ContractionViolated { .. } => "contraction-violated",
            Error::NoConvergence { .. } => "no-convergence",
            Error::PoleOnSupport(_) => "pole-on-support",
            Error::QuadratureNonconvergent { .. } => "quadrature-nonconvergent",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Singular(_) => "numerical-failure",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "format",
        }
    }
}
