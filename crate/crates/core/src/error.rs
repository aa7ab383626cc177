use thiserror::Error;

/// Numerical-domain failures raised by the solver modules.
///
/// Variant names double as the error names reported by the command-line tool.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("NonSquare: expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),

    #[error("NonFinite: {0} contains NaN or Inf")]
    NonFinite(&'static str),

    #[error("NotHermitian: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("NegativeEigenvalue: eigenvalue {value:.3e} below -{tol:.3e}")]
    NegativeEigenvalue { value: f64, tol: f64 },

    #[error("SingularMatrix: {0}")]
    SingularMatrix(&'static str),

    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),

    #[error("IdentityViolated: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    IdentityViolated { residual: f64, tol: f64 },

    #[error("SigmaNotPositive: smallest eigenvalue {min_eigenvalue:.3e}")]
    SigmaNotPositive { min_eigenvalue: f64 },

    #[error("ZNearSpectrum: smallest singular value {sigma_min:.3e} of zI - A below cap {cap:.3e}")]
    ZNearSpectrum { sigma_min: f64, cap: f64 },

    #[error("SingularNormalization: w(0, z) is numerically singular")]
    SingularNormalization,

    #[error("BlockNotPositive: -A22 is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    BlockNotPositive { min_eigenvalue: f64 },

    #[error("OmegaNotContractive: norm {norm:.6} exceeds 1")]
    OmegaNotContractive { norm: f64 },

    #[error("NotUpperHalfPlane: Im z = {0} must be positive")]
    NotUpperHalfPlane(f64),

    #[error("PoleInUpperHalfPlane: eigenvalue {re:.6} + {im:.6}i")]
    PoleInUpperHalfPlane { re: f64, im: f64 },

    #[error("ExpansiveOnRealAxis: norm {norm:.6} at t = {t:.6}")]
    ExpansiveOnRealAxis { t: f64, norm: f64 },

    #[error("NoHermitianSolution: {0}")]
    NoHermitianSolution(String),

    #[error("ResidualTooLarge: Riccati residual {residual:.3e} exceeds {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("ConsequenceViolated: eigenvalue {lambda:.6} fails the bound-state conditions (residual {residual:.3e})")]
    ConsequenceViolated { lambda: f64, residual: f64 },
}

impl Error {
    /// Short identifier of the variant, e.g. `ZNearSpectrum`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonSquare { .. } => "NonSquare",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFinite(_) => "NonFinite",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NegativeEigenvalue { .. } => "NegativeEigenvalue",
            Error::SingularMatrix(_) => "SingularMatrix",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::IdentityViolated { .. } => "IdentityViolated",
            Error::SigmaNotPositive { .. } => "SigmaNotPositive",
            Error::ZNearSpectrum { .. } => "ZNearSpectrum",
            Error::SingularNormalization => "SingularNormalization",
            Error::BlockNotPositive { .. } => "BlockNotPositive",
            Error::OmegaNotContractive { .. } => "OmegaNotContractive",
            Error::NotUpperHalfPlane(_) => "NotUpperHalfPlane",
            Error::PoleInUpperHalfPlane { .. } => "PoleInUpperHalfPlane",
            Error::ExpansiveOnRealAxis { .. } => "ExpansiveOnRealAxis",
            Error::NoHermitianSolution(_) => "NoHermitianSolution",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::ConsequenceViolated { .. } => "ConsequenceViolated",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
