use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed problem input: dimensions, symmetry, signs.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("covariance not symmetric at ({row},{col}): {upper} vs {lower}")]
    Asymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },

    /// A closed-form transform was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("normal covariance matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("cholesky factorization broke down at pivot {pivot} (value {value:e})")]
    CholeskyBreakdown { pivot: usize, value: f64 },

    #[error("quadrature over {dim} dimensions needs 12^{dim} terms, above the budget of {budget}")]
    Capacity { dim: usize, budget: u64 },

    #[error("singular jacobian after {iterations} iterations at mu={mu}, sigma={sigma}")]
    SingularJacobian {
        iterations: usize,
        mu: f64,
        sigma: f64,
    },

    #[error("newton did not converge in {iterations} iterations (best mu={mu}, sigma={sigma}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        mu: f64,
        sigma: f64,
        residual: f64,
    },

    #[error("t-set optimization failed: {0}")]
    Optimization(String),
}

impl Error {
    /// Pipeline stage the error belongs to, used in user-facing messages.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Validation(_) | Error::Asymmetric { .. } => "validation",
            Error::Domain(_) => "parameter conversion",
            Error::NotPositiveDefinite { .. } => "positive-definiteness check",
            Error::CholeskyBreakdown { .. } => "cholesky factorization",
            Error::Capacity { .. } => "mgf quadrature",
            Error::SingularJacobian { .. } | Error::NoConvergence { .. } => "newton solve",
            Error::Optimization(_) => "t-set optimization",
        }
    }

    /// True for failures of the numerics on otherwise well-formed input.
    /// Inputs that describe no valid joint lognormal (domain errors, non-PD
    /// normal covariance) count as input errors.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Validation(_)
                | Error::Asymmetric { .. }
                | Error::Domain(_)
                | Error::NotPositiveDefinite { .. }
        )
    }
}
