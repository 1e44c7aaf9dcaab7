use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("eigenvalue {eigenvalue} lies outside the function domain")]
    DomainError { eigenvalue: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eig})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("derivative order {0} out of range 0..=4")]
    OrderOutOfRange(usize),
    #[error("matrix argument entry {value} outside [-1.2, 1.2]")]
    ArgumentOutOfRange { value: f64 },
    #[error("truncation tail bound {bound:e} exceeds tolerance {tol:e}")]
    InvalidTruncation { bound: f64, tol: f64 },
    #[error("D_{level} is not positive definite (min eigenvalue {min_eig})")]
    SingularD { level: usize, min_eig: f64 },
    #[error("Lambda_{level} is not positive definite (min eigenvalue {min_eig})")]
    SingularLambda { level: usize, min_eig: f64 },
    #[error("monotonicity violated: {0}")]
    MonotonicityViolation(String),
    #[error("degenerate knots at level {level}: spacing {gap:e}")]
    DegenerateKnots { level: usize, gap: f64 },
    #[error("T_hat = {t_hat} outside ({t_x}, {m})")]
    InvalidThat { t_hat: f64, t_x: f64, m: f64 },
    #[error("path matrix singular at t = {t} (min eigenvalue {min_eig})")]
    SingularPath { t: f64, min_eig: f64 },
    #[error("triple infeasible at t = {t} (min eigenvalue {min_eig})")]
    InfeasibleTriple { t: f64, min_eig: f64 },
    #[error("no feasible starting point found in {restarts} restarts")]
    NoFeasibleStart { restarts: usize },
    #[error("density denominator {denominator:e} underflows at u = {u}")]
    DegenerateDerivative { u: f64, denominator: f64 },
    #[error("beta {beta} is not above the threshold {threshold}")]
    BetaTooSmall { beta: f64, threshold: f64 },
    #[error("root not bracketed: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    RootNotBracketed { f_lo: f64, f_hi: f64 },
    #[error("coupling storage needs {bytes} bytes, budget is {budget}")]
    MemoryBudgetExceeded { bytes: u128, budget: u128 },
    #[error("constraint matrix is not positive definite (min eigenvalue {min_eig})")]
    NonPDConstraint { min_eig: f64 },
    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Singularities, infeasibility and failed searches, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DomainError { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::SingularD { .. }
                | Error::SingularLambda { .. }
                | Error::SingularPath { .. }
                | Error::InfeasibleTriple { .. }
                | Error::NoFeasibleStart { .. }
                | Error::DegenerateDerivative { .. }
                | Error::RootNotBracketed { .. }
                | Error::IllConditionedFit(_)
        )
    }
}
