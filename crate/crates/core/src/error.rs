//! Crate-wide error type. Every fallible operation returns [`Result`];
//! numerical non-convergence is always an `Err`, never a silent bad value.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Geometry or parameter set violates a documented invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Conjugate-gradient solve did not reach the residual tolerance.
    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { iterations: usize, residual: f64 },

    /// A potential field was handed on with an out-of-tolerance residual.
    #[error("unconverged potential field: residual {0:.3e}")]
    UnconvergedField(f64),

    /// Curve solve failed at a specific sample.
    #[error("capacitance curve failed at sample {index} (x_m = {x_m:.6e} m): {source}")]
    CurveSample {
        index: usize,
        x_m: f64,
        #[source]
        source: Box<Error>,
    },

    /// Query outside the sampled curve range.
    #[error("x = {x:.6e} m outside sampled range [{lo:.6e}, {hi:.6e}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    /// Bias equilibrium iteration hit the cap without converging
    /// (pull-in or bistable configuration).
    #[error("equilibrium iteration did not converge after {iterations} steps (last X = {last_x:.6e} m); \
             likely pull-in or bistability")]
    PullIn { iterations: usize, last_x: f64 },

    /// Coupling formula radicand went negative (X beyond x_e with positive zeta).
    #[error("coupling radicand negative: displacement {displacement:.6e} m, zeta {zeta:.6e} m")]
    NegativeRadicand { displacement: f64, zeta: f64 },

    /// Drift matrix is not Hurwitz; no steady state exists.
    #[error("drift matrix not Hurwitz (max Re eigenvalue {0:.3e} rad/s); no steady state")]
    NotHurwitz(f64),

    /// Closed-form occupation requested outside its domain.
    #[error("formula domain error: {0}")]
    FormulaDomain(String),

    /// ODE integrator rejected the requested grid or failed to meet tolerance.
    #[error("ode integration failed: {0}")]
    OdeFailure(String),

    /// Monte-Carlo configuration rejected.
    #[error("homodyne simulation rejected: {0}")]
    HomodyneConfig(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Exit-code class used by the CLI: validation errors (1) versus
    /// numerical failures (2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::OutOfRange { .. }
                | Error::FormulaDomain(_)
                | Error::HomodyneConfig(_)
        )
    }
}
