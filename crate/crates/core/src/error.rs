use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("network graph is disconnected")]
    Disconnected,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("operation requires a lossless network (pass the B-only override to force it)")]
    LossyNetwork,
    #[error("singular matrix (pivot {pivot:e} below threshold)")]
    SingularMatrix { pivot: f64 },
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenNoConvergence { iterations: usize },
    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:e})")]
    PowerFlowNonConvergence { iterations: usize, mismatch: f64 },
    #[error("singular power-flow Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("structural kernel residual {residual:e} exceeds tolerance")]
    StructuralKernel { residual: f64 },
    #[error("controller synthesis failed: {0}")]
    Synthesis(String),
    #[error("storage function not positive definite: {0}")]
    StorageIndefinite(String),
    #[error("state left the device domain: {0}")]
    DomainExit(String),
    #[error("state left the domain at t = {time} ({detail})")]
    DomainExitAt { time: f64, detail: String },
    #[error("inconsistent equilibrium: residual {residual:e}")]
    InconsistentEquilibrium { residual: f64 },
    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },
    #[error("Lyapunov precondition violated: {0}")]
    LyapunovPrecondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
