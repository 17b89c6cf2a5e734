//! Solves the stiff linear initial-value problem `u' = λu, u(0) = u0` with
//! small feedforward neural networks.
//!
//! Two cost constructions are provided: the trial solution method (TSM),
//! where the ansatz `u_t = u0 + x·N(x,p)` satisfies the initial condition by
//! construction, and the modified trial solution method (mTSM), where the
//! network output is the candidate solution and the initial condition enters
//! the cost as a penalty term. All gradients are hand-derived (no autodiff
//! framework), optimisation is plain momentum backpropagation or Adam, and
//! every run is seed-deterministic so parameter studies reproduce bit for bit.
//!
//! The crate splits into:
//! - [`net`]: the network, its output derivative w.r.t. the input, and
//!   gradients of both w.r.t. every weight,
//! - [`ode`]: the model problem and the uniform training grid,
//! - [`form`]: trial solutions, residuals, cost values and cost gradients,
//! - [`optim`]: momentum / Adam steps and the training loop,
//! - [`metrics`]: the l1 numeric error and ensemble statistics,
//! - [`harness`]: config parsing, CSV output, seeded ensembles and the
//!   experiment sweeps behind the `neuralform` command line tool.

pub mod form;
pub mod harness;
pub mod metrics;
pub mod net;
pub mod ode;
pub mod optim;

pub(crate) mod fd;

use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(&'static str),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
