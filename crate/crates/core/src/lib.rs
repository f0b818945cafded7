//! Classical simulation of error-tolerant quantum convolutional neural
//! networks (QCNNs) recognizing symmetry-protected topological phases of the
//! generalized cluster-Ising chain.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`model`] — Pauli-string algebra, Hamiltonian couplings, stabilizers and
//!   string order parameters.
//! - [`groundstate`] — exact ground states by Lanczos iteration on a sparse
//!   Hamiltonian applicator (chains up to 20 sites), expectation values and
//!   energy-curvature boundary scans.
//! - [`noise`] — the single-qubit Pauli error channel: configuration
//!   sampling, state application and closed-form attenuation factors.
//! - [`circuits`] — gate-level disentanglers and QEC unitaries, statevector
//!   simulation, X-basis sampling and permutation extraction.
//! - [`decoder`] — classical post-processing: truth-table layers, the full
//!   Boolean decoding function, output estimation and the exact fast
//!   syndrome sampler for cluster-state inputs at large chain lengths.
//! - [`threshold`] — analytic error-density recursions and Monte-Carlo
//!   threshold estimation.
//! - [`heisenberg`] — backpropagation of the measured observable into the
//!   multiscale string order parameter, term counting and sample-complexity
//!   bounds.
//!
//! Shot-level loops are data-parallel via rayon when the default `parallel`
//! feature is enabled; results are bit-identical with and without it.

pub mod bits;
pub mod circuits;
pub mod decoder;
pub mod exec;
pub mod groundstate;
pub mod heisenberg;
pub mod model;
pub mod noise;
pub mod threshold;

/// Errors shared across the simulation modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    Input(String),
    /// The eigensolver did not reach the requested tolerance.
    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),
    /// A circuit did not map X-basis states onto X-basis states.
    #[error("X-basis permutation condition violated: {0}")]
    CondViolated(String),
    /// A Monte-Carlo probe stayed statistically inconclusive at the shot cap.
    #[error("inconclusive Monte-Carlo estimate: {0}")]
    Inconclusive(String),
    /// An exact expansion exceeded its term budget.
    #[error("term limit exceeded: {0}")]
    Overflow(String),
    /// A case the closed-form analysis does not cover.
    #[error("unsupported case: {0}")]
    Unsupported(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
