use thiserror::Error;

use crate::mdab::{MdabResult, MdabStatus};

/// Errors produced by the solver and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("alphabet too large: {size} exceeds the cap of {cap}")]
    AlphabetTooLarge { size: u128, cap: u64 },

    #[error("grid too large: {size} points exceeds the cap of {cap}")]
    GridTooLarge { size: u128, cap: u64 },

    #[error("degenerate objective: output distribution has no mass on outcomes reachable from {witness:?}")]
    DegenerateObjective { witness: Vec<f64> },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("solver did not converge for n = {n}: {status}")]
    NotConverged {
        n: u32,
        status: MdabStatus,
        partial: Box<MdabResult>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
