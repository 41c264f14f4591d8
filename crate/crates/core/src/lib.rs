//! Capacity of the multinomial channel, the model of composite-letter DNA
//! storage read `n` times, and its capacity-achieving input distribution.
//!
//! The solver ([`mdab`]) alternates Blahut–Arimoto weight updates with
//! dual-guided moves of atom locations on the ordered simplex. Independent
//! brute-force checks live in [`oracle`].

pub mod ba;
pub mod channel;
pub mod cli;
pub mod dual;
pub mod error;
pub mod exec;
pub mod lowdisc;
pub mod mdab;
pub mod nelder_mead;
pub mod oracle;
pub mod orbit;
pub mod simplex;

pub use channel::{ChannelSpec, Outcome, SimplexPoint, TransitionMatrix};
pub use error::{Error, Result};
pub use exec::Execution;
pub use mdab::{mdab, solve_sequence, MdabConfig, MdabResult, MdabStatus};
pub use simplex::{AtomicDistribution, OrderedSimplexPoint};
