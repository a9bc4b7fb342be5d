//! Retransmission channel model.
//!
//! A data unit of random size `L` is sent over a channel whose availability
//! periods `A_1, A_2, ...` are i.i.d. and separated by unavailability periods
//! `U_i`. A transmission succeeds in the first period with `A_n >= L`; every
//! failure restarts the transfer from scratch. This crate computes the law of
//! the number of attempts `N` and of the total time `T`:
//!
//! * [`dist`]: tail functions for `L`, `A` and `U`.
//! * [`channel`]: the coupled model and its validation.
//! * [`oracle`]: exact log-domain evaluation of `P[N > n]`.
//! * [`asym`]: the link function `Φ`, regime classification and asymptotic predictors.
//! * [`mc`]: Monte Carlo simulation, empirical tail curves and tail-index estimators.
//! * [`tandem`]: the multi-hop end-to-end retransmission example.

pub mod asym;
pub mod channel;
pub mod dist;
pub mod error;
pub mod mc;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod special;
pub mod tandem;

pub use channel::{ChannelModel, SessionOutcome};
pub use dist::TailFunction;
pub use error::{Error, Result};
pub use oracle::LogProb;
