//! Event-driven simulation of the continuous-time Poisson channel with dark
//! current and noiseless feedback.
//!
//! The crate is organized bottom-up:
//!
//! - [`process`]: exact sampling of piecewise-constant Poisson processes and
//!   the Poisson law itself.
//! - [`channel`]: the closed feedback loop. Encoder policies issue predictable
//!   rate segments, the channel adds dark current and produces counts, counts
//!   are fed back instantly, and the transmitted energy is accounted per path.
//! - [`schemes`]: the stop-at-first-count binary and M-ary constructions.
//! - [`analytics`]: closed-form performance, the converse floor, and Monte
//!   Carlo estimators with confidence intervals.
//! - [`cli`]: the `simulate`, `sweep`, `frontier` and `verify` commands.
//!
//! Energy is measured in photons: the expected number of transmitted photons,
//! i.e. the expected integral of the input intensity.

pub mod analytics;
pub mod channel;
pub mod cli;
pub mod error;
pub mod fuzz;
pub mod montecarlo;
pub mod process;
pub mod rng;
pub mod schemes;

pub use analytics::{Estimate, MeanAccumulator, PerfReport};
pub use channel::{
    run_trial, ChannelParams, Decoder, EncoderPolicy, MessageId, TrialResult, WeightProcess,
};
pub use error::{Error, Result};
pub use process::{RateSegment, Timeline};
pub use rng::RandomSource;
pub use schemes::{Scheme, SchemeKind, SchemeSpec};
