//! Intraday market-state detection.
//!
//! Time periods are clustered by the correlation of their market-microstructure
//! feature returns: a genetic algorithm maximizes the Giada–Marsili likelihood
//! of a cluster configuration, a discrete power-law fit to the cluster sizes
//! selects the significant states, and each state is summarized by a
//! signature vector used to classify new periods online and to estimate
//! transition probabilities between states.

pub mod corr;
pub mod error;
pub mod ga;
pub mod graph;
pub mod likelihood;
pub mod marketdata;
pub mod pipeline;
pub mod powerlaw;
pub mod rng;
pub mod states;
pub mod synth;
pub mod transitions;

pub use corr::CorrelationMatrix;
pub use error::{Error, Result};
