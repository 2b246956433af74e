//! Prefix-consistency weighted majority voting (PC-WMV) and the tooling
//! around it: answer pools, trace-level signals, aggregators, the K = 1
//! population theory, Monte Carlo checks of that theory, and the
//! budget-matched evaluation statistics.

pub mod error;
pub mod eval;
pub mod pool;
pub mod rng;
pub mod scalar;
pub mod signals;
pub mod sim;
mod special;
pub mod theory;
pub mod voting;

pub use error::{Error, Result};
pub use pool::{AnswerPool, ClusterId, Group, Problem, Sample};
pub use scalar::Scalar;
pub use signals::SignalKind;
pub use theory::TransitionKernel;
pub use voting::{VoteTally, Weight, WeightFamily};

pub use num_rational::Rational64;

pub type Kernel = TransitionKernel<f64>;
pub type ExactKernel = TransitionKernel<Rational64>;
pub type Tally = VoteTally<f64>;
pub type ExactTally = VoteTally<Rational64>;
