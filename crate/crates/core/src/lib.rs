//! Trial-and-error reasoning trajectories with self-verification and
//! self-correction, trained by policy gradients against a synthetic,
//! exactly differentiable policy.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`trajectory`]: the solve/verify/end action grammar, verdict parsing,
//!   rejection rules and the text format;
//! * [`environment`]: synthetic problems and the tabular logit policy;
//! * [`sft`]: difficulty-adaptive trajectory construction and the masked
//!   behavior-initialization loss;
//! * [`rewards`]: outcome and action rewards and reward contexts;
//! * [`rloo`]: outcome-level REINFORCE leave-one-out;
//! * [`process`]: process-level RL with reward-context group baselines;
//! * [`offline`]: offline RL with accuracy-binned baselines;
//! * [`metrics`]: verification and correction metrics;
//! * [`runner`]: end-to-end training runs and persisted formats.

pub mod environment;
pub mod error;
pub mod io;
pub mod metrics;
pub mod offline;
pub mod online;
pub mod process;
pub mod rewards;
pub mod rloo;
pub mod rng;
pub mod runner;
pub mod sft;
pub mod surrogate;
pub mod trajectory;

pub use environment::{ProblemSpec, Rollout, SyntheticPolicy};
pub use error::{Error, Result};
pub use rng::RandomSource;
pub use trajectory::{Action, ActionType, AnswerToken, Trajectory, Verdict};
