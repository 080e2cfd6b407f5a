//! TD-error exploration laboratory.
//!
//! QXplore trains an exploitation Q-function on extrinsic reward and a second,
//! adversarial Q-function whose reward is the first one's absolute TD-error.
//! The crate also carries the RND, DORA and epsilon-greedy baselines, the
//! ablation variants, sparse-reward surrogate tasks and a multi-seed harness.

pub mod agents;
pub mod envs;
pub mod error;
pub mod harness;
pub mod intrinsic;
pub mod nn;
pub mod parallel;
pub mod policy;
pub mod replay;
pub mod rng;

pub use error::{LabError, Result};
