//! Engine for multi-turn generate-then-verify coding episodes.
//!
//! The pieces compose as a pipeline: [`datapipe`] builds a problem set,
//! [`orchestrator`] runs episodes against a [`orchestrator::Policy`] while
//! [`verifier`] judges model-written tests in the [`sandbox`], [`rewards`]
//! scores finished transcripts, [`returns`] turns rewards into per-token
//! advantages and [`evalkit`] summarizes traces.

pub mod datapipe;
pub mod evalkit;
pub mod orchestrator;
pub mod protocol;
pub mod returns;
pub mod rewards;
pub mod sandbox;
pub mod verifier;

pub use datapipe::Problem;
pub use orchestrator::{EpisodeConfig, EpisodeRecord, Termination};
pub use protocol::{parse_rollout, ParsedRollout};
pub use rewards::{RewardBreakdown, RewardConfig};
pub use sandbox::{ExecLimits, Sandbox, SandboxConfig};
pub use verifier::{Mode, TestCase, TestKind};
