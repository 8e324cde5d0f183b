//! Core of the wayfinder assessment platform.
//!
//! A level is a planar grid with an ordered list of checkpoints. Each
//! checkpoint hosts a chest; the participant takes exactly one item from
//! every chest and finally crafts with all of them at the last checkpoint.
//! The engine records the participant's trajectory, which is scored as the
//! traveled distance normalized by the optimal course length. Paired
//! normalized distances from two games are then compared with Pearson's r.

pub mod agents;
pub mod bundled;
pub mod engine;
pub mod export;
pub mod level;
pub mod metrics;
pub mod pairs;
pub mod pathfind;
pub mod stats;
#[cfg(feature = "fs")]
pub mod store;
pub mod validate;

pub use engine::{Action, EngineError, Phase, SessionState};
pub use level::{Cell, CellKind, Checkpoint, Facing, ItemId, LevelSpec, TrajectorySample};
pub use metrics::MetricsReport;
pub use validate::{validate_level, Violation, ViolationCode};
