//! Per-session distance metrics.
//!
//! The normalized distance of a session is the length of its recorded
//! trajectory divided by the optimal course length of its level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EventKind, SessionState};
use crate::level::{LevelSpec, TrajectorySample};
use crate::pathfind::{optimal_course_length, CourseError};

pub const METRICS_FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("optimal distance must be positive, got {0}")]
    NonPositiveOptimal(f64),
    #[error("session `{0}` is not complete")]
    Incomplete(String),
    #[error("session is for level `{found}`, metrics requested for `{expected}`")]
    LevelMismatch { expected: String, found: String },
    #[error(transparent)]
    Course(#[from] CourseError),
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::EmptyTrajectory => "empty_trajectory",
            MetricsError::NonPositiveOptimal(_) => "non_positive_optimal",
            MetricsError::Incomplete(_) => "session_incomplete",
            MetricsError::LevelMismatch { .. } => "level_mismatch",
            MetricsError::Course(_) => "course_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: String,
    pub session_id: String,
    pub participant_id: String,
    pub level_id: String,
    pub level_rank: u8,
    pub traveled_distance: f64,
    pub optimal_distance: f64,
    pub normalized_distance: f64,
    pub duration_ms: u64,
    pub per_checkpoint_arrival_ms: Vec<u64>,
    pub items_correct: Vec<bool>,
    pub craft_success: bool,
}

impl MetricsReport {
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }
}

/// Polyline length: sum of Euclidean distances between consecutive samples.
pub fn traveled_distance(trajectory: &[TrajectorySample]) -> Result<f64, MetricsError> {
    if trajectory.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    Ok(trajectory
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum())
}

pub fn normalized_distance(traveled: f64, optimal: f64) -> Result<f64, MetricsError> {
    if !(optimal > 0.0) {
        return Err(MetricsError::NonPositiveOptimal(optimal));
    }
    Ok(traveled / optimal)
}

pub fn session_metrics(state: &SessionState, level: &LevelSpec) -> Result<MetricsReport, MetricsError> {
    if state.level().level_id != level.level_id {
        return Err(MetricsError::LevelMismatch {
            expected: level.level_id.clone(),
            found: state.level().level_id.clone(),
        });
    }
    if !state.is_complete() {
        return Err(MetricsError::Incomplete(state.session_id().to_owned()));
    }
    let traveled = traveled_distance(state.trajectory())?;
    let optimal = f64::from(optimal_course_length(level)?);
    let normalized = normalized_distance(traveled, optimal)?;

    let per_checkpoint_arrival_ms = state
        .events()
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::ChestOpened { .. } => Some(e.t_ms),
            _ => None,
        })
        .collect();
    let items_correct: Vec<bool> = state
        .taken_items()
        .iter()
        .zip(&level.checkpoints)
        .map(|(taken, cp)| *taken == cp.target)
        .collect();
    let craft_success = matches!(
        state.phase(),
        crate::Phase::Complete { craft_success: true }
    );
    let duration_ms = state
        .trajectory()
        .last()
        .map(|s| s.t_ms)
        .max(state.events().last().map(|e| e.t_ms))
        .unwrap_or(0);

    Ok(MetricsReport {
        format_version: METRICS_FORMAT_VERSION.to_owned(),
        session_id: state.session_id().to_owned(),
        participant_id: state.participant_id().to_owned(),
        level_id: level.level_id.clone(),
        level_rank: level.difficulty_rank,
        traveled_distance: traveled,
        optimal_distance: optimal,
        normalized_distance: normalized,
        duration_ms,
        per_checkpoint_arrival_ms,
        items_correct,
        craft_success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let t = [TrajectorySample::new(0, 0.0, 0.0), TrajectorySample::new(10, 3.0, 4.0)];
        assert_eq!(traveled_distance(&t).unwrap(), 5.0);
    }

    #[test]
    fn single_sample_travels_nothing() {
        assert_eq!(traveled_distance(&[TrajectorySample::new(0, 2.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(traveled_distance(&[]), Err(MetricsError::EmptyTrajectory));
    }

    #[test]
    fn unit_staircase() {
        let t: Vec<_> = (0..7)
            .map(|i| TrajectorySample::new(i, f64::from((i / 2) as u32), f64::from(((i + 1) / 2) as u32)))
            .collect();
        assert_eq!(traveled_distance(&t).unwrap(), 6.0);
    }

    #[test]
    fn ratio() {
        assert_eq!(normalized_distance(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(normalized_distance(15.0, 10.0).unwrap(), 1.5);
        assert_eq!(normalized_distance(30.0, 20.0).unwrap(), 1.5);
        assert!(normalized_distance(1.0, 0.0).is_err());
        assert!(normalized_distance(1.0, -2.0).is_err());
    }
}
