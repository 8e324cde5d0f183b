//! Simulated participants.
//!
//! Agents drive sessions only through the public engine operations, so
//! every agent run doubles as an engine conformance check. The optimal
//! agent walks the exact optimal course one cell per sample; the noisy
//! agent sidesteps at random and re-plans after every detour.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, SessionState};
use crate::level::{Cell, ItemId, LevelSpec, TrajectorySample};
use crate::metrics::{session_metrics, MetricsError, MetricsReport};
use crate::pairs::DistanceRecord;
use crate::pathfind::{optimal_course_for_level, shortest_path, CourseError};

/// Wall-clock stamp used for simulated sessions, so that runs are
/// reproducible byte for byte.
pub const AGENT_STARTED_AT: &str = "1970-01-01T00:00:00Z";
/// Simulated sampling interval (4 Hz).
pub const STEP_MS: u64 = 250;
const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Optimal,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub kind: AgentKind,
    /// Per-step probability of a random sidestep.
    pub detour_rate: f64,
    /// Per-chest probability of taking a non-target item.
    pub wrong_item_rate: f64,
    pub ability_factor: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("{0} must be in [0, 1), got {1}")]
    Rate(&'static str, f64),
    #[error("ability_factor must be positive, got {0}")]
    Ability(f64),
    #[error("optimal agents take no detours and no wrong items")]
    OptimalWithNoise,
    #[error("need at least 2 participants, got {0}")]
    TooFewParticipants(usize),
    #[error("agent exceeded {MAX_STEPS} steps")]
    Runaway,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Course(#[from] CourseError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl AgentProfile {
    pub fn optimal() -> Self {
        Self {
            kind: AgentKind::Optimal,
            detour_rate: 0.0,
            wrong_item_rate: 0.0,
            ability_factor: 1.0,
            seed: 0,
        }
    }

    pub fn noisy(detour_rate: f64, wrong_item_rate: f64, seed: u64) -> Self {
        Self {
            kind: AgentKind::Noisy,
            detour_rate,
            wrong_item_rate,
            ability_factor: 1.0,
            seed,
        }
    }

    pub fn check(&self) -> Result<(), AgentError> {
        for (name, v) in [("detour_rate", self.detour_rate), ("wrong_item_rate", self.wrong_item_rate)] {
            if !(0.0..1.0).contains(&v) {
                return Err(AgentError::Rate(name, v));
            }
        }
        if !(self.ability_factor > 0.0 && self.ability_factor.is_finite()) {
            return Err(AgentError::Ability(self.ability_factor));
        }
        if self.kind == AgentKind::Optimal && (self.detour_rate != 0.0 || self.wrong_item_rate != 0.0) {
            return Err(AgentError::OptimalWithNoise);
        }
        Ok(())
    }
}

struct Walker<'a> {
    state: SessionState,
    rng: ChaCha8Rng,
    profile: &'a AgentProfile,
    t: u64,
    here: Cell,
}

impl Walker<'_> {
    fn step_to(&mut self, c: Cell) -> Result<(), AgentError> {
        self.t += STEP_MS;
        self.here = c;
        self.state
            .record_samples(&[TrajectorySample::at_cell(self.t, c)])?;
        Ok(())
    }

    fn loot(&mut self, checkpoint: u32) -> Result<(), AgentError> {
        self.state.open_chest(checkpoint)?;
        let cp = self
            .state
            .level()
            .checkpoint(checkpoint)
            .expect("validated checkpoint")
            .clone();
        let wrong: Vec<&ItemId> = cp.contents.iter().filter(|i| **i != cp.target).collect();
        let pick = if !wrong.is_empty() && self.rng.random_bool(self.profile.wrong_item_rate) {
            (*wrong.choose(&mut self.rng).expect("non-empty")).clone()
        } else {
            cp.target.clone()
        };
        self.state.select_chest_item(&pick)?;
        self.state.close_chest()?;
        Ok(())
    }

    fn craft(mut self) -> Result<SessionState, AgentError> {
        let items = self.state.inventory().to_vec();
        for (cell, item) in items.iter().enumerate() {
            self.state.place_in_craft(item, cell as u8)?;
        }
        self.state.take_craft_result()?;
        Ok(self.state)
    }
}

pub fn run_agent(level: Arc<LevelSpec>, profile: &AgentProfile) -> Result<SessionState, AgentError> {
    let session_id = format!("agent-{:?}-{}", profile.kind, profile.seed).to_lowercase();
    run_agent_as(level, profile, "agent", &session_id)
}

/// Plays one complete session.
pub fn run_agent_as(
    level: Arc<LevelSpec>,
    profile: &AgentProfile,
    participant_id: &str,
    session_id: &str,
) -> Result<SessionState, AgentError> {
    profile.check()?;
    let mut state = SessionState::start(level.clone(), participant_id, session_id, AGENT_STARTED_AT)?;
    state.acknowledge_briefing()?;
    let start = level.start_cell();
    state.record_samples(&[TrajectorySample::at_cell(0, start)])?;
    let mut w = Walker {
        state,
        rng: ChaCha8Rng::seed_from_u64(profile.seed),
        profile,
        t: 0,
        here: start,
    };

    match profile.kind {
        AgentKind::Optimal => {
            let course = optimal_course_for_level(&level)?;
            let mut i = 0;
            for (k, &stop_at) in course.stop_indices.iter().enumerate() {
                while i < stop_at {
                    i += 1;
                    w.step_to(course.path[i])?;
                }
                w.loot(k as u32 + 1)?;
            }
        }
        AgentKind::Noisy => {
            let grid = w.state.grid().clone();
            let mut steps = 0;
            for cp in &level.checkpoints {
                let goal = grid.interaction_cells(cp.chest);
                while !goal.contains(&w.here) {
                    steps += 1;
                    if steps > MAX_STEPS {
                        return Err(AgentError::Runaway);
                    }
                    let next = if w.rng.random_bool(profile.detour_rate) {
                        let options: Vec<Cell> = grid.walkable_neighbors(w.here).collect();
                        *options.choose(&mut w.rng).unwrap_or(&w.here)
                    } else {
                        let path = shortest_path(&grid, w.here, &goal)
                            .map_err(CourseError::from)?
                            .ok_or(CourseError::Unreachable { checkpoint: cp.order })?;
                        path.cells[1]
                    };
                    if next != w.here {
                        w.step_to(next)?;
                    }
                }
                w.loot(cp.order)?;
            }
        }
    }
    w.craft()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayOrder {
    AThenB,
    BThenA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParticipant {
    pub participant_id: String,
    pub ability_factor: f64,
    /// Counterbalancing group. Recorded only; it does not affect values.
    pub order: PlayOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_participants: usize,
    /// `detour_rate` is the base detour intensity at ability 1 on the hardest
    /// level (see [`detour_for_intensity`]);
    /// `wrong_item_rate` is used as is.
    pub template: AgentProfile,
    /// Standard deviation of the multiplicative noise on game B.
    pub jitter: f64,
    pub seed: u64,
    pub ability_min: f64,
    pub ability_max: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_participants: 10,
            template: AgentProfile::noisy(0.7, 0.0, 0),
            jitter: 0.05,
            seed: 2024,
            ability_min: 0.5,
            ability_max: 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub participants: Vec<SyntheticParticipant>,
    /// Game A: normalized distances from engine runs.
    pub game_a: Vec<DistanceRecord>,
    /// Game B: the statistical counterpart.
    pub game_b: Vec<DistanceRecord>,
    pub sessions: Vec<SessionState>,
    pub metrics: Vec<MetricsReport>,
}

/// Per-step detour probability whose expected number of sidesteps per
/// forward step equals `intensity`, so excess distance grows linearly with it.
pub fn detour_for_intensity(intensity: f64) -> f64 {
    (intensity / (1.0 + intensity)).min(0.95)
}

/// 1-based rank of each level's optimal course length (ties share the
/// lower rank).
pub fn difficulty_scales(levels: &[Arc<LevelSpec>]) -> Result<Vec<f64>, AgentError> {
    let lengths = levels
        .iter()
        .map(|l| Ok(optimal_course_for_level(l)?.length))
        .collect::<Result<Vec<u32>, AgentError>>()?;
    Ok(lengths
        .iter()
        .map(|len| 1.0 + lengths.iter().filter(|o| *o < len).count() as f64)
        .collect())
}

/// Synthetic paired cohort. For participant `p` with ability `a` on a
/// level with difficulty scale `s` (of `L` levels), game A is a noisy
/// engine run with detour intensity `base * a * s / L`, and game B is
/// `1 + a * s * (1 + jitter * z)` with `z` standard normal.
pub fn generate_cohort(levels: &[Arc<LevelSpec>], config: &CohortConfig) -> Result<Cohort, AgentError> {
    if config.n_participants < 2 {
        return Err(AgentError::TooFewParticipants(config.n_participants));
    }
    config.template.check()?;
    let scales = difficulty_scales(levels)?;
    let n_levels = levels.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cohort = Cohort {
        participants: Vec::new(),
        game_a: Vec::new(),
        game_b: Vec::new(),
        sessions: Vec::new(),
        metrics: Vec::new(),
    };
    for i in 0..config.n_participants {
        let participant_id = format!("p{:02}", i + 1);
        let ability = rng.random_range(config.ability_min..=config.ability_max);
        cohort.participants.push(SyntheticParticipant {
            participant_id: participant_id.clone(),
            ability_factor: ability,
            order: if i % 2 == 0 { PlayOrder::AThenB } else { PlayOrder::BThenA },
        });
        for (level, scale) in levels.iter().zip(&scales) {
            let profile = AgentProfile {
                kind: AgentKind::Noisy,
                detour_rate: detour_for_intensity(config.template.detour_rate * ability * scale / n_levels),
                wrong_item_rate: config.template.wrong_item_rate,
                ability_factor: ability,
                seed: rng.next_u64(),
            };
            let session_id = format!("{participant_id}-{}", level.level_id);
            let state = run_agent_as(level.clone(), &profile, &participant_id, &session_id)?;
            let report = session_metrics(&state, level)?;
            cohort.game_a.push(DistanceRecord::from(&report));
            let z: f64 = StandardNormal.sample(&mut rng);
            cohort.game_b.push(DistanceRecord {
                participant_id: participant_id.clone(),
                level_rank: level.difficulty_rank,
                normalized_distance: 1.0 + ability * scale * (1.0 + config.jitter * z),
            });
            cohort.sessions.push(state);
            cohort.metrics.push(report);
        }
    }
    Ok(cohort)
}
