//! Browser demo over the wayfinder core.
//!
//! Every operation takes plain numbers and returns a JSON string, so the
//! same functions back the wasm exports and the native tests.

use std::sync::Arc;

use serde::Serialize;
use wayfinder_core::agents::{generate_cohort, run_agent, AgentProfile, CohortConfig};
use wayfinder_core::export::export_trajectories;
use wayfinder_core::metrics::session_metrics;
use wayfinder_core::pairs::{analyze, build_pairs, Aggregation, NormalizationMode};
use wayfinder_core::pathfind::optimal_course_length;
use wayfinder_core::stats::interpret_r;
use wayfinder_core::{bundled, LevelSpec};

#[derive(Serialize)]
struct LevelInfo {
    rank: u8,
    level_id: String,
    name: String,
    checkpoints: usize,
    optimal: u32,
}

#[derive(Serialize)]
struct Run {
    traveled: f64,
    normalized: f64,
    craft_success: bool,
}

#[derive(Serialize)]
struct TrajectoryDemo {
    svg: String,
    optimal: Run,
    noisy: Run,
}

#[derive(Serialize)]
struct Point {
    participant_id: String,
    level_rank: u8,
    a: f64,
    b: f64,
}

#[derive(Serialize)]
struct CohortDemo {
    points: Vec<Point>,
    r: f64,
    band: String,
}

fn json(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("demo output serializes")
}

fn level(rank: u32) -> Result<Arc<LevelSpec>, String> {
    match rank {
        1..=5 => Ok(Arc::new(bundled::level(rank as usize))),
        _ => Err(format!("no level with rank {rank}")),
    }
}

pub fn levels() -> String {
    let info: Vec<LevelInfo> = bundled::levels()
        .into_iter()
        .map(|l| LevelInfo {
            rank: l.difficulty_rank,
            optimal: optimal_course_length(&l).expect("bundled levels are valid"),
            checkpoints: l.checkpoints.len(),
            level_id: l.level_id,
            name: l.name,
        })
        .collect();
    json(&info)
}

/// Optimal and noisy runs on one level, overlaid on its map.
pub fn trajectories(rank: u32, detour_rate: f64, seed: u32) -> Result<String, String> {
    let level = level(rank)?;
    let mut runs = Vec::new();
    let mut docs = Vec::new();
    for profile in [AgentProfile::optimal(), AgentProfile::noisy(detour_rate, 0.0, u64::from(seed))] {
        let s = run_agent(level.clone(), &profile).map_err(|e| e.to_string())?;
        let m = session_metrics(&s, &level).map_err(|e| e.to_string())?;
        runs.push(Run {
            traveled: m.traveled_distance,
            normalized: m.normalized_distance,
            craft_success: m.craft_success,
        });
        docs.push(s.to_document());
    }
    let overlay = export_trajectories(&level, &docs).map_err(|e| e.to_string())?;
    let noisy = runs.pop().expect("two runs");
    let optimal = runs.pop().expect("two runs");
    Ok(json(&TrajectoryDemo {
        svg: overlay.svg,
        optimal,
        noisy,
    }))
}

/// Synthetic two-game cohort over the bundled levels and its correlation.
pub fn cohort(jitter: f64, detour_intensity: f64, seed: u32) -> Result<String, String> {
    let levels: Vec<Arc<LevelSpec>> = bundled::levels().into_iter().map(Arc::new).collect();
    let d = CohortConfig::default();
    let config = CohortConfig {
        jitter,
        seed: u64::from(seed),
        template: AgentProfile {
            detour_rate: detour_intensity,
            ..d.template
        },
        ..d
    };
    let c = generate_cohort(&levels, &config).map_err(|e| e.to_string())?;
    let report = analyze(&c.game_a, &c.game_b, Aggregation::Pairs, NormalizationMode::RatioToOptimal)
        .map_err(|e| e.to_string())?;
    let points = build_pairs(&c.game_a, &c.game_b)
        .map_err(|e| e.to_string())?
        .pairs
        .into_iter()
        .map(|p| Point {
            participant_id: p.participant_id,
            level_rank: p.level_rank,
            a: p.value_a,
            b: p.value_b,
        })
        .collect();
    Ok(json(&CohortDemo {
        points,
        r: report.r,
        band: report.band.to_string(),
    }))
}

/// Correlation band of `r`.
pub fn band(r: f64) -> Result<String, String> {
    interpret_r(r).map(|b| b.to_string()).map_err(|e| e.to_string())
}

#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    fn js(r: Result<String, String>) -> Result<String, JsError> {
        r.map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn levels() -> String {
        super::levels()
    }

    #[wasm_bindgen]
    pub fn trajectories(rank: u32, detour_rate: f64, seed: u32) -> Result<String, JsError> {
        js(super::trajectories(rank, detour_rate, seed))
    }

    #[wasm_bindgen]
    pub fn cohort(jitter: f64, detour_intensity: f64, seed: u32) -> Result<String, JsError> {
        js(super::cohort(jitter, detour_intensity, seed))
    }

    #[wasm_bindgen]
    pub fn band(r: f64) -> Result<String, JsError> {
        js(super::band(r))
    }
}
