//! Structural validation of level specifications.
//!
//! Violations are data: [`validate_level`] never fails, it reports every
//! broken rule it can detect. Geometric checks are skipped when the terrain
//! does not match the declared dimensions.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::level::{
    Cell, LevelSpec, CHEST_CAPACITY, MAX_CHECKPOINTS, MIN_GRID_SIDE,
};
use crate::pathfind::DistanceField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    EmptyLevelId,
    DifficultyOutOfRange,
    GridTooSmall,
    TerrainShape,
    StartOutOfBounds,
    StartBlocked,
    NoCheckpoints,
    TooManyCheckpoints,
    CheckpointOrder,
    EmptyZone,
    ZoneOutOfBounds,
    ZoneNotWalkable,
    ChestOutOfBounds,
    ChestNotBlocked,
    ChestEmpty,
    ChestOverfull,
    TargetNotInChest,
    ChestUnreachable,
    EmptyItemId,
    DuplicateItemId,
    UnknownItem,
    SameOutcomeItems,
    UnreachableWaypoint,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyLevelId => "empty_level_id",
            ViolationCode::DifficultyOutOfRange => "difficulty_out_of_range",
            ViolationCode::GridTooSmall => "grid_too_small",
            ViolationCode::TerrainShape => "terrain_shape",
            ViolationCode::StartOutOfBounds => "start_out_of_bounds",
            ViolationCode::StartBlocked => "start_blocked",
            ViolationCode::NoCheckpoints => "no_checkpoints",
            ViolationCode::TooManyCheckpoints => "too_many_checkpoints",
            ViolationCode::CheckpointOrder => "checkpoint_order",
            ViolationCode::EmptyZone => "empty_zone",
            ViolationCode::ZoneOutOfBounds => "zone_out_of_bounds",
            ViolationCode::ZoneNotWalkable => "zone_not_walkable",
            ViolationCode::ChestOutOfBounds => "chest_out_of_bounds",
            ViolationCode::ChestNotBlocked => "chest_not_blocked",
            ViolationCode::ChestEmpty => "chest_empty",
            ViolationCode::ChestOverfull => "chest_overfull",
            ViolationCode::TargetNotInChest => "target_not_in_chest",
            ViolationCode::ChestUnreachable => "chest_unreachable",
            ViolationCode::EmptyItemId => "empty_item_id",
            ViolationCode::DuplicateItemId => "duplicate_item_id",
            ViolationCode::UnknownItem => "unknown_item",
            ViolationCode::SameOutcomeItems => "same_outcome_items",
            ViolationCode::UnreachableWaypoint => "unreachable_waypoint",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

pub fn validate_level(spec: &LevelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, message: String| out.push(Violation { code, message });

    if spec.level_id.trim().is_empty() {
        push(ViolationCode::EmptyLevelId, "level_id must be non-empty".into());
    }
    if !(1..=5).contains(&spec.difficulty_rank) {
        push(
            ViolationCode::DifficultyOutOfRange,
            format!("difficulty_rank {} outside 1..=5", spec.difficulty_rank),
        );
    }
    if spec.width < MIN_GRID_SIDE || spec.height < MIN_GRID_SIDE {
        push(
            ViolationCode::GridTooSmall,
            format!("grid {}x{} is smaller than 3x3", spec.width, spec.height),
        );
    }

    // item catalog
    let mut catalog = HashSet::new();
    for item in &spec.items {
        if item.id.as_str().trim().is_empty() {
            push(ViolationCode::EmptyItemId, "item id must be non-empty".into());
        } else if !catalog.insert(item.id.clone()) {
            push(ViolationCode::DuplicateItemId, format!("item id `{}` repeated", item.id));
        }
    }
    for (what, id) in [("success_item", &spec.success_item), ("failure_item", &spec.failure_item)] {
        if !catalog.contains(id) {
            push(ViolationCode::UnknownItem, format!("{what} `{id}` not in item catalog"));
        }
    }
    if spec.success_item == spec.failure_item {
        push(
            ViolationCode::SameOutcomeItems,
            "success_item and failure_item must differ".into(),
        );
    }

    // checkpoints, non-geometric
    if spec.checkpoints.is_empty() {
        push(ViolationCode::NoCheckpoints, "level needs at least one checkpoint".into());
    }
    if spec.checkpoints.len() > MAX_CHECKPOINTS {
        push(
            ViolationCode::TooManyCheckpoints,
            format!(
                "{} checkpoints exceed the {MAX_CHECKPOINTS} craft cells",
                spec.checkpoints.len()
            ),
        );
    }
    for (i, cp) in spec.checkpoints.iter().enumerate() {
        let expected = i as u32 + 1;
        if cp.order != expected {
            push(
                ViolationCode::CheckpointOrder,
                format!("checkpoint at position {i} has order {}, expected {expected}", cp.order),
            );
        }
        if cp.contents.is_empty() {
            push(ViolationCode::ChestEmpty, format!("checkpoint {} chest is empty", cp.order));
        }
        if cp.contents.len() > CHEST_CAPACITY {
            push(
                ViolationCode::ChestOverfull,
                format!(
                    "checkpoint {} chest holds {} items, capacity {CHEST_CAPACITY}",
                    cp.order,
                    cp.contents.len()
                ),
            );
        }
        if !cp.contents.contains(&cp.target) {
            push(
                ViolationCode::TargetNotInChest,
                format!("checkpoint {} target `{}` not in its chest", cp.order, cp.target),
            );
        }
        for id in cp.contents.iter().chain(std::iter::once(&cp.target)) {
            if !catalog.contains(id) {
                push(
                    ViolationCode::UnknownItem,
                    format!("checkpoint {} references unknown item `{id}`", cp.order),
                );
            }
        }
        if cp.zone.is_empty() {
            push(ViolationCode::EmptyZone, format!("checkpoint {} zone is empty", cp.order));
        }
    }

    let Some(grid) = spec.grid() else {
        push(
            ViolationCode::TerrainShape,
            format!("terrain rows do not form a {}x{} grid", spec.width, spec.height),
        );
        return out;
    };

    let start = spec.start_cell();
    let start_ok = if !grid.in_bounds(start) {
        push(ViolationCode::StartOutOfBounds, format!("start {start} outside grid"));
        false
    } else if !grid.is_walkable(start) {
        push(ViolationCode::StartBlocked, format!("start {start} is blocked"));
        false
    } else {
        true
    };

    let mut interaction_sets: Vec<Vec<Cell>> = Vec::new();
    for cp in &spec.checkpoints {
        for z in &cp.zone {
            if !grid.in_bounds(*z) {
                push(
                    ViolationCode::ZoneOutOfBounds,
                    format!("checkpoint {} zone cell {z} outside grid", cp.order),
                );
            } else if !grid.is_walkable(*z) {
                push(
                    ViolationCode::ZoneNotWalkable,
                    format!("checkpoint {} zone cell {z} is blocked", cp.order),
                );
            }
        }
        if !grid.in_bounds(cp.chest) {
            push(
                ViolationCode::ChestOutOfBounds,
                format!("checkpoint {} chest {} outside grid", cp.order, cp.chest),
            );
        } else if grid.is_walkable(cp.chest) {
            push(
                ViolationCode::ChestNotBlocked,
                format!("checkpoint {} chest {} must be a blocked cell", cp.order, cp.chest),
            );
        }
        let set = grid.interaction_cells(cp.chest);
        if set.is_empty() {
            push(
                ViolationCode::ChestUnreachable,
                format!("checkpoint {} chest has no adjacent walkable cell", cp.order),
            );
        }
        interaction_sets.push(set);
    }

    // Moving inside one connected component is free, so every leg of the
    // ordered course exists iff each interaction set touches the start's
    // component.
    if start_ok {
        let field = DistanceField::compute(&grid, start).expect("start checked walkable");
        for (cp, set) in spec.checkpoints.iter().zip(&interaction_sets) {
            if !set.is_empty() && !set.iter().any(|c| field.distance(*c).is_some()) {
                push(
                    ViolationCode::UnreachableWaypoint,
                    format!("checkpoint {} cannot be reached from the start", cp.order),
                );
            }
        }
    }
    out
}
