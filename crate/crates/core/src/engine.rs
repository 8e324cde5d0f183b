//! Per-session task state machine.
//!
//! ```text
//! Briefing -> Navigating(1) -> ChestOpen(1) -> Navigating(2) -> ... -> ChestOpen(N)
//!          -> Crafting <-> (place/remove) -> AwaitResult -> Complete
//! ```
//!
//! A session has a single writer. Every mutator either applies fully or
//! leaves the state untouched, except rejected chest openings, which are
//! logged before being refused. Once `Complete`, the session is frozen.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{
    Cell, Grid, ItemId, LevelSpec, Start, TrajectorySample, CHEST_CAPACITY, CRAFT_CELLS,
    INVENTORY_CAPACITY,
};
use crate::validate::{validate_level, Violation};

/// Major.minor version written into every persisted session document.
pub const SESSION_FORMAT_VERSION: &str = "1.0";

pub type CraftGrid = [Option<ItemId>; CRAFT_CELLS];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Briefing,
    Navigating { next_checkpoint: u32 },
    ChestOpen { checkpoint: u32, taken: Option<ItemId> },
    Crafting { cells: CraftGrid },
    AwaitResult { cells: CraftGrid, result_item: ItemId },
    Complete { craft_success: bool },
}

/// Phase without payload, for transition checks and error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Briefing,
    Navigating(u32),
    ChestOpen(u32),
    Crafting,
    AwaitResult,
    Complete,
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseKind::Briefing => f.write_str("briefing"),
            PhaseKind::Navigating(k) => write!(f, "navigating({k})"),
            PhaseKind::ChestOpen(k) => write!(f, "chest_open({k})"),
            PhaseKind::Crafting => f.write_str("crafting"),
            PhaseKind::AwaitResult => f.write_str("await_result"),
            PhaseKind::Complete => f.write_str("complete"),
        }
    }
}

impl Phase {
    pub fn kind(&self) -> PhaseKind {
        match self {
            Phase::Briefing => PhaseKind::Briefing,
            Phase::Navigating { next_checkpoint } => PhaseKind::Navigating(*next_checkpoint),
            Phase::ChestOpen { checkpoint, .. } => PhaseKind::ChestOpen(*checkpoint),
            Phase::Crafting { .. } => PhaseKind::Crafting,
            Phase::AwaitResult { .. } => PhaseKind::AwaitResult,
            Phase::Complete { .. } => PhaseKind::Complete,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Phase::Complete { .. })
    }
}

/// Whether `from -> to` is an edge of the task graph for a level with
/// `n` checkpoints. Self-loops (no phase change) are not edges.
pub fn is_legal_transition(from: PhaseKind, to: PhaseKind, n: u32) -> bool {
    use PhaseKind::*;
    match (from, to) {
        (Briefing, Navigating(1)) => true,
        (Navigating(k), ChestOpen(j)) => k == j,
        (ChestOpen(k), Navigating(j)) => k < n && j == k + 1,
        (ChestOpen(k), Crafting) => k == n,
        (Crafting, AwaitResult) => true,
        (AwaitResult, Complete) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    OpenChest { checkpoint: u32 },
    SelectItem { item: ItemId },
    CloseChest,
    PlaceCraft { item: ItemId, cell: u8 },
    RemoveCraft { cell: u8 },
    TakeResult,
}

/// One entry of a scripted run: the same vocabulary the HTTP service accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    AckBriefing,
    Samples { samples: Vec<TrajectorySample> },
    Act(Action),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    BriefingDone,
    ChestOpened { checkpoint: u32 },
    ChestOpenRejected { checkpoint: u32, expected: u32 },
    ItemSelected { checkpoint: u32, item: ItemId },
    ChestClosed { checkpoint: u32, item: ItemId },
    CraftPlaced { item: ItemId, cell: u8 },
    CraftRemoved { item: ItemId, cell: u8 },
    CraftResultReady,
    ResultTaken { item: ItemId, craft_success: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// Timestamp of the latest trajectory sample when the event happened.
    pub t_ms: u64,
    /// Trajectory length when the event happened.
    pub at_sample: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid_level: {}", .0.code)]
    InvalidLevel(Violation),
    #[error("{op} not allowed in phase {phase}")]
    Phase { op: &'static str, phase: PhaseKind },
    #[error("checkpoint {requested} opened out of order, next is {expected}")]
    Order { requested: u32, expected: u32 },
    #[error("player at {position} is {distance} cells from the chest of checkpoint {checkpoint}")]
    Proximity {
        checkpoint: u32,
        position: Cell,
        distance: i32,
    },
    #[error("exactly one item must be taken from the chest of checkpoint {checkpoint}")]
    MustTakeOne { checkpoint: u32 },
    #[error("item `{item}` is not in this chest")]
    UnknownItem { item: ItemId },
    #[error("item `{item}` is not available in the inventory")]
    NotInInventory { item: ItemId },
    #[error("craft cell {cell} is occupied")]
    CellOccupied { cell: u8 },
    #[error("craft cell {cell} is empty")]
    CellEmpty { cell: u8 },
    #[error("craft cell {cell} outside 0..=8")]
    InvalidCell { cell: u8 },
    #[error("inventory is full")]
    InventoryFull,
    #[error("session is complete and frozen")]
    Frozen,
    #[error("sample {index} at t={t_ms} ms is not later than {previous} ms")]
    SampleOrder { index: usize, t_ms: u64, previous: u64 },
    #[error("sample {index} at ({x}, {y}) is outside walkable space")]
    SamplePosition { index: usize, x: f64, y: f64 },
}

impl EngineError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::InvalidLevel(_) => "invalid_level",
            EngineError::Phase { .. } => "phase_error",
            EngineError::Order { .. } => "order_error",
            EngineError::Proximity { .. } => "proximity_error",
            EngineError::MustTakeOne { .. } => "must_take_one",
            EngineError::UnknownItem { .. } => "unknown_item",
            EngineError::NotInInventory { .. } => "item_not_in_inventory",
            EngineError::CellOccupied { .. } => "cell_occupied",
            EngineError::CellEmpty { .. } => "cell_empty",
            EngineError::InvalidCell { .. } => "invalid_cell",
            EngineError::InventoryFull => "inventory_full",
            EngineError::Frozen => "frozen_session",
            EngineError::SampleOrder { .. } => "sample_order_error",
            EngineError::SamplePosition { .. } => "position_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BriefingCheckpoint {
    pub order: u32,
    pub chest: Cell,
    pub zone: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BriefingItem {
    pub order: u32,
    pub id: ItemId,
    pub display_name: String,
}

/// Map and signboard shown when entering the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Briefing {
    pub level_id: String,
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub terrain: Vec<String>,
    pub start: Start,
    pub checkpoints: Vec<BriefingCheckpoint>,
    pub items_to_collect: Vec<BriefingItem>,
    pub map_visible_during_play: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChestView {
    pub checkpoint: u32,
    /// All 27 slots; contents fill the first slots in order.
    pub slots: Vec<Option<ItemId>>,
}

/// Phase as exposed to clients: the crafting result stays hidden until
/// it has been taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum PhaseView {
    Briefing,
    Navigating { next_checkpoint: u32 },
    ChestOpen { checkpoint: u32, taken: Option<ItemId>, chest: ChestView },
    Crafting { cells: CraftGrid },
    AwaitResult { cells: CraftGrid, result_ready: bool },
    Complete { craft_success: bool, result_item: Option<ItemId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub participant_id: String,
    pub level_id: String,
    #[serde(flatten)]
    pub phase: PhaseView,
    pub inventory: Vec<ItemId>,
    pub position: Position,
    pub trajectory_len: usize,
}

/// Canonical persisted form of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionDocument {
    pub format_version: String,
    pub session_id: String,
    pub participant_id: String,
    pub level_id: String,
    pub started_at: String,
    pub events: Vec<Event>,
    pub trajectory: Vec<TrajectorySample>,
    pub final_phase: Phase,
    pub inventory: Vec<ItemId>,
}

impl SessionDocument {
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session serialization is infallible");
        s.push('\n');
        s
    }

    /// The step sequence that produced this document, including refused
    /// chest openings. Feeding it to a fresh session (in process or over
    /// HTTP) rebuilds the same document.
    pub fn to_script(&self) -> Vec<Step> {
        let mut steps = Vec::new();
        let mut fed = 0;
        let mut feed = |steps: &mut Vec<Step>, upto: usize| {
            let upto = upto.min(self.trajectory.len());
            if upto > fed {
                steps.push(Step::Samples {
                    samples: self.trajectory[fed..upto].to_vec(),
                });
                fed = upto;
            }
        };
        for event in &self.events {
            feed(&mut steps, event.at_sample);
            let step = match &event.kind {
                EventKind::BriefingDone => Step::AckBriefing,
                EventKind::ChestOpened { checkpoint } | EventKind::ChestOpenRejected { checkpoint, .. } => {
                    Step::Act(Action::OpenChest { checkpoint: *checkpoint })
                }
                EventKind::ItemSelected { item, .. } => Step::Act(Action::SelectItem { item: item.clone() }),
                EventKind::ChestClosed { .. } => Step::Act(Action::CloseChest),
                EventKind::CraftPlaced { item, cell } => Step::Act(Action::PlaceCraft {
                    item: item.clone(),
                    cell: *cell,
                }),
                EventKind::CraftRemoved { cell, .. } => Step::Act(Action::RemoveCraft { cell: *cell }),
                EventKind::CraftResultReady => continue,
                EventKind::ResultTaken { .. } => Step::Act(Action::TakeResult),
            };
            steps.push(step);
        }
        feed(&mut steps, usize::MAX);
        steps
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RestoreError {
    #[error("unsupported format_version `{0}`")]
    UnsupportedVersion(String),
    #[error("session is for level `{found}`, expected `{expected}`")]
    LevelMismatch { expected: String, found: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("replay diverged from the stored document: {0}")]
    Diverged(String),
}

pub fn check_format_version(version: &str) -> Result<(), RestoreError> {
    let major = version.split('.').next().unwrap_or_default();
    let supported = SESSION_FORMAT_VERSION.split('.').next().unwrap_or_default();
    if major == supported {
        Ok(())
    } else {
        Err(RestoreError::UnsupportedVersion(version.to_owned()))
    }
}

#[derive(Debug, Clone)]
pub struct SessionState {
    session_id: String,
    participant_id: String,
    level: Arc<LevelSpec>,
    grid: Grid,
    started_at: String,
    phase: Phase,
    inventory: Vec<ItemId>,
    trajectory: Vec<TrajectorySample>,
    events: Vec<Event>,
}

impl PartialEq for SessionState {
    fn eq(&self, other: &Self) -> bool {
        self.to_document() == other.to_document()
    }
}

impl SessionState {
    /// Enters the world. The level must pass validation.
    pub fn start(
        level: Arc<LevelSpec>,
        participant_id: impl Into<String>,
        session_id: impl Into<String>,
        started_at: impl Into<String>,
    ) -> Result<Self, EngineError> {
        if let Some(v) = validate_level(&level).into_iter().next() {
            return Err(EngineError::InvalidLevel(v));
        }
        let grid = level.grid().expect("validated level has a grid");
        Ok(Self {
            session_id: session_id.into(),
            participant_id: participant_id.into(),
            level,
            grid,
            started_at: started_at.into(),
            phase: Phase::Briefing,
            inventory: Vec::new(),
            trajectory: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn level(&self) -> &Arc<LevelSpec> {
        &self.level
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn started_at(&self) -> &str {
        &self.started_at
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn inventory(&self) -> &[ItemId] {
        &self.inventory
    }

    pub fn trajectory(&self) -> &[TrajectorySample] {
        &self.trajectory
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_complete(&self) -> bool {
        self.phase.is_complete()
    }

    fn n_checkpoints(&self) -> u32 {
        self.level.checkpoint_count() as u32
    }

    pub fn briefing(&self) -> Briefing {
        let level = &self.level;
        Briefing {
            level_id: level.level_id.clone(),
            name: level.name.clone(),
            width: level.width,
            height: level.height,
            terrain: level.terrain.rows().collect(),
            start: level.start,
            checkpoints: level
                .checkpoints
                .iter()
                .map(|cp| BriefingCheckpoint {
                    order: cp.order,
                    chest: cp.chest,
                    zone: cp.zone.clone(),
                })
                .collect(),
            items_to_collect: level
                .checkpoints
                .iter()
                .map(|cp| BriefingItem {
                    order: cp.order,
                    id: cp.target.clone(),
                    display_name: level.display_name(&cp.target),
                })
                .collect(),
            map_visible_during_play: level.map_visible_during_play,
        }
    }

    /// Current position: the latest sample, or the start cell.
    pub fn position(&self) -> Position {
        match self.trajectory.last() {
            Some(s) => Position { x: s.x, y: s.y },
            None => {
                let c = self.level.start_cell();
                Position {
                    x: f64::from(c.x),
                    y: f64::from(c.y),
                }
            }
        }
    }

    fn position_cell(&self) -> Cell {
        let p = self.position();
        Cell::containing(p.x, p.y)
    }

    /// Items taken per checkpoint so far, in checkpoint order.
    pub fn taken_items(&self) -> &[ItemId] {
        let closed = self
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ChestClosed { .. }))
            .count();
        &self.inventory[..closed.min(self.inventory.len())]
    }

    pub fn chest_view(&self) -> Option<ChestView> {
        let Phase::ChestOpen { checkpoint, .. } = &self.phase else {
            return None;
        };
        let cp = self.level.checkpoint(*checkpoint)?;
        let mut slots: Vec<Option<ItemId>> = cp.contents.iter().cloned().map(Some).collect();
        slots.resize(CHEST_CAPACITY, None);
        Some(ChestView {
            checkpoint: *checkpoint,
            slots,
        })
    }

    pub fn view(&self) -> SessionView {
        let phase = match &self.phase {
            Phase::Briefing => PhaseView::Briefing,
            Phase::Navigating { next_checkpoint } => PhaseView::Navigating {
                next_checkpoint: *next_checkpoint,
            },
            Phase::ChestOpen { checkpoint, taken } => PhaseView::ChestOpen {
                checkpoint: *checkpoint,
                taken: taken.clone(),
                chest: self.chest_view().expect("chest open"),
            },
            Phase::Crafting { cells } => PhaseView::Crafting { cells: cells.clone() },
            Phase::AwaitResult { cells, .. } => PhaseView::AwaitResult {
                cells: cells.clone(),
                result_ready: true,
            },
            Phase::Complete { craft_success } => PhaseView::Complete {
                craft_success: *craft_success,
                result_item: self.inventory.last().cloned(),
            },
        };
        SessionView {
            session_id: self.session_id.clone(),
            participant_id: self.participant_id.clone(),
            level_id: self.level.level_id.clone(),
            phase,
            inventory: self.inventory.clone(),
            position: self.position(),
            trajectory_len: self.trajectory.len(),
        }
    }

    fn log(&mut self, kind: EventKind) {
        let t_ms = self.trajectory.last().map_or(0, |s| s.t_ms);
        self.events.push(Event {
            t_ms,
            at_sample: self.trajectory.len(),
            kind,
        });
    }

    fn ensure_live(&self) -> Result<(), EngineError> {
        if self.is_complete() {
            Err(EngineError::Frozen)
        } else {
            Ok(())
        }
    }

    fn phase_error(&self, op: &'static str) -> EngineError {
        EngineError::Phase {
            op,
            phase: self.phase.kind(),
        }
    }

    pub fn acknowledge_briefing(&mut self) -> Result<(), EngineError> {
        self.ensure_live()?;
        if self.phase != Phase::Briefing {
            return Err(self.phase_error("acknowledge_briefing"));
        }
        self.phase = Phase::Navigating { next_checkpoint: 1 };
        self.log(EventKind::BriefingDone);
        Ok(())
    }

    /// Appends a batch atomically: every sample must be later than the one
    /// before it and lie on walkable space.
    pub fn record_samples(&mut self, samples: &[TrajectorySample]) -> Result<(), EngineError> {
        self.ensure_live()?;
        if self.phase == Phase::Briefing {
            return Err(self.phase_error("record_samples"));
        }
        let mut previous = self.trajectory.last().map(|s| s.t_ms);
        for (index, s) in samples.iter().enumerate() {
            if let Some(prev) = previous {
                if s.t_ms <= prev {
                    return Err(EngineError::SampleOrder {
                        index,
                        t_ms: s.t_ms,
                        previous: prev,
                    });
                }
            }
            previous = Some(s.t_ms);
        }
        if let Some((index, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !self.grid.point_walkable(s.x, s.y))
        {
            return Err(EngineError::SamplePosition { index, x: s.x, y: s.y });
        }
        self.trajectory.extend_from_slice(samples);
        Ok(())
    }

    pub fn open_chest(&mut self, checkpoint: u32) -> Result<(), EngineError> {
        self.ensure_live()?;
        let Phase::Navigating { next_checkpoint } = self.phase else {
            return Err(self.phase_error("open_chest"));
        };
        if checkpoint != next_checkpoint {
            self.log(EventKind::ChestOpenRejected {
                checkpoint,
                expected: next_checkpoint,
            });
            return Err(EngineError::Order {
                requested: checkpoint,
                expected: next_checkpoint,
            });
        }
        let chest = self.level.checkpoint(checkpoint).expect("validated order").chest;
        let position = self.position_cell();
        let distance = position.chebyshev(chest);
        if distance > 1 {
            return Err(EngineError::Proximity {
                checkpoint,
                position,
                distance,
            });
        }
        self.phase = Phase::ChestOpen {
            checkpoint,
            taken: None,
        };
        self.log(EventKind::ChestOpened { checkpoint });
        Ok(())
    }

    /// Picks an item from the open chest, replacing any earlier pick.
    pub fn select_chest_item(&mut self, item: &ItemId) -> Result<(), EngineError> {
        self.ensure_live()?;
        let Phase::ChestOpen { checkpoint, .. } = self.phase else {
            return Err(self.phase_error("select_chest_item"));
        };
        let cp = self.level.checkpoint(checkpoint).expect("validated order");
        if !cp.contents.contains(item) {
            return Err(EngineError::UnknownItem { item: item.clone() });
        }
        self.phase = Phase::ChestOpen {
            checkpoint,
            taken: Some(item.clone()),
        };
        self.log(EventKind::ItemSelected {
            checkpoint,
            item: item.clone(),
        });
        Ok(())
    }

    pub fn close_chest(&mut self) -> Result<(), EngineError> {
        self.ensure_live()?;
        let Phase::ChestOpen { checkpoint, taken } = &self.phase else {
            return Err(self.phase_error("close_chest"));
        };
        let checkpoint = *checkpoint;
        let Some(item) = taken.clone() else {
            return Err(EngineError::MustTakeOne { checkpoint });
        };
        if self.inventory.len() >= INVENTORY_CAPACITY {
            return Err(EngineError::InventoryFull);
        }
        self.inventory.push(item.clone());
        self.phase = if checkpoint < self.n_checkpoints() {
            Phase::Navigating {
                next_checkpoint: checkpoint + 1,
            }
        } else {
            Phase::Crafting {
                cells: Default::default(),
            }
        };
        self.log(EventKind::ChestClosed { checkpoint, item });
        Ok(())
    }

    /// Moves one unplaced inventory item into a craft cell. When every
    /// acquired item is placed the result is decided: the success item iff
    /// every checkpoint's taken item is its target.
    pub fn place_in_craft(&mut self, item: &ItemId, cell: u8) -> Result<(), EngineError> {
        self.ensure_live()?;
        let Phase::Crafting { cells } = &self.phase else {
            return Err(self.phase_error("place_in_craft"));
        };
        let slot = cell_index(cell)?;
        if cells[slot].is_some() {
            return Err(EngineError::CellOccupied { cell });
        }
        let owned = self.inventory.iter().filter(|i| *i == item).count();
        let placed = cells.iter().flatten().filter(|i| *i == item).count();
        if placed >= owned {
            return Err(EngineError::NotInInventory { item: item.clone() });
        }
        let mut cells = cells.clone();
        cells[slot] = Some(item.clone());
        let n_placed = cells.iter().flatten().count();
        self.log(EventKind::CraftPlaced {
            item: item.clone(),
            cell,
        });
        if n_placed == self.inventory.len() {
            let result_item = if self.taken_items() == self.level.targets().as_slice() {
                self.level.success_item.clone()
            } else {
                self.level.failure_item.clone()
            };
            self.phase = Phase::AwaitResult { cells, result_item };
            self.log(EventKind::CraftResultReady);
        } else {
            self.phase = Phase::Crafting { cells };
        }
        Ok(())
    }

    pub fn remove_from_craft(&mut self, cell: u8) -> Result<(), EngineError> {
        self.ensure_live()?;
        let Phase::Crafting { cells } = &mut self.phase else {
            return Err(self.phase_error("remove_from_craft"));
        };
        let slot = cell_index(cell)?;
        let Some(item) = cells[slot].take() else {
            return Err(EngineError::CellEmpty { cell });
        };
        self.log(EventKind::CraftRemoved { item, cell });
        Ok(())
    }

    pub fn take_craft_result(&mut self) -> Result<(), EngineError> {
        self.ensure_live()?;
        let Phase::AwaitResult { result_item, .. } = &self.phase else {
            return Err(self.phase_error("take_craft_result"));
        };
        let item = result_item.clone();
        if self.inventory.len() >= INVENTORY_CAPACITY {
            return Err(EngineError::InventoryFull);
        }
        let craft_success = item == self.level.success_item;
        self.inventory.push(item.clone());
        self.phase = Phase::Complete { craft_success };
        self.log(EventKind::ResultTaken {
            item,
            craft_success,
        });
        Ok(())
    }

    pub fn apply(&mut self, action: &Action) -> Result<(), EngineError> {
        match action {
            Action::OpenChest { checkpoint } => self.open_chest(*checkpoint),
            Action::SelectItem { item } => self.select_chest_item(item),
            Action::CloseChest => self.close_chest(),
            Action::PlaceCraft { item, cell } => self.place_in_craft(item, *cell),
            Action::RemoveCraft { cell } => self.remove_from_craft(*cell),
            Action::TakeResult => self.take_craft_result(),
        }
    }

    pub fn apply_step(&mut self, step: &Step) -> Result<(), EngineError> {
        match step {
            Step::AckBriefing => self.acknowledge_briefing(),
            Step::Samples { samples } => self.record_samples(samples),
            Step::Act(action) => self.apply(action),
        }
    }

    pub fn to_document(&self) -> SessionDocument {
        SessionDocument {
            format_version: SESSION_FORMAT_VERSION.to_owned(),
            session_id: self.session_id.clone(),
            participant_id: self.participant_id.clone(),
            level_id: self.level.level_id.clone(),
            started_at: self.started_at.clone(),
            events: self.events.clone(),
            trajectory: self.trajectory.clone(),
            final_phase: self.phase.clone(),
            inventory: self.inventory.clone(),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        self.to_document().to_canonical_json()
    }

    /// Rebuilds a session by re-executing its event log and trajectory
    /// against `level`, then checks the result matches the document.
    pub fn replay(doc: &SessionDocument, level: Arc<LevelSpec>) -> Result<Self, RestoreError> {
        check_format_version(&doc.format_version)?;
        if doc.level_id != level.level_id {
            return Err(RestoreError::LevelMismatch {
                expected: level.level_id.clone(),
                found: doc.level_id.clone(),
            });
        }
        let mut state = SessionState::start(
            level,
            doc.participant_id.clone(),
            doc.session_id.clone(),
            doc.started_at.clone(),
        )?;
        let mut fed = 0;
        for event in &doc.events {
            let upto = event.at_sample.min(doc.trajectory.len());
            if upto > fed {
                state.record_samples(&doc.trajectory[fed..upto])?;
                fed = upto;
            }
            match &event.kind {
                EventKind::BriefingDone => state.acknowledge_briefing()?,
                EventKind::ChestOpened { checkpoint } => state.open_chest(*checkpoint)?,
                EventKind::ChestOpenRejected { checkpoint, .. } => {
                    match state.open_chest(*checkpoint) {
                        Err(EngineError::Order { .. }) => {}
                        Err(e) => return Err(e.into()),
                        Ok(()) => {
                            return Err(RestoreError::Diverged(format!(
                                "rejected opening of checkpoint {checkpoint} succeeded on replay"
                            )))
                        }
                    }
                }
                EventKind::ItemSelected { item, .. } => state.select_chest_item(item)?,
                EventKind::ChestClosed { .. } => state.close_chest()?,
                EventKind::CraftPlaced { item, cell } => state.place_in_craft(item, *cell)?,
                EventKind::CraftRemoved { cell, .. } => state.remove_from_craft(*cell)?,
                // emitted by the placement that fills the craft area
                EventKind::CraftResultReady => {}
                EventKind::ResultTaken { .. } => state.take_craft_result()?,
            }
        }
        if fed < doc.trajectory.len() {
            state.record_samples(&doc.trajectory[fed..])?;
        }
        let rebuilt = state.to_document();
        if &rebuilt != doc {
            return Err(RestoreError::Diverged(first_difference(&rebuilt, doc)));
        }
        Ok(state)
    }
}

fn cell_index(cell: u8) -> Result<usize, EngineError> {
    let slot = usize::from(cell);
    if slot < CRAFT_CELLS {
        Ok(slot)
    } else {
        Err(EngineError::InvalidCell { cell })
    }
}

fn first_difference(a: &SessionDocument, b: &SessionDocument) -> String {
    if a.events != b.events {
        "events".into()
    } else if a.trajectory != b.trajectory {
        "trajectory".into()
    } else if a.final_phase != b.final_phase {
        "final_phase".into()
    } else if a.inventory != b.inventory {
        "inventory".into()
    } else {
        "header fields".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    const T0: &str = "1970-01-01T00:00:00Z";

    #[test]
    fn script_rebuilds_document() {
        let level = Arc::new(bundled::level(2));
        let mut s = SessionState::start(level.clone(), "p", "s", T0).unwrap();
        s.acknowledge_briefing().unwrap();
        let _ = s.open_chest(2);
        let at = s.grid().interaction_cells(level.checkpoints[0].chest)[0];
        s.record_samples(&[TrajectorySample::at_cell(5, at)]).unwrap();
        s.open_chest(1).unwrap();
        s.select_chest_item(&level.checkpoints[0].contents[1]).unwrap();
        s.close_chest().unwrap();
        s.record_samples(&[TrajectorySample::at_cell(9, at)]).unwrap();
        let doc = s.to_document();
        let mut again = SessionState::start(level, "p", "s", T0).unwrap();
        for step in doc.to_script() {
            let _ = again.apply_step(&step);
        }
        assert_eq!(again.to_document(), doc);
    }

    fn two_cp_level() -> Arc<LevelSpec> {
        Arc::new(bundled::level(2))
    }

    fn started() -> SessionState {
        SessionState::start(two_cp_level(), "p01", "s-1", T0).unwrap()
    }

    fn at(state: &mut SessionState, t: u64, c: Cell) {
        state.record_samples(&[TrajectorySample::at_cell(t, c)]).unwrap();
    }

    fn stand_by_chest(state: &mut SessionState, k: u32, t: u64) {
        let chest = state.level().checkpoint(k).unwrap().chest;
        let c = state.grid().interaction_cells(chest)[0];
        at(state, t, c);
    }

    #[test]
    fn start_enters_briefing() {
        let s = started();
        assert_eq!(s.phase(), &Phase::Briefing);
        assert!(s.inventory().is_empty());
        assert!(s.trajectory().is_empty());
    }

    #[test]
    fn start_rejects_invalid_level() {
        let mut level = bundled::level(2);
        // wall off the second chest
        let chest = level.checkpoints[1].chest;
        let grid = level.grid().unwrap();
        for c in grid.interaction_cells(chest) {
            level.terrain.0[c.y as usize][c.x as usize] = crate::CellKind::Blocked;
        }
        let err = SessionState::start(Arc::new(level), "p", "s", T0).unwrap_err();
        assert!(matches!(err, EngineError::InvalidLevel(_)));
    }

    #[test]
    fn unreachable_level_message() {
        let mut level = bundled::level(1);
        // wall the start in
        let s = level.start_cell();
        for n in s.neighbors4() {
            level.terrain.0[n.y as usize][n.x as usize] = crate::CellKind::Blocked;
        }
        let err = SessionState::start(Arc::new(level), "p", "s", T0).unwrap_err();
        assert_eq!(err.to_string(), "invalid_level: unreachable_waypoint");
    }

    #[test]
    fn briefing_lists_checkpoints_in_order_and_is_pure() {
        let s = started();
        let b = s.briefing();
        assert_eq!(b, s.briefing());
        let orders: Vec<u32> = b.checkpoints.iter().map(|c| c.order).collect();
        assert_eq!(orders, vec![1, 2]);
        let items: Vec<&str> = b.items_to_collect.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(items, vec!["stick", "coal"]);
    }

    #[test]
    fn ack_twice_is_phase_error() {
        let mut s = started();
        s.acknowledge_briefing().unwrap();
        assert_eq!(s.phase(), &Phase::Navigating { next_checkpoint: 1 });
        assert_eq!(s.events().len(), 1);
        assert_eq!(s.acknowledge_briefing().unwrap_err().code(), "phase_error");
    }

    #[test]
    fn samples_rejected_during_briefing() {
        let mut s = started();
        let err = s.record_samples(&[TrajectorySample::new(0, 1.0, 1.0)]).unwrap_err();
        assert_eq!(err.code(), "phase_error");
    }

    #[test]
    fn sample_batches_are_atomic() {
        let mut s = started();
        s.acknowledge_briefing().unwrap();
        s.record_samples(&[TrajectorySample::new(100, 1.0, 1.0), TrajectorySample::new(200, 2.0, 1.0)])
            .unwrap();
        assert_eq!(s.trajectory().len(), 2);
        let err = s
            .record_samples(&[TrajectorySample::new(300, 3.0, 1.0), TrajectorySample::new(150, 3.0, 1.0)])
            .unwrap_err();
        assert_eq!(err.code(), "sample_order_error");
        let err = s.record_samples(&[TrajectorySample::new(150, 2.0, 1.0)]).unwrap_err();
        assert_eq!(err.code(), "sample_order_error");
        assert_eq!(s.trajectory().len(), 2);
    }

    #[test]
    fn sample_on_blocked_cell_names_index() {
        let mut s = started();
        s.acknowledge_briefing().unwrap();
        let err = s
            .record_samples(&[TrajectorySample::new(1, 1.0, 1.0), TrajectorySample::new(2, 0.0, 0.0)])
            .unwrap_err();
        assert!(matches!(err, EngineError::SamplePosition { index: 1, .. }));
        let err = s.record_samples(&[TrajectorySample::new(3, 1.0, f64::NAN)]).unwrap_err();
        assert_eq!(err.code(), "position_error");
        assert!(s.trajectory().is_empty());
    }

    #[test]
    fn chest_order_and_proximity() {
        let mut s = started();
        s.acknowledge_briefing().unwrap();
        let err = s.open_chest(1).unwrap_err();
        assert_eq!(err.code(), "proximity_error");
        let err = s.open_chest(2).unwrap_err();
        assert_eq!(err.code(), "order_error");
        assert!(matches!(
            s.events().last().unwrap().kind,
            EventKind::ChestOpenRejected { checkpoint: 2, expected: 1 }
        ));
        stand_by_chest(&mut s, 1, 10);
        s.open_chest(1).unwrap();
        assert_eq!(s.phase(), &Phase::ChestOpen { checkpoint: 1, taken: None });
        let view = s.chest_view().unwrap();
        assert_eq!(view.slots.len(), 27);
        assert_eq!(view.slots[0], Some(ItemId::from("stick")));
        assert_eq!(view.slots[3], None);
    }

    #[test]
    fn swap_while_open_then_lock_on_close() {
        let mut s = started();
        s.acknowledge_briefing().unwrap();
        stand_by_chest(&mut s, 1, 10);
        s.open_chest(1).unwrap();
        assert_eq!(s.close_chest().unwrap_err().code(), "must_take_one");
        s.select_chest_item(&"bone".into()).unwrap();
        s.select_chest_item(&"stick".into()).unwrap();
        assert_eq!(
            s.select_chest_item(&"sword".into()).unwrap_err().code(),
            "unknown_item"
        );
        s.close_chest().unwrap();
        assert_eq!(s.inventory(), &[ItemId::from("stick")]);
        assert_eq!(s.phase(), &Phase::Navigating { next_checkpoint: 2 });
        // re-open of a looted chest is refused and logged
        assert_eq!(s.open_chest(1).unwrap_err().code(), "order_error");
    }

    fn to_crafting(pick1: &str, pick2: &str) -> SessionState {
        let mut s = started();
        s.acknowledge_briefing().unwrap();
        stand_by_chest(&mut s, 1, 10);
        s.open_chest(1).unwrap();
        s.select_chest_item(&pick1.into()).unwrap();
        s.close_chest().unwrap();
        stand_by_chest(&mut s, 2, 20);
        s.open_chest(2).unwrap();
        s.select_chest_item(&pick2.into()).unwrap();
        s.close_chest().unwrap();
        s
    }

    #[test]
    fn last_chest_leads_to_crafting() {
        let s = to_crafting("stick", "coal");
        assert_eq!(s.phase().kind(), PhaseKind::Crafting);
    }

    #[test]
    fn correct_craft_succeeds() {
        let mut s = to_crafting("stick", "coal");
        s.place_in_craft(&"coal".into(), 0).unwrap();
        assert_eq!(s.place_in_craft(&"stick".into(), 0).unwrap_err().code(), "cell_occupied");
        assert_eq!(
            s.place_in_craft(&"coal".into(), 1).unwrap_err().code(),
            "item_not_in_inventory"
        );
        assert_eq!(s.place_in_craft(&"stick".into(), 9).unwrap_err().code(), "invalid_cell");
        s.place_in_craft(&"stick".into(), 4).unwrap();
        assert!(matches!(
            s.phase(),
            Phase::AwaitResult { result_item, .. } if result_item.as_str() == "torch"
        ));
        s.take_craft_result().unwrap();
        assert_eq!(s.phase(), &Phase::Complete { craft_success: true });
        assert_eq!(s.inventory().len(), 3);
    }

    #[test]
    fn wrong_item_crafts_the_other_outcome() {
        let mut s = to_crafting("stick", "flint");
        s.place_in_craft(&"stick".into(), 0).unwrap();
        s.place_in_craft(&"flint".into(), 8).unwrap();
        assert!(matches!(
            s.phase(),
            Phase::AwaitResult { result_item, .. } if result_item.as_str() == "dead_bush"
        ));
        s.take_craft_result().unwrap();
        assert_eq!(s.phase(), &Phase::Complete { craft_success: false });
    }

    #[test]
    fn remove_from_craft_returns_item() {
        let mut s = to_crafting("stick", "coal");
        assert_eq!(s.remove_from_craft(3).unwrap_err().code(), "cell_empty");
        s.place_in_craft(&"coal".into(), 3).unwrap();
        s.remove_from_craft(3).unwrap();
        s.place_in_craft(&"coal".into(), 5).unwrap();
        s.place_in_craft(&"stick".into(), 3).unwrap();
        assert_eq!(s.phase().kind(), PhaseKind::AwaitResult);
        assert_eq!(s.remove_from_craft(3).unwrap_err().code(), "phase_error");
    }

    #[test]
    fn complete_session_is_frozen() {
        let mut s = to_crafting("stick", "coal");
        s.place_in_craft(&"coal".into(), 0).unwrap();
        s.place_in_craft(&"stick".into(), 1).unwrap();
        s.take_craft_result().unwrap();
        let before = s.to_canonical_json();
        for err in [
            s.take_craft_result().unwrap_err(),
            s.acknowledge_briefing().unwrap_err(),
            s.record_samples(&[TrajectorySample::new(999, 1.0, 1.0)]).unwrap_err(),
            s.open_chest(1).unwrap_err(),
            s.remove_from_craft(0).unwrap_err(),
        ] {
            assert_eq!(err.code(), "frozen_session");
        }
        assert_eq!(before, s.to_canonical_json());
    }

    #[test]
    fn view_hides_result_until_taken() {
        let mut s = to_crafting("stick", "coal");
        s.place_in_craft(&"coal".into(), 0).unwrap();
        s.place_in_craft(&"stick".into(), 1).unwrap();
        let json = serde_json::to_string(&s.view()).unwrap();
        assert!(!json.contains("torch") && !json.contains("dead_bush"), "{json}");
        s.take_craft_result().unwrap();
        let json = serde_json::to_string(&s.view()).unwrap();
        assert!(json.contains("torch"));
    }

    #[test]
    fn replay_reproduces_document() {
        let mut s = to_crafting("bone", "coal");
        let _ = s.open_chest(1);
        s.record_samples(&[TrajectorySample::new(30, 1.0, 1.0)]).unwrap();
        s.place_in_craft(&"coal".into(), 0).unwrap();
        s.remove_from_craft(0).unwrap();
        s.place_in_craft(&"coal".into(), 2).unwrap();
        s.place_in_craft(&"bone".into(), 7).unwrap();
        s.take_craft_result().unwrap();
        let doc = s.to_document();
        let replayed = SessionState::replay(&doc, s.level().clone()).unwrap();
        assert_eq!(replayed.to_canonical_json(), s.to_canonical_json());
    }

    #[test]
    fn replay_detects_tampering() {
        let s = to_crafting("stick", "coal");
        let mut doc = s.to_document();
        doc.final_phase = Phase::Briefing;
        assert!(matches!(
            SessionState::replay(&doc, s.level().clone()),
            Err(RestoreError::Diverged(_))
        ));
        let mut doc = s.to_document();
        doc.format_version = "2.0".into();
        assert!(matches!(
            SessionState::replay(&doc, s.level().clone()),
            Err(RestoreError::UnsupportedVersion(_))
        ));
    }

    #[test]
    fn transition_graph_edges() {
        use PhaseKind::*;
        assert!(is_legal_transition(Briefing, Navigating(1), 3));
        assert!(is_legal_transition(ChestOpen(2), Navigating(3), 3));
        assert!(!is_legal_transition(ChestOpen(3), Navigating(4), 3));
        assert!(is_legal_transition(ChestOpen(3), Crafting, 3));
        assert!(!is_legal_transition(Crafting, Complete, 3));
        assert!(!is_legal_transition(Navigating(1), ChestOpen(2), 3));
    }

    #[test]
    fn action_wire_format() {
        let a: Action = serde_json::from_str(r#"{"action":"place_craft","item":"coal","cell":4}"#).unwrap();
        assert_eq!(a, Action::PlaceCraft { item: "coal".into(), cell: 4 });
        let step: Step = serde_json::from_str(r#"{"step":"act","action":"close_chest"}"#).unwrap();
        assert_eq!(step, Step::Act(Action::CloseChest));
    }
}
