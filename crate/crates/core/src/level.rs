//! Level definitions and the level file format.
//!
//! A level file is one JSON document. Terrain rows are strings where `.`
//! is walkable and `#` is blocked; `x` is the column and `y` the row, both
//! 0-based from the top-left corner.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slots in a chest (three rows of nine).
pub const CHEST_CAPACITY: usize = 27;
/// Slots in the player inventory (four rows of nine).
pub const INVENTORY_CAPACITY: usize = 36;
/// Cells of the crafting area (3x3). Bounds the number of checkpoints.
pub const CRAFT_CELLS: usize = 9;
pub const MAX_CHECKPOINTS: usize = CRAFT_CELLS;
pub const MIN_GRID_SIDE: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Catalog entry for an item that may appear in a level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: ItemId,
    pub display_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Walkable,
    Blocked,
}

impl CellKind {
    pub fn as_char(self) -> char {
        match self {
            CellKind::Walkable => '.',
            CellKind::Blocked => '#',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellKind::Walkable),
            '#' => Some(CellKind::Blocked),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    /// The 4-connected neighbours, in N, E, S, W order. May be out of bounds.
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x - 1, self.y),
        ]
    }

    /// Cell whose unit square (centred on integer coordinates) contains the point.
    pub fn containing(x: f64, y: f64) -> Cell {
        Cell::new((x + 0.5).floor() as i32, (y + 0.5).floor() as i32)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Facing {
    N,
    E,
    S,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    pub x: i32,
    pub y: i32,
    pub facing: Facing,
}

impl Start {
    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    /// 1-based visiting order.
    pub order: u32,
    /// Marked ("brick") ground around the checkpoint.
    pub zone: Vec<Cell>,
    pub chest: Cell,
    /// Chest slots in order; at most [`CHEST_CAPACITY`].
    pub contents: Vec<ItemId>,
    pub target: ItemId,
}

/// Row-major terrain, serialized as one string per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terrain(pub Vec<Vec<CellKind>>);

impl Terrain {
    pub fn parse_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, String> {
        rows.iter()
            .enumerate()
            .map(|(y, row)| {
                row.as_ref()
                    .chars()
                    .map(|c| {
                        CellKind::from_char(c)
                            .ok_or_else(|| format!("invalid terrain character {c:?} in row {y}"))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Terrain)
    }

    pub fn rows(&self) -> impl Iterator<Item = String> + '_ {
        self.0.iter().map(|r| r.iter().map(|k| k.as_char()).collect())
    }
}

impl Serialize for Terrain {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.rows())
    }
}

impl<'de> Deserialize<'de> for Terrain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<String>::deserialize(deserializer)?;
        Terrain::parse_rows(&rows).map_err(de::Error::custom)
    }
}

/// Static world definition. Parsing does not imply validity; run
/// [`crate::validate_level`] before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub level_id: String,
    pub name: String,
    pub difficulty_rank: u8,
    pub width: u32,
    pub height: u32,
    pub terrain: Terrain,
    pub start: Start,
    pub checkpoints: Vec<Checkpoint>,
    pub items: Vec<Item>,
    pub success_item: ItemId,
    pub failure_item: ItemId,
    #[serde(default)]
    pub map_visible_during_play: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl LevelSpec {
    pub fn parse(text: &str) -> Result<Self, LevelParseError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| LevelParseError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        serde_path_to_error::deserialize(value).map_err(|e| LevelParseError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Self, LevelParseError> {
        let text = std::str::from_utf8(bytes).map_err(|e| LevelParseError::Syntax {
            line: 1,
            column: e.valid_up_to(),
            message: format!("invalid UTF-8: {e}"),
        })?;
        Self::parse(text)
    }

    /// Canonical text: pretty-printed JSON in declaration key order plus a
    /// trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("level serialization is infallible");
        s.push('\n');
        s
    }

    pub fn start_cell(&self) -> Cell {
        self.start.cell()
    }

    pub fn checkpoint_count(&self) -> usize {
        self.checkpoints.len()
    }

    /// Checkpoint with the given 1-based order, if present.
    pub fn checkpoint(&self, order: u32) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.order == order)
    }

    /// Target items in checkpoint order.
    pub fn targets(&self) -> Vec<ItemId> {
        self.checkpoints.iter().map(|c| c.target.clone()).collect()
    }

    pub fn item(&self, id: &ItemId) -> Option<&Item> {
        self.items.iter().find(|i| &i.id == id)
    }

    pub fn display_name(&self, id: &ItemId) -> String {
        self.item(id)
            .map(|i| i.display_name.clone())
            .unwrap_or_else(|| id.to_string())
    }

    pub fn terrain_shape_ok(&self) -> bool {
        self.terrain.0.len() == self.height as usize
            && self.terrain.0.iter().all(|r| r.len() == self.width as usize)
    }

    /// Dense grid view, or `None` when the terrain rows disagree with the
    /// declared dimensions.
    pub fn grid(&self) -> Option<Grid> {
        if !self.terrain_shape_ok() {
            return None;
        }
        Some(Grid {
            width: self.width as usize,
            height: self.height as usize,
            cells: self.terrain.0.iter().flatten().copied().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
}

impl Grid {
    pub fn new(width: usize, height: usize, cells: Vec<CellKind>) -> Self {
        assert_eq!(cells.len(), width * height, "grid cell count mismatch");
        Self { width, height, cells }
    }

    pub fn open(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![CellKind::Walkable; width * height])
    }

    /// Builds a grid from `.`/`#` rows. Panics on ragged or invalid input;
    /// intended for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let terrain = Terrain::parse_rows(rows).expect("invalid fixture grid");
        let width = terrain.0.first().map_or(0, Vec::len);
        assert!(terrain.0.iter().all(|r| r.len() == width), "ragged fixture grid");
        Self::new(width, terrain.0.len(), terrain.0.into_iter().flatten().collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn index(&self, c: Cell) -> Option<usize> {
        self.in_bounds(c).then(|| c.y as usize * self.width + c.x as usize)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn kind(&self, c: Cell) -> Option<CellKind> {
        self.index(c).map(|i| self.cells[i])
    }

    pub fn is_walkable(&self, c: Cell) -> bool {
        self.kind(c) == Some(CellKind::Walkable)
    }

    pub fn set(&mut self, c: Cell, kind: CellKind) {
        let i = self.index(c).expect("cell out of bounds");
        self.cells[i] = kind;
    }

    pub fn walkable_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        c.neighbors4().into_iter().filter(|n| self.is_walkable(*n))
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, CellKind)> + '_ {
        self.cells.iter().enumerate().map(|(i, k)| (self.cell_at(i), *k))
    }

    /// Walkable cells within Chebyshev distance 1 of `target`, row-major.
    pub fn interaction_cells(&self, target: Cell) -> Vec<Cell> {
        let mut out = Vec::new();
        for dy in -1..=1 {
            for dx in -1..=1 {
                let c = Cell::new(target.x + dx, target.y + dy);
                if c != target && self.is_walkable(c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Whether a continuous point lies inside the grid on walkable space.
    pub fn point_walkable(&self, x: f64, y: f64) -> bool {
        x.is_finite() && y.is_finite() && self.is_walkable(Cell::containing(x, y))
    }
}

/// One timestamped position, in cell units. Integer coordinates are cell
/// centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySample {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
}

impl TrajectorySample {
    pub fn new(t_ms: u64, x: f64, y: f64) -> Self {
        Self { t_ms, x, y }
    }

    pub fn at_cell(t_ms: u64, c: Cell) -> Self {
        Self::new(t_ms, f64::from(c.x), f64::from(c.y))
    }

    pub fn cell(&self) -> Cell {
        Cell::containing(self.x, self.y)
    }
}
