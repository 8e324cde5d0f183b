//! Shortest paths on the 4-connected unit-cost grid.
//!
//! Two independent searches are provided: a plain breadth-first search and
//! an A* variant with a Manhattan heuristic. Both must agree on length.
//! The optimal course over all checkpoints is solved exactly by dynamic
//! programming over interaction cells.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use thiserror::Error;

use crate::level::{Cell, Grid, LevelSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    /// Number of unit moves.
    pub length: u32,
    /// Visited cells, both endpoints included (`length + 1` entries).
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("start cell {0} is not walkable")]
    StartNotWalkable(Cell),
    #[error("target set is empty")]
    NoTargets,
}

/// Single-source breadth-first distances with parent links.
#[derive(Debug, Clone)]
pub struct DistanceField {
    source: Cell,
    width: usize,
    dist: Vec<Option<u32>>,
    parent: Vec<Option<usize>>,
}

impl DistanceField {
    pub fn compute(grid: &Grid, source: Cell) -> Result<Self, PathError> {
        let src = grid
            .index(source)
            .filter(|_| grid.is_walkable(source))
            .ok_or(PathError::StartNotWalkable(source))?;
        let mut dist = vec![None; grid.len()];
        let mut parent = vec![None; grid.len()];
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap_or_default();
            for n in grid.walkable_neighbors(grid.cell_at(i)) {
                let j = grid.index(n).expect("neighbour in bounds");
                if dist[j].is_none() {
                    dist[j] = Some(d + 1);
                    parent[j] = Some(i);
                    queue.push_back(j);
                }
            }
        }
        Ok(Self {
            source,
            width: grid.width(),
            dist,
            parent,
        })
    }

    pub fn source(&self) -> Cell {
        self.source
    }

    fn idx(&self, c: Cell) -> Option<usize> {
        let height = self.dist.len() / self.width.max(1);
        (c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < height)
            .then(|| c.y as usize * self.width + c.x as usize)
    }

    pub fn distance(&self, c: Cell) -> Option<u32> {
        self.idx(c).and_then(|i| self.dist[i])
    }

    pub fn path_to(&self, c: Cell) -> Option<Path> {
        let mut i = self.idx(c)?;
        let length = self.dist[i]?;
        let mut cells = vec![c];
        while let Some(p) = self.parent[i] {
            cells.push(Cell::new((p % self.width) as i32, (p / self.width) as i32));
            i = p;
        }
        cells.reverse();
        Some(Path { length, cells })
    }
}

/// Minimal 4-connected walk from `from` to any cell of `targets`.
/// `Ok(None)` means no target is reachable.
pub fn shortest_path(grid: &Grid, from: Cell, targets: &[Cell]) -> Result<Option<Path>, PathError> {
    if targets.is_empty() {
        return Err(PathError::NoTargets);
    }
    let start = grid
        .index(from)
        .filter(|_| grid.is_walkable(from))
        .ok_or(PathError::StartNotWalkable(from))?;
    let mut is_target = vec![false; grid.len()];
    for t in targets {
        if let Some(i) = grid.index(*t) {
            is_target[i] = true;
        }
    }
    let mut parent: Vec<Option<usize>> = vec![None; grid.len()];
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::from([(start, 0u32)]);
    seen[start] = true;
    while let Some((i, d)) = queue.pop_front() {
        if is_target[i] {
            return Ok(Some(walk_back(grid, &parent, i, d)));
        }
        for n in grid.walkable_neighbors(grid.cell_at(i)) {
            let j = grid.index(n).expect("neighbour in bounds");
            if !seen[j] {
                seen[j] = true;
                parent[j] = Some(i);
                queue.push_back((j, d + 1));
            }
        }
    }
    Ok(None)
}

/// A* search with the consistent heuristic "Manhattan distance to the
/// nearest target". Returns the same lengths as [`shortest_path`].
pub fn shortest_path_astar(
    grid: &Grid,
    from: Cell,
    targets: &[Cell],
) -> Result<Option<Path>, PathError> {
    if targets.is_empty() {
        return Err(PathError::NoTargets);
    }
    let start = grid
        .index(from)
        .filter(|_| grid.is_walkable(from))
        .ok_or(PathError::StartNotWalkable(from))?;
    let goals: Vec<Cell> = targets.iter().copied().filter(|t| grid.in_bounds(*t)).collect();
    let h = |c: Cell| -> u32 {
        goals
            .iter()
            .map(|g| c.manhattan(*g) as u32)
            .min()
            .unwrap_or(0)
    };
    let mut g_score: Vec<Option<u32>> = vec![None; grid.len()];
    let mut parent: Vec<Option<usize>> = vec![None; grid.len()];
    let mut closed = vec![false; grid.len()];
    let mut open = BinaryHeap::new();
    g_score[start] = Some(0);
    open.push(Reverse((h(from), 0u32, start)));
    while let Some(Reverse((_, g, i))) = open.pop() {
        if closed[i] {
            continue;
        }
        closed[i] = true;
        let c = grid.cell_at(i);
        if goals.contains(&c) {
            return Ok(Some(walk_back(grid, &parent, i, g)));
        }
        for n in grid.walkable_neighbors(c) {
            let j = grid.index(n).expect("neighbour in bounds");
            let ng = g + 1;
            if !closed[j] && g_score[j].is_none_or(|old| ng < old) {
                g_score[j] = Some(ng);
                parent[j] = Some(i);
                open.push(Reverse((ng + h(n), ng, j)));
            }
        }
    }
    Ok(None)
}

fn walk_back(grid: &Grid, parent: &[Option<usize>], end: usize, length: u32) -> Path {
    let mut cells = vec![grid.cell_at(end)];
    let mut i = end;
    while let Some(p) = parent[i] {
        cells.push(grid.cell_at(p));
        i = p;
    }
    cells.reverse();
    Path { length, cells }
}

/// Start cell plus, per checkpoint in order, the walkable cells from which
/// its chest can be opened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CourseWaypoints {
    pub start: Cell,
    pub interaction_sets: Vec<Vec<Cell>>,
}

impl CourseWaypoints {
    pub fn from_level(level: &LevelSpec, grid: &Grid) -> Self {
        Self {
            start: level.start_cell(),
            interaction_sets: level
                .checkpoints
                .iter()
                .map(|cp| grid.interaction_cells(cp.chest))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CourseError {
    #[error("terrain does not match the declared dimensions")]
    BadTerrain,
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("checkpoint {checkpoint} has no walkable interaction cell")]
    NoInteractionCell { checkpoint: u32 },
    #[error("checkpoint {checkpoint} is unreachable")]
    Unreachable { checkpoint: u32 },
}

/// An optimal route through every checkpoint in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Course {
    pub length: u32,
    /// Arrival (interaction) cell per checkpoint.
    pub stops: Vec<Cell>,
    /// Full cell-by-cell walk from the start, `length + 1` cells.
    pub path: Vec<Cell>,
    /// Index into `path` at which each stop is reached.
    pub stop_indices: Vec<usize>,
}

/// Exact minimum over all choices of interaction cell per checkpoint.
pub fn optimal_course(grid: &Grid, waypoints: &CourseWaypoints) -> Result<Course, CourseError> {
    let mut fields: HashMap<Cell, DistanceField> = HashMap::new();
    // layer entries: (cell, cost, index into previous layer)
    let mut layers: Vec<Vec<(Cell, u32, usize)>> = vec![vec![(waypoints.start, 0, 0)]];
    fields.insert(waypoints.start, DistanceField::compute(grid, waypoints.start)?);

    for (k, set) in waypoints.interaction_sets.iter().enumerate() {
        let checkpoint = k as u32 + 1;
        if set.is_empty() {
            return Err(CourseError::NoInteractionCell { checkpoint });
        }
        let prev = layers.last().expect("start layer");
        for (p, _, _) in prev {
            if !fields.contains_key(p) {
                fields.insert(*p, DistanceField::compute(grid, *p)?);
            }
        }
        let mut layer = Vec::new();
        for &c in set {
            let best = prev
                .iter()
                .enumerate()
                .filter_map(|(pi, (p, cost, _))| fields[p].distance(c).map(|d| (cost + d, pi)))
                .min();
            if let Some((cost, pi)) = best {
                layer.push((c, cost, pi));
            }
        }
        if layer.is_empty() {
            return Err(CourseError::Unreachable { checkpoint });
        }
        layers.push(layer);
    }

    let last = layers.last().expect("start layer");
    let (mut at, length) = last
        .iter()
        .enumerate()
        .map(|(i, (_, cost, _))| (i, *cost))
        .min_by_key(|(_, cost)| *cost)
        .expect("non-empty layer");

    let mut stops = Vec::with_capacity(layers.len() - 1);
    for layer in layers.iter().skip(1).rev() {
        let (cell, _, prev) = layer[at];
        stops.push(cell);
        at = prev;
    }
    stops.reverse();

    let mut path = vec![waypoints.start];
    let mut stop_indices = Vec::with_capacity(stops.len());
    let mut from = waypoints.start;
    for &stop in &stops {
        let leg = fields[&from].path_to(stop).expect("reachable by construction");
        path.extend(leg.cells.into_iter().skip(1));
        stop_indices.push(path.len() - 1);
        from = stop;
    }
    debug_assert_eq!(path.len() as u32, length + 1);
    Ok(Course {
        length,
        stops,
        path,
        stop_indices,
    })
}

pub fn optimal_course_for_level(level: &LevelSpec) -> Result<Course, CourseError> {
    let grid = level.grid().ok_or(CourseError::BadTerrain)?;
    optimal_course(&grid, &CourseWaypoints::from_level(level, &grid))
}

pub fn optimal_course_length(level: &LevelSpec) -> Result<u32, CourseError> {
    optimal_course_for_level(level).map(|c| c.length)
}
