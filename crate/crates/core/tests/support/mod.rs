//! Independent oracles and handcrafted fixtures shared by the integration
//! tests. Nothing here calls into the pathfinding or statistics code under
//! test.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wayfinder_core::engine::{is_legal_transition, Action, EventKind, PhaseKind, Step};
use wayfinder_core::level::{Cell, LevelSpec, TrajectorySample};
use wayfinder_core::{ItemId, SessionState};

/// Blocked mask, `true` = walkable, indexed `[y][x]`.
pub type Mask = Vec<Vec<bool>>;

pub fn mask_from_rows(rows: &[&str]) -> Mask {
    rows.iter().map(|r| r.chars().map(|c| c != '#').collect()).collect()
}

pub fn walkable(mask: &Mask, x: i32, y: i32) -> bool {
    y >= 0 && x >= 0 && (y as usize) < mask.len() && (x as usize) < mask[0].len() && mask[y as usize][x as usize]
}

/// All-pairs-free distance oracle: Bellman-Ford style relaxation until a
/// fixed point. Deliberately not a queue-based search.
pub fn relax_distances(mask: &Mask, from: (i32, i32)) -> Vec<Vec<Option<u32>>> {
    let h = mask.len();
    let w = mask[0].len();
    let mut d = vec![vec![None; w]; h];
    if !walkable(mask, from.0, from.1) {
        return d;
    }
    d[from.1 as usize][from.0 as usize] = Some(0u32);
    loop {
        let mut changed = false;
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                if !walkable(mask, x, y) {
                    continue;
                }
                let best = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter(|(dx, dy)| walkable(mask, x + dx, y + dy))
                    .filter_map(|(dx, dy)| d[(y + dy) as usize][(x + dx) as usize])
                    .map(|v: u32| v + 1)
                    .min();
                let cur = &mut d[y as usize][x as usize];
                if let Some(b) = best {
                    if cur.is_none_or(|c| b < c) {
                        *cur = Some(b);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return d;
        }
    }
}

pub fn oracle_distance(mask: &Mask, from: (i32, i32), targets: &[(i32, i32)]) -> Option<u32> {
    let d = relax_distances(mask, from);
    targets
        .iter()
        .filter(|(x, y)| walkable(mask, *x, *y))
        .filter_map(|(x, y)| d[*y as usize][*x as usize])
        .min()
}

/// Walkable cells within Chebyshev 1 of `chest`, excluding the chest.
pub fn oracle_interaction(mask: &Mask, chest: (i32, i32)) -> Vec<(i32, i32)> {
    let mut out = vec![];
    for y in chest.1 - 1..=chest.1 + 1 {
        for x in chest.0 - 1..=chest.0 + 1 {
            if (x, y) != chest && walkable(mask, x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Exhaustive minimum over every combination of one interaction cell per
/// checkpoint.
pub fn exhaustive_course(mask: &Mask, start: (i32, i32), sets: &[Vec<(i32, i32)>]) -> Option<u32> {
    fn go(mask: &Mask, at: (i32, i32), rest: &[Vec<(i32, i32)>]) -> Option<u32> {
        let Some((set, tail)) = rest.split_first() else {
            return Some(0);
        };
        let d = relax_distances(mask, at);
        set.iter()
            .filter_map(|c| {
                let leg = d[c.1 as usize][c.0 as usize]?;
                Some(leg + go(mask, *c, tail)?)
            })
            .min()
    }
    go(mask, start, sets)
}

/// Per-leg greedy: always walk to the nearest interaction cell (first in
/// row-major order on ties).
pub fn greedy_course(mask: &Mask, start: (i32, i32), sets: &[Vec<(i32, i32)>]) -> Option<u32> {
    let mut at = start;
    let mut total = 0;
    for set in sets {
        let d = relax_distances(mask, at);
        let (leg, next) = set
            .iter()
            .filter_map(|c| d[c.1 as usize][c.0 as usize].map(|v| (v, *c)))
            .min_by_key(|(v, _)| *v)?;
        total += leg;
        at = next;
    }
    Some(total)
}

/// Textbook single-pass Pearson formula.
pub fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

// ---------------------------------------------------------------- fixtures

/// 8x8 open grid with a wall down column 4, open only at (4, 7).
pub const WALL_GAP_ROWS: [&str; 8] = [
    "....#...", "....#...", "....#...", "....#...", "....#...", "....#...", "....#...", "........",
];

/// Frozen from [`oracle_distance`] on [`WALL_GAP_ROWS`], (0,0) -> (7,0).
pub const WALL_GAP_GOLDEN: u32 = 21;

/// Optimal course lengths of the bundled levels, frozen from the level
/// generator's own search and cross-checked by [`exhaustive_course`].
pub const BUNDLED_OPTIMAL: [u32; 5] = [38, 56, 117, 167, 207];

fn level_json(
    id: &str,
    rows: &[&str],
    start: (i32, i32),
    checkpoints: &[((i32, i32), &[&str], &str)],
    items: &[&str],
) -> String {
    let mask = mask_from_rows(rows);
    let cps: Vec<serde_json::Value> = checkpoints
        .iter()
        .enumerate()
        .map(|(i, (chest, contents, target))| {
            let zone: Vec<_> = oracle_interaction(&mask, *chest)
                .into_iter()
                .map(|(x, y)| serde_json::json!({"x": x, "y": y}))
                .collect();
            serde_json::json!({
                "order": i + 1,
                "zone": zone,
                "chest": {"x": chest.0, "y": chest.1},
                "contents": contents,
                "target": target,
            })
        })
        .collect();
    let catalog: Vec<_> = items
        .iter()
        .map(|i| serde_json::json!({"id": i, "display_name": i.to_uppercase()}))
        .collect();
    serde_json::to_string(&serde_json::json!({
        "level_id": id,
        "name": id,
        "difficulty_rank": 1,
        "width": rows[0].len(),
        "height": rows.len(),
        "terrain": rows,
        "start": {"x": start.0, "y": start.1, "facing": "E"},
        "checkpoints": cps,
        "items": catalog,
        "success_item": "win",
        "failure_item": "lose",
        "map_visible_during_play": false,
    }))
    .unwrap()
}

/// Greedy routing takes the upper side of chest 1 and must double back
/// through the gap at (0,1); the optimal route stops below it.
pub const GREEDY_ROWS: [&str; 4] = [".......", ".######", ".......", "#######"];
pub const GREEDY_START: (i32, i32) = (0, 0);
pub const GREEDY_CHESTS: [(i32, i32); 2] = [(3, 1), (6, 3)];

pub fn greedy_fixture() -> LevelSpec {
    LevelSpec::parse(&level_json(
        "greedy-trap",
        &GREEDY_ROWS,
        GREEDY_START,
        &[(GREEDY_CHESTS[0], &["a"], "a"), (GREEDY_CHESTS[1], &["b"], "b")],
        &["a", "b", "win", "lose"],
    ))
    .unwrap()
}

/// 8x8 level whose second chest sits in a sealed room.
pub const WALLED_ROWS: [&str; 8] = [
    "........", "........", "...#....", "........", "########", "........", "....#...", "........",
];

pub fn walled_off_fixture() -> LevelSpec {
    LevelSpec::parse(&level_json(
        "walled-off",
        &WALLED_ROWS,
        (0, 0),
        &[((3, 2), &["a"], "a"), ((4, 6), &["b"], "b")],
        &["a", "b", "win", "lose"],
    ))
    .unwrap()
}

// ------------------------------------------------------------ engine fuzz

/// Fuzzer vocabulary; indices are reduced modulo the level's sizes.
#[derive(Debug, Clone)]
pub enum FuzzOp {
    Ack,
    /// Teleport next to a checkpoint's chest (index into checkpoints).
    MoveNear(usize),
    /// Jump to an arbitrary cell, possibly blocked or outside.
    MoveTo(i32, i32),
    /// Batch with a timestamp at or before the last sample.
    StaleSample,
    Open(u32),
    Select(usize),
    Close,
    Place(usize, u8),
    Remove(u8),
    Take,
    /// Whatever a cooperative player would do next; the payload picks
    /// among plausible choices.
    Progress(usize),
}

pub fn random_op(rng: &mut impl RngCore) -> FuzzOp {
    match rng.random_range(0..16) {
        0 => FuzzOp::Ack,
        1 | 2 => FuzzOp::MoveNear(rng.random_range(0..6)),
        3 => FuzzOp::MoveTo(rng.random_range(-2..40), rng.random_range(-2..30)),
        4 => FuzzOp::StaleSample,
        5 => FuzzOp::Open(rng.random_range(0..7)),
        6 => FuzzOp::Select(rng.random_range(0..8)),
        7 => FuzzOp::Close,
        8 => FuzzOp::Place(rng.random_range(0..8), rng.random_range(0..11)),
        9 => {
            if rng.random_bool(0.5) {
                FuzzOp::Remove(rng.random_range(0..10))
            } else {
                FuzzOp::Take
            }
        }
        _ => FuzzOp::Progress(rng.random_range(0..64)),
    }
}

pub fn to_step(state: &SessionState, op: &FuzzOp, clock: &mut u64) -> Step {
    let level = state.level();
    let catalog: Vec<ItemId> = level.items.iter().map(|i| i.id.clone()).collect();
    match op {
        FuzzOp::Ack => Step::AckBriefing,
        FuzzOp::MoveNear(k) => {
            let cp = &level.checkpoints[k % level.checkpoints.len()];
            let cells = state.grid().interaction_cells(cp.chest);
            let c = cells[*k % cells.len()];
            *clock += 100;
            Step::Samples {
                samples: vec![TrajectorySample::at_cell(*clock, c)],
            }
        }
        FuzzOp::MoveTo(x, y) => {
            *clock += 100;
            Step::Samples {
                samples: vec![TrajectorySample::at_cell(*clock, Cell::new(*x, *y))],
            }
        }
        FuzzOp::StaleSample => {
            let t = state.trajectory().last().map_or(0, |s| s.t_ms);
            let c = level.start_cell();
            Step::Samples {
                samples: vec![
                    TrajectorySample::at_cell(t + 1, c),
                    TrajectorySample::at_cell(t, c),
                ],
            }
        }
        FuzzOp::Open(k) => Step::Act(Action::OpenChest { checkpoint: *k }),
        FuzzOp::Select(i) => Step::Act(Action::SelectItem {
            item: catalog[i % catalog.len()].clone(),
        }),
        FuzzOp::Close => Step::Act(Action::CloseChest),
        FuzzOp::Place(i, cell) => Step::Act(Action::PlaceCraft {
            item: catalog[i % catalog.len()].clone(),
            cell: *cell,
        }),
        FuzzOp::Remove(cell) => Step::Act(Action::RemoveCraft { cell: *cell }),
        FuzzOp::Take => Step::Act(Action::TakeResult),
        FuzzOp::Progress(r) => progress_step(state, *r, clock),
    }
}

fn progress_step(state: &SessionState, r: usize, clock: &mut u64) -> Step {
    use wayfinder_core::Phase;
    let level = state.level();
    match state.phase() {
        Phase::Briefing => Step::AckBriefing,
        Phase::Navigating { next_checkpoint } => {
            let cp = level.checkpoint(*next_checkpoint).unwrap();
            let at = state.position();
            if Cell::containing(at.x, at.y).chebyshev(cp.chest) <= 1 && r % 4 != 0 {
                Step::Act(Action::OpenChest { checkpoint: *next_checkpoint })
            } else {
                let cells = state.grid().interaction_cells(cp.chest);
                *clock += 100;
                Step::Samples {
                    samples: vec![TrajectorySample::at_cell(*clock, cells[r % cells.len()])],
                }
            }
        }
        Phase::ChestOpen { checkpoint, taken } => {
            let cp = level.checkpoint(*checkpoint).unwrap();
            if taken.is_some() && r % 3 != 0 {
                Step::Act(Action::CloseChest)
            } else {
                Step::Act(Action::SelectItem {
                    item: cp.contents[r % cp.contents.len()].clone(),
                })
            }
        }
        Phase::Crafting { cells } => {
            let empty: Vec<u8> = (0..9u8).filter(|c| cells[*c as usize].is_none()).collect();
            let placed: Vec<&ItemId> = cells.iter().flatten().collect();
            let mut free: Vec<ItemId> = state.inventory().to_vec();
            for p in placed {
                let i = free.iter().position(|f| f == p).unwrap();
                free.remove(i);
            }
            if free.is_empty() || r % 7 == 0 {
                let occupied: Vec<u8> = (0..9u8).filter(|c| cells[*c as usize].is_some()).collect();
                Step::Act(Action::RemoveCraft {
                    cell: occupied.get(r % occupied.len().max(1)).copied().unwrap_or(0),
                })
            } else {
                Step::Act(Action::PlaceCraft {
                    item: free[r % free.len()].clone(),
                    cell: empty[r % empty.len()],
                })
            }
        }
        Phase::AwaitResult { .. } | Phase::Complete { .. } => Step::Act(Action::TakeResult),
    }
}

fn closed_chests(state: &SessionState) -> usize {
    state
        .events()
        .iter()
        .filter(|e| matches!(e.kind, EventKind::ChestClosed { .. }))
        .count()
}

/// Drives a fresh session with `ops`, checking after every step that
///  - any phase change is an edge of the task graph,
///  - inventory length equals closed chests (plus the result once complete)
///    and never exceeds 36,
///  - events and trajectory only ever grow by appending,
///  - trajectory timestamps stay strictly increasing,
///  - a refused operation leaves the state untouched (except the logged
///    out-of-order opening), and a complete session never changes.
/// Returns the final phase on success.
pub fn check_engine_invariants(level: Arc<LevelSpec>, ops: &[FuzzOp]) -> Result<PhaseKind, String> {
    let n = level.checkpoints.len() as u32;
    let mut state = SessionState::start(level, "fuzz", "fuzz-1", "1970-01-01T00:00:00Z")
        .map_err(|e| e.to_string())?;
    let mut clock = 0u64;
    for (i, op) in ops.iter().enumerate() {
        let before = state.clone();
        let step = to_step(&state, op, &mut clock);
        let result = state.apply_step(&step);
        let ctx = |msg: &str| format!("op {i} {op:?}: {msg}");

        let (from, to) = (before.phase().kind(), state.phase().kind());
        if from != to && !is_legal_transition(from, to, n) {
            return Err(ctx(&format!("illegal transition {from} -> {to}")));
        }
        if from == PhaseKind::Complete && state != before {
            return Err(ctx("complete session mutated"));
        }
        if state.events().len() < before.events().len() || state.events()[..before.events().len()] != *before.events() {
            return Err(ctx("event log rewritten"));
        }
        if state.trajectory().len() < before.trajectory().len()
            || state.trajectory()[..before.trajectory().len()] != *before.trajectory()
        {
            return Err(ctx("trajectory rewritten"));
        }
        if state.trajectory().windows(2).any(|w| w[0].t_ms >= w[1].t_ms) {
            return Err(ctx("trajectory timestamps not strictly increasing"));
        }
        if state.events().windows(2).any(|w| w[0].t_ms > w[1].t_ms) {
            return Err(ctx("event timestamps decrease"));
        }
        let expected_inv = closed_chests(&state) + usize::from(state.is_complete());
        if state.inventory().len() != expected_inv || state.inventory().len() > 36 {
            return Err(ctx(&format!(
                "inventory {} but {expected_inv} expected",
                state.inventory().len()
            )));
        }
        if let Err(e) = result {
            let rejected_open = e.code() == "order_error"
                && matches!(
                    state.events().last().map(|e| &e.kind),
                    Some(EventKind::ChestOpenRejected { .. })
                )
                && state.events().len() == before.events().len() + 1;
            if !rejected_open && state != before {
                return Err(ctx(&format!("refused op ({}) changed the state", e.code())));
            }
        }
        if state.is_complete() && state.inventory().len() != n as usize + 1 {
            return Err(ctx("complete session must hold N + 1 items"));
        }
    }
    Ok(state.phase().kind())
}

/// A sequence biased to make progress: mostly sensible moves with noise.
pub fn random_ops(rng: &mut ChaCha8Rng, len: usize) -> Vec<FuzzOp> {
    (0..len).map(|_| random_op(rng)).collect()
}

pub fn fuzz_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ------------------------------------------------------------ statistics

/// Random dataset with non-zero variance on both sides.
pub fn random_dataset(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    loop {
        let n = rng.random_range(2..60);
        let scale = 10f64.powi(rng.random_range(-3..4));
        let coupling = rng.random_range(-2.0..2.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| coupling * v + rng.random_range(-1.0..1.0) * scale)
            .collect();
        let spread = |v: &[f64]| v.iter().any(|e| (e - v[0]).abs() > scale * 1e-6);
        if spread(&x) && spread(&y) {
            return (x, y);
        }
    }
}

/// |r| <= 1, symmetry, positive-affine invariance and the sign flip for
/// negative scale, plus agreement with [`naive_pearson`].
pub fn check_pearson_properties(x: &[f64], y: &[f64], a: f64, b: f64) -> Result<(), String> {
    use wayfinder_core::stats::pearson;
    let r = pearson(x, y).map_err(|e| e.to_string())?;
    if !(-1.0..=1.0).contains(&r) {
        return Err(format!("|r| > 1: {r}"));
    }
    let r_yx = pearson(y, x).map_err(|e| e.to_string())?;
    if (r - r_yx).abs() > 1e-12 {
        return Err(format!("asymmetric: {r} vs {r_yx}"));
    }
    let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
    let r_aff = pearson(&scaled, y).map_err(|e| e.to_string())?;
    if (r_aff - r).abs() > 1e-9 {
        return Err(format!("affine a={a} b={b}: {r_aff} vs {r}"));
    }
    let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
    let r_neg = pearson(&flipped, y).map_err(|e| e.to_string())?;
    if (r_neg + r).abs() > 1e-9 {
        return Err(format!("negative scale: {r_neg} vs {}", -r));
    }
    let naive = naive_pearson(x, y);
    if (naive - r).abs() > 1e-6 {
        return Err(format!("oracle disagrees: {naive} vs {r}"));
    }
    Ok(())
}

pub fn pearson_suite(datasets: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..datasets {
        let (x, y) = random_dataset(&mut rng);
        let a = rng.random_range(0.01..100.0);
        let b = rng.random_range(-100.0..100.0);
        check_pearson_properties(&x, &y, a, b).map_err(|e| format!("dataset {i}: {e}"))?;
    }
    Ok(())
}

// --------------------------------------------------- craft enumeration

/// Plays `level` once for every combination of one chest item per
/// checkpoint, walking straight to each chest. Returns (choice, success).
pub fn craft_enumeration(level: Arc<LevelSpec>) -> Vec<(Vec<ItemId>, bool)> {
    let mut combos: Vec<Vec<ItemId>> = vec![vec![]];
    for cp in &level.checkpoints {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                cp.contents.iter().map(move |item| {
                    let mut c = c.clone();
                    c.push(item.clone());
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|choice| {
            let mut s = SessionState::start(level.clone(), "enum", "enum", "1970-01-01T00:00:00Z").unwrap();
            s.acknowledge_briefing().unwrap();
            for (k, (cp, item)) in level.checkpoints.iter().zip(&choice).enumerate() {
                let at = s.grid().interaction_cells(cp.chest)[0];
                s.record_samples(&[TrajectorySample::at_cell(k as u64 * 10, at)]).unwrap();
                s.open_chest(cp.order).unwrap();
                s.select_chest_item(item).unwrap();
                s.close_chest().unwrap();
            }
            for (cell, item) in choice.iter().enumerate() {
                s.place_in_craft(item, cell as u8).unwrap();
            }
            s.take_craft_result().unwrap();
            let wayfinder_core::Phase::Complete { craft_success } = s.phase() else {
                unreachable!()
            };
            (choice, *craft_success)
        })
        .collect()
}

/// Property-test config for integration tests (no regression files: the
/// tests live outside the crate's source tree).
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}

// ------------------------------------------------------------- cohorts

/// Pearson r of the default seeded cohort (10 participants x 5 bundled
/// levels, jitter 0.05, seed 2024), frozen from a direct evaluation.
pub const COHORT_GOLDEN_R: f64 = 0.9107739151246863;

// --------------------------------------------------------- persistence

/// A mix of complete agent runs and partial fuzzed sessions.
pub fn random_session(rng: &mut ChaCha8Rng, levels: &[Arc<LevelSpec>], id: usize) -> SessionState {
    use wayfinder_core::agents::{run_agent_as, AgentProfile};
    let level = levels[rng.random_range(0..levels.len())].clone();
    let session_id = format!("s{id:04}");
    if rng.random_bool(0.5) {
        let profile = AgentProfile::noisy(rng.random_range(0.0..0.4), rng.random_range(0.0..0.4), rng.next_u64());
        run_agent_as(level, &profile, &format!("p{}", id % 17), &session_id).unwrap()
    } else {
        let len = rng.random_range(0..50);
        let ops = random_ops(rng, len);
        let mut s = SessionState::start(level, format!("p{}", id % 17), session_id, "2026-01-01T00:00:00Z").unwrap();
        let mut clock = 0;
        for op in &ops {
            let step = to_step(&s, op, &mut clock);
            let _ = s.apply_step(&step);
        }
        s
    }
}

#[cfg(feature = "fs")]
/// Saves and reloads `n` random sessions, requiring identical canonical
/// documents and byte-identical metrics for complete ones. Returns the
/// number of complete sessions seen.
pub fn store_round_trip(root: &std::path::Path, n: usize, seed: u64) -> Result<usize, String> {
    use wayfinder_core::metrics::session_metrics;
    use wayfinder_core::store::Store;
    let levels: Vec<Arc<LevelSpec>> = wayfinder_core::bundled::levels().into_iter().map(Arc::new).collect();
    let store = Store::open(root).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut complete = 0;
    for i in 0..n {
        let s = random_session(&mut rng, &levels, i);
        store.save_session(&s).map_err(|e| e.to_string())?;
        let resolve = |id: &str| levels.iter().find(|l| l.level_id == id).cloned();
        let back = store.load_session(s.session_id(), resolve).map_err(|e| format!("{}: {e}", s.session_id()))?;
        if back.to_canonical_json() != s.to_canonical_json() {
            return Err(format!("{} changed across save/load", s.session_id()));
        }
        if s.is_complete() {
            complete += 1;
            let m0 = session_metrics(&s, s.level()).map_err(|e| e.to_string())?;
            let m1 = session_metrics(&back, back.level()).map_err(|e| e.to_string())?;
            if m0.to_canonical_json() != m1.to_canonical_json() {
                return Err(format!("{} metrics differ after replay", s.session_id()));
            }
        }
    }
    let listed = store.list_sessions().map_err(|e| e.to_string())?;
    if listed.len() != n {
        return Err(format!("listed {} sessions, saved {n}", listed.len()));
    }
    Ok(complete)
}

#[cfg(feature = "fs")]
/// Kills writes at every byte offset of a session document. The target
/// path must keep its previous content (or stay absent), and any file
/// holding a strict prefix of the document must fail to load.
pub fn fault_injection(root: &std::path::Path) -> Result<usize, String> {
    use wayfinder_core::agents::{run_agent, AgentProfile};
    use wayfinder_core::store::{read_session_document, write_atomic_interrupted, Store};
    let level = Arc::new(wayfinder_core::bundled::level(1));
    let store = Store::open(root).map_err(|e| e.to_string())?;
    let old = run_agent(level.clone(), &AgentProfile::optimal()).unwrap();
    let new = run_agent(level.clone(), &AgentProfile::noisy(0.3, 0.0, 1)).unwrap();
    let path = store.session_path(old.session_id());
    let fresh = store.session_path("never-written");
    store.save_session(&old).map_err(|e| e.to_string())?;
    let bytes = new.to_canonical_json().into_bytes();
    let mut checked = 0;
    for cut in 0..bytes.len() {
        let tmp = write_atomic_interrupted(&path, &bytes, cut).map_err(|e| e.to_string())?;
        write_atomic_interrupted(&fresh, &bytes, cut).map_err(|e| e.to_string())?;
        let doc = read_session_document(&path).map_err(|e| format!("cut {cut}: {e}"))?;
        if doc != old.to_document() {
            return Err(format!("cut {cut}: target changed by an interrupted write"));
        }
        if fresh.exists() {
            return Err(format!("cut {cut}: interrupted write created the target"));
        }
        // a torn file, were it ever exposed, must not load as a session
        let torn = std::str::from_utf8(&bytes[..cut]).unwrap_or("");
        if cut + 1 < bytes.len()
            && wayfinder_core::store::parse_document::<wayfinder_core::engine::SessionDocument>(&tmp, torn).is_ok()
        {
            return Err(format!("cut {cut}: torn prefix parsed"));
        }
        std::fs::remove_file(&tmp).ok();
        checked += 1;
    }
    for entry in std::fs::read_dir(store.sessions_dir()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let name = name.to_string_lossy();
        if name.starts_with(".tmp-") {
            std::fs::remove_file(store.sessions_dir().join(&*name)).ok();
        }
    }
    if store.list_sessions().map_err(|e| e.to_string())? != vec![old.session_id().to_owned()] {
        return Err("partial files leaked into the session listing".into());
    }
    Ok(checked)
}
