//! The five demo levels shipped with the crate, in increasing order of
//! difficulty (1 to 5 checkpoints, strictly increasing optimal course).

use crate::level::LevelSpec;

pub const LEVEL1: &str = include_str!("../levels/level1.json");
pub const LEVEL2: &str = include_str!("../levels/level2.json");
pub const LEVEL3: &str = include_str!("../levels/level3.json");
pub const LEVEL4: &str = include_str!("../levels/level4.json");
pub const LEVEL5: &str = include_str!("../levels/level5.json");

/// Canonical level documents, ordered by difficulty rank.
pub const LEVEL_TEXTS: [&str; 5] = [LEVEL1, LEVEL2, LEVEL3, LEVEL4, LEVEL5];

/// Bundled level with the given difficulty rank (1..=5).
///
/// Panics for ranks outside 1..=5.
pub fn level(rank: usize) -> LevelSpec {
    LevelSpec::parse(LEVEL_TEXTS[rank - 1]).expect("bundled level parses")
}

pub fn levels() -> Vec<LevelSpec> {
    (1..=LEVEL_TEXTS.len()).map(level).collect()
}

pub fn by_id(level_id: &str) -> Option<LevelSpec> {
    levels().into_iter().find(|l| l.level_id == level_id)
}
