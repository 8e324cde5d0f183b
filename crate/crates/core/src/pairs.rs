//! Paired observations across two games and their correlation.
//!
//! Each game contributes one CSV file with the header
//! `participant_id,level_rank,normalized_distance`. Rows are joined on
//! `(participant_id, level_rank)`; rows without a partner are reported,
//! never dropped silently.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsReport;
use crate::stats::{interpret_r, pearson, Band, StatsError};

pub const PAIRS_HEADER: [&str; 3] = ["participant_id", "level_rank", "normalized_distance"];
pub const CORRELATION_FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub participant_id: String,
    pub level_rank: u8,
    pub normalized_distance: f64,
}

impl From<&MetricsReport> for DistanceRecord {
    fn from(m: &MetricsReport) -> Self {
        Self {
            participant_id: m.participant_id.clone(),
            level_rank: m.level_rank,
            normalized_distance: m.normalized_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedObservation {
    pub participant_id: String,
    pub level_rank: u8,
    pub value_a: f64,
    pub value_b: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservationKey {
    pub participant_id: String,
    pub level_rank: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJoin {
    pub pairs: Vec<PairedObservation>,
    pub unmatched_a: Vec<ObservationKey>,
    pub unmatched_b: Vec<ObservationKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Error)]
pub enum PairsError {
    #[error("duplicate observation for ({participant_id}, level {level_rank}) on side {side:?}")]
    Ambiguous {
        side: Side,
        participant_id: String,
        level_rank: u8,
    },
    #[error("expected header `{}`, found `{found}`", PAIRS_HEADER.join(","))]
    Header { found: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("level {0} has fewer than 2 cohort values or zero spread")]
    DegenerateCohort(u8),
}

impl PairsError {
    pub fn code(&self) -> &'static str {
        match self {
            PairsError::Ambiguous { .. } => "ambiguous_join",
            PairsError::Header { .. } => "bad_header",
            PairsError::Csv(_) => "csv_error",
            PairsError::Stats(e) => e.code(),
            PairsError::DegenerateCohort(_) => "degenerate_cohort",
        }
    }
}

fn index(records: &[DistanceRecord], side: Side) -> Result<BTreeMap<ObservationKey, f64>, PairsError> {
    let mut map = BTreeMap::new();
    for r in records {
        let key = ObservationKey {
            participant_id: r.participant_id.clone(),
            level_rank: r.level_rank,
        };
        if map.insert(key, r.normalized_distance).is_some() {
            return Err(PairsError::Ambiguous {
                side,
                participant_id: r.participant_id.clone(),
                level_rank: r.level_rank,
            });
        }
    }
    Ok(map)
}

/// Inner join on `(participant_id, level_rank)`, sorted by key.
pub fn build_pairs(a: &[DistanceRecord], b: &[DistanceRecord]) -> Result<PairJoin, PairsError> {
    let ia = index(a, Side::A)?;
    let mut ib = index(b, Side::B)?;
    let mut pairs = Vec::new();
    let mut unmatched_a = Vec::new();
    for (key, va) in ia {
        match ib.remove(&key) {
            Some(vb) => pairs.push(PairedObservation {
                participant_id: key.participant_id,
                level_rank: key.level_rank,
                value_a: va,
                value_b: vb,
            }),
            None => unmatched_a.push(key),
        }
    }
    Ok(PairJoin {
        pairs,
        unmatched_a,
        unmatched_b: ib.into_keys().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One pair per (participant, level).
    #[default]
    Pairs,
    /// Per-participant means across levels.
    Participant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Traveled distance over optimal course length, as recorded.
    #[default]
    RatioToOptimal,
    /// Ratios standardized per level against a reference cohort.
    ZscorePerLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub band: Band,
}

/// Pearson's r of `value_a` against `value_b`.
pub fn pearson_r(pairs: &[PairedObservation]) -> Result<CorrelationResult, StatsError> {
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().map(|p| (p.value_a, p.value_b)).unzip();
    let r = pearson(&a, &b)?;
    Ok(CorrelationResult {
        r,
        n: pairs.len(),
        band: interpret_r(r)?,
    })
}

/// Collapses pairs to one per participant by averaging over levels.
/// The resulting `level_rank` is 0.
pub fn aggregate_by_participant(pairs: &[PairedObservation]) -> Vec<PairedObservation> {
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for p in pairs {
        let e = acc.entry(&p.participant_id).or_default();
        e.0 += p.value_a;
        e.1 += p.value_b;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(id, (sa, sb, n))| PairedObservation {
            participant_id: id.to_owned(),
            level_rank: 0,
            value_a: sa / n as f64,
            value_b: sb / n as f64,
        })
        .collect()
}

/// Re-expresses records under `mode`. For z-scores each level's mean and
/// sample standard deviation come from `cohort`.
pub fn normalize_records(
    records: &[DistanceRecord],
    mode: NormalizationMode,
    cohort: &[DistanceRecord],
) -> Result<Vec<DistanceRecord>, PairsError> {
    match mode {
        NormalizationMode::RatioToOptimal => Ok(records.to_vec()),
        NormalizationMode::ZscorePerLevel => {
            let mut by_level: HashMap<u8, Vec<f64>> = HashMap::new();
            for r in cohort {
                by_level.entry(r.level_rank).or_default().push(r.normalized_distance);
            }
            let mut moments = HashMap::new();
            for (level, vals) in &by_level {
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                moments.insert(*level, (mean, var.sqrt()));
            }
            records
                .iter()
                .map(|r| match moments.get(&r.level_rank) {
                    Some(&(mean, sd)) if sd > 0.0 && sd.is_finite() => Ok(DistanceRecord {
                        normalized_distance: (r.normalized_distance - mean) / sd,
                        ..r.clone()
                    }),
                    _ => Err(PairsError::DegenerateCohort(r.level_rank)),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedReport {
    pub a: Vec<ObservationKey>,
    pub b: Vec<ObservationKey>,
}

/// Output document of the cross-game analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub format_version: String,
    pub r: f64,
    pub n: usize,
    pub band: Band,
    pub aggregation: Aggregation,
    pub normalization: NormalizationMode,
    pub unmatched: UnmatchedReport,
}

impl CorrelationReport {
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }
}

/// Full pipeline: optional re-normalization (each side against itself),
/// join, optional aggregation, correlation.
pub fn analyze(
    a: &[DistanceRecord],
    b: &[DistanceRecord],
    aggregation: Aggregation,
    normalization: NormalizationMode,
) -> Result<CorrelationReport, PairsError> {
    let a = normalize_records(a, normalization, a)?;
    let b = normalize_records(b, normalization, b)?;
    let join = build_pairs(&a, &b)?;
    let pairs = match aggregation {
        Aggregation::Pairs => join.pairs,
        Aggregation::Participant => aggregate_by_participant(&join.pairs),
    };
    let c = pearson_r(&pairs)?;
    Ok(CorrelationReport {
        format_version: CORRELATION_FORMAT_VERSION.to_owned(),
        r: c.r,
        n: c.n,
        band: c.band,
        aggregation,
        normalization,
        unmatched: UnmatchedReport {
            a: join.unmatched_a,
            b: join.unmatched_b,
        },
    })
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<DistanceRecord>, PairsError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(PAIRS_HEADER) {
        return Err(PairsError::Header {
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    rdr.deserialize().map(|r| r.map_err(PairsError::from)).collect()
}

pub fn write_records<W: Write>(writer: W, records: &[DistanceRecord]) -> Result<(), PairsError> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::CRLF)
        .from_writer(writer);
    wtr.write_record(PAIRS_HEADER)?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn records_to_csv(records: &[DistanceRecord]) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}
