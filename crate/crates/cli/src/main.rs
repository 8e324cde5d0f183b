//! `wayfinder`: operator command line.
//!
//! Machine-readable results go to stdout as JSON; diagnostics go to stderr.
//! Exit status is 0 on success, 1 for a domain violation or mismatch and 2
//! for I/O or usage errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wayfinder_core::agents::{generate_cohort, run_agent_as, AgentProfile, CohortConfig};
use wayfinder_core::engine::SessionDocument;
use wayfinder_core::export::export_trajectories;
use wayfinder_core::metrics::session_metrics;
use wayfinder_core::pairs::{analyze, read_records, records_to_csv, Aggregation, NormalizationMode};
use wayfinder_core::store::{self, Store};
use wayfinder_core::{bundled, validate_level, LevelSpec, SessionState};

#[derive(Parser)]
#[command(name = "wayfinder", version, about = "Wayfinding task tooling")]
struct Cli {
    /// Store root used for defaults (levels, sessions, reports).
    #[arg(long, global = true, env = "WAYFINDER_DATA", default_value = "wayfinder-data")]
    data_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a level file against the level rules.
    Validate { level: PathBuf },
    /// Play one agent session on a level.
    Simulate {
        #[arg(long)]
        level: PathBuf,
        #[arg(long, value_enum)]
        agent: AgentArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-step sidestep probability (noisy agents).
        #[arg(long, default_value_t = 0.3)]
        detour_rate: f64,
        /// Per-chest probability of taking a non-target item (noisy agents).
        #[arg(long, default_value_t = 0.0)]
        wrong_item_rate: f64,
        #[arg(long, default_value = "agent")]
        participant: String,
        #[arg(long)]
        session_id: Option<String>,
        /// Also write the session and its metrics into the store.
        #[arg(long)]
        save: bool,
    },
    /// Correlate two pairs files.
    Analyze {
        #[arg(long)]
        pairs_a: PathBuf,
        #[arg(long)]
        pairs_b: PathBuf,
        #[arg(long, value_enum, default_value = "pairs")]
        aggregate: AggregateArg,
        #[arg(long, value_enum, default_value = "ratio-to-optimal")]
        normalization: NormalizationArg,
    },
    /// Recompute a saved session's metrics by replaying it.
    Replay {
        session: PathBuf,
        /// Level file; defaults to the store's levels, then the bundled ones.
        #[arg(long)]
        level: Option<PathBuf>,
        /// Compare against stored metrics.
        #[arg(long)]
        check: bool,
        /// Stored metrics file; defaults to the store's report for the session.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Draw every session of one level over its map.
    ExportTrajectories {
        #[arg(long)]
        level: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a synthetic two-game cohort as a pair of pairs files.
    Cohort {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = CohortConfig::default().n_participants)]
        participants: usize,
        #[arg(long, default_value_t = CohortConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = CohortConfig::default().jitter)]
        jitter: f64,
        /// Base detour intensity.
        #[arg(long, default_value_t = CohortConfig::default().template.detour_rate)]
        detour_rate: f64,
        /// Also write every game-A session document under `out_dir/sessions`.
        #[arg(long)]
        sessions: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Optimal,
    Noisy,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Pairs,
    Participant,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    RatioToOptimal,
    ZscorePerLevel,
}

/// A failed command: exit status plus a stable code.
struct Failure {
    exit: u8,
    code: String,
    message: String,
    /// Replaces the default `{error}` document on stdout.
    body: Option<serde_json::Value>,
}

impl Failure {
    fn domain(code: &str, message: impl ToString) -> Self {
        Self {
            exit: 1,
            code: code.to_owned(),
            message: message.to_string(),
            body: None,
        }
    }

    fn io(code: &str, message: impl ToString) -> Self {
        Self {
            exit: 2,
            code: code.to_owned(),
            message: message.to_string(),
            body: None,
        }
    }
}

type Outcome = Result<serde_json::Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { level } => validate(&level),
        Command::Simulate {
            level,
            agent,
            seed,
            detour_rate,
            wrong_item_rate,
            participant,
            session_id,
            save,
        } => {
            let profile = match agent {
                AgentArg::Optimal => AgentProfile::optimal(),
                AgentArg::Noisy => AgentProfile::noisy(detour_rate, wrong_item_rate, seed),
            };
            simulate(&level, &profile, &participant, session_id, save.then_some(&cli.data_root))
        }
        Command::Analyze {
            pairs_a,
            pairs_b,
            aggregate,
            normalization,
        } => analyze_files(&pairs_a, &pairs_b, aggregate, normalization),
        Command::Replay {
            session,
            level,
            check,
            metrics,
        } => replay(&cli.data_root, &session, level.as_deref(), check, metrics.as_deref()),
        Command::ExportTrajectories {
            level,
            sessions,
            out,
            csv,
        } => export(&level, &sessions, &out, csv.as_deref()),
        Command::Cohort {
            out_dir,
            participants,
            seed,
            jitter,
            detour_rate,
            sessions,
        } => {
            let d = CohortConfig::default();
            let config = CohortConfig {
                n_participants: participants,
                seed,
                jitter,
                template: AgentProfile { detour_rate, ..d.template },
                ..d
            };
            cohort(&out_dir, &config, sessions)
        }
    };
    match result {
        Ok(value) => {
            emit(&value);
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("wayfinder: {}: {}", f.code, f.message);
            if f.exit == 1 {
                let body = f.body.unwrap_or_else(|| serde_json::json!({"error": {"code": f.code, "message": f.message}}));
                emit(&body);
            }
            ExitCode::from(f.exit)
        }
    }
}

/// Writes one JSON document to stdout; a closed pipe is not an error.
fn emit(v: &serde_json::Value) {
    let mut out = io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, v);
    let _ = writeln!(out);
}

fn to_value(v: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("json output")
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io("io_error", format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io("io_error", format!("{}: {e}", dir.display())))?;
    }
    store::write_atomic(path, text.as_bytes()).map_err(|e| Failure::io("io_error", format!("{}: {e}", path.display())))
}

fn load_level(path: &Path) -> Result<LevelSpec, Failure> {
    let text = read_text(path)?;
    LevelSpec::parse(&text).map_err(|e| Failure::io("level_parse_error", format!("{}: {e}", path.display())))
}

/// Loads a level that must also pass validation.
fn load_valid_level(path: &Path) -> Result<Arc<LevelSpec>, Failure> {
    let level = load_level(path)?;
    let report = validate_level(&level);
    if let Some(first) = report.first() {
        return Err(Failure::domain("invalid_level", format!("{}: {first}", path.display())));
    }
    Ok(Arc::new(level))
}

fn load_session(path: &Path) -> Result<SessionDocument, Failure> {
    let text = read_text(path)?;
    store::parse_document(path, &text).map_err(|e| Failure::io(e.code(), e))
}

fn validate(path: &Path) -> Outcome {
    let level = load_level(path)?;
    let violations = validate_level(&level);
    let body = serde_json::json!({
        "level_id": level.level_id,
        "valid": violations.is_empty(),
        "violations": violations,
    });
    if violations.is_empty() {
        return Ok(body);
    }
    for v in &violations {
        eprintln!("{v}");
    }
    Err(Failure {
        body: Some(body),
        ..Failure::domain("invalid_level", format!("{} violation(s)", violations.len()))
    })
}

fn simulate(
    path: &Path,
    profile: &AgentProfile,
    participant: &str,
    session_id: Option<String>,
    save_to: Option<&PathBuf>,
) -> Outcome {
    let level = load_valid_level(path)?;
    let session_id = session_id.unwrap_or_else(|| format!("{}-{:?}-{}", level.level_id, profile.kind, profile.seed).to_lowercase());
    let state = run_agent_as(level.clone(), profile, participant, &session_id).map_err(|e| Failure::domain("agent_error", e))?;
    let metrics = session_metrics(&state, &level).map_err(|e| Failure::domain(e.code(), e))?;
    if let Some(root) = save_to {
        let store = Store::open(root).map_err(|e| Failure::io(e.code(), e))?;
        store.save_session(&state).map_err(|e| Failure::io(e.code(), e))?;
        store.save_metrics(&metrics).map_err(|e| Failure::io(e.code(), e))?;
    }
    Ok(serde_json::json!({ "session": to_value(&state.to_document()), "metrics": to_value(&metrics) }))
}

fn analyze_files(a: &Path, b: &Path, aggregate: AggregateArg, normalization: NormalizationArg) -> Outcome {
    let read = |p: &Path| -> Result<_, Failure> {
        let text = read_text(p)?;
        read_records(text.as_bytes()).map_err(|e| Failure::io(e.code(), format!("{}: {e}", p.display())))
    };
    let (ra, rb) = (read(a)?, read(b)?);
    let aggregation = match aggregate {
        AggregateArg::Pairs => Aggregation::Pairs,
        AggregateArg::Participant => Aggregation::Participant,
    };
    let normalization = match normalization {
        NormalizationArg::RatioToOptimal => NormalizationMode::RatioToOptimal,
        NormalizationArg::ZscorePerLevel => NormalizationMode::ZscorePerLevel,
    };
    let report = analyze(&ra, &rb, aggregation, normalization).map_err(|e| Failure::domain(e.code(), e))?;
    Ok(to_value(&report))
}

fn resolve_level(data_root: &Path, level_id: &str) -> Option<LevelSpec> {
    let stored = data_root.join("levels");
    store::load_levels_dir(&stored)
        .ok()
        .and_then(|ls| ls.into_iter().find(|l| l.level_id == level_id))
        .or_else(|| bundled::by_id(level_id))
}

/// Default metrics location: the report next to a stored session, else the
/// data root's report for that session id.
fn default_metrics_path(data_root: &Path, session: &Path, session_id: &str) -> PathBuf {
    let name = format!("{session_id}.metrics.json");
    let beside = session
        .parent()
        .filter(|d| d.file_name().is_some_and(|n| n == "sessions"))
        .and_then(Path::parent)
        .map(|root| root.join("reports").join(&name));
    match beside {
        Some(p) if p.exists() => p,
        _ => data_root.join("reports").join(name),
    }
}

fn replay(data_root: &Path, session: &Path, level: Option<&Path>, check: bool, metrics: Option<&Path>) -> Outcome {
    let doc = load_session(session)?;
    let level = match level {
        Some(p) => load_level(p)?,
        None => resolve_level(data_root, &doc.level_id)
            .ok_or_else(|| Failure::io("unknown_level", format!("level `{}` not found", doc.level_id)))?,
    };
    let level = Arc::new(level);
    let state = SessionState::replay(&doc, level.clone()).map_err(|e| Failure::domain("replay_failed", e))?;
    let report = session_metrics(&state, &level).map_err(|e| Failure::domain(e.code(), e))?;
    if check {
        let path = metrics.map(Path::to_owned).unwrap_or_else(|| default_metrics_path(data_root, session, &doc.session_id));
        let stored = read_text(&path)?;
        if stored != report.to_canonical_json() {
            return Err(Failure::domain(
                "metrics_mismatch",
                format!("recomputed metrics differ from {}", path.display()),
            ));
        }
    }
    Ok(to_value(&report))
}

fn export(level: &Path, sessions: &Path, out: &Path, csv: Option<&Path>) -> Outcome {
    let level = load_level(level)?;
    let mut files: Vec<PathBuf> = fs::read_dir(sessions)
        .map_err(|e| Failure::io("io_error", format!("{}: {e}", sessions.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            !name.starts_with('.') && name.ends_with(".json") && !name.ends_with(".metrics.json")
        })
        .collect();
    files.sort();
    let docs = files.iter().map(|p| load_session(p)).collect::<Result<Vec<_>, _>>()?;
    let overlay = export_trajectories(&level, &docs).map_err(|e| Failure::domain("level_mismatch", e))?;
    write_text(out, &overlay.svg)?;
    if let Some(csv) = csv {
        write_text(csv, &overlay.csv)?;
    }
    Ok(serde_json::json!({
        "level_id": level.level_id,
        "sessions": docs.iter().map(|d| &d.session_id).collect::<Vec<_>>(),
        "svg": out,
        "csv": csv,
    }))
}

fn cohort(out_dir: &Path, config: &CohortConfig, with_sessions: bool) -> Outcome {
    let levels: Vec<Arc<LevelSpec>> = bundled::levels().into_iter().map(Arc::new).collect();
    let cohort = generate_cohort(&levels, config).map_err(|e| Failure::domain("cohort_error", e))?;
    let a = out_dir.join("game_a.csv");
    let b = out_dir.join("game_b.csv");
    write_text(&a, &records_to_csv(&cohort.game_a))?;
    write_text(&b, &records_to_csv(&cohort.game_b))?;
    if with_sessions {
        for s in &cohort.sessions {
            write_text(&out_dir.join("sessions").join(format!("{}.json", s.session_id())), &s.to_canonical_json())?;
        }
    }
    Ok(serde_json::json!({
        "config": to_value(config),
        "participants": to_value(&cohort.participants),
        "pairs_a": a,
        "pairs_b": b,
    }))
}
