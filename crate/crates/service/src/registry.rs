use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant, SystemTime};

use tokio::sync::Mutex;
use wayfinder_core::engine::{Briefing, PhaseKind, SessionView};
use wayfinder_core::metrics::{session_metrics, MetricsReport};
use wayfinder_core::store::{Store, StoreError};
use wayfinder_core::{EngineError, LevelSpec, SessionState};

use crate::error::ApiError;

/// Source of `started_at` timestamps.
pub trait Clock: Send + Sync {
    fn now_rfc3339(&self) -> String;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_rfc3339(&self) -> String {
        humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
    }
}

/// Always reports the same instant; for reproducible sessions.
pub struct FixedClock(pub String);

impl Clock for FixedClock {
    fn now_rfc3339(&self) -> String {
        self.0.clone()
    }
}

struct Live {
    state: SessionState,
    saved_phase: Option<PhaseKind>,
    dirty: bool,
    touched: Instant,
}

type Slot = Arc<Mutex<Live>>;

pub struct Registry {
    levels: Vec<Arc<LevelSpec>>,
    store: Store,
    clock: Box<dyn Clock>,
    sessions: RwLock<HashMap<String, Slot>>,
}

/// Ids become file names, so they are restricted to a safe alphabet.
fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl Registry {
    /// `levels` are served in difficulty order.
    pub fn new(mut levels: Vec<LevelSpec>, store: Store, clock: Box<dyn Clock>) -> Self {
        levels.sort_by(|a, b| (a.difficulty_rank, &a.level_id).cmp(&(b.difficulty_rank, &b.level_id)));
        Self {
            levels: levels.into_iter().map(Arc::new).collect(),
            store,
            clock,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn levels(&self) -> &[Arc<LevelSpec>] {
        &self.levels
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn level(&self, id: &str) -> Option<Arc<LevelSpec>> {
        self.levels.iter().find(|l| l.level_id == id).cloned()
    }

    pub fn create(
        &self,
        level_id: &str,
        participant_id: &str,
        session_id: Option<String>,
    ) -> Result<(String, Briefing), ApiError> {
        let level = self
            .level(level_id)
            .ok_or_else(|| ApiError::not_found("level_not_found", format!("unknown level `{level_id}`")))?;
        let session_id = session_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
        if !valid_session_id(&session_id) {
            return Err(ApiError::malformed(format!("invalid session id `{session_id}`")));
        }
        let state = SessionState::start(level, participant_id, session_id.clone(), self.clock.now_rfc3339())?;
        let briefing = state.briefing();
        let mut map = self.sessions.write().expect("session map poisoned");
        if map.contains_key(&session_id) || self.store.session_path(&session_id).exists() {
            return Err(ApiError::new(
                axum::http::StatusCode::CONFLICT,
                "session_exists",
                format!("session `{session_id}` already exists"),
            ));
        }
        self.store.save_session(&state)?;
        let live = Live {
            saved_phase: Some(state.phase().kind()),
            state,
            dirty: false,
            touched: Instant::now(),
        };
        map.insert(session_id.clone(), Arc::new(Mutex::new(live)));
        Ok((session_id, briefing))
    }

    /// In-memory slot, falling back to the store (sessions survive restarts).
    fn slot(&self, id: &str) -> Result<Slot, ApiError> {
        let not_found = || ApiError::not_found("session_not_found", format!("unknown session `{id}`"));
        if let Some(s) = self.sessions.read().expect("session map poisoned").get(id) {
            return Ok(s.clone());
        }
        if !valid_session_id(id) {
            return Err(not_found());
        }
        let state = match self.store.load_session(id, |level| self.level(level)) {
            Ok(s) => s,
            Err(StoreError::NotFound(_)) => return Err(not_found()),
            Err(e) => return Err(e.into()),
        };
        let mut map = self.sessions.write().expect("session map poisoned");
        let slot = map.entry(id.to_owned()).or_insert_with(|| {
            Arc::new(Mutex::new(Live {
                saved_phase: Some(state.phase().kind()),
                state,
                dirty: false,
                touched: Instant::now(),
            }))
        });
        Ok(slot.clone())
    }

    pub async fn read<T>(&self, id: &str, f: impl FnOnce(&SessionState) -> T) -> Result<T, ApiError> {
        let slot = self.slot(id)?;
        let live = slot.lock().await;
        Ok(f(&live.state))
    }

    /// Applies one engine operation under the session lock. The session is
    /// persisted when its phase changed; otherwise it is marked dirty for
    /// the idle sweep.
    pub async fn mutate(
        &self,
        id: &str,
        f: impl FnOnce(&mut SessionState) -> Result<(), EngineError>,
    ) -> Result<SessionView, ApiError> {
        let slot = self.slot(id)?;
        let mut live = slot.lock().await;
        let events_before = live.state.events().len();
        let result = f(&mut live.state);
        live.touched = Instant::now();
        if result.is_ok() || live.state.events().len() != events_before {
            live.dirty = true;
        }
        let phase = live.state.phase().kind();
        if live.saved_phase != Some(phase) {
            self.persist(&mut live)?;
        }
        result?;
        Ok(live.state.view())
    }

    fn persist(&self, live: &mut Live) -> Result<(), ApiError> {
        self.store.save_session(&live.state)?;
        if live.state.is_complete() {
            let report = session_metrics(&live.state, live.state.level())?;
            self.store.save_metrics(&report)?;
        }
        live.saved_phase = Some(live.state.phase().kind());
        live.dirty = false;
        Ok(())
    }

    pub async fn metrics(&self, id: &str) -> Result<MetricsReport, ApiError> {
        let slot = self.slot(id)?;
        let live = slot.lock().await;
        Ok(session_metrics(&live.state, live.state.level())?)
    }

    pub async fn document(&self, id: &str) -> Result<String, ApiError> {
        let slot = self.slot(id)?;
        let live = slot.lock().await;
        if !live.state.is_complete() {
            return Err(ApiError::new(
                axum::http::StatusCode::CONFLICT,
                "session_incomplete",
                format!("session `{id}` is not complete"),
            ));
        }
        Ok(live.state.to_canonical_json())
    }

    /// Persists every dirty session idle for at least `idle`. Returns how
    /// many were written.
    pub async fn sweep_idle(&self, idle: Duration) -> Result<usize, ApiError> {
        let slots: Vec<Slot> = self.sessions.read().expect("session map poisoned").values().cloned().collect();
        let mut written = 0;
        for slot in slots {
            let mut live = slot.lock().await;
            if live.dirty && live.touched.elapsed() >= idle {
                self.persist(&mut live)?;
                written += 1;
            }
        }
        Ok(written)
    }

    /// Persists every dirty session regardless of idleness (shutdown).
    pub async fn flush(&self) -> Result<usize, ApiError> {
        self.sweep_idle(Duration::ZERO).await
    }
}
