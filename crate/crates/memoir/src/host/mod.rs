//! Simulated conversation host.
//!
//! Provides everything needed to exercise the memory engine end to end
//! without an LLM provider: session and message persistence with the
//! commit-then-index hook, a compaction simulator that maintains the active
//! window and fill ratio, runtime flags, and the per-turn block pipeline.
//!
//! The durability order is fixed: a message is committed to the store before
//! any indexing work is dispatched, and indexing runs on a background thread
//! the caller never waits for. A failed indexing task logs a warning and
//! leaves the message untouched; `rag index --all` is the recovery path.

pub mod scenario;

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use thiserror::Error;
use tracing::warn;

use crate::embedding::EmbeddingProvider;
#[cfg(not(feature = "minilm"))]
use crate::embedding::HashedTrigramProvider;
use crate::episodic::{EpisodicEngine, EpisodicError, SearchContext, SearchHit};
use crate::moim::{build_moim, estimate_tokens, moim_budget, BudgetDecision, FillRatio, MoimBlock};
use crate::persistence::{FactRow, Store, StoreError};
use crate::semantic::{MemoryToolbox, ToolRequest, ToolResponse};

/// Tokens charged for the system prompt and fixed scaffolding, so scripted
/// fill ratios are reproducible.
pub const SYSTEM_OVERHEAD_TOKENS: usize = 500;
/// Fill ratio at which the host would compact.
pub const COMPACTION_THRESHOLD: f32 = 0.8;
/// Fill ratio compaction drives down to.
pub const COMPACTION_TARGET: f32 = 0.5;

#[derive(Debug, Error)]
pub enum HostError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EpisodicError),
    #[error("unknown flag: {0} (expected rag_enabled or rag_cache_enabled)")]
    UnknownFlag(String),
    #[error("session not found: {0}")]
    SessionNotFound(String),
}

pub type HostResult<T> = Result<T, HostError>;

/// Host construction parameters. Environment variables override nothing
/// here; use [`HostConfig::from_env`] to read them.
#[derive(Debug, Clone)]
pub struct HostConfig {
    /// Store file; `None` runs on an in-memory database.
    pub db_path: Option<PathBuf>,
    /// Context window capacity in tokens.
    pub capacity: usize,
    /// Initial memory flag, unless the store already persists one.
    pub rag_enabled: bool,
    /// Initial cache flag, unless the store already persists one.
    pub rag_cache_enabled: bool,
    /// Whether the injected block counts toward the next turn's fill ratio.
    pub count_moim_tokens: bool,
    /// Model directory for the real embedding backend (`embedding.model_path`).
    pub model_path: Option<PathBuf>,
}

impl Default for HostConfig {
    fn default() -> Self {
        Self {
            db_path: None,
            capacity: 8_000,
            rag_enabled: false,
            rag_cache_enabled: false,
            count_moim_tokens: true,
            model_path: None,
        }
    }
}

impl HostConfig {
    /// Reads configuration from `MEMOIR_*` environment variables:
    /// `MEMOIR_DB`, `MEMOIR_CAPACITY`, `MEMOIR_RAG_ENABLED`,
    /// `MEMOIR_RAG_CACHE_ENABLED`, `MEMOIR_COUNT_MOIM_TOKENS`, and
    /// `MEMOIR_EMBEDDING_MODEL_PATH` (the `embedding.model_path` key).
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(db) = std::env::var("MEMOIR_DB") {
            if !db.is_empty() {
                cfg.db_path = Some(PathBuf::from(db));
            }
        }
        if let Ok(cap) = std::env::var("MEMOIR_CAPACITY") {
            if let Ok(cap) = cap.parse() {
                cfg.capacity = cap;
            }
        }
        let truthy = |v: String| matches!(v.as_str(), "1" | "true" | "on" | "yes");
        if let Ok(v) = std::env::var("MEMOIR_RAG_ENABLED") {
            cfg.rag_enabled = truthy(v);
        }
        if let Ok(v) = std::env::var("MEMOIR_RAG_CACHE_ENABLED") {
            cfg.rag_cache_enabled = truthy(v);
        }
        if let Ok(v) = std::env::var("MEMOIR_COUNT_MOIM_TOKENS") {
            cfg.count_moim_tokens = truthy(v);
        }
        if let Ok(p) = std::env::var("MEMOIR_EMBEDDING_MODEL_PATH") {
            if !p.is_empty() {
                cfg.model_path = Some(PathBuf::from(p));
            }
        }
        cfg
    }

    pub fn with_db_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.db_path = Some(path.into());
        self
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn with_rag_enabled(mut self, enabled: bool) -> Self {
        self.rag_enabled = enabled;
        self
    }

    pub fn with_rag_cache_enabled(mut self, enabled: bool) -> Self {
        self.rag_cache_enabled = enabled;
        self
    }
}

/// Picks the embedding provider for a config: the real backend when it is
/// compiled in and a model directory is configured, the deterministic
/// hashed-trigram provider otherwise.
pub fn provider_from_config(config: &HostConfig) -> Arc<dyn EmbeddingProvider> {
    #[cfg(feature = "minilm")]
    {
        if let Some(dir) = &config.model_path {
            match crate::embedding::MiniLmProvider::from_model_dir(dir) {
                Ok(p) => return Arc::new(p),
                Err(e) => warn!("real embedding backend unavailable ({e}); using test provider"),
            }
        }
        Arc::new(crate::embedding::HashedTrigramProvider::new())
    }
    #[cfg(not(feature = "minilm"))]
    {
        if config.model_path.is_some() {
            warn!("embedding.model_path set but the minilm feature is not compiled in");
        }
        Arc::new(HashedTrigramProvider::new())
    }
}

/// Both runtime toggles; shared with the tool surface.
#[derive(Clone)]
pub struct MemoryFlags {
    rag_enabled: Arc<AtomicBool>,
    rag_cache_enabled: Arc<AtomicBool>,
}

impl MemoryFlags {
    fn new(rag: bool, cache: bool) -> Self {
        Self {
            rag_enabled: Arc::new(AtomicBool::new(rag)),
            rag_cache_enabled: Arc::new(AtomicBool::new(cache)),
        }
    }

    pub fn rag_enabled(&self) -> bool {
        self.rag_enabled.load(Ordering::Acquire)
    }

    /// Meaningful only while `rag_enabled` is set; kept and reported anyway.
    pub fn rag_cache_enabled(&self) -> bool {
        self.rag_cache_enabled.load(Ordering::Acquire)
    }
}

/// Per-session context window state.
struct TurnState {
    active: VecDeque<(String, usize)>,
    active_set: HashSet<String>,
    last_moim_tokens: usize,
    next_seq: u64,
}

impl TurnState {
    fn message_tokens(&self) -> usize {
        self.active.iter().map(|(_, t)| t).sum()
    }

    fn current_tokens(&self, count_moim: bool) -> usize {
        let moim = if count_moim { self.last_moim_tokens } else { 0 };
        SYSTEM_OVERHEAD_TOKENS + self.message_tokens() + moim
    }
}

/// What one turn produced.
#[derive(Debug, Clone)]
pub struct TurnReport {
    pub message_id: String,
    pub fill_ratio: f32,
    pub budget: BudgetDecision,
    pub moim: MoimBlock,
    pub hits: Vec<SearchHit>,
    pub facts: Vec<FactRow>,
    pub warnings: Vec<String>,
}

/// Messages removed from the active window by one compaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactionReport {
    pub removed: Vec<String>,
}

/// The simulated host application.
pub struct HostApp {
    store: Store,
    engine: Arc<EpisodicEngine>,
    toolbox: MemoryToolbox,
    flags: MemoryFlags,
    config: HostConfig,
    turns: Mutex<HashMap<String, TurnState>>,
    pending: Mutex<Vec<JoinHandle<()>>>,
}

impl HostApp {
    /// Opens the store, restores persisted flags (falling back to the config
    /// values), and wires the engine and tool surface.
    pub fn new(config: HostConfig) -> HostResult<Self> {
        let provider = provider_from_config(&config);
        Self::with_provider(config, provider)
    }

    /// Same as [`HostApp::new`] with an explicit provider, mostly for tests
    /// that need an instrumented one.
    pub fn with_provider(
        config: HostConfig,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> HostResult<Self> {
        let store = match &config.db_path {
            Some(path) => Store::open(path)?,
            None => Store::open_in_memory()?,
        };

        let stored_flag = |key: &str, fallback: bool| -> HostResult<bool> {
            Ok(match store.get_setting(key)? {
                Some(v) => v == "true",
                None => fallback,
            })
        };
        let rag = stored_flag("rag_enabled", config.rag_enabled)?;
        let cache = stored_flag("rag_cache_enabled", config.rag_cache_enabled)?;
        let flags = MemoryFlags::new(rag, cache);

        let engine = Arc::new(EpisodicEngine::new(store.clone(), provider));
        engine.set_cache_enabled(cache);
        let toolbox = MemoryToolbox::new(
            store.clone(),
            Arc::clone(&engine),
            Arc::clone(&flags.rag_enabled),
        );

        Ok(Self {
            store,
            engine,
            toolbox,
            flags,
            config,
            turns: Mutex::new(HashMap::new()),
            pending: Mutex::new(Vec::new()),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn engine(&self) -> &Arc<EpisodicEngine> {
        &self.engine
    }

    pub fn flags(&self) -> &MemoryFlags {
        &self.flags
    }

    pub fn config(&self) -> &HostConfig {
        &self.config
    }

    // ── sessions and messages ───────────────────────────────────────────

    pub fn create_session(&self, id: &str, title: &str) -> HostResult<()> {
        self.store.create_session(id, title)?;
        Ok(())
    }

    fn with_turn_state<T>(
        &self,
        session_id: &str,
        f: impl FnOnce(&mut TurnState) -> T,
    ) -> HostResult<T> {
        let mut turns = self.turns.lock().unwrap_or_else(|e| e.into_inner());
        if !turns.contains_key(session_id) {
            if !self.store.session_exists(session_id)? {
                return Err(HostError::SessionNotFound(session_id.to_string()));
            }
            let next_seq = self.store.list_messages(session_id)?.len() as u64;
            turns.insert(
                session_id.to_string(),
                TurnState {
                    active: VecDeque::new(),
                    active_set: HashSet::new(),
                    last_moim_tokens: 0,
                    next_seq,
                },
            );
        }
        Ok(f(turns.get_mut(session_id).expect("state just ensured")))
    }

    /// Persists a message, then — only when the memory flag is on — hands it
    /// to a background indexing task and returns immediately. The message is
    /// durable before any indexing work starts, so an indexing failure of
    /// any kind cannot touch it.
    pub fn add_message(&self, session_id: &str, role: &str, content: &str) -> HostResult<String> {
        let message_id = self.with_turn_state(session_id, |ts| {
            let id = format!("{session_id}-m{:04}", ts.next_seq);
            ts.next_seq += 1;
            id
        })?;

        self.store
            .insert_message(&message_id, session_id, role, content)?;

        self.with_turn_state(session_id, |ts| {
            let tokens = estimate_tokens(content);
            ts.active.push_back((message_id.clone(), tokens));
            ts.active_set.insert(message_id.clone());
        })?;

        if self.flags.rag_enabled() {
            let engine = Arc::clone(&self.engine);
            let (sid, mid, text) = (
                session_id.to_string(),
                message_id.clone(),
                content.to_string(),
            );
            let handle = std::thread::spawn(move || {
                if let Err(e) = engine.index_message(&sid, &mid, &text) {
                    warn!("indexing failed for {sid}/{mid}: {e}");
                }
            });
            let mut pending = self.pending.lock().unwrap_or_else(|e| e.into_inner());
            pending.retain(|h| !h.is_finished());
            pending.push(handle);
        }

        Ok(message_id)
    }

    /// Waits for every in-flight indexing task. This is the shutdown drain
    /// and the quiescence barrier scripted scenarios rely on.
    pub fn drain_indexing(&self) {
        let handles: Vec<JoinHandle<()>> = {
            let mut pending = self.pending.lock().unwrap_or_else(|e| e.into_inner());
            pending.drain(..).collect()
        };
        for handle in handles {
            if handle.join().is_err() {
                warn!("an indexing task panicked");
            }
        }
    }

    // ── context window ──────────────────────────────────────────────────

    pub fn fill_ratio(&self, session_id: &str) -> HostResult<FillRatio> {
        let count = self.config.count_moim_tokens;
        let capacity = self.config.capacity;
        self.with_turn_state(session_id, |ts| {
            FillRatio::from_tokens(ts.current_tokens(count), capacity)
        })
    }

    pub fn active_message_ids(&self, session_id: &str) -> HostResult<Vec<String>> {
        self.with_turn_state(session_id, |ts| {
            ts.active.iter().map(|(id, _)| id.clone()).collect()
        })
    }

    /// Drops the oldest messages from the active window until the fill ratio
    /// reaches the compaction target, never emptying the window. The dropped
    /// messages stay in the database and stay indexed — from now on they are
    /// reachable through retrieval instead of the context window.
    pub fn compact(&self, session_id: &str) -> HostResult<CompactionReport> {
        let count = self.config.count_moim_tokens;
        let capacity = self.config.capacity;
        self.with_turn_state(session_id, |ts| {
            let mut removed = Vec::new();
            while ts.active.len() > 1
                && (ts.current_tokens(count) as f32 / capacity as f32) > COMPACTION_TARGET
            {
                let (id, _) = ts.active.pop_front().expect("len checked");
                ts.active_set.remove(&id);
                removed.push(id);
            }
            CompactionReport { removed }
        })
    }

    fn search_context(&self, session_id: &str) -> HostResult<SearchContext> {
        self.with_turn_state(session_id, |ts| {
            SearchContext::new(session_id).with_active_ids(ts.active_set.iter().cloned())
        })
    }

    // ── the per-turn pipeline ───────────────────────────────────────────

    /// Runs one user turn: fill ratio, budget tier, retrieval (unless
    /// suppressed), block assembly, then persistence of the user message.
    /// With the memory flag off, the block is empty and no memory code runs
    /// at all — the turn degrades to plain message persistence.
    pub fn run_turn(&self, session_id: &str, user_text: &str) -> HostResult<TurnReport> {
        let fill = self.fill_ratio(session_id)?;
        let budget = moim_budget(fill);
        let mut warnings = Vec::new();

        let (moim, hits, facts) = if !self.flags.rag_enabled() {
            (MoimBlock::empty(), Vec::new(), Vec::new())
        } else {
            let hits = if budget.is_suppressed() {
                Vec::new()
            } else {
                let ctx = self.search_context(session_id)?;
                match self.engine.search(user_text, &ctx) {
                    Ok(hits) => hits,
                    Err(e) => {
                        warnings.push(format!("episodic search failed: {e}"));
                        Vec::new()
                    }
                }
            };
            let facts = self.store.load_facts(session_id)?;
            let titles = self.store.session_titles()?;
            let moim = build_moim(&facts, &hits, budget, &titles);
            (moim, hits, facts)
        };

        if self.config.count_moim_tokens {
            let tokens = moim.estimated_tokens;
            self.with_turn_state(session_id, |ts| ts.last_moim_tokens = tokens)?;
        }

        let message_id = self.add_message(session_id, "user", user_text)?;

        Ok(TurnReport {
            message_id,
            fill_ratio: fill.get(),
            budget,
            moim,
            hits,
            facts,
            warnings,
        })
    }

    // ── flags ───────────────────────────────────────────────────────────

    /// Flips a runtime flag and persists it; takes effect on the next
    /// `add_message` / `run_turn`, no restart involved. Disabling the cache
    /// frees it; enabling leaves it cold until the next search. The cache
    /// flag is accepted while the memory flag is off, it just stays inert.
    pub fn set_flag(&self, name: &str, value: bool) -> HostResult<()> {
        match name {
            "rag_enabled" => {
                self.flags.rag_enabled.store(value, Ordering::Release);
                if !value {
                    self.engine.invalidate_cache();
                }
            }
            "rag_cache_enabled" => {
                self.flags.rag_cache_enabled.store(value, Ordering::Release);
                self.engine.set_cache_enabled(value);
            }
            other => return Err(HostError::UnknownFlag(other.to_string())),
        }
        self.store
            .set_setting(name, if value { "true" } else { "false" })?;
        Ok(())
    }

    // ── tools ───────────────────────────────────────────────────────────

    /// Dispatches a memory tool with the live search context of the session.
    pub fn tool(&self, session_id: &str, request: &ToolRequest) -> HostResult<ToolResponse> {
        let ctx = self.search_context(session_id)?;
        Ok(self.toolbox.dispatch(session_id, request, &ctx))
    }

    pub fn toolbox(&self) -> &MemoryToolbox {
        &self.toolbox
    }
}

impl Drop for HostApp {
    fn drop(&mut self) {
        // Abandoning tasks would be safe (commit-before-index), draining is
        // tidier for tests and short-lived CLI runs.
        self.drain_indexing();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{Embedding, EmbeddingError, HashedTrigramProvider};
    use std::time::Duration;

    fn host(rag: bool) -> HostApp {
        let app = HostApp::new(HostConfig::default().with_rag_enabled(rag)).unwrap();
        app.create_session("s1", "first session").unwrap();
        app
    }

    #[test]
    fn disabled_flag_persists_messages_without_memory_tables() {
        let app = host(false);
        app.add_message("s1", "user", "hello").unwrap();
        app.add_message("s1", "assistant", "hi there").unwrap();
        app.drain_indexing();
        assert_eq!(app.store().memory_tables_exist().unwrap(), (false, false));
        assert_eq!(app.store().list_messages("s1").unwrap().len(), 2);
        assert_eq!(app.store().chunk_count().unwrap(), 0);
    }

    #[test]
    fn enabled_flag_indexes_after_quiescence() {
        let app = host(true);
        app.add_message("s1", "user", "a message worth remembering").unwrap();
        app.drain_indexing();
        assert_eq!(app.store().chunk_count().unwrap(), 1);
    }

    /// Provider that always fails; the message must survive.
    struct FailingProvider;
    impl EmbeddingProvider for FailingProvider {
        fn name(&self) -> &str {
            "failing"
        }
        fn deterministic(&self) -> bool {
            true
        }
        fn embed(&self, _text: &str) -> Result<Embedding, EmbeddingError> {
            Err(EmbeddingError::Provider("model file missing".into()))
        }
    }

    #[test]
    fn provider_failure_leaves_message_durable() {
        let app = HostApp::with_provider(
            HostConfig::default().with_rag_enabled(true),
            Arc::new(FailingProvider),
        )
        .unwrap();
        app.create_session("s1", "t").unwrap();
        app.add_message("s1", "user", "this will not index").unwrap();
        app.drain_indexing();
        assert_eq!(app.store().list_messages("s1").unwrap().len(), 1);
        assert_eq!(app.store().chunk_count().unwrap(), 0);
    }

    /// Provider that sleeps before delegating, to prove dispatch never waits.
    struct SlowProvider(HashedTrigramProvider, Duration);
    impl EmbeddingProvider for SlowProvider {
        fn name(&self) -> &str {
            "slow"
        }
        fn deterministic(&self) -> bool {
            true
        }
        fn embed(&self, text: &str) -> Result<Embedding, EmbeddingError> {
            std::thread::sleep(self.1);
            self.0.embed(text)
        }
    }

    #[test]
    fn add_message_latency_is_dispatch_only() {
        let app = HostApp::with_provider(
            HostConfig::default().with_rag_enabled(true),
            Arc::new(SlowProvider(
                HashedTrigramProvider::new(),
                Duration::from_millis(100),
            )),
        )
        .unwrap();
        app.create_session("s1", "t").unwrap();
        // Warm up the state and the store path once.
        app.add_message("s1", "user", "warmup").unwrap();

        let long_text = "lorem ipsum dolor sit amet ".repeat(400);
        let started = std::time::Instant::now();
        app.add_message("s1", "user", &long_text).unwrap();
        let elapsed = started.elapsed();
        assert!(
            elapsed < Duration::from_millis(5),
            "add_message took {elapsed:?}"
        );
        app.drain_indexing();
        assert!(app.store().chunk_count().unwrap() > 0);
    }

    #[test]
    fn compaction_removes_oldest_until_target_and_keeps_db_rows() {
        let app = HostApp::new(
            HostConfig::default()
                .with_rag_enabled(true)
                .with_capacity(1000),
        )
        .unwrap();
        app.create_session("s1", "t").unwrap();
        // 6 messages x ~100 tokens: 500 overhead + 600 > 0.8 * 1000.
        for i in 0..6 {
            let text = format!("message {i} {}", "x".repeat(395));
            app.add_message("s1", "user", &text).unwrap();
        }
        app.drain_indexing();
        let r = app.fill_ratio("s1").unwrap().get();
        assert!(r >= 0.8, "fill ratio {r}");

        let report = app.compact("s1").unwrap();
        assert!(!report.removed.is_empty());
        let r_after = app.fill_ratio("s1").unwrap().get();
        assert!(r_after <= COMPACTION_TARGET + 1e-6, "after {r_after}");
        // Removed messages stay durable and indexed.
        assert_eq!(app.store().list_messages("s1").unwrap().len(), 6);
        for id in &report.removed {
            assert!(!app.active_message_ids("s1").unwrap().contains(id));
        }

        // Compacting an (almost) empty window is a no-op guard.
        let app2 = host(false);
        app2.add_message("s1", "user", &"y".repeat(40_000)).unwrap();
        let report = app2.compact("s1").unwrap();
        assert!(report.removed.is_empty());
    }

    #[test]
    fn compacted_messages_become_intra_session_retrievable() {
        let app = HostApp::new(
            HostConfig::default()
                .with_rag_enabled(true)
                .with_capacity(900),
        )
        .unwrap();
        app.create_session("s1", "t").unwrap();
        for i in 0..5 {
            app.add_message(
                "s1",
                "user",
                &format!("turn {i}: the database migration plan {}", "pad ".repeat(80)),
            )
            .unwrap();
        }
        app.drain_indexing();
        app.compact("s1").unwrap();

        let report = app.run_turn("s1", "what was the database migration plan").unwrap();
        assert!(!report.hits.is_empty());
        assert!(report.hits.iter().all(|h| h.intra_session));

        // Still-active messages are never retrieved.
        let active = app.active_message_ids("s1").unwrap();
        for hit in &report.hits {
            assert!(!active.contains(&hit.message_id));
        }
    }

    #[test]
    fn run_turn_reports_facts_only_at_suppression() {
        let app = HostApp::new(
            HostConfig::default()
                .with_rag_enabled(true)
                .with_capacity(1000),
        )
        .unwrap();
        app.create_session("s1", "t").unwrap();
        let req: ToolRequest = serde_json::from_str(
            r#"{"tool":"remember_fact","args":{"key":"language","value":"Rust","category":"preference"}}"#,
        )
        .unwrap();
        assert!(app.tool("s1", &req).unwrap().ok);

        // Push the window to r >= 0.8.
        for _ in 0..4 {
            app.add_message("s1", "user", &"z".repeat(400)).unwrap();
        }
        let report = app.run_turn("s1", "anything").unwrap();
        assert!(report.fill_ratio >= 0.8);
        assert!(report.budget.is_suppressed());
        assert!(report.moim.text.contains("[preference] language: Rust"));
        assert!(!report.moim.text.contains("[Relevant past context]"));
        assert!(report.hits.is_empty());
    }

    #[test]
    fn run_turn_with_rag_disabled_is_memory_free() {
        let app = host(false);
        for i in 0..5 {
            let report = app.run_turn("s1", &format!("turn number {i}")).unwrap();
            assert!(report.moim.is_empty());
            assert!(report.hits.is_empty() && report.facts.is_empty());
        }
        app.drain_indexing();
        assert_eq!(app.store().memory_tables_exist().unwrap(), (false, false));
    }

    #[test]
    fn fresh_session_with_no_history_gets_empty_moim() {
        let app = host(true);
        let report = app.run_turn("s1", "first words").unwrap();
        assert!(report.moim.is_empty());
    }

    #[test]
    fn flag_toggles_take_effect_without_restart_and_persist() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join("host.db");
        {
            let app = HostApp::new(HostConfig::default().with_db_path(&db)).unwrap();
            app.create_session("s1", "t").unwrap();
            app.add_message("s1", "user", "before enabling").unwrap();
            app.drain_indexing();
            assert_eq!(app.store().chunk_count().unwrap(), 0);

            app.set_flag("rag_enabled", true).unwrap();
            app.add_message("s1", "user", "after enabling").unwrap();
            app.drain_indexing();
            assert_eq!(app.store().chunk_count().unwrap(), 1);

            // enable -> disable -> enable keeps index data intact.
            app.set_flag("rag_enabled", false).unwrap();
            app.add_message("s1", "user", "while disabled").unwrap();
            app.drain_indexing();
            assert_eq!(app.store().chunk_count().unwrap(), 1);
            app.set_flag("rag_enabled", true).unwrap();

            // Cache toggles flip the search path at runtime.
            app.set_flag("rag_cache_enabled", true).unwrap();
            app.run_turn("s1", "after enabling").unwrap();
            assert_eq!(app.engine().cache_load_count(), 1);
            app.set_flag("rag_cache_enabled", false).unwrap();
            app.run_turn("s1", "after enabling").unwrap();
            assert_eq!(app.engine().cache_load_count(), 1, "DB path after disable");
            assert_eq!(app.engine().cache_bytes_estimate(), 0);

            assert!(matches!(
                app.set_flag("nonsense", true),
                Err(HostError::UnknownFlag(_))
            ));
        }
        // Flags survive a restart via the settings table.
        let app = HostApp::new(HostConfig::default().with_db_path(&db)).unwrap();
        assert!(app.flags().rag_enabled());
        assert!(!app.flags().rag_cache_enabled());
    }

    #[test]
    fn cache_flag_while_disabled_is_inert() {
        let app = host(false);
        app.set_flag("rag_cache_enabled", true).unwrap();
        app.run_turn("s1", "hello").unwrap();
        assert_eq!(app.engine().cache_load_count(), 0);
        assert_eq!(app.store().memory_tables_exist().unwrap(), (false, false));
    }

    #[test]
    fn moim_tokens_count_toward_next_fill_ratio() {
        let app = HostApp::new(
            HostConfig::default()
                .with_rag_enabled(true)
                .with_capacity(2000),
        )
        .unwrap();
        app.create_session("s1", "t").unwrap();
        let req: ToolRequest = serde_json::from_str(
            r#"{"tool":"remember_fact","args":{"key":"k","value":"v"}}"#,
        )
        .unwrap();
        app.tool("s1", &req).unwrap();

        let before = app.fill_ratio("s1").unwrap().get();
        let report = app.run_turn("s1", "hi").unwrap();
        assert!(!report.moim.is_empty());
        let after = app.fill_ratio("s1").unwrap().get();
        let expected_extra =
            (report.moim.estimated_tokens + estimate_tokens("hi")) as f32 / 2000.0;
        assert!((after - before - expected_extra).abs() < 1e-6);
    }
}
