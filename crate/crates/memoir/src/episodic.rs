//! Episodic memory: background indexing and brute-force cosine retrieval.
//!
//! Retrieval is an exact scan over every stored embedding, with two
//! interchangeable paths: a DB scan that streams blobs out of `rag_chunks`,
//! and an optional pre-deserialized in-memory cache built lazily on first
//! search and appended to incrementally as messages are indexed. Both paths
//! must return identical ordered results on identical data — that equivalence
//! is the central property of this module.
//!
//! A chunk is excluded from scoring only when it belongs to the current
//! session *and* its message is still in the active context window; compacted
//! turns of the current session and all prior sessions are searched.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use thiserror::Error;
use tracing::warn;

use crate::chunker::extract_chunks;
use crate::embedding::{
    cosine_similarity, deserialize_embedding, serialize_embedding, Embedding, EmbeddingError,
    EmbeddingProvider, EMBEDDING_BLOB_LEN,
};
use crate::persistence::{ChunkRow, Store, StoreError};

/// Minimum cosine similarity for a hit to be returned.
pub const SIMILARITY_THRESHOLD: f32 = 0.4;
/// Default result limit.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum EpisodicError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

pub type EpisodicResult<T> = Result<T, EpisodicError>;

/// One retrieval result.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SearchHit {
    /// Cosine similarity against the query, at or above the threshold.
    pub score: f32,
    pub session_id: String,
    pub message_id: String,
    pub chunk_text: String,
    /// True iff the chunk comes from the current session (a compacted turn).
    pub intra_session: bool,
}

/// Per-search parameters: who is asking and what is already visible.
#[derive(Debug, Clone)]
pub struct SearchContext {
    pub current_session_id: String,
    /// Message ids still in the active context window; their current-session
    /// chunks are not retrieved because the model already sees them.
    pub active_message_ids: HashSet<String>,
    pub k: usize,
    pub threshold: f32,
}

impl SearchContext {
    pub fn new(current_session_id: impl Into<String>) -> Self {
        Self {
            current_session_id: current_session_id.into(),
            active_message_ids: HashSet::new(),
            k: DEFAULT_TOP_K,
            threshold: SIMILARITY_THRESHOLD,
        }
    }

    pub fn with_active_ids<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.active_message_ids = ids.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k.max(1);
        self
    }

    pub fn with_threshold(mut self, threshold: f32) -> Self {
        self.threshold = threshold;
        self
    }
}

/// A chunk held by the warm cache: embedding already deserialized.
#[derive(Debug, Clone)]
struct CachedChunk {
    session_id: String,
    message_id: String,
    chunk_index: i64,
    chunk_text: String,
    embedding: Embedding,
}

/// Cache condition as reported by stats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheState {
    Disabled,
    Cold,
    Warm(usize),
}

impl std::fmt::Display for CacheState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CacheState::Disabled => write!(f, "disabled"),
            CacheState::Cold => write!(f, "cold"),
            CacheState::Warm(n) => write!(f, "warm({n})"),
        }
    }
}

/// Median/p95 aggregates over recorded search latencies.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SearchTimings {
    pub count: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
}

/// The episodic memory engine.
pub struct EpisodicEngine {
    store: Store,
    provider: std::sync::Arc<dyn EmbeddingProvider>,
    cache: Mutex<Option<Vec<CachedChunk>>>,
    cache_enabled: AtomicBool,
    cache_loads: AtomicU64,
    timings: Mutex<Vec<Duration>>,
}

impl EpisodicEngine {
    pub fn new(store: Store, provider: std::sync::Arc<dyn EmbeddingProvider>) -> Self {
        Self {
            store,
            provider,
            cache: Mutex::new(None),
            cache_enabled: AtomicBool::new(false),
            cache_loads: AtomicU64::new(0),
            timings: Mutex::new(Vec::new()),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    // ── indexing ────────────────────────────────────────────────────────

    /// Chunks, embeds, and durably indexes one message. Duplicate chunks are
    /// skipped, so indexing the same message twice changes nothing. While the
    /// cache is warm, freshly inserted chunks are appended to it in one
    /// locked step — never a full reload, never a partial append.
    ///
    /// Returns how many chunk rows were newly inserted.
    pub fn index_message(
        &self,
        session_id: &str,
        message_id: &str,
        text: &str,
    ) -> EpisodicResult<usize> {
        let spans = extract_chunks(text);
        if spans.is_empty() {
            return Ok(0);
        }
        let mut rows = Vec::with_capacity(spans.len());
        let mut embedded = Vec::with_capacity(spans.len());
        for (index, span) in spans.into_iter().enumerate() {
            let embedding = self.provider.embed(&span.text)?;
            rows.push(ChunkRow::new(
                session_id,
                message_id,
                index as i64,
                span.text.clone(),
                serialize_embedding(&embedding),
            ));
            embedded.push(CachedChunk {
                session_id: session_id.to_string(),
                message_id: message_id.to_string(),
                chunk_index: index as i64,
                chunk_text: span.text,
                embedding,
            });
        }

        // Database first: the table is the source of truth, the cache is a
        // mirror reconstructed at will.
        let inserted = self.store.insert_chunks(&rows)?;

        if inserted > 0 {
            let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            if let Some(cache) = guard.as_mut() {
                let existing: HashSet<i64> = cache
                    .iter()
                    .filter(|c| c.session_id == session_id && c.message_id == message_id)
                    .map(|c| c.chunk_index)
                    .collect();
                cache.extend(
                    embedded
                        .into_iter()
                        .filter(|c| !existing.contains(&c.chunk_index)),
                );
            }
        }
        Ok(inserted)
    }

    // ── cache management ────────────────────────────────────────────────

    /// Enables or disables the in-memory cache path. Disabling frees the
    /// cache immediately; enabling leaves it cold until the next search.
    pub fn set_cache_enabled(&self, enabled: bool) {
        self.cache_enabled.store(enabled, Ordering::Release);
        if !enabled {
            self.invalidate_cache();
        }
    }

    pub fn cache_enabled(&self) -> bool {
        self.cache_enabled.load(Ordering::Acquire)
    }

    /// Loads the whole chunk table into the cache if it is cold. Corrupted
    /// blobs are skipped with a warning, mirroring the DB-scan path.
    pub fn ensure_cache_warm(&self) -> EpisodicResult<()> {
        {
            let guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            if guard.is_some() {
                return Ok(());
            }
        }
        let rows = self.store.load_all_chunks()?;
        let mut chunks = Vec::with_capacity(rows.len());
        for row in rows {
            match deserialize_embedding(&row.embedding) {
                Ok(embedding) => chunks.push(CachedChunk {
                    session_id: row.session_id,
                    message_id: row.message_id,
                    chunk_index: row.chunk_index,
                    chunk_text: row.chunk_text,
                    embedding,
                }),
                Err(e) => warn!(chunk_id = row.id, "skipping corrupted chunk blob: {e}"),
            }
        }
        let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        *guard = Some(chunks);
        self.cache_loads.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Discards the cache; the next cached search reloads from the table.
    /// Call after deletes, which the incremental append cannot mirror.
    pub fn invalidate_cache(&self) {
        let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        *guard = None;
    }

    pub fn cache_state(&self) -> CacheState {
        if !self.cache_enabled() {
            return CacheState::Disabled;
        }
        let guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        match guard.as_ref() {
            Some(chunks) => CacheState::Warm(chunks.len()),
            None => CacheState::Cold,
        }
    }

    /// Estimated cache RAM: blob bytes plus text bytes per cached chunk.
    pub fn cache_bytes_estimate(&self) -> usize {
        let guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .as_ref()
            .map(|chunks| {
                chunks
                    .iter()
                    .map(|c| EMBEDDING_BLOB_LEN + c.chunk_text.len())
                    .sum()
            })
            .unwrap_or(0)
    }

    /// Number of full cache loads so far (reload detection for tests/stats).
    pub fn cache_load_count(&self) -> u64 {
        self.cache_loads.load(Ordering::Relaxed)
    }

    // ── search ──────────────────────────────────────────────────────────

    /// Embeds the query with the same provider used for indexing, then
    /// searches. The embedding happens on the caller's thread: the block
    /// assembly needs the hits synchronously.
    pub fn search(&self, query: &str, ctx: &SearchContext) -> EpisodicResult<Vec<SearchHit>> {
        let query_vec = self.provider.embed(query)?;
        self.search_with_embedding(&query_vec, ctx)
    }

    /// Dispatches to the cache path when enabled, falling back to the DB
    /// scan if warm-up fails.
    pub fn search_with_embedding(
        &self,
        query_vec: &Embedding,
        ctx: &SearchContext,
    ) -> EpisodicResult<Vec<SearchHit>> {
        let started = Instant::now();
        let hits = if self.cache_enabled() {
            match self.search_via_cache(query_vec, ctx) {
                Ok(hits) => Ok(hits),
                Err(e) => {
                    warn!("cache path failed, falling back to DB scan: {e}");
                    self.search_via_db(query_vec, ctx)
                }
            }
        } else {
            self.search_via_db(query_vec, ctx)
        }?;
        self.record_timing(started.elapsed());
        Ok(hits)
    }

    /// Pure-compute path over the warm cache. Holds the cache lock for the
    /// whole scan so no partially appended message is ever observed.
    pub fn search_via_cache(
        &self,
        query_vec: &Embedding,
        ctx: &SearchContext,
    ) -> EpisodicResult<Vec<SearchHit>> {
        self.ensure_cache_warm()?;
        let guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        let cache = guard.as_ref().expect("cache warm after ensure_cache_warm");
        let mut scored = Vec::new();
        for chunk in cache.iter() {
            score_chunk(
                query_vec,
                ctx,
                &chunk.embedding,
                &chunk.session_id,
                &chunk.message_id,
                chunk.chunk_index,
                &chunk.chunk_text,
                &mut scored,
            );
        }
        Ok(rank(scored, ctx))
    }

    /// DB-scan path: loads every blob, deserializes, scores, discards.
    /// Corrupted blobs are skipped with a warning naming the chunk id.
    pub fn search_via_db(
        &self,
        query_vec: &Embedding,
        ctx: &SearchContext,
    ) -> EpisodicResult<Vec<SearchHit>> {
        let rows = self.store.load_all_chunks()?;
        let mut scored = Vec::new();
        for row in rows {
            let embedding = match deserialize_embedding(&row.embedding) {
                Ok(e) => e,
                Err(e) => {
                    warn!(chunk_id = row.id, "skipping corrupted chunk blob: {e}");
                    continue;
                }
            };
            score_chunk(
                query_vec,
                ctx,
                &embedding,
                &row.session_id,
                &row.message_id,
                row.chunk_index,
                &row.chunk_text,
                &mut scored,
            );
        }
        Ok(rank(scored, ctx))
    }

    // ── timings ─────────────────────────────────────────────────────────

    fn record_timing(&self, elapsed: Duration) {
        let mut timings = self.timings.lock().unwrap_or_else(|e| e.into_inner());
        timings.push(elapsed);
    }

    /// Aggregates over every search since construction (or the last clear).
    pub fn search_timings(&self) -> Option<SearchTimings> {
        let timings = self.timings.lock().unwrap_or_else(|e| e.into_inner());
        if timings.is_empty() {
            return None;
        }
        let mut ms: Vec<f64> = timings.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
        let pick = |q: f64| ms[(((ms.len() - 1) as f64) * q).round() as usize];
        Some(SearchTimings {
            count: ms.len(),
            median_ms: pick(0.5),
            p95_ms: pick(0.95),
        })
    }

    pub fn clear_timings(&self) {
        self.timings
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clear();
    }
}

/// Intermediate scored row; carries the chunk index for deterministic
/// tie-breaking between equal scores.
struct Scored {
    score: f32,
    session_id: String,
    message_id: String,
    chunk_index: i64,
    chunk_text: String,
}

/// Applies the exclusion predicate and threshold; pushes a scored row if the
/// chunk qualifies. Both search paths funnel through here so their behaviour
/// cannot drift apart.
#[allow(clippy::too_many_arguments)]
fn score_chunk(
    query_vec: &Embedding,
    ctx: &SearchContext,
    embedding: &Embedding,
    session_id: &str,
    message_id: &str,
    chunk_index: i64,
    chunk_text: &str,
    out: &mut Vec<Scored>,
) {
    let exclude = session_id == ctx.current_session_id
        && ctx.active_message_ids.contains(message_id);
    if exclude {
        return;
    }
    let score = cosine_similarity(query_vec, embedding);
    if score >= ctx.threshold {
        out.push(Scored {
            score,
            session_id: session_id.to_string(),
            message_id: message_id.to_string(),
            chunk_index,
            chunk_text: chunk_text.to_string(),
        });
    }
}

/// Orders by score descending, then (session_id, message_id, chunk_index)
/// ascending so equal scores rank identically on both paths, and keeps the
/// top k.
fn rank(mut scored: Vec<Scored>, ctx: &SearchContext) -> Vec<SearchHit> {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("cosine scores are finite")
            .then_with(|| a.session_id.cmp(&b.session_id))
            .then_with(|| a.message_id.cmp(&b.message_id))
            .then_with(|| a.chunk_index.cmp(&b.chunk_index))
    });
    scored.truncate(ctx.k);
    scored
        .into_iter()
        .map(|s| SearchHit {
            score: s.score,
            intra_session: s.session_id == ctx.current_session_id,
            session_id: s.session_id,
            message_id: s.message_id,
            chunk_text: s.chunk_text,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{HashedTrigramProvider, EMBEDDING_DIM};
    use crate::persistence::Store;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn engine() -> EpisodicEngine {
        let store = Store::open_in_memory().unwrap();
        store.create_session("s1", "current").unwrap();
        store.create_session("s2", "other").unwrap();
        EpisodicEngine::new(store, Arc::new(HashedTrigramProvider::new()))
    }

    fn axis(i: usize) -> Embedding {
        let mut v = vec![0.0f32; EMBEDDING_DIM];
        v[i] = 1.0;
        Embedding::new(v).unwrap()
    }

    fn insert_raw(engine: &EpisodicEngine, session: &str, message: &str, idx: i64, e: &Embedding) {
        engine
            .store()
            .insert_chunks(&[ChunkRow::new(
                session,
                message,
                idx,
                format!("{session}/{message}#{idx}"),
                serialize_embedding(e),
            )])
            .unwrap();
    }

    #[test]
    fn listing_predicate_excludes_only_active_current_session_chunks() {
        // Corpus: A current+active, B current+compacted, C other session,
        // all identical to the query. Hand evaluation of the predicate says
        // B and C come back, both at score 1.0.
        let eng = engine();
        let q = axis(0);
        insert_raw(&eng, "s1", "A", 0, &q);
        insert_raw(&eng, "s1", "B", 0, &q);
        insert_raw(&eng, "s2", "C", 0, &q);

        let ctx = SearchContext::new("s1").with_active_ids(["A"]);
        let hits = eng.search_with_embedding(&q, &ctx).unwrap();
        let ids: Vec<(&str, bool)> = hits
            .iter()
            .map(|h| (h.message_id.as_str(), h.intra_session))
            .collect();
        assert_eq!(ids, vec![("B", true), ("C", false)]);
        for h in &hits {
            assert!((h.score - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_corpus_returns_nothing() {
        let eng = engine();
        let ctx = SearchContext::new("s1");
        assert!(eng.search("anything at all", &ctx).unwrap().is_empty());
    }

    #[test]
    fn top_k_matches_full_sort_oracle() {
        let eng = engine();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let q = axis(0);
        // 10 chunks with distinct scores above threshold: blend axis 0 with
        // axis 1 at varying weights.
        let mut expected: Vec<(f32, String)> = Vec::new();
        for i in 0..10 {
            let w: f32 = rng.gen_range(0.5..0.99);
            let mut v = vec![0.0f32; EMBEDDING_DIM];
            v[0] = w;
            v[1] = (1.0 - w * w).sqrt();
            let e = Embedding::new(v).unwrap();
            let m = format!("m{i}");
            insert_raw(&eng, "s2", &m, 0, &e);
            expected.push((cosine_similarity(&q, &e), m));
        }
        expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        expected.truncate(5);

        let ctx = SearchContext::new("s1");
        let hits = eng.search_with_embedding(&q, &ctx).unwrap();
        assert_eq!(hits.len(), 5);
        let got: Vec<(f32, String)> = hits.iter().map(|h| (h.score, h.message_id.clone())).collect();
        assert_eq!(got, expected);
        for pair in hits.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
    }

    #[test]
    fn threshold_above_one_returns_nothing() {
        let eng = engine();
        let q = axis(0);
        insert_raw(&eng, "s2", "m1", 0, &q);
        let ctx = SearchContext::new("s1").with_threshold(1.1);
        assert!(eng.search_with_embedding(&q, &ctx).unwrap().is_empty());
    }

    #[test]
    fn corrupted_blob_is_skipped_on_both_paths() {
        let eng = engine();
        let q = axis(0);
        insert_raw(&eng, "s2", "good", 0, &q);
        insert_raw(&eng, "s2", "bad", 0, &q);
        eng.store()
            .raw_execute("UPDATE rag_chunks SET embedding = X'00' WHERE message_id = 'bad'")
            .unwrap();

        let ctx = SearchContext::new("s1");
        let via_db = eng.search_via_db(&q, &ctx).unwrap();
        let via_cache = eng.search_via_cache(&q, &ctx).unwrap();
        assert_eq!(via_db.len(), 1);
        assert_eq!(via_db[0].message_id, "good");
        assert_eq!(via_db, via_cache);
    }

    #[test]
    fn message_chunk_counts_follow_the_chunker() {
        let eng = engine();
        let short = "word ".repeat(100); // 500 chars -> single chunk
        assert_eq!(eng.index_message("s1", "m-short", &short).unwrap(), 1);
        assert_eq!(eng.index_message("s1", "m-short", &short).unwrap(), 0);

        let long = "word ".repeat(480); // 2400 chars -> three chunks
        assert_eq!(eng.index_message("s1", "m-long", &long).unwrap(), 3);
        let rows = eng.store().load_all_chunks().unwrap();
        let long_indices: Vec<i64> = rows
            .iter()
            .filter(|r| r.message_id == "m-long")
            .map(|r| r.chunk_index)
            .collect();
        assert_eq!(long_indices, vec![0, 1, 2]);
    }

    #[test]
    fn warm_cache_appends_without_reload() {
        let eng = engine();
        eng.set_cache_enabled(true);
        eng.index_message("s1", "m1", "the first message").unwrap();
        let ctx = SearchContext::new("s2");
        eng.search("first message", &ctx).unwrap();
        assert_eq!(eng.cache_load_count(), 1);
        assert_eq!(eng.cache_state(), CacheState::Warm(1));

        eng.index_message("s1", "m2", "a second message arrives").unwrap();
        assert_eq!(eng.cache_state(), CacheState::Warm(2));
        eng.search("second message", &ctx).unwrap();
        assert_eq!(eng.cache_load_count(), 1, "no reload after append");

        // Indexing the same message again must not duplicate cache entries.
        eng.index_message("s1", "m2", "a second message arrives").unwrap();
        assert_eq!(eng.cache_state(), CacheState::Warm(2));
    }

    #[test]
    fn delete_then_invalidate_reloads_without_deleted_rows() {
        let eng = engine();
        eng.set_cache_enabled(true);
        eng.index_message("s1", "m1", "kept message").unwrap();
        eng.index_message("s2", "m2", "doomed message").unwrap();
        let ctx = SearchContext::new("s3").with_threshold(0.0);
        assert_eq!(eng.search("message", &ctx).unwrap().len(), 2);

        eng.store().delete_session("s2").unwrap();
        eng.invalidate_cache();
        let hits = eng.search("message", &ctx).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].session_id, "s1");
        assert_eq!(eng.cache_load_count(), 2);
    }

    #[test]
    fn disabled_cache_uses_db_path_and_stays_cold() {
        let eng = engine();
        eng.index_message("s1", "m1", "hello world").unwrap();
        let ctx = SearchContext::new("s2").with_threshold(0.0);
        assert!(!eng.search("hello world", &ctx).unwrap().is_empty());
        assert_eq!(eng.cache_state(), CacheState::Disabled);
        assert_eq!(eng.cache_load_count(), 0);
        assert_eq!(eng.cache_bytes_estimate(), 0);
    }

    #[test]
    fn path_equivalence_on_random_corpora() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _trial in 0..20 {
            let eng = engine();
            // Clustered vectors give a useful spread of similarities.
            let centers: Vec<Embedding> = (0..4).map(|i| axis(i * 3)).collect();
            let n = rng.gen_range(1..200);
            for i in 0..n {
                let c = &centers[rng.gen_range(0..centers.len())];
                let mut v: Vec<f32> = c.as_slice().to_vec();
                for x in v.iter_mut() {
                    *x += rng.gen_range(-0.3..0.3);
                }
                let e = Embedding::normalized(v).unwrap();
                let session = if rng.gen_bool(0.5) { "s1" } else { "s2" };
                insert_raw(&eng, session, &format!("m{}", i / 3), i as i64 % 3, &e);
            }
            let mut qv: Vec<f32> = centers[rng.gen_range(0..4)].as_slice().to_vec();
            for x in qv.iter_mut() {
                *x += rng.gen_range(-0.3..0.3);
            }
            let q = Embedding::normalized(qv).unwrap();
            let active: HashSet<String> = (0..rng.gen_range(0..10))
                .map(|i| format!("m{i}"))
                .collect();
            let ctx = SearchContext::new("s1")
                .with_active_ids(active)
                .with_k(rng.gen_range(1..8))
                .with_threshold([0.0f32, 0.2, 0.4, 0.6][rng.gen_range(0..4)]);

            let via_db = eng.search_via_db(&q, &ctx).unwrap();
            let via_cache = eng.search_via_cache(&q, &ctx).unwrap();
            assert_eq!(via_db, via_cache);
            for h in &via_db {
                assert!(h.score >= ctx.threshold);
            }
        }
    }

    #[test]
    fn mirror_invariant_after_interleaved_indexing_and_search() {
        let eng = engine();
        eng.set_cache_enabled(true);
        let ctx = SearchContext::new("s1").with_threshold(0.0);
        for i in 0..10 {
            eng.index_message("s2", &format!("m{i}"), &format!("message number {i}"))
                .unwrap();
            if i % 3 == 0 {
                eng.search("message", &ctx).unwrap();
            }
        }
        let table: HashSet<(String, String, i64)> = eng
            .store()
            .load_all_chunks()
            .unwrap()
            .into_iter()
            .map(|r| r.identity())
            .collect();
        eng.ensure_cache_warm().unwrap();
        let guard = eng.cache.lock().unwrap();
        let cache: HashSet<(String, String, i64)> = guard
            .as_ref()
            .unwrap()
            .iter()
            .map(|c| (c.session_id.clone(), c.message_id.clone(), c.chunk_index))
            .collect();
        assert_eq!(table, cache);
    }

    #[test]
    fn search_timings_are_collected() {
        let eng = engine();
        assert!(eng.search_timings().is_none());
        eng.index_message("s1", "m1", "some text to search").unwrap();
        let ctx = SearchContext::new("s2");
        for _ in 0..5 {
            eng.search("some text", &ctx).unwrap();
        }
        let stats = eng.search_timings().unwrap();
        assert_eq!(stats.count, 5);
        assert!(stats.median_ms >= 0.0 && stats.p95_ms >= stats.median_ms);
    }
}
