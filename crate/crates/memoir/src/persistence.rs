//! Durable storage: host conversation tables plus the two memory tables.
//!
//! Everything lives in one SQLite file. The host tables (`sessions`,
//! `messages`, `app_settings`) are created eagerly; the memory tables
//! (`rag_chunks`, `memory_facts`) are created lazily on first memory access so
//! the memory layer can attach to any existing deployment without a schema
//! migration — and so a disabled memory layer leaves no trace in the file.
//!
//! The conversation tables are always the source of truth. Chunk rows are a
//! derived, recoverable structure: reindexing from messages reproduces them
//! exactly, and `INSERT OR IGNORE` against the unique
//! `(session_id, message_id, chunk_index)` index makes reindexing idempotent.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use thiserror::Error;

use crate::embedding::EMBEDDING_BLOB_LEN;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("sqlite error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("chunk blob for {session_id}/{message_id}#{chunk_index} must be {expected} bytes, got {got}")]
    InvalidBlob {
        session_id: String,
        message_id: String,
        chunk_index: i64,
        expected: usize,
        got: usize,
    },
    #[error("key and value must be non-empty")]
    EmptyKeyOrValue,
    #[error("session not found: {0}")]
    SessionNotFound(String),
    #[error("store lock poisoned")]
    Poisoned,
}

pub type StoreResult<T> = Result<T, StoreError>;

/// One row of `rag_chunks`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkRow {
    pub id: i64,
    pub session_id: String,
    pub message_id: String,
    pub chunk_index: i64,
    pub chunk_text: String,
    pub embedding: Vec<u8>,
    pub created_at: String,
}

impl ChunkRow {
    pub fn new(
        session_id: impl Into<String>,
        message_id: impl Into<String>,
        chunk_index: i64,
        chunk_text: impl Into<String>,
        embedding: Vec<u8>,
    ) -> Self {
        Self {
            id: 0,
            session_id: session_id.into(),
            message_id: message_id.into(),
            chunk_index,
            chunk_text: chunk_text.into(),
            embedding,
            created_at: now_utc(),
        }
    }

    /// The natural identity used by the unique index and by reindex checks.
    pub fn identity(&self) -> (String, String, i64) {
        (
            self.session_id.clone(),
            self.message_id.clone(),
            self.chunk_index,
        )
    }
}

/// One row of `memory_facts`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FactRow {
    pub id: i64,
    pub session_id: String,
    pub category: String,
    pub key: String,
    pub value: String,
    pub created_at: String,
}

/// One row of the host `sessions` table.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub id: String,
    pub title: String,
    pub created_at: String,
}

/// One row of the host `messages` table.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageRow {
    pub id: String,
    pub session_id: String,
    pub role: String,
    pub content: String,
    pub created_at: String,
}

/// Current UTC time as a sortable ISO-8601 string.
pub fn now_utc() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

const HOST_SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS sessions (
    id         TEXT PRIMARY KEY,
    title      TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS messages (
    id         TEXT PRIMARY KEY,
    session_id TEXT NOT NULL REFERENCES sessions(id),
    role       TEXT NOT NULL,
    content    TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS app_settings (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
";

const MEMORY_SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS rag_chunks (
    id          INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id  TEXT NOT NULL,
    message_id  TEXT NOT NULL,
    chunk_index INTEGER NOT NULL,
    chunk_text  TEXT NOT NULL,
    embedding   BLOB NOT NULL,
    created_at  TEXT NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS idx_rag_chunks_unique
    ON rag_chunks(session_id, message_id, chunk_index);
CREATE TABLE IF NOT EXISTS memory_facts (
    id         INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id TEXT NOT NULL,
    category   TEXT NOT NULL DEFAULT 'general',
    key        TEXT NOT NULL,
    value      TEXT NOT NULL,
    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
    FOREIGN KEY (session_id)
        REFERENCES sessions(id) ON DELETE CASCADE
);
CREATE UNIQUE INDEX IF NOT EXISTS idx_memory_facts_session_key
    ON memory_facts(session_id, key);
";

struct StoreInner {
    conn: Mutex<Connection>,
    memory_schema_ready: AtomicBool,
}

/// Handle to the single-file store; cheap to clone and share across threads.
///
/// Single-writer/multiple-reader contract: all access goes through one
/// serialized connection, so background indexing writes never interleave
/// with a foreground read mid-statement.
#[derive(Clone)]
pub struct Store {
    inner: Arc<StoreInner>,
}

impl Store {
    /// Opens (creating if needed) the store at `path` and ensures the host
    /// tables exist. Memory tables are not touched.
    pub fn open(path: impl AsRef<Path>) -> StoreResult<Self> {
        Self::from_connection(Connection::open(path)?)
    }

    /// In-memory store, mostly for tests and examples.
    pub fn open_in_memory() -> StoreResult<Self> {
        Self::from_connection(Connection::open_in_memory()?)
    }

    fn from_connection(conn: Connection) -> StoreResult<Self> {
        conn.pragma_update(None, "foreign_keys", 1)?;
        // WAL + NORMAL keeps message commits off the fsync path; the
        // commit-before-index ordering is unaffected.
        let _ = conn.pragma_update(None, "journal_mode", "WAL");
        let _ = conn.pragma_update(None, "synchronous", "NORMAL");
        conn.execute_batch(HOST_SCHEMA)?;
        Ok(Self {
            inner: Arc::new(StoreInner {
                conn: Mutex::new(conn),
                memory_schema_ready: AtomicBool::new(false),
            }),
        })
    }

    fn conn(&self) -> StoreResult<std::sync::MutexGuard<'_, Connection>> {
        self.inner.conn.lock().map_err(|_| StoreError::Poisoned)
    }

    // ── memory schema ───────────────────────────────────────────────────

    /// Creates the memory tables if they do not exist yet. Idempotent; never
    /// touches host tables.
    pub fn ensure_schema(&self) -> StoreResult<()> {
        if self.inner.memory_schema_ready.load(Ordering::Acquire) {
            return Ok(());
        }
        self.conn()?.execute_batch(MEMORY_SCHEMA)?;
        self.inner.memory_schema_ready.store(true, Ordering::Release);
        Ok(())
    }

    fn table_exists(conn: &Connection, name: &str) -> StoreResult<bool> {
        let found: Option<String> = conn
            .query_row(
                "SELECT name FROM sqlite_master WHERE type = 'table' AND name = ?1",
                params![name],
                |row| row.get(0),
            )
            .optional()?;
        Ok(found.is_some())
    }

    /// Whether each memory table exists, without creating anything.
    pub fn memory_tables_exist(&self) -> StoreResult<(bool, bool)> {
        let conn = self.conn()?;
        Ok((
            Self::table_exists(&conn, "rag_chunks")?,
            Self::table_exists(&conn, "memory_facts")?,
        ))
    }

    // ── chunks ──────────────────────────────────────────────────────────

    /// Inserts chunk rows, silently skipping duplicates of
    /// `(session_id, message_id, chunk_index)`. Returns how many were
    /// actually inserted. All rows go in one transaction.
    pub fn insert_chunks(&self, rows: &[ChunkRow]) -> StoreResult<usize> {
        if rows.is_empty() {
            return Ok(0);
        }
        for row in rows {
            if row.embedding.len() != EMBEDDING_BLOB_LEN {
                return Err(StoreError::InvalidBlob {
                    session_id: row.session_id.clone(),
                    message_id: row.message_id.clone(),
                    chunk_index: row.chunk_index,
                    expected: EMBEDDING_BLOB_LEN,
                    got: row.embedding.len(),
                });
            }
        }
        self.ensure_schema()?;
        let mut conn = self.conn()?;
        let tx = conn.transaction()?;
        let mut inserted = 0usize;
        {
            let mut stmt = tx.prepare(
                "INSERT OR IGNORE INTO rag_chunks
                     (session_id, message_id, chunk_index, chunk_text, embedding, created_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            )?;
            for row in rows {
                inserted += stmt.execute(params![
                    row.session_id,
                    row.message_id,
                    row.chunk_index,
                    row.chunk_text,
                    row.embedding,
                    row.created_at,
                ])?;
            }
        }
        tx.commit()?;
        Ok(inserted)
    }

    /// Loads every chunk row, ordered by (session_id, message_id, chunk_index).
    pub fn load_all_chunks(&self) -> StoreResult<Vec<ChunkRow>> {
        self.ensure_schema()?;
        let conn = self.conn()?;
        let mut stmt = conn.prepare(
            "SELECT id, session_id, message_id, chunk_index, chunk_text, embedding, created_at
             FROM rag_chunks
             ORDER BY session_id, message_id, chunk_index",
        )?;
        let rows = stmt
            .query_map([], |row| {
                Ok(ChunkRow {
                    id: row.get(0)?,
                    session_id: row.get(1)?,
                    message_id: row.get(2)?,
                    chunk_index: row.get(3)?,
                    chunk_text: row.get(4)?,
                    embedding: row.get(5)?,
                    created_at: row.get(6)?,
                })
            })?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rows)
    }

    /// Deletes every chunk row; the chunk set is recoverable by reindexing.
    pub fn clear_chunks(&self) -> StoreResult<usize> {
        self.ensure_schema()?;
        Ok(self.conn()?.execute("DELETE FROM rag_chunks", [])?)
    }

    /// Chunk count without creating the table.
    pub fn chunk_count(&self) -> StoreResult<i64> {
        let conn = self.conn()?;
        if !Self::table_exists(&conn, "rag_chunks")? {
            return Ok(0);
        }
        Ok(conn.query_row("SELECT COUNT(*) FROM rag_chunks", [], |r| r.get(0))?)
    }

    /// Message ids of a session that have at least one chunk row.
    pub fn indexed_message_ids(&self, session_id: &str) -> StoreResult<Vec<String>> {
        let conn = self.conn()?;
        if !Self::table_exists(&conn, "rag_chunks")? {
            return Ok(Vec::new());
        }
        let mut stmt = conn.prepare(
            "SELECT DISTINCT message_id FROM rag_chunks WHERE session_id = ?1",
        )?;
        let ids = stmt
            .query_map(params![session_id], |row| row.get(0))?
            .collect::<Result<Vec<String>, _>>()?;
        Ok(ids)
    }

    // ── facts ───────────────────────────────────────────────────────────

    /// Writes or replaces the fact keyed `(session_id, key)`. On conflict the
    /// value and category are replaced and `created_at` is refreshed.
    pub fn upsert_fact(
        &self,
        session_id: &str,
        category: &str,
        key: &str,
        value: &str,
    ) -> StoreResult<FactRow> {
        if key.is_empty() || value.is_empty() {
            return Err(StoreError::EmptyKeyOrValue);
        }
        self.ensure_schema()?;
        let created_at = now_utc();
        let conn = self.conn()?;
        conn.execute(
            "INSERT INTO memory_facts (session_id, category, key, value, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5)
             ON CONFLICT(session_id, key) DO UPDATE SET
                 category = excluded.category,
                 value = excluded.value,
                 created_at = excluded.created_at",
            params![session_id, category, key, value, created_at],
        )?;
        let row = conn.query_row(
            "SELECT id, session_id, category, key, value, created_at
             FROM memory_facts WHERE session_id = ?1 AND key = ?2",
            params![session_id, key],
            Self::map_fact,
        )?;
        Ok(row)
    }

    /// Removes the fact keyed `(session_id, key)`; returns whether it existed.
    pub fn delete_fact(&self, session_id: &str, key: &str) -> StoreResult<bool> {
        self.ensure_schema()?;
        let n = self.conn()?.execute(
            "DELETE FROM memory_facts WHERE session_id = ?1 AND key = ?2",
            params![session_id, key],
        )?;
        Ok(n > 0)
    }

    /// All facts of one session, ordered by key.
    pub fn load_facts(&self, session_id: &str) -> StoreResult<Vec<FactRow>> {
        self.ensure_schema()?;
        let conn = self.conn()?;
        let mut stmt = conn.prepare(
            "SELECT id, session_id, category, key, value, created_at
             FROM memory_facts WHERE session_id = ?1 ORDER BY key",
        )?;
        let rows = stmt
            .query_map(params![session_id], Self::map_fact)?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rows)
    }

    /// Cross-session fact search: case-insensitive substring match on the
    /// key, optional exact category filter. Ordered by (session_id, key).
    pub fn query_facts(
        &self,
        pattern: &str,
        category: Option<&str>,
    ) -> StoreResult<Vec<FactRow>> {
        self.ensure_schema()?;
        let escaped = pattern
            .replace('\\', "\\\\")
            .replace('%', "\\%")
            .replace('_', "\\_");
        let like = format!("%{}%", escaped.to_lowercase());
        let conn = self.conn()?;
        let mut rows = Vec::new();
        match category {
            Some(cat) => {
                let mut stmt = conn.prepare(
                    "SELECT id, session_id, category, key, value, created_at
                     FROM memory_facts
                     WHERE lower(key) LIKE ?1 ESCAPE '\\' AND category = ?2
                     ORDER BY session_id, key",
                )?;
                for row in stmt.query_map(params![like, cat], Self::map_fact)? {
                    rows.push(row?);
                }
            }
            None => {
                let mut stmt = conn.prepare(
                    "SELECT id, session_id, category, key, value, created_at
                     FROM memory_facts
                     WHERE lower(key) LIKE ?1 ESCAPE '\\'
                     ORDER BY session_id, key",
                )?;
                for row in stmt.query_map(params![like], Self::map_fact)? {
                    rows.push(row?);
                }
            }
        }
        Ok(rows)
    }

    /// Fact count without creating the table.
    pub fn fact_count(&self) -> StoreResult<i64> {
        let conn = self.conn()?;
        if !Self::table_exists(&conn, "memory_facts")? {
            return Ok(0);
        }
        Ok(conn.query_row("SELECT COUNT(*) FROM memory_facts", [], |r| r.get(0))?)
    }

    fn map_fact(row: &rusqlite::Row<'_>) -> rusqlite::Result<FactRow> {
        Ok(FactRow {
            id: row.get(0)?,
            session_id: row.get(1)?,
            category: row.get(2)?,
            key: row.get(3)?,
            value: row.get(4)?,
            created_at: row.get(5)?,
        })
    }

    // ── host tables ─────────────────────────────────────────────────────

    pub fn create_session(&self, id: &str, title: &str) -> StoreResult<()> {
        self.conn()?.execute(
            "INSERT OR IGNORE INTO sessions (id, title, created_at) VALUES (?1, ?2, ?3)",
            params![id, title, now_utc()],
        )?;
        Ok(())
    }

    pub fn session_exists(&self, id: &str) -> StoreResult<bool> {
        let found: Option<String> = self
            .conn()?
            .query_row(
                "SELECT id FROM sessions WHERE id = ?1",
                params![id],
                |row| row.get(0),
            )
            .optional()?;
        Ok(found.is_some())
    }

    /// Removes a session with its messages and memory rows. Facts go via the
    /// `ON DELETE CASCADE` foreign key; chunk rows are deleted explicitly
    /// since `rag_chunks` is deliberately not coupled to the host schema.
    pub fn delete_session(&self, id: &str) -> StoreResult<()> {
        let conn = self.conn()?;
        if Self::table_exists(&conn, "rag_chunks")? {
            conn.execute("DELETE FROM rag_chunks WHERE session_id = ?1", params![id])?;
        }
        conn.execute("DELETE FROM messages WHERE session_id = ?1", params![id])?;
        conn.execute("DELETE FROM sessions WHERE id = ?1", params![id])?;
        Ok(())
    }

    pub fn insert_message(
        &self,
        message_id: &str,
        session_id: &str,
        role: &str,
        content: &str,
    ) -> StoreResult<()> {
        if !self.session_exists(session_id)? {
            return Err(StoreError::SessionNotFound(session_id.to_string()));
        }
        self.conn()?.execute(
            "INSERT INTO messages (id, session_id, role, content, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![message_id, session_id, role, content, now_utc()],
        )?;
        Ok(())
    }

    /// Messages of one session in insertion order.
    pub fn list_messages(&self, session_id: &str) -> StoreResult<Vec<MessageRow>> {
        let conn = self.conn()?;
        let mut stmt = conn.prepare(
            "SELECT id, session_id, role, content, created_at
             FROM messages WHERE session_id = ?1 ORDER BY rowid",
        )?;
        let rows = stmt
            .query_map(params![session_id], Self::map_message)?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rows)
    }

    /// Every message, sessions oldest-first, insertion order within each.
    pub fn all_messages(&self) -> StoreResult<Vec<MessageRow>> {
        let conn = self.conn()?;
        let mut stmt = conn.prepare(
            "SELECT m.id, m.session_id, m.role, m.content, m.created_at
             FROM messages m JOIN sessions s ON s.id = m.session_id
             ORDER BY s.created_at, s.id, m.rowid",
        )?;
        let rows = stmt
            .query_map([], Self::map_message)?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rows)
    }

    fn map_message(row: &rusqlite::Row<'_>) -> rusqlite::Result<MessageRow> {
        Ok(MessageRow {
            id: row.get(0)?,
            session_id: row.get(1)?,
            role: row.get(2)?,
            content: row.get(3)?,
            created_at: row.get(4)?,
        })
    }

    pub fn list_sessions(&self) -> StoreResult<Vec<SessionRow>> {
        let conn = self.conn()?;
        let mut stmt = conn.prepare(
            "SELECT id, title, created_at FROM sessions ORDER BY created_at, id",
        )?;
        let rows = stmt
            .query_map([], |row| {
                Ok(SessionRow {
                    id: row.get(0)?,
                    title: row.get(1)?,
                    created_at: row.get(2)?,
                })
            })?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rows)
    }

    pub fn session_count(&self) -> StoreResult<i64> {
        Ok(self
            .conn()?
            .query_row("SELECT COUNT(*) FROM sessions", [], |r| r.get(0))?)
    }

    pub fn session_titles(&self) -> StoreResult<HashMap<String, String>> {
        Ok(self
            .list_sessions()?
            .into_iter()
            .map(|s| (s.id, s.title))
            .collect())
    }

    /// Escape hatch for tests and maintenance scripts; not part of the
    /// public contract.
    #[doc(hidden)]
    pub fn raw_execute(&self, sql: &str) -> StoreResult<usize> {
        Ok(self.conn()?.execute(sql, [])?)
    }

    // ── settings ────────────────────────────────────────────────────────

    pub fn get_setting(&self, key: &str) -> StoreResult<Option<String>> {
        let v: Option<String> = self
            .conn()?
            .query_row(
                "SELECT value FROM app_settings WHERE key = ?1",
                params![key],
                |row| row.get(0),
            )
            .optional()?;
        Ok(v)
    }

    pub fn set_setting(&self, key: &str, value: &str) -> StoreResult<()> {
        self.conn()?.execute(
            "INSERT INTO app_settings (key, value) VALUES (?1, ?2)
             ON CONFLICT(key) DO UPDATE SET value = excluded.value",
            params![key, value],
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{serialize_embedding, Embedding, EMBEDDING_DIM};

    fn blob(fill: f32) -> Vec<u8> {
        serialize_embedding(&Embedding::new(vec![fill; EMBEDDING_DIM]).unwrap())
    }

    fn store_with_session(id: &str) -> Store {
        let store = Store::open_in_memory().unwrap();
        store.create_session(id, "test session").unwrap();
        store
    }

    #[test]
    fn ensure_schema_is_idempotent() {
        let store = Store::open_in_memory().unwrap();
        assert_eq!(store.memory_tables_exist().unwrap(), (false, false));
        store.ensure_schema().unwrap();
        store.ensure_schema().unwrap();
        assert_eq!(store.memory_tables_exist().unwrap(), (true, true));
        assert_eq!(store.chunk_count().unwrap(), 0);
        assert_eq!(store.fact_count().unwrap(), 0);
    }

    #[test]
    fn host_schema_alone_creates_no_memory_tables() {
        let store = Store::open_in_memory().unwrap();
        store.create_session("s1", "t").unwrap();
        store.insert_message("m1", "s1", "user", "hi").unwrap();
        assert_eq!(store.memory_tables_exist().unwrap(), (false, false));
        // Counts stay readable without creating anything.
        assert_eq!(store.chunk_count().unwrap(), 0);
        assert_eq!(store.memory_tables_exist().unwrap(), (false, false));
    }

    #[test]
    fn duplicate_chunk_insert_is_skipped() {
        let store = store_with_session("s1");
        let rows: Vec<ChunkRow> = (0..3)
            .map(|i| ChunkRow::new("s1", "m1", i, format!("chunk {i}"), blob(0.1)))
            .collect();
        assert_eq!(store.insert_chunks(&rows).unwrap(), 3);
        assert_eq!(store.insert_chunks(&rows).unwrap(), 0);
        assert_eq!(store.chunk_count().unwrap(), 3);
        assert_eq!(store.insert_chunks(&[]).unwrap(), 0);
    }

    #[test]
    fn wrong_blob_length_is_rejected_with_chunk_identity() {
        let store = store_with_session("s1");
        let row = ChunkRow::new("s1", "m9", 2, "text", vec![0u8; 1535]);
        let err = store.insert_chunks(&[row]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("m9") && msg.contains("1535"), "{msg}");
    }

    #[test]
    fn upsert_replaces_value_per_session() {
        let store = store_with_session("s1");
        store.create_session("s2", "other").unwrap();
        store.upsert_fact("s1", "preference", "language", "Rust").unwrap();
        let row = store.upsert_fact("s1", "preference", "language", "Go").unwrap();
        assert_eq!(row.value, "Go");
        store.upsert_fact("s2", "preference", "language", "C").unwrap();
        assert_eq!(store.fact_count().unwrap(), 2);
        let s1 = store.load_facts("s1").unwrap();
        assert_eq!(s1.len(), 1);
        assert_eq!(s1[0].value, "Go");
    }

    #[test]
    fn upsert_rejects_empty_key_or_value() {
        let store = store_with_session("s1");
        assert!(matches!(
            store.upsert_fact("s1", "general", "", "v"),
            Err(StoreError::EmptyKeyOrValue)
        ));
        assert!(matches!(
            store.upsert_fact("s1", "general", "k", ""),
            Err(StoreError::EmptyKeyOrValue)
        ));
        assert_eq!(store.fact_count().unwrap(), 0);
    }

    #[test]
    fn delete_fact_reports_existence_and_scopes_by_session() {
        let store = store_with_session("s1");
        store.create_session("s2", "other").unwrap();
        store.upsert_fact("s1", "general", "k", "v").unwrap();
        store.upsert_fact("s2", "general", "k", "v2").unwrap();
        assert!(store.delete_fact("s1", "k").unwrap());
        assert!(!store.delete_fact("s1", "k").unwrap());
        assert!(!store.delete_fact("s1", "absent").unwrap());
        assert_eq!(store.load_facts("s2").unwrap().len(), 1);
    }

    #[test]
    fn deleting_a_session_cascades_to_its_facts() {
        let store = store_with_session("s1");
        store.upsert_fact("s1", "general", "k", "v").unwrap();
        store.insert_chunks(&[ChunkRow::new("s1", "m1", 0, "t", blob(0.5))]).unwrap();
        store.delete_session("s1").unwrap();
        assert_eq!(store.fact_count().unwrap(), 0);
        assert_eq!(store.chunk_count().unwrap(), 0);
    }

    #[test]
    fn query_facts_matches_linear_scan_oracle() {
        let store = store_with_session("s1");
        store.create_session("s2", "other").unwrap();
        let seed = [
            ("s1", "preference", "language", "Rust"),
            ("s1", "project", "lang_server", "on"),
            ("s2", "preference", "language", "Go"),
            ("s2", "configuration", "editor", "vim"),
            ("s2", "preference", "like_100%", "yes"),
        ];
        for (s, c, k, v) in seed {
            store.upsert_fact(s, c, k, v).unwrap();
        }

        let oracle = |pattern: &str, category: Option<&str>| -> Vec<(String, String)> {
            let mut out: Vec<(String, String)> = seed
                .iter()
                .filter(|(_, c, k, _)| {
                    k.to_lowercase().contains(&pattern.to_lowercase())
                        && category.map_or(true, |cat| *c == cat)
                })
                .map(|(s, _, k, _)| (s.to_string(), k.to_string()))
                .collect();
            out.sort();
            out
        };

        for (pattern, category) in [
            ("lang", None),
            ("LANG", None),
            ("", Some("preference")),
            ("", None),
            ("zzz", None),
            ("100%", None),
        ] {
            let got: Vec<(String, String)> = store
                .query_facts(pattern, category)
                .unwrap()
                .into_iter()
                .map(|f| (f.session_id, f.key))
                .collect();
            assert_eq!(got, oracle(pattern, category), "pattern {pattern:?}");
        }
    }

    #[test]
    fn load_facts_on_empty_session_is_empty() {
        let store = store_with_session("s1");
        assert!(store.load_facts("s1").unwrap().is_empty());
    }

    #[test]
    fn message_requires_existing_session() {
        let store = Store::open_in_memory().unwrap();
        assert!(matches!(
            store.insert_message("m1", "nope", "user", "hi"),
            Err(StoreError::SessionNotFound(_))
        ));
    }

    #[test]
    fn crash_between_commit_and_index_leaves_message_durable() {
        // Simulated crash: the message lands, indexing never runs. A later
        // reindex (insert_chunks) repairs the chunk set.
        let store = store_with_session("s1");
        store.insert_message("m1", "s1", "user", "hello there").unwrap();
        assert_eq!(store.chunk_count().unwrap(), 0);
        store
            .insert_chunks(&[ChunkRow::new("s1", "m1", 0, "hello there", blob(0.2))])
            .unwrap();
        assert_eq!(store.chunk_count().unwrap(), 1);
        assert_eq!(store.list_messages("s1").unwrap().len(), 1);
    }
}
