//! The agent-facing tool surface: four explicit memory tools.
//!
//! `remember_fact`, `recall_facts`, and `forget_fact` operate on the
//! structured fact store; `search_memory` bridges into episodic retrieval
//! with the live search context of the current turn. The surface is
//! transport-neutral: an in-process API here, plus a line-delimited
//! request/response mode on the CLI.
//!
//! Every tool is total over well-formed requests — malformed arguments and
//! unknown tool names come back as structured error responses, never as a
//! crash or a partial write. `recall_facts` results are ordered by
//! (session_id, key); that ordering is a local convention.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::episodic::{EpisodicEngine, SearchContext, SearchHit};
use crate::persistence::{FactRow, Store, StoreError};

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    #[error("missing or empty argument: {0}")]
    MissingArgument(&'static str),
    #[error("invalid argument {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("memory is disabled (rag_enabled = false)")]
    MemoryDisabled,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("search failed: {0}")]
    Search(String),
}

/// One tool invocation: name plus a flat argument map. JSON values are
/// accepted for convenience; string arguments are the documented form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolRequest {
    pub tool: String,
    #[serde(default)]
    pub args: BTreeMap<String, Value>,
    /// Session override for batch mode; single-shot callers pass the
    /// session out of band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

impl ToolRequest {
    fn arg_str(&self, name: &'static str) -> Option<String> {
        match self.args.get(name) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(Value::Number(n)) => Some(n.to_string()),
            Some(Value::Bool(b)) => Some(b.to_string()),
            _ => None,
        }
    }
}

/// One tool result: either a structured payload or an error message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolResponse {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ToolResponse {
    pub fn success(result: Value) -> Self {
        Self {
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn failure(message: impl std::fmt::Display) -> Self {
        Self {
            ok: false,
            result: None,
            error: Some(message.to_string()),
        }
    }
}

/// The four tools over the shared store and episodic engine.
///
/// Tools run on the foreground turn; the host serializes fact mutation per
/// session, so no extra locking happens here.
pub struct MemoryToolbox {
    store: Store,
    engine: Arc<EpisodicEngine>,
    rag_enabled: Arc<AtomicBool>,
}

impl MemoryToolbox {
    pub fn new(store: Store, engine: Arc<EpisodicEngine>, rag_enabled: Arc<AtomicBool>) -> Self {
        Self {
            store,
            engine,
            rag_enabled,
        }
    }

    fn check_enabled(&self) -> Result<(), ToolError> {
        if self.rag_enabled.load(Ordering::Acquire) {
            Ok(())
        } else {
            Err(ToolError::MemoryDisabled)
        }
    }

    /// Writes or updates a fact in the given session.
    pub fn remember_fact(
        &self,
        session_id: &str,
        key: &str,
        value: &str,
        category: &str,
    ) -> Result<FactRow, ToolError> {
        self.check_enabled()?;
        if key.is_empty() {
            return Err(ToolError::MissingArgument("key"));
        }
        if value.is_empty() {
            return Err(ToolError::MissingArgument("value"));
        }
        let category = if category.is_empty() { "general" } else { category };
        Ok(self.store.upsert_fact(session_id, category, key, value)?)
    }

    /// Cross-session fact search by key pattern and optional category.
    pub fn recall_facts(
        &self,
        pattern: &str,
        category: Option<&str>,
    ) -> Result<Vec<FactRow>, ToolError> {
        self.check_enabled()?;
        Ok(self.store.query_facts(pattern, category)?)
    }

    /// Deletes a fact by key within the given session only.
    pub fn forget_fact(&self, session_id: &str, key: &str) -> Result<bool, ToolError> {
        self.check_enabled()?;
        if key.is_empty() {
            return Err(ToolError::MissingArgument("key"));
        }
        Ok(self.store.delete_fact(session_id, key)?)
    }

    /// Semantic search over episodic memory with the turn's live context.
    pub fn search_memory(
        &self,
        query: &str,
        k: usize,
        ctx: &SearchContext,
    ) -> Result<Vec<SearchHit>, ToolError> {
        self.check_enabled()?;
        if query.is_empty() {
            return Err(ToolError::MissingArgument("query"));
        }
        let ctx = ctx.clone().with_k(k);
        self.engine
            .search(query, &ctx)
            .map_err(|e| ToolError::Search(e.to_string()))
    }

    /// Dispatches a request against `session_id` with the turn's search
    /// context; errors become structured failure responses.
    pub fn dispatch(
        &self,
        session_id: &str,
        request: &ToolRequest,
        ctx: &SearchContext,
    ) -> ToolResponse {
        match self.try_dispatch(session_id, request, ctx) {
            Ok(value) => ToolResponse::success(value),
            Err(e) => ToolResponse::failure(e),
        }
    }

    fn try_dispatch(
        &self,
        session_id: &str,
        request: &ToolRequest,
        ctx: &SearchContext,
    ) -> Result<Value, ToolError> {
        match request.tool.as_str() {
            "remember_fact" => {
                let key = request
                    .arg_str("key")
                    .ok_or(ToolError::MissingArgument("key"))?;
                let value = request
                    .arg_str("value")
                    .ok_or(ToolError::MissingArgument("value"))?;
                let category = request.arg_str("category").unwrap_or_default();
                let row = self.remember_fact(session_id, &key, &value, &category)?;
                Ok(json!({ "stored": row }))
            }
            "recall_facts" => {
                let pattern = request.arg_str("pattern").unwrap_or_default();
                let category = request.arg_str("category");
                let facts = self.recall_facts(&pattern, category.as_deref())?;
                Ok(json!({ "facts": facts }))
            }
            "forget_fact" => {
                let key = request
                    .arg_str("key")
                    .ok_or(ToolError::MissingArgument("key"))?;
                let deleted = self.forget_fact(session_id, &key)?;
                Ok(json!({ "deleted": deleted }))
            }
            "search_memory" => {
                let query = request
                    .arg_str("query")
                    .ok_or(ToolError::MissingArgument("query"))?;
                let k = match request.arg_str("k") {
                    None => crate::episodic::DEFAULT_TOP_K,
                    Some(raw) => raw.parse().map_err(|_| ToolError::InvalidArgument {
                        name: "k",
                        reason: format!("expected a positive integer, got {raw:?}"),
                    })?,
                };
                let hits = self.search_memory(&query, k, ctx)?;
                Ok(json!({ "hits": hits }))
            }
            other => Err(ToolError::UnknownTool(other.to_string())),
        }
    }
}
