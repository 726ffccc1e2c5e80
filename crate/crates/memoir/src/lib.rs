//! Embedded dual-memory engine for LLM conversation hosts.
//!
//! `memoir` gives a conversation host two complementary memories over one
//! SQLite file:
//!
//! - **Episodic memory** — every persisted message is sliding-window chunked,
//!   embedded, and indexed in the background; retrieval is a brute-force
//!   cosine scan with a similarity threshold, aware of which turns are still
//!   in the active context window.
//! - **Semantic memory** — agent-writable `(key, value, category)` facts with
//!   per-session upsert semantics, exposed through four explicit tools.
//!
//! Each turn, both memories feed a budget-adaptive **memory block** whose
//! depth scales inversely with context pressure, down to full suppression
//! when compaction is imminent. The whole layer sits behind a single runtime
//! flag and vanishes without trace when disabled.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```bash
//! cargo run -p memoir --example chunking
//! cargo run -p memoir --example index_and_search
//! cargo run -p memoir --example session_recall
//! cargo run -p memoir --example fact_tools
//! cargo run -p memoir --example budget_and_moim
//! cargo run -p memoir --example cache_paths
//! cargo run -p memoir --example scripted_host
//! cargo run -p memoir --example retrieval_eval
//! ```
//!
//! The `memoir` binary exposes the operator surface (`rag`, `memtool`,
//! `bench`, `replay`, `eval`); see the README for the command grammar.

pub mod chunker;
pub mod embedding;
pub mod episodic;
pub mod host;
pub mod moim;
pub mod persistence;
pub mod semantic;
