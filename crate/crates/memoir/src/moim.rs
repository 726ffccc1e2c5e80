//! Budget-adaptive assembly of the injected memory block.
//!
//! The block carries the current session's facts plus the top retrieved
//! chunks, sized by a four-tier budget keyed on the context fill ratio.
//! Facts are injected at every tier; episodic content shrinks as pressure
//! rises and is suppressed entirely once compaction is imminent.
//!
//! The rendered text format is a stable external surface: header and footer
//! lines, bracketed provenance labels, two-space indented entries, chunk text
//! in double quotes (the quotes are added here, they are not part of the
//! stored text).

use std::collections::HashMap;

use thiserror::Error;

use crate::episodic::SearchHit;
use crate::persistence::FactRow;

pub const MOIM_HEADER: &str = "=== Memory Context ===";
pub const MOIM_FOOTER: &str = "=== End Memory ===";
const FACTS_HEADING: &str = "[Current session facts]";
const EPISODIC_HEADING: &str = "[Relevant past context]";
const INTRA_SESSION_LABEL: &str = "[This session -- earlier]";

/// Context fill ratio: current tokens over window capacity. May exceed 1
/// transiently; anything at or past the compaction threshold suppresses
/// episodic injection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillRatio(f32);

impl FillRatio {
    pub fn new(ratio: f32) -> Self {
        Self(ratio.max(0.0))
    }

    pub fn from_tokens(current_tokens: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "context window capacity must be positive");
        Self::new(current_tokens as f32 / capacity as f32)
    }

    pub fn get(self) -> f32 {
        self.0
    }
}

/// Outcome of the budget tier function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetDecision {
    /// Episodic injection suppressed; facts still flow.
    Suppress,
    /// Inject at most `max_chunks` chunks of at most `max_chars` characters.
    Inject { max_chunks: usize, max_chars: usize },
}

impl BudgetDecision {
    pub fn is_suppressed(&self) -> bool {
        matches!(self, BudgetDecision::Suppress)
    }

    /// Tier name as printed by reports: full / reduced / minimal / suppress.
    pub fn tier_name(&self) -> &'static str {
        match self {
            BudgetDecision::Suppress => "suppress",
            BudgetDecision::Inject { max_chunks: 5, .. } => "full",
            BudgetDecision::Inject { max_chunks: 3, .. } => "reduced",
            BudgetDecision::Inject { .. } => "minimal",
        }
    }
}

/// Selects the injection tier for a fill ratio.
///
/// The boundaries are literal constants on purpose: deriving them
/// arithmetically from the compaction threshold (0.8 × 0.75 in f32) lands a
/// hair above 0.60 and misclassifies ratios exactly at the boundary.
pub fn moim_budget(r: FillRatio) -> BudgetDecision {
    match r.get() {
        r if r >= 0.80 => BudgetDecision::Suppress,
        r if r >= 0.70 => BudgetDecision::Inject {
            max_chunks: 2,
            max_chars: 250,
        },
        r if r >= 0.60 => BudgetDecision::Inject {
            max_chunks: 3,
            max_chars: 400,
        },
        _ => BudgetDecision::Inject {
            max_chunks: 5,
            max_chars: 600,
        },
    }
}

/// Token estimate: one token per four characters, rounded up. Monotone in
/// text length.
pub fn estimate_tokens(text: &str) -> usize {
    let chars = text.chars().count();
    chars.div_ceil(4)
}

/// The assembled block. `text` is empty when there was nothing to inject.
#[derive(Debug, Clone, PartialEq)]
pub struct MoimBlock {
    pub text: String,
    pub estimated_tokens: usize,
    pub facts_count: usize,
    pub chunks_count: usize,
}

impl MoimBlock {
    pub fn empty() -> Self {
        Self {
            text: String::new(),
            estimated_tokens: 0,
            facts_count: 0,
            chunks_count: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

/// Character-prefix truncation, snapped back to the previous whitespace when
/// one falls within the final 20 characters of the cut. No ellipsis marker;
/// the result is a verbatim prefix.
fn truncate_chunk_text(text: &str, max_chars: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= max_chars {
        return text.to_string();
    }
    let tail_start = max_chars.saturating_sub(20);
    let cut = (tail_start..max_chars)
        .rev()
        .find(|&i| chars[i].is_whitespace())
        .unwrap_or(max_chars);
    chars[..cut].iter().collect()
}

/// Renders the block from the turn's gathered inputs.
///
/// `facts` must already be scoped to the current session; `hits` must already
/// be ranked. Cross-session hits are labeled with the session title (falling
/// back to the session id) and the similarity to two decimals; current-session
/// hits are labeled as earlier parts of this session.
pub fn build_moim(
    facts: &[FactRow],
    hits: &[SearchHit],
    decision: BudgetDecision,
    session_titles: &HashMap<String, String>,
) -> MoimBlock {
    let injectable = match decision {
        BudgetDecision::Suppress => &hits[..0],
        BudgetDecision::Inject { max_chunks, .. } => &hits[..hits.len().min(max_chunks)],
    };
    if facts.is_empty() && injectable.is_empty() {
        return MoimBlock::empty();
    }

    let mut out = String::new();
    out.push_str(MOIM_HEADER);
    out.push('\n');

    if !facts.is_empty() {
        out.push_str(FACTS_HEADING);
        out.push('\n');
        for fact in facts {
            out.push_str(&format!(
                "  [{}] {}: {}\n",
                fact.category, fact.key, fact.value
            ));
        }
    }

    let mut chunks_count = 0;
    if !injectable.is_empty() {
        if !facts.is_empty() {
            out.push('\n');
        }
        out.push_str(EPISODIC_HEADING);
        out.push('\n');
        let max_chars = match decision {
            BudgetDecision::Inject { max_chars, .. } => max_chars,
            BudgetDecision::Suppress => unreachable!("injectable is empty when suppressed"),
        };
        for hit in injectable {
            if hit.intra_session {
                out.push_str("  ");
                out.push_str(INTRA_SESSION_LABEL);
                out.push('\n');
            } else {
                let title = session_titles
                    .get(&hit.session_id)
                    .map(String::as_str)
                    .unwrap_or(&hit.session_id);
                out.push_str(&format!(
                    "  [Session: \"{}\", sim: {:.2}]\n",
                    title, hit.score
                ));
            }
            out.push_str(&format!(
                "  \"{}\"\n",
                truncate_chunk_text(&hit.chunk_text, max_chars)
            ));
            chunks_count += 1;
        }
    }

    out.push_str(MOIM_FOOTER);
    out.push('\n');

    MoimBlock {
        estimated_tokens: estimate_tokens(&out),
        facts_count: facts.len(),
        chunks_count,
        text: out,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MoimParseError {
    #[error("missing header line")]
    MissingHeader,
    #[error("missing footer line")]
    MissingFooter,
    #[error("malformed line {0}: {1:?}")]
    Malformed(usize, String),
}

/// A fact line as parsed back out of a rendered block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFact {
    pub category: String,
    pub key: String,
    pub value: String,
}

/// Provenance label of a parsed episodic entry.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedLabel {
    CrossSession { title: String, sim: String },
    IntraSession,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEntry {
    pub label: ParsedLabel,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedMoim {
    pub facts: Vec<ParsedFact>,
    pub entries: Vec<ParsedEntry>,
}

/// Reference parser for the block format. Every block `build_moim` renders
/// must round-trip through here; it is what pins the external format.
pub fn parse_moim(text: &str) -> Result<ParsedMoim, MoimParseError> {
    if text.is_empty() {
        return Ok(ParsedMoim::default());
    }
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&MOIM_HEADER) {
        return Err(MoimParseError::MissingHeader);
    }
    if lines.last() != Some(&MOIM_FOOTER) {
        return Err(MoimParseError::MissingFooter);
    }

    let mut parsed = ParsedMoim::default();
    let mut in_facts = false;
    let mut pending_label: Option<ParsedLabel> = None;

    for (no, line) in lines[1..lines.len() - 1].iter().enumerate() {
        let lineno = no + 2;
        if line.is_empty() {
            in_facts = false;
            continue;
        }
        if *line == FACTS_HEADING {
            in_facts = true;
            continue;
        }
        if *line == EPISODIC_HEADING {
            in_facts = false;
            continue;
        }
        let entry = line
            .strip_prefix("  ")
            .ok_or_else(|| MoimParseError::Malformed(lineno, line.to_string()))?;

        if in_facts {
            let rest = entry
                .strip_prefix('[')
                .ok_or_else(|| MoimParseError::Malformed(lineno, line.to_string()))?;
            let (category, kv) = rest
                .split_once("] ")
                .ok_or_else(|| MoimParseError::Malformed(lineno, line.to_string()))?;
            let (key, value) = kv
                .split_once(": ")
                .ok_or_else(|| MoimParseError::Malformed(lineno, line.to_string()))?;
            parsed.facts.push(ParsedFact {
                category: category.to_string(),
                key: key.to_string(),
                value: value.to_string(),
            });
        } else if entry == INTRA_SESSION_LABEL {
            pending_label = Some(ParsedLabel::IntraSession);
        } else if let Some(rest) = entry.strip_prefix("[Session: \"") {
            let (title, sim) = rest
                .split_once("\", sim: ")
                .and_then(|(t, s)| s.strip_suffix(']').map(|s| (t, s)))
                .ok_or_else(|| MoimParseError::Malformed(lineno, line.to_string()))?;
            pending_label = Some(ParsedLabel::CrossSession {
                title: title.to_string(),
                sim: sim.to_string(),
            });
        } else if let Some(quoted) = entry.strip_prefix('"').and_then(|e| e.strip_suffix('"')) {
            let label = pending_label
                .take()
                .ok_or_else(|| MoimParseError::Malformed(lineno, line.to_string()))?;
            parsed.entries.push(ParsedEntry {
                label,
                text: quoted.to_string(),
            });
        } else {
            return Err(MoimParseError::Malformed(lineno, line.to_string()));
        }
    }
    Ok(parsed)
}
