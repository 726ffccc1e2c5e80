//! Scripted scenario files: one directive per line, replayed deterministically
//! against a [`HostApp`](super::HostApp).
//!
//! ```text
//! # comment                       blank lines and # comments are skipped
//! session s1 Debugging auth      create session (rest of line is the title)
//! turn user <text>               run one user turn through the block pipeline
//! turn assistant <text>          persist an assistant message
//! flag rag_enabled on|off        flip a runtime flag
//! flag rag_cache_enabled on|off
//! compact                        force a compaction of the current session
//! drain                          wait for all background indexing
//! tool <name> <json-args>        invoke a memory tool, e.g.
//!                                tool remember_fact {"key":"k","value":"v"}
//! expect_moim_empty              assertions apply to the last `turn user`
//! expect_moim_contains <text>
//! expect_budget full|reduced|minimal|suppress
//! expect_hits <n>
//! expect_fact <key> <value>
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use super::{HostApp, HostError, TurnReport};
use crate::semantic::ToolRequest;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: assertion failed: {message}")]
    Assertion { line: usize, message: String },
    #[error("line {line}: {source}")]
    Host {
        line: usize,
        #[source]
        source: HostError,
    },
    #[error("line {line}: tool call failed: {message}")]
    Tool { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
enum Directive {
    Session { id: String, title: String },
    Turn { role: String, text: String },
    Flag { name: String, on: bool },
    Compact,
    Drain,
    Tool { name: String, args_json: String },
    ExpectMoimEmpty,
    ExpectMoimContains(String),
    ExpectBudget(String),
    ExpectHits(usize),
    ExpectFact { key: String, value: String },
}

/// A parsed scenario, ready to replay any number of times.
#[derive(Debug, Clone)]
pub struct Scenario {
    directives: Vec<(usize, Directive)>,
}

/// What a replay did: every turn report plus assertion bookkeeping.
#[derive(Debug)]
pub struct ScenarioReport {
    pub turns: Vec<TurnReport>,
    pub directives_run: usize,
    pub assertions_passed: usize,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut directives = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            directives.push((line, Self::parse_line(line, trimmed)?));
        }
        Ok(Self { directives })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.directives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directives.is_empty()
    }

    fn parse_line(line: usize, text: &str) -> Result<Directive, ScenarioError> {
        let parse_err = |message: String| ScenarioError::Parse { line, message };
        let (word, rest) = match text.split_once(char::is_whitespace) {
            Some((w, r)) => (w, r.trim()),
            None => (text, ""),
        };
        let require_rest = |what: &str| -> Result<&str, ScenarioError> {
            if rest.is_empty() {
                Err(parse_err(format!("{word} requires {what}")))
            } else {
                Ok(rest)
            }
        };

        match word {
            "session" => {
                let rest = require_rest("a session id")?;
                let (id, title) = match rest.split_once(char::is_whitespace) {
                    Some((id, title)) => (id.to_string(), title.trim().to_string()),
                    None => (rest.to_string(), rest.to_string()),
                };
                Ok(Directive::Session { id, title })
            }
            "turn" => {
                let rest = require_rest("a role and text")?;
                let (role, text) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| parse_err("turn requires a role and text".into()))?;
                if role != "user" && role != "assistant" {
                    return Err(parse_err(format!("unknown turn role {role:?}")));
                }
                Ok(Directive::Turn {
                    role: role.to_string(),
                    text: text.trim().to_string(),
                })
            }
            "flag" => {
                let rest = require_rest("a flag name and on|off")?;
                let (name, state) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| parse_err("flag requires a name and on|off".into()))?;
                let on = match state.trim() {
                    "on" => true,
                    "off" => false,
                    other => return Err(parse_err(format!("expected on|off, got {other:?}"))),
                };
                Ok(Directive::Flag {
                    name: name.to_string(),
                    on,
                })
            }
            "compact" => Ok(Directive::Compact),
            "drain" => Ok(Directive::Drain),
            "tool" => {
                let rest = require_rest("a tool name and json args")?;
                let (name, json) = match rest.split_once(char::is_whitespace) {
                    Some((n, j)) => (n.to_string(), j.trim().to_string()),
                    None => (rest.to_string(), "{}".to_string()),
                };
                serde_json::from_str::<BTreeMap<String, serde_json::Value>>(&json)
                    .map_err(|e| parse_err(format!("bad tool args: {e}")))?;
                Ok(Directive::Tool {
                    name,
                    args_json: json,
                })
            }
            "expect_moim_empty" => Ok(Directive::ExpectMoimEmpty),
            "expect_moim_contains" => Ok(Directive::ExpectMoimContains(
                require_rest("a substring")?.to_string(),
            )),
            "expect_budget" => {
                let tier = require_rest("a tier name")?;
                if !matches!(tier, "full" | "reduced" | "minimal" | "suppress") {
                    return Err(parse_err(format!("unknown tier {tier:?}")));
                }
                Ok(Directive::ExpectBudget(tier.to_string()))
            }
            "expect_hits" => {
                let n = require_rest("a count")?
                    .parse()
                    .map_err(|e| parse_err(format!("bad count: {e}")))?;
                Ok(Directive::ExpectHits(n))
            }
            "expect_fact" => {
                let rest = require_rest("a key and value")?;
                let (key, value) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| parse_err("expect_fact requires a key and value".into()))?;
                Ok(Directive::ExpectFact {
                    key: key.to_string(),
                    value: value.trim().to_string(),
                })
            }
            other => Err(parse_err(format!("unknown directive {other:?}"))),
        }
    }
}

/// Replays a scenario against a host.
pub fn replay(host: &HostApp, scenario: &Scenario) -> Result<ScenarioReport, ScenarioError> {
    let mut report = ScenarioReport {
        turns: Vec::new(),
        directives_run: 0,
        assertions_passed: 0,
    };
    let mut current_session: Option<String> = None;
    let mut last_turn: Option<TurnReport> = None;

    for (line, directive) in &scenario.directives {
        let line = *line;
        let host_err = |source: HostError| ScenarioError::Host { line, source };
        let session = |current: &Option<String>| -> Result<String, ScenarioError> {
            current.clone().ok_or(ScenarioError::Parse {
                line,
                message: "no session established yet".into(),
            })
        };
        let assert_turn = |last: &Option<TurnReport>| -> Result<TurnReport, ScenarioError> {
            last.clone().ok_or(ScenarioError::Assertion {
                line,
                message: "no user turn to assert against".into(),
            })
        };

        match directive {
            Directive::Session { id, title } => {
                host.create_session(id, title).map_err(host_err)?;
                current_session = Some(id.clone());
            }
            Directive::Turn { role, text } => {
                let sid = session(&current_session)?;
                if role == "user" {
                    let turn = host.run_turn(&sid, text).map_err(host_err)?;
                    last_turn = Some(turn.clone());
                    report.turns.push(turn);
                } else {
                    host.add_message(&sid, role, text).map_err(host_err)?;
                }
            }
            Directive::Flag { name, on } => {
                host.set_flag(name, *on).map_err(host_err)?;
            }
            Directive::Compact => {
                let sid = session(&current_session)?;
                host.compact(&sid).map_err(host_err)?;
            }
            Directive::Drain => host.drain_indexing(),
            Directive::Tool { name, args_json } => {
                let sid = session(&current_session)?;
                let request = ToolRequest {
                    tool: name.clone(),
                    args: serde_json::from_str(args_json).expect("validated at parse time"),
                    session: None,
                };
                let response = host.tool(&sid, &request).map_err(host_err)?;
                if !response.ok {
                    return Err(ScenarioError::Tool {
                        line,
                        message: response.error.unwrap_or_default(),
                    });
                }
            }
            Directive::ExpectMoimEmpty => {
                let turn = assert_turn(&last_turn)?;
                if !turn.moim.is_empty() {
                    return Err(ScenarioError::Assertion {
                        line,
                        message: format!("block is not empty:\n{}", turn.moim.text),
                    });
                }
                report.assertions_passed += 1;
            }
            Directive::ExpectMoimContains(needle) => {
                let turn = assert_turn(&last_turn)?;
                if !turn.moim.text.contains(needle) {
                    return Err(ScenarioError::Assertion {
                        line,
                        message: format!("block lacks {needle:?}:\n{}", turn.moim.text),
                    });
                }
                report.assertions_passed += 1;
            }
            Directive::ExpectBudget(tier) => {
                let turn = assert_turn(&last_turn)?;
                if turn.budget.tier_name() != tier {
                    return Err(ScenarioError::Assertion {
                        line,
                        message: format!(
                            "expected tier {tier}, got {} (fill ratio {:.3})",
                            turn.budget.tier_name(),
                            turn.fill_ratio
                        ),
                    });
                }
                report.assertions_passed += 1;
            }
            Directive::ExpectHits(n) => {
                let turn = assert_turn(&last_turn)?;
                if turn.hits.len() != *n {
                    return Err(ScenarioError::Assertion {
                        line,
                        message: format!("expected {n} hits, got {}", turn.hits.len()),
                    });
                }
                report.assertions_passed += 1;
            }
            Directive::ExpectFact { key, value } => {
                let turn = assert_turn(&last_turn)?;
                let found = turn
                    .facts
                    .iter()
                    .any(|f| &f.key == key && &f.value == value);
                if !found {
                    return Err(ScenarioError::Assertion {
                        line,
                        message: format!(
                            "fact {key}={value} not injected; facts: {:?}",
                            turn.facts
                                .iter()
                                .map(|f| format!("{}={}", f.key, f.value))
                                .collect::<Vec<_>>()
                        ),
                    });
                }
                report.assertions_passed += 1;
            }
        }
        report.directives_run += 1;
    }
    Ok(report)
}
