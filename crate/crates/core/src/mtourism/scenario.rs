//! Scenario scripts.
//!
//! ```text
//! # comment
//! set device.hardware.battery.level 15
//! unset user.gps
//! call RestaurantsSearching.search {"cuisineKeyword": "ital"}
//! expect /items/0/photoRef null
//! ```
//!
//! `expect <pointer> null` passes when the pointer is missing or null.

use std::fmt;
use std::sync::Arc;

use serde_json::Value as Json;

use super::data::{load_restaurants, DataError, Restaurant};
use super::{load_cas, Demo, DemoError};
use crate::cas::DocumentError;
use crate::weaver::NotifyMode;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Set {
        path: String,
        value: Json,
    },
    Unset {
        path: String,
    },
    Call {
        service: String,
        operation: String,
        request: Json,
    },
    Expect {
        pointer: String,
        expected: Json,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    /// Commands with their 1-based line numbers.
    pub commands: Vec<(usize, Command)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

fn json_arg(text: &str, what: &str, line: usize) -> Result<Json, ScriptError> {
    serde_json::from_str(text).map_err(|e| ScriptError {
        line,
        message: format!("{what} is not valid JSON: {e}"),
    })
}

fn parse_line(line: usize, text: &str) -> Result<Command, ScriptError> {
    let err = |message: String| ScriptError { line, message };
    let (keyword, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let rest = rest.trim();
    let (first, tail) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let tail = tail.trim();
    match keyword {
        "set" if !first.is_empty() && !tail.is_empty() => Ok(Command::Set {
            path: first.to_owned(),
            value: json_arg(tail, "value", line)?,
        }),
        "unset" if !first.is_empty() && tail.is_empty() => Ok(Command::Unset {
            path: first.to_owned(),
        }),
        "call" => {
            let (service, operation) = first
                .split_once('.')
                .filter(|(s, o)| !s.is_empty() && !o.is_empty())
                .ok_or_else(|| err(format!("expected <service>.<operation>, found `{first}`")))?;
            let request = if tail.is_empty() {
                Json::Object(Default::default())
            } else {
                json_arg(tail, "request", line)?
            };
            Ok(Command::Call {
                service: service.to_owned(),
                operation: operation.to_owned(),
                request,
            })
        }
        "expect" if (first.is_empty() || first.starts_with('/')) && !tail.is_empty() => {
            Ok(Command::Expect {
                pointer: first.to_owned(),
                expected: json_arg(tail, "expected value", line)?,
            })
        }
        "set" | "unset" | "expect" => Err(err(format!("malformed `{keyword}` command"))),
        other => Err(err(format!("unknown command `{other}`"))),
    }
}

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut commands = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            commands.push((i + 1, parse_line(i + 1, line)?));
        }
        Ok(Self { commands })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub trace: bool,
    pub mode: NotifyMode,
}

/// Problems found before the first command runs. All map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("scenario: {0}")]
    Script(#[from] ScriptError),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("strategies: {0}")]
    Strategies(#[from] DocumentError),
    #[error(transparent)]
    Demo(#[from] DemoError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub lines: Vec<String>,
    pub failures: usize,
}

impl Transcript {
    pub fn exit_code(&self) -> i32 {
        if self.failures == 0 {
            0
        } else {
            1
        }
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Equality where numbers compare by value, so `5` matches `5.0`.
pub fn json_matches(actual: &Json, expected: &Json) -> bool {
    match (actual, expected) {
        (Json::Number(a), Json::Number(b)) => a.as_f64() == b.as_f64(),
        (Json::Array(a), Json::Array(b)) => {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| json_matches(x, y))
        }
        (Json::Object(a), Json::Object(b)) => {
            a.len() == b.len()
                && a.iter()
                    .all(|(k, v)| b.get(k).is_some_and(|w| json_matches(v, w)))
        }
        _ => actual == expected,
    }
}

fn check_expect(last: Option<&Json>, pointer: &str, expected: &Json) -> Result<(), String> {
    let Some(doc) = last else {
        return Err("actual <call failed>".into());
    };
    let actual = doc.pointer(pointer);
    let ok = match (actual, expected) {
        (None, Json::Null) => true,
        (Some(a), e) => json_matches(a, e),
        (None, _) => false,
    };
    if ok {
        Ok(())
    } else {
        let shown = actual.map_or_else(|| "<missing>".to_owned(), Json::to_string);
        Err(format!("actual {shown}"))
    }
}

/// Checks the script against the demo before anything runs.
fn preflight(script: &ScenarioScript, demo: &Demo) -> Result<(), ScriptError> {
    let mut called = false;
    for (line, cmd) in &script.commands {
        let err = |message: String| ScriptError {
            line: *line,
            message,
        };
        match cmd {
            Command::Set { path, value } => {
                demo.providers()
                    .typed(path, value)
                    .map_err(|e| err(e.to_string()))?;
            }
            Command::Unset { path } => {
                demo.providers()
                    .manager()
                    .supplier_of(super::SERVICE, path)
                    .map_err(|_| err(format!("no provider supplies `{path}`")))?;
            }
            Command::Call { service, .. } => {
                if demo.runtime().weaver().service(service).is_none() {
                    return Err(err(format!("unknown service `{service}`")));
                }
                called = true;
            }
            Command::Expect { .. } if !called => return Err(err("expect before any call".into())),
            Command::Expect { .. } => {}
        }
    }
    Ok(())
}

/// Runs `script` against a fresh demo built from `dataset` and `demo_cas`.
pub fn run_script(
    script: &ScenarioScript,
    demo: &Demo,
    options: RunOptions,
) -> Result<Transcript, SetupError> {
    preflight(script, demo)?;
    let mut out = Transcript::default();
    let mut last: Option<Json> = None;
    let mut calls = 0;
    for (line, cmd) in &script.commands {
        match cmd {
            Command::Set { path, value } => {
                demo.providers().set(path, value).map_err(|e| ScriptError {
                    line: *line,
                    message: e.to_string(),
                })?
            }
            Command::Unset { path } => demo.providers().unset(path).map_err(|e| ScriptError {
                line: *line,
                message: e.to_string(),
            })?,
            Command::Call {
                service,
                operation,
                request,
            } => {
                calls += 1;
                match demo
                    .runtime()
                    .invoke(service, operation, request.clone(), options.mode)
                {
                    Ok(inv) => {
                        out.lines.push(format!(">> call {calls}: {}", inv.response));
                        if options.trace {
                            if options.mode == NotifyMode::Async {
                                out.lines.push(format!(
                                    "-- cache={}",
                                    if inv.cache_hit { "hit" } else { "miss" }
                                ));
                            }
                            out.lines
                                .extend(inv.trace.lines().into_iter().map(|l| format!("-- {l}")));
                        }
                        last = Some(inv.response);
                    }
                    Err(e) => {
                        out.lines.push(format!(">> call {calls}: error: {e}"));
                        out.failures += 1;
                        last = None;
                    }
                }
            }
            Command::Expect { pointer, expected } => {
                if let Err(actual) = check_expect(last.as_ref(), pointer, expected) {
                    out.lines.push(format!(
                        "!! line {line}: expect {pointer}: expected {expected}, {actual}"
                    ));
                    out.failures += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Parses the three inputs and runs the script.
pub fn run_scenario(
    script: &str,
    strategies: &[u8],
    data: &[u8],
    options: RunOptions,
) -> Result<Transcript, SetupError> {
    let script = ScenarioScript::parse(script)?;
    let dataset: Arc<Vec<Restaurant>> = Arc::new(load_restaurants(data)?);
    let cas = load_cas(strategies)?;
    let demo = Demo::new(dataset, cas)?;
    run_script(&script, &demo, options)
}
