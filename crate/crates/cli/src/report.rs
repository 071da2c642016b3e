//! Command outcomes, exit codes and the JSON report envelope.

use serde_json::{json, Value};

use viewforge_core::chase::{ChaseConfig, DEFAULT_FUEL};
use viewforge_core::determinacy::DeterminacyConfig;
use viewforge_core::model::ConjunctiveQuery;
use viewforge_core::oracle::{Bounds, DisclosureBounds};
use viewforge_core::shuffle::ShuffleConfig;
use viewforge_core::Tri;

use crate::workspace::{Diagnostic, Workspace};

pub const REPORT_VERSION: u64 = 1;

pub const EXIT_DEFINITIVE: i32 = 0;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
/// A `verify` run found a witness that does not check out.
pub const EXIT_REJECTED: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Definitive,
    Unknown,
    Rejected,
}

impl Status {
    pub fn of(t: Tri) -> Status {
        if t == Tri::Unknown {
            Status::Unknown
        } else {
            Status::Definitive
        }
    }

    pub fn and(self, other: Status) -> Status {
        match (self, other) {
            (Status::Rejected, _) | (_, Status::Rejected) => Status::Rejected,
            (Status::Unknown, _) | (_, Status::Unknown) => Status::Unknown,
            _ => Status::Definitive,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Definitive => EXIT_DEFINITIVE,
            Status::Unknown => EXIT_UNKNOWN,
            Status::Rejected => EXIT_REJECTED,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Definitive => "definitive",
            Status::Unknown => "unknown",
            Status::Rejected => "rejected",
        }
    }
}

pub fn tri_label(t: Tri) -> &'static str {
    match t {
        Tri::Yes => "yes",
        Tri::No => "no",
        Tri::Unknown => "unknown",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub command: String,
    pub status: Status,
    /// Names the command was run on, so that `verify` can rebuild them.
    pub inputs: Value,
    pub text: String,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{}", render_diagnostics(.0))]
    Workspace(Vec<Diagnostic>),
    #[error("{0}")]
    Input(String),
}

fn render_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn json(&self, command: &str) -> Value {
        let diagnostics: Vec<Value> = match self {
            CliError::Workspace(ds) => ds
                .iter()
                .map(|d| json!({"line": d.line, "col": d.col, "message": d.message, "hint": d.hint}))
                .collect(),
            CliError::Input(m) => vec![json!({"message": m})],
        };
        json!({
            "viewforge_report": REPORT_VERSION,
            "command": command,
            "status": "input_error",
            "result": {"diagnostics": diagnostics},
        })
    }
}

pub fn input<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Input(msg.into()))
}

/// Wrap an outcome in the versioned envelope.
pub fn envelope(o: &Outcome, workspace_text: &str) -> Value {
    json!({
        "viewforge_report": REPORT_VERSION,
        "command": o.command,
        "status": o.status.label(),
        "workspace": workspace_text,
        "inputs": o.inputs,
        "result": o.result,
    })
}

/// Flags shared by every command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Settings {
    pub fuel: Option<usize>,
    pub max_rounds: Option<usize>,
    pub domain_size: Option<usize>,
    pub max_facts: Option<usize>,
    pub trace: bool,
}

impl Settings {
    pub fn chase(&self) -> ChaseConfig {
        ChaseConfig::with_fuel(self.fuel.unwrap_or(DEFAULT_FUEL))
    }

    pub fn determinacy(&self) -> DeterminacyConfig {
        let d = DeterminacyConfig::default();
        DeterminacyConfig {
            max_rounds: self.max_rounds.unwrap_or(d.max_rounds),
            chase: self.chase(),
            keep_rounds: self.trace,
        }
    }

    pub fn shuffle(&self) -> ShuffleConfig {
        ShuffleConfig {
            chase: self.chase(),
            ..Default::default()
        }
    }

    pub fn refute_bounds(&self) -> Bounds {
        Bounds {
            domain_size: self.domain_size.unwrap_or(2),
            max_facts: self.max_facts.unwrap_or(2),
        }
    }

    pub fn disclosure_bounds(&self) -> DisclosureBounds {
        let d = DisclosureBounds::default();
        DisclosureBounds {
            witness_domain: d.witness_domain,
            alt_domain: self.domain_size.unwrap_or(d.alt_domain),
            max_facts: self.max_facts.unwrap_or(d.max_facts),
        }
    }
}

pub fn pick_query<'a>(ws: &'a Workspace, name: Option<&str>) -> Result<&'a ConjunctiveQuery, CliError> {
    match name {
        Some(n) => ws.query(n).ok_or_else(|| {
            let known: Vec<&str> = ws.queries.iter().map(|q| &*q.name).collect();
            CliError::Input(format!("unknown query `{n}`; known queries: {}", list_or_none(&known)))
        }),
        None => match ws.queries.as_slice() {
            [q] => Ok(q),
            [] => input("the workspace defines no query"),
            _ => input("the workspace defines several queries; pick one with --query"),
        },
    }
}

pub fn pick_secrets(ws: &Workspace, names: &[String]) -> Result<Vec<ConjunctiveQuery>, CliError> {
    if names.is_empty() {
        if ws.secrets.is_empty() {
            return input("the workspace defines no secret");
        }
        return Ok(ws.secrets.clone());
    }
    names
        .iter()
        .map(|n| {
            ws.secret(n).cloned().ok_or_else(|| {
                let known: Vec<&str> = ws.secrets.iter().map(|q| &*q.name).collect();
                CliError::Input(format!("unknown secret `{n}`; known secrets: {}", list_or_none(&known)))
            })
        })
        .collect()
}

pub fn pick_dview(ws: &Workspace, name: &str) -> Result<viewforge_core::model::DView, CliError> {
    ws.dview(name).ok_or_else(|| {
        let known: Vec<&str> = ws.dviews.iter().map(|(d, _)| &**d).collect();
        CliError::Input(format!("unknown d-view `{name}`; known d-views: {}", list_or_none(&known)))
    })
}

pub fn pick_instance<'a>(ws: &'a Workspace, name: &str) -> Result<&'a viewforge_core::model::Instance, CliError> {
    ws.instance(name).ok_or_else(|| {
        let known: Vec<&str> = ws.instances.iter().map(|(i, _)| &**i).collect();
        CliError::Input(format!("unknown instance `{name}`; known instances: {}", list_or_none(&known)))
    })
}

fn list_or_none(names: &[&str]) -> String {
    if names.is_empty() {
        "none".into()
    } else {
        names.join(", ")
    }
}
