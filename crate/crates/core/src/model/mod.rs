//! Source-level data model of BIP-style systems: atomic components, connectors,
//! priorities, and the JSON model format.

pub mod expr;
pub(crate) mod format;
pub(crate) mod interactions;
pub(crate) mod validate;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use expr::{
    eval_expr, parse_assignment, parse_expr, substitute, Assignment, BinOp, Env, EvalError, Expr, Path, SyntaxError,
    Type, UnOp, Value,
};
pub use format::{parse_model, parse_model_unchecked, serialize_model};
pub use interactions::{feasible_interactions, project_guard, project_transfer, FeasibleInteraction};
pub use validate::{validate_model, Diagnostic, DiagnosticKind};

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub init: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Port {
    pub name: String,
    pub vars: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub from: String,
    pub port: String,
    pub guard: Expr,
    pub actions: Vec<Assignment>,
    pub to: String,
}

impl Transition {
    pub fn new(from: &str, port: &str, to: &str) -> Self {
        Transition { from: from.into(), port: port.into(), guard: Expr::tt(), actions: Vec::new(), to: to.into() }
    }

    pub fn guarded(mut self, guard: Expr) -> Self {
        self.guard = guard;
        self
    }

    pub fn with_actions(mut self, actions: Vec<Assignment>) -> Self {
        self.actions = actions;
        self
    }

    /// Variables assigned by the update sequence, in first-assignment order.
    pub fn assigned_vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in &self.actions {
            let name = a.target.last();
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomicComponent {
    pub name: String,
    pub variables: Vec<Variable>,
    pub ports: Vec<Port>,
    pub locations: Vec<String>,
    pub initial: String,
    pub transitions: Vec<Transition>,
}

impl AtomicComponent {
    pub fn new(name: &str, initial: &str) -> Self {
        AtomicComponent {
            name: name.into(),
            variables: Vec::new(),
            ports: Vec::new(),
            locations: vec![initial.into()],
            initial: initial.into(),
            transitions: Vec::new(),
        }
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn has_location(&self, name: &str) -> bool {
        self.locations.iter().any(|l| l == name)
    }

    pub fn add_var(&mut self, name: &str, init: Value) {
        self.variables.push(Variable { name: name.into(), init });
    }

    pub fn add_port(&mut self, name: &str, vars: &[&str]) {
        self.ports.push(Port { name: name.into(), vars: vars.iter().map(|s| s.to_string()).collect() });
    }

    pub fn add_location(&mut self, name: &str) {
        if !self.has_location(name) {
            self.locations.push(name.into());
        }
    }

    pub fn add_transition(&mut self, t: Transition) {
        self.add_location(&t.from.clone());
        self.add_location(&t.to.clone());
        self.transitions.push(t);
    }
}

/// `owner.port`: a component port, or the exported port of another connector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub owner: String,
    pub port: String,
}

impl PortRef {
    pub fn new(owner: &str, port: &str) -> Self {
        PortRef { owner: owner.into(), port: port.into() }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (owner, port) = s.split_once('.')?;
        let ok = |p: &str| !p.is_empty() && p.chars().all(|c| c.is_alphanumeric() || c == '_');
        (ok(owner) && ok(port)).then(|| PortRef::new(owner, port))
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.owner, self.port)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectorPort {
    pub port: PortRef,
    pub trigger: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Connector {
    pub name: String,
    pub ports: Vec<ConnectorPort>,
    /// Guard over `comp.port.var` references.
    pub guard: Expr,
    /// Assignments whose targets and operands are `comp.port.var` references.
    pub transfer: Vec<Assignment>,
    pub export: Option<String>,
    /// Ports that every fired interaction of this connector must contain.
    pub requires: Vec<PortRef>,
}

impl Connector {
    pub fn new(name: &str) -> Self {
        Connector {
            name: name.into(),
            ports: Vec::new(),
            guard: Expr::tt(),
            transfer: Vec::new(),
            export: None,
            requires: Vec::new(),
        }
    }

    /// Rendezvous over `ports` (all synchron).
    pub fn rendezvous(name: &str, ports: &[(&str, &str)]) -> Self {
        let mut c = Connector::new(name);
        for (o, p) in ports {
            c.ports.push(ConnectorPort { port: PortRef::new(o, p), trigger: false });
        }
        c
    }

    pub fn with_port(mut self, owner: &str, port: &str, trigger: bool) -> Self {
        self.ports.push(ConnectorPort { port: PortRef::new(owner, port), trigger });
        self
    }

    pub fn all_synchron(&self) -> bool {
        self.ports.iter().all(|p| !p.trigger)
    }
}

/// One side of a priority pair: every interaction of a connector, or exactly
/// one interaction identified by its (flattened) port set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrioritySelector {
    Connector(String),
    Interaction { connector: String, ports: BTreeSet<PortRef> },
}

impl PrioritySelector {
    pub fn connector(&self) -> &str {
        match self {
            PrioritySelector::Connector(c) => c,
            PrioritySelector::Interaction { connector, .. } => connector,
        }
    }

    /// Parses `conn` or `conn:{a.p, b.q}`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None => (!s.is_empty()).then(|| PrioritySelector::Connector(s.into())),
            Some((conn, rest)) => {
                let inner = rest.trim().strip_prefix('{')?.strip_suffix('}')?;
                let mut ports = BTreeSet::new();
                for item in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    ports.insert(PortRef::parse(item)?);
                }
                Some(PrioritySelector::Interaction { connector: conn.trim().into(), ports })
            }
        }
    }
}

impl fmt::Display for PrioritySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrioritySelector::Connector(c) => f.write_str(c),
            PrioritySelector::Interaction { connector, ports } => {
                let items: Vec<String> = ports.iter().map(|p| p.to_string()).collect();
                write!(f, "{connector}:{{{}}}", items.join(","))
            }
        }
    }
}

/// `low ≺ high`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PriorityPair {
    pub low: PrioritySelector,
    pub high: PrioritySelector,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct System {
    pub components: Vec<AtomicComponent>,
    pub connectors: Vec<Connector>,
    pub priorities: Vec<PriorityPair>,
}

impl System {
    pub fn component(&self, name: &str) -> Option<&AtomicComponent> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn component_mut(&mut self, name: &str) -> Option<&mut AtomicComponent> {
        self.components.iter_mut().find(|c| c.name == name)
    }

    pub fn connector(&self, name: &str) -> Option<&Connector> {
        self.connectors.iter().find(|c| c.name == name)
    }

    pub fn add_priority(&mut self, low: &str, high: &str) {
        self.priorities.push(PriorityPair {
            low: PrioritySelector::Connector(low.into()),
            high: PrioritySelector::Connector(high.into()),
        });
    }

    /// Initial global location tuple.
    pub fn init(&self) -> Vec<&str> {
        self.components.iter().map(|c| c.initial.as_str()).collect()
    }

    /// Connectors whose export is referenced by no other connector.
    pub fn top_level_connectors(&self) -> Vec<&Connector> {
        let referenced: BTreeSet<&str> = self
            .connectors
            .iter()
            .flat_map(|c| c.ports.iter())
            .filter(|p| self.component(&p.port.owner).is_none())
            .map(|p| p.port.owner.as_str())
            .collect();
        self.connectors.iter().filter(|c| !referenced.contains(c.name.as_str())).collect()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{context}: syntax error at {source}")]
    Expr {
        context: String,
        #[source]
        source: SyntaxError,
    },
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error("invalid model:\n{}", render_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

impl ModelError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ModelError::Invalid(d) => d,
            _ => &[],
        }
    }
}

fn render_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n")
}
