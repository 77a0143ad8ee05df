//! JSON model format.

use serde::{Deserialize, Serialize};

use super::expr::{parse_assignment, parse_expr, Assignment, Expr, Value};
use super::{
    validate_model, AtomicComponent, Connector, ConnectorPort, ModelError, Port, PortRef, PriorityPair,
    PrioritySelector, System, Transition, Variable,
};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSystem {
    components: Vec<FileComponent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    connectors: Vec<FileConnector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    priorities: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileComponent {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    variables: Vec<FileVariable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ports: Vec<FilePort>,
    locations: Vec<String>,
    initial: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transitions: Vec<FileTransition>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileVariable {
    name: String,
    init: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePort {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vars: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTransition {
    from: String,
    port: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard: Option<String>,
    #[serde(default, rename = "do", skip_serializing_if = "Vec::is_empty")]
    actions: Vec<String>,
    to: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConnector {
    name: String,
    ports: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    triggers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transfer: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    export: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    requires: Vec<String>,
}

pub(crate) fn value_from_json(v: &serde_json::Value) -> Option<Value> {
    match v {
        serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
        serde_json::Value::Number(n) => n.as_i64().map(Value::Int),
        serde_json::Value::String(s) => Some(Value::str(s)),
        serde_json::Value::Array(items) => {
            items.iter().map(|i| i.as_bool()).collect::<Option<Vec<_>>>().map(Value::BoolVec)
        }
        _ => None,
    }
}

pub(crate) fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Int(i) => (*i).into(),
        Value::Bool(b) => (*b).into(),
        Value::Str(s) => s.to_string().into(),
        Value::BoolVec(v) => v.clone().into(),
    }
}

fn expr(src: &str, context: impl FnOnce() -> String) -> Result<Expr, ModelError> {
    parse_expr(src).map_err(|source| ModelError::Expr { context: context(), source })
}

fn assignment(src: &str, context: impl FnOnce() -> String) -> Result<Assignment, ModelError> {
    parse_assignment(src).map_err(|source| ModelError::Expr { context: context(), source })
}

fn port_ref(s: &str, context: impl FnOnce() -> String) -> Result<PortRef, ModelError> {
    PortRef::parse(s)
        .ok_or_else(|| ModelError::Format { context: context(), message: format!("`{s}` is not of the form owner.port") })
}

fn json_error(e: serde_json::Error) -> ModelError {
    ModelError::Json { line: e.line(), column: e.column(), message: e.to_string() }
}

/// Parses a model without running validation.
pub fn parse_model_unchecked(text: &str) -> Result<System, ModelError> {
    let file: FileSystem = serde_json::from_str(text).map_err(json_error)?;
    let mut sys = System::default();
    for fc in file.components {
        let cname = fc.name.clone();
        let mut comp = AtomicComponent {
            name: fc.name,
            variables: Vec::new(),
            ports: fc.ports.into_iter().map(|p| Port { name: p.name, vars: p.vars }).collect(),
            locations: fc.locations,
            initial: fc.initial,
            transitions: Vec::new(),
        };
        for v in fc.variables {
            let init = value_from_json(&v.init).ok_or_else(|| ModelError::Format {
                context: format!("component `{cname}`, variable `{}`", v.name),
                message: format!("unsupported initial value {}", v.init),
            })?;
            comp.variables.push(Variable { name: v.name, init });
        }
        for (i, t) in fc.transitions.into_iter().enumerate() {
            let ctx = || format!("component `{cname}`, transition {i}");
            let guard = match &t.guard {
                Some(g) => expr(g, || format!("{} guard", ctx()))?,
                None => Expr::tt(),
            };
            let actions = t
                .actions
                .iter()
                .map(|a| assignment(a, || format!("{} update `{a}`", ctx())))
                .collect::<Result<Vec<_>, _>>()?;
            comp.transitions.push(Transition { from: t.from, port: t.port, guard, actions, to: t.to });
        }
        sys.components.push(comp);
    }
    for fc in file.connectors {
        let name = fc.name.clone();
        let ctx = || format!("connector `{name}`");
        let triggers = fc.triggers.iter().map(|s| port_ref(s, ctx)).collect::<Result<Vec<_>, _>>()?;
        let mut ports = Vec::new();
        for p in &fc.ports {
            let port = port_ref(p, ctx)?;
            let trigger = triggers.contains(&port);
            ports.push(ConnectorPort { port, trigger });
        }
        for t in &triggers {
            if !ports.iter().any(|p| &p.port == t) {
                return Err(ModelError::Format {
                    context: ctx(),
                    message: format!("trigger `{t}` is not one of the connector's ports"),
                });
            }
        }
        let guard = match &fc.guard {
            Some(g) => expr(g, || format!("{} guard", ctx()))?,
            None => Expr::tt(),
        };
        let transfer = fc
            .transfer
            .iter()
            .map(|a| assignment(a, || format!("{} transfer `{a}`", ctx())))
            .collect::<Result<Vec<_>, _>>()?;
        let requires = fc.requires.iter().map(|s| port_ref(s, ctx)).collect::<Result<Vec<_>, _>>()?;
        sys.connectors.push(Connector { name: fc.name, ports, guard, transfer, export: fc.export, requires });
    }
    for (i, (low, high)) in file.priorities.iter().enumerate() {
        let sel = |s: &str| {
            PrioritySelector::parse(s).ok_or_else(|| ModelError::Format {
                context: format!("priority {i}"),
                message: format!("`{s}` is neither `connector` nor `connector:{{ports}}`"),
            })
        };
        sys.priorities.push(PriorityPair { low: sel(low)?, high: sel(high)? });
    }
    Ok(sys)
}

/// Parses and validates a model.
pub fn parse_model(text: &str) -> Result<System, ModelError> {
    let sys = parse_model_unchecked(text)?;
    let diags = validate_model(&sys);
    if diags.is_empty() {
        Ok(sys)
    } else {
        Err(ModelError::Invalid(diags))
    }
}

fn guard_text(g: &Expr) -> Option<String> {
    (!g.is_true_literal()).then(|| g.to_string())
}

/// Pretty-printed JSON in the same schema `parse_model` reads.
pub fn serialize_model(sys: &System) -> String {
    let file = FileSystem {
        components: sys
            .components
            .iter()
            .map(|c| FileComponent {
                name: c.name.clone(),
                variables: c
                    .variables
                    .iter()
                    .map(|v| FileVariable { name: v.name.clone(), init: value_to_json(&v.init) })
                    .collect(),
                ports: c.ports.iter().map(|p| FilePort { name: p.name.clone(), vars: p.vars.clone() }).collect(),
                locations: c.locations.clone(),
                initial: c.initial.clone(),
                transitions: c
                    .transitions
                    .iter()
                    .map(|t| FileTransition {
                        from: t.from.clone(),
                        port: t.port.clone(),
                        guard: guard_text(&t.guard),
                        actions: t.actions.iter().map(|a| a.to_string()).collect(),
                        to: t.to.clone(),
                    })
                    .collect(),
            })
            .collect(),
        connectors: sys
            .connectors
            .iter()
            .map(|c| FileConnector {
                name: c.name.clone(),
                ports: c.ports.iter().map(|p| p.port.to_string()).collect(),
                triggers: c.ports.iter().filter(|p| p.trigger).map(|p| p.port.to_string()).collect(),
                guard: guard_text(&c.guard),
                transfer: c.transfer.iter().map(|a| a.to_string()).collect(),
                export: c.export.clone(),
                requires: c.requires.iter().map(|p| p.to_string()).collect(),
            })
            .collect(),
        priorities: sys.priorities.iter().map(|p| (p.low.to_string(), p.high.to_string())).collect(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHILOSOPHER: &str = r#"{
      "components": [{
        "name": "p0",
        "ports": [{"name": "right"}, {"name": "left"}, {"name": "release"}],
        "locations": ["init", "r", "rl"],
        "initial": "init",
        "transitions": [
          {"from": "init", "port": "right", "to": "r"},
          {"from": "r", "port": "left", "to": "rl"},
          {"from": "rl", "port": "release", "to": "init"}
        ]
      }]
    }"#;

    #[test]
    fn philosopher_component() {
        let sys = parse_model(PHILOSOPHER).unwrap();
        assert_eq!(sys.components.len(), 1);
        assert_eq!(sys.components[0].locations, ["init", "r", "rl"]);
        assert_eq!(sys.components[0].ports.len(), 3);
    }

    #[test]
    fn round_trip() {
        let sys = parse_model(PHILOSOPHER).unwrap();
        let again = parse_model(&serialize_model(&sys)).unwrap();
        assert_eq!(sys, again);
    }

    #[test]
    fn empty_system_rejected() {
        let err = parse_model(r#"{"components": []}"#).unwrap_err();
        assert!(err.to_string().contains("system must contain at least one component"), "{err}");
    }

    #[test]
    fn unresolved_port() {
        let text = r#"{
          "components": [{"name": "a", "ports": [{"name": "p"}], "locations": ["l"], "initial": "l",
                          "transitions": [{"from": "l", "port": "p", "to": "l"}]}],
          "connectors": [{"name": "c", "ports": ["a.p9"]}]
        }"#;
        let err = parse_model(text).unwrap_err();
        assert!(err.to_string().contains("a.p9"), "{err}");
        assert!(err.diagnostics().iter().any(|d| d.kind == crate::model::DiagnosticKind::UnresolvedReference));
    }

    #[test]
    fn json_syntax_error_has_position() {
        match parse_model("{\n  \"components\": [,]\n}") {
            Err(ModelError::Json { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expression_syntax_error_is_located() {
        let text = r#"{"components": [{"name": "a", "variables": [{"name": "x", "init": 0}],
            "ports": [{"name": "p"}], "locations": ["l"], "initial": "l",
            "transitions": [{"from": "l", "port": "p", "guard": "x > ", "to": "l"}]}]}"#;
        let err = parse_model(text).unwrap_err();
        assert!(matches!(err, ModelError::Expr { .. }));
        assert!(err.to_string().contains("column"), "{err}");
    }
}
