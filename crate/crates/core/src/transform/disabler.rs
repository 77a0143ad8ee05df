//! The disabler: keeps a rolled-back interaction disabled until the next
//! successful monitor decision.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::instrument::{assign, var};
use super::{fresh, TransformError};
use crate::model::{Assignment, AtomicComponent, Expr, Path, System, Transition, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisablerInfo {
    pub name: String,
    pub pc: String,
    pub pr: String,
    /// `(connector, disabler port)` in index order
    pub ports: Vec<(String, String)>,
}

impl DisablerInfo {
    pub fn port_for(&self, connector: &str) -> Option<&str> {
        self.ports.iter().find(|(c, _)| c == connector).map(|(_, p)| p.as_str())
    }
}

fn set(i: Expr, v: bool) -> Assignment {
    Assignment { target: Path::local("enab"), index: Some(i), value: Expr::Lit(Value::Bool(v)) }
}

/// One location; `enab[i]` guards the port of the `i`-th recoverable
/// connector, which records `id := i`; `pr` clears `enab[id]` and `pc` sets
/// every entry again. Every recoverable connector must be all-synchron.
pub fn build_disabler(sys: &System, recinter: &[String], name: &str) -> Result<(AtomicComponent, DisablerInfo), TransformError> {
    for c in recinter {
        let conn = sys.connector(c).ok_or_else(|| TransformError::UnknownConnector(c.clone()))?;
        if !conn.all_synchron() {
            return Err(TransformError::TriggerInRecinter(c.clone()));
        }
    }
    let mut d = AtomicComponent::new(name, "idle");
    d.add_var("enab", Value::BoolVec(vec![true; recinter.len()]));
    d.add_var("id", Value::Int(0));
    let mut ports = BTreeSet::new();
    let pc = fresh("pc", &mut ports);
    let pr = fresh("pr", &mut ports);
    let mut info = DisablerInfo { name: name.into(), pc: pc.clone(), pr: pr.clone(), ports: Vec::new() };
    for (i, c) in recinter.iter().enumerate() {
        let p = fresh(&format!("p_{c}"), &mut ports);
        d.add_port(&p, &[]);
        let idx = Expr::Lit(Value::Int(i as i64));
        let guard = Expr::Index(Box::new(var("enab")), Box::new(idx.clone()));
        d.add_transition(Transition::new("idle", &p, "idle").guarded(guard).with_actions(vec![assign("id", idx)]));
        info.ports.push((c.clone(), p));
    }
    d.add_port(&pr, &[]);
    d.add_port(&pc, &[]);
    d.add_transition(Transition::new("idle", &pr, "idle").with_actions(vec![set(var("id"), false)]));
    let reset = (0..recinter.len()).map(|i| set(Expr::Lit(Value::Int(i as i64)), true)).collect();
    d.add_transition(Transition::new("idle", &pc, "idle").with_actions(reset));
    Ok((d, info))
}
