//! The enforcement monitor as an atomic component.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::instrument::{assign, var, NULL_MARKER};
use super::{fresh, TransformError};
use crate::model::{AtomicComponent, BinOp, Expr, System, Transition, Value};
use crate::property::{AtomicProp, CmpOp, Formula, Oracle};

/// Monitor copy of one monitored field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyVar {
    pub comp: String,
    pub field: String,
    pub copy: String,
    pub tmp: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorInfo {
    pub name: String,
    pub pm: String,
    pub pc: String,
    pub pr: String,
    pub init0: Option<String>,
    pub copies: Vec<CopyVar>,
    /// decision location per waiting location (oracle state)
    pub deciding: BTreeMap<String, String>,
}

impl MonitorInfo {
    pub fn copy_of(&self, comp: &str, field: &str) -> Option<&CopyVar> {
        self.copies.iter().find(|c| c.comp == comp && c.field == field)
    }
}

fn cmp(op: CmpOp) -> BinOp {
    match op {
        CmpOp::Eq => BinOp::Eq,
        CmpOp::Le => BinOp::Le,
    }
}

/// Rewrites an event over the monitor's local copies.
pub fn event_guard(f: &Formula, copy: &impl Fn(&str, &str) -> String) -> Expr {
    match f {
        Formula::Const(b) => Expr::Lit(Value::Bool(*b)),
        Formula::Atom(a) => match a {
            AtomicProp::VarVar { left, op, right } => {
                Expr::binary(cmp(*op), var(&copy(&left.0, &left.1)), var(&copy(&right.0, &right.1)))
            }
            AtomicProp::VarVal { var: (c, v), op, val } => Expr::binary(cmp(*op), var(&copy(c, v)), Expr::Lit(val.clone())),
            AtomicProp::Loc { comp, loc } => Expr::eq(var(&copy(comp, "loc")), Expr::Lit(Value::str(loc))),
            AtomicProp::Port { comp, port } => Expr::eq(var(&copy(comp, "port")), Expr::Lit(Value::str(port))),
        },
        Formula::Not(x) => Expr::not(event_guard(x, copy)),
        Formula::And(a, b) => Expr::and(event_guard(a, copy), event_guard(b, copy)),
        Formula::Or(a, b) => Expr::or(event_guard(a, copy), event_guard(b, copy)),
    }
}

/// Builds the monitor: copies of the monitored fields, one waiting location
/// per good oracle state reachable through good states, a decision location
/// after each `pm`, `pc` edges into good states (backing the copies up) and
/// `pr` edges for edges into bad states (restoring them).
pub fn generate_monitor_component(
    o: &Oracle,
    original: &System,
    occur: &[(String, String)],
    name: &str,
) -> Result<(AtomicComponent, MonitorInfo), TransformError> {
    let class = o.classify();
    if !class.eligible() {
        return Err(TransformError::Ineligible(class));
    }
    let good = |s: usize| o.verdict(s).is_good();
    // waiting locations: good states reachable through good states
    let mut keep = BTreeSet::from([o.initial]);
    let mut stack = vec![o.initial];
    while let Some(s) = stack.pop() {
        for &(_, t) in &o.delta[s] {
            if good(t) && keep.insert(t) {
                stack.push(t);
            }
        }
    }
    let mut locs: BTreeSet<String> = keep.iter().map(|&s| o.states[s].name.clone()).collect();
    let mut e = AtomicComponent::new(name, &o.states[o.initial].name);
    let mut info = MonitorInfo {
        name: name.into(),
        pm: "pm".into(),
        pc: "pc".into(),
        pr: "pr".into(),
        init0: None,
        copies: Vec::new(),
        deciding: BTreeMap::new(),
    };

    let mut var_names = BTreeSet::new();
    for (c, f) in occur {
        let comp = original.component(c).ok_or_else(|| TransformError::UnknownMonitored(format!("{c}.{f}")))?;
        let init = match f.as_str() {
            "loc" => Value::str(&comp.initial),
            "port" => Value::str(NULL_MARKER),
            v => comp.variable(v).ok_or_else(|| TransformError::UnknownMonitored(format!("{c}.{f}")))?.init.clone(),
        };
        let copy = fresh(&format!("{c}_{f}"), &mut var_names);
        let tmp = fresh(&format!("{copy}__tmp"), &mut var_names);
        e.add_var(&copy, init.clone());
        e.add_var(&tmp, init);
        info.copies.push(CopyVar { comp: c.clone(), field: f.clone(), copy, tmp });
    }
    let carried: Vec<&str> = info.copies.iter().map(|c| c.copy.as_str()).collect();
    e.add_port(&info.pm, &carried);
    e.add_port(&info.pc, &[]);
    e.add_port(&info.pr, &[]);
    let backup: Vec<_> = info.copies.iter().map(|c| assign(&c.tmp, var(&c.copy))).collect();
    let restore: Vec<_> = info.copies.iter().map(|c| assign(&c.copy, var(&c.tmp))).collect();
    let copy_name = |c: &str, f: &str| info.copy_of(c, f).map(|v| v.copy.clone()).unwrap_or_else(|| format!("{c}_{f}"));

    let mut deciding = BTreeMap::new();
    for &q in &keep {
        let qn = &o.states[q].name;
        e.add_location(qn);
        let qm = fresh(&format!("{qn}__m"), &mut locs);
        e.add_location(&qm);
        deciding.insert(q, qm);
    }
    for &q in &keep {
        let qn = &o.states[q].name;
        let qm = &deciding[&q];
        e.transitions.push(Transition::new(qn, &info.pm, qm));
        for &(ev, t) in &o.delta[q] {
            let guard = event_guard(o.alphabet[ev].formula(), &copy_name);
            let tr = if good(t) {
                Transition::new(qm, &info.pc, &o.states[t].name).guarded(guard).with_actions(backup.clone())
            } else {
                Transition::new(qm, &info.pr, qn).guarded(guard).with_actions(restore.clone())
            };
            e.transitions.push(tr);
        }
    }
    if !info.copies.is_empty() {
        let init = o.states[o.initial].name.clone();
        let init0 = fresh(&format!("{init}__init0"), &mut locs);
        e.add_location(&init0);
        e.transitions.push(Transition::new(&init0, &info.pm, &init).with_actions(backup));
        e.initial = init0.clone();
        info.init0 = Some(init0);
    }
    info.deciding = deciding.into_iter().map(|(q, m)| (o.states[q].name.clone(), m)).collect();
    Ok((e, info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_expr;
    use crate::property::{monitored_vars, Output, OracleDef, StateDef, TransitionDef};

    fn system() -> System {
        let mut c = AtomicComponent::new("comp1", "l");
        c.add_var("x", Value::Int(1));
        c.add_port("p", &["x"]);
        c.add_transition(Transition::new("l", "p", "l"));
        let mut sys = System::default();
        sys.components.push(c);
        sys
    }

    #[test]
    fn sign_oracle_monitor_shape() {
        let o = crate::property::tests::sign_oracle();
        let occur = monitored_vars(&o).occur;
        let (e, info) = generate_monitor_component(&o, &system(), &occur, "monitor").unwrap();
        let n_pr = e.transitions.iter().filter(|t| t.port == "pr").count();
        let n_pc = e.transitions.iter().filter(|t| t.port == "pc").count();
        let n_pm = e.transitions.iter().filter(|t| t.port == "pm").count();
        assert!(n_pr >= 1 && n_pc >= 1);
        // one pm edge per waiting location plus the initial sync
        assert_eq!(n_pm, info.deciding.len() + 1);
        assert_eq!(e.initial, info.init0.clone().unwrap());
        for t in e.transitions.iter().filter(|t| t.port == "pr") {
            let (waiting, _) = info.deciding.iter().find(|(_, m)| **m == t.from).unwrap();
            assert_eq!(&t.to, waiting, "recovery stays in the waiting location");
        }
    }

    #[test]
    fn single_top_loop_has_no_recovery() {
        let o = Oracle::from_def(OracleDef {
            states: vec![StateDef::accepting("s", true)],
            initial: "s".into(),
            transitions: vec![TransitionDef::new("s", "comp1.x <= 5 || comp1.x > 5", "s")],
        })
        .unwrap();
        let (e, _) = generate_monitor_component(&o, &system(), &monitored_vars(&o).occur, "monitor").unwrap();
        assert_eq!(e.transitions.iter().filter(|t| t.port == "pc").count(), 1);
        assert_eq!(e.transitions.iter().filter(|t| t.port == "pr").count(), 0);
    }

    #[test]
    fn bad_output_becomes_recovery_guard() {
        let bad = "p0.loc = \"r\" && p1.loc = \"r\"";
        let o = Oracle::from_def(OracleDef {
            states: vec![StateDef { name: "s".into(), verdict: None, accepting: None }, StateDef { name: "bad".into(), verdict: None, accepting: None }],
            initial: "s".into(),
            transitions: vec![
                TransitionDef::new("s", &format!("!({bad})"), "s").output(Output::PossiblyGood),
                TransitionDef::new("s", bad, "bad").output(Output::Bad),
                TransitionDef::new("bad", &format!("!({bad})"), "bad"),
                TransitionDef::new("bad", bad, "bad"),
            ],
        })
        .unwrap();
        let mut sys = System::default();
        for n in ["p0", "p1"] {
            let mut c = AtomicComponent::new(n, "init");
            c.add_port("right", &[]);
            c.add_transition(Transition::new("init", "right", "r"));
            sys.components.push(c);
        }
        let (e, info) = generate_monitor_component(&o, &sys, &monitored_vars(&o).occur, "monitor").unwrap();
        let rec = e.transitions.iter().find(|t| t.port == "pr").unwrap();
        assert_eq!(rec.guard, parse_expr("p0_loc = \"r\" && p1_loc = \"r\"").unwrap());
        assert_eq!(info.copy_of("p1", "loc").unwrap().copy, "p1_loc");
        assert_eq!(e.variable("p0_loc").unwrap().init, Value::str("init"));
        assert!(!e.has_location("bad"));
    }
}
