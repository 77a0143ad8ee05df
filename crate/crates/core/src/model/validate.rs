//! Static checks on a [`System`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use super::expr::{Assignment, Expr, Path, Type};
use super::{Connector, PriorityPair, PrioritySelector, System};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    EmptySystem,
    DuplicateName,
    UnresolvedReference,
    OnePortPerComponent,
    HierarchyCycle,
    PriorityCycle,
    TypeError,
    EmptyConnector,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn push(&mut self, kind: DiagnosticKind, message: impl Into<String>) {
        self.0.push(Diagnostic { kind, message: message.into() });
    }
}

/// Returns one diagnostic per violated invariant; empty when the model is valid.
pub fn validate_model(sys: &System) -> Vec<Diagnostic> {
    let mut d = Collector(Vec::new());
    if sys.components.is_empty() {
        d.push(DiagnosticKind::EmptySystem, "system must contain at least one component");
    }
    check_names(sys, &mut d);
    for c in &sys.components {
        check_component(c, &mut d);
    }
    check_connectors(sys, &mut d);
    check_priorities(sys, &mut d);
    d.0
}

fn duplicates<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    let mut dup = Vec::new();
    for n in names {
        if !seen.insert(n) && !dup.contains(&n) {
            dup.push(n);
        }
    }
    dup
}

fn check_names(sys: &System, d: &mut Collector) {
    let names = sys.components.iter().map(|c| c.name.as_str()).chain(sys.connectors.iter().map(|c| c.name.as_str()));
    for n in duplicates(names) {
        d.push(DiagnosticKind::DuplicateName, format!("duplicate component or connector name `{n}`"));
    }
}

fn check_component(c: &super::AtomicComponent, d: &mut Collector) {
    let cn = &c.name;
    for n in duplicates(c.variables.iter().map(|v| v.name.as_str())) {
        d.push(DiagnosticKind::DuplicateName, format!("component `{cn}`: duplicate variable `{n}`"));
    }
    for n in duplicates(c.ports.iter().map(|p| p.name.as_str())) {
        d.push(DiagnosticKind::DuplicateName, format!("component `{cn}`: duplicate port `{n}`"));
    }
    for n in duplicates(c.locations.iter().map(String::as_str)) {
        d.push(DiagnosticKind::DuplicateName, format!("component `{cn}`: duplicate location `{n}`"));
    }
    if !c.has_location(&c.initial) {
        d.push(DiagnosticKind::UnresolvedReference, format!("component `{cn}`: initial location `{}` is not declared", c.initial));
    }
    for p in &c.ports {
        for v in &p.vars {
            if c.variable(v).is_none() {
                d.push(
                    DiagnosticKind::UnresolvedReference,
                    format!("component `{cn}`: port `{}` attaches unknown variable `{v}`", p.name),
                );
            }
        }
    }
    let ty = |p: &Path| match p.segments() {
        [v] => c.variable(v).map(|v| v.init.ty()),
        _ => None,
    };
    for (i, t) in c.transitions.iter().enumerate() {
        let at = format!("component `{cn}`, transition {i} ({} -{}-> {})", t.from, t.port, t.to);
        for l in [&t.from, &t.to] {
            if !c.has_location(l) {
                d.push(DiagnosticKind::UnresolvedReference, format!("{at}: unknown location `{l}`"));
            }
        }
        if c.port(&t.port).is_none() {
            d.push(DiagnosticKind::UnresolvedReference, format!("{at}: unknown port `{}`", t.port));
        }
        check_bool_expr(&t.guard, &ty, &format!("{at} guard"), d);
        for a in &t.actions {
            check_assignment(a, &ty, &at, d);
        }
    }
}

fn check_bool_expr(e: &Expr, ty: &impl Fn(&Path) -> Option<Type>, at: &str, d: &mut Collector) {
    for r in e.refs() {
        if ty(r).is_none() {
            d.push(DiagnosticKind::UnresolvedReference, format!("{at}: unknown variable `{r}`"));
            return;
        }
    }
    match e.type_of(ty) {
        Ok(Type::Bool) => {}
        Ok(other) => d.push(DiagnosticKind::TypeError, format!("{at}: expected a Boolean expression, found {other}")),
        Err(err) => d.push(DiagnosticKind::TypeError, format!("{at}: {err}")),
    }
}

fn check_assignment(a: &Assignment, ty: &impl Fn(&Path) -> Option<Type>, at: &str, d: &mut Collector) {
    let Some(target_ty) = ty(&a.target) else {
        d.push(DiagnosticKind::UnresolvedReference, format!("{at}: unknown assignment target `{}`", a.target));
        return;
    };
    let mut refs: Vec<&Path> = a.value.refs();
    if let Some(i) = &a.index {
        refs.extend(i.refs());
    }
    if let Some(r) = refs.into_iter().find(|r| ty(r).is_none()) {
        d.push(DiagnosticKind::UnresolvedReference, format!("{at}: unknown variable `{r}` in `{a}`"));
        return;
    }
    let want = match &a.index {
        None => target_ty,
        Some(i) => {
            if target_ty != Type::BoolVec {
                d.push(DiagnosticKind::TypeError, format!("{at}: `{}` is not a vector in `{a}`", a.target));
                return;
            }
            match i.type_of(ty) {
                Ok(Type::Int) => {}
                Ok(t) => {
                    d.push(DiagnosticKind::TypeError, format!("{at}: index must be int, found {t} in `{a}`"));
                    return;
                }
                Err(e) => {
                    d.push(DiagnosticKind::TypeError, format!("{at}: {e}"));
                    return;
                }
            }
            Type::Bool
        }
    };
    match a.value.type_of(ty) {
        Ok(t) if t == want => {}
        Ok(t) => d.push(DiagnosticKind::TypeError, format!("{at}: cannot assign {t} to {want} in `{a}`")),
        Err(e) => d.push(DiagnosticKind::TypeError, format!("{at}: {e}")),
    }
}

fn check_connectors(sys: &System, d: &mut Collector) {
    let by_name: HashMap<&str, &Connector> = sys.connectors.iter().map(|c| (c.name.as_str(), c)).collect();
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for c in &sys.connectors {
        let at = format!("connector `{}`", c.name);
        if c.ports.is_empty() {
            d.push(DiagnosticKind::EmptyConnector, format!("{at} has no ports"));
        }
        for n in duplicates(c.ports.iter().map(|p| p.port.owner.as_str())) {
            d.push(DiagnosticKind::OnePortPerComponent, format!("{at}: one port per component, but `{n}` appears twice"));
        }
        for p in &c.ports {
            if let Some(comp) = sys.component(&p.port.owner) {
                if comp.port(&p.port.port).is_none() {
                    d.push(DiagnosticKind::UnresolvedReference, format!("{at}: unresolved port `{}`", p.port));
                }
            } else if let Some(child) = by_name.get(p.port.owner.as_str()) {
                if child.export.as_deref() != Some(p.port.port.as_str()) {
                    d.push(
                        DiagnosticKind::UnresolvedReference,
                        format!("{at}: connector `{}` does not export `{}`", child.name, p.port.port),
                    );
                }
                children.entry(c.name.as_str()).or_default().push(child.name.as_str());
            } else {
                d.push(DiagnosticKind::UnresolvedReference, format!("{at}: unresolved port `{}`", p.port));
            }
        }
        for r in &c.requires {
            if !c.ports.iter().any(|p| &p.port == r) {
                d.push(DiagnosticKind::UnresolvedReference, format!("{at}: required port `{r}` is not a connector port"));
            }
        }
        let ty = |path: &Path| match path.segments() {
            [comp, port, var] => {
                c.ports.iter().find(|p| &p.port.owner == comp && &p.port.port == port)?;
                let comp = sys.component(comp)?;
                if !comp.port(port)?.vars.contains(var) {
                    return None;
                }
                comp.variable(var).map(|v| v.init.ty())
            }
            _ => None,
        };
        check_bool_expr(&c.guard, &ty, &format!("{at} guard"), d);
        for a in &c.transfer {
            check_assignment(a, &ty, &format!("{at} transfer"), d);
        }
    }
    // hierarchy must be acyclic, and flattened port sets keep one port per component
    let mut state: HashMap<&str, u8> = HashMap::new();
    fn visit<'a>(
        n: &'a str,
        children: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut HashMap<&'a str, u8>,
        d: &mut Collector,
    ) -> bool {
        match state.get(n) {
            Some(1) => {
                d.push(DiagnosticKind::HierarchyCycle, format!("connector hierarchy contains a cycle through `{n}`"));
                return false;
            }
            Some(_) => return true,
            None => {}
        }
        state.insert(n, 1);
        let mut ok = true;
        for c in children.get(n).into_iter().flatten() {
            ok &= visit(c, children, state, d);
            if !ok {
                break;
            }
        }
        state.insert(n, 2);
        ok
    }
    let mut acyclic = true;
    for c in &sys.connectors {
        acyclic &= visit(&c.name, &children, &mut state, d);
        if !acyclic {
            break;
        }
    }
    if acyclic {
        for top in sys.top_level_connectors() {
            if !children.contains_key(top.name.as_str()) {
                continue;
            }
            let mut owners = Vec::new();
            flatten_owners(sys, &by_name, top, &mut owners);
            for n in duplicates(owners.iter().map(String::as_str)) {
                d.push(
                    DiagnosticKind::OnePortPerComponent,
                    format!("connector `{}`: one port per component, but `{n}` appears twice across its hierarchy", top.name),
                );
            }
        }
    }
}

fn flatten_owners(sys: &System, by_name: &HashMap<&str, &Connector>, c: &Connector, out: &mut Vec<String>) {
    for p in &c.ports {
        if sys.component(&p.port.owner).is_some() {
            out.push(p.port.owner.clone());
        } else if let Some(child) = by_name.get(p.port.owner.as_str()) {
            flatten_owners(sys, by_name, child, out);
        }
    }
}

fn check_priorities(sys: &System, d: &mut Collector) {
    let names: BTreeSet<&str> = sys.connectors.iter().map(|c| c.name.as_str()).collect();
    let mut ok = true;
    for (i, p) in sys.priorities.iter().enumerate() {
        for s in [&p.low, &p.high] {
            if !names.contains(s.connector()) {
                d.push(DiagnosticKind::UnresolvedReference, format!("priority {i}: unknown connector `{}`", s.connector()));
                ok = false;
            }
            if let PrioritySelector::Interaction { connector, ports } = s {
                if let Some(c) = sys.connector(connector) {
                    let mut flat = Vec::new();
                    flatten_ports(sys, c, &mut flat);
                    for port in ports {
                        if !flat.contains(port) {
                            d.push(
                                DiagnosticKind::UnresolvedReference,
                                format!("priority {i}: `{port}` is not a port of connector `{connector}`"),
                            );
                            ok = false;
                        }
                    }
                }
            }
        }
    }
    if ok {
        if let Err(cycle) = priority_closure(&sys.priorities) {
            d.push(DiagnosticKind::PriorityCycle, format!("priority relation has a cycle: {cycle}"));
        }
    }
}

pub(crate) fn flatten_ports(sys: &System, c: &Connector, out: &mut Vec<super::PortRef>) {
    for p in &c.ports {
        if sys.component(&p.port.owner).is_some() {
            out.push(p.port.clone());
        } else if let Some(child) = sys.connector(&p.port.owner) {
            flatten_ports(sys, child, out);
        }
    }
}

/// Two selectors can denote a common interaction.
fn compatible(a: &PrioritySelector, b: &PrioritySelector) -> bool {
    use PrioritySelector::*;
    match (a, b) {
        (Connector(x), Connector(y)) => x == y,
        (Connector(x), Interaction { connector, .. }) | (Interaction { connector, .. }, Connector(x)) => x == connector,
        (Interaction { .. }, Interaction { .. }) => a == b,
    }
}

/// Transitive closure of the declared priority pairs, chaining through
/// selectors that can denote a common interaction. Errors with a readable cycle
/// when the relation is not a strict partial order.
pub(crate) fn priority_closure(pairs: &[PriorityPair]) -> Result<Vec<PriorityPair>, String> {
    let n = pairs.len();
    let next: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| compatible(&pairs[i].high, &pairs[j].low)).collect()).collect();
    let mut out = HashSet::new();
    for start in 0..n {
        let mut seen = vec![false; n];
        let mut parent = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            if compatible(&pairs[start].low, &pairs[i].high) {
                let mut chain = vec![i];
                let mut k = i;
                while k != start {
                    k = parent[k];
                    chain.push(k);
                }
                chain.reverse();
                let mut text = pairs[chain[0]].low.to_string();
                for k in chain {
                    text.push_str(&format!(" < {}", pairs[k].high));
                }
                return Err(text);
            }
            out.insert(PriorityPair { low: pairs[start].low.clone(), high: pairs[i].high.clone() });
            for &j in &next[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = i;
                    queue.push_back(j);
                }
            }
        }
    }
    let mut out: Vec<PriorityPair> = out.into_iter().collect();
    out.sort_by(|a, b| (&a.low, &a.high).cmp(&(&b.low, &b.high)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomicComponent, Connector, Transition};

    fn two_comp_system() -> System {
        let mut sys = System::default();
        for n in ["a", "b"] {
            let mut c = AtomicComponent::new(n, "l");
            c.add_port("p", &[]);
            c.add_port("q", &[]);
            c.add_transition(Transition::new("l", "p", "l"));
            c.add_transition(Transition::new("l", "q", "l"));
            sys.components.push(c);
        }
        sys.connectors.push(Connector::rendezvous("c1", &[("a", "p"), ("b", "p")]));
        sys.connectors.push(Connector::rendezvous("c2", &[("a", "q"), ("b", "q")]));
        sys
    }

    #[test]
    fn valid_system_has_no_diagnostics() {
        assert_eq!(validate_model(&two_comp_system()), vec![]);
    }

    #[test]
    fn priority_cycle_detected() {
        let mut sys = two_comp_system();
        sys.add_priority("c1", "c2");
        sys.add_priority("c2", "c1");
        let diags = validate_model(&sys);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::PriorityCycle);
    }

    #[test]
    fn reflexive_priority_detected() {
        let mut sys = two_comp_system();
        sys.add_priority("c1", "c1");
        assert_eq!(validate_model(&sys)[0].kind, DiagnosticKind::PriorityCycle);
    }

    #[test]
    fn fine_grained_priorities_within_one_connector() {
        let mut sys = two_comp_system();
        sys.connectors[0].ports[0].trigger = true;
        let sel = |s: &str| PrioritySelector::parse(s).unwrap();
        sys.priorities.push(PriorityPair { low: sel("c1:{a.p,b.p}"), high: sel("c1:{a.p}") });
        assert_eq!(validate_model(&sys), vec![]);
        sys.priorities.push(PriorityPair { low: sel("c1:{a.p}"), high: sel("c1:{a.p,b.p}") });
        assert_eq!(validate_model(&sys)[0].kind, DiagnosticKind::PriorityCycle);
    }

    #[test]
    fn one_port_per_component() {
        let mut sys = two_comp_system();
        sys.connectors.push(Connector::rendezvous("bad", &[("a", "p"), ("a", "q")]));
        let diags = validate_model(&sys);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::OnePortPerComponent);
        assert!(diags[0].message.contains("one port per component"));
    }

    #[test]
    fn type_errors_reported() {
        let mut sys = two_comp_system();
        sys.components[0].add_var("x", crate::model::Value::Int(0));
        sys.components[0].transitions[0].guard = crate::model::parse_expr("x + 1").unwrap();
        sys.components[0].transitions[1].actions = vec![crate::model::parse_assignment("x := true").unwrap()];
        let kinds: Vec<_> = validate_model(&sys).into_iter().map(|d| d.kind).collect();
        assert_eq!(kinds, vec![DiagnosticKind::TypeError, DiagnosticKind::TypeError]);
    }

    #[test]
    fn hierarchy_and_export() {
        let mut sys = two_comp_system();
        let mut inner = Connector::new("inner").with_port("a", "p", true);
        inner.export = Some("e".into());
        sys.connectors.push(inner);
        sys.connectors.push(Connector::new("outer").with_port("inner", "e", false).with_port("b", "q", false));
        assert_eq!(validate_model(&sys), vec![]);
        let tops: Vec<_> = sys.top_level_connectors().iter().map(|c| c.name.clone()).collect();
        assert_eq!(tops, ["c1", "c2", "outer"]);
        sys.connectors.push(Connector::new("wrong").with_port("inner", "zz", false));
        assert_eq!(validate_model(&sys)[0].kind, DiagnosticKind::UnresolvedReference);
    }

    #[test]
    fn closure_is_transitive() {
        let mut sys = two_comp_system();
        sys.connectors.push(Connector::rendezvous("c3", &[("a", "p")]));
        sys.add_priority("c1", "c2");
        sys.add_priority("c2", "c3");
        let closed = priority_closure(&sys.priorities).unwrap();
        assert_eq!(closed.len(), 3);
    }
}
