//! Wiring instrumented components, the monitor and optionally the disabler
//! into one system.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::disabler::DisablerInfo;
use super::instrument::ComponentInfo;
use super::monitor::MonitorInfo;
use super::fresh;
use crate::model::{
    Assignment, AtomicComponent, Connector, ConnectorPort, Expr, Path, PortRef, PriorityPair, PrioritySelector, System,
};

/// Names of the connectors added around the monitor. `c1`/`r1` are absent
/// when no component is instrumented.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorConnectors {
    pub m: String,
    pub c1: Option<String>,
    pub c2: String,
    pub r1: Option<String>,
    pub r2: String,
}

impl MonitorConnectors {
    pub fn all(&self) -> Vec<&str> {
        let mut v = vec![self.m.as_str()];
        v.extend(self.c1.as_deref());
        v.push(&self.c2);
        v.extend(self.r1.as_deref());
        v.push(&self.r2);
        v
    }
}

/// Output of integration before validation.
pub struct Integrated {
    pub system: System,
    pub connectors: MonitorConnectors,
    pub warnings: Vec<String>,
}

/// Spin-recovery integration: a recovered interaction may be retried at once.
pub fn integrate_spin(
    original: &System,
    components: Vec<AtomicComponent>,
    infos: &[(String, ComponentInfo)],
    monitor: (AtomicComponent, &MonitorInfo),
) -> Integrated {
    integrate(original, components, infos, monitor, None)
}

/// Integration with a disabler, whose port joins every recoverable connector.
pub fn integrate_disabler(
    original: &System,
    components: Vec<AtomicComponent>,
    infos: &[(String, ComponentInfo)],
    monitor: (AtomicComponent, &MonitorInfo),
    disabler: (AtomicComponent, &DisablerInfo),
) -> Integrated {
    integrate(original, components, infos, monitor, Some(disabler))
}

fn integrate(
    original: &System,
    components: Vec<AtomicComponent>,
    infos: &[(String, ComponentInfo)],
    (e, minfo): (AtomicComponent, &MonitorInfo),
    disabler: Option<(AtomicComponent, &DisablerInfo)>,
) -> Integrated {
    let mut names: BTreeSet<String> = original.components.iter().map(|c| c.name.clone()).collect();
    names.extend(original.connectors.iter().map(|c| c.name.clone()));
    names.insert(e.name.clone());
    let mon = e.name.clone();
    let dinfo = disabler.as_ref().map(|(_, i)| (*i).clone());
    if let Some((d, _)) = &disabler {
        names.insert(d.name.clone());
    }
    let mut warnings = Vec::new();
    let mut sys = System { components, connectors: original.connectors.clone(), priorities: original.priorities.clone() };
    sys.components.push(e);
    if let Some((d, _)) = disabler {
        sys.components.push(d);
    }

    if let Some(d) = &dinfo {
        for conn in sys.connectors.iter_mut() {
            if let Some(p) = d.port_for(&conn.name) {
                conn.ports.push(ConnectorPort { port: PortRef::new(&d.name, p), trigger: false });
            }
        }
        for pair in sys.priorities.iter_mut() {
            for side in [&mut pair.low, &mut pair.high] {
                if let PrioritySelector::Interaction { connector, ports } = side {
                    if let Some(p) = d.port_for(connector) {
                        ports.insert(PortRef::new(&d.name, p));
                    }
                }
            }
        }
    }

    let m = fresh(&format!("{mon}_m"), &mut names);
    let mut gm = Connector::new(&m);
    for (comp, info) in infos {
        gm.ports.push(ConnectorPort { port: PortRef::new(comp, &info.pm), trigger: true });
    }
    gm.ports.push(ConnectorPort { port: PortRef::new(&mon, &minfo.pm), trigger: false });
    gm.requires.push(PortRef::new(&mon, &minfo.pm));
    for c in &minfo.copies {
        let Some((_, info)) = infos.iter().find(|(n, _)| *n == c.comp) else { continue };
        gm.transfer.push(Assignment {
            target: Path::qualified(&[&mon, &minfo.pm, &c.copy]),
            index: None,
            value: Expr::Var(Path::qualified(&[&c.comp, &info.pm, &info.carried(&c.field)])),
        });
    }

    let decision = |names: &mut BTreeSet<String>, tag: &str, pick: fn(&ComponentInfo) -> &String, mport: &str, dport: Option<&str>| {
        let top = fresh(&format!("{mon}_{tag}2"), names);
        let mut top_conn = Connector::new(&top);
        let mut sub = None;
        if !infos.is_empty() {
            let name = fresh(&format!("{mon}_{tag}1"), names);
            let mut c = Connector::new(&name);
            for (comp, info) in infos {
                c.ports.push(ConnectorPort { port: PortRef::new(comp, pick(info)), trigger: true });
            }
            c.export = Some(format!("p{tag}"));
            top_conn.ports.push(ConnectorPort { port: PortRef::new(&name, &format!("p{tag}")), trigger: false });
            sub = Some(c);
        }
        top_conn.ports.push(ConnectorPort { port: PortRef::new(&mon, mport), trigger: false });
        if let (Some(d), Some(p)) = (&dinfo, dport) {
            top_conn.ports.push(ConnectorPort { port: PortRef::new(&d.name, p), trigger: false });
        }
        (sub, top_conn)
    };
    let (c1, mut c2) = decision(&mut names, "c", |i| &i.pc, &minfo.pc, dinfo.as_ref().map(|d| d.pc.as_str()));
    let (r1, mut r2) = decision(&mut names, "r", |i| &i.pr, &minfo.pr, dinfo.as_ref().map(|d| d.pr.as_str()));
    if infos.is_empty() {
        warnings.push("no transition is instrumented; the monitor is wired but inert".to_string());
        gm.guard = Expr::ff();
        c2.guard = Expr::ff();
        r2.guard = Expr::ff();
    }
    let connectors = MonitorConnectors {
        m: gm.name.clone(),
        c1: c1.as_ref().map(|c| c.name.clone()),
        c2: c2.name.clone(),
        r1: r1.as_ref().map(|c| c.name.clone()),
        r2: r2.name.clone(),
    };

    // monitor connectors rank above every original interaction
    let originals: Vec<String> = original.top_level_connectors().iter().map(|c| c.name.clone()).collect();
    for o in &originals {
        for h in [&connectors.m, &connectors.c2, &connectors.r2] {
            sys.priorities.push(PriorityPair {
                low: PrioritySelector::Connector(o.clone()),
                high: PrioritySelector::Connector(h.clone()),
            });
        }
    }
    sys.connectors.push(gm);
    sys.connectors.extend(c1);
    sys.connectors.push(c2);
    sys.connectors.extend(r1);
    sys.connectors.push(r2);
    Integrated { system: sys, connectors, warnings }
}
