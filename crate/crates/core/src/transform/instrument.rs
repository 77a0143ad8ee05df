//! Selection of the transitions to instrument, their four-way split, and
//! backup injection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{fresh, TransformError};
use crate::model::validate::flatten_ports;
use crate::model::{Assignment, AtomicComponent, Expr, Path, System, Transition, Value};
use crate::property::MonitoredVars;

/// Marker stored in the shadow `port` variable before any port has fired.
pub const NULL_MARKER: &str = "null";

/// Which transitions get instrumented, and the connectors they touch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InstrumentationPlan {
    /// monitored variables per component (may include `loc` and `port`)
    pub monvars: BTreeMap<String, BTreeSet<String>>,
    pub occur: Vec<(String, String)>,
    /// transition indices per component picked directly from `monvars`
    pub selected: BTreeMap<String, BTreeSet<usize>>,
    /// `selected` closed under shared connectors
    pub rectrans: BTreeMap<String, BTreeSet<usize>>,
    /// components owning a member of `rectrans`, in system order
    pub reccomp: Vec<String>,
    /// top-level connectors touching `rectrans`, in system order; the
    /// position is the connector's index
    pub recinter: Vec<String>,
}

impl InstrumentationPlan {
    /// Builds the plan. With `optimize` off, every transition of a component
    /// with monitored variables is selected.
    pub fn new(sys: &System, mv: &MonitoredVars, optimize: bool) -> Result<Self, TransformError> {
        for (c, v) in &mv.occur {
            let comp = sys.component(c).ok_or_else(|| TransformError::UnknownMonitored(format!("{c}.{v}")))?;
            if v != "loc" && v != "port" && comp.variable(v).is_none() {
                return Err(TransformError::UnknownMonitored(format!("{c}.{v}")));
            }
        }
        let mut plan = InstrumentationPlan { occur: mv.occur.clone(), ..Default::default() };
        for comp in &sys.components {
            let Some(vars) = mv.of(&comp.name) else { continue };
            plan.monvars.insert(comp.name.clone(), vars.clone());
            let sel = if optimize { select_transitions(comp, vars) } else { (0..comp.transitions.len()).collect() };
            if !sel.is_empty() {
                plan.selected.insert(comp.name.clone(), sel);
            }
        }
        plan.rectrans = closure(sys, &plan.selected);
        plan.reccomp =
            sys.components.iter().filter(|c| plan.rectrans.contains_key(&c.name)).map(|c| c.name.clone()).collect();
        plan.recinter = sys
            .top_level_connectors()
            .into_iter()
            .filter(|conn| {
                let mut ports = Vec::new();
                flatten_ports(sys, conn, &mut ports);
                ports.iter().any(|p| touches(sys, &plan.rectrans, &p.owner, &p.port))
            })
            .map(|c| c.name.clone())
            .collect();
        Ok(plan)
    }

    pub fn index(&self, connector: &str) -> Option<usize> {
        self.recinter.iter().position(|c| c == connector)
    }

    pub fn monvars_of(&self, comp: &str) -> Option<&BTreeSet<String>> {
        self.monvars.get(comp)
    }
}

fn touches(sys: &System, set: &BTreeMap<String, BTreeSet<usize>>, comp: &str, port: &str) -> bool {
    let (Some(c), Some(ts)) = (sys.component(comp), set.get(comp)) else { return false };
    ts.iter().any(|&i| c.transitions[i].port == port)
}

/// Transitions that may modify a monitored variable: all of them when the
/// location or last port is monitored, otherwise those assigning a monitored
/// variable or firing on a port that carries one.
pub fn select_transitions(b: &AtomicComponent, monvars: &BTreeSet<String>) -> BTreeSet<usize> {
    if monvars.contains("loc") || monvars.contains("port") {
        return (0..b.transitions.len()).collect();
    }
    b.transitions
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let port_vars = b.port(&t.port).map(|p| p.vars.as_slice()).unwrap_or_default();
            t.assigned_vars().into_iter().chain(port_vars.iter().map(String::as_str)).any(|v| monvars.contains(v))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Adds every transition whose port shares a connector with the port of a
/// member, until nothing changes.
pub fn closure(sys: &System, selected: &BTreeMap<String, BTreeSet<usize>>) -> BTreeMap<String, BTreeSet<usize>> {
    let groups: Vec<Vec<(String, String)>> = sys
        .connectors
        .iter()
        .map(|c| {
            let mut ports = Vec::new();
            flatten_ports(sys, c, &mut ports);
            ports.into_iter().map(|p| (p.owner, p.port)).collect()
        })
        .collect();
    let mut rec = selected.clone();
    loop {
        let mut changed = false;
        for g in &groups {
            if !g.iter().any(|(c, p)| touches(sys, &rec, c, p)) {
                continue;
            }
            for (c, p) in g {
                let comp = sys.component(c).expect("validated port reference");
                for (i, t) in comp.transitions.iter().enumerate() {
                    if t.port == *p && rec.entry(c.clone()).or_default().insert(i) {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return rec;
        }
    }
}

/// Variables a recovery of `t` must restore: those attached to its port and
/// those its update assigns.
pub fn recvars(b: &AtomicComponent, t: &Transition) -> Vec<String> {
    let mut out: Vec<String> = b.port(&t.port).map(|p| p.vars.clone()).unwrap_or_default();
    for v in t.assigned_vars() {
        if !out.iter().any(|x| x == v) {
            out.push(v.to_string());
        }
    }
    out
}

pub(crate) fn assign(target: &str, value: Expr) -> Assignment {
    Assignment { target: Path::local(target), index: None, value }
}

pub(crate) fn var(name: &str) -> Expr {
    Expr::Var(Path::local(name))
}

/// Fresh names chosen for one instrumented component.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub pm: String,
    pub pc: String,
    pub pr: String,
    /// location added for the initial synchronization with the monitor
    pub init0: Option<String>,
    /// shadow variable holding the current location name, if monitored
    pub loc_var: Option<String>,
    /// shadow variable holding the last port name, if monitored
    pub port_var: Option<String>,
    /// original variable -> its temporary copy
    pub tmp: BTreeMap<String, String>,
    pub splits: Vec<SplitInfo>,
}

/// One instrumented transition `from -port-> to`, now routed through `l_m` and `l_r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub from: String,
    pub port: String,
    pub to: String,
    pub l_m: String,
    pub l_r: String,
    pub recvars: Vec<String>,
}

impl ComponentInfo {
    /// The split owning an intermediate location.
    pub fn split_at(&self, loc: &str) -> Option<&SplitInfo> {
        self.splits.iter().find(|s| s.l_m == loc || s.l_r == loc)
    }

    /// Name under which a monitored field is carried on `pm`.
    pub fn carried(&self, field: &str) -> String {
        match field {
            "loc" => self.loc_var.clone().expect("loc is monitored"),
            "port" => self.port_var.clone().expect("port is monitored"),
            v => v.to_string(),
        }
    }
}

/// The four transitions replacing one instrumented transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub init: Transition,
    pub monitor: Transition,
    pub cont: Transition,
    pub recover: Transition,
}

/// Splits `t` through `l_m` and `l_r`: the original step now ends in `l_m`
/// (recording the location/port if shadowed), `pm` moves to `l_r`, then `pc`
/// completes to the original target while `pr` restores `recvars` and returns
/// to the source.
pub fn instrument_transition(t: &Transition, info: &ComponentInfo, recvars: &[String], l_m: &str, l_r: &str) -> Split {
    let mut f = t.actions.clone();
    if let Some(v) = &info.loc_var {
        f.push(assign(v, Expr::Lit(Value::str(&t.to))));
    }
    if let Some(v) = &info.port_var {
        f.push(assign(v, Expr::Lit(Value::str(&t.port))));
    }
    let restore = recvars.iter().map(|x| assign(x, var(&info.tmp[x]))).collect();
    Split {
        init: Transition { from: t.from.clone(), port: t.port.clone(), guard: t.guard.clone(), actions: f, to: l_m.into() },
        monitor: Transition::new(l_m, &info.pm, l_r),
        cont: Transition::new(l_r, &info.pc, &t.to),
        recover: Transition::new(l_r, &info.pr, &t.from).with_actions(restore),
    }
}

/// Instruments one component per the plan; `None` when it owns no member of
/// `rectrans` (the component is then left as is).
pub fn instrument_atomic(b: &AtomicComponent, plan: &InstrumentationPlan) -> Option<(AtomicComponent, ComponentInfo)> {
    let rec = plan.rectrans.get(&b.name)?;
    let monvars = plan.monvars_of(&b.name).cloned().unwrap_or_default();
    let mut out = b.clone();
    let mut var_names: BTreeSet<String> = b.variables.iter().map(|v| v.name.clone()).collect();
    let mut port_names: BTreeSet<String> = b.ports.iter().map(|p| p.name.clone()).collect();
    let mut loc_names: BTreeSet<String> = b.locations.iter().cloned().collect();

    let mut info = ComponentInfo {
        pm: fresh("pm", &mut port_names),
        pc: fresh("pc", &mut port_names),
        pr: fresh("pr", &mut port_names),
        ..Default::default()
    };
    if monvars.contains("loc") {
        let v = fresh("loc", &mut var_names);
        out.add_var(&v, Value::str(&b.initial));
        info.loc_var = Some(v);
    }
    if monvars.contains("port") {
        let v = fresh("port", &mut var_names);
        out.add_var(&v, Value::str(NULL_MARKER));
        info.port_var = Some(v);
    }
    let per_transition: BTreeMap<usize, Vec<String>> =
        rec.iter().map(|&i| (i, recvars(b, &b.transitions[i]))).collect();
    let all_rec: BTreeSet<&String> = per_transition.values().flatten().collect();
    for x in b.variables.iter().filter(|v| all_rec.contains(&v.name)) {
        let t = fresh(&format!("{}__tmp", x.name), &mut var_names);
        out.add_var(&t, x.init.clone());
        info.tmp.insert(x.name.clone(), t);
    }
    let carried: Vec<String> = monvars.iter().map(|v| info.carried(v)).collect();
    out.add_port(&info.pm, &carried.iter().map(String::as_str).collect::<Vec<_>>());
    out.add_port(&info.pc, &[]);
    out.add_port(&info.pr, &[]);

    out.transitions.clear();
    for (i, t) in b.transitions.iter().enumerate() {
        let Some(rv) = per_transition.get(&i) else {
            out.transitions.push(t.clone());
            continue;
        };
        let l_m = fresh(&format!("{}__m", t.to), &mut loc_names);
        let l_r = fresh(&format!("{}__r", t.to), &mut loc_names);
        out.add_location(&l_m);
        out.add_location(&l_r);
        let s = instrument_transition(t, &info, rv, &l_m, &l_r);
        out.transitions.extend([s.init, s.monitor, s.cont, s.recover]);
        info.splits.push(SplitInfo {
            from: t.from.clone(),
            port: t.port.clone(),
            to: t.to.clone(),
            l_m,
            l_r,
            recvars: rv.clone(),
        });
    }
    if !monvars.is_empty() {
        let init0 = fresh(&format!("{}__init0", b.initial), &mut loc_names);
        out.add_location(&init0);
        out.transitions.push(Transition::new(&init0, &info.pm, &b.initial));
        out.initial = init0.clone();
        info.init0 = Some(init0);
    }
    Some((out, info))
}

/// Appends `x__tmp := x` to every transition entering a location `l`, for each
/// `x` restored by an instrumented transition leaving `l`.
pub fn inject_backup(b: &AtomicComponent, info: &ComponentInfo) -> AtomicComponent {
    let mut backups: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for s in &info.splits {
        backups.entry(s.from.as_str()).or_default().extend(s.recvars.iter().map(String::as_str));
    }
    let mut out = b.clone();
    for t in &mut out.transitions {
        if let Some(vars) = backups.get(t.to.as_str()) {
            for x in vars {
                t.actions.push(assign(&info.tmp[*x], var(x)));
            }
        }
    }
    out
}
