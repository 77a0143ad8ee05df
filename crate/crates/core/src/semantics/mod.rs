//! Operational semantics: configurations, prioritized enabled interactions,
//! stepping, simulation and bounded exploration.
//!
//! A [`System`] is compiled once into an [`Engine`] that resolves every name to
//! an index; configurations then hold plain vectors.

mod explore;
mod sim;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::model::{
    validate_model, BinOp, Connector, Env, EvalError, Expr, ModelError, Path, PrioritySelector, System, Value,
};

pub use explore::{explore, traces, ReachGraph};
pub use sim::{config_json, simulate, trace_record, Run, Scheduler, SchedulerPolicy, Terminal};

/// Local configuration of one atomic component: location, valuation, last port.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalConfig {
    pub loc: u32,
    pub last_port: Option<u32>,
    pub vals: Vec<Value>,
}

/// Global configuration, one local configuration per component in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalConfig {
    pub locals: Vec<LocalConfig>,
}

/// A component port by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GPort {
    pub comp: u32,
    pub port: u32,
}

/// A component variable by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarRef {
    pub comp: u32,
    pub slot: u32,
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}.{}", self.comp, self.slot)
    }
}

/// Reference used by state formulas: a variable, a location, or the last port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateRef {
    Var(VarRef),
    Loc(u32),
    Port(u32),
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRef::Var(v) => write!(f, "{v}"),
            StateRef::Loc(c) => write!(f, "#{c}.loc"),
            StateRef::Port(c) => write!(f, "#{c}.port"),
        }
    }
}

/// Value shown for the last port of a component that has not moved yet.
pub const NULL_PORT: &str = "null";

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("evaluating {context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },
    #[error("interaction {0} is not enabled")]
    NotEnabled(String),
    #[error("unknown reference `{0}`")]
    Unresolved(String),
    #[error("connector {connector} has {ports} enabled ports and a data guard; too many subsets to enumerate")]
    TooWide { connector: String, ports: usize },
    #[error("scheduler script step {step}: no enabled interaction matches {{{wanted}}}; enabled: {enabled}")]
    Script { step: usize, wanted: String, enabled: String },
}

#[derive(Clone, Debug)]
struct CAssign<R> {
    target: R,
    index: Option<Expr<R>>,
    value: Expr<R>,
}

#[derive(Clone, Debug)]
struct CTransition {
    port: u32,
    guard: Expr<u32>,
    actions: Vec<CAssign<u32>>,
    to: u32,
}

#[derive(Clone, Debug)]
struct CComponent {
    name: Arc<str>,
    vars: Vec<Arc<str>>,
    init: Vec<Value>,
    locs: Vec<Arc<str>>,
    ports: Vec<Arc<str>>,
    initial: u32,
    transitions: Vec<CTransition>,
    /// transitions leaving each location
    by_loc: Vec<Vec<u32>>,
}

#[derive(Clone, Debug)]
enum CPort {
    Comp(GPort),
    Child(usize),
}

#[derive(Clone, Debug)]
struct CConnector {
    name: Arc<str>,
    ports: Vec<CPort>,
    triggers: Vec<bool>,
    requires: FixedBitSet,
    /// top-level conjuncts with the mask of direct ports they read
    guard: Vec<(Expr<VarRef>, FixedBitSet)>,
    transfer: Vec<(CAssign<VarRef>, FixedBitSet)>,
    top: bool,
}

#[derive(Clone, Debug)]
enum CSelector {
    Conn(usize),
    Exact(usize, Vec<GPort>),
}

/// An interaction instance: a feasible port set of a top-level connector
/// together with the transition each involved component takes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub connector: usize,
    /// ports sorted by component index
    pub ports: Vec<GPort>,
    /// transition index for each entry of `ports`
    pub transitions: Vec<u32>,
    /// connectors involved in the hierarchy with their own flattened port sets
    involved: Vec<(usize, Vec<GPort>)>,
    /// (connector, transfer index) pairs that execute
    transfers: Vec<(usize, usize)>,
}

impl Interaction {
    pub fn contains(&self, p: GPort) -> bool {
        self.ports.binary_search(&p).is_ok()
    }

    pub fn involves_connector(&self, c: usize) -> bool {
        self.involved.iter().any(|(k, _)| *k == c)
    }
}

#[derive(Clone, Debug)]
struct Partial {
    ports: Vec<GPort>,
    involved: Vec<(usize, Vec<GPort>)>,
    transfers: Vec<(usize, usize)>,
}

/// Compiled system.
#[derive(Clone, Debug)]
pub struct Engine {
    system: System,
    comps: Vec<CComponent>,
    comp_index: HashMap<String, u32>,
    conns: Vec<CConnector>,
    conn_index: HashMap<String, usize>,
    /// declared priorities closed transitively, connector granularity
    conn_prec: Vec<Vec<bool>>,
    /// closed pairs with at least one interaction-granular side
    exact_prec: Vec<(CSelector, CSelector)>,
    /// top connectors named by an interaction-granular priority
    exact_mentions: Vec<bool>,
}

struct Slots<'a>(&'a [Value]);

impl Env<u32> for Slots<'_> {
    fn lookup(&self, r: &u32) -> Result<Value, EvalError> {
        self.0.get(*r as usize).cloned().ok_or_else(|| EvalError::Unbound(format!("#{r}")))
    }
}

impl Env<VarRef> for GlobalConfig {
    fn lookup(&self, r: &VarRef) -> Result<Value, EvalError> {
        self.locals
            .get(r.comp as usize)
            .and_then(|l| l.vals.get(r.slot as usize))
            .cloned()
            .ok_or_else(|| EvalError::Unbound(r.to_string()))
    }
}

/// Evaluation environment for state formulas over a global configuration.
pub struct StateEnv<'a> {
    pub engine: &'a Engine,
    pub config: &'a GlobalConfig,
}

impl Env<StateRef> for StateEnv<'_> {
    fn lookup(&self, r: &StateRef) -> Result<Value, EvalError> {
        match r {
            StateRef::Var(v) => self.config.lookup(v),
            StateRef::Loc(c) => {
                let l = &self.config.locals[*c as usize];
                Ok(Value::Str(self.engine.comps[*c as usize].locs[l.loc as usize].clone()))
            }
            StateRef::Port(c) => {
                let l = &self.config.locals[*c as usize];
                Ok(match l.last_port {
                    Some(p) => Value::Str(self.engine.comps[*c as usize].ports[p as usize].clone()),
                    None => Value::str(NULL_PORT),
                })
            }
        }
    }
}

fn eval_bool<R: fmt::Display>(e: &Expr<R>, env: &impl Env<R>, context: impl FnOnce() -> String) -> Result<bool, SemanticsError> {
    match e.eval(env) {
        Ok(Value::Bool(b)) => Ok(b),
        Ok(v) => Err(SemanticsError::Eval {
            context: context(),
            source: EvalError::Type { op: "guard".into(), detail: format!("expected bool, found {}", v.ty()) },
        }),
        Err(source) => Err(SemanticsError::Eval { context: context(), source }),
    }
}

fn assign(slot: &mut Value, index: Option<Value>, value: Value) -> Result<(), EvalError> {
    match index {
        None => {
            *slot = value;
            Ok(())
        }
        Some(i) => {
            let (Value::BoolVec(v), Value::Int(i), Value::Bool(b)) = (&mut *slot, &i, &value) else {
                return Err(EvalError::Type { op: "[]:=".into(), detail: "indexed assignment needs bool[] target".into() });
            };
            let len = v.len();
            let cell = usize::try_from(*i).ok().and_then(|u| v.get_mut(u)).ok_or(EvalError::IndexOutOfRange { index: *i, len })?;
            *cell = *b;
            Ok(())
        }
    }
}

impl Engine {
    /// Validates and compiles a system.
    pub fn new(system: System) -> Result<Self, ModelError> {
        let diags = validate_model(&system);
        if !diags.is_empty() {
            return Err(ModelError::Invalid(diags));
        }
        Ok(Self::compile(system))
    }

    fn compile(system: System) -> Self {
        let comp_index: HashMap<String, u32> =
            system.components.iter().enumerate().map(|(i, c)| (c.name.clone(), i as u32)).collect();
        let mut comps = Vec::new();
        for c in &system.components {
            let var_ix: HashMap<&str, u32> = c.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i as u32)).collect();
            let loc_ix: HashMap<&str, u32> = c.locations.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
            let port_ix: HashMap<&str, u32> = c.ports.iter().enumerate().map(|(i, p)| (p.name.as_str(), i as u32)).collect();
            let local = |p: &Path| var_ix[p.segments()[0].as_str()];
            let mut by_loc = vec![Vec::new(); c.locations.len()];
            let transitions = c
                .transitions
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    by_loc[loc_ix[t.from.as_str()] as usize].push(i as u32);
                    CTransition {
                        port: port_ix[t.port.as_str()],
                        guard: t.guard.map_refs(&mut |p| local(p)),
                        actions: t
                            .actions
                            .iter()
                            .map(|a| CAssign {
                                target: local(&a.target),
                                index: a.index.as_ref().map(|i| i.map_refs(&mut |p| local(p))),
                                value: a.value.map_refs(&mut |p| local(p)),
                            })
                            .collect(),
                        to: loc_ix[t.to.as_str()],
                    }
                })
                .collect();
            comps.push(CComponent {
                name: Arc::from(c.name.as_str()),
                vars: c.variables.iter().map(|v| Arc::from(v.name.as_str())).collect(),
                init: c.variables.iter().map(|v| v.init.clone()).collect(),
                locs: c.locations.iter().map(|l| Arc::from(l.as_str())).collect(),
                ports: c.ports.iter().map(|p| Arc::from(p.name.as_str())).collect(),
                initial: loc_ix[c.initial.as_str()],
                transitions,
                by_loc,
            });
        }
        let conn_index: HashMap<String, usize> =
            system.connectors.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        let tops: Vec<String> = system.top_level_connectors().iter().map(|c| c.name.clone()).collect();
        let conns = system
            .connectors
            .iter()
            .map(|c| Self::compile_connector(&system, c, &comp_index, &conn_index, tops.contains(&c.name)))
            .collect::<Vec<_>>();

        let n = conns.len();
        let mut conn_prec = vec![vec![false; n]; n];
        let mut exact_prec = Vec::new();
        let mut exact_mentions = vec![false; n];
        let closed = crate::model::validate::priority_closure(&system.priorities).unwrap_or_default();
        let compile_sel = |s: &PrioritySelector| match s {
            PrioritySelector::Connector(c) => CSelector::Conn(conn_index[c]),
            PrioritySelector::Interaction { connector, ports } => {
                let mut gp: Vec<GPort> = ports
                    .iter()
                    .map(|p| {
                        let comp = comp_index[&p.owner];
                        let port = system.components[comp as usize].ports.iter().position(|q| q.name == p.port).unwrap() as u32;
                        GPort { comp, port }
                    })
                    .collect();
                gp.sort();
                CSelector::Exact(conn_index[connector], gp)
            }
        };
        for pair in &closed {
            match (compile_sel(&pair.low), compile_sel(&pair.high)) {
                (CSelector::Conn(a), CSelector::Conn(b)) => conn_prec[a][b] = true,
                (lo, hi) => {
                    for s in [&lo, &hi] {
                        if let CSelector::Exact(c, _) = s {
                            exact_mentions[*c] = true;
                        }
                    }
                    exact_prec.push((lo, hi));
                }
            }
        }
        // an exact selector on a child connector disables shortcuts of its tops
        let mut mention_tops = vec![false; n];
        for (i, c) in conns.iter().enumerate() {
            if c.top {
                let mut stack = vec![i];
                while let Some(k) = stack.pop() {
                    if exact_mentions[k] {
                        mention_tops[i] = true;
                    }
                    for p in &conns[k].ports {
                        if let CPort::Child(ch) = p {
                            stack.push(*ch);
                        }
                    }
                }
            }
        }
        Engine { system, comps, comp_index, conns, conn_index, conn_prec, exact_prec, exact_mentions: mention_tops }
    }

    fn compile_connector(
        sys: &System,
        c: &Connector,
        comp_index: &HashMap<String, u32>,
        conn_index: &HashMap<String, usize>,
        top: bool,
    ) -> CConnector {
        let ports: Vec<CPort> = c
            .ports
            .iter()
            .map(|p| match comp_index.get(&p.port.owner) {
                Some(&comp) => {
                    let port = sys.components[comp as usize].ports.iter().position(|q| q.name == p.port.port).unwrap() as u32;
                    CPort::Comp(GPort { comp, port })
                }
                None => CPort::Child(conn_index[&p.port.owner]),
            })
            .collect();
        let width = c.ports.len();
        let bit_of = |path: &Path| -> usize {
            let [comp, port, _] = path.segments() else { unreachable!("validated connector reference") };
            c.ports.iter().position(|p| &p.port.owner == comp && &p.port.port == port).unwrap()
        };
        let resolve = |path: &Path| -> VarRef {
            let [comp, _, var] = path.segments() else { unreachable!("validated connector reference") };
            let ci = comp_index[comp];
            let slot = sys.components[ci as usize].variables.iter().position(|v| &v.name == var).unwrap() as u32;
            VarRef { comp: ci, slot }
        };
        let mask = |e: &Expr| {
            let mut m = FixedBitSet::with_capacity(width);
            m.extend(e.refs().into_iter().map(bit_of));
            m
        };
        let guard = c
            .guard
            .conjuncts()
            .into_iter()
            .filter(|e| !e.is_true_literal())
            .map(|e| (e.map_refs(&mut |p| resolve(p)), mask(e)))
            .collect();
        let transfer = c
            .transfer
            .iter()
            .map(|a| {
                let mut m = mask(&a.value);
                m.insert(bit_of(&a.target));
                if let Some(i) = &a.index {
                    m.union_with(&mask(i));
                }
                let ca = CAssign {
                    target: resolve(&a.target),
                    index: a.index.as_ref().map(|i| i.map_refs(&mut |p| resolve(p))),
                    value: a.value.map_refs(&mut |p| resolve(p)),
                };
                (ca, m)
            })
            .collect();
        let mut requires = FixedBitSet::with_capacity(width);
        requires.extend(c.requires.iter().map(|r| c.ports.iter().position(|p| &p.port == r).unwrap()));
        CConnector {
            name: Arc::from(c.name.as_str()),
            ports,
            triggers: c.ports.iter().map(|p| p.trigger).collect(),
            requires,
            guard,
            transfer,
            top,
        }
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn num_components(&self) -> usize {
        self.comps.len()
    }

    pub fn component_index(&self, name: &str) -> Option<u32> {
        self.comp_index.get(name).copied()
    }

    pub fn connector_index(&self, name: &str) -> Option<usize> {
        self.conn_index.get(name).copied()
    }

    pub fn component_name(&self, c: u32) -> &str {
        &self.comps[c as usize].name
    }

    pub fn connector_name(&self, c: usize) -> &str {
        &self.conns[c].name
    }

    pub fn location_name(&self, c: u32, l: u32) -> &str {
        &self.comps[c as usize].locs[l as usize]
    }

    pub fn location_index(&self, c: u32, name: &str) -> Option<u32> {
        self.comps[c as usize].locs.iter().position(|l| &**l == name).map(|i| i as u32)
    }

    pub fn port_name(&self, p: GPort) -> &str {
        &self.comps[p.comp as usize].ports[p.port as usize]
    }

    pub fn port(&self, comp: &str, port: &str) -> Option<GPort> {
        let c = self.component_index(comp)?;
        let p = self.comps[c as usize].ports.iter().position(|q| &**q == port)? as u32;
        Some(GPort { comp: c, port: p })
    }

    pub fn var_names(&self, c: u32) -> &[Arc<str>] {
        &self.comps[c as usize].vars
    }

    pub fn var_slot(&self, c: u32, name: &str) -> Option<u32> {
        self.comps[c as usize].vars.iter().position(|v| &**v == name).map(|i| i as u32)
    }

    /// Destination location of a transition.
    pub fn transition_target(&self, c: u32, t: u32) -> u32 {
        self.comps[c as usize].transitions[t as usize].to
    }

    /// Resolves a qualified state reference: `comp.var`, `comp.loc`, `comp.port`.
    /// A component variable named `loc` or `port` shadows the built-in.
    pub fn resolve_state_ref(&self, path: &Path) -> Result<StateRef, SemanticsError> {
        let [comp, field] = path.segments() else {
            return Err(SemanticsError::Unresolved(path.to_string()));
        };
        let c = self.component_index(comp).ok_or_else(|| SemanticsError::Unresolved(path.to_string()))?;
        if let Some(slot) = self.var_slot(c, field) {
            return Ok(StateRef::Var(VarRef { comp: c, slot }));
        }
        match field.as_str() {
            "loc" => Ok(StateRef::Loc(c)),
            "port" => Ok(StateRef::Port(c)),
            _ => Err(SemanticsError::Unresolved(path.to_string())),
        }
    }

    pub fn compile_state_expr(&self, e: &Expr) -> Result<Expr<StateRef>, SemanticsError> {
        e.try_map_refs(&mut |p| self.resolve_state_ref(p))
    }

    pub fn eval_state(&self, e: &Expr<StateRef>, q: &GlobalConfig) -> Result<Value, EvalError> {
        e.eval(&StateEnv { engine: self, config: q })
    }

    /// The initial configuration.
    pub fn initial(&self) -> GlobalConfig {
        GlobalConfig {
            locals: self
                .comps
                .iter()
                .map(|c| LocalConfig { loc: c.initial, last_port: None, vals: c.init.clone() })
                .collect(),
        }
    }

    /// Canonical text of an interaction: `comp.port` items in component order.
    pub fn interaction_label(&self, a: &Interaction) -> String {
        self.port_names(a).join(",")
    }

    pub fn port_names(&self, a: &Interaction) -> Vec<String> {
        a.ports.iter().map(|p| format!("{}.{}", self.component_name(p.comp), self.port_name(*p))).collect()
    }

    /// Per-port list of transitions enabled in `q` (guard true at the current valuation).
    fn enabled_transitions(&self, q: &GlobalConfig) -> Result<HashMap<GPort, Vec<u32>>, SemanticsError> {
        let mut out: HashMap<GPort, Vec<u32>> = HashMap::new();
        for (ci, comp) in self.comps.iter().enumerate() {
            let local = &q.locals[ci];
            for &ti in &comp.by_loc[local.loc as usize] {
                let t = &comp.transitions[ti as usize];
                let ok = eval_bool(&t.guard, &Slots(&local.vals), || {
                    format!("guard of {}.{} transition {ti}", comp.name, comp.ports[t.port as usize])
                })?;
                if ok {
                    out.entry(GPort { comp: ci as u32, port: t.port }).or_default().push(ti);
                }
            }
        }
        Ok(out)
    }

    fn guard_holds(&self, c: usize, mask: &FixedBitSet, q: &GlobalConfig) -> Result<bool, SemanticsError> {
        let conn = &self.conns[c];
        for (g, m) in &conn.guard {
            if m.is_subset(mask) && !eval_bool(g, q, || format!("guard of connector {}", conn.name))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn is_trivial(&self, c: usize) -> bool {
        let conn = &self.conns[c];
        conn.guard.is_empty()
            && conn.ports.iter().all(|p| match p {
                CPort::Comp(_) => true,
                CPort::Child(k) => self.is_trivial(*k),
            })
    }

    /// Feasible, port-enabled, guard-satisfying interactions of connector `c`.
    fn candidates(
        &self,
        c: usize,
        en: &HashMap<GPort, Vec<u32>>,
        q: &GlobalConfig,
        shortcut: bool,
    ) -> Result<Vec<Partial>, SemanticsError> {
        let conn = &self.conns[c];
        let n = conn.ports.len();
        let mut avail: Vec<Option<Vec<Partial>>> = Vec::with_capacity(n);
        for p in &conn.ports {
            avail.push(match p {
                CPort::Comp(g) => en.contains_key(g).then(|| {
                    vec![Partial { ports: vec![*g], involved: Vec::new(), transfers: Vec::new() }]
                }),
                CPort::Child(k) => {
                    let sub = self.candidates(*k, en, q, shortcut)?;
                    (!sub.is_empty()).then_some(sub)
                }
            });
        }
        let mut avail_mask = FixedBitSet::with_capacity(n);
        avail_mask.extend((0..n).filter(|&i| avail[i].is_some()));
        let make = |mask: &FixedBitSet, choice: &[usize]| -> Partial {
            let mut ports = Vec::new();
            let mut involved = Vec::new();
            let mut transfers = Vec::new();
            let mut k = 0;
            for i in 0..n {
                if !mask.contains(i) {
                    continue;
                }
                let part = &avail[i].as_ref().unwrap()[choice[k]];
                k += 1;
                ports.extend_from_slice(&part.ports);
                involved.extend(part.involved.iter().cloned());
                transfers.extend_from_slice(&part.transfers);
            }
            for (ti, (_, m)) in conn.transfer.iter().enumerate() {
                if m.is_subset(mask) {
                    transfers.push((c, ti));
                }
            }
            ports.sort();
            involved.push((c, ports.clone()));
            Partial { ports, involved, transfers }
        };
        let feasible = |mask: &FixedBitSet| {
            let k = mask.count_ones(..);
            k > 0 && (k == n || mask.ones().any(|i| conn.triggers[i])) && conn.requires.is_subset(mask)
        };
        let mut out = Vec::new();
        if shortcut && conn.guard.is_empty() {
            if feasible(&avail_mask) {
                let k = avail_mask.count_ones(..);
                out.push(make(&avail_mask, &vec![0; k]));
            }
            return Ok(out);
        }
        // enumerate subsets of available ports
        let idx: Vec<usize> = avail_mask.ones().collect();
        if idx.len() >= 64 {
            return Err(SemanticsError::TooWide { connector: conn.name.to_string(), ports: idx.len() });
        }
        for sub in 1u64..(1u64 << idx.len()) {
            let mut mask = FixedBitSet::with_capacity(n);
            mask.extend(idx.iter().enumerate().filter(|(j, _)| sub & (1 << j) != 0).map(|(_, &i)| i));
            if !feasible(&mask) || !self.guard_holds(c, &mask, q)? {
                continue;
            }
            let sizes: Vec<usize> = mask.ones().map(|i| avail[i].as_ref().unwrap().len()).collect();
            let mut choice = vec![0usize; sizes.len()];
            loop {
                out.push(make(&mask, &choice));
                let mut j = 0;
                while j < choice.len() {
                    choice[j] += 1;
                    if choice[j] < sizes[j] {
                        break;
                    }
                    choice[j] = 0;
                    j += 1;
                }
                if j == choice.len() {
                    break;
                }
            }
        }
        Ok(out)
    }

    fn selector_matches(&self, s: &CSelector, involved: &[(usize, Vec<GPort>)]) -> bool {
        match s {
            CSelector::Conn(c) => involved.iter().any(|(k, _)| k == c),
            CSelector::Exact(c, ports) => involved.iter().any(|(k, p)| k == c && p == ports),
        }
    }

    /// Declared (transitively closed) priority: `a ≺ b`.
    fn declared_below(&self, a: &[(usize, Vec<GPort>)], b: &[(usize, Vec<GPort>)]) -> bool {
        for (x, _) in a {
            for (y, _) in b {
                if self.conn_prec[*x][*y] {
                    return true;
                }
            }
        }
        self.exact_prec.iter().any(|(lo, hi)| self.selector_matches(lo, a) && self.selector_matches(hi, b))
    }

    /// Interactions enabled in `q` under priorities and maximal progress, in
    /// canonical order (connector declaration order, then ports, then transitions).
    pub fn enabled_interactions(&self, q: &GlobalConfig) -> Result<Vec<Interaction>, SemanticsError> {
        let en = self.enabled_transitions(q)?;
        // (top connector, partial)
        let mut cands: Vec<(usize, Partial)> = Vec::new();
        for (c, conn) in self.conns.iter().enumerate() {
            if !conn.top {
                continue;
            }
            let shortcut = !self.exact_mentions[c] && self.is_trivial(c);
            for p in self.candidates(c, &en, q, shortcut)? {
                cands.push((c, p));
            }
        }
        let mut keep = vec![true; cands.len()];
        for i in 0..cands.len() {
            for j in 0..cands.len() {
                if i == j {
                    continue;
                }
                let (ci, a) = &cands[i];
                let (cj, b) = &cands[j];
                let mp = ci == cj
                    && a.ports.len() < b.ports.len()
                    && a.ports.iter().all(|p| b.ports.binary_search(p).is_ok())
                    && !self.declared_below(&b.involved, &a.involved);
                if mp || self.declared_below(&a.involved, &b.involved) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut out = Vec::new();
        for ((c, p), k) in cands.into_iter().zip(keep) {
            if !k {
                continue;
            }
            let lists: Vec<&Vec<u32>> = p.ports.iter().map(|g| &en[g]).collect();
            let mut choice = vec![0usize; lists.len()];
            loop {
                out.push(Interaction {
                    connector: c,
                    ports: p.ports.clone(),
                    transitions: choice.iter().zip(&lists).map(|(&i, l)| l[i]).collect(),
                    involved: p.involved.clone(),
                    transfers: p.transfers.clone(),
                });
                let mut j = 0;
                while j < choice.len() {
                    choice[j] += 1;
                    if choice[j] < lists[j].len() {
                        break;
                    }
                    choice[j] = 0;
                    j += 1;
                }
                if j == choice.len() {
                    break;
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Fires `a` from `q` without checking that it is enabled.
    pub fn fire(&self, q: &GlobalConfig, a: &Interaction) -> Result<GlobalConfig, SemanticsError> {
        let mut next = q.clone();
        // transfer: read every operand before writing
        let mut writes = Vec::with_capacity(a.transfers.len());
        for &(c, ti) in &a.transfers {
            let (asg, _) = &self.conns[c].transfer[ti];
            let ctx = || format!("transfer of connector {}", self.conns[c].name);
            let value = asg.value.eval(q).map_err(|source| SemanticsError::Eval { context: ctx(), source })?;
            let index = match &asg.index {
                Some(i) => Some(i.eval(q).map_err(|source| SemanticsError::Eval { context: ctx(), source })?),
                None => None,
            };
            writes.push((asg.target, index, value, c));
        }
        for (target, index, value, c) in writes {
            let slot = &mut next.locals[target.comp as usize].vals[target.slot as usize];
            assign(slot, index, value).map_err(|source| SemanticsError::Eval {
                context: format!("transfer of connector {}", self.conns[c].name),
                source,
            })?;
        }
        for (g, &ti) in a.ports.iter().zip(&a.transitions) {
            let comp = &self.comps[g.comp as usize];
            let t = &comp.transitions[ti as usize];
            let local = &mut next.locals[g.comp as usize];
            for asg in &t.actions {
                let ctx = || format!("update of {}.{} transition {ti}", comp.name, comp.ports[t.port as usize]);
                let value =
                    asg.value.eval(&Slots(&local.vals)).map_err(|source| SemanticsError::Eval { context: ctx(), source })?;
                let index = match &asg.index {
                    Some(i) => {
                        Some(i.eval(&Slots(&local.vals)).map_err(|source| SemanticsError::Eval { context: ctx(), source })?)
                    }
                    None => None,
                };
                assign(&mut local.vals[asg.target as usize], index, value)
                    .map_err(|source| SemanticsError::Eval { context: ctx(), source })?;
            }
            local.loc = t.to;
            local.last_port = Some(t.port);
        }
        Ok(next)
    }

    /// Fires `a` after checking it is among the enabled interactions of `q`.
    pub fn apply_interaction(&self, q: &GlobalConfig, a: &Interaction) -> Result<GlobalConfig, SemanticsError> {
        if !self.enabled_interactions(q)?.contains(a) {
            return Err(SemanticsError::NotEnabled(self.interaction_label(a)));
        }
        self.fire(q, a)
    }

    /// Finds the enabled interaction whose ports are exactly `ports` (`comp.port` strings).
    pub fn find_enabled(&self, q: &GlobalConfig, ports: &[&str]) -> Result<Option<Interaction>, SemanticsError> {
        let mut want: Vec<&str> = ports.to_vec();
        want.sort();
        Ok(self.enabled_interactions(q)?.into_iter().find(|a| {
            let mut have = self.port_names(a);
            have.sort();
            have == want
        }))
    }

    /// Location names of every component in `q`.
    pub fn locations(&self, q: &GlobalConfig) -> Vec<&str> {
        q.locals.iter().enumerate().map(|(i, l)| self.location_name(i as u32, l.loc)).collect()
    }

    pub fn value(&self, q: &GlobalConfig, comp: &str, var: &str) -> Option<Value> {
        let c = self.component_index(comp)?;
        let s = self.var_slot(c, var)?;
        Some(q.locals[c as usize].vals[s as usize].clone())
    }

    /// Builds a comparison `comp.loc = "l"` usable as a state predicate.
    pub fn loc_equals(comp: &str, loc: &str) -> Expr {
        Expr::binary(BinOp::Eq, Expr::Var(Path::qualified(&[comp, "loc"])), Expr::Lit(Value::str(loc)))
    }
}
