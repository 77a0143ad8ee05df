//! Bounded checks of the correctness propositions of a supervised system.

use std::collections::{HashMap, VecDeque};

use super::project::{Family, Phase, ProjState, Projector, StepKind};
use super::SupervisionInfo;
use crate::property::{BoundOracle, Oracle, PropertyError};
use crate::semantics::{Engine, GlobalConfig, Interaction};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub property: &'static str,
    pub detail: String,
    /// interaction labels from the initial configuration
    pub trace: Vec<String>,
}

/// Properties examined by [`check_propositions`].
pub const PROPOSITIONS: [&str; 6] = ["homogeneity", "block-shape", "projection", "containment", "soundness", "one-step"];

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    /// product nodes: supervised configuration, projector and oracle state
    pub states: usize,
    pub transitions: usize,
    pub stable: usize,
    pub deadlocks: usize,
    pub truncated: bool,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn holds(&self, property: &str) -> bool {
        !self.violations.iter().any(|v| v.property == property)
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompletenessReport {
    /// (original, supervised) pairs visited
    pub pairs: usize,
    /// good original steps matched by a supervised block
    pub matched: usize,
    pub failures: Vec<Violation>,
}

impl CompletenessReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// At most this many violations are kept per property.
const KEEP: usize = 3;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Node {
    q: GlobalConfig,
    st: ProjState,
    theta: usize,
    /// the last stable configuration had a bad verdict
    last_bad: bool,
}

struct Search {
    nodes: Vec<Node>,
    parent: Vec<Option<(usize, String)>>,
    report: CheckReport,
}

impl Search {
    fn trace(&self, mut i: usize) -> Vec<String> {
        let mut out = Vec::new();
        while let Some((p, l)) = &self.parent[i] {
            out.push(l.clone());
            i = *p;
        }
        out.reverse();
        out
    }

    fn violate(&mut self, property: &'static str, at: usize, extra: Option<String>, detail: String) {
        if self.report.violations.iter().filter(|v| v.property == property).count() >= KEEP {
            return;
        }
        let mut trace = self.trace(at);
        trace.extend(extra);
        self.report.violations.push(Violation { property, detail, trace });
    }
}

fn oracle_err(e: PropertyError) -> String {
    format!("oracle: {e}")
}

/// Explores the product of the supervised system with the projector and the
/// oracle, up to `max_states` nodes, checking interaction homogeneity, the
/// shape of monitor blocks, that projected steps are original steps and
/// recoveries restore the configuration, that every stable configuration
/// has a good verdict, and that no two consecutive stable configurations are
/// bad.
pub fn check_propositions(
    orig: &Engine,
    sup: &Engine,
    info: &SupervisionInfo,
    oracle: &Oracle,
    max_states: usize,
) -> Result<CheckReport, super::ProjectionError> {
    let pj = Projector::new(orig, sup, info)?;
    let bound = oracle.bind(orig).map_err(|e| super::ProjectionError::Mismatch(e.to_string()))?;
    let q0 = sup.initial();
    let root = Node { st: pj.start(&q0), q: q0, theta: oracle.initial, last_bad: false };
    let mut s = Search { nodes: vec![root.clone()], parent: vec![None], report: CheckReport::default() };
    let mut seen: HashMap<Node, usize> = HashMap::from([(root, 0)]);
    let mut queue = VecDeque::from([0usize]);

    while let Some(i) = queue.pop_front() {
        let node = s.nodes[i].clone();
        let enabled = sup.enabled_interactions(&node.q)?;
        if enabled.is_empty() {
            s.report.deadlocks += 1;
        }
        let stable = !enabled.iter().any(|a| pj.family(a).is_some());
        let mut last_bad = node.last_bad;
        if matches!(node.st.phase, Phase::Deciding { .. }) {
            if enabled.is_empty() || enabled.iter().any(|a| !matches!(pj.family(a), Some(Family::Continue | Family::Recover))) {
                let labels: Vec<String> = enabled.iter().map(|a| sup.interaction_label(a)).collect();
                s.violate("block-shape", i, None, format!("after the monitor step the enabled set is {{{}}}", labels.join("; ")));
            }
        }
        if stable && node.st.phase == Phase::Stable {
            s.report.stable += 1;
            let bad = !oracle.verdict(node.theta).is_good();
            if bad {
                let name = &oracle.states[node.theta].name;
                s.violate("soundness", i, None, format!("stable configuration with oracle state {name}"));
                if node.last_bad {
                    s.violate("one-step", i, None, "two consecutive stable configurations are bad".into());
                }
            }
            last_bad = bad;
        }
        for a in &enabled {
            let label = sup.interaction_label(a);
            s.report.transitions += 1;
            if let Err(d) = homogeneous(&pj, a) {
                s.violate("homogeneity", i, Some(label.clone()), d);
            }
            let next = sup.fire(&node.q, a)?;
            let mut st = node.st.clone();
            let mut theta = node.theta;
            match pj.feed(&mut st, a, &next, 0) {
                Err(e) => {
                    s.violate("projection", i, Some(label.clone()), e.to_string());
                    continue;
                }
                Ok(Some(step)) if step.kind == StepKind::Recover => {
                    if !step.restored {
                        s.violate("containment", i, Some(label.clone()), format!("rolling back {{{}}} did not restore the configuration", step.ports.join(",")));
                    }
                }
                Ok(Some(step)) => {
                    let prev = &node.st.projected;
                    if !is_original_step(orig, prev, &step.ports, &step.config)? {
                        s.violate("containment", i, Some(label.clone()), format!("{{{}}} is not a step of the original system", step.ports.join(",")));
                    }
                    match bound_step(&bound, orig, theta, &step.config) {
                        Ok(t) => theta = t,
                        Err(d) => {
                            s.violate("soundness", i, Some(label.clone()), d);
                            continue;
                        }
                    }
                }
                Ok(None) => {}
            }
            let child = Node { q: next, st, theta, last_bad };
            if seen.contains_key(&child) {
                continue;
            }
            if s.nodes.len() >= max_states {
                s.report.truncated = true;
                continue;
            }
            let j = s.nodes.len();
            seen.insert(child.clone(), j);
            s.nodes.push(child);
            s.parent.push(Some((i, label)));
            queue.push_back(j);
        }
    }
    s.report.states = s.nodes.len();
    Ok(s.report)
}

fn bound_step(bound: &BoundOracle<'_>, orig: &Engine, theta: usize, q: &GlobalConfig) -> Result<usize, String> {
    bound.step(theta, orig, q).map(|(_, t)| t).map_err(oracle_err)
}

/// Ports of one interaction are all monitor-free original ports, or all
/// belong to one monitor family together with that family's component ports.
fn homogeneous(pj: &Projector<'_>, a: &Interaction) -> Result<(), String> {
    let fams = [Family::Monitor, Family::Continue, Family::Recover].into_iter().filter(|f| a.contains(pj.monitor_port(*f))).count();
    if fams > 1 {
        return Err(format!("{} mixes monitor ports", pj.sup.interaction_label(a)));
    }
    if fams == 1 && !pj.original_ports(a).is_empty() {
        return Err(format!("{} mixes monitor and original ports", pj.sup.interaction_label(a)));
    }
    Ok(())
}

fn is_original_step(orig: &Engine, prev: &GlobalConfig, ports: &[String], next: &GlobalConfig) -> Result<bool, super::ProjectionError> {
    Ok(orig
        .enabled_interactions(prev)?
        .iter()
        .any(|b| orig.port_names(b) == ports && orig.fire(prev, b).ok().as_ref() == Some(next)))
}

/// Breadth-first over pairs of original and supervised configurations up to
/// `depth` original steps: every original step leading to a good verdict
/// must be reproduced by the supervised system, as the same interaction
/// followed by an accepting monitor decision when it is instrumented.
pub fn check_completeness(
    orig: &Engine,
    sup: &Engine,
    info: &SupervisionInfo,
    oracle: &Oracle,
    depth: usize,
) -> Result<CompletenessReport, super::ProjectionError> {
    let pj = Projector::new(orig, sup, info)?;
    let bound = oracle.bind(orig).map_err(|e| super::ProjectionError::Mismatch(e.to_string()))?;
    let mut report = CompletenessReport::default();

    let mut q_sup = sup.initial();
    let mut st = pj.start(&q_sup);
    if st.phase == Phase::Sync {
        let sync = sup.enabled_interactions(&q_sup)?.into_iter().find(|a| pj.family(a) == Some(Family::Monitor));
        let Some(sync) = sync else {
            report.failures.push(Violation { property: "completeness", detail: "no initial synchronization".into(), trace: vec![] });
            return Ok(report);
        };
        let next = sup.fire(&q_sup, &sync)?;
        pj.feed(&mut st, &sync, &next, 0)?;
        q_sup = next;
    }
    let q0 = orig.initial();
    if st.projected != q0 {
        report.failures.push(Violation {
            property: "completeness",
            detail: "the synchronized initial configuration does not project to the original one".into(),
            trace: vec![],
        });
        return Ok(report);
    }

    type Pair = (GlobalConfig, GlobalConfig, usize);
    let mut seen: HashMap<Pair, ()> = HashMap::new();
    let mut queue: VecDeque<(Pair, Vec<String>)> = VecDeque::new();
    let start = (q0, q_sup, oracle.initial);
    seen.insert(start.clone(), ());
    queue.push_back((start, Vec::new()));
    while let Some(((q, qs, theta), path)) = queue.pop_front() {
        report.pairs += 1;
        if path.len() >= depth {
            continue;
        }
        for b in orig.enabled_interactions(&q)? {
            let q2 = orig.fire(&q, &b)?;
            let Ok(t2) = bound_step(&bound, orig, theta, &q2) else { continue };
            if !oracle.verdict(t2).is_good() {
                continue;
            }
            let labels = orig.port_names(&b);
            let mut trace = path.clone();
            trace.push(labels.join(","));
            match reproduce(&pj, &qs, &q, &labels, &q2)? {
                Some(qs2) => {
                    report.matched += 1;
                    let key = (q2, qs2, t2);
                    if !seen.contains_key(&key) {
                        seen.insert(key.clone(), ());
                        queue.push_back((key, trace));
                    }
                }
                None => {
                    if report.failures.len() < KEEP {
                        report.failures.push(Violation {
                            property: "completeness",
                            detail: format!("the supervised system cannot reproduce {{{}}}", labels.join(",")),
                            trace,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Tries every supervised interaction with the same original ports, followed
/// by the monitor block when the step is instrumented.
fn reproduce(
    pj: &Projector<'_>,
    qs: &GlobalConfig,
    q: &GlobalConfig,
    labels: &[String],
    target: &GlobalConfig,
) -> Result<Option<GlobalConfig>, super::ProjectionError> {
    let sup = pj.sup;
    for a in sup.enabled_interactions(qs)? {
        if pj.family(&a).is_some() || pj.port_labels(&pj.original_ports(&a)) != labels {
            continue;
        }
        let mut st = ProjState { phase: Phase::Stable, projected: q.clone() };
        let mut cur = sup.fire(qs, &a)?;
        let mut out = pj.feed(&mut st, &a, &cur, 0)?;
        if out.is_none() {
            let Some(m) = sup.enabled_interactions(&cur)?.into_iter().find(|x| pj.family(x) == Some(Family::Monitor)) else {
                continue;
            };
            let next = sup.fire(&cur, &m)?;
            pj.feed(&mut st, &m, &next, 0)?;
            cur = next;
            let Some(c) = sup.enabled_interactions(&cur)?.into_iter().find(|x| pj.family(x) == Some(Family::Continue)) else {
                continue;
            };
            let next = sup.fire(&cur, &c)?;
            out = pj.feed(&mut st, &c, &next, 0)?;
            cur = next;
        }
        if out.is_some_and(|s| &s.config == target) {
            return Ok(Some(cur));
        }
    }
    Ok(None)
}
