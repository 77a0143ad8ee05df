//! Enforcement at the level of abstract labelled transition systems: the
//! enforcement monitor of an oracle, its composition with a system LTS,
//! cancellation-aware projection, and an exhaustive soundness check.
//!
//! Letters are event texts of the oracle alphabet; any other label of the
//! system LTS is outside the monitored alphabet and passes through.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::property::{BoundOracle, Oracle, PropertyError, Verdict};
use crate::semantics::{Engine, ReachGraph};

#[derive(Debug, Error)]
pub enum EnforceError {
    #[error("the oracle is not a safety property (a reachable state has verdict ⊥c)")]
    NotSafety,
    #[error("label `{0}` is a cancellation event and cannot label the system")]
    CancellationInSystem(String),
    #[error("ill-formed cancellation at position {0}: it does not follow its event")]
    IllFormed(usize),
    #[error(transparent)]
    Property(#[from] PropertyError),
}

/// A letter of `Σ ∪ Σ̄`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    Ev(String),
    Cancel(String),
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::Ev(e) => f.write_str(e),
            Sym::Cancel(e) => write!(f, "~{e}"),
        }
    }
}

/// A finite labelled transition system with string labels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lts {
    pub states: usize,
    pub init: usize,
    pub trans: Vec<(usize, String, usize)>,
}

impl Lts {
    pub fn new(states: usize, init: usize) -> Self {
        Lts { states, init, trans: Vec::new() }
    }

    pub fn add(&mut self, from: usize, label: &str, to: usize) {
        self.trans.push((from, label.to_string(), to));
    }

    fn out(&self) -> Vec<Vec<(&str, usize)>> {
        let mut out = vec![Vec::new(); self.states];
        for (f, l, t) in &self.trans {
            out[*f].push((l.as_str(), *t));
        }
        out
    }

    /// Whether `word` labels some path from the initial state.
    pub fn accepts_trace(&self, word: &[String]) -> bool {
        let out = self.out();
        let mut cur = BTreeSet::from([self.init]);
        for w in word {
            cur = cur.iter().flat_map(|&s| out[s].iter().filter(|(l, _)| l == w).map(|(_, t)| *t)).collect();
            if cur.is_empty() {
                return false;
            }
        }
        true
    }

    /// Every label sequence of length at most `bound`.
    pub fn traces(&self, bound: usize) -> BTreeSet<Vec<String>> {
        let out = self.out();
        let mut all = BTreeSet::new();
        let mut frontier: BTreeSet<(Vec<String>, usize)> = BTreeSet::from([(Vec::new(), self.init)]);
        for len in 0..=bound {
            all.extend(frontier.iter().map(|(w, _)| w.clone()));
            if len == bound {
                break;
            }
            frontier = frontier
                .iter()
                .flat_map(|(w, s)| {
                    out[*s].iter().map(move |(l, t)| {
                        let mut w2 = w.clone();
                        w2.push(l.to_string());
                        (w2, *t)
                    })
                })
                .collect();
        }
        all
    }
}

/// Builds an LTS from a reachability graph, labelling each edge by the event
/// of `oracle` that holds in its target configuration. The event must be
/// unique among the whole alphabet.
pub fn lts_from_graph(engine: &Engine, graph: &ReachGraph, oracle: &BoundOracle) -> Result<Lts, EnforceError> {
    let mut lts = Lts::new(graph.states.len(), 0);
    let mut label = Vec::with_capacity(graph.states.len());
    for q in &graph.states {
        let mut hit = Vec::new();
        for e in 0..oracle.oracle.alphabet.len() {
            if oracle.holds(e, engine, q)? {
                hit.push(e);
            }
        }
        match hit.as_slice() {
            [e] => label.push(oracle.oracle.alphabet[*e].text().to_string()),
            [] => {
                return Err(PropertyError::Incomplete {
                    state: "(alphabet)".into(),
                    config: crate::semantics::config_json(engine, q).to_string(),
                }
                .into())
            }
            _ => {
                return Err(PropertyError::Nondeterministic {
                    state: "(alphabet)".into(),
                    events: hit.iter().map(|e| oracle.oracle.alphabet[*e].text().to_string()).collect(),
                    config: crate::semantics::config_json(engine, q).to_string(),
                }
                .into())
            }
        }
    }
    for (s, out) in graph.edges.iter().enumerate() {
        for (_, t) in out {
            lts.add(s, &label[*t].clone(), *t);
        }
    }
    Ok(lts)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EmState {
    Oracle(usize),
    /// fresh state entered on `event` from `origin` before cancelling
    Intermediate { origin: usize, event: usize },
}

/// Enforcement monitor over `Σ ∪ Σ̄`.
#[derive(Clone, Debug)]
pub struct AbstractEm {
    pub states: Vec<EmState>,
    pub init: usize,
    pub alphabet: Vec<String>,
    /// `(from, letter, to)`; letters are `Ev`/`Cancel` over alphabet texts
    pub trans: Vec<(usize, Sym, usize)>,
}

impl AbstractEm {
    /// Follows the oracle on edges into `⊤`/`⊤c` states and detours every
    /// edge into a `⊥` state through an intermediate state that cancels back.
    pub fn build(o: &Oracle) -> Result<Self, EnforceError> {
        if !crate::property::is_safety(o) {
            return Err(EnforceError::NotSafety);
        }
        Ok(Self::construct(o, false))
    }

    /// A deliberately broken monitor: edges into `⊥` states are followed
    /// instead of cancelled. Used to validate the soundness check.
    pub fn leaky(o: &Oracle) -> Self {
        Self::construct(o, true)
    }

    fn construct(o: &Oracle, leaky: bool) -> Self {
        let mut em = AbstractEm {
            states: Vec::new(),
            init: 0,
            alphabet: o.alphabet.iter().map(|e| e.text().to_string()).collect(),
            trans: Vec::new(),
        };
        let mut index: HashMap<EmState, usize> = HashMap::new();
        let mut intern = |em: &mut AbstractEm, s: EmState, queue: &mut VecDeque<usize>| -> usize {
            *index.entry(s.clone()).or_insert_with(|| {
                em.states.push(s);
                queue.push_back(em.states.len() - 1);
                em.states.len() - 1
            })
        };
        let mut queue = VecDeque::new();
        intern(&mut em, EmState::Oracle(o.initial), &mut queue);
        while let Some(i) = queue.pop_front() {
            let EmState::Oracle(theta) = em.states[i] else { continue };
            for &(e, t) in &o.delta[theta] {
                let name = em.alphabet[e].clone();
                match o.verdict(t) {
                    Verdict::Top | Verdict::TopC => {
                        let j = intern(&mut em, EmState::Oracle(t), &mut queue);
                        em.trans.push((i, Sym::Ev(name), j));
                    }
                    Verdict::Bot if !leaky => {
                        let j = intern(&mut em, EmState::Intermediate { origin: theta, event: e }, &mut queue);
                        em.trans.push((i, Sym::Ev(name.clone()), j));
                        em.trans.push((j, Sym::Cancel(name), i));
                    }
                    Verdict::Bot | Verdict::BotC => {
                        if leaky {
                            let j = intern(&mut em, EmState::Oracle(t), &mut queue);
                            em.trans.push((i, Sym::Ev(name), j));
                        }
                    }
                }
            }
        }
        em
    }

    fn step(&self, s: usize, sym: &Sym) -> Option<usize> {
        self.trans.iter().find(|(f, l, _)| *f == s && l == sym).map(|(_, _, t)| *t)
    }

    pub fn intermediates(&self) -> usize {
        self.states.iter().filter(|s| matches!(s, EmState::Intermediate { .. })).count()
    }
}

/// Label of the composed system: a plain step, or an event immediately
/// followed by its cancellation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CLabel {
    Step(String),
    Cancelled(String),
}

impl CLabel {
    pub fn symbols(&self) -> Vec<Sym> {
        match self {
            CLabel::Step(e) => vec![Sym::Ev(e.clone())],
            CLabel::Cancelled(e) => vec![Sym::Ev(e.clone()), Sym::Cancel(e.clone())],
        }
    }
}

/// `L ⊗ E`: states are (system state, monitor state) pairs reachable from the
/// initial pair.
#[derive(Clone, Debug)]
pub struct Composed {
    pub states: Vec<(usize, usize)>,
    pub trans: Vec<(usize, CLabel, usize)>,
}

impl Composed {
    fn out(&self) -> Vec<Vec<(&CLabel, usize)>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for (f, l, t) in &self.trans {
            out[*f].push((l, *t));
        }
        out
    }

    /// Every composed-label sequence of length at most `bound`.
    pub fn traces(&self, bound: usize) -> BTreeSet<Vec<CLabel>> {
        let out = self.out();
        let mut all = BTreeSet::new();
        let mut frontier: BTreeSet<(Vec<CLabel>, usize)> = BTreeSet::from([(Vec::new(), 0)]);
        for len in 0..=bound {
            all.extend(frontier.iter().map(|(w, _)| w.clone()));
            if len == bound {
                break;
            }
            frontier = frontier
                .iter()
                .flat_map(|(w, s)| {
                    out[*s].iter().map(move |(l, t)| {
                        let mut w2 = w.clone();
                        w2.push((*l).clone());
                        (w2, *t)
                    })
                })
                .collect();
        }
        all
    }
}

/// Composes a system LTS with a monitor.
pub fn compose(lts: &Lts, em: &AbstractEm) -> Result<Composed, EnforceError> {
    for (_, l, _) in &lts.trans {
        if l.starts_with('~') {
            return Err(EnforceError::CancellationInSystem(l.clone()));
        }
    }
    let sigma: BTreeSet<&str> = em.alphabet.iter().map(String::as_str).collect();
    let out = lts.out();
    let mut c = Composed { states: vec![(lts.init, em.init)], trans: Vec::new() };
    let mut index: HashMap<(usize, usize), usize> = HashMap::from([((lts.init, em.init), 0)]);
    let mut head = 0;
    while head < c.states.len() {
        let (q, theta) = c.states[head];
        let mut targets = Vec::new();
        for &(l, q2) in &out[q] {
            if !sigma.contains(l) {
                targets.push((CLabel::Step(l.to_string()), (q2, theta)));
                continue;
            }
            let Some(t) = em.step(theta, &Sym::Ev(l.to_string())) else { continue };
            match em.states[t] {
                EmState::Oracle(_) => targets.push((CLabel::Step(l.to_string()), (q2, t))),
                EmState::Intermediate { .. } => {
                    if em.step(t, &Sym::Cancel(l.to_string())) == Some(theta) {
                        targets.push((CLabel::Cancelled(l.to_string()), (q, theta)));
                    }
                }
            }
        }
        for (label, pair) in targets {
            let id = *index.entry(pair).or_insert_with(|| {
                c.states.push(pair);
                c.states.len() - 1
            });
            c.trans.push((head, label, id));
        }
        head += 1;
    }
    c.trans.sort();
    c.trans.dedup();
    Ok(c)
}

/// Erases every event immediately followed by its cancellation.
pub fn ctrl_project(word: &[Sym]) -> Result<Vec<String>, EnforceError> {
    let mut out: Vec<String> = Vec::new();
    let mut last_was_event = false;
    for (i, s) in word.iter().enumerate() {
        match s {
            Sym::Ev(e) => {
                out.push(e.clone());
                last_was_event = true;
            }
            Sym::Cancel(e) => {
                if !last_was_event || out.last() != Some(e) {
                    return Err(EnforceError::IllFormed(i));
                }
                out.pop();
                last_was_event = false;
            }
        }
    }
    Ok(out)
}

/// Outcome of [`check_em_soundness`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SoundnessReport {
    pub item1: bool,
    pub item2: bool,
    pub counterexample: Option<Vec<String>>,
    pub traces_checked: usize,
}

impl SoundnessReport {
    pub fn passed(&self) -> bool {
        self.item1 && self.item2
    }
}

/// Membership of a word in the property: the monitored letters, read by the
/// oracle, end in a `⊤`/`⊤c` state. Other letters are ignored.
fn in_property(o: &Oracle, word: &[String]) -> bool {
    let mut s = o.initial;
    for w in word {
        let Some(e) = o.alphabet.iter().position(|a| a.text() == w) else { continue };
        match o.successor(s, e) {
            Some(t) => s = t,
            None => return false,
        }
    }
    o.verdict(s).is_good()
}

/// Checks both items of the one-event deviation guarantee on every composed
/// trace of length at most `bound`, using the monitor built from `oracle`.
pub fn check_em_soundness(lts: &Lts, oracle: &Oracle, bound: usize) -> Result<SoundnessReport, EnforceError> {
    check_em_soundness_with(lts, oracle, &AbstractEm::build(oracle)?, bound)
}

/// As [`check_em_soundness`] with a caller-supplied monitor.
pub fn check_em_soundness_with(
    lts: &Lts,
    oracle: &Oracle,
    em: &AbstractEm,
    bound: usize,
) -> Result<SoundnessReport, EnforceError> {
    let composed = compose(lts, em)?;
    let sigma: BTreeSet<&str> = em.alphabet.iter().map(String::as_str).collect();
    let mut report = SoundnessReport { item1: true, item2: true, counterexample: None, traces_checked: 0 };
    for trace in composed.traces(bound) {
        report.traces_checked += 1;
        let word: Vec<Sym> = trace.iter().flat_map(CLabel::symbols).collect();
        let render = || word.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let ctrl = match ctrl_project(&word) {
            Ok(c) => c,
            Err(_) => {
                report.item2 = false;
                report.counterexample.get_or_insert_with(render);
                continue;
            }
        };
        let good = in_property(oracle, &ctrl);
        if !good || !lts.accepts_trace(&ctrl) {
            report.item2 = false;
            report.counterexample.get_or_insert_with(render);
        }
        if !good {
            if let Some(Sym::Ev(e)) = word.last() {
                if sigma.contains(e.as_str()) {
                    let prefix = ctrl_project(&word[..word.len() - 1])?;
                    if !in_property(oracle, &prefix) {
                        report.item1 = false;
                        report.counterexample.get_or_insert_with(render);
                    }
                }
            }
        }
    }
    Ok(report)
}
