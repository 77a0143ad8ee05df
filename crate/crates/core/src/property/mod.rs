//! Properties over system state: atomic propositions, events, runtime oracles
//! with four-valued verdicts, and decision procedures on oracles.

mod classify;
mod event;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SyntaxError;
use crate::semantics::{config_json, Engine, GlobalConfig};

pub use classify::{
    enforceability_k, is_safety, is_stutter_invariant, verdict_annotate, Classification, Dfa, Enforceability,
};
pub use event::{AtomicProp, BoundEvent, CmpOp, Event, Formula};

/// Four-valued verdict domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "top")]
    Top,
    #[serde(rename = "topc")]
    TopC,
    #[serde(rename = "botc")]
    BotC,
    #[serde(rename = "bot")]
    Bot,
}

impl Verdict {
    /// `⊤` or `⊤c`.
    pub fn is_good(self) -> bool {
        matches!(self, Verdict::Top | Verdict::TopC)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Top => "⊤",
            Verdict::TopC => "⊤c",
            Verdict::BotC => "⊥c",
            Verdict::Bot => "⊥",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Output {
    #[serde(rename = "bad")]
    Bad,
    #[serde(rename = "possiblyGood")]
    PossiblyGood,
}

/// Oracle file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDef {
    pub states: Vec<StateDef>,
    pub initial: String,
    pub transitions: Vec<TransitionDef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepting: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDef {
    pub from: String,
    pub event: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

impl StateDef {
    pub fn with_verdict(name: &str, v: Verdict) -> Self {
        StateDef { name: name.into(), verdict: Some(v), accepting: None }
    }

    pub fn accepting(name: &str, acc: bool) -> Self {
        StateDef { name: name.into(), verdict: None, accepting: Some(acc) }
    }
}

impl TransitionDef {
    pub fn new(from: &str, event: &str, to: &str) -> Self {
        TransitionDef { from: from.into(), event: event.into(), to: to.into(), output: None }
    }

    pub fn output(mut self, o: Output) -> Self {
        self.output = Some(o);
        self
    }
}

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("event `{text}`: syntax error at {source}")]
    EventSyntax {
        text: String,
        #[source]
        source: SyntaxError,
    },
    #[error("event `{text}`: {detail}")]
    NotAnEvent { text: String, detail: String },
    #[error("unknown oracle state `{0}`")]
    UnknownState(String),
    #[error("duplicate oracle state `{0}`")]
    DuplicateState(String),
    #[error("state `{state}` has two transitions on event `{event}`")]
    DuplicateEdge { state: String, event: String },
    #[error("state `{0}` has neither a verdict, an accepting flag, nor an incoming output")]
    MissingVerdict(String),
    #[error("inconsistent verdicts: {0}")]
    Inconsistent(String),
    #[error("unresolved reference `{0}`")]
    Unresolved(String),
    #[error("oracle is incomplete: no event of state `{state}` holds at {config}")]
    Incomplete { state: String, config: String },
    #[error("oracle is nondeterministic: events {events:?} of state `{state}` all hold at {config}")]
    Nondeterministic { state: String, events: Vec<String>, config: String },
    #[error("evaluating event `{event}`: {source}")]
    Eval {
        event: String,
        #[source]
        source: crate::model::EvalError,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleState {
    pub name: String,
    pub verdict: Verdict,
    pub accepting: bool,
}

/// A deterministic oracle over a finite alphabet of events.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub states: Vec<OracleState>,
    pub initial: usize,
    pub alphabet: Vec<Event>,
    /// outgoing `(event, target)` per state, sorted by event
    pub delta: Vec<Vec<(usize, usize)>>,
    def: OracleDef,
}

impl Oracle {
    pub fn from_def(def: OracleDef) -> Result<Self, PropertyError> {
        let mut index = BTreeMap::new();
        for (i, s) in def.states.iter().enumerate() {
            if index.insert(s.name.clone(), i).is_some() {
                return Err(PropertyError::DuplicateState(s.name.clone()));
            }
        }
        let lookup = |n: &str| index.get(n).copied().ok_or_else(|| PropertyError::UnknownState(n.into()));
        let initial = lookup(&def.initial)?;
        let mut alphabet: Vec<Event> = Vec::new();
        let mut delta = vec![Vec::new(); def.states.len()];
        let mut forced: Vec<Option<Output>> = vec![None; def.states.len()];
        for t in &def.transitions {
            let from = lookup(&t.from)?;
            let to = lookup(&t.to)?;
            let ev = Event::parse(&t.event)?;
            let e = match alphabet.iter().position(|a| a.key() == ev.key()) {
                Some(i) => i,
                None => {
                    alphabet.push(ev);
                    alphabet.len() - 1
                }
            };
            let out: &mut Vec<(usize, usize)> = &mut delta[from];
            if out.iter().any(|(x, _)| *x == e) {
                return Err(PropertyError::DuplicateEdge { state: t.from.clone(), event: t.event.clone() });
            }
            out.push((e, to));
            if let Some(o) = t.output {
                match forced[to] {
                    Some(prev) if prev != o => {
                        return Err(PropertyError::Inconsistent(format!(
                            "state `{}` receives both bad and possiblyGood outputs",
                            t.to
                        )))
                    }
                    _ => forced[to] = Some(o),
                }
            }
        }
        for d in &mut delta {
            d.sort();
        }
        let mut accepting = Vec::with_capacity(def.states.len());
        for (i, s) in def.states.iter().enumerate() {
            let acc = match (s.verdict, s.accepting, forced[i]) {
                (Some(v), _, _) => v.is_good(),
                (None, Some(a), _) => a,
                (None, None, Some(o)) => o == Output::PossiblyGood,
                (None, None, None) => return Err(PropertyError::MissingVerdict(s.name.clone())),
            };
            accepting.push(acc);
        }
        let dfa = Dfa { init: initial, letters: alphabet.len(), delta: delta.clone(), accepting: accepting.clone() };
        let annotated = verdict_annotate(&dfa);
        let mut states = Vec::with_capacity(def.states.len());
        for (i, s) in def.states.iter().enumerate() {
            let forced_v = forced[i].map(|o| match o {
                Output::Bad => Verdict::Bot,
                Output::PossiblyGood => Verdict::TopC,
            });
            if let (Some(v), Some(f)) = (s.verdict, forced_v) {
                if v != f {
                    return Err(PropertyError::Inconsistent(format!(
                        "state `{}` is declared {v} but an incoming output forces {f}",
                        s.name
                    )));
                }
            }
            let verdict = s.verdict.or(forced_v).unwrap_or(annotated[i]);
            states.push(OracleState { name: s.name.clone(), verdict, accepting: accepting[i] });
        }
        let o = Oracle { states, initial, alphabet, delta, def };
        o.check_consistency()?;
        Ok(o)
    }

    fn check_consistency(&self) -> Result<(), PropertyError> {
        for (i, s) in self.states.iter().enumerate() {
            let absorbing = match s.verdict {
                Verdict::Top | Verdict::Bot => s.verdict,
                _ => continue,
            };
            for j in self.reachable_from(i) {
                if self.states[j].verdict != absorbing {
                    return Err(PropertyError::Inconsistent(format!(
                        "state `{}` has verdict {} but reaches `{}` with verdict {}",
                        s.name, absorbing, self.states[j].name, self.states[j].verdict
                    )));
                }
            }
        }
        Ok(())
    }

    /// States reachable from `s` (including `s`).
    pub fn reachable_from(&self, s: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([s]);
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &(_, t) in &self.delta[x] {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        seen
    }

    pub fn def(&self) -> &OracleDef {
        &self.def
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn successor(&self, state: usize, event: usize) -> Option<usize> {
        self.delta[state].iter().find(|(e, _)| *e == event).map(|(_, t)| *t)
    }

    pub fn verdict(&self, state: usize) -> Verdict {
        self.states[state].verdict
    }

    /// Acceptance automaton over event indices.
    pub fn dfa(&self) -> Dfa {
        Dfa {
            init: self.initial,
            letters: self.alphabet.len(),
            delta: self.delta.clone(),
            accepting: self.states.iter().map(|s| s.accepting).collect(),
        }
    }

    /// Verdict reached after reading a word of event indices, `None` if some
    /// letter has no transition.
    pub fn run_word(&self, word: &[usize]) -> Option<Verdict> {
        let mut s = self.initial;
        for &e in word {
            s = self.successor(s, e)?;
        }
        Some(self.verdict(s))
    }

    /// Events whose formula holds under every assignment of its atoms.
    pub fn tautological_events(&self) -> Vec<String> {
        self.alphabet.iter().filter(|e| e.is_tautology()).map(|e| e.text().to_string()).collect()
    }

    /// Resolves every event against a system.
    pub fn bind(&self, engine: &Engine) -> Result<BoundOracle<'_>, PropertyError> {
        let events = self.alphabet.iter().map(|e| e.bind(engine)).collect::<Result<Vec<_>, _>>()?;
        Ok(BoundOracle { oracle: self, events })
    }

    pub fn classify(&self) -> Classification {
        Classification {
            safety: is_safety(self),
            stutter_invariant: is_stutter_invariant(self),
            k: enforceability_k(self),
        }
    }
}

/// Monitored variables per component, and their union in first-use order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonitoredVars {
    pub per_component: BTreeMap<String, BTreeSet<String>>,
    pub occur: Vec<(String, String)>,
}

impl MonitoredVars {
    pub fn of(&self, comp: &str) -> Option<&BTreeSet<String>> {
        self.per_component.get(comp).filter(|s| !s.is_empty())
    }
}

/// Extracts `(component, variable|loc|port)` pairs from every event of the alphabet.
pub fn monitored_vars(o: &Oracle) -> MonitoredVars {
    let mut mv = MonitoredVars::default();
    for e in &o.alphabet {
        for ap in e.atoms() {
            for (c, v) in ap.used() {
                if mv.per_component.entry(c.clone()).or_default().insert(v.clone()) {
                    mv.occur.push((c, v));
                }
            }
        }
    }
    mv
}

/// An oracle whose events are resolved against a particular system.
#[derive(Clone, Debug)]
pub struct BoundOracle<'a> {
    pub oracle: &'a Oracle,
    events: Vec<BoundEvent>,
}

impl BoundOracle<'_> {
    pub fn holds(&self, event: usize, engine: &Engine, q: &GlobalConfig) -> Result<bool, PropertyError> {
        self.events[event].eval(engine, q).map_err(|source| PropertyError::Eval {
            event: self.oracle.alphabet[event].text().to_string(),
            source,
        })
    }

    /// Takes the unique outgoing event of `theta` that holds at `q`.
    pub fn step(&self, theta: usize, engine: &Engine, q: &GlobalConfig) -> Result<(usize, usize), PropertyError> {
        let mut hit = Vec::new();
        for &(e, t) in &self.oracle.delta[theta] {
            if self.holds(e, engine, q)? {
                hit.push((e, t));
            }
        }
        match hit.len() {
            1 => Ok(hit[0]),
            0 => Err(PropertyError::Incomplete {
                state: self.oracle.states[theta].name.clone(),
                config: config_json(engine, q).to_string(),
            }),
            _ => Err(PropertyError::Nondeterministic {
                state: self.oracle.states[theta].name.clone(),
                events: hit.iter().map(|(e, _)| self.oracle.alphabet[*e].text().to_string()).collect(),
                config: config_json(engine, q).to_string(),
            }),
        }
    }

    /// Folds [`Self::step`] over `qs` from the initial state.
    pub fn evaluate_sequence<'q>(
        &self,
        engine: &Engine,
        qs: impl IntoIterator<Item = &'q GlobalConfig>,
    ) -> Result<Verdict, PropertyError> {
        let mut theta = self.oracle.initial;
        for q in qs {
            theta = self.step(theta, engine, q)?.1;
        }
        Ok(self.oracle.verdict(theta))
    }
}

/// Parses an oracle file.
pub fn parse_oracle(text: &str) -> Result<Oracle, PropertyError> {
    let def: OracleDef = serde_json::from_str(text)
        .map_err(|e| PropertyError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
    Oracle::from_def(def)
}

pub fn serialize_oracle(o: &Oracle) -> String {
    serde_json::to_string_pretty(o.def()).expect("oracle serialization cannot fail")
}
