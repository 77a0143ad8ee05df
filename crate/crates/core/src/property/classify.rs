//! Verdict annotation and the safety / stutter-invariance / enforceability
//! decision procedures.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Oracle, Verdict};

/// Acceptance automaton over letters `0..letters`. A missing letter means the
/// event cannot occur from that state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub init: usize,
    pub letters: usize,
    /// outgoing `(letter, target)` per state
    pub delta: Vec<Vec<(usize, usize)>>,
    pub accepting: Vec<bool>,
}

impl Dfa {
    pub fn len(&self) -> usize {
        self.accepting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepting.is_empty()
    }

    pub fn step(&self, s: usize, letter: usize) -> Option<usize> {
        self.delta[s].iter().find(|(l, _)| *l == letter).map(|(_, t)| *t)
    }

    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([self.init]);
        let mut stack = vec![self.init];
        while let Some(x) = stack.pop() {
            for &(_, t) in &self.delta[x] {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Total transition table with a fresh rejecting sink at index `len()`.
    fn completed(&self) -> (Vec<Vec<usize>>, Vec<bool>) {
        let sink = self.len();
        let mut table = vec![vec![sink; self.letters]; sink + 1];
        for (s, out) in self.delta.iter().enumerate() {
            for &(l, t) in out {
                table[s][l] = t;
            }
        }
        let mut acc = self.accepting.clone();
        acc.push(false);
        (table, acc)
    }

    /// Myhill-Nerode class of every state of the completed automaton
    /// (the sink is the last entry).
    pub fn nerode_classes(&self) -> Vec<usize> {
        let (table, acc) = self.completed();
        let mut class: Vec<usize> = acc.iter().map(|&a| a as usize).collect();
        loop {
            let sigs: Vec<(usize, Vec<usize>)> =
                table.iter().enumerate().map(|(s, row)| (class[s], row.iter().map(|&t| class[t]).collect())).collect();
            let distinct: BTreeSet<&(usize, Vec<usize>)> = sigs.iter().collect();
            let ids: Vec<&(usize, Vec<usize>)> = distinct.into_iter().collect();
            let next: Vec<usize> = sigs.iter().map(|s| ids.binary_search(&s).unwrap()).collect();
            let before = class.iter().collect::<BTreeSet<_>>().len();
            class = next;
            if ids.len() == before {
                return class;
            }
        }
    }
}

/// Verdicts from acceptance and reachability, per state.
pub fn verdict_annotate(d: &Dfa) -> Vec<Verdict> {
    let n = d.len();
    let mut reach = vec![vec![false; n]; n];
    for (s, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![s];
        row[s] = true;
        while let Some(x) = stack.pop() {
            for &(_, t) in &d.delta[x] {
                if !row[t] {
                    row[t] = true;
                    stack.push(t);
                }
            }
        }
    }
    (0..n)
        .map(|s| {
            let all_acc = (0..n).filter(|&t| reach[s][t]).all(|t| d.accepting[t]);
            let any_acc = (0..n).filter(|&t| reach[s][t]).any(|t| d.accepting[t]);
            match (d.accepting[s], all_acc, any_acc) {
                (true, true, _) => Verdict::Top,
                (true, false, _) => Verdict::TopC,
                (false, _, true) => Verdict::BotC,
                (false, _, false) => Verdict::Bot,
            }
        })
        .collect()
}

/// No reachable state carries the verdict `⊥c`.
pub fn is_safety(o: &Oracle) -> bool {
    o.reachable_from(o.initial).iter().all(|&s| o.verdict(s) != Verdict::BotC)
}

/// In the minimal acceptance automaton, reading any letter twice lands where
/// reading it once does, from every reachable state.
pub fn is_stutter_invariant(o: &Oracle) -> bool {
    let d = o.dfa();
    let class = d.nerode_classes();
    let (table, _) = d.completed();
    d.reachable().into_iter().all(|q| {
        (0..d.letters).all(|e| {
            let once = table[q][e];
            class[table[once][e]] == class[once]
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enforceability {
    Finite(usize),
    Infinite,
}

impl Serialize for Enforceability {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Enforceability::Finite(k) => s.serialize_u64(*k as u64),
            Enforceability::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl fmt::Display for Enforceability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Enforceability::Finite(k) => write!(f, "{k}"),
            Enforceability::Infinite => f.write_str("infinite"),
        }
    }
}

/// Smallest `k` exceeding the longest run of `⊥c` states entered from a `⊤c` state.
pub fn enforceability_k(o: &Oracle) -> Enforceability {
    let reach = o.reachable_from(o.initial);
    let botc = |s: usize| o.verdict(s) == Verdict::BotC;
    // longest chain of ⊥c states starting at s, or None on a cycle
    let n = o.states.len();
    let mut memo: Vec<Option<usize>> = vec![None; n];
    let mut on_stack = vec![false; n];
    fn longest(
        o: &Oracle,
        s: usize,
        botc: &dyn Fn(usize) -> bool,
        memo: &mut [Option<usize>],
        on_stack: &mut [bool],
    ) -> Option<usize> {
        if let Some(m) = memo[s] {
            return Some(m);
        }
        if on_stack[s] {
            return None;
        }
        on_stack[s] = true;
        let mut best = 1;
        for &(_, t) in &o.delta[s] {
            if botc(t) {
                best = best.max(1 + longest(o, t, botc, memo, on_stack)?);
            }
        }
        on_stack[s] = false;
        memo[s] = Some(best);
        Some(best)
    }
    let mut m = 0;
    for &q in &reach {
        if o.verdict(q) != Verdict::TopC {
            continue;
        }
        for &(_, t) in &o.delta[q] {
            if botc(t) {
                match longest(o, t, &botc, &mut memo, &mut on_stack) {
                    Some(l) => m = m.max(l),
                    None => return Enforceability::Infinite,
                }
            }
        }
    }
    Enforceability::Finite(m + 1)
}

/// The three checks gating the enforcement pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub safety: bool,
    pub stutter_invariant: bool,
    pub k: Enforceability,
}

impl Classification {
    pub fn eligible(&self) -> bool {
        self.safety && self.stutter_invariant && self.k == Enforceability::Finite(1)
    }

    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if !self.safety {
            f.push("safety");
        }
        if !self.stutter_invariant {
            f.push("stutter-invariance");
        }
        if self.k != Enforceability::Finite(1) {
            f.push("1-step enforceability");
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::property::{Oracle, OracleDef, StateDef, TransitionDef};

    fn oracle(states: &[(&str, bool)], edges: &[(&str, &str, &str)]) -> Oracle {
        Oracle::from_def(OracleDef {
            states: states.iter().map(|(n, a)| StateDef::accepting(n, *a)).collect(),
            initial: states[0].0.into(),
            transitions: edges.iter().map(|(f, e, t)| TransitionDef::new(f, e, t)).collect(),
        })
        .unwrap()
    }

    const A: &str = "c.x = 0";
    const B: &str = "c.x = 1";

    #[test]
    fn single_accepting_loop() {
        let o = oracle(&[("s", true)], &[("s", A, "s")]);
        assert_eq!(o.verdict(0), Verdict::Top);
        let c = o.classify();
        assert!(c.safety && c.stutter_invariant);
        assert_eq!(c.k, Enforceability::Finite(1));
    }

    #[test]
    fn sign_oracle_is_safe_and_stutter_invariant() {
        let o = crate::property::tests::sign_oracle();
        assert!(is_safety(&o));
        assert!(is_stutter_invariant(&o));
        assert_eq!(enforceability_k(&o), Enforceability::Finite(1));
    }

    #[test]
    fn parity_is_not_stutter_invariant() {
        let o = oracle(&[("even", true), ("odd", false)], &[("even", A, "odd"), ("odd", A, "even")]);
        assert!(!is_stutter_invariant(&o));
        assert!(!is_safety(&o));
    }

    #[test]
    fn accepting_only_ab_is_not_safety() {
        let o = oracle(
            &[("s0", true), ("s1", false), ("s2", true), ("sink", false)],
            &[("s0", A, "s1"), ("s0", B, "sink"), ("s1", B, "s2"), ("s1", A, "sink"), ("s2", A, "sink"), ("s2", B, "sink"), ("sink", A, "sink"), ("sink", B, "sink")],
        );
        assert!(!is_safety(&o));
    }

    #[test]
    fn one_botc_between_topc_gives_two() {
        // a leaves the good state, a second a returns, b from the excursion is fatal
        let o = oracle(
            &[("g", true), ("x", false), ("dead", false)],
            &[("g", A, "x"), ("g", B, "g"), ("x", A, "g"), ("x", B, "dead"), ("dead", A, "dead"), ("dead", B, "dead")],
        );
        assert_eq!(o.verdict(1), Verdict::BotC);
        assert_eq!(enforceability_k(&o), Enforceability::Finite(2));
    }

    #[test]
    fn botc_loop_is_infinite() {
        let o = oracle(&[("g", true), ("x", false)], &[("g", A, "x"), ("x", A, "x"), ("x", B, "g"), ("g", B, "g")]);
        assert_eq!(enforceability_k(&o), Enforceability::Infinite);
    }

    #[test]
    fn accepting_into_sink_is_topc() {
        let o = oracle(&[("s", true), ("k", false)], &[("s", A, "k"), ("k", A, "k")]);
        assert_eq!(o.verdict(0), Verdict::TopC);
        assert_eq!(o.verdict(1), Verdict::Bot);
    }
}
