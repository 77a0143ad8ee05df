//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use bip_enforce::enforce::Lts;
use bip_enforce::model::{parse_assignment, AtomicComponent, Connector, System, Transition, Value};
use bip_enforce::property::{Oracle, OracleDef, StateDef, TransitionDef, Verdict};
use bip_enforce::semantics::Engine;
use bip_enforce::transform::{supervise, SuperviseOptions, Supervised};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn oracle(states: &[(&str, bool)], edges: &[(&str, &str, &str)]) -> Oracle {
    Oracle::from_def(OracleDef {
        states: states.iter().map(|(n, a)| StateDef::accepting(n, *a)).collect(),
        initial: states[0].0.into(),
        transitions: edges.iter().map(|(f, e, t)| TransitionDef::new(f, e, t)).collect(),
    })
    .unwrap()
}

/// State reached on `word` (letter indices), if every letter has a transition.
fn run(o: &Oracle, word: &[usize]) -> Option<usize> {
    let mut s = o.initial;
    for &l in word {
        s = o.delta[s].iter().find(|(e, _)| *e == l)?.1;
    }
    Some(s)
}

fn member(o: &Oracle, word: &[usize]) -> bool {
    run(o, word).is_some_and(|s| o.states[s].accepting)
}

/// Every word over `letters` letters of length at most `len`.
pub fn words(letters: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &layer {
            for l in 0..letters {
                let mut v: Vec<usize> = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Four-valued evaluation from membership alone, looking `horizon` letters ahead.
pub fn b4(o: &Oracle, word: &[usize], horizon: usize) -> Verdict {
    let exts = words(o.alphabet.len(), horizon);
    let with = |u: &Vec<usize>| {
        let mut w = word.to_vec();
        w.extend(u);
        member(o, &w)
    };
    let inside = member(o, word);
    match (inside, exts.iter().all(with), exts.iter().any(with)) {
        (true, true, _) => Verdict::Top,
        (true, false, _) => Verdict::TopC,
        (false, _, true) => Verdict::BotC,
        (false, _, false) => Verdict::Bot,
    }
}

/// Smallest `k` by enumeration: one more than the longest factor whose every
/// nonempty prefix keeps a `⊤c` word at `⊥c`, over words of length `len`.
pub fn k_brute(o: &Oracle, len: usize, horizon: usize) -> usize {
    let letters = o.alphabet.len();
    let mut best = 0;
    for w in words(letters, len) {
        if b4(o, &w, horizon) != Verdict::TopC {
            continue;
        }
        for s in words(letters, len - w.len()).into_iter().filter(|s| !s.is_empty()) {
            let all_botc = (1..=s.len()).all(|i| {
                let mut v = w.clone();
                v.extend(&s[..i]);
                b4(o, &v, horizon) == Verdict::BotC
            });
            if all_botc {
                best = best.max(s.len());
            }
        }
    }
    best + 1
}

pub const LETTERS: [&str; 3] = ["c.x = 0", "c.x = 1", "c.x = 2"];

/// A safety oracle: `good` accepting states and a rejecting sink, random
/// edges per letter.
pub fn random_safety_oracle(rng: &mut ChaCha8Rng, letters: usize) -> Oracle {
    let good = rng.gen_range(1..=5);
    let mut states: Vec<(String, bool)> = (0..good).map(|i| (format!("g{i}"), true)).collect();
    states.push(("sink".into(), false));
    let mut edges = Vec::new();
    for i in 0..good {
        for l in LETTERS.iter().take(letters) {
            let t = rng.gen_range(0..=good);
            edges.push((format!("g{i}"), l.to_string(), states[t].0.clone()));
        }
    }
    for l in LETTERS.iter().take(letters) {
        edges.push(("sink".into(), l.to_string(), "sink".into()));
    }
    let st: Vec<(&str, bool)> = states.iter().map(|(n, a)| (n.as_str(), *a)).collect();
    let ed: Vec<(&str, &str, &str)> = edges.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
    oracle(&st, &ed)
}

/// A random LTS over the oracle letters plus an unmonitored `tau`.
pub fn random_lts(rng: &mut ChaCha8Rng, letters: usize) -> Lts {
    let n = rng.gen_range(1..=6);
    let mut l = Lts::new(n, 0);
    for s in 0..n {
        for _ in 0..rng.gen_range(1..=3) {
            let label = if rng.gen_bool(0.15) { "tau" } else { LETTERS[rng.gen_range(0..letters)] };
            l.add(s, label, rng.gen_range(0..n));
        }
    }
    l
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One component `c` with `x = 0` and a self-loop `inc` doing `x := x + 1`;
/// the property asks for `x = 0`, so every step is bad.
pub fn always_bad() -> (System, Oracle) {
    let mut c = AtomicComponent::new("c", "l");
    c.add_var("x", Value::Int(0));
    c.add_port("inc", &[]);
    c.add_transition(Transition::new("l", "inc", "l").with_actions(vec![parse_assignment("x := x + 1").unwrap()]));
    let mut sys = System::default();
    sys.components.push(c);
    sys.connectors.push(Connector::rendezvous("inc", &[("c", "inc")]));
    let o = oracle(&[("ok", true), ("bad", false)], &[("ok", "c.x = 0", "ok"), ("ok", "c.x != 0", "bad"), ("bad", "c.x = 0", "bad"), ("bad", "c.x != 0", "bad")]);
    (sys, o)
}

/// `a0` sets `x := 1` (bad) and outranks `a1`, which keeps `x := 0` (good).
pub fn priority_inversion() -> (System, Oracle) {
    let mut c = AtomicComponent::new("c", "l");
    c.add_var("x", Value::Int(0));
    c.add_port("a0", &[]);
    c.add_port("a1", &[]);
    c.add_transition(Transition::new("l", "a0", "l").with_actions(vec![parse_assignment("x := 1").unwrap()]));
    c.add_transition(Transition::new("l", "a1", "l").with_actions(vec![parse_assignment("x := 0").unwrap()]));
    let mut sys = System::default();
    sys.components.push(c);
    sys.connectors.push(Connector::rendezvous("a0", &[("c", "a0")]));
    sys.connectors.push(Connector::rendezvous("a1", &[("c", "a1")]));
    sys.add_priority("a1", "a0");
    let o = oracle(&[("ok", true), ("bad", false)], &[("ok", "c.x = 0", "ok"), ("ok", "c.x != 0", "bad"), ("bad", "c.x = 0", "bad"), ("bad", "c.x != 0", "bad")]);
    (sys, o)
}

pub struct Setup {
    pub sup: Supervised,
    pub engine: Engine,
    pub original: Engine,
}

pub fn setup(sys: &System, o: &Oracle, disabler: bool) -> Setup {
    let sup = supervise(sys, o, SuperviseOptions { disabler, ..Default::default() }).unwrap();
    let engine = Engine::new(sup.system.clone()).unwrap();
    let original = Engine::new(sys.clone()).unwrap();
    Setup { sup, engine, original }
}

/// A complete random automaton with `n` states and random acceptance.
pub fn random_dfa(rng: &mut ChaCha8Rng, n: usize, letters: usize) -> Oracle {
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let st: Vec<(&str, bool)> = names.iter().map(|s| (s.as_str(), rng.gen_bool(0.6))).collect();
    let mut edges = Vec::new();
    for s in &names {
        for l in LETTERS.iter().take(letters) {
            edges.push((s.as_str(), *l, names[rng.gen_range(0..n)].as_str()));
        }
    }
    oracle(&st, &edges)
}
