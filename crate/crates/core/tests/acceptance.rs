//! Acceptance criteria, one pass/fail line each.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use bip_enforce::bench::{philosophers, robots};
use bip_enforce::enforce::check_em_soundness;
use bip_enforce::property::{Enforceability, Oracle};
use bip_enforce::runner::{run_plain, run_supervised, RunOptions, Summary, Supervision};
use bip_enforce::semantics::{explore, simulate, Engine, Scheduler, SchedulerPolicy};
use bip_enforce::transform::{check_completeness, check_propositions, Projector, StepKind};
use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bench_oracle(b: &bip_enforce::bench::Bench) -> Oracle {
    Oracle::from_def(b.oracle.clone()).unwrap()
}

fn c1_deadlock_reachability() -> Outcome {
    let b = philosophers(2).unwrap();
    let e = Engine::new(b.system.clone()).unwrap();
    let g = explore(&e, 10_000).map_err(|x| x.to_string())?;
    let both_r = |i: usize| {
        let locs = e.locations(&g.states[i]);
        locs[0] == "r" && locs[1] == "r"
    };
    let d = g.deadlocks.iter().copied().find(|&i| both_r(i)).ok_or("no both-at-r deadlock")?;
    ensure(g.depth[d] == 2, format!("deadlock at depth {}", g.depth[d]))?;
    let opts = RunOptions { policy: SchedulerPolicy::Lexicographic, max_steps: 100, correct_steps: None };
    let s = run_plain(&e, None, &opts, None).map_err(|x| x.to_string())?;
    ensure(s.deadlock && s.steps <= 4, format!("lexicographic run: deadlock={} after {} steps", s.deadlock, s.steps))?;
    Ok(format!("deadlock at depth 2, lexicographic run deadlocks after {} steps", s.steps))
}

fn c2_supervised_deadlock_freedom() -> Outcome {
    let mut notes = Vec::new();
    for n in [2, 10, 50] {
        let b = philosophers(n).unwrap();
        let o = bench_oracle(&b);
        let s = setup(&b.system, &o, false);
        let sv = Supervision { original: &s.original, info: &s.sup.info, oracle: Some(&o) };
        let mut releases = 0usize;
        let opts = RunOptions { policy: SchedulerPolicy::Random(n as u64), max_steps: usize::MAX, correct_steps: None };
        let t = Instant::now();
        let sum = run_supervised(&s.engine, &sv, &opts, None, |st| {
            if st.kind != StepKind::Recover && st.ports.iter().any(|p| p.ends_with(".release")) {
                releases += 1;
            }
            releases >= 10_000
        })
        .map_err(|x| x.to_string())?;
        ensure(!sum.deadlock, format!("n={n}: deadlock"))?;
        ensure(sum.violations == 0, format!("n={n}: {} bad stable configurations", sum.violations))?;
        ensure(releases >= 10_000, format!("n={n}: only {releases} releases"))?;
        notes.push(format!("n={n}: {} rollbacks, {:.1}s", sum.rollbacks, t.elapsed().as_secs_f64()));
    }
    Ok(format!("10000 releases without deadlock or violation ({})", notes.join("; ")))
}

const GOLDEN: [(&str, [&str; 6]); 11] = [
    ("", ["init0", "init0", "init", "init", "init", "init"]),
    ("p0.pm p1.pm monitor.pm", ["init", "init", "init", "init", "init", "s'"]),
    ("p0.right f0.get c0.count", ["r'", "init", "busy'", "init", "init'", "s'"]),
    ("p0.pm f0.pm c0.pm monitor.pm", ["r''", "init", "busy''", "init", "init''", "s"]),
    ("p0.pc f0.pc c0.pc monitor.pc", ["r", "init", "busy", "init", "init", "s'"]),
    ("p1.right f1.get", ["r", "r'", "busy", "busy'", "init", "s'"]),
    ("p1.pm f1.pm monitor.pm", ["r", "r''", "busy", "busy''", "init", "s"]),
    ("p1.pr f1.pr monitor.pr", ["r", "init", "busy", "init", "init", "s'"]),
    ("p0.left f1.get", ["rl'", "init", "busy", "busy'", "init", "s'"]),
    ("p0.pm f1.pm monitor.pm", ["rl''", "init", "busy", "busy''", "init", "s"]),
    ("p0.pc f1.pc monitor.pc", ["rl", "init", "busy", "busy", "init", "s'"]),
];

/// Table notation to generated names: primes mark the intermediate
/// locations; the monitor waits in `s'` and decides in `s`.
fn generated(comp: &str, table: &str) -> String {
    if comp == "monitor" {
        return match table {
            "init" => "s__init0".into(),
            "s'" => "s".into(),
            _ => "s__m".into(),
        };
    }
    if let Some(b) = table.strip_suffix("''") {
        format!("{b}__r")
    } else if let Some(b) = table.strip_suffix('\'') {
        format!("{b}__m")
    } else if table == "init0" {
        "init__init0".into()
    } else {
        table.into()
    }
}

fn c3_golden_trace() -> Outcome {
    let b = philosophers(2).unwrap();
    let o = bench_oracle(&b);
    let s = setup(&b.system, &o, false);
    let script: Vec<BTreeSet<String>> =
        GOLDEN[1..].iter().map(|(p, _)| p.split(' ').map(String::from).collect()).collect();
    let run = simulate(&s.engine, SchedulerPolicy::Scripted(script), 10, None).map_err(|x| x.to_string())?;
    ensure(run.len() == 10, format!("run stopped after {} steps", run.len()))?;
    let cols = ["p0", "p1", "f0", "f1", "c0", "monitor"];
    for (row, (ports, locs)) in GOLDEN.iter().enumerate() {
        if row > 0 {
            let got: BTreeSet<String> = s.engine.port_names(&run.interactions[row - 1]).into_iter().collect();
            let want: BTreeSet<String> = ports.split(' ').map(String::from).collect();
            ensure(got == want, format!("row {row}: interaction {got:?}"))?;
        }
        for (c, t) in cols.iter().zip(locs) {
            let ci = s.engine.component_index(c).unwrap();
            let l = s.engine.location_name(ci, run.configs[row].locals[ci as usize].loc);
            ensure(l == generated(c, t), format!("row {row}: {c} at {l}, expected {t}"))?;
        }
    }
    let pj = Projector::new(&s.original, &s.engine, &s.sup.info).map_err(|x| x.to_string())?;
    let init = s.original.initial();
    ensure(pj.erase(&run.configs[7], &init, &[]) == pj.erase(&run.configs[4], &init, &[]), "recovery did not restore row 4")?;
    Ok("rows 1-10 match; the recovery at row 7 restores row 4".into())
}

fn c4_abstract_proposition() -> Outcome {
    let mut r = rng(2024);
    let mut traces = 0;
    let pairs = 40;
    for i in 0..pairs {
        let letters = 2 + i % 2;
        let o = random_safety_oracle(&mut r, letters);
        let lts = random_lts(&mut r, letters);
        let rep = check_em_soundness(&lts, &o, 6).map_err(|x| x.to_string())?;
        ensure(rep.passed(), format!("pair {i}: counterexample {:?}", rep.counterexample))?;
        traces += rep.traces_checked;
    }
    Ok(format!("{pairs} random pairs, {traces} composed traces up to length 6, no counterexample"))
}

fn c5_bip_propositions() -> Outcome {
    let mut notes = Vec::new();
    let cases = [("philosophers 2", philosophers(2).unwrap()), ("robots 2 on 2x2", robots(2, 2, 2).unwrap())];
    for (name, b) in cases {
        let o = bench_oracle(&b);
        for disabler in [false, true] {
            let s = setup(&b.system, &o, disabler);
            let rep = check_propositions(&s.original, &s.engine, &s.sup.info, &o, 2_000_000).map_err(|x| x.to_string())?;
            ensure(!rep.truncated, format!("{name}: exploration truncated"))?;
            ensure(rep.ok(), format!("{name} (disabler={disabler}): {:?}", rep.violations.first()))?;
            let comp = check_completeness(&s.original, &s.engine, &s.sup.info, &o, 6).map_err(|x| x.to_string())?;
            ensure(comp.ok(), format!("{name}: completeness {:?}", comp.failures.first()))?;
            notes.push(format!("{name}{}: {} states", if disabler { " +disabler" } else { "" }, rep.states));
        }
    }
    Ok(notes.join("; "))
}

fn c6_classification() -> Outcome {
    for b in [philosophers(2).unwrap(), philosophers(5).unwrap(), robots(2, 2, 2).unwrap(), robots(3, 5, 10).unwrap()] {
        let c = bench_oracle(&b).classify();
        ensure(c.k == Enforceability::Finite(1) && c.eligible(), format!("generated oracle classified {c:?}"))?;
    }
    let a = "c.x = 0";
    let parity = oracle(&[("even", true), ("odd", false)], &[("even", a, "odd"), ("odd", a, "even")]);
    let pc = parity.classify();
    ensure(!pc.stutter_invariant && !pc.eligible(), "parity accepted")?;
    let b = "c.x = 1";
    let two = oracle(
        &[("g", true), ("x", false), ("dead", false)],
        &[("g", a, "x"), ("g", b, "g"), ("x", a, "g"), ("x", b, "dead"), ("dead", a, "dead"), ("dead", b, "dead")],
    );
    let k = two.classify().k;
    let brute = k_brute(&two, 6, 4);
    ensure(k == Enforceability::Finite(2) && brute == 2, format!("k={k}, brute force {brute}"))?;
    Ok("generated oracles k=1; parity rejected; one-⊥c property k=2 (brute force agrees)".into())
}

fn c7_disabler() -> Outcome {
    // recovered interactions stay disabled until the next continue
    let b = philosophers(3).unwrap();
    let o = bench_oracle(&b);
    let s = setup(&b.system, &o, true);
    let pj = Projector::new(&s.original, &s.engine, &s.sup.info).map_err(|x| x.to_string())?;
    let mut checked = 0;
    for seed in 0..10 {
        let mut sched = Scheduler::new(SchedulerPolicy::Random(seed));
        let mut q = s.engine.initial();
        let mut st = pj.start(&q);
        let mut blocked: Vec<Vec<String>> = Vec::new();
        for _ in 0..3_000 {
            let en = s.engine.enabled_interactions(&q).map_err(|x| x.to_string())?;
            for a in en.iter().filter(|a| pj.family(a).is_none()) {
                let ports = pj.port_labels(&pj.original_ports(a));
                ensure(!blocked.contains(&ports), format!("seed {seed}: {ports:?} enabled again before a continue"))?;
                checked += 1;
            }
            if en.is_empty() {
                return Err(format!("seed {seed}: deadlock"));
            }
            let a = en[sched.choose(&s.engine, &en).unwrap()].clone();
            let next = s.engine.fire(&q, &a).map_err(|x| x.to_string())?;
            if let Some(step) = pj.feed(&mut st, &a, &next, 0).map_err(|x| x.to_string())? {
                match step.kind {
                    StepKind::Recover => blocked.push(step.ports),
                    StepKind::Continue => blocked.clear(),
                    StepKind::Step => {}
                }
            }
            q = next;
        }
    }
    // priority inversion
    let (sys, o) = priority_inversion();
    let reaches = |disabler: bool| -> Result<bool, String> {
        let s = setup(&sys, &o, disabler);
        let sv = Supervision { original: &s.original, info: &s.sup.info, oracle: Some(&o) };
        let opts = RunOptions { policy: SchedulerPolicy::Random(1), max_steps: 200, correct_steps: None };
        let mut hit = false;
        run_supervised(&s.engine, &sv, &opts, None, |st| {
            hit |= st.kind != StepKind::Recover && st.ports == ["c.a1"];
            hit
        })
        .map_err(|x| x.to_string())?;
        Ok(hit)
    };
    let (spin, dis) = (reaches(false)?, reaches(true)?);
    ensure(!spin && dis, format!("a1 reached: spin={spin}, disabler={dis}"))?;
    Ok(format!("{checked} enabled-set checks after recoveries; a1 reached only with the disabler"))
}

fn robots_run(disabler: bool, seed: u64, correct: usize) -> Result<Summary, String> {
    let b = robots(3, 2, 1000).unwrap();
    let o = bench_oracle(&b);
    let s = setup(&b.system, &o, disabler);
    let sv = Supervision { original: &s.original, info: &s.sup.info, oracle: Some(&o) };
    let opts = RunOptions { policy: SchedulerPolicy::Random(seed), max_steps: 1_000_000, correct_steps: Some(correct) };
    run_supervised(&s.engine, &sv, &opts, None, |_| false).map_err(|x| x.to_string())
}

fn c8_robots() -> Outcome {
    let mut wins = 0;
    let mut counts = Vec::new();
    for seed in 0..10 {
        let spin = robots_run(false, seed, 1_000)?;
        let dis = robots_run(true, seed, 1_000)?;
        for (m, s) in [("spin", &spin), ("disabler", &dis)] {
            ensure(s.correct_steps >= 1_000, format!("seed {seed} {m}: {} correct steps, terminal {}", s.correct_steps, s.terminal))?;
            ensure(s.violations == 0, format!("seed {seed} {m}: {} collisions", s.violations))?;
            ensure(s.rollbacks > 0, format!("seed {seed} {m}: no rollback"))?;
        }
        if dis.rollbacks <= spin.rollbacks {
            wins += 1;
        }
        counts.push(format!("{}/{}", dis.rollbacks, spin.rollbacks));
    }
    ensure(wins >= 7, format!("disabler rolled back no more than spin in only {wins}/10 seeds ({})", counts.join(" ")))?;
    Ok(format!("no collisions; disabler/spin rollbacks {}; disabler fewer-or-equal in {wins}/10", counts.join(" ")))
}

fn c9_livelock_deadlock() -> Outcome {
    let (sys, o) = always_bad();
    let mut out = Vec::new();
    for disabler in [false, true] {
        let s = setup(&sys, &o, disabler);
        let sv = Supervision { original: &s.original, info: &s.sup.info, oracle: Some(&o) };
        let opts = RunOptions { policy: SchedulerPolicy::Random(0), max_steps: 1_000, correct_steps: None };
        let sum = run_supervised(&s.engine, &sv, &opts, None, |_| false).map_err(|x| x.to_string())?;
        if disabler {
            ensure(sum.deadlock && !sum.livelock, format!("disabler: deadlock={} livelock={}", sum.deadlock, sum.livelock))?;
        } else {
            ensure(sum.livelock && !sum.deadlock, format!("spin: deadlock={} livelock={}", sum.deadlock, sum.livelock))?;
        }
        out.push(format!("{} after {} steps", if disabler { "deadlock" } else { "livelock" }, sum.steps));
    }
    Ok(out.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("deadlock reachability", c1_deadlock_reachability),
        ("supervised deadlock freedom", c2_supervised_deadlock_freedom),
        ("golden trace", c3_golden_trace),
        ("abstract correctness proposition", c4_abstract_proposition),
        ("system-level propositions", c5_bip_propositions),
        ("classification", c6_classification),
        ("disabler semantics", c7_disabler),
        ("robots at desk scale", c8_robots),
        ("livelock and deadlock", c9_livelock_deadlock),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {}: PASS {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
