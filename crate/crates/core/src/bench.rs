//! Benchmark generators: dining philosophers with a counter, and robots on a grid.

use thiserror::Error;

use crate::model::{parse_assignment, parse_expr, AtomicComponent, Connector, System, Transition, Value};
use crate::property::{Output, OracleDef, StateDef, TransitionDef};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid benchmark: {0}")]
pub struct BenchError(pub String);

/// A generated model together with its safety oracle.
#[derive(Clone, Debug)]
pub struct Bench {
    pub system: System,
    pub oracle: OracleDef,
}

fn t(from: &str, port: &str, to: &str, guard: Option<&str>, actions: &[&str]) -> Transition {
    let mut tr = Transition::new(from, port, to)
        .with_actions(actions.iter().map(|a| parse_assignment(a).expect("well-formed update")).collect());
    if let Some(g) = guard {
        tr = tr.guarded(parse_expr(g).expect("well-formed guard"));
    }
    tr
}

/// Two-state oracle: stays in `s` while `ok` holds, moves to the sink `bad`
/// on `bad`.
fn invariant_oracle(ok: &str, bad: &str) -> OracleDef {
    OracleDef {
        states: vec![StateDef { name: "s".into(), verdict: None, accepting: None }, StateDef { name: "bad".into(), verdict: None, accepting: None }],
        initial: "s".into(),
        transitions: vec![
            TransitionDef::new("s", ok, "s").output(Output::PossiblyGood),
            TransitionDef::new("s", bad, "bad").output(Output::Bad),
            TransitionDef::new("bad", ok, "bad"),
            TransitionDef::new("bad", bad, "bad"),
        ],
    }
}

/// `n` philosophers taking the right fork then the left one, `n` forks and a
/// counter joining the first philosopher's right-fork interaction. The oracle
/// rejects every philosopher holding exactly its right fork.
pub fn philosophers(n: usize) -> Result<Bench, BenchError> {
    if n < 2 {
        return Err(BenchError(format!("philosophers need n >= 2, got {n}")));
    }
    let mut sys = System::default();
    for i in 0..n {
        let mut p = AtomicComponent::new(&format!("p{i}"), "init");
        for port in ["right", "left", "release"] {
            p.add_port(port, &[]);
        }
        p.add_transition(Transition::new("init", "right", "r"));
        p.add_transition(Transition::new("r", "left", "rl"));
        p.add_transition(Transition::new("rl", "release", "init"));
        sys.components.push(p);
    }
    for i in 0..n {
        let mut f = AtomicComponent::new(&format!("f{i}"), "init");
        f.add_port("get", &[]);
        f.add_port("release", &[]);
        f.add_transition(Transition::new("init", "get", "busy"));
        f.add_transition(Transition::new("busy", "release", "init"));
        sys.components.push(f);
    }
    let mut c = AtomicComponent::new("c0", "init");
    c.add_var("x", Value::Int(0));
    c.add_port("count", &[]);
    c.add_port("reset", &[]);
    c.add_transition(t("init", "count", "init", Some("x < 2"), &["x := x + 1"]));
    c.add_transition(t("init", "reset", "init", Some("x >= 2"), &["x := 0"]));
    sys.components.push(c);

    for i in 0..n {
        let (p, f) = (format!("p{i}"), format!("f{i}"));
        let mut ports = vec![(p.as_str(), "right"), (f.as_str(), "get")];
        if i == 0 {
            ports.push(("c0", "count"));
        }
        sys.connectors.push(Connector::rendezvous(&format!("right{i}"), &ports));
    }
    for i in 0..n {
        let (p, f) = (format!("p{i}"), format!("f{}", (i + 1) % n));
        sys.connectors.push(Connector::rendezvous(&format!("left{i}"), &[(&p, "left"), (&f, "get")]));
    }
    for i in 0..n {
        let (p, f, g) = (format!("p{i}"), format!("f{i}"), format!("f{}", (i + 1) % n));
        sys.connectors
            .push(Connector::rendezvous(&format!("release{i}"), &[(&p, "release"), (&f, "release"), (&g, "release")]));
    }
    sys.connectors.push(Connector::rendezvous("reset", &[("c0", "reset")]));

    let all_r: Vec<String> = (0..n).map(|i| format!("p{i}.loc = \"r\"")).collect();
    let bad = all_r.join(" && ");
    Ok(Bench { system: sys, oracle: invariant_oracle(&format!("!({bad})"), &bad) })
}

/// `k` robots moving on a `grid`×`grid` map, each started and stopped by a
/// local controller, with a global controller counting active robots. A
/// started robot makes `steps` moves before it may stop. The oracle rejects
/// two robots on the same cell.
pub fn robots(k: usize, grid: usize, steps: u32) -> Result<Bench, BenchError> {
    if k < 2 {
        return Err(BenchError(format!("robots need at least 2 robots, got {k}")));
    }
    if grid < 2 {
        return Err(BenchError(format!("robots need a grid of size >= 2, got {grid}")));
    }
    if k >= grid * grid {
        return Err(BenchError(format!("{k} robots leave no free cell on a {grid}x{grid} grid")));
    }
    let last = grid - 1;
    let mut sys = System::default();
    for i in 1..=k {
        let mut r = AtomicComponent::new(&format!("R{i}"), "idle");
        let cell = i - 1;
        r.add_var("x", Value::Int((cell % grid) as i64));
        r.add_var("y", Value::Int((cell / grid) as i64));
        r.add_var("steps", Value::Int(0));
        for p in ["start", "up", "down", "left", "right", "stop"] {
            r.add_port(p, &[]);
        }
        let budget = format!("steps < {steps}");
        r.add_transition(t("idle", "start", "moving", None, &["steps := 0"]));
        r.add_transition(t("moving", "up", "moving", Some(&format!("y < {last} && {budget}")), &["y := y + 1", "steps := steps + 1"]));
        r.add_transition(t("moving", "down", "moving", Some(&format!("y > 0 && {budget}")), &["y := y - 1", "steps := steps + 1"]));
        r.add_transition(t("moving", "left", "moving", Some(&format!("x > 0 && {budget}")), &["x := x - 1", "steps := steps + 1"]));
        r.add_transition(t("moving", "right", "moving", Some(&format!("x < {last} && {budget}")), &["x := x + 1", "steps := steps + 1"]));
        r.add_transition(t("moving", "stop", "idle", Some(&format!("steps >= {steps}")), &[]));
        sys.components.push(r);
    }
    for i in 1..=k {
        let mut c = AtomicComponent::new(&format!("C{i}"), "off");
        c.add_port("start", &[]);
        c.add_port("stop", &[]);
        c.add_transition(Transition::new("off", "start", "on"));
        c.add_transition(Transition::new("on", "stop", "off"));
        sys.components.push(c);
    }
    let mut g = AtomicComponent::new("C", "l");
    g.add_var("active", Value::Int(0));
    g.add_port("inc", &[]);
    g.add_port("dec", &[]);
    g.add_transition(t("l", "inc", "l", None, &["active := active + 1"]));
    g.add_transition(t("l", "dec", "l", None, &["active := active - 1"]));
    sys.components.push(g);

    for i in 1..=k {
        let (r, c) = (format!("R{i}"), format!("C{i}"));
        sys.connectors.push(Connector::rendezvous(&format!("start{i}"), &[(&r, "start"), (&c, "start"), ("C", "inc")]));
        for m in ["up", "down", "left", "right"] {
            sys.connectors.push(Connector::rendezvous(&format!("{m}{i}"), &[(&r, m)]));
        }
        sys.connectors.push(Connector::rendezvous(&format!("stop{i}"), &[(&r, "stop"), (&c, "stop"), ("C", "dec")]));
    }

    let mut apart = Vec::new();
    for i in 1..=k {
        for j in i + 1..=k {
            apart.push(format!("(R{i}.x != R{j}.x || R{i}.y != R{j}.y)"));
        }
    }
    let ok = apart.join(" && ");
    Ok(Bench { system: sys, oracle: invariant_oracle(&ok, &format!("!({ok})")) })
}
