use std::collections::BTreeSet;

use super::*;
use crate::bench::philosophers;
use crate::semantics::{simulate, Engine, SchedulerPolicy};

fn phil2() -> (System, Oracle) {
    let b = philosophers(2).unwrap();
    (b.system, Oracle::from_def(b.oracle).unwrap())
}

/// Location names as printed in the reference table: `'` and `''` mark the
/// two intermediate locations, `init0` the pre-synchronization one, and the
/// monitor waits in `s'` and decides in `s`.
fn ours(comp: &str, table: &str) -> String {
    if comp == "monitor" {
        return match table {
            "init" => "s__init0",
            "s'" => "s",
            "s" => "s__m",
            other => panic!("unexpected monitor location {other}"),
        }
        .to_string();
    }
    if let Some(base) = table.strip_suffix("''") {
        format!("{base}__r")
    } else if let Some(base) = table.strip_suffix('\'') {
        format!("{base}__m")
    } else if table == "init0" {
        "init__init0".to_string()
    } else {
        table.to_string()
    }
}

const COLUMNS: [&str; 6] = ["p0", "p1", "f0", "f1", "c0", "monitor"];

const TABLE: [(&str, [&str; 6]); 11] = [
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

fn script() -> Vec<BTreeSet<String>> {
    TABLE[1..].iter().map(|(ports, _)| ports.split(' ').map(String::from).collect()).collect()
}

#[test]
fn golden_trace_rows() {
    let (sys, o) = phil2();
    let sup = supervise(&sys, &o, SuperviseOptions::default()).unwrap();
    let e = Engine::new(sup.system.clone()).unwrap();
    let run = simulate(&e, SchedulerPolicy::Scripted(script()), TABLE.len() - 1, None).unwrap();
    assert_eq!(run.len(), 10);
    for (row, (ports, locs)) in TABLE.iter().enumerate() {
        if row > 0 {
            let mut got = e.port_names(&run.interactions[row - 1]);
            got.sort();
            let mut want: Vec<String> = ports.split(' ').map(String::from).collect();
            want.sort();
            assert_eq!(got, want, "row {row}");
        }
        for (comp, table) in COLUMNS.iter().zip(locs) {
            let c = e.component_index(comp).unwrap();
            let loc = e.location_name(c, run.configs[row].locals[c as usize].loc);
            assert_eq!(loc, ours(comp, table), "row {row}, component {comp}");
        }
    }
    // the recovery returns to the locations and data after row 4
    assert_eq!(e.locations(&run.configs[7]), e.locations(&run.configs[4]));
    let orig = Engine::new(sys).unwrap();
    let pj = Projector::new(&orig, &e, &sup.info).unwrap();
    let (a, b) = (pj.erase(&run.configs[7], &orig.initial(), &[]), pj.erase(&run.configs[4], &orig.initial(), &[]));
    assert_eq!(a, b);
}

#[test]
fn golden_run_projects_to_two_original_steps() {
    let (sys, o) = phil2();
    let sup = supervise(&sys, &o, SuperviseOptions::default()).unwrap();
    let e = Engine::new(sup.system.clone()).unwrap();
    let orig = Engine::new(sys).unwrap();
    let run = simulate(&e, SchedulerPolicy::Scripted(script()), 10, None).unwrap();
    let p = project_run(&orig, &e, &sup.info, &run).unwrap();
    let labels: Vec<String> = p.interactions.iter().map(|a| orig.interaction_label(a)).collect();
    assert_eq!(labels, ["p0.right,f0.get,c0.count", "p0.left,f1.get"]);
    assert_eq!(p.configs[0], orig.initial());
    assert!(is_stable(&e, &sup.info, run.last()).unwrap());
    assert!(!is_stable(&e, &sup.info, &run.configs[6]).unwrap());
}

#[test]
fn philosopher_closure_leaves_reset_alone() {
    let (sys, o) = phil2();
    let sup = supervise(&sys, &o, SuperviseOptions::default()).unwrap();
    assert!(!sup.plan.recinter.contains(&"reset".to_string()));
    assert_eq!(sup.plan.recinter.len(), 6);
    assert_eq!(sup.plan.reccomp, ["p0", "p1", "f0", "f1", "c0"]);
    assert_eq!(sup.plan.rectrans["c0"], BTreeSet::from([0]));
    // forks and the counter have no monitored field and start directly
    assert!(sup.info.components["f0"].init0.is_none());
    assert!(sup.info.components["p0"].init0.is_some());
    assert!(sup.warnings.is_empty());
}

#[test]
fn unoptimized_selection_instruments_more() {
    let b = crate::bench::robots(2, 2, 1).unwrap();
    let o = Oracle::from_def(b.oracle).unwrap();
    let opt = supervise(&b.system, &o, SuperviseOptions::default()).unwrap();
    assert_eq!(opt.plan.reccomp, ["R1", "R2"]);
    assert!(!opt.plan.recinter.contains(&"start1".to_string()));
    let all = supervise(&b.system, &o, SuperviseOptions { optimize: false, ..Default::default() }).unwrap();
    assert!(all.plan.recinter.contains(&"start1".to_string()));
    assert_eq!(all.plan.reccomp, ["R1", "R2", "C1", "C2", "C"]);
}

#[test]
fn two_philosophers_satisfy_the_propositions() {
    let (sys, o) = phil2();
    for disabler in [false, true] {
        let sup = supervise(&sys, &o, SuperviseOptions { disabler, ..Default::default() }).unwrap();
        let e = Engine::new(sup.system.clone()).unwrap();
        let orig = Engine::new(sys.clone()).unwrap();
        let r = check_propositions(&orig, &e, &sup.info, &o, 200_000).unwrap();
        assert!(!r.truncated);
        assert!(r.ok(), "disabler={disabler}: {:?}", r.violations);
        assert_eq!(r.deadlocks, 0);
        let c = check_completeness(&orig, &e, &sup.info, &o, 8).unwrap();
        assert!(c.ok(), "{:?}", c.failures);
        assert!(c.matched > 0);
    }
}

#[test]
fn missing_backup_breaks_containment() {
    let (sys, o) = phil2();
    let sup = supervise(&sys, &o, SuperviseOptions { backup: false, ..Default::default() }).unwrap();
    let e = Engine::new(sup.system.clone()).unwrap();
    let orig = Engine::new(sys).unwrap();
    let r = check_propositions(&orig, &e, &sup.info, &o, 200_000).unwrap();
    assert!(!r.holds("containment"));
    let v = r.violations.iter().find(|v| v.property == "containment").unwrap();
    assert!(!v.trace.is_empty());
}

#[test]
fn disabler_topology() {
    let (sys, o) = phil2();
    let plain = supervise(&sys, &o, SuperviseOptions::default()).unwrap();
    let dis = supervise(&sys, &o, SuperviseOptions { disabler: true, ..Default::default() }).unwrap();
    assert_eq!(dis.system.components.len(), plain.system.components.len() + 1);
    let d = dis.info.disabler.as_ref().unwrap();
    assert_eq!(d.ports.len(), dis.plan.recinter.len());
    for c in &sys.connectors {
        let before = plain.system.connector(&c.name).unwrap().ports.len();
        let after = dis.system.connector(&c.name).unwrap().ports.len();
        let extra = usize::from(dis.plan.recinter.contains(&c.name));
        assert_eq!(after, before + extra, "{}", c.name);
    }
}

#[test]
fn sidecar_round_trip() {
    let (sys, o) = phil2();
    let sup = supervise(&sys, &o, SuperviseOptions { disabler: true, ..Default::default() }).unwrap();
    let text = sup.sidecar_json(&o).to_string();
    let back = parse_sidecar(&text).unwrap();
    assert_eq!(back.info, sup.info);
    assert_eq!(back.original, sys);
    assert_eq!(back.oracle.unwrap().def(), o.def());
}

#[test]
fn parity_oracle_is_refused() {
    let (sys, _) = phil2();
    let parity = Oracle::from_def(crate::property::OracleDef {
        states: vec![
            crate::property::StateDef::accepting("even", true),
            crate::property::StateDef::accepting("odd", false),
        ],
        initial: "even".into(),
        transitions: vec![
            crate::property::TransitionDef::new("even", "c0.x = 0", "odd"),
            crate::property::TransitionDef::new("even", "!(c0.x = 0)", "even"),
            crate::property::TransitionDef::new("odd", "c0.x = 0", "even"),
            crate::property::TransitionDef::new("odd", "!(c0.x = 0)", "odd"),
        ],
    })
    .unwrap();
    assert!(matches!(supervise(&sys, &parity, SuperviseOptions::default()), Err(TransformError::Ineligible(_))));
}
