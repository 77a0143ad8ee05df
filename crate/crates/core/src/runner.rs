//! Streaming simulation of plain and supervised systems with rollback
//! accounting, deadlock and livelock detection.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;

use serde::Serialize;
use serde_json::Value as Json;
use thiserror::Error;

use crate::property::{Oracle, PropertyError};
use crate::semantics::{trace_record, Engine, GlobalConfig, Interaction, Scheduler, SchedulerPolicy, SemanticsError, Terminal};
use crate::transform::{Family, ProjectedStep, ProjectionError, Projector, StepKind, SupervisionInfo};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("writing trace: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub policy: SchedulerPolicy,
    pub max_steps: usize,
    /// stop after this many decided steps with a good verdict
    pub correct_steps: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { policy: SchedulerPolicy::Random(0), max_steps: 10_000, correct_steps: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    /// interactions fired, monitor ones included
    pub steps: usize,
    /// interactions through the monitor's recovery port
    pub rollbacks: usize,
    pub continues: usize,
    /// steps of the projected run
    pub projected_steps: usize,
    /// projected steps after which the verdict is good
    pub correct_steps: usize,
    /// projected steps after which the verdict is bad
    pub violations: usize,
    pub deadlock: bool,
    pub livelock: bool,
    pub terminal: String,
}

/// What is needed to read a supervised run back.
pub struct Supervision<'a> {
    pub original: &'a Engine,
    pub info: &'a SupervisionInfo,
    pub oracle: Option<&'a Oracle>,
}

fn record(
    engine: &Engine,
    step: usize,
    a: Option<&Interaction>,
    q: &GlobalConfig,
    extra: &[(&str, Json)],
) -> Json {
    let mut r = trace_record(engine, step, a, q, None);
    if let Json::Object(m) = &mut r {
        for (k, v) in extra {
            m.insert((*k).to_string(), v.clone());
        }
    }
    r
}

fn finish(trace: &mut Option<&mut dyn Write>, engine: &Engine, step: usize, q: &GlobalConfig, s: &mut Summary, t: Terminal) -> Result<(), RunError> {
    s.terminal = t.as_str().to_string();
    s.deadlock = t == Terminal::Deadlock;
    if let Some(w) = trace {
        let mut r = trace_record(engine, step, None, q, Some(t));
        if let Json::Object(m) = &mut r {
            m.insert("summary".into(), serde_json::to_value(&*s).expect("summary serializes"));
        }
        writeln!(w, "{r}")?;
    }
    Ok(())
}

/// Runs a system without supervision. With an oracle, every step is judged.
pub fn run_plain(
    engine: &Engine,
    oracle: Option<&Oracle>,
    opts: &RunOptions,
    mut trace: Option<&mut dyn Write>,
) -> Result<Summary, RunError> {
    let bound = oracle.map(|o| o.bind(engine)).transpose()?;
    let mut theta = oracle.map(|o| o.initial);
    let mut sched = Scheduler::new(opts.policy.clone());
    let mut q = engine.initial();
    let mut s = Summary::default();
    if let Some(w) = trace.as_mut() {
        writeln!(w, "{}", trace_record(engine, 0, None, &q, None))?;
    }
    let terminal = loop {
        if s.steps >= opts.max_steps {
            break Terminal::MaxSteps;
        }
        if opts.correct_steps.is_some_and(|n| s.correct_steps >= n) {
            break Terminal::Stopped;
        }
        let enabled = engine.enabled_interactions(&q)?;
        if enabled.is_empty() {
            break Terminal::Deadlock;
        }
        let a = &enabled[sched.choose(engine, &enabled)?];
        q = engine.fire(&q, a)?;
        s.steps += 1;
        s.projected_steps += 1;
        let mut extra = Vec::new();
        if let (Some(b), Some(t)) = (&bound, theta.as_mut()) {
            *t = b.step(*t, engine, &q)?.1;
            let good = b.oracle.verdict(*t).is_good();
            if good {
                s.correct_steps += 1;
            } else {
                s.violations += 1;
            }
            extra.push(("verdict", Json::String(b.oracle.verdict(*t).to_string())));
        }
        if let Some(w) = trace.as_mut() {
            writeln!(w, "{}", record(engine, s.steps, Some(a), &q, &extra))?;
        }
    };
    finish(&mut trace, engine, s.steps, &q, &mut s, terminal)?;
    Ok(s)
}

/// Runs a supervised system, projecting it on the fly. `on_step` sees every
/// decided step and returns `true` to stop. Livelock is flagged when, at a
/// stable configuration reached again by recovery, every enabled original
/// interaction has been rolled back since the last progress, or under the
/// lexicographic policy when the same attempt is rolled back twice.
pub fn run_supervised(
    sup: &Engine,
    s_info: &Supervision<'_>,
    opts: &RunOptions,
    mut trace: Option<&mut dyn Write>,
    mut on_step: impl FnMut(&ProjectedStep) -> bool,
) -> Result<Summary, RunError> {
    let pj = Projector::new(s_info.original, sup, s_info.info)?;
    let bound = s_info.oracle.map(|o| o.bind(s_info.original)).transpose()?;
    let mut theta = s_info.oracle.map(|o| o.initial);
    let mut sched = Scheduler::new(opts.policy.clone());
    let deterministic = opts.policy == SchedulerPolicy::Lexicographic;
    let mut q = sup.initial();
    let mut st = pj.start(&q);
    let mut s = Summary::default();
    // attempts rolled back since the last decided progress
    let mut rolled: HashSet<Interaction> = HashSet::new();
    let mut attempt: Option<Interaction> = None;
    if let Some(w) = trace.as_mut() {
        writeln!(w, "{}", trace_record(sup, 0, None, &q, None))?;
    }
    let terminal = loop {
        if s.steps >= opts.max_steps {
            break Terminal::MaxSteps;
        }
        let enabled = sup.enabled_interactions(&q)?;
        if enabled.is_empty() {
            break Terminal::Deadlock;
        }
        let a = enabled[sched.choose(sup, &enabled)?].clone();
        let next = sup.fire(&q, &a)?;
        s.steps += 1;
        let family = pj.family(&a);
        if family.is_none() {
            attempt = Some(a.clone());
        }
        let decided = pj.feed(&mut st, &a, &next, s.steps)?;
        q = next;
        let mut extra: Vec<(&str, Json)> = Vec::new();
        let mut stop = false;
        if family == Some(Family::Recover) {
            s.rollbacks += 1;
            extra.push(("rollback", Json::Bool(true)));
        }
        if let Some(step) = &decided {
            extra.push(("decision", Json::String(step.kind.as_str().into())));
            match step.kind {
                StepKind::Recover => {
                    let tried = attempt.take().expect("a recovered attempt");
                    let repeated = !rolled.insert(tried);
                    let originals: BTreeSet<Interaction> =
                        sup.enabled_interactions(&q)?.into_iter().filter(|b| pj.family(b).is_none()).collect();
                    if (deterministic && repeated) || (!originals.is_empty() && originals.iter().all(|b| rolled.contains(b))) {
                        s.livelock = true;
                        stop = true;
                    }
                }
                StepKind::Step | StepKind::Continue => {
                    rolled.clear();
                    if step.kind == StepKind::Continue {
                        s.continues += 1;
                    }
                    s.projected_steps += 1;
                    if let (Some(b), Some(t)) = (&bound, theta.as_mut()) {
                        *t = b.step(*t, s_info.original, &step.config)?.1;
                        if b.oracle.verdict(*t).is_good() {
                            s.correct_steps += 1;
                        } else {
                            s.violations += 1;
                        }
                        extra.push(("verdict", Json::String(b.oracle.verdict(*t).to_string())));
                    }
                }
            }
            stop |= on_step(step);
        }
        if let Some(w) = trace.as_mut() {
            writeln!(w, "{}", record(sup, s.steps, Some(&a), &q, &extra))?;
        }
        if stop || opts.correct_steps.is_some_and(|n| s.correct_steps >= n) {
            break Terminal::Stopped;
        }
    };
    finish(&mut trace, sup, s.steps, &q, &mut s, terminal)?;
    Ok(s)
}
