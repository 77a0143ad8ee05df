//! Scheduling policies, simulation and JSON-lines trace records.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value as Json};

use super::{Engine, GlobalConfig, Interaction, SemanticsError};
use crate::model::format::value_to_json;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SchedulerPolicy {
    /// uniform choice among enabled interaction instances
    Random(u64),
    /// first enabled instance in canonical order
    Lexicographic,
    /// the instance whose port set equals the next scripted set; falls back
    /// to lexicographic once the script is exhausted
    Scripted(Vec<BTreeSet<String>>),
}

/// Stateful chooser built from a policy.
#[derive(Clone, Debug)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    rng: ChaCha8Rng,
    step: usize,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy) -> Self {
        let seed = match policy {
            SchedulerPolicy::Random(s) => s,
            _ => 0,
        };
        Scheduler { policy, rng: ChaCha8Rng::seed_from_u64(seed), step: 0 }
    }

    /// Picks an index into `enabled` (which must be nonempty).
    pub fn choose(&mut self, engine: &Engine, enabled: &[Interaction]) -> Result<usize, SemanticsError> {
        let step = self.step;
        self.step += 1;
        match &self.policy {
            SchedulerPolicy::Random(_) => Ok(self.rng.gen_range(0..enabled.len())),
            SchedulerPolicy::Lexicographic => Ok(0),
            SchedulerPolicy::Scripted(script) => match script.get(step) {
                None => Ok(0),
                Some(want) => enabled
                    .iter()
                    .position(|a| engine.port_names(a).into_iter().collect::<BTreeSet<_>>() == *want)
                    .ok_or_else(|| SemanticsError::Script {
                        step: step + 1,
                        wanted: want.iter().cloned().collect::<Vec<_>>().join(","),
                        enabled: enabled.iter().map(|a| format!("{{{}}}", engine.interaction_label(a))).collect::<Vec<_>>().join(" "),
                    }),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terminal {
    Deadlock,
    MaxSteps,
    Stopped,
}

impl Terminal {
    pub fn as_str(self) -> &'static str {
        match self {
            Terminal::Deadlock => "deadlock",
            Terminal::MaxSteps => "max_steps",
            Terminal::Stopped => "stopped",
        }
    }
}

/// `q0 a0 q1 ... qm` with how it ended.
#[derive(Clone, Debug)]
pub struct Run {
    pub configs: Vec<GlobalConfig>,
    pub interactions: Vec<Interaction>,
    pub terminal: Terminal,
}

impl Run {
    pub fn last(&self) -> &GlobalConfig {
        self.configs.last().expect("a run has at least one configuration")
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }
}

/// Runs the system from its initial configuration. The stop predicate is
/// checked on every configuration, including the initial one.
pub fn simulate(
    engine: &Engine,
    policy: SchedulerPolicy,
    max_steps: usize,
    stop: Option<&dyn Fn(&GlobalConfig) -> bool>,
) -> Result<Run, SemanticsError> {
    let mut sched = Scheduler::new(policy);
    let mut run = Run { configs: vec![engine.initial()], interactions: Vec::new(), terminal: Terminal::MaxSteps };
    loop {
        let q = run.last();
        if stop.is_some_and(|f| f(q)) {
            run.terminal = Terminal::Stopped;
            break;
        }
        if run.interactions.len() >= max_steps {
            run.terminal = Terminal::MaxSteps;
            break;
        }
        let enabled = engine.enabled_interactions(q)?;
        if enabled.is_empty() {
            run.terminal = Terminal::Deadlock;
            break;
        }
        let a = enabled[sched.choose(engine, &enabled)?].clone();
        let next = engine.fire(q, &a)?;
        run.interactions.push(a);
        run.configs.push(next);
    }
    Ok(run)
}

/// `{"comp": {"loc", "last_port", "vars": {..}}}` for every component.
pub fn config_json(engine: &Engine, q: &GlobalConfig) -> Json {
    let mut out = Map::new();
    for (i, l) in q.locals.iter().enumerate() {
        let c = i as u32;
        let vars: Map<String, Json> =
            engine.var_names(c).iter().zip(&l.vals).map(|(n, v)| (n.to_string(), value_to_json(v))).collect();
        let last = l.last_port.map(|p| engine.port_name(super::GPort { comp: c, port: p }).to_string());
        out.insert(
            engine.component_name(c).to_string(),
            json!({"loc": engine.location_name(c, l.loc), "last_port": last, "vars": vars}),
        );
    }
    Json::Object(out)
}

/// One JSON-lines record. `interaction` is the one that produced `q`.
pub fn trace_record(
    engine: &Engine,
    step: usize,
    interaction: Option<&Interaction>,
    q: &GlobalConfig,
    terminal: Option<Terminal>,
) -> Json {
    json!({
        "step": step,
        "interaction": interaction.map(|a| engine.port_names(a)),
        "config": config_json(engine, q),
        "terminal": terminal.map(Terminal::as_str),
    })
}

impl Run {
    /// JSON-lines rendering, one record per configuration.
    pub fn to_jsonl(&self, engine: &Engine) -> String {
        let mut s = String::new();
        for (k, q) in self.configs.iter().enumerate() {
            let a = k.checked_sub(1).map(|i| &self.interactions[i]);
            let term = (k + 1 == self.configs.len()).then_some(self.terminal);
            s.push_str(&trace_record(engine, k, a, q, term).to_string());
            s.push('\n');
        }
        s
    }
}
