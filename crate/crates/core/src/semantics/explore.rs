//! Breadth-first reachability over the prioritized semantics.

use std::collections::{BTreeSet, HashMap};

use super::{Engine, GlobalConfig, Interaction, SemanticsError};

/// Reachable configurations with interaction-labelled edges.
#[derive(Clone, Debug, Default)]
pub struct ReachGraph {
    /// configurations in discovery order; index 0 is the initial one
    pub states: Vec<GlobalConfig>,
    /// outgoing edges per state (interaction, successor index)
    pub edges: Vec<Vec<(Interaction, usize)>>,
    /// states without any enabled interaction
    pub deadlocks: Vec<usize>,
    /// BFS depth of each state
    pub depth: Vec<usize>,
    /// set when `max_states` cut off successors; their edges are missing
    pub truncated: bool,
    labels: Vec<Vec<(String, usize)>>,
}

impl ReachGraph {
    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, q: &GlobalConfig) -> Option<usize> {
        self.states.iter().position(|s| s == q)
    }

    /// Number of label paths of length exactly `len` from the initial state,
    /// counting parallel edges separately.
    pub fn path_count(&self, len: usize) -> u128 {
        let mut cur = vec![0u128; self.states.len()];
        if cur.is_empty() {
            return 0;
        }
        cur[0] = 1;
        for _ in 0..len {
            let mut next = vec![0u128; self.states.len()];
            for (s, &n) in cur.iter().enumerate() {
                for (_, t) in &self.labels[s] {
                    next[*t] += n;
                }
            }
            cur = next;
        }
        cur.iter().sum()
    }
}

/// Explores at most `max_states` configurations from the initial one.
pub fn explore(engine: &Engine, max_states: usize) -> Result<ReachGraph, SemanticsError> {
    let mut g = ReachGraph::default();
    let mut index: HashMap<GlobalConfig, usize> = HashMap::new();
    let init = engine.initial();
    index.insert(init.clone(), 0);
    g.states.push(init);
    g.depth.push(0);
    let mut head = 0;
    while head < g.states.len() {
        let q = g.states[head].clone();
        let enabled = engine.enabled_interactions(&q)?;
        if enabled.is_empty() {
            g.deadlocks.push(head);
        }
        let mut out = Vec::with_capacity(enabled.len());
        for a in enabled {
            let next = engine.fire(&q, &a)?;
            let id = match index.get(&next) {
                Some(&id) => id,
                None if g.states.len() >= max_states.max(1) => {
                    g.truncated = true;
                    continue;
                }
                None => {
                    let id = g.states.len();
                    index.insert(next.clone(), id);
                    g.states.push(next);
                    g.depth.push(g.depth[head] + 1);
                    id
                }
            };
            out.push((a, id));
        }
        g.labels.push(out.iter().map(|(a, t)| (engine.interaction_label(a), *t)).collect());
        g.edges.push(out);
        head += 1;
    }
    Ok(g)
}

/// Every distinct interaction-label sequence of length at most `bound`
/// realizable from the initial state.
pub fn traces(g: &ReachGraph, bound: usize) -> BTreeSet<Vec<String>> {
    let mut out = BTreeSet::new();
    if g.states.is_empty() {
        return out;
    }
    let mut frontier: BTreeSet<(Vec<String>, usize)> = BTreeSet::from([(Vec::new(), 0)]);
    for len in 0..=bound {
        out.extend(frontier.iter().map(|(w, _)| w.clone()));
        if len == bound {
            break;
        }
        let mut next = BTreeSet::new();
        for (w, s) in &frontier {
            for (l, t) in &g.labels[*s] {
                let mut w2 = w.clone();
                w2.push(l.clone());
                next.insert((w2, *t));
            }
        }
        frontier = next;
    }
    out
}
