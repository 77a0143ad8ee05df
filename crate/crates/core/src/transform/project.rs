//! Reading runs of a supervised system back as runs of the original one.

use std::collections::BTreeMap;

use thiserror::Error;

use super::SupervisionInfo;
use crate::semantics::{Engine, GPort, GlobalConfig, Interaction, LocalConfig, Run, SemanticsError};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("supervised system does not match the original: {0}")]
    Mismatch(String),
    #[error("step {step}: {detail}")]
    Shape { step: usize, detail: String },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// Which monitor port an interaction goes through, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Monitor,
    Continue,
    Recover,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepKind {
    /// an original interaction completed without monitor involvement
    Step,
    /// the monitor accepted a pending interaction
    Continue,
    /// the monitor rolled a pending interaction back
    Recover,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Step => "step",
            StepKind::Continue => "continue",
            StepKind::Recover => "recover",
        }
    }
}

/// One decided step of the projected run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectedStep {
    pub kind: StepKind,
    /// `comp.port` of the original interaction
    pub ports: Vec<String>,
    /// projected configuration after the step; the restored one on recovery
    pub config: GlobalConfig,
    /// configuration the attempted interaction reached
    pub tentative: GlobalConfig,
    /// on recovery: the erased configuration equals the one before the attempt
    pub restored: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// waiting for the initial monitor synchronization
    Sync,
    Stable,
    /// an instrumented interaction fired; `pm` has not yet
    Pending { moved: Vec<GPort>, tentative: GlobalConfig },
    /// `pm` fired; waiting for `pc` or `pr`
    Deciding { moved: Vec<GPort>, tentative: GlobalConfig },
}

/// Projector state: phase plus the current projected configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProjState {
    pub phase: Phase,
    pub projected: GlobalConfig,
}

#[derive(Clone, Copy, Debug)]
enum LocMap {
    Orig(u32),
    /// intermediate location of a split; reads as the split's target
    Split(u32),
}

#[derive(Clone, Debug)]
struct CompMap {
    sup: u32,
    locs: Vec<LocMap>,
    /// original slot -> supervised slot
    vars: Vec<u32>,
    /// supervised port -> original port
    ports: BTreeMap<u32, u32>,
}

pub struct Projector<'a> {
    pub orig: &'a Engine,
    pub sup: &'a Engine,
    comps: Vec<CompMap>,
    /// supervised component -> original component
    back: BTreeMap<u32, u32>,
    pm: GPort,
    pc: GPort,
    pr: GPort,
    has_sync: bool,
}

fn mismatch(s: impl Into<String>) -> ProjectionError {
    ProjectionError::Mismatch(s.into())
}

impl<'a> Projector<'a> {
    pub fn new(orig: &'a Engine, sup: &'a Engine, info: &SupervisionInfo) -> Result<Self, ProjectionError> {
        let mut comps = Vec::new();
        let mut back = BTreeMap::new();
        for c in 0..orig.num_components() as u32 {
            let name = orig.component_name(c);
            let s = sup.component_index(name).ok_or_else(|| mismatch(format!("component {name} is missing")))?;
            let ci = info.components.get(name);
            let sys_comp = &sup.system().components[s as usize];
            let mut locs = Vec::new();
            for l in &sys_comp.locations {
                let target = if let Some(split) = ci.and_then(|i| i.split_at(l)) {
                    LocMap::Split(loc(orig, c, &split.to)?)
                } else if ci.and_then(|i| i.init0.as_ref()) == Some(l) {
                    LocMap::Orig(loc(orig, c, &orig.system().components[c as usize].initial)?)
                } else {
                    LocMap::Orig(loc(orig, c, l)?)
                };
                locs.push(target);
            }
            let vars = orig
                .var_names(c)
                .iter()
                .map(|v| sup.var_slot(s, v).ok_or_else(|| mismatch(format!("variable {name}.{v} is missing"))))
                .collect::<Result<_, _>>()?;
            let mut ports = BTreeMap::new();
            for (i, p) in orig.system().components[c as usize].ports.iter().enumerate() {
                let g = sup.port(name, &p.name).ok_or_else(|| mismatch(format!("port {name}.{} is missing", p.name)))?;
                ports.insert(g.port, i as u32);
            }
            back.insert(s, c);
            comps.push(CompMap { sup: s, locs, vars, ports });
        }
        let m = &info.monitor;
        let port = |p: &str| sup.port(&m.name, p).ok_or_else(|| mismatch(format!("monitor port {p} is missing")));
        Ok(Projector {
            orig,
            sup,
            comps,
            back,
            pm: port(&m.pm)?,
            pc: port(&m.pc)?,
            pr: port(&m.pr)?,
            has_sync: m.init0.is_some(),
        })
    }

    pub fn monitor_port(&self, f: Family) -> GPort {
        match f {
            Family::Monitor => self.pm,
            Family::Continue => self.pc,
            Family::Recover => self.pr,
        }
    }

    pub fn family(&self, a: &Interaction) -> Option<Family> {
        if a.contains(self.pm) {
            Some(Family::Monitor)
        } else if a.contains(self.pc) {
            Some(Family::Continue)
        } else if a.contains(self.pr) {
            Some(Family::Recover)
        } else {
            None
        }
    }

    /// Original ports of an interaction of the supervised system; ports of
    /// added components are dropped.
    pub fn original_ports(&self, a: &Interaction) -> Vec<GPort> {
        let mut out: Vec<GPort> = a
            .ports
            .iter()
            .filter_map(|g| {
                let c = *self.back.get(&g.comp)?;
                let p = *self.comps[c as usize].ports.get(&g.port)?;
                Some(GPort { comp: c, port: p })
            })
            .collect();
        out.sort();
        out
    }

    pub fn port_labels(&self, ports: &[GPort]) -> Vec<String> {
        ports.iter().map(|p| format!("{}.{}", self.orig.component_name(p.comp), self.orig.port_name(*p))).collect()
    }

    /// Erases a supervised configuration. Components in `moved` take their
    /// port as last port; the others keep the one in `prev`.
    pub fn erase(&self, q: &GlobalConfig, prev: &GlobalConfig, moved: &[GPort]) -> GlobalConfig {
        let locals = self
            .comps
            .iter()
            .enumerate()
            .map(|(c, m)| {
                let l = &q.locals[m.sup as usize];
                let loc = match m.locs[l.loc as usize] {
                    LocMap::Orig(x) | LocMap::Split(x) => x,
                };
                let last_port = match moved.iter().find(|g| g.comp == c as u32) {
                    Some(g) => Some(g.port),
                    None => prev.locals[c].last_port,
                };
                LocalConfig { loc, last_port, vals: m.vars.iter().map(|&s| l.vals[s as usize].clone()).collect() }
            })
            .collect();
        GlobalConfig { locals }
    }

    /// True when some original component sits in an intermediate location.
    pub fn in_split(&self, q: &GlobalConfig) -> bool {
        self.comps.iter().any(|m| matches!(m.locs[q.locals[m.sup as usize].loc as usize], LocMap::Split(_)))
    }

    pub fn start(&self, q0: &GlobalConfig) -> ProjState {
        let projected = self.erase(q0, &self.orig.initial(), &[]);
        let phase = if self.has_sync { Phase::Sync } else { Phase::Stable };
        ProjState { phase, projected }
    }

    /// Advances the projector over `q --a--> next`; returns the projected
    /// step once a block is decided.
    pub fn feed(
        &self,
        st: &mut ProjState,
        a: &Interaction,
        next: &GlobalConfig,
        step: usize,
    ) -> Result<Option<ProjectedStep>, ProjectionError> {
        let family = self.family(a);
        let shape = |detail: String| ProjectionError::Shape { step, detail };
        let phase = std::mem::replace(&mut st.phase, Phase::Stable);
        match (phase, family) {
            (Phase::Sync, Some(Family::Monitor)) => {
                st.projected = self.erase(next, &st.projected, &[]);
                Ok(None)
            }
            (Phase::Stable, None) => {
                let moved = self.original_ports(a);
                let tentative = self.erase(next, &st.projected, &moved);
                if self.in_split(next) {
                    st.phase = Phase::Pending { moved, tentative };
                    return Ok(None);
                }
                st.projected = tentative.clone();
                Ok(Some(ProjectedStep {
                    kind: StepKind::Step,
                    ports: self.port_labels(&moved),
                    config: tentative.clone(),
                    tentative,
                    restored: false,
                }))
            }
            (Phase::Pending { moved, tentative }, Some(Family::Monitor)) => {
                st.phase = Phase::Deciding { moved, tentative };
                Ok(None)
            }
            (Phase::Deciding { moved, tentative }, Some(Family::Continue)) => {
                let erased = self.erase(next, &st.projected, &moved);
                if erased != tentative {
                    return Err(shape(format!("continuing {} changed the tentative state", self.port_labels(&moved).join(","))));
                }
                if self.in_split(next) {
                    return Err(shape("a component is still in an intermediate location after continue".into()));
                }
                st.projected = erased.clone();
                Ok(Some(ProjectedStep {
                    kind: StepKind::Continue,
                    ports: self.port_labels(&moved),
                    config: erased,
                    tentative,
                    restored: false,
                }))
            }
            (Phase::Deciding { moved, tentative }, Some(Family::Recover)) => {
                let erased = self.erase(next, &st.projected, &[]);
                let restored = erased == st.projected;
                st.projected = erased.clone();
                Ok(Some(ProjectedStep {
                    kind: StepKind::Recover,
                    ports: self.port_labels(&moved),
                    config: erased,
                    tentative,
                    restored,
                }))
            }
            (phase, family) => {
                let at = match phase {
                    Phase::Sync => "before the initial synchronization",
                    Phase::Stable => "in a stable configuration",
                    Phase::Pending { .. } => "while an interaction awaits the monitor",
                    Phase::Deciding { .. } => "while the monitor decides",
                };
                let what = match family {
                    None => "an original interaction".to_string(),
                    Some(f) => format!("a {f:?} interaction").to_lowercase(),
                };
                Err(shape(format!("{what} ({}) fired {at}", self.sup.interaction_label(a))))
            }
        }
    }
}

fn loc(orig: &Engine, c: u32, name: &str) -> Result<u32, ProjectionError> {
    orig.location_index(c, name)
        .ok_or_else(|| mismatch(format!("location {}.{name} has no original counterpart", orig.component_name(c))))
}

/// No enabled interaction of `q` involves the monitor.
pub fn is_stable(sup: &Engine, info: &SupervisionInfo, q: &GlobalConfig) -> Result<bool, SemanticsError> {
    let m = &info.monitor;
    let ports: Vec<GPort> = [&m.pm, &m.pc, &m.pr].iter().filter_map(|p| sup.port(&m.name, p)).collect();
    Ok(!sup.enabled_interactions(q)?.iter().any(|a| ports.iter().any(|p| a.contains(*p))))
}

/// Projects a supervised run: continued and unmonitored steps are kept,
/// recovered attempts vanish. Every kept step must be an enabled original
/// interaction and every recovery must restore the configuration. A trailing
/// undecided block is dropped.
pub fn project_run(orig: &Engine, sup: &Engine, info: &SupervisionInfo, run: &Run) -> Result<Run, ProjectionError> {
    let pj = Projector::new(orig, sup, info)?;
    let mut st = pj.start(&run.configs[0]);
    let mut out: Option<Run> = None;
    for (i, a) in run.interactions.iter().enumerate() {
        let synced = !matches!(st.phase, Phase::Sync);
        let prev = st.projected.clone();
        let step = pj.feed(&mut st, a, &run.configs[i + 1], i)?;
        if synced && out.is_none() {
            out = Some(Run { configs: vec![prev.clone()], interactions: Vec::new(), terminal: run.terminal });
        }
        let Some(s) = step else { continue };
        let r = out.get_or_insert_with(|| Run { configs: vec![prev.clone()], interactions: Vec::new(), terminal: run.terminal });
        match s.kind {
            StepKind::Recover if !s.restored => {
                return Err(ProjectionError::Shape { step: i, detail: "recovery did not restore the configuration".into() });
            }
            StepKind::Recover => {}
            _ => {
                let b = orig
                    .enabled_interactions(&prev)?
                    .into_iter()
                    .find(|b| orig.port_names(b) == s.ports && orig.fire(&prev, b).ok().as_ref() == Some(&s.config))
                    .ok_or_else(|| ProjectionError::Shape {
                        step: i,
                        detail: format!("{{{}}} is not an original step", s.ports.join(",")),
                    })?;
                r.interactions.push(b);
                r.configs.push(s.config);
            }
        }
    }
    Ok(out.unwrap_or_else(|| Run { configs: vec![st.projected], interactions: Vec::new(), terminal: run.terminal }))
}
