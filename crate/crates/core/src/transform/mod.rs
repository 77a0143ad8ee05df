//! Model-to-model pipeline turning a system and a runtime oracle into a
//! supervised system, plus projection of supervised runs back onto the
//! original system and bounded checks of the correctness propositions.

mod check;
mod disabler;
mod instrument;
mod integrate;
mod monitor;
mod project;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::model::{parse_model, serialize_model, validate_model, ModelError, System};
use crate::property::{monitored_vars, Classification, Oracle, OracleDef, PropertyError};
use crate::semantics::Engine;

pub use check::{check_completeness, check_propositions, CheckReport, CompletenessReport, Violation, PROPOSITIONS};
pub use disabler::{build_disabler, DisablerInfo};
pub use instrument::{
    closure, inject_backup, instrument_atomic, instrument_transition, recvars, select_transitions, ComponentInfo,
    InstrumentationPlan, Split, SplitInfo, NULL_MARKER,
};
pub use integrate::{integrate_disabler, integrate_spin, Integrated, MonitorConnectors};
pub use monitor::{event_guard, generate_monitor_component, CopyVar, MonitorInfo};
pub use project::{is_stable, project_run, Family, Phase, ProjState, ProjectedStep, ProjectionError, Projector, StepKind};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("oracle cannot be enforced; failed checks: {}", .0.failures().join(", "))]
    Ineligible(Classification),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("monitored field `{0}` does not exist")]
    UnknownMonitored(String),
    #[error("unknown connector `{0}`")]
    UnknownConnector(String),
    #[error("connector `{0}` is recoverable but has trigger ports; the disabler needs all-synchron connectors")]
    TriggerInRecinter(String),
    #[error("provenance file: {0}")]
    Sidecar(String),
}

/// `base`, or `base_1`, `base_2`, ... whichever is not yet taken; the result is
/// reserved.
pub(crate) fn fresh(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut name = base.to_string();
    let mut n = 1;
    while taken.contains(&name) {
        name = format!("{base}_{n}");
        n += 1;
    }
    taken.insert(name.clone());
    name
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuperviseOptions {
    pub disabler: bool,
    /// instrument only the transitions that may modify monitored variables
    pub optimize: bool,
    /// inject backup code; turning it off yields a deliberately broken system
    pub backup: bool,
}

impl Default for SuperviseOptions {
    fn default() -> Self {
        SuperviseOptions { disabler: false, optimize: true, backup: true }
    }
}

/// Everything needed to read a supervised system back in terms of the original.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionInfo {
    pub monitor: MonitorInfo,
    pub disabler: Option<DisablerInfo>,
    pub components: BTreeMap<String, ComponentInfo>,
    pub recinter: Vec<String>,
    pub connectors: MonitorConnectors,
}

#[derive(Clone, Debug)]
pub struct Supervised {
    pub system: System,
    pub original: System,
    pub plan: InstrumentationPlan,
    pub info: SupervisionInfo,
    /// fresh element -> the construction that introduced it
    pub provenance: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

/// Runs the whole pipeline: classification, instrumentation, backup
/// injection, monitor synthesis and integration.
pub fn supervise(sys: &System, oracle: &Oracle, opts: SuperviseOptions) -> Result<Supervised, TransformError> {
    let class = oracle.classify();
    if !class.eligible() {
        return Err(TransformError::Ineligible(class));
    }
    let engine = Engine::new(sys.clone())?;
    oracle.bind(&engine)?;
    let mv = monitored_vars(oracle);
    let plan = InstrumentationPlan::new(sys, &mv, opts.optimize)?;
    let mut prov = BTreeMap::new();

    let mut components = Vec::with_capacity(sys.components.len());
    let mut infos: Vec<(String, ComponentInfo)> = Vec::new();
    for b in &sys.components {
        match instrument_atomic(b, &plan) {
            None => components.push(b.clone()),
            Some((inst, info)) => {
                let rec = if opts.backup { inject_backup(&inst, &info) } else { inst };
                record_component(&mut prov, b, &info);
                components.push(rec);
                infos.push((b.name.clone(), info));
            }
        }
    }

    let mut names: BTreeSet<String> = sys.components.iter().map(|c| c.name.clone()).collect();
    names.extend(sys.connectors.iter().map(|c| c.name.clone()));
    let mon_name = fresh("monitor", &mut names);
    let (e, minfo) = generate_monitor_component(oracle, sys, &plan.occur, &mon_name)?;
    prov.insert(format!("component {mon_name}"), "generate_monitor_component".into());
    for c in &minfo.copies {
        prov.insert(format!("{mon_name}.var {}", c.copy), format!("generate_monitor_component: copy of {}.{}", c.comp, c.field));
        prov.insert(format!("{mon_name}.var {}", c.tmp), format!("generate_monitor_component: backup of {}.{}", c.comp, c.field));
    }

    let integrated = if opts.disabler {
        let d_name = fresh("disabler", &mut names);
        let (d, dinfo) = build_disabler(sys, &plan.recinter, &d_name)?;
        prov.insert(format!("component {d_name}"), "build_disabler".into());
        for (c, p) in &dinfo.ports {
            prov.insert(format!("{d_name}.port {p}"), format!("build_disabler: guards connector {c}"));
        }
        let out = integrate_disabler(sys, components, &infos, (e, &minfo), (d, &dinfo));
        (out, Some(dinfo))
    } else {
        (integrate_spin(sys, components, &infos, (e, &minfo)), None)
    };
    let (Integrated { system, connectors, warnings }, disabler) = integrated;
    let source = if opts.disabler { "integrate_disabler" } else { "integrate_spin" };
    for c in connectors.all() {
        prov.insert(format!("connector {c}"), source.into());
    }
    prov.insert(
        "priorities".into(),
        format!(
            "{source}: {}, {} and {} rank above every original connector, not only the recoverable ones",
            connectors.m, connectors.c2, connectors.r2
        ),
    );
    let diags = validate_model(&system);
    if !diags.is_empty() {
        return Err(ModelError::Invalid(diags).into());
    }
    let info = SupervisionInfo {
        monitor: minfo,
        disabler,
        components: infos.into_iter().collect(),
        recinter: plan.recinter.clone(),
        connectors,
    };
    Ok(Supervised { system, original: sys.clone(), plan, info, provenance: prov, warnings })
}

fn record_component(prov: &mut BTreeMap<String, String>, b: &crate::model::AtomicComponent, info: &ComponentInfo) {
    let n = &b.name;
    for p in [&info.pm, &info.pc, &info.pr] {
        prov.insert(format!("{n}.port {p}"), "instrument_atomic".into());
    }
    if let Some(l) = &info.init0 {
        prov.insert(format!("{n}.loc {l}"), "instrument_atomic: initial synchronization".into());
    }
    for v in info.loc_var.iter().chain(&info.port_var) {
        prov.insert(format!("{n}.var {v}"), "instrument_atomic: shadow variable".into());
    }
    for (x, t) in &info.tmp {
        prov.insert(format!("{n}.var {t}"), format!("instrument_atomic: backup of {x}"));
    }
    for s in &info.splits {
        let src = format!("instrument_transition: {} -{}-> {}", s.from, s.port, s.to);
        prov.insert(format!("{n}.loc {}", s.l_m), src.clone());
        prov.insert(format!("{n}.loc {}", s.l_r), src);
    }
}

/// A supervised model read back together with its provenance file.
#[derive(Clone, Debug)]
pub struct Sidecar {
    pub original: System,
    pub oracle: Option<Oracle>,
    pub info: SupervisionInfo,
}

impl Supervised {
    /// Provenance document: fresh-element sources, plus what is needed to
    /// project runs of the supervised model.
    pub fn sidecar_json(&self, oracle: &Oracle) -> Json {
        let original: Json = serde_json::from_str(&serialize_model(&self.original)).expect("serialized model is JSON");
        json!({
            "provenance": self.provenance,
            "warnings": self.warnings,
            "supervision": self.info,
            "original": original,
            "oracle": oracle.def(),
        })
    }
}

pub fn parse_sidecar(text: &str) -> Result<Sidecar, TransformError> {
    let doc: Json = serde_json::from_str(text).map_err(|e| TransformError::Sidecar(e.to_string()))?;
    let info: SupervisionInfo = serde_json::from_value(doc.get("supervision").cloned().unwrap_or(Json::Null))
        .map_err(|e| TransformError::Sidecar(format!("supervision: {e}")))?;
    let original = parse_model(&doc.get("original").map(|v| v.to_string()).unwrap_or_default())?;
    let oracle = match doc.get("oracle") {
        None | Some(Json::Null) => None,
        Some(o) => {
            let def: OracleDef =
                serde_json::from_value(o.clone()).map_err(|e| TransformError::Sidecar(format!("oracle: {e}")))?;
            Some(Oracle::from_def(def)?)
        }
    };
    Ok(Sidecar { original, oracle, info })
}

#[cfg(test)]
mod tests;
