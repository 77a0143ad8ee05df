//! Feasible interactions of a flat connector.

use super::expr::{Assignment, Expr, Path};
use super::{Connector, PortRef};

/// A feasible port subset of a connector with its projected guard and transfer.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleInteraction {
    pub ports: Vec<PortRef>,
    pub guard: Expr,
    pub transfer: Vec<Assignment>,
}

fn port_of(path: &Path) -> Option<PortRef> {
    match path.segments() {
        [comp, port, _] => Some(PortRef::new(comp, port)),
        _ => None,
    }
}

fn covered(path: &Path, ports: &[PortRef]) -> bool {
    port_of(path).is_some_and(|p| ports.contains(&p))
}

/// Keeps the top-level conjuncts of `guard` whose references all belong to `ports`.
pub fn project_guard(guard: &Expr, ports: &[PortRef]) -> Expr {
    Expr::all(guard.conjuncts().into_iter().filter(|c| c.refs().iter().all(|r| covered(r, ports))).cloned())
}

/// Keeps the assignments whose target and operands all belong to `ports`.
pub fn project_transfer(transfer: &[Assignment], ports: &[PortRef]) -> Vec<Assignment> {
    transfer
        .iter()
        .filter(|a| {
            covered(&a.target, ports)
                && a.value.refs().iter().all(|r| covered(r, ports))
                && a.index.as_ref().is_none_or(|i| i.refs().iter().all(|r| covered(r, ports)))
        })
        .cloned()
        .collect()
}

/// Whether the port subset selected by `mask` is an interaction of a connector
/// whose ports carry the given trigger flags.
pub(crate) fn is_feasible(triggers: &[bool], mask: u64) -> bool {
    let n = triggers.len();
    if mask == 0 {
        return false;
    }
    let has_trigger = (0..n).any(|i| mask & (1 << i) != 0 && triggers[i]);
    has_trigger || mask.count_ones() as usize == n
}

/// Every nonempty port subset that contains a trigger, or the full port set
/// when all ports are synchron. Subsets are enumerated in binary-counter order
/// over the declared port order. Connectors with more than 24 ports are not
/// enumerated (the result would not fit in memory).
pub fn feasible_interactions(c: &Connector) -> Vec<FeasibleInteraction> {
    let n = c.ports.len();
    assert!(n <= 24, "connector `{}` has {n} ports; enumeration is limited to 24", c.name);
    let triggers: Vec<bool> = c.ports.iter().map(|p| p.trigger).collect();
    let mut out = Vec::new();
    for mask in 1u64..(1 << n) {
        if !is_feasible(&triggers, mask) {
            continue;
        }
        let ports: Vec<PortRef> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| c.ports[i].port.clone()).collect();
        if !c.requires.iter().all(|r| ports.contains(r)) {
            continue;
        }
        out.push(FeasibleInteraction {
            guard: project_guard(&c.guard, &ports),
            transfer: project_transfer(&c.transfer, &ports),
            ports,
        });
    }
    out
}
