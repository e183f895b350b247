//! Online selection of the next automaton state and manipulation symbol,
//! with retry bookkeeping when the reactive layer reports a sub-task
//! infeasible.

use crate::automaton::{Symbol, TaskGraph, Witness};
use crate::ltl::StateId;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymbolicError {
    #[error("no accepting edge is reachable from {0}")]
    InfiniteDistance(String),
    #[error("achieved symbol {got} does not match the pending symbol {want}")]
    Mismatch { want: Symbol, got: Symbol },
    #[error("the robot cannot accomplish the assigned mission: {0}")]
    MissionInfeasible(String),
}

/// Outcome of an infeasibility report: either a refreshed controller state
/// with an alternative command, or mission failure.
#[derive(Debug)]
pub enum RecoverOutcome {
    Retry(ControllerState),
    Failure(String),
}

/// Snapshot of the symbolic controller: current and target automaton state,
/// the pending symbol that enables the transition, and the witnesses already
/// reported infeasible for the current state.
#[derive(Clone, Debug)]
pub struct ControllerState {
    pub current: StateId,
    pub target: StateId,
    pub pending: Witness,
    pub exhausted: BTreeSet<(StateId, Symbol)>,
    pub accept_count: usize,
}

impl ControllerState {
    pub fn pending_symbol(&self) -> &Symbol {
        &self.pending.symbol
    }

    pub fn status_line(&self, g: &TaskGraph) -> String {
        let df = match g.distance_to_accepting(self.current) {
            Ok(Some(d)) => d.to_string(),
            _ => "inf".to_string(),
        };
        format!(
            "SYMBOLIC state={} target={} symbol={} dF={}",
            g.state_name(self.current),
            g.state_name(self.target),
            self.pending.symbol,
            df
        )
    }
}

/// Optional world context: a cost for grounding a symbol, used to order
/// otherwise equal witness candidates (nearest grounded goal wins).
pub type SymbolCost<'a> = Option<&'a dyn Fn(&Symbol) -> f64>;

/// Start the controller at the auxiliary state and select the first target.
pub fn init(g: &TaskGraph, cost: SymbolCost) -> Result<ControllerState, SymbolicError> {
    let exhausted = BTreeSet::new();
    let (target, pending) = select_move(g, g.aux, &exhausted, cost)?;
    Ok(ControllerState {
        current: g.aux,
        target,
        pending,
        exhausted,
        accept_count: 0,
    })
}

/// Select the next automaton state from `current` per the distance metric:
/// one hop closer to the accepting-edge sources, or across an accepting edge
/// when already at one. Targets whose witnesses are all exhausted are
/// skipped.
pub fn select_next_state(
    g: &TaskGraph,
    current: StateId,
    exhausted: &BTreeSet<(StateId, Symbol)>,
) -> Result<StateId, SymbolicError> {
    candidate_targets(g, current, exhausted)?
        .first()
        .copied()
        .ok_or_else(|| {
            SymbolicError::MissionInfeasible(format!(
                "no remaining candidate next state from {}",
                g.state_name(current)
            ))
        })
}

/// Ordered candidate targets from `current`.
fn candidate_targets(
    g: &TaskGraph,
    current: StateId,
    exhausted: &BTreeSet<(StateId, Symbol)>,
) -> Result<Vec<StateId>, SymbolicError> {
    let at_accepting = g.accepting_sources.contains(&current);
    let d = g
        .distance_to_accepting(current)
        .map_err(|e| SymbolicError::MissionInfeasible(e.to_string()))?
        .ok_or_else(|| SymbolicError::InfiniteDistance(g.state_name(current)))?;
    let usable = |e: &&crate::automaton::TgEdge| -> bool {
        e.witnesses
            .iter()
            .filter(|w| !at_accepting || w.accepting)
            .any(|w| !exhausted.contains(&(e.to, w.symbol.clone())))
    };
    let mut cands: Vec<StateId> = if at_accepting {
        g.successors(current)
            .filter(|e| e.accepting)
            .filter(usable)
            .map(|e| e.to)
            .collect()
    } else {
        g.successors(current)
            .filter(|e| {
                matches!(g.distance_to_accepting(e.to), Ok(Some(dn)) if dn + 1 == d)
            })
            .filter(usable)
            .map(|e| e.to)
            .collect()
    };
    // prefer targets that can keep making progress afterwards, then lowest id
    cands.sort_by_key(|&t| {
        let df = match g.distance_to_accepting(t) {
            Ok(Some(d)) => d,
            _ => usize::MAX,
        };
        (usize::from(df == usize::MAX), t)
    });
    Ok(cands)
}

/// Select a feasible symbol enabling the `(q, q_next)` edge, skipping
/// exhausted witnesses. At an accepting source, only accepting witnesses
/// are eligible.
pub fn select_symbol(
    g: &TaskGraph,
    q: StateId,
    q_next: StateId,
    exhausted: &BTreeSet<(StateId, Symbol)>,
    cost: SymbolCost,
) -> Result<Witness, SymbolicError> {
    let edge = g.edge(q, q_next).ok_or_else(|| {
        SymbolicError::MissionInfeasible(format!(
            "no edge {} -> {}",
            g.state_name(q),
            g.state_name(q_next)
        ))
    })?;
    let need_accepting = g.accepting_sources.contains(&q);
    let mut options: Vec<&Witness> = edge
        .witnesses
        .iter()
        .filter(|w| !need_accepting || w.accepting)
        .filter(|w| !exhausted.contains(&(q_next, w.symbol.clone())))
        .collect();
    if let Some(costf) = cost {
        options.sort_by(|a, b| {
            costf(&a.symbol)
                .total_cmp(&costf(&b.symbol))
                .then_with(|| a.symbol.cmp(&b.symbol))
        });
    } else {
        options.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    }
    options.first().map(|w| (*w).clone()).ok_or_else(|| {
        SymbolicError::MissionInfeasible(format!(
            "all witnesses of {} -> {} are exhausted",
            g.state_name(q),
            g.state_name(q_next)
        ))
    })
}

fn select_move(
    g: &TaskGraph,
    current: StateId,
    exhausted: &BTreeSet<(StateId, Symbol)>,
    cost: SymbolCost,
) -> Result<(StateId, Witness), SymbolicError> {
    for target in candidate_targets(g, current, exhausted)? {
        if let Ok(w) = select_symbol(g, current, target, exhausted, cost) {
            return Ok((target, w));
        }
    }
    Err(SymbolicError::MissionInfeasible(format!(
        "no candidate transition from {}",
        g.state_name(current)
    )))
}

/// Commit an accomplished sub-task: move to the target state, clear the
/// exhaustion set, count accepting traversals and select the next move.
pub fn advance(
    g: &TaskGraph,
    cs: &ControllerState,
    achieved: &Symbol,
    cost: SymbolCost,
) -> Result<ControllerState, SymbolicError> {
    if achieved != &cs.pending.symbol {
        return Err(SymbolicError::Mismatch {
            want: cs.pending.symbol.clone(),
            got: achieved.clone(),
        });
    }
    let accept_count = cs.accept_count + usize::from(cs.pending.accepting);
    let exhausted = BTreeSet::new();
    let (target, pending) = select_move(g, cs.target, &exhausted, cost)?;
    Ok(ControllerState {
        current: cs.target,
        target,
        pending,
        exhausted,
        accept_count,
    })
}

/// React to an infeasibility report from the reactive layer: exhaust the
/// pending witness, then retry a symbol on the same edge, then another
/// target one hop closer; report mission failure when everything from the
/// current state is exhausted.
pub fn report_infeasible(g: &TaskGraph, cs: &ControllerState, cost: SymbolCost) -> RecoverOutcome {
    let mut exhausted = cs.exhausted.clone();
    exhausted.insert((cs.target, cs.pending.symbol.clone()));
    match select_move(g, cs.current, &exhausted, cost) {
        Ok((target, pending)) => RecoverOutcome::Retry(ControllerState {
            current: cs.current,
            target,
            pending,
            exhausted,
            accept_count: cs.accept_count,
        }),
        Err(e) => RecoverOutcome::Failure(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{add_aux_state, build_task_graph, prune_nba};
    use crate::ltl::{parse_ltl, translate_to_nba, Predicate};

    fn patrol_graph() -> TaskGraph {
        let f = parse_ltl("G F pi(move,l1) & G F pi(move,l2)").unwrap();
        let nba = prune_nba(&translate_to_nba(&f));
        let (nba, aux) = add_aux_state(&nba, &Symbol::empty());
        build_task_graph(&nba, aux).unwrap()
    }

    #[test]
    fn controller_walks_down_the_metric() {
        let g = patrol_graph();
        let cs = init(&g, None).unwrap();
        assert_eq!(cs.current, g.aux);
        assert_eq!(g.distance_to_accepting(cs.target).unwrap(), Some(1));
        // bootstrap with the empty symbol
        assert_eq!(cs.pending.symbol, Symbol::empty());
        let cs = advance(&g, &cs, &Symbol::empty(), None).unwrap();
        assert_eq!(g.distance_to_accepting(cs.current).unwrap(), Some(1));
        assert_eq!(
            cs.pending.symbol,
            Symbol::singleton(Predicate::move_to("l1"))
        );
        let sym = cs.pending.symbol.clone();
        let cs = advance(&g, &cs, &sym, None).unwrap();
        assert!(g.accepting_sources.contains(&cs.current));
        // at the accepting source the accepting edge is forced
        assert!(cs.pending.accepting);
        assert_eq!(
            cs.pending.symbol,
            Symbol::singleton(Predicate::move_to("l2"))
        );
        let sym = cs.pending.symbol.clone();
        let cs = advance(&g, &cs, &sym, None).unwrap();
        assert_eq!(cs.accept_count, 1);
    }

    #[test]
    fn patrol_alternates_and_accepts_forever() {
        let g = patrol_graph();
        let mut cs = init(&g, None).unwrap();
        let mut accepts = 0;
        for _ in 0..100 {
            let sym = cs.pending.symbol.clone();
            cs = advance(&g, &cs, &sym, None).unwrap();
            accepts = cs.accept_count;
        }
        assert!(accepts >= 49, "acceptance counter grew only to {accepts}");
    }

    #[test]
    fn mismatch_is_an_error() {
        let g = patrol_graph();
        let cs = init(&g, None).unwrap();
        let wrong = Symbol::singleton(Predicate::move_to("l2"));
        assert!(matches!(
            advance(&g, &cs, &wrong, None),
            Err(SymbolicError::Mismatch { .. })
        ));
    }

    #[test]
    fn infeasible_single_edge_graph_fails() {
        let g = patrol_graph();
        let cs = init(&g, None).unwrap();
        // the only way forward from aux is the bootstrap edge; exhausting it
        // must fail the mission
        match report_infeasible(&g, &cs, None) {
            RecoverOutcome::Failure(msg) => {
                assert!(msg.contains("cannot accomplish"), "{msg}");
            }
            RecoverOutcome::Retry(cs2) => {
                // aux has three witnesses on its single edge; exhaust them all
                let mut cs2 = cs2;
                let mut failed = false;
                for _ in 0..5 {
                    match report_infeasible(&g, &cs2, None) {
                        RecoverOutcome::Retry(next) => cs2 = next,
                        RecoverOutcome::Failure(_) => {
                            failed = true;
                            break;
                        }
                    }
                }
                assert!(failed);
            }
        }
    }

    #[test]
    fn progress_decrements_by_exactly_one() {
        let f = parse_ltl(
            "F (pi(grasp,o1) & F (pi(release,o1,l2) & F (pi(grasp,o2) & F pi(release,o2,l3))))",
        )
        .unwrap();
        let nba = prune_nba(&translate_to_nba(&f));
        let (nba, aux) = add_aux_state(&nba, &Symbol::empty());
        let g = build_task_graph(&nba, aux).unwrap();
        let mut cs = init(&g, None).unwrap();
        let mut last_d = g.distance_to_accepting(cs.current).unwrap().unwrap();
        while !g.accepting_sources.contains(&cs.current) {
            let sym = cs.pending.symbol.clone();
            cs = advance(&g, &cs, &sym, None).unwrap();
            let d = g.distance_to_accepting(cs.current).unwrap().unwrap();
            assert_eq!(d + 1, last_d, "distance must fall by exactly one");
            last_d = d;
        }
    }
}
