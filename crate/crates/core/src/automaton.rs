//! From a pruned Buchi automaton to the multi-hop task graph with a
//! distance-to-acceptance metric.
//!
//! A symbol is feasible when it never asserts presence in two regions or two
//! distinct actions at the same region simultaneously; feasible symbols
//! therefore carry at most one predicate. Infeasible transitions are removed,
//! an auxiliary initial state capturing the initially satisfied predicate is
//! added, and graph edges are the multi-hop transitions induced by finitely
//! repeating a single feasible symbol.

use crate::ltl::{Guard, Nba, Predicate, StateId};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutomatonError {
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("task graph is empty: no state beyond the auxiliary one is reachable with a feasible self-loop")]
    EmptyGraph,
}

/// A set of atomic predicates observed simultaneously.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Symbol(pub BTreeSet<Predicate>);

impl Symbol {
    pub fn empty() -> Symbol {
        Symbol(BTreeSet::new())
    }

    pub fn singleton(p: Predicate) -> Symbol {
        Symbol([p].into())
    }

    pub fn the_predicate(&self) -> Option<&Predicate> {
        if self.0.len() == 1 {
            self.0.first()
        } else {
            None
        }
    }

    /// Bitmask over an atom table; predicates outside the table satisfy no
    /// guard atom and contribute no bits.
    pub fn mask(&self, atoms: &[Predicate]) -> u64 {
        let mut m = 0u64;
        for p in &self.0 {
            if let Some(i) = atoms.iter().position(|a| a == p) {
                m |= 1 << i;
            }
        }
        m
    }
}

impl std::fmt::Display for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", parts.join("&"))
    }
}

/// True iff the symbol does not satisfy the infeasibility formula: no two
/// predicates assert different regions, and no two distinct actions share a
/// region (the absent region of a Grasp counts as a region value).
pub fn symbol_is_feasible(s: &Symbol) -> bool {
    let preds: Vec<&Predicate> = s.0.iter().collect();
    for (i, p) in preds.iter().enumerate() {
        for q in preds.iter().skip(i + 1) {
            if p.region != q.region {
                return false; // present in more than one region
            }
            if p != q {
                return false; // two distinct actions at the same region
            }
        }
    }
    true
}

/// Remove every transition whose guard is not satisfiable by a feasible
/// symbol. Feasible symbols have at most one predicate, so satisfiability is
/// checked against the empty symbol and the singletons of the guard's atoms.
pub fn prune_nba(n: &Nba) -> Nba {
    let mut out = n.clone();
    for (_, edges) in out.transitions.iter_mut() {
        edges.retain(|(g, _)| guard_feasibly_satisfiable(g));
    }
    out.transitions.retain(|_, v| !v.is_empty());
    out
}

fn guard_feasibly_satisfiable(g: &Guard) -> bool {
    if g.eval(0) {
        return true;
    }
    g.atoms_used().iter().any(|&a| g.eval(1u64 << a))
}

/// Add the auxiliary initial state: a true self-loop, plus an edge to every
/// former initial state guarded by the initially satisfied predicate
/// (the empty symbol yields a true guard). Returns the new automaton and the
/// auxiliary state id; finals are unchanged and the auxiliary state becomes
/// the unique initial state.
pub fn add_aux_state(n: &Nba, pi0: &Symbol) -> (Nba, StateId) {
    let mut out = n.clone();
    for p in &pi0.0 {
        if out.atom_index(p).is_none() {
            out.atoms.push(p.clone());
        }
    }
    let aux = out.num_states;
    out.num_states += 1;
    let guard = Guard::conj(pi0.0.iter().map(|p| out.atom_index(p).unwrap()));
    let mut edges = vec![(Guard::truth(), aux)];
    for &q0 in &n.initial {
        edges.push((guard.clone(), q0));
    }
    out.transitions.insert(aux, edges);
    out.initial = [aux].into();
    out.normalize();
    (out, aux)
}

/// A single-symbol multi-hop run witnessing a graph edge.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    #[serde(serialize_with = "serialize_symbol")]
    pub symbol: Symbol,
    /// induced NBA run, source first, target last; the target self-loops
    /// under the symbol
    pub run: Vec<StateId>,
    /// the run passes through (or ends in) a final NBA state
    pub accepting: bool,
}

fn serialize_symbol<S: serde::Serializer>(s: &Symbol, ser: S) -> Result<S::Ok, S::Error> {
    let v: Vec<String> = s.0.iter().map(|p| p.to_string()).collect();
    v.serialize(ser)
}

impl Witness {
    /// The conjunction of transition guards along the stored run, including
    /// the target's self-loop guard.
    pub fn run_conjunction(&self, nba: &Nba) -> Guard {
        let mut acc = Guard::truth();
        for w in self.run.windows(2) {
            acc = acc.and(&best_guard(nba, w[0], w[1]));
        }
        let last = *self.run.last().unwrap();
        acc.and(&best_guard(nba, last, last)).canonical()
    }
}

fn best_guard(nba: &Nba, from: StateId, to: StateId) -> Guard {
    let mut acc = Guard::falsity();
    for (g, t) in nba.edges_from(from) {
        if *t == to {
            acc = acc.or(g);
        }
    }
    acc
}

#[derive(Clone, Debug, Serialize)]
pub struct TgEdge {
    pub from: StateId,
    pub to: StateId,
    pub accepting: bool,
    pub witnesses: Vec<Witness>,
}

/// The directed multi-hop task graph over NBA states with feasible
/// self-loops, with hop distances to the accepting-edge sources.
#[derive(Clone, Debug)]
pub struct TaskGraph {
    pub nba: Nba,
    pub aux: StateId,
    pub vertices: BTreeSet<StateId>,
    pub edges: BTreeMap<(StateId, StateId), TgEdge>,
    pub accepting_sources: BTreeSet<StateId>,
    dist_to_vf: BTreeMap<StateId, usize>,
}

impl TaskGraph {
    pub fn state_name(&self, q: StateId) -> String {
        if q == self.aux {
            "q_aux".to_string()
        } else {
            format!("q{q}")
        }
    }

    pub fn successors(&self, q: StateId) -> impl Iterator<Item = &TgEdge> + '_ {
        self.edges
            .range((q, StateId::MIN)..=(q, StateId::MAX))
            .map(|(_, e)| e)
    }

    pub fn edge(&self, q: StateId, t: StateId) -> Option<&TgEdge> {
        self.edges.get(&(q, t))
    }

    /// Hop count of the shortest path from `q` to `target`, if any.
    pub fn distance(&self, q: StateId, target: StateId) -> Result<Option<usize>, AutomatonError> {
        for v in [q, target] {
            if !self.vertices.contains(&v) {
                return Err(AutomatonError::UnknownVertex(self.state_name(v)));
            }
        }
        if q == target {
            return Ok(Some(0));
        }
        let mut dist: BTreeMap<StateId, usize> = [(q, 0)].into();
        let mut queue: VecDeque<StateId> = [q].into();
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            for e in self.successors(v) {
                if let std::collections::btree_map::Entry::Vacant(slot) = dist.entry(e.to) {
                    slot.insert(d + 1);
                    if e.to == target {
                        return Ok(Some(d + 1));
                    }
                    queue.push_back(e.to);
                }
            }
        }
        Ok(None)
    }

    /// Hop distance to the set of accepting-edge sources; `None` means no
    /// accepting edge is reachable.
    pub fn distance_to_accepting(&self, q: StateId) -> Result<Option<usize>, AutomatonError> {
        if !self.vertices.contains(&q) {
            return Err(AutomatonError::UnknownVertex(self.state_name(q)));
        }
        Ok(self.dist_to_vf.get(&q).copied())
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph taskgraph {{");
        let _ = writeln!(s, "  rankdir=LR;");
        for &v in &self.vertices {
            let d = match self.dist_to_vf.get(&v) {
                Some(d) => d.to_string(),
                None => "inf".to_string(),
            };
            let _ = writeln!(
                s,
                "  {} [label=\"{}\\nd_F={}\"];",
                self.state_name(v),
                self.state_name(v),
                d
            );
        }
        for e in self.edges.values() {
            let style = if e.accepting {
                ", style=dashed, color=red"
            } else {
                ""
            };
            let labels: Vec<String> = e.witnesses.iter().map(|w| w.symbol.to_string()).collect();
            let _ = writeln!(
                s,
                "  {} -> {} [label=\"{}\"{}];",
                self.state_name(e.from),
                self.state_name(e.to),
                labels.join(" / "),
                style
            );
        }
        let _ = writeln!(s, "}}");
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let vertices: Vec<serde_json::Value> = self
            .vertices
            .iter()
            .map(|&v| {
                serde_json::json!({
                    "id": v,
                    "name": self.state_name(v),
                    "d_f": self.dist_to_vf.get(&v),
                })
            })
            .collect();
        let edges: Vec<serde_json::Value> = self
            .edges
            .values()
            .map(|e| serde_json::to_value(e).unwrap())
            .collect();
        serde_json::json!({ "vertices": vertices, "edges": edges })
    }
}

/// Candidate feasible symbols over the automaton's atoms: the empty symbol
/// first, then singletons in atom-table order.
fn candidate_symbols(nba: &Nba) -> Vec<(Symbol, u64)> {
    let mut out = vec![(Symbol::empty(), 0u64)];
    for (i, p) in nba.atoms.iter().enumerate() {
        out.push((Symbol::singleton(p.clone()), 1u64 << i));
    }
    out
}

/// Build the task graph of a pruned automaton with auxiliary state `aux`.
///
/// Vertices are the states reachable from `aux` that own a feasible
/// self-loop. An edge (q, q') exists when some single feasible symbol,
/// finitely repeated, drives the automaton from q to q' without being able
/// to linger in any intermediate state, and activates q's self-loop on
/// arrival. Self-edges are kept only when accepting. An edge is accepting
/// when some witness run includes a final state.
pub fn build_task_graph(nba: &Nba, aux: StateId) -> Result<TaskGraph, AutomatonError> {
    let candidates = candidate_symbols(nba);

    // reachability over the (pruned, hence feasible) transitions
    let mut reach: BTreeSet<StateId> = [aux].into();
    let mut stack = vec![aux];
    while let Some(q) = stack.pop() {
        for (_, t) in nba.edges_from(q) {
            if reach.insert(*t) {
                stack.push(*t);
            }
        }
    }

    let has_feasible_self_loop = |q: StateId| -> bool {
        nba.edges_from(q)
            .iter()
            .any(|(g, t)| *t == q && guard_feasibly_satisfiable(g))
    };
    let vertices: BTreeSet<StateId> = reach
        .iter()
        .copied()
        .filter(|&q| q == aux || has_feasible_self_loop(q))
        .collect();

    let mut edges: BTreeMap<(StateId, StateId), TgEdge> = BTreeMap::new();
    for &q in &vertices {
        for (symbol, mask) in &candidates {
            // per-symbol structure: successor relation and linger set
            let succ = |s: StateId| -> Vec<StateId> {
                let mut v: Vec<StateId> = nba
                    .edges_from(s)
                    .iter()
                    .filter(|(g, _)| g.eval(*mask))
                    .map(|(_, t)| *t)
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            let lingers = |s: StateId| -> bool {
                nba.edges_from(s)
                    .iter()
                    .any(|(g, t)| *t == s && g.eval(*mask))
            };

            // forward BFS from q; only non-lingering states may be passed
            // through, lingering states terminate a run as its target
            let mut parent: BTreeMap<StateId, StateId> = BTreeMap::new();
            let mut queue: VecDeque<StateId> = VecDeque::new();
            for t in succ(q) {
                parent.entry(t).or_insert(q);
                queue.push_back(t);
            }
            let first_wave: Vec<StateId> = queue.iter().copied().collect();
            let mut visited: BTreeSet<StateId> = first_wave.iter().copied().collect();
            while let Some(s) = queue.pop_front() {
                if lingers(s) {
                    continue; // terminal under this symbol
                }
                for t in succ(s) {
                    if visited.insert(t) {
                        parent.insert(t, s);
                        queue.push_back(t);
                    }
                }
            }

            for (&target, _) in parent.iter() {
                if !lingers(target) || !vertices.contains(&target) {
                    continue;
                }
                // reconstruct the shortest run
                let mut run = vec![target];
                let mut cur = target;
                while cur != q {
                    cur = parent[&cur];
                    run.push(cur);
                }
                run.reverse();
                let mut accepting = run.iter().any(|s| nba.finals.contains(s));
                if !accepting {
                    if let Some(acc_run) = run_through_final(nba, q, target, &succ, &lingers) {
                        run = acc_run;
                        accepting = true;
                    }
                }
                if target == q && !accepting {
                    continue; // trivial self-edges add nothing
                }
                let entry = edges.entry((q, target)).or_insert_with(|| TgEdge {
                    from: q,
                    to: target,
                    accepting: false,
                    witnesses: Vec::new(),
                });
                entry.accepting |= accepting;
                entry.witnesses.push(Witness {
                    symbol: symbol.clone(),
                    run,
                    accepting,
                });
            }
        }
    }
    // self-edges were admitted only when accepting; drop any non-accepting
    // leftovers defensively and order witnesses deterministically
    edges.retain(|(a, b), e| a != b || e.accepting);
    for e in edges.values_mut() {
        e.witnesses.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    }

    if vertices.len() == 1 && edges.is_empty() {
        return Err(AutomatonError::EmptyGraph);
    }

    // reverse BFS from accepting-edge sources gives hop distances to V_F
    let accepting_sources: BTreeSet<StateId> = edges
        .values()
        .filter(|e| e.accepting)
        .map(|e| e.from)
        .collect();
    let mut dist_to_vf: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut queue: VecDeque<StateId> = VecDeque::new();
    for &v in &accepting_sources {
        dist_to_vf.insert(v, 0);
        queue.push_back(v);
    }
    let mut rev: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for (&(a, b), _) in &edges {
        rev.entry(b).or_default().push(a);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist_to_vf[&v];
        if let Some(preds) = rev.get(&v) {
            for &p in preds {
                if let std::collections::btree_map::Entry::Vacant(slot) = dist_to_vf.entry(p) {
                    slot.insert(d + 1);
                    queue.push_back(p);
                }
            }
        }
    }

    Ok(TaskGraph {
        nba: nba.clone(),
        aux,
        vertices,
        edges,
        accepting_sources,
        dist_to_vf,
    })
}

/// Shortest valid run from q to target passing through a final state, where
/// intermediates cannot linger under the symbol. Returns None if no such run.
fn run_through_final(
    nba: &Nba,
    q: StateId,
    target: StateId,
    succ: &dyn Fn(StateId) -> Vec<StateId>,
    lingers: &dyn Fn(StateId) -> bool,
) -> Option<Vec<StateId>> {
    // search over (state, passed-final) pairs through non-lingering
    // intermediates
    let start_flag = nba.finals.contains(&q);
    let mut parent: BTreeMap<(StateId, bool), (StateId, bool)> = BTreeMap::new();
    let mut queue: VecDeque<(StateId, bool)> = VecDeque::new();
    let goal_flag = |s: StateId, flag: bool| flag || nba.finals.contains(&s);
    for t in succ(q) {
        let node = (t, goal_flag(t, start_flag));
        if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(node) {
            slot.insert((q, start_flag));
            queue.push_back(node);
        }
    }
    while let Some((s, flag)) = queue.pop_front() {
        if s == target && flag {
            // reconstruct
            let mut run = vec![s];
            let mut cur = (s, flag);
            while cur.0 != q || parent.get(&cur).is_none() {
                match parent.get(&cur) {
                    Some(&p) => {
                        run.push(p.0);
                        cur = p;
                    }
                    None => break,
                }
            }
            run.reverse();
            if run[0] != q {
                run.insert(0, q);
            }
            return Some(run);
        }
        if lingers(s) {
            continue;
        }
        for t in succ(s) {
            let node = (t, goal_flag(t, flag));
            if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(node) {
                slot.insert((s, flag));
                queue.push_back(node);
            }
        }
    }
    None
}
