//! Formula-to-Buchi translation: expansion tableau to a generalized Buchi
//! automaton, counter-based degeneralization, then language-preserving
//! cleanup (reachability, productive states, bisimulation quotient).

use super::nba::{Guard, Nba, StateId};
use super::{LtlFormula, Predicate};
use std::collections::{BTreeMap, BTreeSet};

type FId = usize;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Sub {
    Atom(usize),
    And(FId, FId),
    Or(FId, FId),
    Until(FId, FId),
    Eventually(FId),
    Always(FId),
}

struct Arena {
    subs: Vec<Sub>,
    interned: BTreeMap<Sub, FId>,
    atoms: Vec<Predicate>,
}

impl Arena {
    fn intern(&mut self, s: Sub) -> FId {
        if let Some(&id) = self.interned.get(&s) {
            return id;
        }
        let id = self.subs.len();
        self.subs.push(s.clone());
        self.interned.insert(s, id);
        id
    }

    fn build(&mut self, f: &LtlFormula) -> FId {
        match f {
            LtlFormula::Atom(p) => {
                let i = self.atoms.iter().position(|a| a == p).unwrap();
                self.intern(Sub::Atom(i))
            }
            LtlFormula::And(a, b) => {
                let (x, y) = (self.build(a), self.build(b));
                self.intern(Sub::And(x, y))
            }
            LtlFormula::Or(a, b) => {
                let (x, y) = (self.build(a), self.build(b));
                self.intern(Sub::Or(x, y))
            }
            LtlFormula::Until(a, b) => {
                let (x, y) = (self.build(a), self.build(b));
                self.intern(Sub::Until(x, y))
            }
            LtlFormula::Eventually(a) => {
                let x = self.build(a);
                self.intern(Sub::Eventually(x))
            }
            LtlFormula::Always(a) => {
                let x = self.build(a);
                self.intern(Sub::Always(x))
            }
        }
    }
}

const INIT: usize = usize::MAX;

#[derive(Clone)]
struct Pending {
    incoming: BTreeSet<usize>,
    new: BTreeSet<FId>,
    old: BTreeSet<FId>,
    next: BTreeSet<FId>,
}

type NodeKey = (BTreeSet<FId>, BTreeSet<FId>);

struct Tableau<'a> {
    arena: &'a Arena,
    /// formulas that matter for guards and acceptance; node identity is
    /// restricted to these
    relevant: BTreeSet<FId>,
    keys: Vec<NodeKey>,
    incoming: Vec<BTreeSet<usize>>,
    by_key: BTreeMap<NodeKey, usize>,
    work: Vec<Pending>,
}

impl<'a> Tableau<'a> {
    fn run(arena: &'a Arena, root: FId) -> Tableau<'a> {
        let mut relevant = BTreeSet::new();
        for (id, s) in arena.subs.iter().enumerate() {
            match s {
                Sub::Atom(_) => {
                    relevant.insert(id);
                }
                Sub::Until(_, b) => {
                    relevant.insert(id);
                    relevant.insert(*b);
                }
                Sub::Eventually(b) => {
                    relevant.insert(id);
                    relevant.insert(*b);
                }
                _ => {}
            }
        }
        let mut t = Tableau {
            arena,
            relevant,
            keys: Vec::new(),
            incoming: Vec::new(),
            by_key: BTreeMap::new(),
            work: Vec::new(),
        };
        t.work.push(Pending {
            incoming: [INIT].into(),
            new: [root].into(),
            old: BTreeSet::new(),
            next: BTreeSet::new(),
        });
        while let Some(p) = t.work.pop() {
            t.expand(p);
        }
        t
    }

    fn close(&mut self, p: Pending) {
        let rel_old: BTreeSet<FId> = p.old.intersection(&self.relevant).copied().collect();
        let key = (rel_old, p.next.clone());
        if let Some(&id) = self.by_key.get(&key) {
            self.incoming[id].extend(p.incoming.iter().copied());
            return;
        }
        let id = self.keys.len();
        self.keys.push(key.clone());
        self.incoming.push(p.incoming);
        self.by_key.insert(key, id);
        self.work.push(Pending {
            incoming: [id].into(),
            new: p.next,
            old: BTreeSet::new(),
            next: BTreeSet::new(),
        });
    }

    fn expand(&mut self, mut n: Pending) {
        loop {
            let f = match n.new.pop_first() {
                None => {
                    self.close(n);
                    return;
                }
                Some(f) => f,
            };
            if n.old.contains(&f) {
                continue;
            }
            n.old.insert(f);
            match self.arena.subs[f] {
                Sub::Atom(_) => {}
                Sub::And(a, b) => {
                    n.new.insert(a);
                    n.new.insert(b);
                }
                Sub::Or(a, b) => {
                    let mut right = n.clone();
                    right.new.insert(b);
                    self.expand(right);
                    n.new.insert(a);
                }
                Sub::Until(a, b) => {
                    let mut right = n.clone();
                    right.new.insert(b);
                    self.expand(right);
                    n.new.insert(a);
                    n.next.insert(f);
                }
                Sub::Eventually(b) => {
                    let mut right = n.clone();
                    right.new.insert(b);
                    self.expand(right);
                    n.next.insert(f);
                }
                Sub::Always(b) => {
                    n.new.insert(b);
                    n.next.insert(f);
                }
            }
        }
    }
}

/// Translate a validated mission formula to an NBA whose language equals the
/// formula's semantics over infinite words.
pub fn translate_to_nba(f: &LtlFormula) -> Nba {
    let atoms = f.atoms();
    let mut arena = Arena {
        subs: Vec::new(),
        interned: BTreeMap::new(),
        atoms: atoms.clone(),
    };
    let root = arena.build(f);
    let t = Tableau::run(&arena, root);
    let n_real = t.keys.len();
    let iota = n_real;

    // generalized Buchi automaton over real nodes + explicit initial state
    let mut gba_edges: Vec<(StateId, Guard, StateId)> = Vec::new();
    for (r, key) in t.keys.iter().enumerate() {
        let guard_atoms: Vec<usize> = key
            .0
            .iter()
            .filter_map(|&fid| match arena.subs[fid] {
                Sub::Atom(i) => Some(i),
                _ => None,
            })
            .collect();
        let guard = Guard::conj(guard_atoms);
        for &q in &t.incoming[r] {
            let src = if q == INIT { iota } else { q };
            gba_edges.push((src, guard.clone(), r));
        }
    }

    // acceptance sets per Until/Eventually subformula, in formula order
    let mut sets: Vec<BTreeSet<StateId>> = Vec::new();
    for (fid, s) in arena.subs.iter().enumerate() {
        let rhs = match s {
            Sub::Until(_, b) => *b,
            Sub::Eventually(b) => *b,
            _ => continue,
        };
        let set: BTreeSet<StateId> = (0..n_real)
            .filter(|&r| {
                let rel_old = &t.keys[r].0;
                rel_old.contains(&rhs) || !rel_old.contains(&fid)
            })
            .collect();
        if set.len() == n_real {
            continue; // vacuous
        }
        if !sets.contains(&set) {
            sets.push(set);
        }
    }

    let nba = degeneralize(n_real + 1, iota, &gba_edges, &sets, atoms);
    simplify(nba)
}

fn degeneralize(
    num_states: usize,
    iota: StateId,
    edges: &[(StateId, Guard, StateId)],
    sets: &[BTreeSet<StateId>],
    atoms: Vec<Predicate>,
) -> Nba {
    let k = sets.len();
    if k <= 1 {
        let finals: BTreeSet<StateId> = match sets.first() {
            None => (0..num_states).collect(),
            Some(s) => s.clone(),
        };
        let mut transitions: BTreeMap<StateId, Vec<(Guard, StateId)>> = BTreeMap::new();
        for (q, g, r) in edges {
            transitions.entry(*q).or_default().push((g.clone(), *r));
        }
        let mut nba = Nba {
            num_states,
            initial: [iota].into(),
            finals,
            transitions,
            atoms,
        };
        nba.normalize();
        return nba;
    }

    // counter construction: state (q, j) means acceptance sets 0..j have
    // been collected in the current round; j == k is accepting and resets.
    let idx = |q: StateId, j: usize| q * (k + 1) + j;
    let mut transitions: BTreeMap<StateId, Vec<(Guard, StateId)>> = BTreeMap::new();
    for (q, g, r) in edges {
        for j in 0..=k {
            let mut jj = if j == k { 0 } else { j };
            while jj < k && sets[jj].contains(q) {
                jj += 1;
            }
            transitions
                .entry(idx(*q, j))
                .or_default()
                .push((g.clone(), idx(*r, jj)));
        }
    }
    let finals: BTreeSet<StateId> = (0..num_states).map(|q| idx(q, k)).collect();
    let mut nba = Nba {
        num_states: num_states * (k + 1),
        initial: [idx(iota, 0)].into(),
        finals,
        transitions,
        atoms,
    };
    nba.normalize();
    nba
}

/// Language-preserving cleanup: drop unreachable and non-productive states,
/// quotient by bisimulation, renumber breadth-first from the initial states.
pub(crate) fn simplify(mut nba: Nba) -> Nba {
    loop {
        let before = (nba.num_states, count_edges(&nba));
        nba = restrict(&nba, &reachable(&nba));
        nba = restrict(&nba, &productive(&nba));
        nba = quotient(&nba);
        if (nba.num_states, count_edges(&nba)) == before {
            break;
        }
    }
    renumber_bfs(&nba)
}

fn count_edges(nba: &Nba) -> usize {
    nba.transitions.values().map(|v| v.len()).sum()
}

fn reachable(nba: &Nba) -> BTreeSet<StateId> {
    let mut seen: BTreeSet<StateId> = nba.initial.clone();
    let mut stack: Vec<StateId> = nba.initial.iter().copied().collect();
    while let Some(q) = stack.pop() {
        for (_, t) in nba.edges_from(q) {
            if seen.insert(*t) {
                stack.push(*t);
            }
        }
    }
    seen
}

/// States from which an accepting cycle is reachable.
fn productive(nba: &Nba) -> BTreeSet<StateId> {
    let n = nba.num_states;
    let sccs = tarjan_sccs(nba);
    let mut live = vec![false; n];
    for scc in &sccs {
        let has_final = scc.iter().any(|q| nba.finals.contains(q));
        if !has_final {
            continue;
        }
        let cyclic = scc.len() > 1
            || nba
                .edges_from(scc[0])
                .iter()
                .any(|(_, t)| *t == scc[0]);
        if cyclic {
            for &q in scc {
                live[q] = true;
            }
        }
    }
    // backward closure over the edge relation
    let mut rev: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (q, edges) in &nba.transitions {
        for (_, t) in edges {
            rev[*t].push(*q);
        }
    }
    let mut keep: BTreeSet<StateId> = (0..n).filter(|&q| live[q]).collect();
    let mut stack: Vec<StateId> = keep.iter().copied().collect();
    while let Some(q) = stack.pop() {
        for &p in &rev[q] {
            if keep.insert(p) {
                stack.push(p);
            }
        }
    }
    keep
}

fn tarjan_sccs(nba: &Nba) -> Vec<Vec<StateId>> {
    struct T<'a> {
        nba: &'a Nba,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<StateId>,
        counter: usize,
        out: Vec<Vec<StateId>>,
    }
    // iterative to avoid deep recursion on long chains
    impl<'a> T<'a> {
        fn visit(&mut self, root: StateId) {
            let mut call: Vec<(StateId, usize)> = vec![(root, 0)];
            while let Some(&mut (v, ref mut ei)) = call.last_mut() {
                if *ei == 0 {
                    self.index[v] = Some(self.counter);
                    self.low[v] = self.counter;
                    self.counter += 1;
                    self.stack.push(v);
                    self.on_stack[v] = true;
                }
                let edges = self.nba.edges_from(v);
                if *ei < edges.len() {
                    let w = edges[*ei].1;
                    *ei += 1;
                    match self.index[w] {
                        None => call.push((w, 0)),
                        Some(widx) => {
                            if self.on_stack[w] {
                                self.low[v] = self.low[v].min(widx);
                            }
                        }
                    }
                } else {
                    if self.low[v] == self.index[v].unwrap() {
                        let mut scc = Vec::new();
                        loop {
                            let w = self.stack.pop().unwrap();
                            self.on_stack[w] = false;
                            scc.push(w);
                            if w == v {
                                break;
                            }
                        }
                        scc.sort_unstable();
                        self.out.push(scc);
                    }
                    let low_v = self.low[v];
                    call.pop();
                    if let Some(&mut (u, _)) = call.last_mut() {
                        self.low[u] = self.low[u].min(low_v);
                    }
                }
            }
        }
    }
    let n = nba.num_states;
    let mut t = T {
        nba,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        counter: 0,
        out: Vec::new(),
    };
    for q in 0..n {
        if t.index[q].is_none() {
            t.visit(q);
        }
    }
    t.out.sort();
    t.out
}

/// Keep only the given states, dropping dangling edges. State ids preserved.
fn restrict(nba: &Nba, keep: &BTreeSet<StateId>) -> Nba {
    let mut out = nba.clone();
    out.initial = nba.initial.intersection(keep).copied().collect();
    out.finals = nba.finals.intersection(keep).copied().collect();
    out.transitions = nba
        .transitions
        .iter()
        .filter(|(q, _)| keep.contains(q))
        .map(|(q, edges)| {
            (
                *q,
                edges
                    .iter()
                    .filter(|(_, t)| keep.contains(t))
                    .cloned()
                    .collect(),
            )
        })
        .collect();
    out.transitions.retain(|_, v: &mut Vec<_>| !v.is_empty());
    out
}

/// Quotient by the coarsest bisimulation that respects acceptance: partition
/// refinement on (accepting, outgoing (guard, class) signature).
fn quotient(nba: &Nba) -> Nba {
    let n = nba.num_states;
    if n == 0 {
        return nba.clone();
    }
    let mut class: Vec<usize> = (0..n)
        .map(|q| usize::from(nba.finals.contains(&q)))
        .collect();
    loop {
        let mut sig_to_class: BTreeMap<(usize, BTreeSet<(Guard, usize)>), usize> = BTreeMap::new();
        let mut next_class = vec![0usize; n];
        for q in 0..n {
            let sig: BTreeSet<(Guard, usize)> = nba
                .edges_from(q)
                .iter()
                .map(|(g, t)| (g.clone().canonical(), class[*t]))
                .collect();
            let key = (class[q], sig);
            let m = sig_to_class.len();
            let c = *sig_to_class.entry(key).or_insert(m);
            next_class[q] = c;
        }
        if next_class == class {
            break;
        }
        class = next_class;
    }
    let num_classes = class.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut transitions: BTreeMap<StateId, Vec<(Guard, StateId)>> = BTreeMap::new();
    for (q, edges) in &nba.transitions {
        for (g, t) in edges {
            transitions
                .entry(class[*q])
                .or_default()
                .push((g.clone(), class[*t]));
        }
    }
    let mut out = Nba {
        num_states: num_classes,
        initial: nba.initial.iter().map(|&q| class[q]).collect(),
        finals: nba.finals.iter().map(|&q| class[q]).collect(),
        transitions,
        atoms: nba.atoms.clone(),
    };
    out.normalize();
    out
}

fn renumber_bfs(nba: &Nba) -> Nba {
    let mut order: Vec<StateId> = Vec::new();
    let mut seen: BTreeSet<StateId> = BTreeSet::new();
    let mut queue: std::collections::VecDeque<StateId> = Default::default();
    for &q in &nba.initial {
        if seen.insert(q) {
            queue.push_back(q);
        }
    }
    while let Some(q) = queue.pop_front() {
        order.push(q);
        for (_, t) in nba.edges_from(q) {
            if seen.insert(*t) {
                queue.push_back(*t);
            }
        }
    }
    // keep any stragglers (should not happen after reachability restriction)
    for q in 0..nba.num_states {
        if seen.insert(q) {
            order.push(q);
        }
    }
    let mut remap = vec![0usize; nba.num_states];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let mut transitions: BTreeMap<StateId, Vec<(Guard, StateId)>> = BTreeMap::new();
    for (q, edges) in &nba.transitions {
        for (g, t) in edges {
            transitions
                .entry(remap[*q])
                .or_default()
                .push((g.clone(), remap[*t]));
        }
    }
    let mut out = Nba {
        num_states: order.len(),
        initial: nba.initial.iter().map(|&q| remap[q]).collect(),
        finals: nba.finals.iter().map(|&q| remap[q]).collect(),
        transitions,
        atoms: nba.atoms.clone(),
    };
    out.normalize();
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_ltl;
    use super::*;

    #[test]
    fn eventually_yields_two_states() {
        let f = parse_ltl("F pi(move,l1)").unwrap();
        let nba = translate_to_nba(&f);
        assert_eq!(nba.num_states, 2);
        assert_eq!(nba.initial.len(), 1);
        assert_eq!(nba.finals.len(), 1);
        let q0 = *nba.initial.first().unwrap();
        let qf = *nba.finals.first().unwrap();
        assert_ne!(q0, qf);
        // q0 self-loop on true, q0 -atom-> qf, qf self-loop on true
        let from0 = nba.edges_from(q0);
        assert!(from0.iter().any(|(g, t)| *t == q0 && g.is_true()));
        assert!(from0.iter().any(|(g, t)| *t == qf && *g == Guard::atom(0)));
        let fromf = nba.edges_from(qf);
        assert!(fromf.iter().any(|(g, t)| *t == qf && g.is_true()));
    }

    #[test]
    fn no_guard_contains_negation_by_construction() {
        // Guards are DNF over positive atoms only; check they evaluate
        // monotonically on a sample formula.
        let f = parse_ltl("G F pi(move,l1) & G F pi(move,l2)").unwrap();
        let nba = translate_to_nba(&f);
        for edges in nba.transitions.values() {
            for (g, _) in edges {
                for conj in &g.0 {
                    for &a in conj {
                        assert!(a < nba.atoms.len());
                    }
                }
                // monotone: satisfied symbols stay satisfied with more atoms
                for sym in 0u64..(1 << nba.atoms.len()) {
                    if g.eval(sym) {
                        assert!(g.eval(sym | 1), "guard not monotone");
                    }
                }
            }
        }
    }

    #[test]
    fn recurrence_pair_accepts_expected_lassos() {
        let f = parse_ltl("G F pi(move,l1) & G F pi(move,l2)").unwrap();
        let nba = translate_to_nba(&f);
        assert_eq!(nba.atoms.len(), 2);
        let a = 0b01; // pi(move,l1) sorted first
        let b = 0b10;
        assert!(nba.accepts_lasso(&[], &[a, b]));
        assert!(nba.accepts_lasso(&[0], &[b, a]));
        assert!(!nba.accepts_lasso(&[], &[a]));
        assert!(!nba.accepts_lasso(&[a, b], &[0]));
        assert!(nba.accepts_lasso(&[], &[a | b]));
    }

    #[test]
    fn single_atom_formula() {
        let f = parse_ltl("pi(grasp,o1)").unwrap();
        let nba = translate_to_nba(&f);
        let a = 0b1;
        assert!(nba.accepts_lasso(&[a], &[0]));
        assert!(!nba.accepts_lasso(&[0], &[a]));
        assert!(nba.accepts_lasso(&[], &[a]));
    }

    #[test]
    fn until_semantics() {
        let f = parse_ltl("pi(move,l1) U pi(move,l2)").unwrap();
        let nba = translate_to_nba(&f);
        let a = 0b01;
        let b = 0b10;
        assert!(nba.accepts_lasso(&[a, a, b], &[0]));
        assert!(nba.accepts_lasso(&[b], &[0]));
        assert!(!nba.accepts_lasso(&[], &[a]));
        assert!(!nba.accepts_lasso(&[a, 0, b], &[0]));
    }
}
