//! Non-deterministic Buchi automata over manipulation predicates.

use super::Predicate;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

pub type StateId = usize;

/// Negation-free transition guard in disjunctive normal form: a disjunction
/// of conjunctions of atom indices. `Guard::truth()` is the empty conjunction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Guard(pub Vec<Vec<usize>>);

impl Guard {
    pub fn truth() -> Guard {
        Guard(vec![vec![]])
    }

    pub fn falsity() -> Guard {
        Guard(vec![])
    }

    pub fn atom(i: usize) -> Guard {
        Guard(vec![vec![i]])
    }

    pub fn conj(atoms: impl IntoIterator<Item = usize>) -> Guard {
        let mut c: Vec<usize> = atoms.into_iter().collect();
        c.sort_unstable();
        c.dedup();
        Guard(vec![c])
    }

    pub fn is_false(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_true(&self) -> bool {
        self.0.iter().any(|c| c.is_empty())
    }

    /// Satisfaction by a symbol given as a bitmask over the atom table.
    pub fn eval(&self, symbol: u64) -> bool {
        self.0
            .iter()
            .any(|conj| conj.iter().all(|&a| symbol & (1u64 << a) != 0))
    }

    /// Disjunction of two guards, canonicalized.
    pub fn or(&self, other: &Guard) -> Guard {
        let mut d = self.0.clone();
        d.extend(other.0.iter().cloned());
        Guard(d).canonical()
    }

    /// Conjunction of two guards (DNF product), canonicalized.
    pub fn and(&self, other: &Guard) -> Guard {
        let mut d = Vec::new();
        for a in &self.0 {
            for b in &other.0 {
                let mut c = a.clone();
                c.extend(b.iter().copied());
                c.sort_unstable();
                c.dedup();
                d.push(c);
            }
        }
        Guard(d).canonical()
    }

    /// Sort, dedup and drop absorbed conjuncts (a superset of another
    /// conjunct is redundant for a monotone formula).
    pub fn canonical(mut self) -> Guard {
        for c in &mut self.0 {
            c.sort_unstable();
            c.dedup();
        }
        self.0.sort();
        self.0.dedup();
        let kept: Vec<Vec<usize>> = self
            .0
            .iter()
            .filter(|c| {
                !self
                    .0
                    .iter()
                    .any(|d| d.len() < c.len() && d.iter().all(|x| c.contains(x)))
            })
            .cloned()
            .collect();
        Guard(kept)
    }

    pub fn atoms_used(&self) -> BTreeSet<usize> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn render(&self, atoms: &[Predicate]) -> String {
        if self.is_true() {
            return "true".to_string();
        }
        if self.is_false() {
            return "false".to_string();
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|c| {
                let lits: Vec<String> = c.iter().map(|&i| atoms[i].to_string()).collect();
                lits.join(" & ")
            })
            .collect();
        parts.join(" | ")
    }
}

/// Non-deterministic Buchi automaton with transition guards over a fixed
/// atom table. Acceptance: some final state visited infinitely often.
#[derive(Clone, Debug, PartialEq)]
pub struct Nba {
    pub num_states: usize,
    pub initial: BTreeSet<StateId>,
    pub finals: BTreeSet<StateId>,
    /// source -> list of (guard, target), sorted by (target, guard)
    pub transitions: BTreeMap<StateId, Vec<(Guard, StateId)>>,
    /// sorted, deduplicated atom universe
    pub atoms: Vec<Predicate>,
}

impl Nba {
    pub fn edges_from(&self, q: StateId) -> &[(Guard, StateId)] {
        self.transitions.get(&q).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn atom_index(&self, p: &Predicate) -> Option<usize> {
        self.atoms.iter().position(|a| a == p)
    }

    /// Canonicalize: merge parallel edges into one guard, sort everything.
    pub fn normalize(&mut self) {
        for (_, edges) in self.transitions.iter_mut() {
            let mut by_target: BTreeMap<StateId, Guard> = BTreeMap::new();
            for (g, t) in edges.iter() {
                by_target
                    .entry(*t)
                    .and_modify(|acc| *acc = acc.or(g))
                    .or_insert_with(|| g.clone().canonical());
            }
            *edges = by_target
                .into_iter()
                .filter(|(_, g)| !g.is_false())
                .map(|(t, g)| (g, t))
                .collect();
        }
        self.transitions.retain(|_, v| !v.is_empty());
    }

    /// Does any initial-rooted run over the ultimately periodic word
    /// `stem . cycle^w` visit a final state infinitely often?
    ///
    /// Symbols are bitmasks over the atom table.
    pub fn accepts_lasso(&self, stem: &[u64], cycle: &[u64]) -> bool {
        assert!(!cycle.is_empty(), "lasso needs a nonempty cycle");
        let total = stem.len() + cycle.len();
        let letter = |i: usize| -> u64 {
            if i < stem.len() {
                stem[i]
            } else {
                cycle[i - stem.len()]
            }
        };
        let next_pos = |i: usize| -> usize {
            if i + 1 < total {
                i + 1
            } else {
                stem.len()
            }
        };
        // product node = state * total + pos
        let idx = |q: StateId, pos: usize| q * total + pos;
        let nodes = self.num_states * total;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for q in 0..self.num_states {
            for pos in 0..total {
                let sym = letter(pos);
                for (g, t) in self.edges_from(q) {
                    if g.eval(sym) {
                        adj[idx(q, pos)].push(idx(*t, next_pos(pos)));
                    }
                }
            }
        }
        // reachable product nodes from initial states at pos 0
        let mut reach = vec![false; nodes];
        let mut stack: Vec<usize> = self.initial.iter().map(|&q| idx(q, 0)).collect();
        for &s in &stack {
            reach[s] = true;
        }
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !reach[m] {
                    reach[m] = true;
                    stack.push(m);
                }
            }
        }
        // accepting iff some reachable (final, pos) lies on a product cycle
        for &f in &self.finals {
            for pos in stem.len()..total {
                let n = idx(f, pos);
                if !reach[n] {
                    continue;
                }
                // nonempty path n -> n
                let mut seen = vec![false; nodes];
                let mut stack2: Vec<usize> = adj[n].clone();
                for &s in &stack2 {
                    if s == n {
                        return true;
                    }
                }
                while let Some(m) = stack2.pop() {
                    if seen[m] {
                        continue;
                    }
                    seen[m] = true;
                    for &k in &adj[m] {
                        if k == n {
                            return true;
                        }
                        if !seen[k] {
                            stack2.push(k);
                        }
                    }
                }
            }
        }
        false
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph nba {{");
        let _ = writeln!(s, "  rankdir=LR;");
        let _ = writeln!(s, "  node [shape=circle];");
        for q in 0..self.num_states {
            let shape = if self.finals.contains(&q) {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(s, "  q{q} [shape={shape}];");
        }
        for &q in &self.initial {
            let _ = writeln!(s, "  init{q} [shape=point,label=\"\"];");
            let _ = writeln!(s, "  init{q} -> q{q};");
        }
        for (q, edges) in &self.transitions {
            for (g, t) in edges {
                let _ = writeln!(s, "  q{q} -> q{t} [label=\"{}\"];", g.render(&self.atoms));
            }
        }
        let _ = writeln!(s, "}}");
        s
    }
}
