//! Import of automata in the HOA interchange format (v1), restricted to
//! state-based Buchi acceptance.
//!
//! HOA labels may contain negated atoms; since mission languages are
//! monotone, every imported label is replaced by its monotone relaxation
//! (negated literals become `t`), which preserves the language of automata
//! produced from the negation-free fragment.

use super::nba::{Guard, Nba, StateId};
use super::{LtlError, LtlFormula, Predicate};
use std::collections::{BTreeMap, BTreeSet};

pub fn import_hoa(text: &str) -> Result<Nba, LtlError> {
    let mut lines = text.lines().map(str::trim).peekable();
    let mut num_states: Option<usize> = None;
    let mut starts: BTreeSet<StateId> = BTreeSet::new();
    let mut ap_names: Vec<String> = Vec::new();
    let mut acceptance_ok = false;
    let mut saw_header = false;

    // header section
    for line in lines.by_ref() {
        if line.is_empty() {
            continue;
        }
        if line == "--BODY--" {
            break;
        }
        let (key, rest) = match line.split_once(':') {
            Some(kv) => kv,
            None => return Err(LtlError::Hoa(format!("malformed header line: {line}"))),
        };
        let rest = rest.trim();
        match key.trim() {
            "HOA" => {
                if rest != "v1" {
                    return Err(LtlError::Hoa(format!("unsupported HOA version {rest}")));
                }
                saw_header = true;
            }
            "States" => {
                num_states = Some(
                    rest.parse()
                        .map_err(|_| LtlError::Hoa(format!("bad States: {rest}")))?,
                );
            }
            "Start" => {
                if rest.contains('&') {
                    return Err(LtlError::Hoa(
                        "conjunctive start sets are not supported".into(),
                    ));
                }
                starts.insert(
                    rest.parse()
                        .map_err(|_| LtlError::Hoa(format!("bad Start: {rest}")))?,
                );
            }
            "AP" => {
                let mut parts = rest.splitn(2, ' ');
                let count: usize = parts
                    .next()
                    .unwrap_or("")
                    .parse()
                    .map_err(|_| LtlError::Hoa(format!("bad AP line: {rest}")))?;
                let names_part = parts.next().unwrap_or("");
                ap_names = parse_quoted_names(names_part)?;
                if ap_names.len() != count {
                    return Err(LtlError::Hoa(format!(
                        "AP count {count} does not match {} names",
                        ap_names.len()
                    )));
                }
            }
            "Acceptance" => {
                let squished: String = rest.chars().filter(|c| !c.is_whitespace()).collect();
                if squished == "1Inf(0)" {
                    acceptance_ok = true;
                } else {
                    return Err(LtlError::UnsupportedAcceptance(rest.to_string()));
                }
            }
            "acc-name" | "name" | "tool" | "properties" | "owner" => {}
            other => {
                return Err(LtlError::Hoa(format!("unsupported header item {other}:")));
            }
        }
    }
    if !saw_header {
        return Err(LtlError::Hoa("missing HOA: v1 header".into()));
    }
    if !acceptance_ok {
        return Err(LtlError::UnsupportedAcceptance(
            "missing Acceptance: 1 Inf(0)".into(),
        ));
    }
    let n = num_states.ok_or_else(|| LtlError::Hoa("missing States: header".into()))?;
    if n == 0 {
        return Err(LtlError::Hoa("automaton has no states".into()));
    }

    // AP names must be predicates of the mission fragment
    let mut predicates = Vec::new();
    for name in &ap_names {
        match super::parse_ltl(name) {
            Ok(LtlFormula::Atom(p)) => predicates.push(p),
            _ => {
                return Err(LtlError::Hoa(format!(
                    "AP {name:?} is not a manipulation predicate"
                )))
            }
        }
    }
    let atoms: Vec<Predicate> = {
        let mut sorted: Vec<Predicate> = predicates.clone();
        sorted.sort();
        sorted.dedup();
        sorted
    };
    let ap_to_atom: Vec<usize> = predicates
        .iter()
        .map(|p| atoms.iter().position(|a| a == p).unwrap())
        .collect();

    // body
    let mut finals: BTreeSet<StateId> = BTreeSet::new();
    let mut transitions: BTreeMap<StateId, Vec<(Guard, StateId)>> = BTreeMap::new();
    let mut current: Option<StateId> = None;
    let mut seen_states: BTreeSet<StateId> = BTreeSet::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if line == "--END--" {
            break;
        }
        if let Some(rest) = line.strip_prefix("State:") {
            let rest = rest.trim();
            if rest.starts_with('[') {
                return Err(LtlError::Hoa(
                    "state-labeled automata are not supported".into(),
                ));
            }
            // id ["name"] [{acc sets}]
            let (body, acc) = split_acc(rest)?;
            let id_str = body.split_whitespace().next().unwrap_or("");
            let id: StateId = id_str
                .parse()
                .map_err(|_| LtlError::Hoa(format!("bad state id {body:?}")))?;
            if id >= n {
                return Err(LtlError::Hoa(format!("state {id} out of range")));
            }
            if let Some(sets) = acc {
                if sets.contains(&0) {
                    finals.insert(id);
                }
            }
            seen_states.insert(id);
            current = Some(id);
        } else if line.starts_with('[') {
            let src =
                current.ok_or_else(|| LtlError::Hoa("edge line before any State:".into()))?;
            let close = line
                .find(']')
                .ok_or_else(|| LtlError::Hoa(format!("unterminated label in {line:?}")))?;
            let label = &line[1..close];
            let (rest, acc) = split_acc(line[close + 1..].trim())?;
            if acc.is_some() {
                return Err(LtlError::UnsupportedAcceptance(
                    "transition-based acceptance marks".into(),
                ));
            }
            let dst: StateId = rest
                .trim()
                .parse()
                .map_err(|_| LtlError::Hoa(format!("bad edge destination in {line:?}")))?;
            if dst >= n {
                return Err(LtlError::Hoa(format!("edge target {dst} out of range")));
            }
            let expr = parse_label(label)?;
            let guard = expr.relax().to_guard(&ap_to_atom);
            if !guard.is_false() {
                transitions.entry(src).or_default().push((guard, dst));
            }
        } else {
            return Err(LtlError::Hoa(format!(
                "implicit edge labels are not supported: {line:?}"
            )));
        }
    }
    if starts.is_empty() {
        return Err(LtlError::Hoa("missing Start: header".into()));
    }
    for &s in &starts {
        if s >= n {
            return Err(LtlError::Hoa(format!("start state {s} out of range")));
        }
    }

    let mut nba = Nba {
        num_states: n,
        initial: starts,
        finals,
        transitions,
        atoms,
    };
    nba.normalize();
    Ok(nba)
}

fn parse_quoted_names(s: &str) -> Result<Vec<String>, LtlError> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        if !rest.starts_with('"') {
            return Err(LtlError::Hoa(format!("expected quoted AP name in {s:?}")));
        }
        let end = rest[1..]
            .find('"')
            .ok_or_else(|| LtlError::Hoa(format!("unterminated AP name in {s:?}")))?;
        out.push(rest[1..1 + end].to_string());
        rest = rest[end + 2..].trim_start();
    }
    Ok(out)
}

/// Split a trailing `{a b c}` acceptance-set annotation off a body string.
fn split_acc(s: &str) -> Result<(&str, Option<Vec<usize>>), LtlError> {
    match s.find('{') {
        None => Ok((s.trim(), None)),
        Some(open) => {
            let close = s
                .find('}')
                .ok_or_else(|| LtlError::Hoa(format!("unterminated acceptance set in {s:?}")))?;
            let sets = s[open + 1..close]
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| LtlError::Hoa(format!("bad acceptance set {t:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((s[..open].trim(), Some(sets)))
        }
    }
}

/// Boolean label expressions over AP indices, with negation.
#[derive(Clone, Debug)]
enum LabelExpr {
    True,
    False,
    Ap(usize),
    Not(Box<LabelExpr>),
    And(Box<LabelExpr>, Box<LabelExpr>),
    Or(Box<LabelExpr>, Box<LabelExpr>),
}

impl LabelExpr {
    /// Monotone relaxation: push negation down and drop negated literals.
    fn relax(&self) -> LabelExpr {
        self.relax_inner(false)
    }

    fn relax_inner(&self, negated: bool) -> LabelExpr {
        match self {
            LabelExpr::True => {
                if negated {
                    LabelExpr::False
                } else {
                    LabelExpr::True
                }
            }
            LabelExpr::False => {
                if negated {
                    LabelExpr::True
                } else {
                    LabelExpr::False
                }
            }
            LabelExpr::Ap(i) => {
                if negated {
                    LabelExpr::True // monotone relaxation of a negated literal
                } else {
                    LabelExpr::Ap(*i)
                }
            }
            LabelExpr::Not(e) => e.relax_inner(!negated),
            LabelExpr::And(a, b) => {
                let (x, y) = (a.relax_inner(negated), b.relax_inner(negated));
                if negated {
                    LabelExpr::Or(Box::new(x), Box::new(y))
                } else {
                    LabelExpr::And(Box::new(x), Box::new(y))
                }
            }
            LabelExpr::Or(a, b) => {
                let (x, y) = (a.relax_inner(negated), b.relax_inner(negated));
                if negated {
                    LabelExpr::And(Box::new(x), Box::new(y))
                } else {
                    LabelExpr::Or(Box::new(x), Box::new(y))
                }
            }
        }
    }

    /// Negation-free expression to guard DNF, mapping AP index to atom index.
    fn to_guard(&self, ap_to_atom: &[usize]) -> Guard {
        match self {
            LabelExpr::True => Guard::truth(),
            LabelExpr::False => Guard::falsity(),
            LabelExpr::Ap(i) => Guard::atom(ap_to_atom[*i]),
            LabelExpr::Not(_) => unreachable!("relaxed expressions are negation-free"),
            LabelExpr::And(a, b) => a.to_guard(ap_to_atom).and(&b.to_guard(ap_to_atom)),
            LabelExpr::Or(a, b) => a.to_guard(ap_to_atom).or(&b.to_guard(ap_to_atom)),
        }
    }
}

fn parse_label(s: &str) -> Result<LabelExpr, LtlError> {
    let mut p = LabelParser {
        src: s.as_bytes(),
        pos: 0,
    };
    let e = p.disj()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(LtlError::Hoa(format!("trailing label input in {s:?}")));
    }
    Ok(e)
}

struct LabelParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> LabelParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn disj(&mut self) -> Result<LabelExpr, LtlError> {
        let mut acc = self.conj()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            let rhs = self.conj()?;
            acc = LabelExpr::Or(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn conj(&mut self) -> Result<LabelExpr, LtlError> {
        let mut acc = self.lit()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            let rhs = self.lit()?;
            acc = LabelExpr::And(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn lit(&mut self) -> Result<LabelExpr, LtlError> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(LabelExpr::Not(Box::new(self.lit()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.disj()?;
                if self.peek() != Some(b')') {
                    return Err(LtlError::Hoa("expected ')' in label".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b't') => {
                self.pos += 1;
                Ok(LabelExpr::True)
            }
            Some(b'f') => {
                self.pos += 1;
                Ok(LabelExpr::False)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let i: usize = std::str::from_utf8(&self.src[start..self.pos])
                    .unwrap()
                    .parse()
                    .unwrap();
                Ok(LabelExpr::Ap(i))
            }
            _ => Err(LtlError::Hoa("expected label literal".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_ltl, translate_to_nba};
    use super::*;

    const EVENTUALLY_HOA: &str = r#"
HOA: v1
States: 2
Start: 0
AP: 1 "pi(move,l1)"
Acceptance: 1 Inf(0)
acc-name: Buchi
--BODY--
State: 0
[t] 0
[0] 1
State: 1 {0}
[t] 1
--END--
"#;

    #[test]
    fn imports_eventually_and_matches_translation() {
        let imported = import_hoa(EVENTUALLY_HOA).unwrap();
        assert_eq!(imported.num_states, 2);
        assert_eq!(imported.finals.len(), 1);
        let internal = translate_to_nba(&parse_ltl("F pi(move,l1)").unwrap());
        // agreement on all lassos over the singleton alphabet
        for stem_len in 0..3usize {
            for stem_bits in 0..(1u64 << stem_len) {
                for cyc_len in 1..3usize {
                    for cyc_bits in 0..(1u64 << cyc_len) {
                        let stem: Vec<u64> =
                            (0..stem_len).map(|i| (stem_bits >> i) & 1).collect();
                        let cycle: Vec<u64> =
                            (0..cyc_len).map(|i| (cyc_bits >> i) & 1).collect();
                        assert_eq!(
                            imported.accepts_lasso(&stem, &cycle),
                            internal.accepts_lasso(&stem, &cycle),
                            "lasso {stem:?} {cycle:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_states_rejected() {
        let hoa = "HOA: v1\nStates: 0\nStart: 0\nAP: 0\nAcceptance: 1 Inf(0)\n--BODY--\n--END--\n";
        assert!(import_hoa(hoa).is_err());
    }

    #[test]
    fn non_buchi_acceptance_rejected() {
        let hoa = "HOA: v1\nStates: 1\nStart: 0\nAP: 0\nAcceptance: 2 Inf(0) & Inf(1)\n--BODY--\nState: 0\n--END--\n";
        assert!(matches!(
            import_hoa(hoa),
            Err(LtlError::UnsupportedAcceptance(_))
        ));
    }

    #[test]
    fn negated_labels_relax_monotonically() {
        let hoa = r#"
HOA: v1
States: 2
Start: 0
AP: 1 "pi(move,l1)"
Acceptance: 1 Inf(0)
--BODY--
State: 0
[!0] 0
[0] 1
State: 1 {0}
[t] 1
--END--
"#;
        let nba = import_hoa(hoa).unwrap();
        // the !0 self-loop becomes true; language is unchanged for the
        // upward-closed Eventually language
        assert!(nba.accepts_lasso(&[0, 1], &[0]));
        assert!(!nba.accepts_lasso(&[], &[0]));
    }
}
