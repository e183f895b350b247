//! Mission formulas: the negation-free, next-free LTL fragment over
//! manipulation predicates, their parser, and translation to a
//! non-deterministic Buchi automaton.

mod hoa;
mod nba;
mod parser;
mod translate;

pub use hoa::import_hoa;
pub use nba::{Guard, Nba, StateId};
pub use parser::parse_ltl;
pub use translate::translate_to_nba;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// The three manipulation action kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Move,
    Grasp,
    Release,
}

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Move => "move",
            ActionKind::Grasp => "grasp",
            ActionKind::Release => "release",
        }
    }
}

/// An atomic manipulation predicate: true exactly while the robot applies
/// the corresponding action.
///
/// Move carries a region only, Grasp an object only, Release both.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub kind: ActionKind,
    pub object: Option<String>,
    pub region: Option<String>,
}

impl Predicate {
    pub fn new(
        kind: ActionKind,
        object: Option<String>,
        region: Option<String>,
    ) -> Result<Self, LtlError> {
        let ok = match kind {
            ActionKind::Move => object.is_none() && region.is_some(),
            ActionKind::Grasp => object.is_some() && region.is_none(),
            ActionKind::Release => object.is_some() && region.is_some(),
        };
        if !ok {
            return Err(LtlError::Semantic {
                pos: 0,
                msg: format!(
                    "predicate pi({},{},{}) violates arity: move takes a region, grasp an object, release both",
                    kind.name(),
                    object.as_deref().unwrap_or("-"),
                    region.as_deref().unwrap_or("-")
                ),
            });
        }
        Ok(Predicate { kind, object, region })
    }

    pub fn move_to(region: &str) -> Predicate {
        Predicate {
            kind: ActionKind::Move,
            object: None,
            region: Some(region.to_string()),
        }
    }

    pub fn grasp(object: &str) -> Predicate {
        Predicate {
            kind: ActionKind::Grasp,
            object: Some(object.to_string()),
            region: None,
        }
    }

    pub fn release(object: &str, region: &str) -> Predicate {
        Predicate {
            kind: ActionKind::Release,
            object: Some(object.to_string()),
            region: Some(region.to_string()),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pi({}", self.kind.name())?;
        if let Some(o) = &self.object {
            write!(f, ",{o}")?;
        }
        if let Some(r) = &self.region {
            write!(f, ",{r}")?;
        }
        write!(f, ")")
    }
}

/// AST of the mission formula fragment: no Next, no negation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LtlFormula {
    Atom(Predicate),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Eventually(Box<LtlFormula>),
    Always(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
}

impl LtlFormula {
    pub fn atom(p: Predicate) -> Self {
        LtlFormula::Atom(p)
    }

    pub fn and(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn eventually(a: LtlFormula) -> Self {
        LtlFormula::Eventually(Box::new(a))
    }

    pub fn always(a: LtlFormula) -> Self {
        LtlFormula::Always(Box::new(a))
    }

    pub fn until(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::Until(Box::new(a), Box::new(b))
    }

    /// All distinct atomic predicates, sorted.
    pub fn atoms(&self) -> Vec<Predicate> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_atoms(&mut out);
        out.into_iter().collect()
    }

    fn collect_atoms(&self, out: &mut std::collections::BTreeSet<Predicate>) {
        match self {
            LtlFormula::Atom(p) => {
                out.insert(p.clone());
            }
            LtlFormula::And(a, b) | LtlFormula::Or(a, b) | LtlFormula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            LtlFormula::Eventually(a) | LtlFormula::Always(a) => a.collect_atoms(out),
        }
    }

    /// True if the formula contains a recurrence obligation (Always/Until);
    /// pure Eventually missions are witnessed by a finite execution.
    pub fn is_recurrence(&self) -> bool {
        match self {
            LtlFormula::Atom(_) => false,
            LtlFormula::Always(_) => true,
            LtlFormula::Until(a, b) => a.is_recurrence() || b.is_recurrence(),
            LtlFormula::And(a, b) | LtlFormula::Or(a, b) => {
                a.is_recurrence() || b.is_recurrence()
            }
            LtlFormula::Eventually(a) => a.is_recurrence(),
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LtlFormula::Atom(p) => write!(f, "{p}"),
            LtlFormula::And(a, b) => write!(f, "({a} & {b})"),
            LtlFormula::Or(a, b) => write!(f, "({a} | {b})"),
            LtlFormula::Until(a, b) => write!(f, "({a} U {b})"),
            LtlFormula::Eventually(a) => write!(f, "F {a}"),
            LtlFormula::Always(a) => write!(f, "G {a}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LtlError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("semantic error at {pos}: {msg}")]
    Semantic { pos: usize, msg: String },
    #[error("HOA import error: {0}")]
    Hoa(String),
    #[error("unsupported acceptance: {0}")]
    UnsupportedAcceptance(String),
}
