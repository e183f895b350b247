//! Recursive-descent parser for mission formulas.
//!
//! Grammar:
//!   formula := term (("&" | "|") term)*
//!   term    := "F" term | "G" term | "(" formula ")" | atom | term "U" term
//!   atom    := "pi(" kind ("," ident)? ("," ident)? ")"
//!
//! "U" is right-associative. Negation and Next tokens are recognized and
//! rejected with a semantic error.

use super::{ActionKind, LtlError, LtlFormula, Predicate};

pub fn parse_ltl(text: &str) -> Result<LtlFormula, LtlError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let f = p.formula()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, msg: &str) -> LtlError {
        LtlError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), LtlError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{}'", c as char)))
        }
    }

    /// True if the byte at an offset starts a new word (keyword boundary).
    fn is_word_boundary(&self, offset: usize) -> bool {
        match self.src.get(self.pos + offset) {
            None => true,
            Some(c) => !c.is_ascii_alphanumeric() && *c != b'_',
        }
    }

    fn keyword(&mut self, kw: u8) -> bool {
        if self.peek() == Some(kw) && self.is_word_boundary(1) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, LtlError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.syntax("expected identifier"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string())
    }

    fn formula(&mut self) -> Result<LtlFormula, LtlError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'&') {
                let rhs = self.term()?;
                acc = LtlFormula::and(acc, rhs);
            } else if self.eat(b'|') {
                let rhs = self.term()?;
                acc = LtlFormula::or(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<LtlFormula, LtlError> {
        let lhs = self.unary()?;
        if self.keyword(b'U') {
            let rhs = self.term()?; // right-associative
            return Ok(LtlFormula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<LtlFormula, LtlError> {
        match self.peek() {
            Some(b'!') => Err(LtlError::Semantic {
                pos: self.pos,
                msg: "negation is excluded from the mission fragment".to_string(),
            }),
            Some(b'X') if self.is_word_boundary(1) => Err(LtlError::Semantic {
                pos: self.pos,
                msg: "the next operator is excluded from the mission fragment".to_string(),
            }),
            Some(b'F') if self.is_word_boundary(1) => {
                self.pos += 1;
                Ok(LtlFormula::eventually(self.term()?))
            }
            Some(b'G') if self.is_word_boundary(1) => {
                self.pos += 1;
                Ok(LtlFormula::always(self.term()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(b')')?;
                Ok(f)
            }
            Some(b'p') => self.atom(),
            _ => Err(self.syntax("expected formula")),
        }
    }

    fn atom(&mut self) -> Result<LtlFormula, LtlError> {
        self.skip_ws();
        let atom_pos = self.pos;
        let name = self.ident()?;
        if name != "pi" {
            return Err(LtlError::Syntax {
                pos: atom_pos,
                msg: format!("unknown atom '{name}', expected pi(...)"),
            });
        }
        self.expect(b'(')?;
        let kind_pos = self.pos;
        let kind_name = self.ident()?;
        let kind = match kind_name.as_str() {
            "move" => ActionKind::Move,
            "grasp" => ActionKind::Grasp,
            "release" => ActionKind::Release,
            other => {
                return Err(LtlError::Syntax {
                    pos: kind_pos,
                    msg: format!("unknown action kind '{other}'"),
                })
            }
        };
        let mut args = Vec::new();
        while self.eat(b',') {
            args.push(self.ident()?);
        }
        self.expect(b')')?;
        let (object, region) = match (kind, args.as_slice()) {
            (ActionKind::Move, [r]) => (None, Some(r.clone())),
            (ActionKind::Grasp, [o]) => (Some(o.clone()), None),
            (ActionKind::Release, [o, r]) => (Some(o.clone()), Some(r.clone())),
            _ => {
                return Err(LtlError::Semantic {
                    pos: atom_pos,
                    msg: format!(
                        "pi({kind_name},...) takes {} argument(s), got {}",
                        match kind {
                            ActionKind::Release => 2,
                            _ => 1,
                        },
                        args.len()
                    ),
                })
            }
        };
        let p = Predicate::new(kind, object, region).map_err(|e| match e {
            LtlError::Semantic { msg, .. } => LtlError::Semantic { pos: atom_pos, msg },
            other => other,
        })?;
        Ok(LtlFormula::Atom(p))
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn parses_simple_eventually() {
        let f = parse_ltl("F pi(move, l1)").unwrap();
        assert_eq!(
            f,
            LtlFormula::eventually(LtlFormula::atom(Predicate::move_to("l1")))
        );
    }

    #[test]
    fn parses_single_grasp_atom() {
        let f = parse_ltl("pi(grasp, o1)").unwrap();
        assert_eq!(f, LtlFormula::atom(Predicate::grasp("o1")));
    }

    #[test]
    fn negation_is_semantic_error() {
        match parse_ltl("! pi(move, l1)") {
            Err(LtlError::Semantic { .. }) => {}
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn next_is_semantic_error() {
        match parse_ltl("X pi(move, l1)") {
            Err(LtlError::Semantic { .. }) => {}
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn arity_violations_are_semantic_errors() {
        assert!(matches!(
            parse_ltl("pi(move, o1, l1)"),
            Err(LtlError::Semantic { .. })
        ));
        assert!(matches!(
            parse_ltl("pi(release, o1)"),
            Err(LtlError::Semantic { .. })
        ));
        assert!(matches!(
            parse_ltl("pi(grasp)"),
            Err(LtlError::Semantic { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_ltl("F pi(move, l1) &") {
            Err(LtlError::Syntax { pos, .. }) => assert_eq!(pos, 16),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    /// The three-pair rearrangement sequencing formula: nested F/& chain.
    pub(crate) fn rearrangement_formula() -> String {
        "F (pi(grasp,o1) & F (pi(release,o1,l2) & F (pi(grasp,o2) & F pi(release,o2,l3) & F (pi(grasp,o3) & F pi(release,o3,l1)))))".to_string()
    }

    #[test]
    fn parses_rearrangement_chain() {
        let f = parse_ltl(&rearrangement_formula()).unwrap();
        let atoms = f.atoms();
        assert_eq!(atoms.len(), 6);
        // alternating eventually/and shape: top node is F(And(..))
        match &f {
            LtlFormula::Eventually(inner) => match inner.as_ref() {
                LtlFormula::And(a, _) => {
                    assert_eq!(**a, LtlFormula::atom(Predicate::grasp("o1")));
                }
                other => panic!("expected And under F, got {other:?}"),
            },
            other => panic!("expected top-level F, got {other:?}"),
        }
    }

    #[test]
    fn patrol_formula_is_recurrence() {
        let f = parse_ltl("G F pi(move,l1) & G F pi(move,l2)").unwrap();
        assert!(f.is_recurrence());
        assert!(!parse_ltl("F pi(move,l1)").unwrap().is_recurrence());
    }

    #[test]
    fn until_is_right_associative_and_inside_f() {
        let f = parse_ltl("F pi(move,l1) U pi(move,l2)").unwrap();
        // per the grammar, F takes the whole following term
        assert_eq!(
            f,
            LtlFormula::eventually(LtlFormula::until(
                LtlFormula::atom(Predicate::move_to("l1")),
                LtlFormula::atom(Predicate::move_to("l2"))
            ))
        );
    }

    #[test]
    fn print_parse_roundtrip_examples() {
        for src in [
            "F pi(move, l1)",
            "pi(grasp, o1)",
            "G F pi(move,l1) & G F pi(move,l2)",
            "(pi(move,l1) U pi(move,l2)) & F pi(grasp,o1)",
            rearrangement_formula().as_str(),
        ] {
            let f = parse_ltl(src).unwrap();
            let printed = f.to_string();
            let reparsed = parse_ltl(&printed).unwrap();
            assert_eq!(f, reparsed, "roundtrip failed for {src}");
        }
    }
}
