//! Formulas of intuitionistic propositional logic: atoms, `&`, `|`, `->` and
//! `bot`, together with a parser, a minimal-parenthesis printer and the
//! structural helpers (subformula closure, atom collection) used everywhere
//! else in the crate.
//!
//! Concrete syntax:
//!
//! ```text
//! formula := impl ; impl := disj ("->" impl)? ; disj := conj ("|" conj)* ;
//! conj := unit ("&" unit)* ; unit := atom | "bot" | "(" formula ")"
//! ```
//!
//! `&` binds tighter than `|`, which binds tighter than `->`; `->` associates
//! to the right, `&` and `|` to the left.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("syntax error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid atom name `{0}` (expected [a-z][a-zA-Z0-9_]*, not `bot`)")]
    BadAtom(String),
}

/// A propositional atom. Equality, ordering and hashing are by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(Arc<str>);

impl Atom {
    pub fn new(name: &str) -> Result<Atom, SyntaxError> {
        if is_atom_name(name) {
            Ok(Atom(Arc::from(name)))
        } else {
            Err(SyntaxError::BadAtom(name.to_string()))
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

fn is_atom_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && s != "bot"
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Atom {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Atom::new(s.trim())
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Atom::new(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Atom(Atom),
    Conj(Box<Formula>, Box<Formula>),
    Impl(Box<Formula>, Box<Formula>),
    Disj(Box<Formula>, Box<Formula>),
    Bot,
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(Atom::new(name).expect("valid atom name"))
    }

    pub fn conj(a: Formula, b: Formula) -> Formula {
        Formula::Conj(Box::new(a), Box::new(b))
    }

    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::Impl(Box::new(a), Box::new(b))
    }

    pub fn disj(a: Formula, b: Formula) -> Formula {
        Formula::Disj(Box::new(a), Box::new(b))
    }

    /// `a -> bot`.
    pub fn neg(a: Formula) -> Formula {
        Formula::imp(a, Formula::Bot)
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::Atom(_))
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Formula::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Number of connectives and atoms.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::Bot => 1,
            Formula::Conj(a, b) | Formula::Impl(a, b) | Formula::Disj(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Bot => {}
            Formula::Conj(a, b) | Formula::Impl(a, b) | Formula::Disj(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Impl(..) => 1,
            Formula::Disj(..) => 2,
            Formula::Conj(..) => 3,
            Formula::Atom(_) | Formula::Bot => 4,
        }
    }

    fn write_at(&self, min_prec: u8, out: &mut String) {
        let paren = self.precedence() < min_prec;
        if paren {
            out.push('(');
        }
        match self {
            Formula::Atom(a) => out.push_str(a.name()),
            Formula::Bot => out.push_str("bot"),
            Formula::Conj(a, b) => {
                a.write_at(3, out);
                out.push_str(" & ");
                b.write_at(4, out);
            }
            Formula::Disj(a, b) => {
                a.write_at(2, out);
                out.push_str(" | ");
                b.write_at(3, out);
            }
            Formula::Impl(a, b) => {
                a.write_at(2, out);
                out.push_str(" -> ");
                b.write_at(1, out);
            }
        }
        if paren {
            out.push(')');
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_formula(self))
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`", render_formula(self))
    }
}

impl FromStr for Formula {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render_formula(self))
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_formula(&s).map_err(serde::de::Error::custom)
    }
}

/// Minimal-parenthesis rendering; `parse_formula(&render_formula(f)) == f`.
pub fn render_formula(f: &Formula) -> String {
    let mut out = String::new();
    f.write_at(1, &mut out);
    out
}

pub fn parse_formula(text: &str) -> Result<Formula, SyntaxError> {
    Parser::new(text, false)?.parse_complete()
}

/// Like [`parse_formula`], but also accepts a prefix `~` as shorthand for
/// `... -> bot`. Only the command line uses this.
pub fn parse_formula_with_negation(text: &str) -> Result<Formula, SyntaxError> {
    Parser::new(text, true)?.parse_complete()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Bot,
    LParen,
    RParen,
    And,
    Or,
    Arrow,
    Tilde,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str, negation: bool) -> Result<Parser, SyntaxError> {
        let toks = tokenize(text, negation).map_err(|(pos, c)| SyntaxError::Parse {
            pos,
            msg: format!("unexpected character `{c}`"),
        })?;
        Ok(Parser {
            toks,
            pos: 0,
            end: text.len(),
        })
    }

    fn parse_complete(mut self) -> Result<Formula, SyntaxError> {
        let f = self.formula()?;
        if let Some((pos, t)) = self.toks.get(self.pos) {
            return Err(SyntaxError::Parse {
                pos: *pos,
                msg: format!("unexpected trailing token {t:?}"),
            });
        }
        Ok(f)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn formula(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.disj()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            let rhs = self.formula()?;
            return Ok(Formula::imp(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<Formula, SyntaxError> {
        let mut acc = self.conj()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let rhs = self.conj()?;
            acc = Formula::disj(acc, rhs);
        }
        Ok(acc)
    }

    fn conj(&mut self) -> Result<Formula, SyntaxError> {
        let mut acc = self.unit()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let rhs = self.unit()?;
            acc = Formula::conj(acc, rhs);
        }
        Ok(acc)
    }

    fn unit(&mut self) -> Result<Formula, SyntaxError> {
        let pos = self.here();
        match self.toks.get(self.pos).map(|(_, t)| t.clone()) {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Atom::new(&name)
                    .map(Formula::Atom)
                    .map_err(|_| SyntaxError::Parse {
                        pos,
                        msg: format!("invalid atom `{name}`"),
                    })
            }
            Some(Tok::Bot) => {
                self.pos += 1;
                Ok(Formula::Bot)
            }
            Some(Tok::Tilde) => {
                self.pos += 1;
                let inner = self.unit()?;
                Ok(Formula::neg(inner))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(SyntaxError::Parse {
                        pos: self.here(),
                        msg: "expected `)`".into(),
                    });
                }
                self.pos += 1;
                Ok(f)
            }
            Some(t) => Err(SyntaxError::Parse {
                pos,
                msg: format!("unexpected token {t:?}"),
            }),
            None => Err(SyntaxError::Parse {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

fn tokenize(text: &str, negation: bool) -> Result<Vec<(usize, Tok)>, (usize, char)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '&' => Tok::And,
            '|' => Tok::Or,
            '~' if negation => Tok::Tilde,
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            c if c.is_ascii_alphabetic() => {
                while i + 1 < bytes.len()
                    && ((bytes[i + 1] as char).is_ascii_alphanumeric() || bytes[i + 1] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..=i];
                if word == "bot" {
                    Tok::Bot
                } else {
                    Tok::Ident(word.to_string())
                }
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err((start, ch));
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

/// A duplicate-free set of formulas kept in canonical order (by rendered
/// text), standing for the contexts Γ, Θ, Δ.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FormulaSet(Vec<Formula>);

impl FormulaSet {
    pub fn new() -> FormulaSet {
        FormulaSet(Vec::new())
    }

    pub fn singleton(f: Formula) -> FormulaSet {
        FormulaSet(vec![f])
    }

    pub fn insert(&mut self, f: Formula) -> bool {
        if self.contains(&f) {
            return false;
        }
        self.0.push(f);
        self.canonicalize();
        true
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.0.contains(f)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Formula> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Formula] {
        &self.0
    }

    pub fn union(&self, other: &FormulaSet) -> FormulaSet {
        self.iter().chain(other.iter()).cloned().collect()
    }

    pub fn is_subset(&self, other: &FormulaSet) -> bool {
        self.iter().all(|f| other.contains(f))
    }

    fn canonicalize(&mut self) {
        self.0.sort_by_cached_key(render_formula);
        self.0.dedup();
    }
}

impl FromIterator<Formula> for FormulaSet {
    fn from_iter<I: IntoIterator<Item = Formula>>(iter: I) -> Self {
        let mut v: Vec<Formula> = iter.into_iter().collect();
        v.sort_by_cached_key(render_formula);
        v.dedup();
        FormulaSet(v)
    }
}

impl<'a> IntoIterator for &'a FormulaSet {
    type Item = &'a Formula;
    type IntoIter = std::slice::Iter<'a, Formula>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Debug for FormulaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for FormulaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(render_formula).collect();
        f.write_str(&parts.join(", "))
    }
}

impl Serialize for FormulaSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FormulaSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<Formula>::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

/// Closure of `fs` under immediate subformulas (including `fs` itself).
pub fn subformulas(fs: &FormulaSet) -> FormulaSet {
    let mut seen: BTreeSet<Formula> = BTreeSet::new();
    let mut stack: Vec<&Formula> = fs.iter().collect();
    while let Some(f) = stack.pop() {
        if !seen.insert(f.clone()) {
            continue;
        }
        if let Formula::Conj(a, b) | Formula::Impl(a, b) | Formula::Disj(a, b) = f {
            stack.push(a);
            stack.push(b);
        }
    }
    seen.into_iter().collect()
}

pub fn atoms_of(fs: &FormulaSet) -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    for f in fs {
        f.collect_atoms(&mut out);
    }
    out
}

/// `Γ |- φ`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Sequent {
    pub hyps: FormulaSet,
    pub goal: Formula,
}

impl Sequent {
    pub fn new(hyps: impl IntoIterator<Item = Formula>, goal: Formula) -> Sequent {
        Sequent {
            hyps: hyps.into_iter().collect(),
            goal,
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = atoms_of(&self.hyps);
        self.goal.collect_atoms(&mut out);
        out
    }

    pub fn parse(text: &str) -> Result<Sequent, SyntaxError> {
        parse_sequent_with(text, parse_formula)
    }

    /// Sequent parsing with the `~` negation shorthand enabled.
    pub fn parse_with_negation(text: &str) -> Result<Sequent, SyntaxError> {
        parse_sequent_with(text, parse_formula_with_negation)
    }
}

fn parse_sequent_with(
    text: &str,
    parse: fn(&str) -> Result<Formula, SyntaxError>,
) -> Result<Sequent, SyntaxError> {
    let (lhs, rhs, offset) = match text.find("|-") {
        Some(i) => (&text[..i], &text[i + 2..], i + 2),
        None => ("", text, 0),
    };
    let shift = |e: SyntaxError, by: usize| match e {
        SyntaxError::Parse { pos, msg } => SyntaxError::Parse { pos: pos + by, msg },
        other => other,
    };
    let goal = parse(rhs).map_err(|e| shift(e, offset))?;
    let mut hyps = Vec::new();
    if !lhs.trim().is_empty() {
        let mut start = 0;
        for part in lhs.split(',') {
            hyps.push(parse(part).map_err(|e| shift(e, start))?);
            start += part.len() + 1;
        }
    }
    Ok(Sequent::new(hyps, goal))
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hyps.is_empty() {
            write!(f, "|- {}", self.goal)
        } else {
            write!(f, "{} |- {}", self.hyps, self.goal)
        }
    }
}

impl fmt::Debug for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{self}`")
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn p() -> Formula {
        Formula::atom("p")
    }
    fn q() -> Formula {
        Formula::atom("q")
    }
    fn r() -> Formula {
        Formula::atom("r")
    }

    #[test]
    fn parses_examples() {
        assert_eq!(f("p"), p());
        assert_eq!(
            f("p & q -> r | bot"),
            Formula::imp(Formula::conj(p(), q()), Formula::disj(r(), Formula::Bot))
        );
        assert_eq!(f("p -> q -> r"), Formula::imp(p(), Formula::imp(q(), r())));
        assert_eq!(
            f("p | q | r"),
            Formula::disj(Formula::disj(p(), q()), r())
        );
    }

    #[test]
    fn renders_examples() {
        assert_eq!(render_formula(&p()), "p");
        assert_eq!(
            render_formula(&Formula::imp(Formula::conj(p(), q()), r())),
            "p & q -> r"
        );
        assert_eq!(
            render_formula(&Formula::conj(p(), Formula::disj(q(), r()))),
            "p & (q | r)"
        );
        assert_eq!(
            render_formula(&Formula::imp(Formula::imp(p(), q()), r())),
            "(p -> q) -> r"
        );
        assert_eq!(
            render_formula(&Formula::disj(p(), Formula::disj(q(), r()))),
            "p | (q | r)"
        );
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "p &", "(p", "p q", "P", "p -", "p $ q", "->"] {
            assert!(
                matches!(parse_formula(bad), Err(SyntaxError::Parse { .. })),
                "{bad:?}"
            );
        }
        match parse_formula("p & $") {
            Err(SyntaxError::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(Atom::new("bot").is_err());
        assert!(Atom::new("9a").is_err());
    }

    #[test]
    fn negation_sugar_only_when_enabled() {
        assert!(parse_formula("~p").is_err());
        assert_eq!(
            parse_formula_with_negation("~~p").unwrap(),
            Formula::neg(Formula::neg(p()))
        );
    }

    #[test]
    fn subformula_examples() {
        let s = |v: &[&str]| v.iter().map(|x| f(x)).collect::<FormulaSet>();
        assert_eq!(subformulas(&s(&["p"])), s(&["p"]));
        assert_eq!(subformulas(&s(&["p & q"])), s(&["p & q", "p", "q"]));
        assert_eq!(
            subformulas(&s(&["(p & q) | p"])),
            s(&["p & q | p", "p & q", "p", "q"])
        );
    }

    #[test]
    fn atoms_examples() {
        let s = |v: &[&str]| v.iter().map(|x| f(x)).collect::<FormulaSet>();
        assert!(atoms_of(&s(&["bot"])).is_empty());
        let pq: BTreeSet<Atom> = [Atom::new("p").unwrap(), Atom::new("q").unwrap()].into();
        assert_eq!(atoms_of(&s(&["p -> q"])), pq);
        assert_eq!(atoms_of(&s(&["p & p"])).len(), 1);
    }

    #[test]
    fn formula_sets_are_canonical() {
        let a: FormulaSet = vec![f("q"), f("p"), f("q")].into_iter().collect();
        let b: FormulaSet = vec![f("p"), f("q")].into_iter().collect();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "p, q");
    }

    #[test]
    fn sequent_parsing() {
        let s = Sequent::parse("p -> (q | r) |- (p -> q) | (p -> r)").unwrap();
        assert_eq!(s.hyps.len(), 1);
        assert_eq!(s.goal, f("(p -> q) | (p -> r)"));
        let s = Sequent::parse("p, p -> q |- q").unwrap();
        assert_eq!(s.hyps.len(), 2);
        let s = Sequent::parse("|- p -> p").unwrap();
        assert!(s.hyps.is_empty());
        let s = Sequent::parse("p -> p").unwrap();
        assert!(s.hyps.is_empty());
        assert!(Sequent::parse("p, |- q").is_err());
    }

    pub fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            4 => prop::sample::select(vec!["p", "q", "r", "s1", "aB_2"]).prop_map(Formula::atom),
            1 => Just(Formula::Bot),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::conj(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::disj(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::imp(a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(phi in arb_formula()) {
            let text = render_formula(&phi);
            prop_assert_eq!(parse_formula(&text).unwrap(), phi);
        }

        #[test]
        fn subformulas_idempotent_and_monotone(
            a in prop::collection::vec(arb_formula(), 0..4),
            b in prop::collection::vec(arb_formula(), 0..4),
        ) {
            let fa: FormulaSet = a.into_iter().collect();
            let fb: FormulaSet = b.into_iter().collect();
            let sa = subformulas(&fa);
            prop_assert_eq!(subformulas(&sa), sa.clone());
            prop_assert!(fa.is_subset(&sa));
            let both = fa.union(&fb);
            prop_assert!(sa.is_subset(&subformulas(&both)));
        }
    }
}
