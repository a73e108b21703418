//! Atomic bases and derivability in them.
//!
//! A rule `((P1 => q1), ..., (Pn => qn)) => r` lets us conclude `r` from a
//! context once every `qi` has been derived from that context extended by the
//! hypotheses `Pi`. Derivations are first-class [`DerivTerm`]s using de Bruijn
//! indices: `Var(i)` refers to the `i`-th entry counting from the end of the
//! context, and the `j`-th argument of an application lives in the context
//! extended by the hypotheses of premise `j`, appended in atom order.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::schema::{self, SchemaError};
use crate::syntax::Atom;

pub type AtomSet = BTreeSet<Atom>;

/// Largest universe for which every context is saturated by [`saturate`].
pub const SATURATE_MAX_ATOMS: usize = 20;
/// Largest universe accepted anywhere (contexts are bitmasks).
pub const MAX_ATOMS: usize = 64;
pub const DEFAULT_CANDIDATE_CAP: usize = 1 << 16;
pub const DEFAULT_EXTENSION_CAP: u128 = 1 << 27;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaseError {
    #[error("atom `{0}` is outside the declared universe")]
    OutsideUniverse(Atom),
    #[error("universe of {size} atoms is too large (at most {cap})")]
    UniverseTooLarge { size: usize, cap: usize },
    #[error("rule `{rule}` does not fit the bounds {bounds}")]
    RuleExceedsBounds { rule: String, bounds: Bounds },
    #[error("{what}: {needed} exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        needed: u128,
        cap: u128,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Premise {
    pub hyps: AtomSet,
    pub concl: Atom,
}

impl Premise {
    pub fn new(hyps: impl IntoIterator<Item = Atom>, concl: Atom) -> Premise {
        Premise {
            hyps: hyps.into_iter().collect(),
            concl,
        }
    }
}

impl fmt::Display for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hyps: Vec<&str> = self.hyps.iter().map(Atom::name).collect();
        if hyps.is_empty() {
            write!(f, "(=> {})", self.concl)
        } else {
            write!(f, "({} => {})", hyps.join(", "), self.concl)
        }
    }
}

/// An atomic rule. Premises are kept sorted and duplicate-free, so two rules
/// are equal exactly when they have the same premise set and conclusion.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "RuleRepr", into = "RuleRepr")]
pub struct AtomicRule {
    premises: Vec<Premise>,
    conclusion: Atom,
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    premises: Vec<Premise>,
    concl: Atom,
}

impl From<RuleRepr> for AtomicRule {
    fn from(r: RuleRepr) -> Self {
        AtomicRule::new(r.premises, r.concl)
    }
}

impl From<AtomicRule> for RuleRepr {
    fn from(r: AtomicRule) -> Self {
        RuleRepr {
            premises: r.premises,
            concl: r.conclusion,
        }
    }
}

impl AtomicRule {
    pub fn new(premises: impl IntoIterator<Item = Premise>, conclusion: Atom) -> AtomicRule {
        let mut premises: Vec<Premise> = premises.into_iter().collect();
        premises.sort();
        premises.dedup();
        AtomicRule {
            premises,
            conclusion,
        }
    }

    /// `=> r`.
    pub fn axiom(conclusion: Atom) -> AtomicRule {
        AtomicRule::new([], conclusion)
    }

    pub fn premises(&self) -> &[Premise] {
        &self.premises
    }

    pub fn conclusion(&self) -> &Atom {
        &self.conclusion
    }

    pub fn atoms(&self) -> AtomSet {
        let mut out = AtomSet::new();
        out.insert(self.conclusion.clone());
        for p in &self.premises {
            out.extend(p.hyps.iter().cloned());
            out.insert(p.concl.clone());
        }
        out
    }

    pub fn max_hyps(&self) -> usize {
        self.premises.iter().map(|p| p.hyps.len()).max().unwrap_or(0)
    }

    pub fn fits(&self, bounds: &Bounds) -> bool {
        self.premises.len() <= bounds.max_premises && self.max_hyps() <= bounds.max_hyps
    }
}

/// Rules are ordered by premise count, then premises, then conclusion; this
/// is also the order in which the enumerator proposes candidate rules.
impl Ord for AtomicRule {
    fn cmp(&self, other: &Self) -> Ordering {
        self.premises
            .len()
            .cmp(&other.premises.len())
            .then_with(|| self.premises.cmp(&other.premises))
            .then_with(|| self.conclusion.cmp(&other.conclusion))
    }
}

impl PartialOrd for AtomicRule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AtomicRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prems: Vec<String> = self.premises.iter().map(|p| p.to_string()).collect();
        if prems.is_empty() {
            write!(f, "=> {}", self.conclusion)
        } else {
            write!(f, "{} => {}", prems.join(", "), self.conclusion)
        }
    }
}

impl fmt::Debug for AtomicRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

/// A finite set of atomic rules.
#[derive(Clone, Default)]
pub struct Base {
    rules: Vec<Arc<AtomicRule>>,
    name: Option<String>,
}

impl PartialEq for Base {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl Eq for Base {}

impl std::hash::Hash for Base {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.rules.hash(state)
    }
}

impl Base {
    pub fn new(rules: impl IntoIterator<Item = AtomicRule>) -> Base {
        Base::from_shared(rules.into_iter().map(Arc::new).collect())
    }

    pub fn from_shared(mut rules: Vec<Arc<AtomicRule>>) -> Base {
        rules.sort();
        rules.dedup();
        Base { rules, name: None }
    }

    pub fn empty() -> Base {
        Base::default()
    }

    pub fn named(mut self, name: impl Into<String>) -> Base {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn rules(&self) -> &[Arc<AtomicRule>] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains(&self, rule: &AtomicRule) -> bool {
        self.rules
            .binary_search_by(|r| r.as_ref().cmp(rule))
            .is_ok()
    }

    pub fn is_subset(&self, other: &Base) -> bool {
        self.rules.len() <= other.rules.len() && self.rules.iter().all(|r| other.contains(r))
    }

    pub fn with_rule(&self, rule: AtomicRule) -> Base {
        let mut rules = self.rules.clone();
        rules.push(Arc::new(rule));
        Base::from_shared(rules)
    }

    pub fn union(&self, other: &Base) -> Base {
        Base::from_shared(self.rules.iter().chain(&other.rules).cloned().collect())
    }

    pub fn atoms(&self) -> AtomSet {
        self.rules.iter().flat_map(|r| r.atoms()).collect()
    }

    pub fn fits(&self, bounds: &Bounds) -> bool {
        self.rules.iter().all(|r| r.fits(bounds))
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rules: Vec<String> = self.rules.iter().map(|r| r.to_string()).collect();
        write!(f, "{{{}}}", rules.join("; "))
    }
}

impl fmt::Debug for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => write!(f, "{n}={self}"),
            None => write!(f, "{self}"),
        }
    }
}

impl Serialize for Base {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rules.serialize(s)
    }
}

/// Named variables `(X : P)` for display; typing only looks at the atoms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VarContext {
    vars: Vec<(String, Atom)>,
}

impl VarContext {
    pub fn new(vars: Vec<(String, Atom)>) -> Option<VarContext> {
        let names: BTreeSet<&str> = vars.iter().map(|(n, _)| n.as_str()).collect();
        (names.len() == vars.len()).then_some(VarContext { vars })
    }

    /// `x1 : a1, ..., xn : an` for the atoms in order.
    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> VarContext {
        VarContext {
            vars: atoms
                .into_iter()
                .enumerate()
                .map(|(i, a)| (format!("x{}", i + 1), a.clone()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[(String, Atom)] {
        &self.vars
    }

    pub fn atoms(&self) -> Vec<Atom> {
        self.vars.iter().map(|(_, a)| a.clone()).collect()
    }

    /// The variable named by de Bruijn index `i`.
    pub fn lookup(&self, i: usize) -> Option<&(String, Atom)> {
        self.vars.len().checked_sub(i + 1).map(|k| &self.vars[k])
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivTerm {
    Var(usize),
    App {
        rule: Arc<AtomicRule>,
        args: Vec<DerivTerm>,
    },
}

impl DerivTerm {
    pub fn app(rule: Arc<AtomicRule>, args: Vec<DerivTerm>) -> DerivTerm {
        DerivTerm::App { rule, args }
    }

    /// Variables have depth 0; an application is one deeper than its deepest
    /// argument.
    pub fn depth(&self) -> usize {
        match self {
            DerivTerm::Var(_) => 0,
            DerivTerm::App { args, .. } => 1 + args.iter().map(|a| a.depth()).max().unwrap_or(0),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            DerivTerm::Var(_) => 1,
            DerivTerm::App { args, .. } => 1 + args.iter().map(|a| a.size()).sum::<usize>(),
        }
    }

    /// Free variables, as indices into the outer context.
    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_free(0, &mut out);
        out
    }

    fn collect_free(&self, depth: usize, out: &mut BTreeSet<usize>) {
        match self {
            DerivTerm::Var(i) => {
                if *i >= depth {
                    out.insert(i - depth);
                }
            }
            DerivTerm::App { rule, args } => {
                for (a, p) in args.iter().zip(rule.premises()) {
                    a.collect_free(depth + p.hyps.len(), out);
                }
            }
        }
    }

    pub fn display_in<'a>(&'a self, ctx: &'a VarContext) -> impl fmt::Display + 'a {
        Named { term: self, ctx }
    }
}

impl fmt::Display for DerivTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivTerm::Var(i) => write!(f, "#{i}"),
            DerivTerm::App { rule, args } => {
                write!(f, "[{rule}]")?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for DerivTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

struct Named<'a> {
    term: &'a DerivTerm,
    ctx: &'a VarContext,
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<String> = self.ctx.vars.iter().map(|(n, _)| n.clone()).collect();
        let mut fresh = 0;
        write_named(self.term, &mut names, &mut fresh, f)
    }
}

fn write_named(
    t: &DerivTerm,
    names: &mut Vec<String>,
    fresh: &mut usize,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    match t {
        DerivTerm::Var(i) => match names.len().checked_sub(i + 1) {
            Some(k) => f.write_str(&names[k]),
            None => write!(f, "#{i}"),
        },
        DerivTerm::App { rule, args } => {
            write!(f, "[{rule}]")?;
            if args.is_empty() {
                return Ok(());
            }
            f.write_str("(")?;
            for (k, (a, p)) in args.iter().zip(rule.premises()).enumerate() {
                if k > 0 {
                    f.write_str(", ")?;
                }
                let mark = names.len();
                if !p.hyps.is_empty() {
                    let mut bound = Vec::new();
                    for h in &p.hyps {
                        *fresh += 1;
                        let n = format!("y{fresh}");
                        bound.push(format!("{n}:{h}"));
                        names.push(n);
                    }
                    write!(f, "{}. ", bound.join(" "))?;
                }
                write_named(a, names, fresh, f)?;
                names.truncate(mark);
            }
            f.write_str(")")
        }
    }
}

/// Whether `t` is a derivation of `r` from `ctx` using only rules of `base`.
pub fn check_derivation(base: &Base, ctx: &VarContext, t: &DerivTerm, r: &Atom) -> bool {
    let mut atoms = ctx.atoms();
    check_in(base, &mut atoms, t, r)
}

/// [`check_derivation`] with the context given as a bare list of atoms.
pub fn check_derivation_atoms(base: &Base, ctx: &[Atom], t: &DerivTerm, r: &Atom) -> bool {
    let mut atoms = ctx.to_vec();
    check_in(base, &mut atoms, t, r)
}

fn check_in(base: &Base, ctx: &mut Vec<Atom>, t: &DerivTerm, r: &Atom) -> bool {
    match t {
        DerivTerm::Var(i) => ctx
            .len()
            .checked_sub(i + 1)
            .is_some_and(|k| &ctx[k] == r),
        DerivTerm::App { rule, args } => {
            if rule.conclusion() != r
                || args.len() != rule.premises().len()
                || !base.contains(rule)
            {
                return false;
            }
            rule.premises().iter().zip(args).all(|(p, a)| {
                let mark = ctx.len();
                ctx.extend(p.hyps.iter().cloned());
                let ok = check_in(base, ctx, a, &p.concl);
                ctx.truncate(mark);
                ok
            })
        }
    }
}

/// Adds `by` to every variable index at or above `cutoff`.
pub fn shift_from(t: &DerivTerm, cutoff: usize, by: usize) -> DerivTerm {
    if by == 0 {
        return t.clone();
    }
    match t {
        DerivTerm::Var(i) if *i >= cutoff => DerivTerm::Var(i + by),
        DerivTerm::Var(i) => DerivTerm::Var(*i),
        DerivTerm::App { rule, args } => DerivTerm::App {
            rule: rule.clone(),
            args: args
                .iter()
                .zip(rule.premises())
                .map(|(a, p)| shift_from(a, cutoff + p.hyps.len(), by))
                .collect(),
        },
    }
}

/// Weakening: moves a term into a context with `by` more entries at the end.
pub fn shift(t: &DerivTerm, by: usize) -> DerivTerm {
    shift_from(t, 0, by)
}

/// Simultaneous substitution: free variable `j` becomes `sigma[j]`. All the
/// `sigma[j]` live in one common target context. Variables beyond `sigma` are
/// left as they are. Variables bound by premises are never captured, because
/// substituted terms are shifted past every binder they move under.
pub fn substitute(t: &DerivTerm, sigma: &[DerivTerm]) -> DerivTerm {
    subst_under(t, sigma, 0)
}

fn subst_under(t: &DerivTerm, sigma: &[DerivTerm], depth: usize) -> DerivTerm {
    match t {
        DerivTerm::Var(i) if *i < depth => DerivTerm::Var(*i),
        DerivTerm::Var(i) => match sigma.get(i - depth) {
            Some(s) => shift(s, depth),
            None => DerivTerm::Var(*i),
        },
        DerivTerm::App { rule, args } => DerivTerm::App {
            rule: rule.clone(),
            args: args
                .iter()
                .zip(rule.premises())
                .map(|(a, p)| subst_under(a, sigma, depth + p.hyps.len()))
                .collect(),
        },
    }
}

/// `t[phi/y]`: `t` lives in a context of length `ctx_len` where `y` is the
/// variable with de Bruijn index `y`; `phi` lives in that context with `y`
/// removed, which is also the context of the result.
pub fn substitute_var(t: &DerivTerm, y: usize, phi: &DerivTerm, ctx_len: usize) -> DerivTerm {
    let sigma: Vec<DerivTerm> = (0..ctx_len)
        .map(|i| match i.cmp(&y) {
            Ordering::Less => DerivTerm::Var(i),
            Ordering::Equal => phi.clone(),
            Ordering::Greater => DerivTerm::Var(i - 1),
        })
        .collect();
    substitute(t, &sigma)
}

/// A universe of atoms in canonical order; contexts over it are bitmasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    atoms: Vec<Atom>,
}

impl Universe {
    pub fn new(atoms: &AtomSet) -> Result<Universe, BaseError> {
        if atoms.len() > MAX_ATOMS {
            return Err(BaseError::UniverseTooLarge {
                size: atoms.len(),
                cap: MAX_ATOMS,
            });
        }
        Ok(Universe {
            atoms: atoms.iter().cloned().collect(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index(&self, a: &Atom) -> Result<usize, BaseError> {
        self.atoms
            .binary_search(a)
            .map_err(|_| BaseError::OutsideUniverse(a.clone()))
    }

    pub fn mask<'a>(&self, set: impl IntoIterator<Item = &'a Atom>) -> Result<u64, BaseError> {
        let mut m = 0u64;
        for a in set {
            m |= 1 << self.index(a)?;
        }
        Ok(m)
    }

    pub fn set_of(&self, mask: u64) -> AtomSet {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, a)| a.clone())
            .collect()
    }

    fn full_mask(&self) -> u64 {
        if self.atoms.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.atoms.len()) - 1
        }
    }
}

#[derive(Clone)]
struct CompiledRule {
    concl: u32,
    premises: Vec<(u64, u32)>,
}

/// A base translated to bitmask form over a universe.
#[derive(Clone)]
pub(crate) struct Compiled {
    rules: Vec<Arc<AtomicRule>>,
    compiled: Vec<CompiledRule>,
}

impl Compiled {
    pub(crate) fn new(base: &Base, universe: &Universe) -> Result<Compiled, BaseError> {
        let mut compiled = Vec::with_capacity(base.len());
        for r in base.rules() {
            let mut premises = Vec::with_capacity(r.premises().len());
            for p in r.premises() {
                premises.push((universe.mask(&p.hyps)?, universe.index(&p.concl)? as u32));
            }
            compiled.push(CompiledRule {
                concl: universe.index(r.conclusion())? as u32,
                premises,
            });
        }
        Ok(Compiled {
            rules: base.rules().to_vec(),
            compiled,
        })
    }
}

const NO_WITNESS: u32 = u32::MAX;

/// Least fixpoint of (Ref) and (App) over a set of contexts closed under
/// adding premise hypotheses. Rounds are computed in lockstep, so an atom
/// first derived in round `k` has a witness of depth exactly `k`, the least
/// possible.
#[derive(Clone)]
struct Saturation {
    n: usize,
    masks: Vec<u64>,
    dense: bool,
    derivable: Vec<u64>,
    witness: Vec<u32>,
}

impl Saturation {
    fn run(c: &Compiled, n: usize, masks: Vec<u64>, dense: bool) -> Saturation {
        let mut sat = Saturation {
            n,
            derivable: masks.clone(),
            witness: vec![NO_WITNESS; masks.len() * n.max(1)],
            masks,
            dense,
        };
        let mut succ: Vec<Vec<Vec<usize>>> = Vec::new();
        if !dense {
            succ = sat
                .masks
                .iter()
                .map(|&m| {
                    c.compiled
                        .iter()
                        .map(|r| r.premises.iter().map(|(h, _)| sat.slot(m | h)).collect())
                        .collect()
                })
                .collect();
        }
        let mut prev = sat.derivable.clone();
        loop {
            let mut changed = false;
            for mi in 0..sat.masks.len() {
                let m = sat.masks[mi];
                for (ri, r) in c.compiled.iter().enumerate() {
                    let bit = 1u64 << r.concl;
                    if sat.derivable[mi] & bit != 0 {
                        continue;
                    }
                    let fires = r.premises.iter().enumerate().all(|(pj, (h, q))| {
                        let slot = if dense {
                            (m | h) as usize
                        } else {
                            succ[mi][ri][pj]
                        };
                        prev[slot] >> q & 1 == 1
                    });
                    if fires {
                        sat.derivable[mi] |= bit;
                        sat.witness[mi * n + r.concl as usize] = ri as u32;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
            prev.copy_from_slice(&sat.derivable);
        }
        sat
    }

    fn slot(&self, mask: u64) -> usize {
        if self.dense {
            mask as usize
        } else {
            self.masks.binary_search(&mask).expect("closed context set")
        }
    }

    fn build(&self, c: &Compiled, ctx: &mut Vec<u32>, mask: u64, atom: u32) -> DerivTerm {
        if mask >> atom & 1 == 1 {
            let pos = ctx.iter().rposition(|&a| a == atom).expect("atom in context");
            return DerivTerm::Var(ctx.len() - 1 - pos);
        }
        let slot = self.slot(mask);
        let ri = self.witness[slot * self.n + atom as usize];
        debug_assert_ne!(ri, NO_WITNESS);
        let rule = &c.compiled[ri as usize];
        let args = rule
            .premises
            .iter()
            .map(|&(h, q)| {
                let mark = ctx.len();
                ctx.extend((0..64u32).filter(|i| h >> i & 1 == 1));
                let t = self.build(c, ctx, mask | h, q);
                ctx.truncate(mark);
                t
            })
            .collect();
        DerivTerm::App {
            rule: c.rules[ri as usize].clone(),
            args,
        }
    }
}

/// Derivability of every judgment `P |- r` over a universe.
#[derive(Clone)]
pub struct DerivTable {
    universe: Universe,
    compiled: Compiled,
    sat: Saturation,
}

impl DerivTable {
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn derivable(&self, p: &AtomSet, r: &Atom) -> bool {
        match (self.universe.mask(p), self.universe.index(r)) {
            (Ok(m), Ok(i)) => self.derivable_mask(m) >> i & 1 == 1,
            _ => false,
        }
    }

    /// The atoms derivable from `p`.
    pub fn derivable_atoms(&self, p: &AtomSet) -> AtomSet {
        match self.universe.mask(p) {
            Ok(m) => self.universe.set_of(self.derivable_mask(m)),
            Err(_) => AtomSet::new(),
        }
    }

    pub(crate) fn derivable_mask(&self, mask: u64) -> u64 {
        match self.sat.masks.binary_search(&mask) {
            Ok(i) => self.sat.derivable[i],
            Err(_) => 0,
        }
    }

    /// The canonical witness for `p |- r`, typed in the context of `p`'s atoms
    /// in order.
    pub fn term(&self, p: &AtomSet, r: &Atom) -> Option<DerivTerm> {
        let m = self.universe.mask(p).ok()?;
        let i = self.universe.index(r).ok()? as u32;
        self.term_mask(m, i)
    }

    fn term_mask(&self, m: u64, i: u32) -> Option<DerivTerm> {
        if self.derivable_mask(m) >> i & 1 == 0 {
            return None;
        }
        let mut ctx: Vec<u32> = (0..64u32).filter(|k| m >> k & 1 == 1).collect();
        Some(self.sat.build(&self.compiled, &mut ctx, m, i))
    }

    /// Every derivable judgment with its witness, contexts in mask order.
    pub fn entries(&self) -> Vec<(AtomSet, Atom, DerivTerm)> {
        let mut out = Vec::new();
        for (slot, &m) in self.sat.masks.iter().enumerate() {
            let d = self.sat.derivable[slot];
            for i in 0..self.universe.len() as u32 {
                if d >> i & 1 == 1 {
                    let t = self.term_mask(m, i).expect("derivable");
                    out.push((self.universe.set_of(m), self.universe.atoms[i as usize].clone(), t));
                }
            }
        }
        out
    }

    /// Number of derivable judgments.
    pub fn len(&self) -> usize {
        self.sat
            .derivable
            .iter()
            .map(|d| d.count_ones() as usize)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The contexts (as atom sets) covered by the table.
    pub fn contexts(&self) -> Vec<AtomSet> {
        self.sat.masks.iter().map(|&m| self.universe.set_of(m)).collect()
    }
}

fn check_base_atoms(base: &Base, universe: &Universe) -> Result<(), BaseError> {
    for r in base.rules() {
        for a in r.atoms() {
            universe.index(&a)?;
        }
    }
    Ok(())
}

/// Saturates every context `P ⊆ universe`.
pub fn saturate(base: &Base, universe: &AtomSet) -> Result<DerivTable, BaseError> {
    let u = Universe::new(universe)?;
    if u.len() > SATURATE_MAX_ATOMS {
        return Err(BaseError::UniverseTooLarge {
            size: u.len(),
            cap: SATURATE_MAX_ATOMS,
        });
    }
    check_base_atoms(base, &u)?;
    let compiled = Compiled::new(base, &u)?;
    let masks: Vec<u64> = (0..=u.full_mask()).collect();
    let sat = Saturation::run(&compiled, u.len(), masks, true);
    Ok(DerivTable {
        universe: u,
        compiled,
        sat,
    })
}

/// Saturates only the contexts reachable from `roots` by adding premise
/// hypotheses.
pub(crate) fn saturate_from(
    compiled: &Compiled,
    universe: &Universe,
    roots: &[u64],
) -> DerivTable {
    let mut seen: BTreeSet<u64> = roots.iter().copied().collect();
    let mut stack: Vec<u64> = seen.iter().copied().collect();
    let hyps: BTreeSet<u64> = compiled
        .compiled
        .iter()
        .flat_map(|r| r.premises.iter().map(|(h, _)| *h))
        .filter(|h| *h != 0)
        .collect();
    while let Some(m) = stack.pop() {
        for h in &hyps {
            if seen.insert(m | h) {
                stack.push(m | h);
            }
        }
    }
    let masks: Vec<u64> = seen.into_iter().collect();
    let sat = Saturation::run(compiled, universe.len(), masks, false);
    DerivTable {
        universe: universe.clone(),
        compiled: compiled.clone(),
        sat,
    }
}

/// Saturation restricted to the contexts reachable from the given roots.
pub fn saturate_contexts(
    base: &Base,
    universe: &AtomSet,
    roots: &[AtomSet],
) -> Result<DerivTable, BaseError> {
    let u = Universe::new(universe)?;
    check_base_atoms(base, &u)?;
    let compiled = Compiled::new(base, &u)?;
    let masks = roots
        .iter()
        .map(|p| u.mask(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(saturate_from(&compiled, &u, &masks))
}

/// A derivation of `p |- r` in `base`, if there is one.
pub fn derives(
    base: &Base,
    p: &AtomSet,
    r: &Atom,
    universe: &AtomSet,
) -> Result<Option<DerivTerm>, BaseError> {
    let table = saturate_contexts(base, universe, std::slice::from_ref(p))?;
    table.universe.index(r)?;
    Ok(table.term(p, r))
}

/// Enumeration bounds on extension rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub max_premises: usize,
    pub max_hyps: usize,
    pub max_extra_rules: usize,
}

impl Bounds {
    pub const fn new(max_premises: usize, max_hyps: usize, max_extra_rules: usize) -> Bounds {
        Bounds {
            max_premises,
            max_hyps,
            max_extra_rules,
        }
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(premises <= {}, hyps <= {}, extra rules <= {})",
            self.max_premises, self.max_hyps, self.max_extra_rules
        )
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn subsets_upto(n: usize, k: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (0..1u64 << n).filter(|m| m.count_ones() as usize <= k).collect();
    out.sort_by_key(|m| (m.count_ones(), m.reverse_bits()));
    out
}

/// The rules over `universe` that fit `bounds`, in canonical order. Premises
/// whose conclusion is among their own hypotheses are derivable by (Ref) in
/// every base, so rules containing them are left out.
pub fn candidate_rules(universe: &AtomSet, bounds: &Bounds) -> Result<Vec<AtomicRule>, BaseError> {
    candidate_rules_capped(universe, bounds, DEFAULT_CANDIDATE_CAP)
}

pub fn candidate_rules_capped(
    universe: &AtomSet,
    bounds: &Bounds,
    cap: usize,
) -> Result<Vec<AtomicRule>, BaseError> {
    let u = Universe::new(universe)?;
    let n = u.len();
    if n > SATURATE_MAX_ATOMS {
        return Err(BaseError::UniverseTooLarge {
            size: n,
            cap: SATURATE_MAX_ATOMS,
        });
    }
    let hyp_sets = subsets_upto(n, bounds.max_hyps);
    let mut premises = Vec::new();
    for &h in &hyp_sets {
        for q in 0..n {
            if h >> q & 1 == 0 {
                premises.push(Premise {
                    hyps: u.set_of(h),
                    concl: u.atoms[q].clone(),
                });
            }
        }
    }
    premises.sort();
    let needed: u128 = (0..=bounds.max_premises)
        .map(|k| binomial(premises.len(), k))
        .fold(0u128, |a, b| a.saturating_add(b))
        .saturating_mul(n as u128);
    if needed > cap as u128 {
        return Err(BaseError::CapExceeded {
            what: "candidate rules",
            needed,
            cap: cap as u128,
        });
    }
    let mut rules = Vec::with_capacity(needed as usize);
    for k in 0..=bounds.max_premises.min(premises.len()) {
        for combo in Combinations::new(premises.len(), k) {
            let prems: Vec<Premise> = combo.iter().map(|&i| premises[i].clone()).collect();
            for c in u.atoms() {
                rules.push(AtomicRule::new(prems.clone(), c.clone()));
            }
        }
    }
    rules.sort();
    Ok(rules)
}

/// k-element subsets of `0..n` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    first: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Combinations {
        Combinations {
            n,
            current: (0..k).collect(),
            first: true,
            done: k > n,
        }
    }

    /// Advances in place; returns the new combination.
    pub fn advance(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if self.first {
            self.first = false;
            return Some(&self.current);
        }
        let k = self.current.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(&self.current);
            }
        }
        self.done = true;
        None
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        self.advance().map(|c| c.to_vec())
    }
}

/// All bases `C ⊇ base` obtained by adding at most `max_extra_rules`
/// candidate rules, smallest first.
pub struct Extensions {
    base: Base,
    candidates: Vec<Arc<AtomicRule>>,
    size: usize,
    max_size: usize,
    combos: Combinations,
    total: u128,
}

impl Extensions {
    pub fn candidates(&self) -> &[Arc<AtomicRule>] {
        &self.candidates
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    /// Number of bases the iterator yields in total.
    pub fn total(&self) -> u128 {
        self.total
    }

    /// Next set of candidate indices, without building the base.
    pub fn next_indices(&mut self) -> Option<&[usize]> {
        loop {
            if self.size > self.max_size {
                return None;
            }
            if self.combos.advance().is_some() {
                return Some(&self.combos.current);
            }
            self.size += 1;
            self.combos = Combinations::new(self.candidates.len(), self.size);
        }
    }

    pub fn base_for(&self, indices: &[usize]) -> Base {
        let mut rules = self.base.rules.clone();
        rules.extend(indices.iter().map(|&i| self.candidates[i].clone()));
        Base::from_shared(rules)
    }
}

impl Iterator for Extensions {
    type Item = Base;
    fn next(&mut self) -> Option<Base> {
        let idx = self.next_indices()?.to_vec();
        Some(self.base_for(&idx))
    }
}

pub fn enumerate_extensions(
    base: &Base,
    universe: &AtomSet,
    bounds: &Bounds,
) -> Result<Extensions, BaseError> {
    enumerate_extensions_capped(base, universe, bounds, DEFAULT_EXTENSION_CAP)
}

pub fn enumerate_extensions_capped(
    base: &Base,
    universe: &AtomSet,
    bounds: &Bounds,
    cap: u128,
) -> Result<Extensions, BaseError> {
    let u = Universe::new(universe)?;
    check_base_atoms(base, &u)?;
    if let Some(r) = base.rules().iter().find(|r| !r.fits(bounds)) {
        return Err(BaseError::RuleExceedsBounds {
            rule: r.to_string(),
            bounds: *bounds,
        });
    }
    let candidates: Vec<Arc<AtomicRule>> = candidate_rules(universe, bounds)?
        .into_iter()
        .filter(|r| !base.contains(r))
        .map(Arc::new)
        .collect();
    let total = (0..=bounds.max_extra_rules)
        .map(|k| binomial(candidates.len(), k))
        .fold(0u128, |a, b| a.saturating_add(b));
    if total > cap {
        return Err(BaseError::CapExceeded {
            what: "base extensions",
            needed: total,
            cap,
        });
    }
    Ok(Extensions {
        base: base.clone(),
        combos: Combinations::new(candidates.len(), 0),
        candidates,
        size: 0,
        max_size: bounds.max_extra_rules,
        total,
    })
}

/// A random derivation of `goal` from `ctx` of depth at most `depth`, built
/// top-down by trying the applicable variables and rules in random order.
pub fn sample_derivation<R: Rng + ?Sized>(
    base: &Base,
    ctx: &[Atom],
    goal: &Atom,
    depth: usize,
    rng: &mut R,
) -> Option<DerivTerm> {
    let mut ctx = ctx.to_vec();
    let mut budget = 10_000usize;
    sample_in(base, &mut ctx, goal, depth, rng, &mut budget)
}

fn sample_in<R: Rng + ?Sized>(
    base: &Base,
    ctx: &mut Vec<Atom>,
    goal: &Atom,
    depth: usize,
    rng: &mut R,
    budget: &mut usize,
) -> Option<DerivTerm> {
    if *budget == 0 {
        return None;
    }
    *budget -= 1;
    let mut options: Vec<Option<&Arc<AtomicRule>>> = Vec::new();
    let vars = ctx.iter().filter(|a| *a == goal).count();
    options.extend(std::iter::repeat_n(None, vars.min(1)));
    if depth > 0 {
        options.extend(
            base.rules()
                .iter()
                .filter(|r| r.conclusion() == goal)
                .map(Some),
        );
    }
    options.shuffle(rng);
    for opt in options {
        match opt {
            None => {
                let hits: Vec<usize> = ctx
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| *a == goal)
                    .map(|(k, _)| ctx.len() - 1 - k)
                    .collect();
                return hits.choose(rng).map(|&i| DerivTerm::Var(i));
            }
            Some(rule) => {
                let mut args = Vec::with_capacity(rule.premises().len());
                for p in rule.premises() {
                    let mark = ctx.len();
                    ctx.extend(p.hyps.iter().cloned());
                    let a = sample_in(base, ctx, &p.concl, depth - 1, rng, budget);
                    ctx.truncate(mark);
                    match a {
                        Some(a) => args.push(a),
                        None => break,
                    }
                }
                if args.len() == rule.premises().len() {
                    return Some(DerivTerm::app(rule.clone(), args));
                }
            }
        }
    }
    None
}

/// On-disk form of a base: its universe and rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseFile {
    pub universe: AtomSet,
    pub base: Base,
}

impl BaseFile {
    pub fn parse(text: &str) -> Result<BaseFile, SchemaError> {
        let v = schema::parse_json(text)?;
        BaseFile::from_value(&v, "")
    }

    pub fn from_value(v: &Value, at: &str) -> Result<BaseFile, SchemaError> {
        let obj = schema::object(v, at)?;
        let u_at = schema::child(at, "universe");
        let mut universe = AtomSet::new();
        for (i, a) in schema::array(schema::field(obj, "universe", at)?, &u_at)?
            .iter()
            .enumerate()
        {
            universe.insert(parse_atom(a, &schema::child(&u_at, i))?);
        }
        let r_at = schema::child(at, "rules");
        let mut rules = Vec::new();
        for (i, r) in schema::array(schema::field(obj, "rules", at)?, &r_at)?
            .iter()
            .enumerate()
        {
            rules.push(parse_rule(r, &schema::child(&r_at, i), &universe)?);
        }
        Ok(BaseFile {
            universe,
            base: Base::new(rules),
        })
    }

    pub fn to_value(&self) -> Value {
        json!({
            "universe": self.universe.iter().map(Atom::name).collect::<Vec<_>>(),
            "rules": self.base.rules().iter().map(|r| rule_value(r)).collect::<Vec<_>>(),
        })
    }
}

pub(crate) fn rule_value(r: &AtomicRule) -> Value {
    json!({
        "premises": r.premises().iter().map(|p| json!({
            "hyps": p.hyps.iter().map(Atom::name).collect::<Vec<_>>(),
            "concl": p.concl.name(),
        })).collect::<Vec<_>>(),
        "concl": r.conclusion().name(),
    })
}

fn parse_atom(v: &Value, at: &str) -> Result<Atom, SchemaError> {
    let s = schema::string(v, at)?;
    Atom::new(s).map_err(|e| SchemaError::new(at, e.to_string()))
}

fn parse_universe_atom(v: &Value, at: &str, universe: &AtomSet) -> Result<Atom, SchemaError> {
    let a = parse_atom(v, at)?;
    if !universe.contains(&a) {
        return Err(SchemaError::new(
            at,
            format!("atom `{a}` is outside the declared universe"),
        ));
    }
    Ok(a)
}

pub(crate) fn parse_rule(v: &Value, at: &str, universe: &AtomSet) -> Result<AtomicRule, SchemaError> {
    let obj = schema::object(v, at)?;
    let p_at = schema::child(at, "premises");
    let mut premises = Vec::new();
    for (i, p) in schema::array(schema::field(obj, "premises", at)?, &p_at)?
        .iter()
        .enumerate()
    {
        let here = schema::child(&p_at, i);
        let pobj = schema::object(p, &here)?;
        let h_at = schema::child(&here, "hyps");
        let mut hyps = AtomSet::new();
        for (k, h) in schema::array(schema::field(pobj, "hyps", &here)?, &h_at)?
            .iter()
            .enumerate()
        {
            hyps.insert(parse_universe_atom(h, &schema::child(&h_at, k), universe)?);
        }
        let concl = parse_universe_atom(
            schema::field(pobj, "concl", &here)?,
            &schema::child(&here, "concl"),
            universe,
        )?;
        premises.push(Premise { hyps, concl });
    }
    let concl = parse_universe_atom(
        schema::field(obj, "concl", at)?,
        &schema::child(at, "concl"),
        universe,
    )?;
    Ok(AtomicRule::new(premises, concl))
}

/// Shorthand for building rules in tests and examples: `rule(&[(&["q"], "r")], "s")`.
pub fn rule(premises: &[(&[&str], &str)], conclusion: &str) -> AtomicRule {
    let atom = |s: &str| Atom::new(s).expect("valid atom");
    AtomicRule::new(
        premises
            .iter()
            .map(|(h, c)| Premise::new(h.iter().map(|a| atom(a)), atom(c))),
        atom(conclusion),
    )
}

pub fn atom_set(names: &[&str]) -> AtomSet {
    names
        .iter()
        .map(|n| Atom::new(n).expect("valid atom"))
        .collect()
}

/// Index of each base in a list, keyed by its rule set.
pub(crate) fn base_index(bases: &[Base]) -> HashMap<Base, usize> {
    bases.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect()
}
