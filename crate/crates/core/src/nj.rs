//! Natural deduction proof terms, normalization, a decision procedure with
//! certificates, and Kripke models.
//!
//! [`decide`] runs a contraction-free sequent search (Dyckhoff's G4ip) that
//! extracts an NJ term on success. On failure it searches rooted trees of up
//! to [`COUNTERMODEL_MAX_WORLDS`] worlds for a countermodel, so every verdict
//! carries a checkable certificate.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::syntax::{Atom, Formula, FormulaSet};

pub const COUNTERMODEL_MAX_WORLDS: usize = 6;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NJTerm {
    Var(String),
    Pair(Box<NJTerm>, Box<NJTerm>),
    Fst(Box<NJTerm>),
    Snd(Box<NJTerm>),
    Lam(String, Formula, Box<NJTerm>),
    App(Box<NJTerm>, Box<NJTerm>),
    /// Left injection; the formula is the right disjunct.
    Inl(Box<NJTerm>, Formula),
    /// Right injection; the formula is the left disjunct.
    Inr(Box<NJTerm>, Formula),
    Case(Box<NJTerm>, String, Box<NJTerm>, String, Box<NJTerm>),
    Abort(Box<NJTerm>, Formula),
}

use NJTerm::*;

impl NJTerm {
    pub fn var(x: &str) -> NJTerm {
        Var(x.to_string())
    }
    pub fn pair(a: NJTerm, b: NJTerm) -> NJTerm {
        Pair(Box::new(a), Box::new(b))
    }
    pub fn fst(t: NJTerm) -> NJTerm {
        Fst(Box::new(t))
    }
    pub fn snd(t: NJTerm) -> NJTerm {
        Snd(Box::new(t))
    }
    pub fn lam(x: &str, ty: Formula, body: NJTerm) -> NJTerm {
        Lam(x.to_string(), ty, Box::new(body))
    }
    pub fn app(f: NJTerm, a: NJTerm) -> NJTerm {
        App(Box::new(f), Box::new(a))
    }
    pub fn inl(t: NJTerm, right: Formula) -> NJTerm {
        Inl(Box::new(t), right)
    }
    pub fn inr(t: NJTerm, left: Formula) -> NJTerm {
        Inr(Box::new(t), left)
    }
    pub fn case(s: NJTerm, x: &str, l: NJTerm, y: &str, r: NJTerm) -> NJTerm {
        Case(Box::new(s), x.to_string(), Box::new(l), y.to_string(), Box::new(r))
    }
    pub fn abort(t: NJTerm, ty: Formula) -> NJTerm {
        Abort(Box::new(t), ty)
    }

    pub fn size(&self) -> usize {
        match self {
            Var(_) => 1,
            Fst(t) | Snd(t) | Lam(_, _, t) | Inl(t, _) | Inr(t, _) | Abort(t, _) => 1 + t.size(),
            Pair(a, b) | App(a, b) => 1 + a.size() + b.size(),
            Case(s, _, l, _, r) => 1 + s.size() + l.size() + r.size(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
        match self {
            Var(x) => {
                if !bound.contains(&x.as_str()) {
                    out.insert(x.clone());
                }
            }
            Fst(t) | Snd(t) | Inl(t, _) | Inr(t, _) | Abort(t, _) => t.collect_free(bound, out),
            Pair(a, b) | App(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Lam(x, _, t) => {
                bound.push(x);
                t.collect_free(bound, out);
                bound.pop();
            }
            Case(s, x, l, y, r) => {
                s.collect_free(bound, out);
                bound.push(x);
                l.collect_free(bound, out);
                bound.pop();
                bound.push(y);
                r.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    fn all_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Var(x) => {
                out.insert(x.clone());
            }
            Fst(t) | Snd(t) | Inl(t, _) | Inr(t, _) | Abort(t, _) => t.all_names(out),
            Pair(a, b) | App(a, b) => {
                a.all_names(out);
                b.all_names(out);
            }
            Lam(x, _, t) => {
                out.insert(x.clone());
                t.all_names(out);
            }
            Case(s, x, l, y, r) => {
                out.insert(x.clone());
                out.insert(y.clone());
                s.all_names(out);
                l.all_names(out);
                r.all_names(out);
            }
        }
    }
}

impl fmt::Display for NJTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var(x) => f.write_str(x),
            Pair(a, b) => write!(f, "<{a}, {b}>"),
            Fst(t) => write!(f, "fst({t})"),
            Snd(t) => write!(f, "snd({t})"),
            Lam(x, ty, t) => write!(f, "(\\{x}:{ty}. {t})"),
            App(a, b) => write!(f, "({a} {b})"),
            Inl(t, _) => write!(f, "inl({t})"),
            Inr(t, _) => write!(f, "inr({t})"),
            Case(s, x, l, y, r) => write!(f, "case {s} of inl {x} => {l} | inr {y} => {r}"),
            Abort(t, ty) => write!(f, "abort[{ty}]({t})"),
        }
    }
}

impl fmt::Debug for NJTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Typing context; later entries shadow earlier ones with the same name.
pub type NJContext = Vec<(String, Formula)>;

/// The formula `t` proves in `ctx`, if `t` is well typed.
pub fn infer(ctx: &[(String, Formula)], t: &NJTerm) -> Option<Formula> {
    let mut ctx: Vec<(String, Formula)> = ctx.to_vec();
    infer_in(&mut ctx, t)
}

fn infer_in(ctx: &mut Vec<(String, Formula)>, t: &NJTerm) -> Option<Formula> {
    match t {
        Var(x) => ctx.iter().rev().find(|(y, _)| y == x).map(|(_, f)| f.clone()),
        Pair(a, b) => Some(Formula::conj(infer_in(ctx, a)?, infer_in(ctx, b)?)),
        Fst(p) => match infer_in(ctx, p)? {
            Formula::Conj(a, _) => Some(*a),
            _ => None,
        },
        Snd(p) => match infer_in(ctx, p)? {
            Formula::Conj(_, b) => Some(*b),
            _ => None,
        },
        Lam(x, ty, body) => {
            ctx.push((x.clone(), ty.clone()));
            let b = infer_in(ctx, body);
            ctx.pop();
            Some(Formula::imp(ty.clone(), b?))
        }
        App(f, a) => match infer_in(ctx, f)? {
            Formula::Impl(dom, cod) if infer_in(ctx, a)? == *dom => Some(*cod),
            _ => None,
        },
        Inl(t, right) => Some(Formula::disj(infer_in(ctx, t)?, right.clone())),
        Inr(t, left) => Some(Formula::disj(left.clone(), infer_in(ctx, t)?)),
        Case(s, x, l, y, r) => {
            let Formula::Disj(a, b) = infer_in(ctx, s)? else {
                return None;
            };
            ctx.push((x.clone(), *a));
            let lt = infer_in(ctx, l);
            ctx.pop();
            ctx.push((y.clone(), *b));
            let rt = infer_in(ctx, r);
            ctx.pop();
            let (lt, rt) = (lt?, rt?);
            (lt == rt).then_some(lt)
        }
        Abort(t, ty) => (infer_in(ctx, t)? == Formula::Bot).then(|| ty.clone()),
    }
}

/// Whether `t` is an NJ derivation of `ctx |- phi`.
pub fn check_nj(ctx: &[(String, Formula)], t: &NJTerm, phi: &Formula) -> bool {
    infer(ctx, t).as_ref() == Some(phi)
}

/// Hypothesis names `h1, h2, ...` for `gamma` in canonical order.
pub fn hyp_context(gamma: &FormulaSet) -> NJContext {
    gamma
        .iter()
        .enumerate()
        .map(|(i, f)| (format!("h{}", i + 1), f.clone()))
        .collect()
}

fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "v" } else { stem };
    (1..)
        .map(|i| format!("{stem}{i}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded supply")
}

/// Capture-avoiding `t[s/x]`.
pub fn subst(t: &NJTerm, x: &str, s: &NJTerm) -> NJTerm {
    let fv = s.free_vars();
    subst_in(t, x, s, &fv)
}

fn subst_in(t: &NJTerm, x: &str, s: &NJTerm, fv: &BTreeSet<String>) -> NJTerm {
    let go = |u: &NJTerm| Box::new(subst_in(u, x, s, fv));
    match t {
        Var(y) if y == x => s.clone(),
        Var(_) => t.clone(),
        Pair(a, b) => Pair(go(a), go(b)),
        Fst(p) => Fst(go(p)),
        Snd(p) => Snd(go(p)),
        App(a, b) => App(go(a), go(b)),
        Inl(u, ty) => Inl(go(u), ty.clone()),
        Inr(u, ty) => Inr(go(u), ty.clone()),
        Abort(u, ty) => Abort(go(u), ty.clone()),
        Lam(y, ty, body) => {
            let (y2, body2) = bind_subst(y, body, x, s, fv);
            Lam(y2, ty.clone(), Box::new(body2))
        }
        Case(sc, y, l, z, r) => {
            let (y2, l2) = bind_subst(y, l, x, s, fv);
            let (z2, r2) = bind_subst(z, r, x, s, fv);
            Case(go(sc), y2, Box::new(l2), z2, Box::new(r2))
        }
    }
}

fn bind_subst(
    y: &str,
    body: &NJTerm,
    x: &str,
    s: &NJTerm,
    fv: &BTreeSet<String>,
) -> (String, NJTerm) {
    if y == x {
        return (y.to_string(), body.clone());
    }
    if fv.contains(y) {
        let mut avoid = fv.clone();
        body.all_names(&mut avoid);
        avoid.insert(x.to_string());
        let y2 = fresh_name(y, &avoid);
        let renamed = subst_in(body, y, &Var(y2.clone()), &BTreeSet::from([y2.clone()]));
        (y2, subst_in(&renamed, x, s, fv))
    } else {
        (y.to_string(), subst_in(body, x, s, fv))
    }
}

/// Full β-normalization for `->`, `&` and `|` detours.
pub fn normalize(t: &NJTerm) -> NJTerm {
    match t {
        Var(_) => t.clone(),
        Pair(a, b) => NJTerm::pair(normalize(a), normalize(b)),
        Fst(p) => match normalize(p) {
            Pair(a, _) => *a,
            p => NJTerm::fst(p),
        },
        Snd(p) => match normalize(p) {
            Pair(_, b) => *b,
            p => NJTerm::snd(p),
        },
        Lam(x, ty, body) => Lam(x.clone(), ty.clone(), Box::new(normalize(body))),
        App(f, a) => {
            let a = normalize(a);
            match normalize(f) {
                Lam(x, _, body) => normalize(&subst(&body, &x, &a)),
                f => NJTerm::app(f, a),
            }
        }
        Inl(u, ty) => NJTerm::inl(normalize(u), ty.clone()),
        Inr(u, ty) => NJTerm::inr(normalize(u), ty.clone()),
        Abort(u, ty) => NJTerm::abort(normalize(u), ty.clone()),
        Case(s, x, l, y, r) => match normalize(s) {
            Inl(a, _) => normalize(&subst(l, x, &a)),
            Inr(b, _) => normalize(&subst(r, y, &b)),
            s => Case(
                Box::new(s),
                x.clone(),
                Box::new(normalize(l)),
                y.clone(),
                Box::new(normalize(r)),
            ),
        },
    }
}

/// Whether some eliminator is applied directly to its matching introducer.
pub fn has_detour(t: &NJTerm) -> bool {
    match t {
        Var(_) => false,
        Fst(p) | Snd(p) => matches!(**p, Pair(..)) || has_detour(p),
        App(f, a) => matches!(**f, Lam(..)) || has_detour(f) || has_detour(a),
        Case(s, _, l, _, r) => {
            matches!(**s, Inl(..) | Inr(..)) || has_detour(s) || has_detour(l) || has_detour(r)
        }
        Pair(a, b) => has_detour(a) || has_detour(b),
        Lam(_, _, u) | Inl(u, _) | Inr(u, _) | Abort(u, _) => has_detour(u),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NjError {
    #[error("no countermodel within bound ({worlds} worlds) for an unprovable sequent")]
    NoCountermodel { worlds: usize },
    #[error("invalid Kripke model: {0}")]
    BadModel(String),
}

/// A finite Kripke model. World 0 is not special; `leq[a][b]` means `a <= b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KripkeModel {
    names: Vec<String>,
    leq: Vec<Vec<bool>>,
    atom_val: BTreeMap<Atom, BTreeSet<usize>>,
}

impl KripkeModel {
    /// Builds a model from order pairs (closed reflexively and transitively)
    /// and atom valuations, checking antisymmetry and monotonicity.
    pub fn new(
        worlds: usize,
        order: &[(usize, usize)],
        atom_val: BTreeMap<Atom, BTreeSet<usize>>,
    ) -> Result<KripkeModel, NjError> {
        let mut leq = vec![vec![false; worlds]; worlds];
        for (w, row) in leq.iter_mut().enumerate() {
            row[w] = true;
        }
        for &(a, b) in order {
            if a >= worlds || b >= worlds {
                return Err(NjError::BadModel(format!("world index out of range in ({a}, {b})")));
            }
            leq[a][b] = true;
        }
        for k in 0..worlds {
            for i in 0..worlds {
                if leq[i][k] {
                    for j in 0..worlds {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..worlds {
            for j in 0..worlds {
                if i != j && leq[i][j] && leq[j][i] {
                    return Err(NjError::BadModel(format!("worlds {i} and {j} form a cycle")));
                }
            }
        }
        for (p, set) in &atom_val {
            for &w in set {
                if w >= worlds {
                    return Err(NjError::BadModel(format!("atom {p} at missing world {w}")));
                }
                for (v, &above) in leq[w].iter().enumerate() {
                    if above && !set.contains(&v) {
                        return Err(NjError::BadModel(format!(
                            "atom {p} holds at w{w} but not at w{v} although w{w} <= w{v}"
                        )));
                    }
                }
            }
        }
        Ok(KripkeModel {
            names: (0..worlds).map(|i| format!("w{i}")).collect(),
            leq,
            atom_val,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn holds_atom(&self, w: usize, p: &Atom) -> bool {
        self.atom_val.get(p).is_some_and(|s| s.contains(&w))
    }

    pub fn valuation(&self) -> &BTreeMap<Atom, BTreeSet<usize>> {
        &self.atom_val
    }

    /// The model in the poset file format.
    pub fn to_json(&self) -> Value {
        let mut leq = Vec::new();
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j && self.leq[i][j] {
                    leq.push(json!([self.names[i], self.names[j]]));
                }
            }
        }
        let atoms: serde_json::Map<String, Value> = self
            .atom_val
            .iter()
            .map(|(p, s)| {
                (
                    p.name().to_string(),
                    json!(s.iter().map(|&w| self.names[w].clone()).collect::<Vec<_>>()),
                )
            })
            .collect();
        json!({"elements": self.names, "leq": leq, "atoms": atoms})
    }
}

/// Forcing at a world, by the usual clauses.
pub fn kripke_eval(m: &KripkeModel, w: usize, phi: &Formula) -> bool {
    match phi {
        Formula::Atom(p) => m.holds_atom(w, p),
        Formula::Bot => false,
        Formula::Conj(a, b) => kripke_eval(m, w, a) && kripke_eval(m, w, b),
        Formula::Disj(a, b) => kripke_eval(m, w, a) || kripke_eval(m, w, b),
        Formula::Impl(a, b) => (0..m.len())
            .filter(|&v| m.leq[w][v])
            .all(|v| !kripke_eval(m, v, a) || kripke_eval(m, v, b)),
    }
}

pub fn satisfies_sequent(m: &KripkeModel, w: usize, gamma: &FormulaSet, phi: &Formula) -> bool {
    !gamma.iter().all(|g| kripke_eval(m, w, g)) || kripke_eval(m, w, phi)
}

#[derive(Debug, Clone)]
pub enum Decision {
    Derivable(NJTerm),
    Underivable { model: KripkeModel, world: usize },
}

impl Decision {
    pub fn is_derivable(&self) -> bool {
        matches!(self, Decision::Derivable(_))
    }

    /// Re-checks the certificate against the sequent.
    pub fn verify(&self, gamma: &FormulaSet, phi: &Formula) -> bool {
        match self {
            Decision::Derivable(t) => check_nj(&hyp_context(gamma), t, phi),
            Decision::Underivable { model, world } => {
                gamma.iter().all(|g| kripke_eval(model, *world, g))
                    && !kripke_eval(model, *world, phi)
            }
        }
    }
}

/// Decides `gamma |- phi` in intuitionistic propositional logic.
pub fn decide(gamma: &FormulaSet, phi: &Formula) -> Result<Decision, NjError> {
    if let Some(t) = prove(gamma, phi) {
        return Ok(Decision::Derivable(t));
    }
    match find_countermodel(gamma, phi, COUNTERMODEL_MAX_WORLDS) {
        Some((model, world)) => Ok(Decision::Underivable { model, world }),
        None => Err(NjError::NoCountermodel {
            worlds: COUNTERMODEL_MAX_WORLDS,
        }),
    }
}

/// Proof search alone: an NJ term for `gamma |- phi` in [`hyp_context`]
/// naming, or `None` when the sequent is not derivable.
pub fn prove(gamma: &FormulaSet, phi: &Formula) -> Option<NJTerm> {
    let ctx = hyp_context(gamma);
    let mut s = Search {
        counter: 0,
        failed: HashSet::new(),
    };
    s.prove(ctx, phi)
}

struct Search {
    counter: usize,
    failed: HashSet<(Vec<Formula>, Formula)>,
}

fn subst_many(t: NJTerm, subs: &[(String, NJTerm)]) -> NJTerm {
    subs.iter().fold(t, |acc, (x, s)| subst(&acc, x, s))
}

impl Search {
    fn fresh(&mut self) -> String {
        self.counter += 1;
        format!("_{}", self.counter)
    }

    /// Adds a hypothesis unless an equal formula is already present; returns
    /// the new variable, if one was introduced.
    fn add(&mut self, ctx: &mut NJContext, f: Formula) -> Option<String> {
        if ctx.iter().any(|(_, g)| *g == f) {
            return None;
        }
        let x = self.fresh();
        ctx.push((x.clone(), f));
        Some(x)
    }

    fn var_of(ctx: &NJContext, f: &Formula) -> NJTerm {
        Var(ctx.iter().find(|(_, g)| g == f).expect("hypothesis present").0.clone())
    }

    fn key(ctx: &NJContext, goal: &Formula) -> (Vec<Formula>, Formula) {
        let mut fs: Vec<Formula> = ctx.iter().map(|(_, f)| f.clone()).collect();
        fs.sort();
        (fs, goal.clone())
    }

    fn prove(&mut self, ctx: NJContext, goal: &Formula) -> Option<NJTerm> {
        let key = Self::key(&ctx, goal);
        if self.failed.contains(&key) {
            return None;
        }
        let r = self.prove_uncached(ctx, goal);
        if r.is_none() {
            self.failed.insert(key);
        }
        r
    }

    fn prove_uncached(&mut self, ctx: NJContext, goal: &Formula) -> Option<NJTerm> {
        if let Some((x, _)) = ctx.iter().find(|(_, f)| f == goal) {
            return Some(Var(x.clone()));
        }
        if let Some((x, _)) = ctx.iter().find(|(_, f)| *f == Formula::Bot) {
            return Some(NJTerm::abort(Var(x.clone()), goal.clone()));
        }
        if let Some(i) = ctx.iter().position(|(_, f)| invertible_left(f, &ctx)) {
            return self.left_invertible(ctx, i, goal);
        }
        match goal {
            Formula::Conj(a, b) => {
                let l = self.prove(ctx.clone(), a)?;
                let r = self.prove(ctx, b)?;
                return Some(NJTerm::pair(l, r));
            }
            Formula::Impl(a, b) => {
                let mut ctx2 = ctx.clone();
                let body = match self.add(&mut ctx2, (**a).clone()) {
                    Some(x) => {
                        let t = self.prove(ctx2, b)?;
                        return Some(NJTerm::lam(&x, (**a).clone(), t));
                    }
                    None => self.prove(ctx2, b)?,
                };
                let x = self.fresh();
                return Some(NJTerm::lam(&x, (**a).clone(), body));
            }
            _ => {}
        }
        if let Formula::Disj(a, b) = goal {
            if let Some(t) = self.prove(ctx.clone(), a) {
                return Some(NJTerm::inl(t, (**b).clone()));
            }
            if let Some(t) = self.prove(ctx.clone(), b) {
                return Some(NJTerm::inr(t, (**a).clone()));
            }
        }
        for i in 0..ctx.len() {
            let Formula::Impl(cd, b) = &ctx[i].1 else { continue };
            let Formula::Impl(c, d) = &**cd else { continue };
            let (c, d, b) = ((**c).clone(), (**d).clone(), (**b).clone());
            let x = ctx[i].0.clone();
            let mut rest = ctx.clone();
            rest.remove(i);
            // ctx, g : d -> b |- c -> d
            let mut left = rest.clone();
            let g = self.add(&mut left, Formula::imp(d.clone(), b.clone()));
            let Some(s) = self.prove(left, &Formula::imp(c.clone(), d.clone())) else {
                continue;
            };
            let mut right = rest;
            let y = self.add(&mut right, b.clone());
            let Some(u) = self.prove(right, goal) else {
                continue;
            };
            let s = match g {
                Some(g) => {
                    let dv = self.fresh();
                    let cv = self.fresh();
                    let replacement = NJTerm::lam(
                        &dv,
                        d.clone(),
                        NJTerm::app(Var(x.clone()), NJTerm::lam(&cv, c.clone(), Var(dv.clone()))),
                    );
                    subst(&s, &g, &replacement)
                }
                None => s,
            };
            let fy = NJTerm::app(Var(x.clone()), s);
            return Some(match y {
                Some(y) => subst(&u, &y, &fy),
                None => u,
            });
        }
        None
    }

    fn left_invertible(&mut self, mut ctx: NJContext, i: usize, goal: &Formula) -> Option<NJTerm> {
        let (x, f) = ctx.remove(i);
        let xv = Var(x.clone());
        match f {
            Formula::Conj(a, b) => {
                let ya = self.add(&mut ctx, *a);
                let yb = self.add(&mut ctx, *b);
                let t = self.prove(ctx, goal)?;
                let mut subs = Vec::new();
                if let Some(ya) = ya {
                    subs.push((ya, NJTerm::fst(xv.clone())));
                }
                if let Some(yb) = yb {
                    subs.push((yb, NJTerm::snd(xv)));
                }
                Some(subst_many(t, &subs))
            }
            Formula::Disj(a, b) => {
                let mut lctx = ctx.clone();
                let ya = self.add(&mut lctx, (*a).clone());
                let l = self.prove(lctx.clone(), goal)?;
                let mut rctx = ctx;
                let yb = self.add(&mut rctx, (*b).clone());
                let r = self.prove(rctx, goal)?;
                // Branch variables that were already present are bound to the
                // existing hypothesis name; pick fresh binders instead.
                let ya = ya.unwrap_or_else(|| self.fresh());
                let yb = yb.unwrap_or_else(|| self.fresh());
                Some(NJTerm::case(xv, &ya, l, &yb, r))
            }
            Formula::Impl(a, b) => match *a {
                Formula::Atom(_) => {
                    let arg = Self::var_of(&ctx, &a);
                    let y = self.add(&mut ctx, *b);
                    let t = self.prove(ctx, goal)?;
                    Some(match y {
                        Some(y) => subst(&t, &y, &NJTerm::app(xv, arg)),
                        None => t,
                    })
                }
                Formula::Bot => self.prove(ctx, goal),
                Formula::Conj(c, d) => {
                    let g = self.add(&mut ctx, Formula::imp(*c.clone(), Formula::imp(*d.clone(), *b)));
                    let t = self.prove(ctx, goal)?;
                    Some(match g {
                        Some(g) => {
                            let (cv, dv) = (self.fresh(), self.fresh());
                            let curried = NJTerm::lam(
                                &cv,
                                *c.clone(),
                                NJTerm::lam(
                                    &dv,
                                    *d.clone(),
                                    NJTerm::app(xv, NJTerm::pair(Var(cv.clone()), Var(dv.clone()))),
                                ),
                            );
                            subst(&t, &g, &curried)
                        }
                        None => t,
                    })
                }
                Formula::Disj(c, d) => {
                    let g1 = self.add(&mut ctx, Formula::imp(*c.clone(), *b.clone()));
                    let g2 = self.add(&mut ctx, Formula::imp(*d.clone(), *b));
                    let t = self.prove(ctx, goal)?;
                    let mut subs = Vec::new();
                    if let Some(g1) = g1 {
                        let cv = self.fresh();
                        subs.push((
                            g1,
                            NJTerm::lam(
                                &cv,
                                *c.clone(),
                                NJTerm::app(xv.clone(), NJTerm::inl(Var(cv.clone()), *d.clone())),
                            ),
                        ));
                    }
                    if let Some(g2) = g2 {
                        let dv = self.fresh();
                        subs.push((
                            g2,
                            NJTerm::lam(
                                &dv,
                                *d.clone(),
                                NJTerm::app(xv, NJTerm::inr(Var(dv.clone()), *c.clone())),
                            ),
                        ));
                    }
                    Some(subst_many(t, &subs))
                }
                Formula::Impl(..) => unreachable!("not invertible"),
            },
            _ => unreachable!("not invertible"),
        }
    }
}

fn invertible_left(f: &Formula, ctx: &NJContext) -> bool {
    match f {
        Formula::Conj(..) | Formula::Disj(..) => true,
        Formula::Impl(a, _) => match &**a {
            Formula::Atom(_) => ctx.iter().any(|(_, g)| g == &**a),
            Formula::Bot | Formula::Conj(..) | Formula::Disj(..) => true,
            Formula::Impl(..) => false,
        },
        _ => false,
    }
}

/// Parent arrays of rooted trees on `n` nodes in breadth-first numbering
/// (`parent[i] < i`, nondecreasing), one per unordered shape up to the
/// symmetries that ordering removes.
fn tree_shapes(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let i = cur.len() + 1;
        if i == n {
            out.push(cur.clone());
            return;
        }
        let lo = cur.last().copied().unwrap_or(0);
        for p in lo..i {
            cur.push(p);
            go(n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n >= 1 {
        go(n, &mut Vec::new(), &mut out);
    }
    out
}

/// Bitmask evaluator over a tree; `up[w]` is the set of worlds above `w`.
fn eval_mask(phi: &Formula, up: &[u64], val: &BTreeMap<&Atom, u64>) -> u64 {
    let all = (1u64 << up.len()) - 1;
    match phi {
        Formula::Atom(p) => val.get(p).copied().unwrap_or(0),
        Formula::Bot => 0,
        Formula::Conj(a, b) => eval_mask(a, up, val) & eval_mask(b, up, val),
        Formula::Disj(a, b) => eval_mask(a, up, val) | eval_mask(b, up, val),
        Formula::Impl(a, b) => {
            let bad = eval_mask(a, up, val) & !eval_mask(b, up, val) & all;
            (0..up.len())
                .filter(|&w| up[w] & bad == 0)
                .fold(0, |m, w| m | 1 << w)
        }
    }
}

/// Searches trees of increasing size for a model whose root forces `gamma`
/// but not `phi`.
pub fn find_countermodel(
    gamma: &FormulaSet,
    phi: &Formula,
    max_worlds: usize,
) -> Option<(KripkeModel, usize)> {
    let mut atoms: BTreeSet<Atom> = crate::syntax::atoms_of(gamma);
    atoms.extend(phi.atoms());
    let atoms: Vec<Atom> = atoms.into_iter().collect();
    for n in 1..=max_worlds.min(63) {
        for parent in tree_shapes(n) {
            let mut up = vec![0u64; n];
            for w in (0..n).rev() {
                up[w] |= 1 << w;
                if w > 0 {
                    let p = parent[w - 1];
                    up[p] |= up[w];
                }
            }
            let upsets: Vec<u64> = (0..1u64 << n)
                .filter(|&s| (0..n).all(|w| s >> w & 1 == 0 || up[w] & !s == 0))
                .collect();
            let mut choice = vec![0usize; atoms.len()];
            loop {
                let val: BTreeMap<&Atom, u64> = atoms
                    .iter()
                    .zip(&choice)
                    .map(|(a, &c)| (a, upsets[c]))
                    .collect();
                let root_ok = gamma.iter().all(|g| eval_mask(g, &up, &val) & 1 == 1)
                    && eval_mask(phi, &up, &val) & 1 == 0;
                if root_ok {
                    let order: Vec<(usize, usize)> =
                        (1..n).map(|w| (parent[w - 1], w)).collect();
                    let atom_val = val
                        .iter()
                        .map(|(a, &m)| {
                            ((*a).clone(), (0..n).filter(|w| m >> w & 1 == 1).collect())
                        })
                        .collect();
                    let model = KripkeModel::new(n, &order, atom_val).expect("tree model");
                    return Some((model, 0));
                }
                let mut k = 0;
                loop {
                    if k == choice.len() {
                        break;
                    }
                    choice[k] += 1;
                    if choice[k] < upsets.len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == choice.len() {
                    break;
                }
            }
        }
    }
    None
}

/// A random rooted tree model with at most `max_worlds` worlds.
pub fn random_model<R: Rng + ?Sized>(
    atoms: &BTreeSet<Atom>,
    max_worlds: usize,
    rng: &mut R,
) -> KripkeModel {
    let n = rng.gen_range(1..=max_worlds.max(1));
    let parent: Vec<usize> = (1..n).map(|w| rng.gen_range(0..w)).collect();
    let order: Vec<(usize, usize)> = (1..n).map(|w| (parent[w - 1], w)).collect();
    let mut desc: Vec<Vec<usize>> = (0..n).map(|w| vec![w]).collect();
    for w in (1..n).rev() {
        let below = desc[w].clone();
        desc[parent[w - 1]].extend(below);
    }
    let atom_val = atoms
        .iter()
        .map(|a| {
            let mut set = BTreeSet::new();
            for w in 0..n {
                if rng.gen_bool(0.3) {
                    set.extend(desc[w].iter().copied());
                }
            }
            (a.clone(), set)
        })
        .collect();
    KripkeModel::new(n, &order, atom_val).expect("tree model")
}

/// A random formula over `atoms` with connective depth at most `depth`.
pub fn random_formula<R: Rng + ?Sized>(atoms: &[Atom], depth: usize, rng: &mut R) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.1) {
            Formula::Bot
        } else {
            Formula::Atom(atoms.choose(rng).expect("nonempty atoms").clone())
        };
    }
    let a = random_formula(atoms, depth - 1, rng);
    let b = random_formula(atoms, depth - 1, rng);
    match rng.gen_range(0..3) {
        0 => Formula::conj(a, b),
        1 => Formula::disj(a, b),
        _ => Formula::imp(a, b),
    }
}

/// A random well-typed term of type `ty` in `ctx`, seeded with detours.
/// `ctx` should contain a hypothesis of type `bot` so every type is
/// inhabited; otherwise generation may fail.
pub fn random_term<R: Rng + ?Sized>(
    ctx: &[(String, Formula)],
    ty: &Formula,
    depth: usize,
    rng: &mut R,
) -> Option<NJTerm> {
    let mut ctx = ctx.to_vec();
    let mut counter = 0usize;
    gen_term(&mut ctx, ty, depth, rng, &mut counter)
}

fn fresh_gen(counter: &mut usize) -> String {
    *counter += 1;
    format!("g{counter}")
}

fn gen_term<R: Rng + ?Sized>(
    ctx: &mut NJContext,
    ty: &Formula,
    depth: usize,
    rng: &mut R,
    counter: &mut usize,
) -> Option<NJTerm> {
    let direct = ctx.iter().rev().find(|(_, f)| f == ty).map(|(x, _)| Var(x.clone()));
    if depth == 0 || (direct.is_some() && rng.gen_bool(0.3)) {
        if let Some(v) = direct {
            return Some(v);
        }
        if let Some((x, _)) = ctx.iter().rev().find(|(_, f)| *f == Formula::Bot) {
            return Some(NJTerm::abort(Var(x.clone()), ty.clone()));
        }
        if depth == 0 {
            return None;
        }
    }
    let atoms: Vec<Atom> = ctx.iter().flat_map(|(_, f)| f.atoms()).collect::<BTreeSet<_>>().into_iter().collect();
    let side = |rng: &mut R| {
        if atoms.is_empty() {
            Formula::Bot
        } else {
            random_formula(&atoms, 1, rng)
        }
    };
    match rng.gen_range(0..5) {
        0 => {
            let b = side(rng);
            let x = fresh_gen(counter);
            ctx.push((x.clone(), b.clone()));
            let body = gen_term(ctx, ty, depth - 1, rng, counter);
            ctx.pop();
            let arg = gen_term(ctx, &b, depth - 1, rng, counter)?;
            Some(NJTerm::app(NJTerm::lam(&x, b, body?), arg))
        }
        1 => {
            let b = side(rng);
            let a = gen_term(ctx, ty, depth - 1, rng, counter)?;
            let other = gen_term(ctx, &b, depth - 1, rng, counter)?;
            Some(if rng.gen_bool(0.5) {
                NJTerm::fst(NJTerm::pair(a, other))
            } else {
                NJTerm::snd(NJTerm::pair(other, a))
            })
        }
        2 => {
            let (b, c) = (side(rng), side(rng));
            let (x, y) = (fresh_gen(counter), fresh_gen(counter));
            let scrut = gen_term(ctx, &b, depth - 1, rng, counter)?;
            ctx.push((x.clone(), b.clone()));
            let l = gen_term(ctx, ty, depth - 1, rng, counter);
            ctx.pop();
            ctx.push((y.clone(), c.clone()));
            let r = gen_term(ctx, ty, depth - 1, rng, counter);
            ctx.pop();
            Some(NJTerm::case(NJTerm::inl(scrut, c), &x, l?, &y, r?))
        }
        _ => match ty {
            Formula::Conj(a, b) => Some(NJTerm::pair(
                gen_term(ctx, a, depth - 1, rng, counter)?,
                gen_term(ctx, b, depth - 1, rng, counter)?,
            )),
            Formula::Impl(a, b) => {
                let x = fresh_gen(counter);
                ctx.push((x.clone(), (**a).clone()));
                let body = gen_term(ctx, b, depth - 1, rng, counter);
                ctx.pop();
                Some(NJTerm::lam(&x, (**a).clone(), body?))
            }
            Formula::Disj(a, b) => Some(if rng.gen_bool(0.5) {
                NJTerm::inl(gen_term(ctx, a, depth - 1, rng, counter)?, (**b).clone())
            } else {
                NJTerm::inr(gen_term(ctx, b, depth - 1, rng, counter)?, (**a).clone())
            }),
            _ => gen_term(ctx, ty, 0, rng, counter),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_formula;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn fs(v: &[&str]) -> FormulaSet {
        v.iter().map(|s| f(s)).collect()
    }

    #[test]
    fn check_examples() {
        let id = NJTerm::lam("x", f("p"), NJTerm::var("x"));
        assert!(check_nj(&[], &id, &f("p -> p")));
        let ctx = vec![("x".to_string(), f("p & q"))];
        let swap = NJTerm::pair(NJTerm::snd(NJTerm::var("x")), NJTerm::fst(NJTerm::var("x")));
        assert!(check_nj(&ctx, &swap, &f("q & p")));
        let ctx = vec![("x".to_string(), f("p | q"))];
        let t = NJTerm::case(
            NJTerm::var("x"),
            "y",
            NJTerm::inr(NJTerm::var("y"), f("q")),
            "z",
            NJTerm::inl(NJTerm::var("z"), f("p")),
        );
        assert!(check_nj(&ctx, &t, &f("q | p")));
        assert!(!check_nj(&ctx, &t, &f("p | q")));
        assert!(!check_nj(&[], &NJTerm::var("x"), &f("p")));
    }

    #[test]
    fn normalize_examples() {
        let u = NJTerm::var("u");
        let id = NJTerm::lam("x", f("p"), NJTerm::var("x"));
        assert_eq!(normalize(&NJTerm::app(id, u.clone())), u);
        let a = NJTerm::var("a");
        assert_eq!(normalize(&NJTerm::fst(NJTerm::pair(a.clone(), NJTerm::var("b")))), a);
        let c = NJTerm::case(
            NJTerm::inl(a.clone(), f("q")),
            "y",
            NJTerm::var("y"),
            "z",
            NJTerm::var("z"),
        );
        assert_eq!(normalize(&c), a);
    }

    #[test]
    fn substitution_avoids_capture() {
        // (\y. x)[y/x] must not capture.
        let t = NJTerm::lam("y", f("p"), NJTerm::var("x"));
        let out = subst(&t, "x", &NJTerm::var("y"));
        let Lam(b, _, body) = &out else { panic!() };
        assert_ne!(b, "y");
        assert_eq!(**body, NJTerm::var("y"));
    }

    #[test]
    fn decide_examples() {
        let d = decide(&FormulaSet::new(), &f("p -> p")).unwrap();
        assert!(d.is_derivable());
        assert!(d.verify(&FormulaSet::new(), &f("p -> p")));

        let peirce = f("((p -> q) -> p) -> p");
        match decide(&FormulaSet::new(), &peirce).unwrap() {
            Decision::Underivable { model, world } => {
                assert_eq!(model.len(), 2);
                assert!(!kripke_eval(&model, world, &peirce));
            }
            d => panic!("{d:?}"),
        }

        let gamma = fs(&["p -> q | r"]);
        let phi = f("(p -> q) | (p -> r)");
        let d = decide(&gamma, &phi).unwrap();
        assert!(!d.is_derivable());
        assert!(d.verify(&gamma, &phi));
    }

    #[test]
    fn decide_known_theorems() {
        for s in [
            "p & q -> q & p",
            "p | q -> q | p",
            "(p -> q) -> (q -> r) -> p -> r",
            "((p -> q) -> q) -> (p -> r) -> ((r -> q) -> q)",
            "~~(p | ~p)",
            "~~~p -> ~p",
            "(p | q -> r) -> (p -> r) & (q -> r)",
            "((((p -> q) -> p) -> p) -> q) -> q",
            "bot -> p",
            "(p -> q & r) -> (p -> q) & (p -> r)",
        ] {
            let phi = crate::syntax::parse_formula_with_negation(s).unwrap();
            let d = decide(&FormulaSet::new(), &phi).unwrap();
            assert!(d.is_derivable(), "{s}");
            assert!(d.verify(&FormulaSet::new(), &phi), "{s}");
        }
        for s in ["p | ~p", "~~p -> p", "(p -> q) | (q -> p)", "(~p -> q | r) -> (~p -> q) | (~p -> r)"] {
            let phi = crate::syntax::parse_formula_with_negation(s).unwrap();
            let d = decide(&FormulaSet::new(), &phi).unwrap();
            assert!(!d.is_derivable(), "{s}");
            assert!(d.verify(&FormulaSet::new(), &phi), "{s}");
        }
    }

    #[test]
    fn kripke_examples() {
        let single = KripkeModel::new(1, &[], BTreeMap::from([(Atom::new("p").unwrap(), BTreeSet::from([0]))])).unwrap();
        assert!(!kripke_eval(&single, 0, &Formula::Bot));
        assert!(kripke_eval(&single, 0, &f("p | q")));
        let chain = KripkeModel::new(2, &[(0, 1)], BTreeMap::from([(Atom::new("p").unwrap(), BTreeSet::from([1]))])).unwrap();
        assert!(kripke_eval(&chain, 0, &f("(p -> bot) -> bot")));
        assert!(!kripke_eval(&chain, 0, &f("p")));
    }

    #[test]
    fn model_validation() {
        let p = Atom::new("p").unwrap();
        let err = KripkeModel::new(2, &[(0, 1)], BTreeMap::from([(p.clone(), BTreeSet::from([0]))]));
        assert!(matches!(err, Err(NjError::BadModel(m)) if m.contains("w0") && m.contains("w1")));
        assert!(KripkeModel::new(2, &[(0, 1), (1, 0)], BTreeMap::new()).is_err());
    }

    #[test]
    fn tree_shape_counts_are_catalan() {
        let counts: Vec<usize> = (1..=6).map(|n| tree_shapes(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 14, 42]);
    }

    proptest! {
        #[test]
        fn decide_is_consistent(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms: Vec<Atom> = ["p", "q", "r"].iter().map(|s| Atom::new(s).unwrap()).collect();
            let gamma: FormulaSet = (0..rng.gen_range(0..3)).map(|_| random_formula(&atoms, 2, &mut rng)).collect();
            let phi = random_formula(&atoms, 3, &mut rng);
            let d = decide(&gamma, &phi).unwrap();
            prop_assert!(d.verify(&gamma, &phi));
            if d.is_derivable() {
                let all: BTreeSet<Atom> = atoms.iter().cloned().collect();
                for _ in 0..50 {
                    let m = random_model(&all, 5, &mut rng);
                    for w in 0..m.len() {
                        prop_assert!(satisfies_sequent(&m, w, &gamma, &phi));
                    }
                }
            }
        }

        #[test]
        fn normalization_reduces_and_preserves_types(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms: Vec<Atom> = ["p", "q", "r"].iter().map(|s| Atom::new(s).unwrap()).collect();
            let ctx: NJContext = vec![
                ("a".into(), f("p")), ("b".into(), f("q -> r")), ("z".into(), Formula::Bot),
            ];
            let ty = random_formula(&atoms, 2, &mut rng);
            let t = random_term(&ctx, &ty, 4, &mut rng).unwrap();
            prop_assert!(check_nj(&ctx, &t, &ty));
            let n = normalize(&t);
            prop_assert!(check_nj(&ctx, &n, &ty));
            prop_assert!(!has_detour(&n));
        }

        #[test]
        fn kripke_monotone(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms: Vec<Atom> = ["p", "q"].iter().map(|s| Atom::new(s).unwrap()).collect();
            let all: BTreeSet<Atom> = atoms.iter().cloned().collect();
            let m = random_model(&all, 5, &mut rng);
            let phi = random_formula(&atoms, 3, &mut rng);
            for v in 0..m.len() {
                for w in 0..m.len() {
                    if m.leq(v, w) && kripke_eval(&m, v, &phi) {
                        prop_assert!(kripke_eval(&m, w, &phi));
                    }
                }
            }
        }
    }
}
