//! Validity in atomic bases.
//!
//! Brute-force evaluation fixes a finite set of worlds, namely all bounded
//! extensions of a root base, and evaluates the clauses literally inside it:
//! every quantifier "for every C ⊇ B" ranges over the members of that set
//! that extend B. Results are therefore relative to the universe and bounds,
//! and every report says which ones were used.
//!
//! Clause (Inf) is read with the conclusion evaluated in the extension C.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::basecalc::{
    self, derives, enumerate_extensions, AtomSet, AtomicRule, Base, BaseError, Bounds, Compiled,
    DerivTerm, Premise, Universe,
};
use crate::nj::{self, Decision, NjError};
use crate::syntax::{atoms_of, render_formula, subformulas, Atom, Formula, FormulaSet, Sequent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticsMode {
    Sandqvist,
    #[serde(rename = "kripke")]
    KripkeDisjunction,
}

impl SemanticsMode {
    pub fn label(self) -> &'static str {
        match self {
            SemanticsMode::Sandqvist => "sandqvist",
            SemanticsMode::KripkeDisjunction => "kripke",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Engine {
    #[serde(rename = "brute")]
    BruteForce,
    #[serde(rename = "prover")]
    ProverBacked,
}

impl Engine {
    pub fn label(self) -> &'static str {
        match self {
            Engine::BruteForce => "brute",
            Engine::ProverBacked => "prover",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityConfig {
    pub universe: AtomSet,
    pub bounds: Bounds,
    pub mode: SemanticsMode,
    pub engine: Engine,
}

impl ValidityConfig {
    pub fn brute(universe: AtomSet, bounds: Bounds, mode: SemanticsMode) -> ValidityConfig {
        ValidityConfig {
            universe,
            bounds,
            mode,
            engine: Engine::BruteForce,
        }
    }

    pub fn prover() -> ValidityConfig {
        ValidityConfig {
            universe: AtomSet::new(),
            bounds: Bounds::new(0, 0, 0),
            mode: SemanticsMode::Sandqvist,
            engine: Engine::ProverBacked,
        }
    }

    fn validate(&self) -> Result<(), BesError> {
        if self.engine == Engine::ProverBacked && self.mode != SemanticsMode::Sandqvist {
            return Err(BesError::Config(
                "the prover-backed engine is only available in sandqvist mode".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BesError {
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error(transparent)]
    Nj(#[from] NjError),
    #[error("{0}")]
    Config(String),
    #[error("formula set is not closed under subformulas: `{0}` is missing")]
    NotSubformulaClosed(Formula),
    #[error("atom `{0}` is reserved for the flattening of this formula set")]
    ReservedAtom(Atom),
    #[error("base {0} is not among the enumerated worlds")]
    UnknownWorld(String),
}

/// Why a validity claim failed, tied to the extension where it fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// `clause` fails at `base`: for (At) and (⊥) the atom is not derivable;
    /// for (⊃) and (Inf) the antecedents hold at `base` but `formula` does not;
    /// for (∨) both `φ ⊃ atom` and `ψ ⊃ atom` hold at `base` but `atom` is not
    /// derivable there.
    Extension {
        clause: Clause,
        base: Base,
        atom: Option<Atom>,
        formula: Formula,
        antecedents: FormulaSet,
    },
    /// A Kripke countermodel, from the prover-backed engine.
    Countermodel { model: nj::KripkeModel, world: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    At,
    Impl,
    Disj,
    Bot,
    Inf,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::At => "At",
            Clause::Impl => "Impl",
            Clause::Disj => "Disj",
            Clause::Bot => "Bot",
            Clause::Inf => "Inf",
        })
    }
}

impl Witness {
    pub fn to_json(&self) -> Value {
        match self {
            Witness::Extension {
                clause,
                base,
                atom,
                formula,
                antecedents,
            } => json!({
                "clause": clause.to_string(),
                "extension": base.rules().iter().map(|r| basecalc::rule_value(r)).collect::<Vec<_>>(),
                "atom": atom.as_ref().map(|a| a.name().to_string()),
                "formula": render_formula(formula),
                "antecedents": antecedents.iter().map(render_formula).collect::<Vec<_>>(),
            }),
            Witness::Countermodel { model, world } => json!({
                "clause": "countermodel",
                "model": model.to_json(),
                "world": format!("w{world}"),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub verdict: bool,
    pub mode: SemanticsMode,
    pub engine: Engine,
    pub universe: AtomSet,
    pub bounds: Bounds,
    pub witness: Option<Witness>,
    pub extensions_examined: u64,
    pub notes: Vec<String>,
}

impl ValidityReport {
    pub fn to_json(&self) -> Value {
        json!({
            "verdict": self.verdict,
            "mode": self.mode.label(),
            "engine": self.engine.label(),
            "universe": self.universe.iter().map(Atom::name).collect::<Vec<_>>(),
            "bounds": {
                "max_premises": self.bounds.max_premises,
                "max_hyps": self.bounds.max_hyps,
                "max_extra_rules": self.bounds.max_extra_rules,
            },
            "witness": self.witness.as_ref().map(Witness::to_json),
            "extensions_examined": self.extensions_examined,
            "notes": self.notes,
        })
    }
}

fn standard_notes(engine: Engine) -> Vec<String> {
    match engine {
        Engine::BruteForce => vec![
            "extensions quantify over bounded extensions of the root base only".into(),
            "clause (Inf) evaluates its conclusion in the extension".into(),
        ],
        Engine::ProverBacked => {
            vec!["verdict is NJ derivability, which coincides with validity".into()]
        }
    }
}

/// All bounded extensions of a root base, with derivability of each atom
/// from the empty context and the extension order between them.
pub struct WorldSet {
    universe: Universe,
    bounds: Bounds,
    bases: Vec<Base>,
    index: HashMap<Base, usize>,
    atoms: Vec<u64>,
    supersets: Vec<Vec<u32>>,
}

impl WorldSet {
    pub fn new(root: &Base, universe: &AtomSet, bounds: &Bounds) -> Result<WorldSet, BesError> {
        let u = Universe::new(universe)?;
        let mut ext = enumerate_extensions(root, universe, bounds)?;
        let n_cand = ext.candidates().len();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut bases = Vec::new();
        while let Some(idx) = ext.next_indices() {
            members.push(idx.to_vec());
        }
        for m in &members {
            bases.push(ext.base_for(m));
        }
        let n = bases.len();
        let mut containing = vec![FixedBitSet::with_capacity(n); n_cand];
        for (w, m) in members.iter().enumerate() {
            for &c in m {
                containing[c].insert(w);
            }
        }
        let mut supersets = Vec::with_capacity(n);
        for m in &members {
            let mut acc = FixedBitSet::with_capacity(n);
            acc.insert_range(..);
            for &c in m {
                acc.intersect_with(&containing[c]);
            }
            supersets.push(acc.ones().map(|w| w as u32).collect());
        }
        let mut atoms = Vec::with_capacity(n);
        for b in &bases {
            let c = Compiled::new(b, &u)?;
            atoms.push(basecalc::saturate_from(&c, &u, &[0]).derivable_mask(0));
        }
        Ok(WorldSet {
            index: basecalc::base_index(&bases),
            universe: u,
            bounds: *bounds,
            bases,
            atoms,
            supersets,
        })
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn bases(&self) -> &[Base] {
        &self.bases
    }

    pub fn base(&self, w: usize) -> &Base {
        &self.bases[w]
    }

    pub fn world_of(&self, b: &Base) -> Option<usize> {
        self.index.get(b).copied()
    }

    pub fn universe(&self) -> AtomSet {
        self.universe.atoms().iter().cloned().collect()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Worlds extending `w`, including `w`.
    pub fn supersets(&self, w: usize) -> impl Iterator<Item = usize> + '_ {
        self.supersets[w].iter().map(|&v| v as usize)
    }

    /// Whether `p` is derivable from no hypotheses in world `w`.
    pub fn derives_atom(&self, w: usize, p: &Atom) -> bool {
        self.universe
            .index(p)
            .is_ok_and(|i| self.atoms[w] >> i & 1 == 1)
    }
}

/// Memoized clause evaluation over a [`WorldSet`].
pub struct Evaluator<'a> {
    worlds: &'a WorldSet,
    mode: SemanticsMode,
    ids: HashMap<Formula, usize>,
    formulas: Vec<Formula>,
    memo: Vec<Vec<u8>>,
    visited: FixedBitSet,
}

impl<'a> Evaluator<'a> {
    pub fn new(worlds: &'a WorldSet, mode: SemanticsMode) -> Evaluator<'a> {
        Evaluator {
            worlds,
            mode,
            ids: HashMap::new(),
            formulas: Vec::new(),
            memo: Vec::new(),
            visited: FixedBitSet::with_capacity(worlds.len()),
        }
    }

    pub fn worlds(&self) -> &WorldSet {
        self.worlds
    }

    /// Number of distinct worlds at which some formula was evaluated.
    pub fn worlds_visited(&self) -> u64 {
        self.visited.count_ones(..) as u64
    }

    fn intern(&mut self, f: &Formula) -> usize {
        if let Some(&i) = self.ids.get(f) {
            return i;
        }
        let i = self.formulas.len();
        self.ids.insert(f.clone(), i);
        self.formulas.push(f.clone());
        self.memo.push(vec![0; self.worlds.len()]);
        i
    }

    /// `⊩_w φ`.
    pub fn holds(&mut self, w: usize, phi: &Formula) -> bool {
        let id = self.intern(phi);
        self.eval(w, id)
    }

    fn eval(&mut self, w: usize, id: usize) -> bool {
        match self.memo[id][w] {
            1 => return false,
            2 => return true,
            _ => {}
        }
        self.visited.insert(w);
        let phi = self.formulas[id].clone();
        let r = match &phi {
            Formula::Atom(p) => self.worlds.derives_atom(w, p),
            Formula::Conj(a, b) => self.holds(w, a) && self.holds(w, b),
            Formula::Impl(a, b) => self.impl_counterexample(w, a, b).is_none(),
            Formula::Disj(a, b) => match self.mode {
                SemanticsMode::KripkeDisjunction => self.holds(w, a) || self.holds(w, b),
                SemanticsMode::Sandqvist => self.disj_counterexample(w, a, b).is_none(),
            },
            Formula::Bot => match self.mode {
                SemanticsMode::KripkeDisjunction => false,
                SemanticsMode::Sandqvist => self.bot_counterexample(w).is_none(),
            },
        };
        self.memo[id][w] = if r { 2 } else { 1 };
        r
    }

    fn impl_counterexample(&mut self, w: usize, a: &Formula, b: &Formula) -> Option<usize> {
        let ia = self.intern(a);
        let ib = self.intern(b);
        let sup: Vec<usize> = self.worlds.supersets(w).collect();
        sup.into_iter()
            .find(|&v| self.eval(v, ia) && !self.eval(v, ib))
    }

    fn disj_counterexample(&mut self, w: usize, a: &Formula, b: &Formula) -> Option<(usize, Atom)> {
        let sup: Vec<usize> = self.worlds.supersets(w).collect();
        for p in self.worlds.universe.atoms().to_vec() {
            let ap = Formula::imp(a.clone(), Formula::Atom(p.clone()));
            let bp = Formula::imp(b.clone(), Formula::Atom(p.clone()));
            let (ia, ib) = (self.intern(&ap), self.intern(&bp));
            for &v in &sup {
                if !self.worlds.derives_atom(v, &p) && self.eval(v, ia) && self.eval(v, ib) {
                    return Some((v, p));
                }
            }
        }
        None
    }

    fn bot_counterexample(&self, w: usize) -> Option<Atom> {
        self.worlds
            .universe
            .atoms()
            .iter()
            .find(|p| !self.worlds.derives_atom(w, p))
            .cloned()
    }

    /// A reason for `⊩_w φ` failing, descending through conjunctions.
    pub fn explain(&mut self, w: usize, phi: &Formula) -> Option<Witness> {
        if self.holds(w, phi) {
            return None;
        }
        let ext = |clause, v: usize, atom, formula: &Formula, ante: FormulaSet| Witness::Extension {
            clause,
            base: self.worlds.base(v).clone(),
            atom,
            formula: formula.clone(),
            antecedents: ante,
        };
        match phi {
            Formula::Atom(p) => Some(ext(Clause::At, w, Some(p.clone()), phi, FormulaSet::new())),
            Formula::Conj(a, b) => {
                if !self.holds(w, a) {
                    self.explain(w, a)
                } else {
                    self.explain(w, b)
                }
            }
            Formula::Impl(a, b) => {
                let v = self.impl_counterexample(w, a, b)?;
                Some(ext(Clause::Impl, v, None, b, FormulaSet::singleton((**a).clone())))
            }
            Formula::Disj(a, b) => match self.mode {
                SemanticsMode::Sandqvist => {
                    let (v, p) = self.disj_counterexample(w, a, b)?;
                    Some(ext(Clause::Disj, v, Some(p), phi, FormulaSet::new()))
                }
                SemanticsMode::KripkeDisjunction => {
                    Some(ext(Clause::Disj, w, None, phi, FormulaSet::new()))
                }
            },
            Formula::Bot => {
                let p = self.bot_counterexample(w);
                Some(ext(Clause::Bot, w, p, phi, FormulaSet::new()))
            }
        }
    }

    /// An extension of `w` validating all of `theta` but not `phi`.
    pub fn inf_counterexample(
        &mut self,
        w: usize,
        theta: &FormulaSet,
        phi: &Formula,
    ) -> Option<usize> {
        let sup: Vec<usize> = self.worlds.supersets(w).collect();
        sup.into_iter()
            .find(|&v| theta.iter().all(|t| self.holds(v, t)) && !self.holds(v, phi))
    }

    /// Re-evaluates a witness: true iff it really refutes its clause.
    pub fn recheck(&mut self, witness: &Witness) -> Result<bool, BesError> {
        let Witness::Extension {
            clause,
            base,
            atom,
            formula,
            antecedents,
        } = witness
        else {
            return Ok(false);
        };
        let v = self
            .worlds
            .world_of(base)
            .ok_or_else(|| BesError::UnknownWorld(base.to_string()))?;
        Ok(match clause {
            Clause::At | Clause::Bot => match atom {
                Some(p) => !self.worlds.derives_atom(v, p),
                None => false,
            },
            Clause::Impl | Clause::Inf => {
                antecedents.iter().all(|t| self.holds(v, t)) && !self.holds(v, formula)
            }
            Clause::Disj => match (formula, atom, self.mode) {
                (Formula::Disj(a, b), Some(p), SemanticsMode::Sandqvist) => {
                    let pf = Formula::Atom(p.clone());
                    self.holds(v, &Formula::imp((**a).clone(), pf.clone()))
                        && self.holds(v, &Formula::imp((**b).clone(), pf))
                        && !self.worlds.derives_atom(v, p)
                }
                (Formula::Disj(a, b), None, SemanticsMode::KripkeDisjunction) => {
                    !self.holds(v, a) && !self.holds(v, b)
                }
                _ => false,
            },
        })
    }
}

fn check_atoms(cfg: &ValidityConfig, fs: &[&Formula], base: &Base) -> Result<(), BesError> {
    for f in fs {
        for a in f.atoms() {
            if !cfg.universe.contains(&a) {
                return Err(BaseError::OutsideUniverse(a).into());
            }
        }
    }
    for a in base.atoms() {
        if !cfg.universe.contains(&a) {
            return Err(BaseError::OutsideUniverse(a).into());
        }
    }
    Ok(())
}

fn brute_only(cfg: &ValidityConfig) -> Result<(), BesError> {
    cfg.validate()?;
    if cfg.engine != Engine::BruteForce {
        return Err(BesError::Config(
            "validity in a particular base needs the brute-force engine".into(),
        ));
    }
    Ok(())
}

fn report(cfg: &ValidityConfig, verdict: bool, witness: Option<Witness>, examined: u64) -> ValidityReport {
    ValidityReport {
        verdict,
        mode: cfg.mode,
        engine: cfg.engine,
        universe: cfg.universe.clone(),
        bounds: cfg.bounds,
        witness,
        extensions_examined: examined,
        notes: standard_notes(cfg.engine),
    }
}

/// `⊩_B φ`.
pub fn valid_in_base(b: &Base, phi: &Formula, cfg: &ValidityConfig) -> Result<ValidityReport, BesError> {
    brute_only(cfg)?;
    check_atoms(cfg, &[phi], b)?;
    let ws = WorldSet::new(b, &cfg.universe, &cfg.bounds)?;
    let mut ev = Evaluator::new(&ws, cfg.mode);
    let root = ws.world_of(b).expect("root is a world");
    let verdict = ev.holds(root, phi);
    let witness = if verdict { None } else { ev.explain(root, phi) };
    Ok(report(cfg, verdict, witness, ev.worlds_visited()))
}

/// `Θ ⊩_B φ`.
pub fn entails_in_base(
    b: &Base,
    theta: &FormulaSet,
    phi: &Formula,
    cfg: &ValidityConfig,
) -> Result<ValidityReport, BesError> {
    if theta.is_empty() {
        return valid_in_base(b, phi, cfg);
    }
    brute_only(cfg)?;
    let mut all: Vec<&Formula> = theta.iter().collect();
    all.push(phi);
    check_atoms(cfg, &all, b)?;
    let ws = WorldSet::new(b, &cfg.universe, &cfg.bounds)?;
    let mut ev = Evaluator::new(&ws, cfg.mode);
    let root = ws.world_of(b).expect("root is a world");
    let bad = ev.inf_counterexample(root, theta, phi);
    let witness = bad.map(|v| Witness::Extension {
        clause: Clause::Inf,
        base: ws.base(v).clone(),
        atom: None,
        formula: phi.clone(),
        antecedents: theta.clone(),
    });
    Ok(report(cfg, bad.is_none(), witness, ev.worlds_visited()))
}

/// `Γ ⊩ φ`: brute force over every base within bounds, or NJ derivability.
pub fn valid(gamma: &FormulaSet, phi: &Formula, cfg: &ValidityConfig) -> Result<ValidityReport, BesError> {
    cfg.validate()?;
    match cfg.engine {
        Engine::ProverBacked => {
            let d = nj::decide(gamma, phi)?;
            let witness = match d {
                Decision::Derivable(_) => None,
                Decision::Underivable { model, world } => Some(Witness::Countermodel { model, world }),
            };
            Ok(report(cfg, witness.is_none(), witness, 0))
        }
        Engine::BruteForce => {
            let mut all: Vec<&Formula> = gamma.iter().collect();
            all.push(phi);
            check_atoms(cfg, &all, &Base::empty())?;
            let ws = WorldSet::new(&Base::empty(), &cfg.universe, &cfg.bounds)?;
            let mut ev = Evaluator::new(&ws, cfg.mode);
            let bad = ev.inf_counterexample(0, gamma, phi);
            let witness = bad.map(|v| Witness::Extension {
                clause: Clause::Inf,
                base: ws.base(v).clone(),
                atom: None,
                formula: phi.clone(),
                antecedents: gamma.clone(),
            });
            Ok(report(cfg, bad.is_none(), witness, ev.worlds_visited()))
        }
    }
}

/// The flattening of a subformula-closed set: each non-atomic member gets a
/// fresh atom, atoms stand for themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatMap {
    flat: BTreeMap<Formula, Atom>,
    nat: BTreeMap<Atom, Formula>,
    domain: FormulaSet,
}

impl FlatMap {
    pub fn flat(&self, f: &Formula) -> Option<&Atom> {
        self.flat.get(f)
    }

    pub fn nat(&self, a: &Atom) -> Formula {
        self.nat
            .get(a)
            .cloned()
            .unwrap_or_else(|| Formula::Atom(a.clone()))
    }

    pub fn domain(&self) -> &FormulaSet {
        &self.domain
    }

    /// The fresh atoms introduced for non-atomic members.
    pub fn fresh_atoms(&self) -> AtomSet {
        self.domain
            .iter()
            .filter(|f| !f.is_atomic())
            .map(|f| self.flat[f].clone())
            .collect()
    }

    /// All atoms of the flattened set.
    pub fn atoms(&self) -> AtomSet {
        self.flat.values().cloned().collect()
    }

    pub fn flat_set(&self, fs: &FormulaSet) -> Option<AtomSet> {
        fs.iter().map(|f| self.flat(f).cloned()).collect()
    }

    /// Rejects bases that use any of the fresh atoms.
    pub fn check_base(&self, b: &Base) -> Result<(), BesError> {
        let fresh = self.fresh_atoms();
        match b.atoms().into_iter().find(|a| fresh.contains(a)) {
            Some(a) => Err(BesError::ReservedAtom(a)),
            None => Ok(()),
        }
    }
}

pub fn flatten(delta: &FormulaSet) -> Result<FlatMap, BesError> {
    let closure = subformulas(delta);
    if let Some(missing) = closure.iter().find(|f| !delta.contains(f)) {
        return Err(BesError::NotSubformulaClosed(missing.clone()));
    }
    let taken: BTreeSet<String> = atoms_of(delta).iter().map(|a| a.name().to_string()).collect();
    let mut next = 1usize;
    let mut flat = BTreeMap::new();
    let mut nat = BTreeMap::new();
    for f in delta {
        let a = match f {
            Formula::Atom(a) => a.clone(),
            _ => {
                while taken.contains(&format!("f{next}")) {
                    next += 1;
                }
                let a = Atom::new(&format!("f{next}")).expect("fresh name is an atom");
                next += 1;
                nat.insert(a.clone(), f.clone());
                a
            }
        };
        flat.insert(f.clone(), a);
    }
    Ok(FlatMap {
        flat,
        nat,
        domain: delta.clone(),
    })
}

/// The base mirroring NJ on flattened atoms.
pub fn build_n(fm: &FlatMap) -> Base {
    let atoms = fm.atoms();
    let fl = |f: &Formula| fm.flat(f).expect("member of the domain").clone();
    let ax = |a: &Atom| Premise::new([], a.clone());
    let mut rules = Vec::new();
    for delta in fm.domain() {
        let d = fl(delta);
        match delta {
            Formula::Atom(_) => {}
            Formula::Impl(a, b) => {
                let (a, b) = (fl(a), fl(b));
                rules.push(AtomicRule::new([Premise::new([a.clone()], b.clone())], d.clone()));
                rules.push(AtomicRule::new([ax(&d), ax(&a)], b));
            }
            Formula::Conj(a, b) => {
                let (a, b) = (fl(a), fl(b));
                rules.push(AtomicRule::new([ax(&a), ax(&b)], d.clone()));
                rules.push(AtomicRule::new([ax(&d)], a));
                rules.push(AtomicRule::new([ax(&d)], b));
            }
            Formula::Disj(a, b) => {
                let (a, b) = (fl(a), fl(b));
                rules.push(AtomicRule::new([ax(&a)], d.clone()));
                rules.push(AtomicRule::new([ax(&b)], d.clone()));
                for p in &atoms {
                    rules.push(AtomicRule::new(
                        [
                            ax(&d),
                            Premise::new([a.clone()], p.clone()),
                            Premise::new([b.clone()], p.clone()),
                        ],
                        p.clone(),
                    ));
                }
            }
            Formula::Bot => {
                for p in &atoms {
                    rules.push(AtomicRule::new([ax(&d)], p.clone()));
                }
            }
        }
    }
    Base::new(rules).named("N")
}

#[derive(Debug, Clone)]
pub struct CompletenessReport {
    pub sequent: Sequent,
    pub flat: FlatMap,
    pub n: Base,
    pub flat_hyps: AtomSet,
    pub flat_goal: Atom,
    pub base_derivation: Option<DerivTerm>,
    pub decision: Decision,
}

impl CompletenessReport {
    pub fn base_side(&self) -> bool {
        self.base_derivation.is_some()
    }

    pub fn prover_side(&self) -> bool {
        self.decision.is_derivable()
    }

    pub fn agree(&self) -> bool {
        self.base_side() == self.prover_side()
    }

    pub fn to_json(&self) -> Value {
        let flattening: serde_json::Map<String, Value> = self
            .flat
            .domain()
            .iter()
            .filter(|f| !f.is_atomic())
            .map(|f| (self.flat.flat(f).unwrap().name().to_string(), json!(render_formula(f))))
            .collect();
        json!({
            "sequent": self.sequent.to_string(),
            "flattening": flattening,
            "n_rules": self.n.len(),
            "flat_hyps": self.flat_hyps.iter().map(Atom::name).collect::<Vec<_>>(),
            "flat_goal": self.flat_goal.name(),
            "base_derivable": self.base_side(),
            "base_derivation": self.base_derivation.as_ref().map(|t| t.to_string()),
            "nj_derivable": self.prover_side(),
            "nj_term": match &self.decision {
                Decision::Derivable(t) => Some(t.to_string()),
                _ => None,
            },
            "agreement": self.agree(),
        })
    }
}

/// Flattens `Γ ∪ {φ}`, builds N, and compares derivability of the flattened
/// sequent in N with the NJ verdict.
pub fn completeness_check(gamma: &FormulaSet, phi: &Formula) -> Result<CompletenessReport, BesError> {
    let mut all = gamma.clone();
    all.insert(phi.clone());
    let delta = subformulas(&all);
    let fm = flatten(&delta)?;
    let n = build_n(&fm);
    let flat_hyps = fm.flat_set(gamma).expect("hypotheses are in the domain");
    let flat_goal = fm.flat(phi).expect("goal is in the domain").clone();
    let base_derivation = derives(&n, &flat_hyps, &flat_goal, &fm.atoms())?;
    let decision = nj::decide(gamma, phi)?;
    Ok(CompletenessReport {
        sequent: Sequent {
            hyps: gamma.clone(),
            goal: phi.clone(),
        },
        flat: fm,
        n,
        flat_hyps,
        flat_goal,
        base_derivation,
        decision,
    })
}

/// `Γ ⊢~ φ` for the consequence relation generated from a validity: if every
/// member of Γ is valid then so is φ.
pub fn consequence_from_validity<F>(mut validity: F, gamma: &FormulaSet, phi: &Formula) -> bool
where
    F: FnMut(&FormulaSet, &Formula) -> bool,
{
    let empty = FormulaSet::new();
    !gamma.iter().all(|g| validity(&empty, g)) || validity(&empty, phi)
}

/// A consequence relation on the finite set of formulas `universe`, stored
/// as the set of consequences of each antecedent subset (bitmasks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteRelation {
    universe: Vec<Formula>,
    rel: Vec<u32>,
}

pub const RELATION_MAX_FORMULAS: usize = 12;

impl FiniteRelation {
    pub fn empty(universe: Vec<Formula>) -> FiniteRelation {
        assert!(universe.len() <= RELATION_MAX_FORMULAS);
        let n = universe.len();
        FiniteRelation {
            universe,
            rel: vec![0; 1 << n],
        }
    }

    /// The relation generated from a validity predicate on single formulas.
    pub fn from_validity<F: FnMut(&Formula) -> bool>(universe: Vec<Formula>, mut valid: F) -> FiniteRelation {
        let valid_mask: u32 = universe
            .iter()
            .enumerate()
            .filter(|(_, f)| valid(f))
            .fold(0, |m, (i, _)| m | 1 << i);
        let mut r = FiniteRelation::empty(universe);
        let all = r.full();
        for ante in 0..r.rel.len() as u32 {
            r.rel[ante as usize] = if ante & !valid_mask == 0 { valid_mask } else { all };
        }
        r
    }

    pub fn universe(&self) -> &[Formula] {
        &self.universe
    }

    fn full(&self) -> u32 {
        ((1u64 << self.universe.len()) - 1) as u32
    }

    pub fn holds(&self, ante: u32, concl: usize) -> bool {
        self.rel[ante as usize] >> concl & 1 == 1
    }

    pub fn insert(&mut self, ante: u32, concl: usize) {
        self.rel[ante as usize] |= 1 << concl;
    }

    pub fn antecedents(&self) -> impl Iterator<Item = u32> {
        0..self.rel.len() as u32
    }

    /// Closes under reflexivity, monotonicity and cut.
    pub fn close(&mut self) {
        loop {
            let before = self.rel.clone();
            for a in self.antecedents() {
                self.rel[a as usize] |= a;
            }
            for a in self.antecedents() {
                for i in 0..self.universe.len() {
                    if a >> i & 1 == 0 {
                        let bigger = (a | 1 << i) as usize;
                        self.rel[bigger] |= self.rel[a as usize];
                    }
                }
            }
            for a in self.antecedents() {
                let cons = self.rel[a as usize];
                let extended = self.rel[(a | cons) as usize];
                self.rel[a as usize] |= extended;
            }
            if self.rel == before {
                break;
            }
        }
    }

    pub fn is_reflexive(&self) -> bool {
        self.antecedents().all(|a| self.rel[a as usize] & a == a)
    }

    pub fn is_monotone(&self) -> bool {
        self.antecedents().all(|a| {
            (0..self.universe.len()).all(|i| {
                let b = (a | 1 << i) as usize;
                self.rel[b] & self.rel[a as usize] == self.rel[a as usize]
            })
        })
    }

    /// Γ ⊢~ φ and Γ, φ ⊢~ ψ imply Γ ⊢~ ψ.
    pub fn has_cut(&self) -> bool {
        self.antecedents().all(|a| {
            (0..self.universe.len()).all(|i| {
                !self.holds(a, i) || {
                    let ext = self.rel[(a | 1 << i) as usize];
                    ext & self.rel[a as usize] == ext
                }
            })
        })
    }

    pub fn is_subset(&self, other: &FiniteRelation) -> bool {
        self.rel
            .iter()
            .zip(&other.rel)
            .all(|(a, b)| a & b == *a)
    }

    /// Agreement on judgments with empty antecedent.
    pub fn theorems(&self) -> u32 {
        self.rel[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basecalc::{atom_set, rule};
    use crate::syntax::parse_formula;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn fs(v: &[&str]) -> FormulaSet {
        v.iter().map(|s| f(s)).collect()
    }

    fn cfg(u: &[&str], b: Bounds, mode: SemanticsMode) -> ValidityConfig {
        ValidityConfig::brute(atom_set(u), b, mode)
    }

    #[test]
    fn atomic_and_disjunction_examples() {
        let b = Base::new([rule(&[], "p")]);
        let c = cfg(&["p", "q"], Bounds::new(2, 1, 2), SemanticsMode::Sandqvist);
        assert!(valid_in_base(&b, &f("p"), &c).unwrap().verdict);
        assert!(valid_in_base(&b, &f("p | q"), &c).unwrap().verdict);
        let r = valid_in_base(&Base::empty(), &f("p | q"), &c).unwrap();
        assert!(!r.verdict);
        for mode in [SemanticsMode::Sandqvist, SemanticsMode::KripkeDisjunction] {
            let c = cfg(&["p", "q"], Bounds::new(2, 1, 2), mode);
            let r = valid_in_base(&Base::empty(), &Formula::Bot, &c).unwrap();
            assert!(!r.verdict);
        }
    }

    #[test]
    fn entailment_examples() {
        let c = cfg(&["p", "q"], Bounds::new(2, 1, 2), SemanticsMode::Sandqvist);
        let e = Base::empty();
        assert!(entails_in_base(&e, &fs(&["p"]), &f("p"), &c).unwrap().verdict);
        assert!(entails_in_base(&e, &fs(&["p & q"]), &f("q"), &c).unwrap().verdict);
        let r = entails_in_base(&e, &fs(&["p"]), &f("q"), &c).unwrap();
        assert!(!r.verdict);
        let Some(Witness::Extension { base, .. }) = &r.witness else { panic!() };
        let ws = WorldSet::new(&e, &c.universe, &c.bounds).unwrap();
        let mut ev = Evaluator::new(&ws, c.mode);
        assert!(ev.recheck(r.witness.as_ref().unwrap()).unwrap());
        assert_eq!(*base, Base::new([rule(&[], "p")]));
    }

    #[test]
    fn validity_examples() {
        let c = cfg(&["p"], Bounds::new(1, 1, 2), SemanticsMode::Sandqvist);
        assert!(valid(&FormulaSet::new(), &f("p -> p"), &c).unwrap().verdict);
        assert!(valid(&FormulaSet::new(), &f("p -> p"), &ValidityConfig::prover()).unwrap().verdict);
        let peirce = f("((p -> q) -> p) -> p");
        let r = valid(&FormulaSet::new(), &peirce, &ValidityConfig::prover()).unwrap();
        assert!(!r.verdict);
        assert!(matches!(r.witness, Some(Witness::Countermodel { .. })));
    }

    #[test]
    fn prover_requires_sandqvist() {
        let mut c = ValidityConfig::prover();
        c.mode = SemanticsMode::KripkeDisjunction;
        assert!(matches!(valid(&FormulaSet::new(), &f("p"), &c), Err(BesError::Config(_))));
    }

    #[test]
    fn conjunction_clause_coherence() {
        let u = ["p", "q"];
        let c = cfg(&u, Bounds::new(1, 1, 2), SemanticsMode::Sandqvist);
        let ws = WorldSet::new(&Base::empty(), &c.universe, &c.bounds).unwrap();
        let mut ev = Evaluator::new(&ws, c.mode);
        let pairs = [("p", "q -> p"), ("p | q", "bot"), ("p -> q", "q | p")];
        for w in 0..ws.len() {
            for (a, b) in pairs {
                let (a, b) = (f(a), f(b));
                let both = ev.holds(w, &Formula::conj(a.clone(), b.clone()));
                assert_eq!(both, ev.holds(w, &a) && ev.holds(w, &b));
            }
        }
    }

    #[test]
    fn witnesses_recheck() {
        let c = cfg(&["p", "q"], Bounds::new(1, 1, 2), SemanticsMode::Sandqvist);
        let ws = WorldSet::new(&Base::empty(), &c.universe, &c.bounds).unwrap();
        let mut ev = Evaluator::new(&ws, c.mode);
        for s in ["p", "p | q", "bot", "p -> q", "(p -> q) & p", "q | (q -> bot)"] {
            let phi = f(s);
            for w in 0..ws.len() {
                if let Some(wit) = ev.explain(w, &phi) {
                    assert!(ev.recheck(&wit).unwrap(), "{s} at {}", ws.base(w));
                }
            }
        }
    }

    #[test]
    fn flatten_examples() {
        let fm = flatten(&fs(&["p"])).unwrap();
        assert_eq!(fm.flat(&f("p")), Some(&Atom::new("p").unwrap()));
        let fm = flatten(&fs(&["p & q", "p", "q"])).unwrap();
        let f1 = Atom::new("f1").unwrap();
        assert_eq!(fm.flat(&f("p & q")), Some(&f1));
        assert_eq!(fm.nat(&f1), f("p & q"));
        assert_eq!(fm.nat(&Atom::new("p").unwrap()), f("p"));
        let fm = flatten(&fs(&["(p & q) | p", "p & q", "p", "q"])).unwrap();
        assert_eq!(fm.fresh_atoms().len(), 2);
        assert!(matches!(flatten(&fs(&["p & q"])), Err(BesError::NotSubformulaClosed(_))));
        let fm = flatten(&fs(&["f1 & p", "f1", "p"])).unwrap();
        assert_eq!(fm.flat(&f("f1 & p")), Some(&Atom::new("f2").unwrap()));
        assert!(matches!(
            fm.check_base(&Base::new([rule(&[], "f2")])),
            Err(BesError::ReservedAtom(_))
        ));
    }

    #[test]
    fn n_for_conjunction_and_implication() {
        let fm = flatten(&fs(&["p & q", "p", "q"])).unwrap();
        let n = build_n(&fm);
        let expected = Base::new([
            rule(&[(&[], "p"), (&[], "q")], "f1"),
            rule(&[(&[], "f1")], "p"),
            rule(&[(&[], "f1")], "q"),
        ]);
        assert_eq!(n, expected);
        let fm = flatten(&fs(&["p -> q", "p", "q"])).unwrap();
        let n = build_n(&fm);
        let expected = Base::new([
            rule(&[(&["p"], "q")], "f1"),
            rule(&[(&[], "f1"), (&[], "p")], "q"),
        ]);
        assert_eq!(n, expected);
        let fm = flatten(&fs(&["bot"])).unwrap();
        let n = build_n(&fm);
        assert_eq!(n, Base::new([rule(&[(&[], "f1")], "f1")]));
    }

    #[test]
    fn completeness_examples() {
        let r = completeness_check(&fs(&["p & q"]), &f("q")).unwrap();
        assert!(r.base_side() && r.prover_side());
        let t = r.base_derivation.as_ref().unwrap();
        let DerivTerm::App { rule: used, args } = t else { panic!() };
        assert_eq!(used.premises()[0].concl.name(), "f1");
        assert_eq!(args[0], DerivTerm::Var(0));
        let r = completeness_check(&FormulaSet::new(), &f("((p -> q) -> p) -> p")).unwrap();
        assert!(!r.base_side() && !r.prover_side());
        let r = completeness_check(&fs(&["p"]), &f("p")).unwrap();
        assert!(r.agree() && r.base_side());
    }

    #[test]
    fn consequence_examples() {
        let thm = |g: &FormulaSet, p: &Formula| nj::decide(g, p).unwrap().is_derivable();
        assert!(consequence_from_validity(thm, &fs(&["p"]), &f("q")));
        assert!(consequence_from_validity(thm, &FormulaSet::new(), &f("p -> p")));
        assert!(!consequence_from_validity(thm, &fs(&["p -> p"]), &f("p")));
    }

    #[test]
    fn generated_relation_axioms() {
        let universe: Vec<Formula> = ["p", "p -> p", "q", "p & q", "p | q", "bot"]
            .iter()
            .map(|s| f(s))
            .collect();
        let r = FiniteRelation::from_validity(universe, |phi| {
            nj::decide(&FormulaSet::new(), phi).unwrap().is_derivable()
        });
        assert!(r.is_reflexive() && r.is_monotone() && r.has_cut());
        let mut closed = r.clone();
        closed.close();
        assert_eq!(closed, r);
    }
}
