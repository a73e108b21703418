//! Validity read on finite posets: upsets form a Heyting algebra, the atom
//! interpretation determines a nucleus K, and its closed upsets carry
//! Sandqvist's disjunction as their join.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::basecalc::{self, enumerate_extensions, AtomSet, Base, BaseError, Bounds, Compiled, Universe};
use crate::schema::{self, SchemaError};
use crate::syntax::{Atom, Formula};

/// Largest poset whose upsets are enumerated.
pub const MAX_ENUMERATED_ELEMENTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocaleError {
    #[error("upsets from different posets")]
    MixedPosets,
    #[error("order is not antisymmetric: {0} and {1}")]
    NotAntisymmetric(String, String),
    #[error("set is not upward closed: contains {0} but not {1}")]
    NotUpset(String, String),
    #[error("no interpretation for atom `{0}`")]
    MissingAtom(Atom),
    #[error("the nucleus needs at least one atom")]
    NoAtoms,
    #[error("poset has {size} elements; enumerating upsets is capped at {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// A finite partial order; `up[i]` holds every `j` with `i <= j`.
#[derive(Debug, Clone)]
pub struct Poset {
    id: u64,
    names: Vec<String>,
    up: Vec<FixedBitSet>,
}

impl PartialEq for Poset {
    fn eq(&self, other: &Poset) -> bool {
        self.names == other.names && self.up == other.up
    }
}

impl Poset {
    /// Builds the reflexive transitive closure of `pairs` and checks
    /// antisymmetry.
    pub fn new(names: Vec<String>, pairs: &[(usize, usize)]) -> Result<Poset, LocaleError> {
        let n = names.len();
        let mut up = vec![FixedBitSet::with_capacity(n); n];
        for (i, u) in up.iter_mut().enumerate() {
            u.insert(i);
        }
        for &(a, b) in pairs {
            up[a].insert(b);
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                let mut acc = up[i].clone();
                for j in up[i].ones() {
                    acc.union_with(&up[j]);
                }
                if acc != up[i] {
                    up[i] = acc;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for i in 0..n {
            for j in up[i].ones() {
                if j != i && up[j].contains(i) {
                    return Err(LocaleError::NotAntisymmetric(names[i].clone(), names[j].clone()));
                }
            }
        }
        Ok(Poset {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            names,
            up,
        })
    }

    /// A chain `w0 < w1 < ... < w(n-1)`.
    pub fn chain(n: usize) -> Poset {
        let pairs: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Poset::new(default_names(n), &pairs).expect("chains are posets")
    }

    /// A random order on `n` elements, compatible with index order.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Poset {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.35) {
                    pairs.push((i, j));
                }
            }
        }
        Poset::new(default_names(n), &pairs).expect("index-compatible orders are antisymmetric")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.up[a].contains(b)
    }

    fn wrap(&self, bits: FixedBitSet) -> Upset {
        Upset { poset: self.id, bits }
    }

    /// Checks upward closure of `members`.
    pub fn upset(&self, members: impl IntoIterator<Item = usize>) -> Result<Upset, LocaleError> {
        let mut bits = FixedBitSet::with_capacity(self.len());
        bits.extend(members);
        for i in bits.ones() {
            if let Some(j) = self.up[i].difference(&bits).next() {
                return Err(LocaleError::NotUpset(self.names[i].clone(), self.names[j].clone()));
            }
        }
        Ok(self.wrap(bits))
    }

    /// The upset generated by `members`.
    pub fn up_closure(&self, members: impl IntoIterator<Item = usize>) -> Upset {
        let mut bits = FixedBitSet::with_capacity(self.len());
        for i in members {
            bits.union_with(&self.up[i]);
        }
        self.wrap(bits)
    }

    pub fn top(&self) -> Upset {
        let mut bits = FixedBitSet::with_capacity(self.len());
        bits.insert_range(..);
        self.wrap(bits)
    }

    pub fn bottom(&self) -> Upset {
        self.wrap(FixedBitSet::with_capacity(self.len()))
    }

    fn same(&self, us: &[&Upset]) -> Result<(), LocaleError> {
        if us.iter().all(|u| u.poset == self.id) {
            Ok(())
        } else {
            Err(LocaleError::MixedPosets)
        }
    }

    pub fn meet(&self, a: &Upset, b: &Upset) -> Result<Upset, LocaleError> {
        self.same(&[a, b])?;
        let mut bits = a.bits.clone();
        bits.intersect_with(&b.bits);
        Ok(self.wrap(bits))
    }

    pub fn join(&self, a: &Upset, b: &Upset) -> Result<Upset, LocaleError> {
        self.same(&[a, b])?;
        let mut bits = a.bits.clone();
        bits.union_with(&b.bits);
        Ok(self.wrap(bits))
    }

    /// `{w | every w' >= w in a is in b}`.
    pub fn implies(&self, a: &Upset, b: &Upset) -> Result<Upset, LocaleError> {
        self.same(&[a, b])?;
        let mut bits = FixedBitSet::with_capacity(self.len());
        for w in 0..self.len() {
            let mut above = self.up[w].clone();
            above.intersect_with(&a.bits);
            if above.is_subset(&b.bits) {
                bits.insert(w);
            }
        }
        Ok(self.wrap(bits))
    }

    /// Every upset, in increasing order of the membership bitmask.
    pub fn all_upsets(&self) -> Result<Vec<Upset>, LocaleError> {
        let n = self.len();
        if n > MAX_ENUMERATED_ELEMENTS {
            return Err(LocaleError::TooLarge {
                size: n,
                cap: MAX_ENUMERATED_ELEMENTS,
            });
        }
        let up: Vec<u32> = self
            .up
            .iter()
            .map(|u| u.ones().fold(0u32, |m, j| m | 1 << j))
            .collect();
        let mut out = Vec::new();
        for mask in 0u32..1 << n {
            if (0..n).all(|i| mask >> i & 1 == 0 || up[i] & !mask == 0) {
                let mut bits = FixedBitSet::with_capacity(n);
                bits.extend((0..n).filter(|i| mask >> i & 1 == 1));
                out.push(self.wrap(bits));
            }
        }
        Ok(out)
    }

    /// Parses `{"elements": [...], "leq": [[a, b], ...], "atoms": {...}}`.
    pub fn parse_file(text: &str) -> Result<(Poset, AtomInterp), LocaleError> {
        let v = schema::parse_json(text)?;
        Poset::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<(Poset, AtomInterp), LocaleError> {
        let obj = schema::object(v, "")?;
        let elems = schema::array(schema::field(obj, "elements", "")?, "/elements")?;
        let mut names = Vec::new();
        let mut index = BTreeMap::new();
        for (i, e) in elems.iter().enumerate() {
            let at = schema::child("/elements", i);
            let name = schema::string(e, &at)?;
            if index.insert(name.to_string(), i).is_some() {
                return Err(SchemaError::new(at, format!("duplicate element `{name}`")).into());
            }
            names.push(name.to_string());
        }
        let lookup = |x: &Value, at: &str| -> Result<usize, SchemaError> {
            let s = schema::string(x, at)?;
            index
                .get(s)
                .copied()
                .ok_or_else(|| SchemaError::new(at, format!("unknown element `{s}`")))
        };
        let mut pairs = Vec::new();
        if let Some(leq) = obj.get("leq") {
            for (i, pair) in schema::array(leq, "/leq")?.iter().enumerate() {
                let at = schema::child("/leq", i);
                let pa = schema::array(pair, &at)?;
                if pa.len() != 2 {
                    return Err(SchemaError::new(at, "expected a pair").into());
                }
                pairs.push((lookup(&pa[0], &schema::child(&at, 0))?, lookup(&pa[1], &schema::child(&at, 1))?));
            }
        }
        let poset = Poset::new(names, &pairs)
            .map_err(|e| SchemaError::new("/leq", e.to_string()))?;
        let mut map = BTreeMap::new();
        if let Some(atoms) = obj.get("atoms") {
            for (name, ws) in schema::object(atoms, "/atoms")? {
                let at = schema::child("/atoms", name);
                let atom = Atom::new(name).map_err(|e| SchemaError::new(&at, e.to_string()))?;
                let mut members = Vec::new();
                for (i, w) in schema::array(ws, &at)?.iter().enumerate() {
                    members.push(lookup(w, &schema::child(&at, i))?);
                }
                let u = poset
                    .upset(members)
                    .map_err(|e| SchemaError::new(&at, e.to_string()))?;
                map.insert(atom, u);
            }
        }
        let interp = AtomInterp::new(&poset, map)?;
        Ok((poset, interp))
    }

    pub fn to_json(&self, interp: &AtomInterp) -> Value {
        let mut leq = Vec::new();
        for i in 0..self.len() {
            for j in self.up[i].ones() {
                if i != j {
                    leq.push(json!([self.names[i], self.names[j]]));
                }
            }
        }
        let atoms: serde_json::Map<String, Value> = interp
            .map
            .iter()
            .map(|(a, u)| (a.name().to_string(), json!(self.render(u))))
            .collect();
        json!({"elements": self.names, "leq": leq, "atoms": atoms})
    }

    /// Member names of an upset.
    pub fn render(&self, u: &Upset) -> Vec<String> {
        u.bits.ones().map(|i| self.names[i].clone()).collect()
    }
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// An upward-closed subset of a particular poset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Upset {
    poset: u64,
    bits: FixedBitSet,
}

impl Upset {
    pub fn contains(&self, w: usize) -> bool {
        self.bits.contains(w)
    }

    pub fn members(&self) -> Vec<usize> {
        self.bits.ones().collect()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn is_subset(&self, other: &Upset) -> bool {
        self.bits.is_subset(&other.bits)
    }
}

/// The validity upset of each atom.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomInterp {
    poset: u64,
    map: BTreeMap<Atom, Upset>,
}

impl AtomInterp {
    pub fn new(poset: &Poset, map: BTreeMap<Atom, Upset>) -> Result<AtomInterp, LocaleError> {
        if map.values().any(|u| u.poset != poset.id) {
            return Err(LocaleError::MixedPosets);
        }
        Ok(AtomInterp { poset: poset.id, map })
    }

    /// Each atom gets a random upset generated by a few elements.
    pub fn random<R: Rng + ?Sized>(poset: &Poset, atoms: &[Atom], rng: &mut R) -> AtomInterp {
        let map = atoms
            .iter()
            .map(|a| {
                let gens: Vec<usize> = (0..poset.len()).filter(|_| rng.gen_bool(0.3)).collect();
                (a.clone(), poset.up_closure(gens))
            })
            .collect();
        AtomInterp { poset: poset.id, map }
    }

    pub fn get(&self, a: &Atom) -> Result<&Upset, LocaleError> {
        self.map.get(a).ok_or_else(|| LocaleError::MissingAtom(a.clone()))
    }

    pub fn atoms(&self) -> AtomSet {
        self.map.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, &Upset)> {
        self.map.iter()
    }
}

/// `K U = ⋂_p ((U → v p) → v p)` for the atoms of an interpretation.
#[derive(Debug, Clone)]
pub struct NucleusOp<'a> {
    poset: &'a Poset,
    interp: &'a AtomInterp,
}

impl<'a> NucleusOp<'a> {
    pub fn new(poset: &'a Poset, interp: &'a AtomInterp) -> Result<NucleusOp<'a>, LocaleError> {
        if interp.poset != poset.id {
            return Err(LocaleError::MixedPosets);
        }
        if interp.map.is_empty() {
            return Err(LocaleError::NoAtoms);
        }
        Ok(NucleusOp { poset, interp })
    }

    pub fn poset(&self) -> &Poset {
        self.poset
    }

    pub fn interp(&self) -> &AtomInterp {
        self.interp
    }

    pub fn apply(&self, u: &Upset) -> Result<Upset, LocaleError> {
        let ps = self.poset;
        let mut acc = ps.top();
        for vp in self.interp.map.values() {
            let inner = ps.implies(u, vp)?;
            acc = ps.meet(&acc, &ps.implies(&inner, vp)?)?;
        }
        Ok(acc)
    }

    pub fn is_closed(&self, u: &Upset) -> Result<bool, LocaleError> {
        Ok(self.apply(u)? == *u)
    }

    /// `⋂_p ((U → v p) → ((V → v p) → v p))`.
    pub fn join_k(&self, u: &Upset, v: &Upset) -> Result<Upset, LocaleError> {
        let ps = self.poset;
        let mut acc = ps.top();
        for vp in self.interp.map.values() {
            let left = ps.implies(u, vp)?;
            let right = ps.implies(&ps.implies(v, vp)?, vp)?;
            acc = ps.meet(&acc, &ps.implies(&left, &right)?)?;
        }
        Ok(acc)
    }

    /// The validity upset of a formula.
    pub fn vsem(&self, phi: &Formula) -> Result<Upset, LocaleError> {
        let ps = self.poset;
        match phi {
            Formula::Atom(a) => self.interp.get(a).cloned(),
            Formula::Conj(a, b) => ps.meet(&self.vsem(a)?, &self.vsem(b)?),
            Formula::Impl(a, b) => ps.implies(&self.vsem(a)?, &self.vsem(b)?),
            Formula::Disj(a, b) => self.join_k(&self.vsem(a)?, &self.vsem(b)?),
            Formula::Bot => self.apply(&ps.bottom()),
        }
    }

    /// The closed upsets, i.e. the elements of Ω_K.
    pub fn omega_k(&self) -> Result<Vec<Upset>, LocaleError> {
        let mut out = Vec::new();
        for u in self.poset.all_upsets()? {
            if self.is_closed(&u)? {
                out.push(u);
            }
        }
        Ok(out)
    }
}

/// `vsem` without building a nucleus first.
pub fn vsem(poset: &Poset, interp: &AtomInterp, phi: &Formula) -> Result<Upset, LocaleError> {
    NucleusOp::new(poset, interp)?.vsem(phi)
}

/// The poset of all bases within bounds ordered by inclusion, with each atom
/// interpreted as the bases deriving it.
#[derive(Debug, Clone)]
pub struct BasePoset {
    pub poset: Poset,
    pub interp: AtomInterp,
    pub bases: Vec<Base>,
}

pub fn bes_poset(universe: &AtomSet, bounds: &Bounds) -> Result<BasePoset, LocaleError> {
    let u = Universe::new(universe)?;
    let bases: Vec<Base> = enumerate_extensions(&Base::empty(), universe, bounds)?.collect();
    let n = bases.len();
    if n > 1 << 16 {
        return Err(BaseError::CapExceeded {
            what: "base poset elements",
            needed: n as u128,
            cap: 1 << 16,
        }
        .into());
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && bases[i].is_subset(&bases[j]) {
                pairs.push((i, j));
            }
        }
    }
    let names = bases.iter().map(|b| b.to_string()).collect();
    let poset = Poset::new(names, &pairs)?;
    let mut derivable = Vec::with_capacity(n);
    for b in &bases {
        let c = Compiled::new(b, &u)?;
        derivable.push(basecalc::saturate_from(&c, &u, &[0]).derivable_mask(0));
    }
    let mut map = BTreeMap::new();
    for (i, a) in u.atoms().iter().enumerate() {
        let members = (0..n).filter(|&w| derivable[w] >> i & 1 == 1);
        map.insert(a.clone(), poset.upset(members)?);
    }
    let interp = AtomInterp::new(&poset, map)?;
    Ok(BasePoset { poset, interp, bases })
}

/// The worlds named in a set, for reports.
pub fn upset_names(poset: &Poset, u: &Upset) -> BTreeSet<String> {
    poset.render(u).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basecalc::{atom_set, rule};
    use crate::nj::{kripke_eval, KripkeModel};
    use crate::syntax::parse_formula;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn a(s: &str) -> Atom {
        Atom::new(s).unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn interp(ps: &Poset, atoms: &[(&str, &[usize])]) -> AtomInterp {
        let map = atoms
            .iter()
            .map(|(n, ws)| (a(n), ps.upset(ws.iter().copied()).unwrap()))
            .collect();
        AtomInterp::new(ps, map).unwrap()
    }

    #[test]
    fn two_chain_operations() {
        let ps = Poset::chain(2);
        let w1 = ps.upset([1]).unwrap();
        assert_eq!(ps.implies(&w1, &ps.bottom()).unwrap(), ps.bottom());
        assert_eq!(ps.meet(&w1, &ps.top()).unwrap(), w1);
        assert_eq!(ps.implies(&w1, &w1).unwrap(), ps.top());
        assert!(matches!(ps.upset([0]), Err(LocaleError::NotUpset(..))));
    }

    #[test]
    fn double_negation_on_two_chain() {
        let ps = Poset::chain(2);
        let i = interp(&ps, &[("p", &[1])]);
        let k = NucleusOp::new(&ps, &i).unwrap();
        assert_eq!(k.vsem(&f("p")).unwrap(), ps.upset([1]).unwrap());
        assert_eq!(k.vsem(&f("p -> p")).unwrap(), ps.top());
        let nnp = Formula::neg(Formula::neg(f("p")));
        assert_eq!(k.vsem(&Formula::Bot).unwrap(), ps.upset([1]).unwrap());
        assert_eq!(k.vsem(&nnp).unwrap(), ps.upset([1]).unwrap());
        let i = interp(&ps, &[("p", &[1]), ("q", &[])]);
        let k = NucleusOp::new(&ps, &i).unwrap();
        assert_eq!(k.vsem(&Formula::Bot).unwrap(), ps.bottom());
        assert_eq!(k.vsem(&nnp).unwrap(), ps.top());
    }

    #[test]
    fn nucleus_examples() {
        let ps = Poset::chain(3);
        let i = interp(&ps, &[("p", &[])]);
        let k = NucleusOp::new(&ps, &i).unwrap();
        assert_eq!(k.apply(&ps.bottom()).unwrap(), ps.bottom());
        let empty = AtomInterp::new(&ps, BTreeMap::new()).unwrap();
        assert!(matches!(NucleusOp::new(&ps, &empty), Err(LocaleError::NoAtoms)));
        let other = Poset::chain(3);
        assert!(matches!(ps.meet(&ps.top(), &other.top()), Err(LocaleError::MixedPosets)));
    }

    #[test]
    fn join_k_is_least_closed_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(1..=5);
            let ps = Poset::random(n, &mut rng);
            let i = AtomInterp::random(&ps, &[a("p"), a("q")], &mut rng);
            let k = NucleusOp::new(&ps, &i).unwrap();
            let closed = k.omega_k().unwrap();
            for (_, vp) in i.iter() {
                assert!(closed.contains(vp));
            }
            for u in &closed {
                for v in &closed {
                    let j = k.join_k(u, v).unwrap();
                    let least = closed
                        .iter()
                        .filter(|c| u.is_subset(c) && v.is_subset(c))
                        .min_by_key(|c| c.len())
                        .unwrap();
                    assert_eq!(&j, least);
                }
                let unit = k.join_k(&k.apply(&ps.bottom()).unwrap(), u).unwrap();
                assert_eq!(&unit, u);
            }
        }
    }

    #[test]
    fn agrees_with_kripke_off_disjunction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let atoms = [a("p"), a("q")];
        for _ in 0..30 {
            let ps = Poset::random(4, &mut rng);
            let i = AtomInterp::random(&ps, &atoms, &mut rng);
            let (model_ps, model_i) = (ps.clone(), i.clone());
            let pairs: Vec<_> = (0..4)
                .flat_map(|x| (0..4).map(move |y| (x, y)))
                .filter(|&(x, y)| x != y && model_ps.leq(x, y))
                .collect();
            let val = model_i
                .iter()
                .map(|(a, u)| (a.clone(), u.members().into_iter().collect()))
                .collect();
            let m = KripkeModel::new(4, &pairs, val).unwrap();
            let k = NucleusOp::new(&ps, &i).unwrap();
            for _ in 0..10 {
                let phi = crate::nj::random_formula(&atoms, 3, &mut rng);
                if has_disj_or_bot(&phi) {
                    continue;
                }
                let u = k.vsem(&phi).unwrap();
                for w in 0..4 {
                    assert_eq!(u.contains(w), kripke_eval(&m, w, &phi), "{phi}");
                }
            }
            let (p, q) = (i.get(&atoms[0]).unwrap(), i.get(&atoms[1]).unwrap());
            let jk = k.vsem(&f("p | q")).unwrap();
            let union = ps.join(p, q).unwrap();
            let kripke: Vec<bool> = (0..4).map(|w| kripke_eval(&m, w, &f("p | q"))).collect();
            for w in 0..4 {
                assert_eq!(union.contains(w), kripke[w]);
                assert!(!union.contains(w) || jk.contains(w));
            }
        }
    }

    fn has_disj_or_bot(phi: &Formula) -> bool {
        match phi {
            Formula::Atom(_) => false,
            Formula::Bot | Formula::Disj(..) => true,
            Formula::Conj(a, b) | Formula::Impl(a, b) => has_disj_or_bot(a) || has_disj_or_bot(b),
        }
    }

    #[test]
    fn base_poset_examples() {
        let bp = bes_poset(&atom_set(&["p"]), &Bounds::new(0, 0, 1)).unwrap();
        assert_eq!(bp.bases, vec![Base::empty(), Base::new([rule(&[], "p")])]);
        assert!(bp.poset.leq(0, 1) && !bp.poset.leq(1, 0));
        assert_eq!(bp.interp.get(&a("p")).unwrap(), &bp.poset.upset([1]).unwrap());
    }

    #[test]
    fn poset_file_round_trip_and_errors() {
        let text = r#"{"elements":["w0","w1"],"leq":[["w0","w1"]],"atoms":{"p":["w1"]}}"#;
        let (ps, i) = Poset::parse_file(text).unwrap();
        assert_eq!(ps.to_json(&i).to_string(), text);
        let bad = r#"{"elements":["w0","w1"],"leq":[["w0","w1"]],"atoms":{"p":["w0"]}}"#;
        let err = Poset::parse_file(bad).unwrap_err().to_string();
        assert!(err.contains("/atoms/p") && err.contains("w0") && err.contains("w1"), "{err}");
        let cyc = r#"{"elements":["a","b"],"leq":[["a","b"],["b","a"]]}"#;
        assert!(Poset::parse_file(cyc).is_err());
    }
}
