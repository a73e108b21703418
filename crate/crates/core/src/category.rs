//! A finite fragment of the category of worlds `(base, context)` and the
//! presheaf interpretation of formulas over it.
//!
//! A fragment keeps only worlds whose derivation sets are finite and no
//! deeper than the depth bound. Hom-sets and atom denotations are then
//! complete sets of derivations, so the fragment is a genuine full
//! subcategory and every denotation is an exact presheaf on it. Statements
//! about the absence of natural transformations are still relative to the
//! chosen worlds.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::rc::Rc;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::basecalc::{
    self, enumerate_extensions, substitute, AtomSet, AtomicRule, Base, BaseError, Bounds,
    DerivTerm, Universe, VarContext,
};
use crate::syntax::{render_formula, Atom, Formula};

pub const DEFAULT_MORPHISM_CAP: usize = 50_000;
pub const DEFAULT_DERIVATION_CAP: usize = 10_000;
pub const DEFAULT_NAT_CAP: usize = 100_000;
pub const DEFAULT_NODE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryError {
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error("{what} exceeds the cap of {cap}")]
    CapExceeded { what: &'static str, cap: u64 },
    #[error("morphisms are not composable")]
    NotComposable,
    #[error("atom `{0}` is not in the fragment's universe")]
    MissingAtom(Atom),
    #[error("fragment is not closed under composition")]
    NotClosed,
    #[error("fragment has no worlds")]
    Empty,
}

impl CategoryError {
    pub fn is_cap(&self) -> bool {
        matches!(
            self,
            CategoryError::CapExceeded { .. } | CategoryError::Base(BaseError::CapExceeded { .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct World {
    pub base: Base,
    /// Context atoms in ascending order, named `x1, x2, ...`.
    pub ctx: Vec<Atom>,
}

impl World {
    pub fn new(base: Base, ctx: impl IntoIterator<Item = Atom>) -> World {
        let ctx: AtomSet = ctx.into_iter().collect();
        World {
            base,
            ctx: ctx.into_iter().collect(),
        }
    }

    pub fn var_context(&self) -> VarContext {
        VarContext::from_atoms(&self.ctx)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "base": self.base.rules().iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "ctx": self.ctx.iter().map(Atom::name).collect::<Vec<_>>(),
        })
    }
}

impl std::fmt::Display for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ctx: Vec<String> = self
            .ctx
            .iter()
            .enumerate()
            .map(|(i, a)| format!("x{}:{a}", i + 1))
            .collect();
        write!(f, "({}, ({}))", self.base, ctx.join(", "))
    }
}

/// A morphism `source -> target`: one derivation in the source of each
/// target context atom. The target base is included in the source base.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WMorphism {
    pub source: usize,
    pub target: usize,
    pub terms: Vec<DerivTerm>,
}

/// `g ∘ f` for `f: u -> v` and `g: v -> w`.
pub fn compose(f: &WMorphism, g: &WMorphism) -> Result<WMorphism, CategoryError> {
    if f.target != g.source {
        return Err(CategoryError::NotComposable);
    }
    let m = f.terms.len();
    let sigma: Vec<DerivTerm> = (0..m).map(|i| f.terms[m - 1 - i].clone()).collect();
    Ok(WMorphism {
        source: f.source,
        target: g.target,
        terms: g.terms.iter().map(|t| substitute(t, &sigma)).collect(),
    })
}

fn identity_terms(n: usize) -> Vec<DerivTerm> {
    (0..n).map(|i| DerivTerm::Var(n - 1 - i)).collect()
}

/// All derivations of `q` from `ctx` in `rules`, or `None` when there are
/// infinitely many or some is deeper than `depth`.
struct Derivations<'a> {
    rules: &'a [Arc<AtomicRule>],
    universe: &'a Universe,
    premises: Vec<Vec<(u64, usize)>>,
    concl: Vec<usize>,
    derivable: HashMap<u64, u64>,
    table: basecalc::DerivTable,
}

impl<'a> Derivations<'a> {
    fn new(base: &'a Base, universe: &'a Universe, ctx: u64) -> Result<Derivations<'a>, BaseError> {
        let compiled = basecalc::Compiled::new(base, universe)?;
        let table = basecalc::saturate_from(&compiled, universe, &[ctx]);
        let mut premises = Vec::new();
        let mut concl = Vec::new();
        for r in base.rules() {
            premises.push(
                r.premises()
                    .iter()
                    .map(|p| Ok((universe.mask(&p.hyps)?, universe.index(&p.concl)?)))
                    .collect::<Result<Vec<_>, BaseError>>()?,
            );
            concl.push(universe.index(r.conclusion())?);
        }
        Ok(Derivations {
            rules: base.rules(),
            universe,
            premises,
            concl,
            derivable: HashMap::new(),
            table,
        })
    }

    fn derivable(&mut self, ctx: u64) -> u64 {
        let t = &self.table;
        *self.derivable.entry(ctx).or_insert_with(|| t.derivable_mask(ctx))
    }

    fn usable(&mut self, ctx: u64, r: usize) -> bool {
        let prem = self.premises[r].clone();
        prem.iter()
            .all(|&(h, c)| self.derivable(ctx | h) >> c & 1 == 1)
    }

    /// Longest derivation of each reachable judgment; `None` on a cycle.
    fn max_depth(&mut self, ctx: u64, q: usize, state: &mut HashMap<(u64, usize), Option<usize>>) -> Option<usize> {
        if let Some(s) = state.get(&(ctx, q)) {
            return *s;
        }
        if self.derivable(ctx) >> q & 1 == 0 {
            state.insert((ctx, q), Some(0));
            return Some(0);
        }
        state.insert((ctx, q), None);
        let mut best = 0;
        for r in 0..self.rules.len() {
            if self.concl[r] != q || !self.usable(ctx, r) {
                continue;
            }
            let mut d = 1;
            for (h, c) in self.premises[r].clone() {
                d = d.max(1 + self.max_depth(ctx | h, c, state)?);
            }
            best = best.max(d);
        }
        state.insert((ctx, q), Some(best));
        Some(best)
    }

    fn enumerate(
        &mut self,
        ctx: &mut Vec<Atom>,
        q: &Atom,
        cap: usize,
        memo: &mut HashMap<(Vec<Atom>, Atom), Rc<Vec<DerivTerm>>>,
    ) -> Result<Rc<Vec<DerivTerm>>, CategoryError> {
        if let Some(v) = memo.get(&(ctx.clone(), q.clone())) {
            return Ok(v.clone());
        }
        let mask = self.universe.mask(ctx.iter())?;
        let mut out = Vec::new();
        for (k, a) in ctx.iter().enumerate() {
            if a == q {
                out.push(DerivTerm::Var(ctx.len() - 1 - k));
            }
        }
        let qi = self.universe.index(q)?;
        for r in 0..self.rules.len() {
            if self.concl[r] != qi || !self.usable(mask, r) {
                continue;
            }
            let rule = self.rules[r].clone();
            let mut arg_sets = Vec::new();
            for p in rule.premises() {
                let mark = ctx.len();
                ctx.extend(p.hyps.iter().cloned());
                let s = self.enumerate(ctx, &p.concl, cap, memo)?;
                ctx.truncate(mark);
                arg_sets.push(s);
            }
            let mut idx = vec![0usize; arg_sets.len()];
            'outer: loop {
                let args = idx.iter().zip(&arg_sets).map(|(&i, s)| s[i].clone()).collect();
                out.push(DerivTerm::app(rule.clone(), args));
                if out.len() > cap {
                    return Err(CategoryError::CapExceeded {
                        what: "derivations in one world",
                        cap: cap as u64,
                    });
                }
                for k in (0..idx.len()).rev() {
                    idx[k] += 1;
                    if idx[k] < arg_sets[k].len() {
                        continue 'outer;
                    }
                    idx[k] = 0;
                }
                break;
            }
        }
        let out = Rc::new(out);
        memo.insert((ctx.clone(), q.clone()), out.clone());
        Ok(out)
    }
}

/// Derivations of every universe atom at a world, if the world is tame.
fn world_derivations(
    world: &World,
    universe: &Universe,
    depth: usize,
    cap: usize,
) -> Result<Option<Vec<Vec<DerivTerm>>>, CategoryError> {
    let ctx_mask = universe.mask(world.ctx.iter())?;
    let mut d = Derivations::new(&world.base, universe, ctx_mask)?;
    let mut state = HashMap::new();
    for q in 0..universe.len() {
        match d.max_depth(ctx_mask, q, &mut state) {
            Some(m) if m <= depth => {}
            _ => return Ok(None),
        }
    }
    let mut memo = HashMap::new();
    let mut out = Vec::new();
    for q in universe.atoms() {
        let mut ctx = world.ctx.clone();
        out.push(d.enumerate(&mut ctx, q, cap, &mut memo)?.as_ref().clone());
    }
    Ok(Some(out))
}

/// A finite full subcategory of worlds, with every morphism between them.
#[derive(Debug, Clone)]
pub struct Fragment {
    universe: Universe,
    depth: usize,
    worlds: Vec<World>,
    excluded: usize,
    ders: Vec<Vec<Vec<DerivTerm>>>,
    morphisms: Vec<WMorphism>,
    index: HashMap<WMorphism, usize>,
    hom: HashMap<(usize, usize), Vec<usize>>,
    hom_pos: Vec<usize>,
    into: Vec<Vec<usize>>,
    identity: Vec<usize>,
    comp: HashMap<(usize, usize), usize>,
}

/// Worlds `(C, ctx)` for every bounded extension `C` of `base` and every
/// context of at most `ctx_cap` distinct atoms, keeping the tame ones.
pub fn build_fragment(
    base: &Base,
    universe: &AtomSet,
    bounds: &Bounds,
    depth: usize,
    ctx_cap: usize,
) -> Result<Fragment, CategoryError> {
    let bases: Vec<Base> = enumerate_extensions(base, universe, bounds)?.collect();
    Fragment::from_bases(&bases, universe, depth, ctx_cap, |_| true)
}

impl Fragment {
    /// Worlds over the given bases; `keep` may drop further worlds.
    pub fn from_bases(
        bases: &[Base],
        universe: &AtomSet,
        depth: usize,
        ctx_cap: usize,
        keep: impl Fn(&World) -> bool,
    ) -> Result<Fragment, CategoryError> {
        let u = Universe::new(universe)?;
        let mut contexts: Vec<Vec<Atom>> = Vec::new();
        for mask in 0u64..1 << u.len() {
            if (mask.count_ones() as usize) <= ctx_cap {
                contexts.push(u.set_of(mask).into_iter().collect());
            }
        }
        contexts.sort_by_key(|c| c.len());
        let mut worlds = Vec::new();
        let mut ders = Vec::new();
        let mut excluded = 0;
        for b in bases {
            for c in &contexts {
                let w = World {
                    base: b.clone(),
                    ctx: c.clone(),
                };
                if !keep(&w) {
                    continue;
                }
                match world_derivations(&w, &u, depth, DEFAULT_DERIVATION_CAP)? {
                    Some(d) => {
                        worlds.push(w);
                        ders.push(d);
                    }
                    None => excluded += 1,
                }
            }
        }
        Fragment::assemble(u, depth, worlds, ders, excluded)
    }

    /// The full subcategory on the worlds satisfying `keep`.
    pub fn restrict(&self, keep: impl Fn(usize, &World) -> bool) -> Result<Fragment, CategoryError> {
        let mut worlds = Vec::new();
        let mut ders = Vec::new();
        let mut excluded = self.excluded;
        for (i, w) in self.worlds.iter().enumerate() {
            if keep(i, w) {
                worlds.push(w.clone());
                ders.push(self.ders[i].clone());
            } else {
                excluded += 1;
            }
        }
        Fragment::assemble(self.universe.clone(), self.depth, worlds, ders, excluded)
    }

    fn assemble(
        universe: Universe,
        depth: usize,
        worlds: Vec<World>,
        ders: Vec<Vec<Vec<DerivTerm>>>,
        excluded: usize,
    ) -> Result<Fragment, CategoryError> {
        let n = worlds.len();
        let mut morphisms = Vec::new();
        let mut hom: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut hom_pos = Vec::new();
        let mut into = vec![Vec::new(); n];
        let mut identity = vec![usize::MAX; n];
        for v in 0..n {
            for w in 0..n {
                if !worlds[w].base.is_subset(&worlds[v].base) {
                    continue;
                }
                let choices: Vec<&Vec<DerivTerm>> = worlds[w]
                    .ctx
                    .iter()
                    .map(|x| &ders[v][universe.index(x).expect("context atoms are in the universe")])
                    .collect();
                if choices.iter().any(|c| c.is_empty()) {
                    continue;
                }
                let mut idx = vec![0usize; choices.len()];
                'outer: loop {
                    let terms: Vec<DerivTerm> = idx.iter().zip(&choices).map(|(&i, c)| c[i].clone()).collect();
                    let m = morphisms.len();
                    if m >= DEFAULT_MORPHISM_CAP {
                        return Err(CategoryError::CapExceeded {
                            what: "morphisms",
                            cap: DEFAULT_MORPHISM_CAP as u64,
                        });
                    }
                    if v == w && terms == identity_terms(worlds[w].ctx.len()) {
                        identity[v] = m;
                    }
                    let list = hom.entry((v, w)).or_default();
                    hom_pos.push(list.len());
                    list.push(m);
                    into[w].push(m);
                    morphisms.push(WMorphism {
                        source: v,
                        target: w,
                        terms,
                    });
                    for k in (0..idx.len()).rev() {
                        idx[k] += 1;
                        if idx[k] < choices[k].len() {
                            continue 'outer;
                        }
                        idx[k] = 0;
                    }
                    break;
                }
            }
        }
        let index: HashMap<WMorphism, usize> = morphisms.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut comp = HashMap::new();
        for (fi, f) in morphisms.iter().enumerate() {
            for &gi in hom_out(&hom, f.target, n) .iter() {
                let h = compose(f, &morphisms[gi])?;
                let hi = *index.get(&h).ok_or(CategoryError::NotClosed)?;
                comp.insert((fi, gi), hi);
            }
        }
        Ok(Fragment {
            universe,
            depth,
            worlds,
            excluded,
            ders,
            morphisms,
            index,
            hom,
            hom_pos,
            into,
            identity,
            comp,
        })
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn worlds(&self) -> &[World] {
        &self.worlds
    }

    pub fn world_index(&self, w: &World) -> Option<usize> {
        self.worlds.iter().position(|x| x == w)
    }

    /// Worlds dropped because their derivation sets were infinite or deeper
    /// than the bound.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    pub fn morphisms(&self) -> &[WMorphism] {
        &self.morphisms
    }

    pub fn morphism_index(&self, m: &WMorphism) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn hom(&self, v: usize, w: usize) -> &[usize] {
        self.hom.get(&(v, w)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Morphisms with target `w`.
    pub fn incoming(&self, w: usize) -> &[usize] {
        &self.into[w]
    }

    pub fn identity(&self, w: usize) -> usize {
        self.identity[w]
    }

    /// Index of `g ∘ f`.
    pub fn compose_idx(&self, f: usize, g: usize) -> Option<usize> {
        self.comp.get(&(f, g)).copied()
    }

    /// Derivations of atom `q` at world `w`.
    pub fn derivations(&self, w: usize, q: &Atom) -> Result<&[DerivTerm], CategoryError> {
        let i = self
            .universe
            .index(q)
            .map_err(|_| CategoryError::MissingAtom(q.clone()))?;
        Ok(&self.ders[w][i])
    }

    /// Every morphism's terms check in its source.
    pub fn check_morphisms(&self) -> bool {
        self.morphisms.iter().all(|m| {
            let (s, t) = (&self.worlds[m.source], &self.worlds[m.target]);
            t.base.is_subset(&s.base)
                && m.terms.len() == t.ctx.len()
                && m.terms
                    .iter()
                    .zip(&t.ctx)
                    .all(|(term, q)| basecalc::check_derivation(&s.base, &s.var_context(), term, q))
        })
    }

    /// Identity and associativity over every composable pair and triple.
    pub fn check_category_laws(&self) -> bool {
        for (fi, f) in self.morphisms.iter().enumerate() {
            if self.compose_idx(self.identity[f.source], fi) != Some(fi)
                || self.compose_idx(fi, self.identity[f.target]) != Some(fi)
            {
                return false;
            }
            for &gi in &self.out_of(f.target) {
                let gf = self.comp[&(fi, gi)];
                for &hi in &self.out_of(self.morphisms[gi].target) {
                    let hg = self.comp[&(gi, hi)];
                    if self.comp[&(gf, hi)] != self.comp[&(fi, hg)] {
                        return false;
                    }
                    let direct = compose(f, &compose(&self.morphisms[gi], &self.morphisms[hi]).unwrap()).unwrap();
                    if self.morphisms[self.comp[&(gf, hi)]] != direct {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn out_of(&self, v: usize) -> Vec<usize> {
        hom_out(&self.hom, v, self.worlds.len())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "depth": self.depth,
            "universe": self.universe.atoms().iter().map(Atom::name).collect::<Vec<_>>(),
            "worlds": self.worlds.iter().map(World::to_json).collect::<Vec<_>>(),
            "excluded_worlds": self.excluded,
            "morphisms": self.morphisms.iter().map(|m| {
                let ctx = self.worlds[m.source].var_context();
                json!({
                    "source": m.source,
                    "target": m.target,
                    "terms": m.terms.iter().map(|t| t.display_in(&ctx).to_string()).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>(),
        })
    }
}

fn hom_out(hom: &HashMap<(usize, usize), Vec<usize>>, v: usize, n: usize) -> Vec<usize> {
    (0..n)
        .flat_map(|w| hom.get(&(v, w)).cloned().unwrap_or_default())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    Deriv(DerivTerm),
    Tuple(Vec<u32>),
    Tagged(u8, u32),
    Arrow(u32),
    /// A natural transformation out of `hom(-, w) × F`, as a flat table.
    Nat(Vec<u32>),
}

/// A presheaf on a fragment: an element set per world and, for each
/// morphism `f: v -> w`, the map from elements at `w` to elements at `v`.
#[derive(Debug, Clone)]
pub struct Denotation {
    pub label: String,
    elements: Vec<Vec<Element>>,
    index: Vec<HashMap<Element, u32>>,
    action: Vec<Vec<u32>>,
}

impl Denotation {
    fn from_parts(label: String, elements: Vec<Vec<Element>>, action: Vec<Vec<u32>>) -> Denotation {
        let index = elements
            .iter()
            .map(|es| es.iter().cloned().enumerate().map(|(i, e)| (e, i as u32)).collect())
            .collect();
        Denotation {
            label,
            elements,
            index,
            action,
        }
    }

    pub fn elements(&self, w: usize) -> &[Element] {
        &self.elements[w]
    }

    pub fn len_at(&self, w: usize) -> usize {
        self.elements[w].len()
    }

    pub fn find(&self, w: usize, e: &Element) -> Option<u32> {
        self.index[w].get(e).copied()
    }

    /// Image at `f.source` of element `x` at `f.target`.
    pub fn act(&self, f: usize, x: u32) -> u32 {
        self.action[f][x as usize]
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.elements.iter().map(Vec::len).collect()
    }

    /// `F(id) = id` and `F(g ∘ f) = F(f) ∘ F(g)`.
    pub fn check_functoriality(&self, frag: &Fragment) -> bool {
        for w in 0..frag.worlds.len() {
            let id = frag.identity[w];
            if (0..self.len_at(w) as u32).any(|x| self.act(id, x) != x) {
                return false;
            }
        }
        frag.comp.iter().all(|(&(f, g), &gf)| {
            let w = frag.morphisms[g].target;
            (0..self.len_at(w) as u32).all(|x| self.act(gf, x) == self.act(f, self.act(g, x)))
        })
    }

    pub fn to_json(&self) -> Value {
        json!({"label": self.label, "cardinalities": self.cardinalities()})
    }
}

/// `⟦p⟧`: derivations of `p`, acted on by substitution.
pub fn atom_denotation(frag: &Fragment, p: &Atom) -> Result<Denotation, CategoryError> {
    let mut elements = Vec::new();
    for w in 0..frag.worlds.len() {
        elements.push(frag.derivations(w, p)?.iter().cloned().map(Element::Deriv).collect::<Vec<_>>());
    }
    let index: Vec<HashMap<&DerivTerm, u32>> = elements
        .iter()
        .map(|es| {
            es.iter()
                .enumerate()
                .map(|(i, e)| match e {
                    Element::Deriv(t) => (t, i as u32),
                    _ => unreachable!(),
                })
                .collect()
        })
        .collect();
    let mut action = Vec::new();
    for f in &frag.morphisms {
        let m = f.terms.len();
        let sigma: Vec<DerivTerm> = (0..m).map(|i| f.terms[m - 1 - i].clone()).collect();
        let mut row = Vec::new();
        for e in &elements[f.target] {
            let Element::Deriv(t) = e else { unreachable!() };
            let image = substitute(t, &sigma);
            row.push(*index[f.source].get(&image).ok_or(CategoryError::NotClosed)?);
        }
        action.push(row);
    }
    Ok(Denotation::from_parts(p.name().to_string(), elements, action))
}

/// Pointwise product; tuples are ordered with the last factor fastest.
pub fn product(frag: &Fragment, factors: &[&Denotation], label: String) -> Denotation {
    let n = frag.worlds.len();
    let mut elements = Vec::with_capacity(n);
    for w in 0..n {
        let sizes: Vec<usize> = factors.iter().map(|d| d.len_at(w)).collect();
        let mut out = Vec::new();
        if sizes.iter().all(|&s| s > 0) {
            let mut idx = vec![0u32; sizes.len()];
            'outer: loop {
                out.push(Element::Tuple(idx.clone()));
                for k in (0..idx.len()).rev() {
                    idx[k] += 1;
                    if (idx[k] as usize) < sizes[k] {
                        continue 'outer;
                    }
                    idx[k] = 0;
                }
                break;
            }
        }
        elements.push(out);
    }
    let mut action = Vec::new();
    for (fi, f) in frag.morphisms.iter().enumerate() {
        let sizes: Vec<usize> = factors.iter().map(|d| d.len_at(f.source)).collect();
        let row = elements[f.target]
            .iter()
            .map(|e| {
                let Element::Tuple(c) = e else { unreachable!() };
                c.iter()
                    .zip(factors)
                    .zip(&sizes)
                    .fold(0u32, |acc, ((&x, d), &s)| acc * s as u32 + d.act(fi, x))
            })
            .collect();
        action.push(row);
    }
    Denotation::from_parts(label, elements, action)
}

/// Pointwise tagged disjoint union.
pub fn coproduct(frag: &Fragment, a: &Denotation, b: &Denotation, label: String) -> Denotation {
    let mut elements = Vec::new();
    for w in 0..frag.worlds.len() {
        let mut out: Vec<Element> = (0..a.len_at(w) as u32).map(|i| Element::Tagged(0, i)).collect();
        out.extend((0..b.len_at(w) as u32).map(|i| Element::Tagged(1, i)));
        elements.push(out);
    }
    let mut action = Vec::new();
    for (fi, f) in frag.morphisms.iter().enumerate() {
        let left = a.len_at(f.source) as u32;
        let row = elements[f.target]
            .iter()
            .map(|e| match e {
                Element::Tagged(0, i) => a.act(fi, *i),
                Element::Tagged(_, i) => left + b.act(fi, *i),
                _ => unreachable!(),
            })
            .collect();
        action.push(row);
    }
    Denotation::from_parts(label, elements, action)
}

/// `hom(-, w)`.
pub fn representable(frag: &Fragment, w: usize) -> Denotation {
    let n = frag.worlds.len();
    let elements: Vec<Vec<Element>> = (0..n)
        .map(|v| frag.hom(v, w).iter().map(|&m| Element::Arrow(m as u32)).collect())
        .collect();
    let mut action = Vec::new();
    for (fi, _) in frag.morphisms.iter().enumerate() {
        let f = &frag.morphisms[fi];
        let row = frag
            .hom(f.target, w)
            .iter()
            .map(|&m| frag.hom_pos[frag.comp[&(fi, m)]] as u32)
            .collect();
        action.push(row);
    }
    Denotation::from_parts(format!("hom(-,{w})"), elements, action)
}

/// Limits for natural-transformation searches.
#[derive(Debug, Clone, Copy)]
pub struct SearchCaps {
    pub solutions: usize,
    pub nodes: u64,
}

impl Default for SearchCaps {
    fn default() -> SearchCaps {
        SearchCaps {
            solutions: DEFAULT_NAT_CAP,
            nodes: DEFAULT_NODE_CAP,
        }
    }
}

/// Search space for natural transformations `s -> t`: one variable per
/// element of `s`, constrained along every morphism.
struct NatSearch<'a> {
    frag: &'a Fragment,
    s: &'a Denotation,
    t: &'a Denotation,
    offsets: Vec<usize>,
    var_world: Vec<usize>,
    order: Vec<usize>,
    nodes: u64,
    node_cap: u64,
}

const UNSET: u32 = u32::MAX;

impl<'a> NatSearch<'a> {
    fn new(frag: &'a Fragment, s: &'a Denotation, t: &'a Denotation, caps: SearchCaps) -> NatSearch<'a> {
        let n = frag.worlds.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut var_world = Vec::new();
        let mut total = 0;
        for w in 0..n {
            offsets.push(total);
            total += s.len_at(w);
            var_world.extend(std::iter::repeat_n(w, s.len_at(w)));
        }
        offsets.push(total);
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by_key(|&x| std::cmp::Reverse(frag.into[var_world[x]].len()));
        NatSearch {
            frag,
            s,
            t,
            offsets,
            var_world,
            order,
            nodes: 0,
            node_cap: caps.nodes,
        }
    }

    fn assign(&self, var: usize, val: u32, table: &mut [u32], trail: &mut Vec<usize>) -> bool {
        table[var] = val;
        trail.push(var);
        let mut queue = vec![var];
        while let Some(x) = queue.pop() {
            let v = self.var_world[x];
            let sx = (x - self.offsets[v]) as u32;
            let tx = table[x];
            for &g in &self.frag.into[v] {
                let u = self.frag.morphisms[g].source;
                let y = self.offsets[u] + self.s.act(g, sx) as usize;
                let ty = self.t.act(g, tx);
                if table[y] == UNSET {
                    table[y] = ty;
                    trail.push(y);
                    queue.push(y);
                } else if table[y] != ty {
                    return false;
                }
            }
        }
        true
    }

    fn run<F>(&mut self, visit: &mut F) -> Result<(), CategoryError>
    where
        F: FnMut(&[u32]) -> ControlFlow<()>,
    {
        struct Frame {
            pos: usize,
            var: usize,
            next: u32,
            mark: usize,
        }
        let mut table = vec![UNSET; self.var_world.len()];
        let mut trail = Vec::new();
        let mut stack: Vec<Frame> = Vec::new();
        let mut pos = 0;
        loop {
            while pos < self.order.len() && table[self.order[pos]] != UNSET {
                pos += 1;
            }
            if pos == self.order.len() {
                if visit(&table).is_break() {
                    return Ok(());
                }
            } else {
                stack.push(Frame {
                    pos,
                    var: self.order[pos],
                    next: 0,
                    mark: trail.len(),
                });
            }
            loop {
                let Some(top) = stack.last_mut() else {
                    return Ok(());
                };
                for x in trail.drain(top.mark..) {
                    table[x] = UNSET;
                }
                if top.next as usize >= self.t.len_at(self.var_world[top.var]) {
                    stack.pop();
                    continue;
                }
                let val = top.next;
                top.next += 1;
                let (var, next_pos) = (top.var, top.pos + 1);
                self.nodes += 1;
                if self.nodes > self.node_cap {
                    return Err(CategoryError::CapExceeded {
                        what: "search nodes",
                        cap: self.node_cap,
                    });
                }
                if self.assign(var, val, &mut table, &mut trail) {
                    pos = next_pos;
                    break;
                }
            }
        }
    }

    fn split(&self, flat: &[u32]) -> Vec<Vec<u32>> {
        (0..self.frag.worlds.len())
            .map(|w| flat[self.offsets[w]..self.offsets[w + 1]].to_vec())
            .collect()
    }
}

/// A world-indexed family of maps between two denotations.
#[derive(Debug, Clone)]
pub struct NatTrans<'a> {
    pub source: &'a Denotation,
    pub target: &'a Denotation,
    pub components: Vec<Vec<u32>>,
}

impl<'a> NatTrans<'a> {
    pub fn identity(d: &'a Denotation) -> NatTrans<'a> {
        NatTrans {
            source: d,
            target: d,
            components: d.elements.iter().map(|es| (0..es.len() as u32).collect()).collect(),
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &NatTrans<'a>) -> NatTrans<'a> {
        NatTrans {
            source: self.source,
            target: other.target,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().map(|&x| b[x as usize]).collect())
                .collect(),
        }
    }
}

/// `η_v ∘ S(f) = T(f) ∘ η_w` for every listed morphism `f: v -> w`.
pub fn check_naturality(eta: &NatTrans<'_>, frag: &Fragment) -> bool {
    let (s, t) = (eta.source, eta.target);
    let n = frag.worlds.len();
    if eta.components.len() != n
        || (0..n).any(|w| eta.components[w].len() != s.len_at(w))
        || (0..n).any(|w| eta.components[w].iter().any(|&x| x as usize >= t.len_at(w)))
    {
        return false;
    }
    frag.morphisms.iter().enumerate().all(|(fi, f)| {
        (0..s.len_at(f.target) as u32).all(|x| {
            eta.components[f.source][s.act(fi, x) as usize] == t.act(fi, eta.components[f.target][x as usize])
        })
    })
}

/// Every natural transformation `s -> t`, up to the cap.
pub fn all_nat<'a>(
    frag: &Fragment,
    s: &'a Denotation,
    t: &'a Denotation,
    caps: SearchCaps,
) -> Result<Vec<NatTrans<'a>>, CategoryError> {
    let mut search = NatSearch::new(frag, s, t, caps);
    let mut found = Vec::new();
    let mut over = false;
    search.run(&mut |table| {
        if found.len() >= caps.solutions {
            over = true;
            return ControlFlow::Break(());
        }
        found.push(table.to_vec());
        ControlFlow::Continue(())
    })?;
    if over {
        return Err(CategoryError::CapExceeded {
            what: "natural transformations",
            cap: caps.solutions as u64,
        });
    }
    Ok(found
        .iter()
        .map(|flat| NatTrans {
            source: s,
            target: t,
            components: search.split(flat),
        })
        .collect())
}

/// Some natural transformation `s -> t`, if one exists.
pub fn find_nat<'a>(
    frag: &Fragment,
    s: &'a Denotation,
    t: &'a Denotation,
    caps: SearchCaps,
) -> Result<Option<NatTrans<'a>>, CategoryError> {
    let mut search = NatSearch::new(frag, s, t, caps);
    let mut found = None;
    search.run(&mut |table| {
        found = Some(table.to_vec());
        ControlFlow::Break(())
    })?;
    Ok(found.map(|flat| NatTrans {
        source: s,
        target: t,
        components: search.split(&flat),
    }))
}

/// The number of natural transformations `s -> t`, up to the cap.
pub fn count_nat(frag: &Fragment, s: &Denotation, t: &Denotation, caps: SearchCaps) -> Result<u64, CategoryError> {
    let mut search = NatSearch::new(frag, s, t, caps);
    let mut count = 0u64;
    let mut over = false;
    search.run(&mut |_| {
        count += 1;
        if count > caps.solutions as u64 {
            over = true;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    if over {
        return Err(CategoryError::CapExceeded {
            what: "natural transformations",
            cap: caps.solutions as u64,
        });
    }
    Ok(count)
}

/// `(F ⇒ G)(w)` is the set of natural transformations `hom(-, w) × F -> G`.
pub fn exponential(
    frag: &Fragment,
    f: &Denotation,
    g: &Denotation,
    label: String,
    caps: SearchCaps,
) -> Result<Denotation, CategoryError> {
    let n = frag.worlds.len();
    let mut elements = Vec::with_capacity(n);
    // flat layout of hom(-, w) × F: per world v, |hom(v,w)| * |F(v)| entries
    let mut offsets = Vec::with_capacity(n);
    for w in 0..n {
        let hw = representable(frag, w);
        let s = product(frag, &[&hw, f], String::new());
        let mut search = NatSearch::new(frag, &s, g, caps);
        offsets.push(search.offsets.clone());
        let mut found = Vec::new();
        let mut over = false;
        search.run(&mut |table| {
            if found.len() >= caps.solutions {
                over = true;
                return ControlFlow::Break(());
            }
            found.push(Element::Nat(table.to_vec()));
            ControlFlow::Continue(())
        })?;
        if over {
            return Err(CategoryError::CapExceeded {
                what: "natural transformations",
                cap: caps.solutions as u64,
            });
        }
        elements.push(found);
    }
    let index: Vec<HashMap<&Element, u32>> = elements
        .iter()
        .map(|es| es.iter().enumerate().map(|(i, e)| (e, i as u32)).collect())
        .collect();
    let mut action = Vec::with_capacity(frag.morphisms.len());
    for (hi, h) in frag.morphisms.iter().enumerate() {
        let (u, w) = (h.source, h.target);
        let mut row = Vec::with_capacity(elements[w].len());
        for e in &elements[w] {
            let Element::Nat(eta) = e else { unreachable!() };
            let mut out = Vec::with_capacity(offsets[u][n]);
            for v in 0..n {
                let fv = f.len_at(v);
                for &m in frag.hom(v, u) {
                    let hm = frag.comp[&(m, hi)];
                    let base = offsets[w][v] + frag.hom_pos[hm] * fv;
                    out.extend_from_slice(&eta[base..base + fv]);
                }
            }
            row.push(*index[u].get(&Element::Nat(out)).ok_or(CategoryError::NotClosed)?);
        }
        action.push(row);
    }
    Ok(Denotation::from_parts(label, elements, action))
}

/// How disjunction is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisjunctionStyle {
    /// `∏_p (A ⇒ ⟦p⟧) ⇒ ((B ⇒ ⟦p⟧) ⇒ ⟦p⟧)`.
    SecondOrder,
    /// `A + B`.
    Coproduct,
}

/// Interprets formulas over one fragment, sharing subformula denotations.
pub struct Interpreter<'a> {
    frag: &'a Fragment,
    style: DisjunctionStyle,
    caps: SearchCaps,
    cache: HashMap<Formula, Rc<Denotation>>,
}

impl<'a> Interpreter<'a> {
    pub fn new(frag: &'a Fragment, style: DisjunctionStyle) -> Interpreter<'a> {
        Interpreter {
            frag,
            style,
            caps: SearchCaps::default(),
            cache: HashMap::new(),
        }
    }

    pub fn with_caps(mut self, caps: SearchCaps) -> Interpreter<'a> {
        self.caps = caps;
        self
    }

    pub fn fragment(&self) -> &'a Fragment {
        self.frag
    }

    pub fn denote(&mut self, phi: &Formula) -> Result<Rc<Denotation>, CategoryError> {
        if let Some(d) = self.cache.get(phi) {
            return Ok(d.clone());
        }
        let frag = self.frag;
        let label = render_formula(phi);
        let d = match phi {
            Formula::Atom(p) => atom_denotation(frag, p)?,
            Formula::Conj(a, b) => {
                let (a, b) = (self.denote(a)?, self.denote(b)?);
                product(frag, &[&a, &b], label)
            }
            Formula::Impl(a, b) => {
                let (a, b) = (self.denote(a)?, self.denote(b)?);
                exponential(frag, &a, &b, label, self.caps)?
            }
            Formula::Disj(a, b) => match self.style {
                DisjunctionStyle::Coproduct => {
                    let (a, b) = (self.denote(a)?, self.denote(b)?);
                    coproduct(frag, &a, &b, label)
                }
                DisjunctionStyle::SecondOrder => {
                    let (da, db) = (self.denote(a)?, self.denote(b)?);
                    self.sigma(&da, &db, label)?
                }
            },
            Formula::Bot => {
                let atoms: Vec<Rc<Denotation>> = frag
                    .universe
                    .atoms()
                    .iter()
                    .map(|p| self.denote(&Formula::Atom(p.clone())))
                    .collect::<Result<_, _>>()?;
                let refs: Vec<&Denotation> = atoms.iter().map(Rc::as_ref).collect();
                product(frag, &refs, label)
            }
        };
        let d = Rc::new(d);
        self.cache.insert(phi.clone(), d.clone());
        Ok(d)
    }

    /// `σ(A, B) = ∏_p (A ⇒ ⟦p⟧) ⇒ ((B ⇒ ⟦p⟧) ⇒ ⟦p⟧)`, one factor per atom of
    /// the universe.
    pub fn sigma(&mut self, a: &Denotation, b: &Denotation, label: String) -> Result<Denotation, CategoryError> {
        let frag = self.frag;
        let mut factors = Vec::new();
        for p in frag.universe.atoms() {
            let dp = self.denote(&Formula::Atom(p.clone()))?;
            let ap = exponential(frag, a, &dp, String::new(), self.caps)?;
            let bp = exponential(frag, b, &dp, String::new(), self.caps)?;
            let bpp = exponential(frag, &bp, &dp, String::new(), self.caps)?;
            factors.push(exponential(frag, &ap, &bpp, String::new(), self.caps)?);
        }
        let refs: Vec<&Denotation> = factors.iter().collect();
        Ok(product(frag, &refs, label))
    }
}

/// `⟦φ⟧` with second-order disjunction.
pub fn interp(phi: &Formula, frag: &Fragment) -> Result<Denotation, CategoryError> {
    let mut i = Interpreter::new(frag, DisjunctionStyle::SecondOrder);
    Ok(i.denote(phi)?.as_ref().clone())
}

/// `⟦φ⟧` with disjunction read as coproduct.
pub fn interp_coproduct(phi: &Formula, frag: &Fragment) -> Result<Denotation, CategoryError> {
    let mut i = Interpreter::new(frag, DisjunctionStyle::Coproduct);
    Ok(i.denote(phi)?.as_ref().clone())
}

/// The presheaf with one element everywhere.
pub fn terminal(frag: &Fragment) -> Denotation {
    product(frag, &[], "1".into())
}

/// The presheaf with no elements.
pub fn initial(frag: &Fragment) -> Denotation {
    let n = frag.worlds.len();
    Denotation::from_parts("0".into(), vec![Vec::new(); n], vec![Vec::new(); frag.morphisms.len()])
}

/// Whether some natural transformation `σ(A, B) × (A ⇒ C) × (B ⇒ C) -> C`
/// exists on the fragment.
pub fn supports_disjunction_check(
    frag: &Fragment,
    a: &Denotation,
    b: &Denotation,
    c: &Denotation,
) -> Result<bool, CategoryError> {
    let caps = SearchCaps::default();
    let mut interp = Interpreter::new(frag, DisjunctionStyle::SecondOrder);
    let sigma = interp.sigma(a, b, "σ(A,B)".into())?;
    let ac = exponential(frag, a, c, "A⇒C".into(), caps)?;
    let bc = exponential(frag, b, c, "B⇒C".into(), caps)?;
    let source = product(frag, &[&sigma, &ac, &bc], "σ×(A⇒C)×(B⇒C)".into());
    Ok(find_nat(frag, &source, c, caps)?.is_some())
}

/// Replaces each axiom application `⇒ p` in `t` by `a` and each free
/// variable `j` by `sigma[j]`, in one pass.
fn graft(t: &DerivTerm, axiom: &AtomicRule, sigma: &[DerivTerm], a: &DerivTerm, depth: usize) -> DerivTerm {
    match t {
        DerivTerm::Var(i) if *i < depth => DerivTerm::Var(*i),
        DerivTerm::Var(i) => basecalc::shift(&sigma[i - depth], depth),
        DerivTerm::App { rule, args } if args.is_empty() && rule.as_ref() == axiom => basecalc::shift(a, depth),
        DerivTerm::App { rule, args } => DerivTerm::app(
            rule.clone(),
            args.iter()
                .zip(rule.premises())
                .map(|(x, p)| graft(x, axiom, sigma, a, depth + p.hyps.len()))
                .collect(),
        ),
    }
}

#[derive(Debug, Clone)]
pub struct DisjunctionExperiment {
    pub atoms: [Atom; 3],
    pub degenerate: bool,
    pub worlds: usize,
    pub morphisms: usize,
    pub excluded_worlds: usize,
    pub source_elements: usize,
    pub constructed: Result<(), String>,
    pub natural: bool,
    pub functorial: bool,
    pub second_order_count: Result<u64, String>,
}

impl DisjunctionExperiment {
    pub fn passed(&self) -> bool {
        self.constructed.is_ok() && self.natural && self.functorial && self.worlds >= 3
    }

    pub fn to_json(&self) -> Value {
        let [p, q, r] = &self.atoms;
        json!({
            "sequent": format!("{p} -> {q} | {r} |- ({p} -> {q}) | ({p} -> {r})"),
            "degenerate": self.degenerate,
            "worlds": self.worlds,
            "morphisms": self.morphisms,
            "excluded_worlds": self.excluded_worlds,
            "coproduct": {
                "source_elements": self.source_elements,
                "constructed": self.constructed.is_ok(),
                "failure": self.constructed.as_ref().err(),
                "natural": self.natural,
                "functorial": self.functorial,
            },
            "second_order": {
                "natural_transformations": self.second_order_count.as_ref().ok(),
                "error": self.second_order_count.as_ref().err(),
                "fragment_relative": true,
            },
        })
    }
}

/// The fragment used by the experiment: every bounded base, together with
/// its extension by `⇒ p`, restricted to worlds whose `⇒ p` extension is
/// also in the fragment.
pub fn experiment_fragment(
    universe: &AtomSet,
    bounds: &Bounds,
    depth: usize,
    ctx_cap: usize,
    p: &Atom,
) -> Result<Fragment, CategoryError> {
    let ax = AtomicRule::axiom(p.clone());
    let mut bases: Vec<Base> = enumerate_extensions(&Base::empty(), universe, bounds)?.collect();
    let extra: Vec<Base> = bases.iter().map(|b| b.with_rule(ax.clone())).collect();
    for b in extra {
        if !bases.contains(&b) {
            bases.push(b);
        }
    }
    let mut frag = Fragment::from_bases(&bases, universe, depth, ctx_cap, |_| true)?;
    loop {
        let keep: Vec<bool> = frag
            .worlds
            .iter()
            .map(|w| frag.world_index(&World::new(w.base.with_rule(ax.clone()), w.ctx.clone())).is_some())
            .collect();
        if keep.iter().all(|&k| k) {
            break;
        }
        frag = frag.restrict(|i, _| keep[i])?;
    }
    if frag.worlds.is_empty() {
        return Err(CategoryError::Empty);
    }
    Ok(frag)
}

/// Builds the natural transformation `⟦p ⊃ (q ∨ r)⟧ -> ⟦(p ⊃ q) ∨ (p ⊃ r)⟧`
/// for coproduct disjunction: at `(B, X)`, evaluate at `(B ∪ {⇒ p}, X)` on the
/// axiom, then turn the resulting derivation of `q` (or `r`) into a
/// transformation by grafting the argument over the axiom.
pub fn strong_disjunction_experiment(
    universe: &AtomSet,
    bounds: &Bounds,
    depth: usize,
    ctx_cap: usize,
) -> Result<DisjunctionExperiment, CategoryError> {
    let atoms: Vec<Atom> = universe.iter().cloned().collect();
    if atoms.is_empty() {
        return Err(CategoryError::Empty);
    }
    let degenerate = atoms.len() < 3;
    let (p, q, r) = if degenerate {
        (atoms[0].clone(), atoms[0].clone(), atoms[0].clone())
    } else {
        (atoms[0].clone(), atoms[1].clone(), atoms[2].clone())
    };
    let frag = experiment_fragment(universe, bounds, depth, ctx_cap, &p)?;
    let (fp, fq, fr) = (Formula::Atom(p.clone()), Formula::Atom(q.clone()), Formula::Atom(r.clone()));
    let lhs = Formula::imp(fp.clone(), Formula::disj(fq.clone(), fr.clone()));
    let pq = Formula::imp(fp.clone(), fq.clone());
    let pr = Formula::imp(fp.clone(), fr.clone());
    let rhs = Formula::disj(pq.clone(), pr.clone());

    let mut cop = Interpreter::new(&frag, DisjunctionStyle::Coproduct);
    let a = cop.denote(&lhs)?;
    let b = cop.denote(&rhs)?;
    let (dp, dq, dr) = (cop.denote(&fp)?, cop.denote(&fq)?, cop.denote(&fr)?);
    let (dpq, dpr) = (cop.denote(&pq)?, cop.denote(&pr)?);
    let ax = AtomicRule::axiom(p.clone());
    let functorial = [&a, &b].iter().all(|d| d.check_functoriality(&frag));

    let n = frag.worlds.len();
    let mut components = vec![Vec::new(); n];
    let mut constructed = Ok(());
    'worlds: for w in 0..n {
        let world = &frag.worlds[w];
        let wp = frag
            .world_index(&World::new(world.base.with_rule(ax.clone()), world.ctx.clone()))
            .expect("fragment is closed under adding the axiom");
        let iota = frag
            .morphism_index(&WMorphism {
                source: wp,
                target: w,
                terms: identity_terms(world.ctx.len()),
            })
            .expect("inclusion morphism");
        let ax_rule = frag.worlds[wp]
            .base
            .rules()
            .iter()
            .find(|r| r.as_ref() == &ax)
            .unwrap()
            .clone();
        let phi = dp
            .find(wp, &Element::Deriv(DerivTerm::app(ax_rule, Vec::new())))
            .expect("axiom derivation");
        // position of (iota, phi) in hom(-, w) × P at wp
        let hw_at_wp = frag.hom_pos[iota];
        let local = hw_at_wp * dp.len_at(wp) + phi as usize;
        let hom_offsets: Vec<usize> = (0..n)
            .scan(0usize, |acc, v| {
                let o = *acc;
                *acc += frag.hom(v, w).len() * dp.len_at(v);
                Some(o)
            })
            .collect();
        for e in a.elements(w) {
            let Element::Nat(eta) = e else { unreachable!() };
            let Element::Tagged(tag, d) = cop_target(&dq, &dr, eta[hom_offsets[wp] + local], wp) else {
                unreachable!()
            };
            let (summand, psi) = if tag == 0 {
                (&dq, &dq.elements(wp)[d as usize])
            } else {
                (&dr, &dr.elements(wp)[d as usize])
            };
            let Element::Deriv(psi) = psi else { unreachable!() };
            let mut table = Vec::new();
            for v in 0..n {
                for &m in frag.hom(v, w) {
                    let terms = &frag.morphisms[m].terms;
                    let k = terms.len();
                    let sigma: Vec<DerivTerm> = (0..k).map(|i| terms[k - 1 - i].clone()).collect();
                    for arg in dp.elements(v) {
                        let Element::Deriv(arg) = arg else { unreachable!() };
                        let grafted = graft(psi, &ax, &sigma, arg, 0);
                        match summand.find(v, &Element::Deriv(grafted.clone())) {
                            Some(i) => table.push(i),
                            None => {
                                constructed = Err(format!(
                                    "grafted derivation {grafted} is not in the denotation at world {v}"
                                ));
                                break 'worlds;
                            }
                        }
                    }
                }
            }
            let exp = if tag == 0 { &dpq } else { &dpr };
            let Some(idx) = exp.find(w, &Element::Nat(table)) else {
                constructed = Err(format!("constructed transformation at world {w} is not natural"));
                break 'worlds;
            };
            let target = b
                .find(w, &Element::Tagged(tag, idx))
                .expect("coproduct element");
            components[w].push(target);
        }
    }
    let natural = constructed.is_ok() && {
        let eta = NatTrans {
            source: &a,
            target: &b,
            components,
        };
        check_naturality(&eta, &frag)
    };

    let mut so = Interpreter::new(&frag, DisjunctionStyle::SecondOrder);
    let second_order_count = so
        .denote(&lhs)
        .and_then(|a2| {
            let b2 = so.denote(&rhs)?;
            count_nat(&frag, &a2, &b2, SearchCaps::default())
        })
        .map_err(|e| e.to_string());

    Ok(DisjunctionExperiment {
        atoms: [p, q, r],
        degenerate,
        worlds: n,
        morphisms: frag.morphisms.len(),
        excluded_worlds: frag.excluded,
        source_elements: (0..n).map(|w| a.len_at(w)).sum(),
        constructed,
        natural,
        functorial,
        second_order_count,
    })
}

fn cop_target(dq: &Denotation, _dr: &Denotation, x: u32, w: usize) -> Element {
    let left = dq.len_at(w) as u32;
    if x < left {
        Element::Tagged(0, x)
    } else {
        Element::Tagged(1, x - left)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basecalc::{atom_set, rule};
    use crate::syntax::parse_formula;

    fn a(s: &str) -> Atom {
        Atom::new(s).unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn small() -> Fragment {
        build_fragment(&Base::empty(), &atom_set(&["p"]), &Bounds::new(1, 0, 1), 2, 1).unwrap()
    }

    fn closed_worlds() -> Fragment {
        build_fragment(&Base::empty(), &atom_set(&["p", "q"]), &Bounds::new(1, 0, 1), 2, 0).unwrap()
    }

    #[test]
    fn identities_and_laws() {
        let frag = build_fragment(&Base::empty(), &atom_set(&["p"]), &Bounds::new(0, 0, 1), 1, 1).unwrap();
        for w in 0..frag.worlds().len() {
            let id = &frag.morphisms()[frag.identity(w)];
            assert_eq!((id.source, id.target), (w, w));
        }
        let x = frag.world_index(&World::new(Base::empty(), [a("p")])).unwrap();
        assert_eq!(frag.hom(x, x).len(), 1);
        assert!(frag.check_morphisms());
        assert!(frag.check_category_laws());
    }

    #[test]
    fn axiom_morphism() {
        let frag = build_fragment(&Base::empty(), &atom_set(&["p"]), &Bounds::new(0, 0, 1), 1, 1).unwrap();
        let ax = Base::new([rule(&[], "p")]);
        let src = frag.world_index(&World::new(ax.clone(), [])).unwrap();
        let tgt = frag.world_index(&World::new(Base::empty(), [a("p")])).unwrap();
        let homs = frag.hom(src, tgt);
        assert_eq!(homs.len(), 1);
        let term = &frag.morphisms()[homs[0]].terms[0];
        assert_eq!(*term, DerivTerm::app(ax.rules()[0].clone(), vec![]));
    }

    #[test]
    fn untame_worlds_are_excluded() {
        let frag = small();
        let cyc = Base::new([rule(&[(&[], "p")], "p")]);
        assert!(frag.world_index(&World::new(cyc.clone(), [a("p")])).is_none());
        assert!(frag.world_index(&World::new(cyc, [])).is_some());
        assert!(frag.excluded() > 0);
    }

    #[test]
    fn composition_is_substitution() {
        let b = Base::new([rule(&[(&[], "p")], "q"), rule(&[(&[], "q")], "r")]);
        let frag = Fragment::from_bases(&[b], &atom_set(&["p", "q", "r"]), 3, 1, |_| true).unwrap();
        let wp = frag.world_index(&World::new(frag.worlds()[0].base.clone(), [a("p")])).unwrap();
        let wq = frag.world_index(&World::new(frag.worlds()[0].base.clone(), [a("q")])).unwrap();
        let wr = frag.world_index(&World::new(frag.worlds()[0].base.clone(), [a("r")])).unwrap();
        let f = frag.hom(wp, wq)[0];
        let g = frag.hom(wq, wr)[0];
        let gf = frag.compose_idx(f, g).unwrap();
        let direct = compose(&frag.morphisms()[f], &frag.morphisms()[g]).unwrap();
        assert_eq!(frag.morphisms()[gf], direct);
        assert_eq!(direct.terms[0].depth(), 2);
        assert!(frag.check_category_laws());
    }

    #[test]
    fn atom_and_product_denotations() {
        let frag = small();
        let p = interp(&f("p"), &frag).unwrap();
        let ax = frag.world_index(&World::new(Base::new([rule(&[], "p")]), [])).unwrap();
        assert_eq!(p.len_at(ax), 1);
        assert!(p.check_functoriality(&frag));
        let pp = interp(&f("p & p"), &frag).unwrap();
        for w in 0..frag.worlds().len() {
            assert_eq!(pp.len_at(w), p.len_at(w) * p.len_at(w));
        }
        assert!(pp.check_functoriality(&frag));
        let bot = interp(&Formula::Bot, &frag).unwrap();
        let empty = frag.world_index(&World::new(Base::empty(), [])).unwrap();
        assert_eq!(bot.len_at(empty), 0);
    }

    #[test]
    fn denotations_are_functorial() {
        let frag = closed_worlds();
        for s in ["p -> q", "(p -> q) -> p", "p | q", "bot -> p", "p | (p -> bot)", "p & q -> q | p"] {
            let d = interp(&f(s), &frag).unwrap();
            assert!(d.check_functoriality(&frag), "{s}");
            let c = interp_coproduct(&f(s), &frag).unwrap();
            assert!(c.check_functoriality(&frag), "{s}");
        }
    }

    #[test]
    fn naturality_checks() {
        let frag = small();
        let d = interp(&f("p"), &frag).unwrap();
        let id = NatTrans::identity(&d);
        assert!(check_naturality(&id, &frag));
        assert!(check_naturality(&id.then(&id), &frag));
        let e = interp(&f("p -> p"), &frag).unwrap();
        let all = all_nat(&frag, &e, &e, SearchCaps::default()).unwrap();
        assert!(all.iter().all(|n| check_naturality(n, &frag)));
        let w = (0..frag.worlds().len()).find(|&w| d.len_at(w) == 2).unwrap();
        let mut bad = NatTrans::identity(&d);
        bad.components[w].swap(0, 1);
        assert!(!check_naturality(&bad, &frag));
    }

    #[test]
    fn coproduct_counts() {
        let frag = build_fragment(&Base::empty(), &atom_set(&["p", "q"]), &Bounds::new(0, 0, 2), 1, 0).unwrap();
        let w = frag
            .world_index(&World::new(Base::new([rule(&[], "p"), rule(&[], "q")]), []))
            .unwrap();
        let c = interp_coproduct(&f("p | q"), &frag).unwrap();
        assert_eq!(c.len_at(w), 2);
        let e = frag.world_index(&World::new(Base::empty(), [])).unwrap();
        assert_eq!(c.len_at(e), 0);
        assert!(c.check_functoriality(&frag));
    }

    #[test]
    fn disjunction_support() {
        let frag = closed_worlds();
        let p = interp(&f("p"), &frag).unwrap();
        let pi = interp(&f("q -> p"), &frag).unwrap();
        assert!(supports_disjunction_check(&frag, &p, &pi, &terminal(&frag)).unwrap());
        for chi in ["p", "q", "p -> q", "p & q", "p | q", "bot"] {
            let c = interp(&f(chi), &frag).unwrap();
            assert!(supports_disjunction_check(&frag, &p, &pi, &c).unwrap(), "{chi}");
        }
        let pp = interp(&f("p & p"), &frag).unwrap();
        let prod = product(&frag, &[&p, &pp], "p×(p∧p)".into());
        assert!(supports_disjunction_check(&frag, &p, &pi, &prod).unwrap());
        // 0 is not the meaning of any formula: σ(0, 0) × 1 × 1 is ⟦⊥⟧, which is
        // inhabited wherever every atom is derivable
        let frag = build_fragment(&Base::empty(), &atom_set(&["p", "q"]), &Bounds::new(0, 0, 2), 1, 0).unwrap();
        let zero = initial(&frag);
        assert!(!supports_disjunction_check(&frag, &zero, &zero, &zero).unwrap());
    }

    #[test]
    fn completeness_instance() {
        let b = Base::new([rule(&[(&[], "p")], "q")]);
        let frag = Fragment::from_bases(std::slice::from_ref(&b), &atom_set(&["p", "q"]), 2, 1, |_| true).unwrap();
        let dp = interp(&f("p"), &frag).unwrap();
        let dq = interp(&f("q"), &frag).unwrap();
        let eta = find_nat(&frag, &dp, &dq, SearchCaps::default()).unwrap().unwrap();
        let w = frag.world_index(&World::new(b.clone(), [a("p")])).unwrap();
        let x = dp.find(w, &Element::Deriv(DerivTerm::Var(0))).unwrap();
        let Element::Deriv(t) = &dq.elements(w)[eta.components[w][x as usize] as usize] else { panic!() };
        assert!(basecalc::check_derivation(&b, &frag.worlds()[w].var_context(), t, &a("q")));
    }

    #[test]
    fn strong_disjunction_small() {
        let exp = strong_disjunction_experiment(&atom_set(&["p", "q", "r"]), &Bounds::new(1, 0, 1), 2, 0).unwrap();
        assert!(exp.passed(), "{:?}", exp.to_json());
        assert!(exp.worlds >= 3);
        let deg = strong_disjunction_experiment(&atom_set(&["p"]), &Bounds::new(1, 0, 1), 2, 0).unwrap();
        assert!(deg.degenerate && deg.constructed.is_ok() && deg.natural);
        assert_eq!(deg.second_order_count, Ok(1));
    }
}
