//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use catbes::basecalc::{
    atom_set, candidate_rules, check_derivation_atoms, enumerate_extensions, sample_derivation, saturate,
    substitute, AtomSet, Base, Bounds, DerivTerm,
};
use catbes::bes::{
    self, completeness_check, consequence_from_validity, Evaluator, FiniteRelation, SemanticsMode, ValidityConfig,
    WorldSet,
};
use catbes::category::{self, DisjunctionStyle, Interpreter};
use catbes::corpus::corpus;
use catbes::locale::{bes_poset, AtomInterp, NucleusOp, Poset, Upset};
use catbes::nj::{self, check_nj, has_detour, normalize, random_formula, random_term};
use catbes::{parse_formula, Atom, Formula, FormulaSet};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn atoms(names: &[&str]) -> Vec<Atom> {
    names.iter().map(|n| Atom::new(n).unwrap()).collect()
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 substitution lemmas", substitution_lemmas),
        ("2 saturation vs enumeration", saturation_vs_enumeration),
        ("3 completeness pipeline", completeness_pipeline),
        ("4 decision honesty", decision_honesty),
        ("5 normalization", normalization),
        ("6 disjunction discriminator", disjunction_discriminator),
        ("7 category laws", category_laws),
        ("8 nucleus and sublocale", nucleus_and_sublocale),
        ("9 sandqvist join is K-join", sandqvist_join),
        ("10 consequence relations", consequence_relations),
        ("11 soundness sampling", soundness_sampling),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(&format!("{o} "))) {
            continue;
        }
        let t = Instant::now();
        let out = run();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS {name} ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Random triples Ψ (in C), σ₂ (C's atoms in B), σ₁ (B's atoms in A):
/// substitution preserves derivability and composes associatively.
fn substitution_lemmas() -> Outcome {
    let u = atom_set(&["p", "q", "r"]);
    let cands = candidate_rules(&u, &Bounds::new(2, 1, 1)).unwrap();
    let all: Vec<Atom> = u.iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut done = 0;
    let mut tries = 0;
    let mut failures = Vec::new();
    while done < 1000 {
        tries += 1;
        if tries > 200_000 {
            return Err(format!("only {done} triples generated"));
        }
        let k = rng.gen_range(2..7);
        let mut rules: Vec<_> = cands.choose_multiple(&mut rng, k).cloned().collect();
        rules.push(catbes::basecalc::AtomicRule::axiom(all.choose(&mut rng).unwrap().clone()));
        let base = Base::new(rules);
        let ctx = |rng: &mut ChaCha8Rng, lo: usize| -> Vec<Atom> {
            let n = rng.gen_range(lo..3);
            (0..n).map(|_| all.choose(rng).unwrap().clone()).collect()
        };
        let a = ctx(&mut rng, 0);
        let b = ctx(&mut rng, 1);
        let c = ctx(&mut rng, 1);
        let sigma = |from: &[Atom], to: &[Atom], rng: &mut ChaCha8Rng| -> Option<Vec<DerivTerm>> {
            to.iter()
                .rev()
                .map(|q| sample_derivation(&base, from, q, 3, rng))
                .collect()
        };
        let (Some(s1), Some(s2)) = (sigma(&a, &b, &mut rng), sigma(&b, &c, &mut rng)) else {
            continue;
        };
        let goal = all.choose(&mut rng).unwrap().clone();
        let Some(psi) = sample_derivation(&base, &c, &goal, 3, &mut rng) else {
            continue;
        };
        done += 1;
        let step = substitute(&psi, &s2);
        let left = substitute(&step, &s1);
        let composed: Vec<DerivTerm> = s2.iter().map(|t| substitute(t, &s1)).collect();
        let right = substitute(&psi, &composed);
        let ok = check_derivation_atoms(&base, &b, &step, &goal)
            && check_derivation_atoms(&base, &a, &left, &goal)
            && composed.iter().zip(c.iter().rev()).all(|(t, q)| check_derivation_atoms(&base, &a, t, q))
            && left == right;
        if !ok && failures.len() < 3 {
            failures.push(format!("{base}"));
        }
    }
    if failures.is_empty() {
        Ok(format!("{done} triples, 0 failures"))
    } else {
        Err(format!("failures in bases {}", failures.join("; ")))
    }
}

/// Atoms derivable from each context with derivations of depth ≤ `depth`,
/// computed layer by layer.
fn layered(rules: &[(Vec<(u64, u32)>, u32)], n: usize, depth: usize) -> Vec<u64> {
    let size = 1usize << n;
    let mut d: Vec<u64> = (0..size as u64).collect();
    for _ in 0..depth {
        let prev = d.clone();
        for (m, slot) in d.iter_mut().enumerate() {
            for (prems, concl) in rules {
                if prems.iter().all(|&(h, q)| prev[m | h as usize] >> q & 1 == 1) {
                    *slot |= 1 << concl;
                }
            }
        }
    }
    d
}

fn saturation_vs_enumeration() -> Outcome {
    let u = atom_set(&["p", "q", "r"]);
    let index: Vec<Atom> = u.iter().cloned().collect();
    let pos = |a: &Atom| index.iter().position(|b| b == a).unwrap() as u32;
    let mask = |s: &AtomSet| s.iter().fold(0u64, |m, a| m | 1 << pos(a));
    let contexts: Vec<AtomSet> = (0..8u64)
        .map(|m| index.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, a)| a.clone()).collect())
        .collect();
    let mut bases = 0u64;
    let mut discrepancies = 0u64;
    let mut first = None;
    for base in enumerate_extensions(&Base::empty(), &u, &Bounds::new(2, 1, 4)).map_err(|e| e.to_string())? {
        bases += 1;
        let rules: Vec<(Vec<(u64, u32)>, u32)> = base
            .rules()
            .iter()
            .map(|r| (r.premises().iter().map(|p| (mask(&p.hyps), pos(&p.concl))).collect(), pos(r.conclusion())))
            .collect();
        let oracle = layered(&rules, 3, 6);
        let table = saturate(&base, &u).map_err(|e| e.to_string())?;
        for (m, p) in contexts.iter().enumerate() {
            if mask(&table.derivable_atoms(p)) != oracle[m] {
                discrepancies += 1;
                first.get_or_insert_with(|| format!("{base} at {p:?}"));
            }
        }
    }
    match first {
        None => Ok(format!("{bases} bases, 0 discrepancies")),
        Some(ex) => Err(format!("{discrepancies} discrepancies over {bases} bases, first: {ex}")),
    }
}

fn completeness_pipeline() -> Outcome {
    let t = Instant::now();
    let mut bad = Vec::new();
    for (s, expected) in corpus() {
        let r = completeness_check(&s.hyps, &s.goal).map_err(|e| format!("{s}: {e}"))?;
        if !r.agree() || r.base_side() != expected {
            bad.push(s.to_string());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    if !bad.is_empty() {
        return Err(format!("disagreement on {}", bad.join("; ")));
    }
    if secs >= 60.0 {
        return Err(format!("took {secs:.1}s"));
    }
    Ok("30/30 agree".into())
}

fn random_sequent(rng: &mut ChaCha8Rng) -> (FormulaSet, Formula) {
    let pool = atoms(&["p", "q", "r"]);
    let n = rng.gen_range(1..=3);
    let used = &pool[..n];
    let hyps: FormulaSet = (0..rng.gen_range(0..3)).map(|_| random_formula(used, 2, rng)).collect();
    (hyps, random_formula(used, 3, rng))
}

fn decision_honesty() -> Outcome {
    let mut cases: Vec<(FormulaSet, Formula)> = corpus().into_iter().map(|(s, _)| (s.hyps, s.goal)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    cases.extend((0..500).map(|_| random_sequent(&mut rng)));
    let (mut yes, mut no) = (0, 0);
    for (g, phi) in &cases {
        let d = nj::decide(g, phi).map_err(|e| format!("{phi}: {e}"))?;
        if !d.verify(g, phi) {
            return Err(format!("uncertified verdict for {phi}"));
        }
        if d.is_derivable() {
            yes += 1;
        } else {
            no += 1;
        }
    }
    Ok(format!("{} sequents certified ({yes} derivable, {no} underivable)", cases.len()))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pool = atoms(&["p", "q", "r"]);
    let (mut done, mut with_detours) = (0, 0);
    let mut tries = 0;
    while done < 500 {
        tries += 1;
        if tries > 100_000 {
            return Err(format!("only {done} terms generated"));
        }
        let mut ctx = vec![("h0".to_string(), Formula::Bot)];
        for i in 1..=rng.gen_range(0..3) {
            ctx.push((format!("h{i}"), random_formula(&pool, 2, &mut rng)));
        }
        let ty = random_formula(&pool, 2, &mut rng);
        let Some(t) = random_term(&ctx, &ty, 4, &mut rng) else {
            continue;
        };
        if !check_nj(&ctx, &t, &ty) {
            return Err(format!("generator produced an ill-typed term {t}"));
        }
        done += 1;
        with_detours += has_detour(&t) as usize;
        let n = normalize(&t);
        if !check_nj(&ctx, &n, &ty) {
            return Err(format!("subject reduction fails for {t}"));
        }
        if has_detour(&n) {
            return Err(format!("normal form {n} of {t} has a detour"));
        }
    }
    Ok(format!("{done} terms ({with_detours} with detours) normalize"))
}

fn disjunction_discriminator() -> Outcome {
    let gamma = FormulaSet::singleton(f("p -> q | r"));
    let phi = f("(p -> q) | (p -> r)");
    let u = atom_set(&["p", "q", "r"]);
    let bounds = Bounds::new(2, 1, 2);
    let kripke = bes::valid(&gamma, &phi, &ValidityConfig::brute(u.clone(), bounds, SemanticsMode::KripkeDisjunction))
        .map_err(|e| e.to_string())?;
    let sandqvist = bes::valid(&gamma, &phi, &ValidityConfig::prover()).map_err(|e| e.to_string())?;
    let exp = category::strong_disjunction_experiment(&u, &Bounds::new(1, 0, 1), 2, 0).map_err(|e| e.to_string())?;
    let msg = format!(
        "kripke brute {}, sandqvist prover {}, coproduct construction on {} worlds: constructed {}, natural {}",
        kripke.verdict,
        sandqvist.verdict,
        exp.worlds,
        exp.constructed.is_ok(),
        exp.natural
    );
    if kripke.verdict && !sandqvist.verdict && exp.passed() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn category_laws() -> Outcome {
    let configs: Vec<(Base, Vec<&str>, Bounds, usize, usize)> = vec![
        (Base::empty(), vec!["p"], Bounds::new(0, 0, 1), 1, 1),
        (Base::empty(), vec!["p"], Bounds::new(1, 0, 1), 2, 0),
        (Base::empty(), vec!["p"], Bounds::new(1, 1, 1), 2, 1),
        (Base::empty(), vec!["p", "q"], Bounds::new(0, 0, 2), 1, 1),
        (Base::empty(), vec!["p", "q"], Bounds::new(1, 0, 1), 2, 0),
        (Base::empty(), vec!["p", "q"], Bounds::new(1, 1, 1), 2, 0),
        (Base::new([catbes::basecalc::rule(&[], "p")]), vec!["p", "q"], Bounds::new(1, 0, 1), 2, 1),
        (Base::new([catbes::basecalc::rule(&[(&[], "p")], "q")]), vec!["p", "q"], Bounds::new(1, 0, 1), 2, 1),
    ];
    let formulas = ["p", "p & p", "p -> p", "p | p", "bot", "(p -> p) -> p"];
    let formulas_pq = ["q", "p & q", "p -> q", "p | q", "q -> p | q", "(p -> q) -> q"];
    let (mut checked, mut denotations) = (0, 0);
    let mut refused = Vec::new();
    for (base, names, bounds, depth, ctx) in configs {
        let u = atom_set(&names);
        let frag = category::build_fragment(&base, &u, &bounds, depth, ctx).map_err(|e| e.to_string())?;
        if frag.morphisms().len() > 50 {
            continue;
        }
        checked += 1;
        if !frag.check_morphisms() || !frag.check_category_laws() {
            return Err(format!("laws fail on fragment over {base} {names:?} {bounds}"));
        }
        let mut interp = Interpreter::new(&frag, DisjunctionStyle::SecondOrder);
        let list: Vec<&str> = if names.len() > 1 { formulas.iter().chain(&formulas_pq).copied().collect() } else { formulas.to_vec() };
        for s in list {
            let d = match interp.denote(&f(s)) {
                Ok(d) => d,
                Err(e) if e.is_cap() => {
                    refused.push(format!("{s} on {} worlds/{} morphisms", frag.worlds().len(), frag.morphisms().len()));
                    continue;
                }
                Err(e) => return Err(format!("{s} over {base} {names:?}: {e}")),
            };
            if !d.check_functoriality(&frag) {
                return Err(format!("[[{s}]] not functorial over {base} {names:?}"));
            }
            denotations += 1;
        }
    }
    if checked < 3 {
        return Err(format!("only {checked} fragments within 50 morphisms"));
    }
    let mut msg = format!("{checked} fragments, {denotations} denotations functorial");
    if !refused.is_empty() {
        msg += &format!("; {} refused by the transformation cap: {}", refused.len(), refused.join(", "));
    }
    Ok(msg)
}

fn nucleus_and_sublocale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pool = atoms(&["p", "q", "r"]);
    let mut checks = 0u64;
    for inst in 0..50 {
        let ps = Poset::random(rng.gen_range(1..=5), &mut rng);
        let interp = AtomInterp::random(&ps, &pool[..rng.gen_range(1..=3)], &mut rng);
        let k = NucleusOp::new(&ps, &interp).map_err(|e| e.to_string())?;
        let err = |what: &str| Err(format!("instance {inst}: {what}"));
        let ups = ps.all_upsets().map_err(|e| e.to_string())?;
        let kk: Vec<Upset> = ups.iter().map(|u| k.apply(u).unwrap()).collect();
        let closed: Vec<&Upset> = ups.iter().zip(&kk).filter(|(u, ku)| u == ku).map(|(u, _)| u).collect();
        for (i, u) in ups.iter().enumerate() {
            if !u.is_subset(&kk[i]) {
                return err("U not below KU");
            }
            if k.apply(&kk[i]).unwrap() != kk[i] {
                return err("K not idempotent");
            }
            for (j, v) in ups.iter().enumerate() {
                let m = ps.meet(u, v).unwrap();
                if k.apply(&m).unwrap() != ps.meet(&kk[i], &kk[j]).unwrap() {
                    return err("K does not preserve meets");
                }
                checks += 1;
            }
        }
        for (_, vp) in interp.iter() {
            if !k.is_closed(vp).unwrap() {
                return err("atom not closed");
            }
        }
        if !k.is_closed(&ps.top()).unwrap() {
            return err("top not closed");
        }
        for a in &closed {
            for b in &closed {
                if !k.is_closed(&ps.meet(a, b).unwrap()).unwrap() {
                    return err("meet of closed not closed");
                }
            }
            for w in &ups {
                if !k.is_closed(&ps.implies(w, a).unwrap()).unwrap() {
                    return err("W -> closed not closed");
                }
            }
        }
        if closed.len() <= 12 {
            for sub in 0u32..1 << closed.len() {
                let mut acc = ps.top();
                for (i, c) in closed.iter().enumerate() {
                    if sub >> i & 1 == 1 {
                        acc = ps.meet(&acc, c).unwrap();
                    }
                }
                if !k.is_closed(&acc).unwrap() {
                    return err("meet of a family of closed not closed");
                }
            }
        }
        for u in &ups {
            for v in &ups {
                let j = k.join_k(u, v).unwrap();
                let join = ps.join(u, v).unwrap();
                let mut least = ps.top();
                for c in closed.iter().filter(|c| join.is_subset(c)) {
                    least = ps.meet(&least, c).unwrap();
                }
                if !k.is_closed(&j).unwrap() || !join.is_subset(&j) || j != least {
                    return err("join_K is not the least closed upper bound");
                }
            }
        }
    }
    Ok(format!("50 posets, {checks} nucleus checks, 0 failures"))
}

/// vsem(p∨q) against Sandqvist's clause evaluated directly on the same bases.
fn sandqvist_join() -> Outcome {
    let instances: [(&[&str], Bounds); 10] = [
        (&["p"], Bounds::new(0, 0, 1)),
        (&["p"], Bounds::new(1, 0, 1)),
        (&["p"], Bounds::new(1, 1, 1)),
        (&["p"], Bounds::new(1, 0, 2)),
        (&["p"], Bounds::new(1, 1, 2)),
        (&["p", "q"], Bounds::new(0, 0, 1)),
        (&["p", "q"], Bounds::new(0, 0, 2)),
        (&["p", "q"], Bounds::new(1, 0, 1)),
        (&["p", "q"], Bounds::new(1, 1, 1)),
        (&["p", "q"], Bounds::new(1, 0, 2)),
    ];
    let mut compared = 0;
    for (names, bounds) in instances {
        let u = atom_set(names);
        let bp = bes_poset(&u, &bounds).map_err(|e| e.to_string())?;
        let k = NucleusOp::new(&bp.poset, &bp.interp).map_err(|e| e.to_string())?;
        let ws = WorldSet::new(&Base::empty(), &u, &bounds).map_err(|e| e.to_string())?;
        let mut ev = Evaluator::new(&ws, SemanticsMode::Sandqvist);
        for a in &u {
            for b in &u {
                let phi = Formula::disj(Formula::Atom(a.clone()), Formula::Atom(b.clone()));
                let joined = k
                    .join_k(bp.interp.get(a).unwrap(), bp.interp.get(b).unwrap())
                    .map_err(|e| e.to_string())?;
                if k.vsem(&phi).map_err(|e| e.to_string())? != joined {
                    return Err(format!("vsem({phi}) differs from join_K on {names:?} {bounds}"));
                }
                for (i, base) in bp.bases.iter().enumerate() {
                    let w = ws.world_of(base).ok_or("base missing from world set")?;
                    if ev.holds(w, &phi) != joined.contains(i) {
                        return Err(format!("{phi} at {base}: Sandqvist clause and join_K differ ({names:?} {bounds})"));
                    }
                    compared += 1;
                }
            }
        }
    }
    Ok(format!("10 instances, {compared} base/pair comparisons agree"))
}

fn consequence_relations() -> Outcome {
    let universe: Vec<Formula> = ["p", "q", "p -> p", "p | q", "p & q -> p", "bot"].iter().map(|s| f(s)).collect();
    let theorem = |g: &FormulaSet, phi: &Formula| nj::prove(g, phi).is_some();
    let rel = FiniteRelation::from_validity(universe.clone(), |phi| theorem(&FormulaSet::new(), phi));
    if !(rel.is_reflexive() && rel.is_monotone() && rel.has_cut()) {
        return Err("generated relation is not a consequence relation".into());
    }
    let mut closed = rel.clone();
    closed.close();
    if closed != rel {
        return Err("generated relation is not closed".into());
    }
    for ante in rel.antecedents() {
        let gamma: FormulaSet = (0..universe.len()).filter(|i| ante >> i & 1 == 1).map(|i| universe[i].clone()).collect();
        for (i, phi) in universe.iter().enumerate() {
            if rel.holds(ante, i) != consequence_from_validity(theorem, &gamma, phi) {
                return Err(format!("table differs from consequence_from_validity at {phi}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut sampled, mut tries) = (0, 0);
    while sampled < 200 {
        tries += 1;
        if tries > 100_000 {
            return Err(format!("only {sampled} compatible relations sampled"));
        }
        let mut r = FiniteRelation::empty(universe.clone());
        for i in 0..universe.len() {
            if rel.theorems() >> i & 1 == 1 {
                r.insert(0, i);
            }
        }
        for _ in 0..rng.gen_range(1..12) {
            r.insert(rng.gen_range(1..1u32 << universe.len()), rng.gen_range(0..universe.len()));
        }
        r.close();
        if r.theorems() != rel.theorems() {
            continue;
        }
        sampled += 1;
        if !r.is_subset(&rel) {
            return Err("a compatible relation is not contained in the generated one".into());
        }
    }
    Ok(format!("axioms hold exhaustively; {sampled} compatible relations contained"))
}

fn soundness_sampling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bounds = Bounds::new(2, 1, 2);
    let mut seen = BTreeSet::new();
    let (mut valid, mut findings) = (0, Vec::new());
    let mut tries = 0;
    while seen.len() < 100 {
        tries += 1;
        if tries > 100_000 {
            return Err(format!("only {} derivable sequents generated", seen.len()));
        }
        let (g, phi) = random_sequent(&mut rng);
        let s = catbes::Sequent { hyps: g, goal: phi };
        if s.atoms().is_empty() || seen.contains(&s.to_string()) || nj::prove(&s.hyps, &s.goal).is_none() {
            continue;
        }
        seen.insert(s.to_string());
        let cfg = ValidityConfig::brute(s.atoms(), bounds, SemanticsMode::Sandqvist);
        let r = bes::valid(&s.hyps, &s.goal, &cfg).map_err(|e| format!("{s}: {e}"))?;
        if r.verdict {
            valid += 1;
            continue;
        }
        let Some(w) = &r.witness else {
            return Err(format!("{s}: refuted without a witness"));
        };
        let ws = WorldSet::new(&Base::empty(), &cfg.universe, &cfg.bounds).map_err(|e| e.to_string())?;
        if !Evaluator::new(&ws, cfg.mode).recheck(w).map_err(|e| e.to_string())? {
            return Err(format!("{s}: witness does not re-validate"));
        }
        findings.push(format!("{s} refuted by {}", w.to_json()));
    }
    for fnd in &findings {
        println!("  bound-sensitivity finding: {fnd}");
    }
    if findings.is_empty() {
        Ok(format!("{valid}/100 derivable sequents valid"))
    } else {
        Err(format!("{valid}/100 valid; {} bound-sensitivity findings (witnesses re-validate)", findings.len()))
    }
}
