//! Atomic bases: saturation, derivation terms, and substitution.

use std::sync::Arc;

use catbes::basecalc::{
    atom_set, check_derivation, enumerate_extensions, rule, saturate, substitute, Base, Bounds, DerivTerm, VarContext,
};

fn main() {
    // (p => q) => r, and => p
    let discharge = Arc::new(rule(&[(&["p"], "q")], "r"));
    let base = Base::new([(*discharge).clone(), rule(&[], "p")]);
    let u = atom_set(&["p", "q", "r"]);
    let table = saturate(&base, &u).unwrap();
    println!("base {base}");
    for (ctx, atom, term) in table.entries().into_iter().filter(|(c, _, _)| c.len() <= 1) {
        let names: Vec<&str> = ctx.iter().map(|a| a.name()).collect();
        let vc = VarContext::from_atoms(&ctx);
        println!("  {{{}}} |- {atom}   by {}", names.join(","), term.display_in(&vc));
    }

    // x:q |- [(p => q) => r](y:p. x) : r, then substitute a derivation of q for x
    let q_ctx = VarContext::from_atoms(&atom_set(&["q"]));
    let psi = DerivTerm::app(discharge.clone(), vec![DerivTerm::Var(1)]);
    let r = "r".parse().unwrap();
    assert!(check_derivation(&base, &q_ctx, &psi, &r));
    let q_from_p = Arc::new(rule(&[(&[], "p")], "q"));
    let bigger = base.with_rule((*q_from_p).clone());
    let phi = DerivTerm::app(q_from_p, vec![DerivTerm::app(Arc::new(rule(&[], "p")), vec![])]);
    let closed = substitute(&psi, &[phi]);
    println!("\nsubstituted: {}", closed.display_in(&VarContext::default()));
    assert!(check_derivation(&bigger, &VarContext::default(), &closed, &r));

    let n = enumerate_extensions(&Base::empty(), &atom_set(&["p", "q"]), &Bounds::new(1, 1, 2)).unwrap().count();
    println!("\nextensions of the empty base over {{p,q}} with at most 2 rules: {n}");
}
