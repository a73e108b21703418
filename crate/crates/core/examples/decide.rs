//! Decides a few sequents, printing a proof term or a Kripke countermodel,
//! and normalizes a proof with a detour.
//!
//! `cargo run --example decide -- "p | q |- q | p"` decides a sequent of your own.

use catbes::nj::{check_nj, decide, has_detour, normalize, Decision, NJTerm};
use catbes::{parse_formula, Sequent};

fn main() {
    let inputs: Vec<String> = std::env::args().skip(1).collect();
    let defaults = ["p & q |- q & p", "|- ((p -> q) -> p) -> p", "p -> q | r |- (p -> q) | (p -> r)"];
    let sequents: Vec<String> = if inputs.is_empty() { defaults.map(String::from).to_vec() } else { inputs };
    for text in sequents {
        let s = Sequent::parse_with_negation(&text).expect("sequent");
        match decide(&s.hyps, &s.goal).expect("decision") {
            Decision::Derivable(t) => println!("{s}\n  derivable: {t}"),
            Decision::Underivable { model, world } => {
                println!("{s}\n  underivable, refuted at w{world} of {}", model.to_json())
            }
        }
    }

    let p = parse_formula("p").unwrap();
    let id = NJTerm::lam("x", p.clone(), NJTerm::var("x"));
    let redex = NJTerm::fst(NJTerm::pair(NJTerm::app(id, NJTerm::var("y")), NJTerm::var("y")));
    let ctx = vec![("y".to_string(), p.clone())];
    let nf = normalize(&redex);
    println!("\n{redex}  ~>  {nf}");
    println!("detour before: {}, after: {}", has_detour(&redex), has_detour(&nf));
    assert!(check_nj(&ctx, &nf, &p));
}
