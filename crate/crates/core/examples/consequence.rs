//! The consequence relation generated from NJ theoremhood on a small set of
//! formulas, and its closure properties.

use catbes::bes::{consequence_from_validity, FiniteRelation};
use catbes::nj::prove;
use catbes::{parse_formula, Formula, FormulaSet};

fn main() {
    let universe: Vec<Formula> = ["p", "p -> p", "p | q", "q -> p | q"].iter().map(|s| parse_formula(s).unwrap()).collect();
    let theorem = |g: &FormulaSet, phi: &Formula| prove(g, phi).is_some();
    let rel = FiniteRelation::from_validity(universe.clone(), |phi| theorem(&FormulaSet::new(), phi));
    println!(
        "reflexive {}, monotone {}, cut {}",
        rel.is_reflexive(),
        rel.is_monotone(),
        rel.has_cut()
    );
    for (i, phi) in universe.iter().enumerate() {
        println!("|~ {phi}: {}", rel.holds(0, i));
    }
    let gamma = FormulaSet::singleton(parse_formula("p -> p").unwrap());
    let p = parse_formula("p").unwrap();
    println!("p -> p |~ p: {}", consequence_from_validity(theorem, &gamma, &p));
    let gamma = FormulaSet::singleton(p.clone());
    println!("p |~ q: {}", consequence_from_validity(theorem, &gamma, &parse_formula("q").unwrap()));
}
