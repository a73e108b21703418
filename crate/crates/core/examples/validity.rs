//! Brute-force validity in both semantics modes, and the prover-backed engine.

use catbes::basecalc::{AtomSet, Bounds};
use catbes::bes::{valid, SemanticsMode, ValidityConfig};
use catbes::{parse_formula, FormulaSet};

fn main() {
    let gamma: FormulaSet = [parse_formula("p -> q | r").unwrap()].into_iter().collect();
    let phi = parse_formula("(p -> q) | (p -> r)").unwrap();
    let universe: AtomSet = ["p", "q", "r"].iter().map(|s| s.parse().unwrap()).collect();
    let bounds = Bounds::new(2, 1, 2);

    for mode in [SemanticsMode::KripkeDisjunction, SemanticsMode::Sandqvist] {
        let cfg = ValidityConfig::brute(universe.clone(), bounds, mode);
        let report = valid(&gamma, &phi, &cfg).unwrap();
        println!("{} brute force: {}", mode.label(), serde_json::to_string_pretty(&report.to_json()).unwrap());
    }
    let report = valid(&gamma, &phi, &ValidityConfig::prover()).unwrap();
    println!("prover: {}", serde_json::to_string_pretty(&report.to_json()).unwrap());
}
