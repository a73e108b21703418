//! The strong disjunction rule `p ⊃ (q ∨ r) / (p ⊃ q) ∨ (p ⊃ r)` read in
//! the presheaf model, with disjunction as coproduct and as the
//! second-order encoding.

use catbes::basecalc::{AtomSet, Bounds};
use catbes::category::strong_disjunction_experiment;

fn main() {
    let universe: AtomSet = ["p", "q", "r"].iter().map(|s| s.parse().unwrap()).collect();
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let (prem, hyps, rules, depth, ctx) = match args[..] {
        [a, b, c, d, e] => (a, b, c, d, e),
        _ => (1, 0, 1, 2, 0),
    };
    let report = strong_disjunction_experiment(&universe, &Bounds::new(prem, hyps, rules), depth, ctx).unwrap();
    println!("{}", serde_json::to_string_pretty(&report.to_json()).unwrap());
}
