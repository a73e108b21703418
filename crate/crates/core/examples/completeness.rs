//! Flattening a sequent, building the base N, and comparing derivability in
//! N with the NJ verdict over the sequent corpus.

use catbes::bes::{build_n, completeness_check, flatten};
use catbes::corpus::corpus;
use catbes::syntax::subformulas;
use catbes::Sequent;

fn main() {
    let s = Sequent::parse("p | q |- q | p").unwrap();
    let mut all = s.hyps.clone();
    all.insert(s.goal.clone());
    let fm = flatten(&subformulas(&all)).unwrap();
    for f in fm.domain() {
        println!("{} = {f}", fm.flat(f).unwrap());
    }
    let n = build_n(&fm);
    println!("N has {} rules:", n.len());
    for r in n.rules() {
        println!("  {r}");
    }

    println!();
    let mut agree = 0;
    for (s, _) in corpus() {
        let r = completeness_check(&s.hyps, &s.goal).unwrap();
        agree += r.agree() as usize;
        println!("{:<48} N: {:<5} NJ: {}", s.to_string(), r.base_side(), r.prover_side());
    }
    println!("agreement on {agree}/30");
}
