//! The nucleus K on a small poset and on the poset of bases, with
//! Sandqvist's disjunction as the join of closed upsets.

use std::collections::BTreeMap;

use catbes::basecalc::{atom_set, Bounds};
use catbes::locale::{bes_poset, AtomInterp, NucleusOp, Poset};
use catbes::parse_formula;

fn main() {
    // w0 below w1 and w2
    let ps = Poset::new(vec!["w0".into(), "w1".into(), "w2".into()], &[(0, 1), (0, 2)]).unwrap();
    let mut map = BTreeMap::new();
    map.insert("p".parse().unwrap(), ps.upset([1]).unwrap());
    map.insert("q".parse().unwrap(), ps.upset([2]).unwrap());
    let interp = AtomInterp::new(&ps, map).unwrap();
    let k = NucleusOp::new(&ps, &interp).unwrap();
    for s in ["p", "q", "p | q", "p -> q", "bot", "~~p"] {
        let phi = catbes::syntax::parse_formula_with_negation(s).unwrap();
        println!("vsem({s}) = {:?}", ps.render(&k.vsem(&phi).unwrap()));
    }
    let closed = k.omega_k().unwrap();
    println!("closed upsets: {:?}", closed.iter().map(|u| ps.render(u)).collect::<Vec<_>>());

    let bp = bes_poset(&atom_set(&["p", "q"]), &Bounds::new(1, 0, 1)).unwrap();
    let k = NucleusOp::new(&bp.poset, &bp.interp).unwrap();
    let joined = k.vsem(&parse_formula("p | q").unwrap()).unwrap();
    println!("\nbases over {{p,q}} with one rule: {}", bp.bases.len());
    println!("bases validating p | q: {:?}", bp.poset.render(&joined));
}
