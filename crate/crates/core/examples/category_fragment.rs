//! A fragment of the category of worlds and the presheaf denotations of a
//! few formulas over it.

use catbes::basecalc::{atom_set, Base, Bounds};
use catbes::category::{build_fragment, DisjunctionStyle, Interpreter};
use catbes::parse_formula;

fn main() {
    let frag = build_fragment(&Base::empty(), &atom_set(&["p", "q"]), &Bounds::new(1, 0, 1), 2, 1).unwrap();
    println!(
        "{} worlds, {} morphisms, {} excluded, category laws hold: {}",
        frag.worlds().len(),
        frag.morphisms().len(),
        frag.excluded(),
        frag.check_category_laws()
    );
    for w in frag.worlds() {
        println!("  {w}");
    }
    let mut interp = Interpreter::new(&frag, DisjunctionStyle::SecondOrder);
    let mut coproduct = Interpreter::new(&frag, DisjunctionStyle::Coproduct);
    for s in ["p", "p & q", "p -> q", "q -> q", "bot"] {
        let d = interp.denote(&parse_formula(s).unwrap()).unwrap();
        println!("[[{s}]] sizes {:?}, functorial {}", d.cardinalities(), d.check_functoriality(&frag));
    }
    let d = coproduct.denote(&parse_formula("p | q").unwrap()).unwrap();
    println!("[[p | q]] as a coproduct: sizes {:?}", d.cardinalities());
}
