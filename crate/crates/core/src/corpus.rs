//! A fixed set of thirty sequents, half derivable and half not, used by the
//! tests, the examples and the acceptance run.

use crate::syntax::Sequent;

const DERIVABLE: [&str; 15] = [
    "p |- p",
    "p & q |- q",
    "p & q |- q & p",
    "p | q |- q | p",
    "p, p -> q |- q",
    "|- p -> p",
    "|- (p -> q) -> (q -> r) -> p -> r",
    "p -> q, q -> r |- p -> r",
    "|- p -> q -> p",
    "p | q, p -> r, q -> r |- r",
    "|- (((p -> bot) -> bot) -> bot) -> p -> bot",
    "|- (p | q -> r) -> (p -> r) & (q -> r)",
    "p & (q | r) |- p & q | p & r",
    "bot |- p",
    "|- ((p | (p -> bot)) -> bot) -> bot",
];

const UNDERIVABLE: [&str; 15] = [
    "|- ((p -> q) -> p) -> p",
    "|- p | (p -> bot)",
    "(p -> bot) -> bot |- p",
    "p -> q | r |- (p -> q) | (p -> r)",
    "|- (p -> q) | (q -> p)",
    "p | q |- p",
    "p -> q |- q -> p",
    "|- p",
    "p -> q |- q",
    "(p -> q) -> q |- p | q",
    "|- (p -> bot) | ((p -> bot) -> bot)",
    "p & q -> r |- (p -> r) | (q -> r)",
    "p -> q |- (p -> bot) | q",
    "q |- p & q",
    "(p -> q) -> r, q -> r |- p | r",
];

/// The corpus with the expected derivability of each sequent.
pub fn corpus() -> Vec<(Sequent, bool)> {
    DERIVABLE
        .iter()
        .map(|s| (s, true))
        .chain(UNDERIVABLE.iter().map(|s| (s, false)))
        .map(|(s, d)| (Sequent::parse(s).expect("corpus sequent parses"), d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nj::decide;

    #[test]
    fn corpus_classification_is_certified() {
        let c = corpus();
        assert_eq!(c.len(), 30);
        for (s, expected) in c {
            let d = decide(&s.hyps, &s.goal).unwrap();
            assert_eq!(d.is_derivable(), expected, "{s}");
            assert!(d.verify(&s.hyps, &s.goal), "{s}");
        }
    }
}
