//! Base-extension semantics for intuitionistic propositional logic.
//!
//! The crate covers atomic bases and derivations in them ([`basecalc`]),
//! natural deduction with a decision procedure ([`nj`]), validity in bases
//! and the flattening pipeline ([`bes`]), a finite fragment of the presheaf
//! interpretation over worlds `(base, context)` ([`category`]), and the
//! nucleus/locale reading of validity on finite posets ([`locale`]).

pub mod basecalc;
pub mod bes;
pub mod category;
pub mod cli;
pub mod corpus;
pub mod locale;
pub mod nj;
pub mod schema;
pub mod syntax;

pub use syntax::{parse_formula, render_formula, Atom, Formula, FormulaSet, Sequent};
