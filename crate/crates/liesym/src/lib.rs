//! Exact symbolic engine for Lie point symmetry analysis of ODEs and PDEs.
//!
//! The crate provides an exact-arithmetic expression kernel (`expr`), jet-space
//! bookkeeping and total derivatives (`jet`), vector fields and prolongation
//! (`vfield`), determining-system generation and solving (`detsys`), exact
//! rational linear algebra (`linsolve`), Lie algebra structure analysis
//! (`algebra`), differential invariant counting and linearization tests
//! (`invariants`), a small problem-file parser (`parse`), and the `liesym`
//! command line interface (`cli`).

pub mod algebra;
pub mod cli;
pub mod detsys;
pub mod expr;
pub mod invariants;
pub mod jet;
pub mod linsolve;
pub mod parse;
pub mod report;
pub mod vfield;

pub use expr::{Expr, Scalar, Sym};
