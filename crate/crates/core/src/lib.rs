// Negated comparisons below are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chain;
pub mod environment;
pub mod harness;
pub mod instances;
pub mod io;
mod linalg;
pub mod policies;
