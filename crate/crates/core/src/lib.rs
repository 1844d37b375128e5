//! Tri-valued matching of inter-component communication links with a learned
//! link-probability model for the undecided cases.

pub mod cli;
pub mod corpus;
pub mod icc;
pub mod interpret;
pub mod linn;
pub mod matcher;
pub mod nn;
pub mod pattern;
pub mod tde;
