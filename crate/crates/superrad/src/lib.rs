//! Collective decay of multilevel atoms in a two-mode cavity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod angular;
pub mod error;
pub mod level;
pub mod operators;
pub mod symspace;
pub mod spectra;
pub mod ode;
pub mod generator;
pub mod lindblad;
pub mod semiclassical;
pub mod potential;
pub mod scenario;
