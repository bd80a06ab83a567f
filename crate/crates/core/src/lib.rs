//! Simulated three-tier building sensor network and X3D thermal map generation.

// NaN-rejecting checks read best as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod building;
pub mod concentrator;
pub mod endpoint;
pub mod field;
pub mod geometry;
pub mod scenegen;
pub mod sim;
pub mod supervisor;
pub mod validation;
