//! Semi-discrete optimal transport between the kite domains and numerical
//! checks on the metric induced by the resulting Brenier potential.

pub mod geometry;
pub mod scalar;
pub mod simplex_charts;
pub mod ot_semidiscrete;
pub mod spatial;
pub mod potential_analysis;
pub mod ot_oracle;
pub mod conformal;
