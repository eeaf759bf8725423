//! Numerical differential geometry for smooth maps between chart-described
//! Riemannian manifolds carrying (almost) complex structures.
//!
//! The crate computes, at sampled chart points: the vertical/horizontal
//! splitting of a map, its dilation and conformality residuals, Wirtinger
//! slant angles, the decomposition operators of the complex structure, the
//! second fundamental form and O'Neill tensors, and curvature — and then
//! evaluates a battery of structural identities and curvature inequalities
//! as quantitative residual checks with machine-readable reports.

pub mod expr;
pub mod frames;
pub mod geometry;
pub mod map_analysis;
pub mod connection;
