//! Finite element exterior calculus over simplicial meshes.
//!
//! The crate provides:
//!
//! - [`mesh`]: simplicial complexes in 2D and 3D, uniform refinement,
//!   boundary subcomplexes, orientation bookkeeping;
//! - [`polyform`]: exact algebra of polynomial differential forms on a
//!   single reference simplex (wedge, exterior derivative, Koszul
//!   contraction, traces), with bases for the full and trimmed families;
//! - [`quadrature`]: integration rules on simplices, integrals of forms,
//!   and Lebesgue/Sobolev error norms;
//! - [`fields`]: analytic differential-form fields with exact derivatives;
//! - [`fespace`]: global conforming finite element spaces of both families
//!   with per-simplex degrees of freedom and biorthogonal dual bases;
//! - [`projection`]: cellwise local projections and the weighted-averaging
//!   global projection onto the conforming space;
//! - [`analysis`]: error reports, convergence studies, and local-vs-global
//!   best-approximation comparisons;
//! - [`vecproxy`]: vector-calculus façade (Lagrange, Nédélec, BDM,
//!   Raviart-Thomas) over the differential-form machinery.

pub mod analysis;
pub mod fespace;
pub mod fields;
pub mod mesh;
pub mod polyform;
pub mod projection;
pub mod quadrature;
pub mod vecproxy;

pub use fespace::{FEFunction, FESpace, Family};
pub use mesh::SimplicialComplex;
pub use polyform::PolyForm;
