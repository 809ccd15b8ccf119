//! Voronoi complexes of `GL_2(O_D)` and `SL_2(O_D)` for imaginary quadratic orders, and
//! their integral homology.
//!
//! The pipeline for one discriminant is
//!
//! 1. [`voronoi::enumerate_perfect_forms`]: perfect binary Hermitian forms up to the group;
//! 2. [`cellcomplex::VoronoiComplex::build`]: orbits of cells, stabilisers, orientation
//!    characters and boundary matrices;
//! 3. [`zhomology::homology`]: Smith normal form over `Z` with exact invariant factors;
//! 4. [`arith`]: class groups and the cuspidal/Eisenstein bookkeeping.
//!
//! [`pipeline::compute`] chains these steps and produces a [`report::ReportRecord`].

pub mod arith;
pub mod cellcomplex;
pub mod cone;
pub mod error;
pub mod hermitian;
pub mod pipeline;
pub mod qfield;
pub mod report;
pub mod store;
pub mod voronoi;
pub mod zhomology;

pub use error::{Error, Result};
pub use hermitian::{ConePoint, HermitianForm, MinimalVectorSet, Rational};
pub use qfield::{Discriminant, Flavor, GroupElement, ModuleVector, OrderContext, OrderElement};
pub use report::ReportRecord;
pub use voronoi::{PerfectForm, VoronoiGraph};
pub use zhomology::{HomologyResult, SnfResult, SparseIntMatrix};
