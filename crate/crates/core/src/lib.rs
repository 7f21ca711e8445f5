//! Random causal maps built from supercritical Galton-Watson trees.

pub mod cmap;
pub mod electric;
pub mod error;
pub mod explore;
pub mod metric;
pub mod offspring;
pub mod planar;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod walk;

pub use error::{Error, Result};
pub use offspring::{DerivedLaws, OffspringDistribution};
pub use tree::{PlaneTree, VertexId};
pub use cmap::{build_causal, build_halfplane, build_slice, CausalMap, EdgeKind, LazyMap, MapKind, WalkGraph};
