//! Histograms of Gaussian Normal Distribution (HGND) local 3D feature descriptor.
//!
//! The crate covers the full pipeline used to evaluate the descriptor on
//! cluttered scenes:
//!
//! - [`mesh`]: triangle meshes, PLY I/O, mesh resolution, rigid transforms and
//!   support-radius patch cropping.
//! - [`lrf`]: the distance/area weighted scatter-matrix local reference frame
//!   with sign disambiguation.
//! - [`descriptor`]: the 96-bin quadrant/direction normal histograms and the
//!   descriptor file formats.
//! - [`matching`]: exact K-D tree nearest/second-nearest search and the ratio test.
//! - [`bench`]: scene synthesis, keypoint sampling, ground truth and
//!   Recall vs 1-Precision curves.
//!
//! All lengths exposed by parameter structs are expressed in mesh-resolution
//! (mr) units, the mean triangle edge length of the mesh being described.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod descriptor;
pub mod error;
pub mod lrf;
pub mod matching;
pub mod mesh;
pub mod pipeline;
pub mod shapes;

pub use descriptor::{DescriptorParams, HgndDescriptor, Normalization, DESCRIPTOR_LEN};
pub use error::{Error, Result};
pub use lrf::{Lrf, LrfParams};
pub use matching::{DescriptorSet, MatchCandidate, SearchIndex};
pub use mesh::{LocalSurfacePatch, MeshResolution, RigidTransform, Triangle, TriangleMesh};

/// 3D point or vector in model units.
pub type Point3 = nalgebra::Vector3<f64>;
