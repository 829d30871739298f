//! Statistical shape model reconstruction of organ surfaces from a few planar
//! binary masks, with mesh volumetry and paired statistical comparison.
//!
//! The crate is organized along the processing chain:
//!
//! - [`mesh`]: triangle meshes, OBJ I/O, surface queries and volume.
//! - [`register`]: rigid (Kabsch / generalized Procrustes) and non-rigid
//!   template fitting that brings a population onto one topology.
//! - [`ssm`]: PCA shape space, projection and reconstruction.
//! - [`slicer`]: sagittal cross-sections rasterized into binary masks.
//! - [`regressor`]: two-layer MLP mapping mask stacks to shape parameters.
//! - [`metrics`] and [`stats`]: evaluation metrics and the paired t-test.
//! - [`synth`]: deterministic synthetic populations.
//! - [`pipeline`]: the end-to-end workflow behind the `ssmrecon` CLI.
//!
//! All coordinates are millimeters. Volumes are reported in cm³.

pub mod mesh;
mod linalg;
pub mod metrics;
pub mod persist;
pub mod pipeline;
pub mod regressor;
pub mod register;
pub mod slicer;
pub mod ssm;
pub mod stats;
pub mod synth;

pub use mesh::{Plane, TriMesh};
pub use regressor::MlpParams;
pub use ssm::{ShapeParams, ShapeSpace};
