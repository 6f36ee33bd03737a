//! Intrinsic vector heat networks on triangle meshes.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of in-memory data; file formats, caching and the command line
//! live in the companion `vhn` crate.
//!
//! Pipeline, bottom to top:
//!
//! - [`mesh`]: validated manifold triangle meshes and their intrinsic
//!   quantities (edge lengths, corner angles, areas).
//! - [`frame`]: per-vertex tangent frames, normalized angular coordinates
//!   and the discrete parallel transport between neighbouring vertices.
//! - [`ops`]: connection Laplacian, cotan Laplacian, mass matrix, face
//!   gradients and vertex-to-face transport.
//! - [`spectral`]: generalized Hermitian eigenbases and vector heat
//!   diffusion, both spectral and by direct implicit Euler.
//! - [`features`]: intrinsic tangent-vector input features.
//! - [`model`]: the network forward pass.
//! - [`train`]: the N-RoSy loss, analytic gradients and the optimizer loop.
//! - [`rosy`]: N-RoSy algebra and field comparisons.

#![no_std]

extern crate alloc;

pub mod bundle;
pub mod cmat;
pub mod error;
pub mod features;
pub mod frame;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod ops;
pub mod rosy;
pub mod shapes;
pub mod sparse;
pub mod spectral;
pub mod train;

mod fingerprint;

pub use num_complex::Complex64;

pub use cmat::CMat;
pub use error::{Error, Result};
pub use frame::IntrinsicFrame;
pub use mesh::{MeshConfig, SurfaceMesh};
pub use spectral::SpectralBasis;
pub use bundle::MeshBundle;
pub use model::{Mode, VhnConfig, VhnParams};
pub use train::{Example, TrainConfig};
