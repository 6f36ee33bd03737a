//! Everything around the numerical core that touches the outside world:
//! OBJ meshes, binary caches, field and checkpoint files, Matrix Market
//! export, run configuration, invariance audits and the command line.

pub mod audit;
pub mod binfmt;
pub mod cache;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod fieldio;
pub mod fixtures;
pub mod infer;
pub mod mtx;
pub mod obj;

pub use error::{ExitKind, Result, VhnError};
