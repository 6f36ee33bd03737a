use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("face {face}: vertex index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {face}: repeated vertex {vertex}")]
    RepeatedVertex { face: usize, vertex: usize },
    #[error("non-manifold edge ({0}, {1})")]
    NonManifoldEdge(usize, usize),
    #[error("non-manifold vertex {0}")]
    NonManifoldVertex(usize),
    #[error("vertex {0} has no incident faces")]
    IsolatedVertex(usize),
    #[error("degenerate face {face}: area {area:e} below threshold {threshold:e}")]
    DegenerateFace { face: usize, area: f64, threshold: f64 },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("vertex {0}: all outgoing edges are degenerate")]
    DegenerateFrame(usize),
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("requested {k} eigenpairs but the matrix has dimension {n}")]
    TooManyModes { k: usize, n: usize },
    #[error("eigensolver did not converge: worst residual {residual:e} exceeds {tolerance:e}")]
    NoConvergence { residual: f64, tolerance: f64 },
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("negative diffusion time {0}")]
    NegativeTime(f64),
    #[error("mesh is disconnected: second scalar eigenvalue is zero")]
    Disconnected,
    #[error("operands belong to different meshes or frames")]
    FingerprintMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("dataset is empty")]
    EmptyDataset,
}
