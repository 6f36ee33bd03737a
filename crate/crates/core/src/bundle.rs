//! Everything the network needs about one mesh, built once and checked for
//! consistency by content hash.

use crate::error::{Error, Result};
use crate::features::{compute_features, scalar_basis, FeatureField, FeatureSpec};
use crate::frame::{build_frames, IntrinsicFrame};
use crate::mesh::SurfaceMesh;
use crate::ops::{assemble_connection_laplacian, assemble_mass_matrix, ConnectionLaplacian, MassMatrix};
use crate::spectral::{solve_connection_basis, EigenConfig, SpectralBasis};

#[derive(Debug, Clone)]
pub struct MeshBundle {
    pub mesh: SurfaceMesh,
    pub frame: IntrinsicFrame,
    pub laplacian: ConnectionLaplacian,
    pub mass: MassMatrix,
    pub basis: SpectralBasis,
    pub features: FeatureField,
}

impl MeshBundle {
    /// Canonical frames, operators, `k` vector modes and input features.
    pub fn build(mesh: SurfaceMesh, spec: &FeatureSpec, k: usize, eig: &EigenConfig) -> Result<Self> {
        let frame = build_frames(&mesh)?;
        Self::build_with_frame(mesh, frame, spec, k, eig)
    }

    pub fn build_with_frame(mesh: SurfaceMesh, frame: IntrinsicFrame, spec: &FeatureSpec, k: usize, eig: &EigenConfig) -> Result<Self> {
        let laplacian = assemble_connection_laplacian(&mesh, &frame);
        let mass = assemble_mass_matrix(&mesh);
        let basis = solve_connection_basis(&laplacian, &mass, k.min(mesh.num_vertices()), eig)?;
        let scalar = scalar_basis(&mesh, spec.scalar_k, eig)?;
        let features = compute_features(&mesh, &frame, &scalar, spec)?;
        Self::from_parts(mesh, frame, laplacian, mass, basis, features)
    }

    /// Assemble from precomputed pieces, rejecting anything built from a
    /// different mesh or frame.
    pub fn from_parts(
        mesh: SurfaceMesh,
        frame: IntrinsicFrame,
        laplacian: ConnectionLaplacian,
        mass: MassMatrix,
        basis: SpectralBasis,
        features: FeatureField,
    ) -> Result<Self> {
        let n = mesh.num_vertices();
        let fp = frame.fingerprint();
        if frame.mesh_fingerprint() != mesh.fingerprint() || mass.mesh_fingerprint() != mesh.fingerprint() {
            return Err(Error::FingerprintMismatch);
        }
        if laplacian.frame_fingerprint() != fp || basis.source != fp || features.frame != fp {
            return Err(Error::FingerprintMismatch);
        }
        if basis.n() != n || features.values.rows() != n || mass.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: basis.n() });
        }
        Ok(MeshBundle { mesh, frame, laplacian, mass, basis, features })
    }

    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Natural diffusion time unit of this mesh: squared mean edge length.
    pub fn time_scale(&self) -> f64 {
        let h = self.mesh.mean_edge_length();
        h * h
    }
}
