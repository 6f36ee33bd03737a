//! Intrinsic operators: connection Laplacian, cotan Laplacian, lumped mass,
//! piecewise-linear face gradients and vertex-to-face transport.
//!
//! Both Laplacians use the positive semidefinite sign convention so that
//! `M + s L` is positive definite for `s >= 0`.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::IntrinsicFrame;
use crate::mesh::{cross, normalized, sub, SurfaceMesh, Vec3};
use crate::sparse::CsrMatrix;

/// Hermitian connection Laplacian. Entry `(i, j)` is `-½ cot · r_ji`, the
/// transport from the frame of `j` into the frame of `i`.
#[derive(Debug, Clone)]
pub struct ConnectionLaplacian {
    pub matrix: CsrMatrix<Complex64>,
    frame_fingerprint: u64,
}

impl ConnectionLaplacian {
    pub fn frame_fingerprint(&self) -> u64 {
        self.frame_fingerprint
    }
}

/// Diagonal lumped mass matrix (barycentric vertex areas).
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    pub diag: Vec<f64>,
    mesh_fingerprint: u64,
}

impl MassMatrix {
    pub fn new(diag: Vec<f64>, mesh_fingerprint: u64) -> Self {
        MassMatrix { diag, mesh_fingerprint }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    pub fn mesh_fingerprint(&self) -> u64 {
        self.mesh_fingerprint
    }
}

/// Per-face transition angles from each incident vertex frame into the face
/// frame. `angles[f][c]` belongs to the vertex `faces[f][c]`.
#[derive(Debug, Clone)]
pub struct VertexToFaceTransport {
    pub faces: Vec<[usize; 3]>,
    pub angles: Vec<[f64; 3]>,
    num_vertices: usize,
}

impl VertexToFaceTransport {
    /// `T = exp(i T_angle)` for face `f`, corner `c`.
    pub fn rotation(&self, f: usize, c: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.angles[f][c])
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }
}

pub fn assemble_connection_laplacian(mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> ConnectionLaplacian {
    let n = mesh.num_vertices();
    let mut trip: Vec<(usize, usize, Complex64)> = Vec::with_capacity(9 * mesh.num_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        for c in 0..3 {
            // edge a -> b with the opposite corner o
            let h = 3 * f + c;
            let (a, b) = (face[c], face[(c + 1) % 3]);
            let w = 0.5 * mesh.corner_cotan(3 * f + (c + 2) % 3);
            let r_ab = frame.halfedge_transport(h);
            trip.push((a, a, Complex64::new(w, 0.0)));
            trip.push((b, b, Complex64::new(w, 0.0)));
            trip.push((a, b, -r_ab.conj() * w));
            trip.push((b, a, -r_ab * w));
        }
    }
    ConnectionLaplacian {
        matrix: CsrMatrix::from_triplets(n, n, &trip),
        frame_fingerprint: frame.fingerprint(),
    }
}

/// Standard cotan Laplacian, positive semidefinite, zero row sums.
pub fn assemble_scalar_laplacian(mesh: &SurfaceMesh) -> CsrMatrix<f64> {
    let n = mesh.num_vertices();
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(12 * mesh.num_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        for c in 0..3 {
            let (a, b) = (face[c], face[(c + 1) % 3]);
            let w = 0.5 * mesh.corner_cotan(3 * f + (c + 2) % 3);
            trip.push((a, a, w));
            trip.push((b, b, w));
            trip.push((a, b, -w));
            trip.push((b, a, -w));
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

pub fn assemble_mass_matrix(mesh: &SurfaceMesh) -> MassMatrix {
    MassMatrix { diag: mesh.vertex_areas().to_vec(), mesh_fingerprint: mesh.fingerprint() }
}

/// Face frame: `e0` along the first edge of the stored face, `e1 = n × e0`.
pub fn face_basis(mesh: &SurfaceMesh, f: usize) -> (Vec3, Vec3) {
    let face = mesh.faces()[f];
    let p = mesh.positions();
    let e0 = normalized(sub(p[face[1]], p[face[0]]));
    let e1 = cross(mesh.face_normal(f), e0);
    (e0, e1)
}

/// Embed face-frame coefficients as a 3D vector.
pub fn embed_face(mesh: &SurfaceMesh, f: usize, u: Complex64) -> Vec3 {
    let (a, b) = face_basis(mesh, f);
    [u.re * a[0] + u.im * b[0], u.re * a[1] + u.im * b[1], u.re * a[2] + u.im * b[2]]
}

/// Intrinsic 2D layout of face `f` in its own frame.
fn face_layout(mesh: &SurfaceMesh, f: usize) -> [[f64; 2]; 3] {
    let l01 = mesh.edge_length(3 * f);
    let l20 = mesh.edge_length(3 * f + 2);
    let a0 = mesh.corner_angle(3 * f);
    [[0.0, 0.0], [l01, 0.0], [l20 * a0.cos(), l20 * a0.sin()]]
}

/// Direction of the edge leaving corner `c` of face `f`, measured in the
/// face frame.
fn face_edge_angle(mesh: &SurfaceMesh, f: usize, c: usize) -> f64 {
    match c {
        0 => 0.0,
        1 => PI - mesh.corner_angle(3 * f + 1),
        _ => PI + mesh.corner_angle(3 * f),
    }
}

/// Gradient of the piecewise-linear interpolant of `scalar`, one complex
/// coefficient per face in the face frame.
pub fn face_gradient(mesh: &SurfaceMesh, scalar: &[f64]) -> Result<Vec<Complex64>> {
    if scalar.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch { expected: mesh.num_vertices(), found: scalar.len() });
    }
    let mut out = Vec::with_capacity(mesh.num_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        let p = face_layout(mesh, f);
        let inv = 1.0 / (2.0 * mesh.face_area(f));
        let mut g = [0.0, 0.0];
        for c in 0..3 {
            let a = p[(c + 1) % 3];
            let b = p[(c + 2) % 3];
            // rotate the opposite edge by +90 degrees
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            g[0] += scalar[face[c]] * (-ey) * inv;
            g[1] += scalar[face[c]] * ex * inv;
        }
        out.push(Complex64::new(g[0], g[1]));
    }
    Ok(out)
}

pub fn build_vertex_to_face_transport(mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> VertexToFaceTransport {
    let angles = (0..mesh.num_faces())
        .map(|f| {
            let mut t = [0.0; 3];
            for (c, tc) in t.iter_mut().enumerate() {
                *tc = face_edge_angle(mesh, f, c) - frame.halfedge_angle(3 * f + c);
            }
            t
        })
        .collect();
    VertexToFaceTransport { faces: mesh.faces().to_vec(), angles, num_vertices: mesh.num_vertices() }
}

/// `u_f = (1/3) Σ T ⊙ u_v[F]`.
pub fn average_to_faces(tfo: &VertexToFaceTransport, u: &[Complex64]) -> Result<Vec<Complex64>> {
    if u.len() != tfo.num_vertices {
        return Err(Error::DimensionMismatch { expected: tfo.num_vertices, found: u.len() });
    }
    Ok(tfo
        .faces
        .iter()
        .enumerate()
        .map(|(f, face)| (0..3).map(|c| tfo.rotation(f, c) * u[face[c]]).sum::<Complex64>() / 3.0)
        .collect())
}

/// Face values carried back into vertex frames with the inverse transport
/// and averaged with incident face-area weights.
pub fn faces_to_vertices(
    mesh: &SurfaceMesh,
    tfo: &VertexToFaceTransport,
    face_values: &[Complex64],
) -> Result<Vec<Complex64>> {
    if face_values.len() != mesh.num_faces() {
        return Err(Error::DimensionMismatch { expected: mesh.num_faces(), found: face_values.len() });
    }
    let n = mesh.num_vertices();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut weight = vec![0.0; n];
    for (f, face) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(f);
        for c in 0..3 {
            acc[face[c]] += tfo.rotation(f, c).conj() * face_values[f] * a;
            weight[face[c]] += a;
        }
    }
    Ok(acc.into_iter().zip(weight).map(|(z, w)| z / w).collect())
}
