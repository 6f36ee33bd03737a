//! Tangent frames, logarithmic-map angles and discrete parallel transport.
//!
//! Every vertex carries an orthonormal tangent basis `(e0, e1)`. Outgoing
//! edges get angular coordinates: cumulative corner angles around the
//! one-ring, rescaled so the full ring spans `2π` (interior) or `π`
//! (boundary). A tangent vector is the complex number `u0 + i u1`.
//!
//! For neighbours `i`, `j` the transport `r_ij` rotates coefficients in the
//! frame of `i` into the frame of `j` so that the shared edge is represented
//! consistently: `r_ij = exp(i (θ_ji + π − θ_ij))`.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fingerprint::Fnv;
use crate::mesh::{cross, dot, normalized, scale, sub, MeshConfig, SurfaceMesh, Vec3};

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut x = a % TAU;
    if x < 0.0 {
        x += TAU;
    }
    if x >= TAU {
        x -= TAU;
    }
    x
}

#[derive(Debug, Clone)]
pub struct IntrinsicFrame {
    e0: Vec<Vec3>,
    e1: Vec<Vec3>,
    total_angle: Vec<f64>,
    ring_offsets: Vec<usize>,
    ring_neighbor: Vec<usize>,
    ring_theta: Vec<f64>,
    /// per halfedge a -> b: angle of the edge in the frame of a
    he_theta: Vec<f64>,
    /// per halfedge a -> b: angle of the reverse edge in the frame of b
    he_theta_back: Vec<f64>,
    mesh_fingerprint: u64,
    fingerprint: u64,
}

/// Canonical frames of `mesh`.
pub fn build_frames(mesh: &SurfaceMesh) -> Result<IntrinsicFrame> {
    IntrinsicFrame::build(mesh, &MeshConfig::default())
}

impl IntrinsicFrame {
    pub fn build(mesh: &SurfaceMesh, config: &MeshConfig) -> Result<Self> {
        let n = mesh.num_vertices();
        let min_edge = config.edge_epsilon * mesh.bbox_diagonal();
        let mut e0 = Vec::with_capacity(n);
        let mut e1 = Vec::with_capacity(n);
        let mut total_angle = Vec::with_capacity(n);
        let mut ring_offsets = Vec::with_capacity(n + 1);
        let mut ring_neighbor = Vec::new();
        let mut ring_theta = Vec::new();
        ring_offsets.push(0);

        for v in 0..n {
            let ring = mesh.ring(v);
            let normal = mesh.vertex_normal(v);
            let p = mesh.positions()[v];
            let theta_sum: f64 = ring.iter().filter_map(|e| e.wedge).map(|h| mesh.corner_angle(h)).sum();
            let rescale = if mesh.is_boundary(v) { PI } else { TAU } / theta_sum;

            let mut cumulative = Vec::with_capacity(ring.len());
            let mut acc = 0.0;
            for e in ring {
                cumulative.push(acc);
                if let Some(h) = e.wedge {
                    acc += mesh.corner_angle(h);
                }
            }

            // reference edge: first one that is long enough and not parallel to the normal
            let mut reference = None;
            for (t, e) in ring.iter().enumerate() {
                let d = sub(mesh.positions()[e.neighbor], p);
                let len = crate::mesh::norm(d);
                if len <= min_edge {
                    continue;
                }
                let tangent = sub(d, scale(normal, dot(d, normal)));
                if crate::mesh::norm(tangent) <= 1e-12 * len {
                    continue;
                }
                reference = Some((t, normalized(tangent)));
                break;
            }
            let (r, b0) = reference.ok_or(Error::DegenerateFrame(v))?;
            let b1 = cross(normal, b0);
            e0.push(b0);
            e1.push(b1);
            total_angle.push(theta_sum);
            for (t, e) in ring.iter().enumerate() {
                ring_neighbor.push(e.neighbor);
                ring_theta.push(wrap_angle(rescale * (cumulative[t] - cumulative[r])));
            }
            ring_offsets.push(ring_neighbor.len());
        }

        let mut frame = IntrinsicFrame {
            e0,
            e1,
            total_angle,
            ring_offsets,
            ring_neighbor,
            ring_theta,
            he_theta: Vec::new(),
            he_theta_back: Vec::new(),
            mesh_fingerprint: mesh.fingerprint(),
            fingerprint: 0,
        };
        frame.finish(mesh)?;
        Ok(frame)
    }

    /// Frames induced by one global orthonormal basis of a planar mesh:
    /// every vertex uses `(e0, e1)` and edge angles are measured directly in
    /// that basis. With these frames all transports are the identity.
    pub fn from_global_basis(mesh: &SurfaceMesh, e0: Vec3, e1: Vec3) -> Result<Self> {
        let mut frame = Self::build(mesh, &MeshConfig::default())?;
        let n = mesh.num_vertices();
        frame.e0 = vec![e0; n];
        frame.e1 = vec![e1; n];
        for v in 0..n {
            let p = mesh.positions()[v];
            for idx in frame.ring_offsets[v]..frame.ring_offsets[v + 1] {
                let d = sub(mesh.positions()[frame.ring_neighbor[idx]], p);
                frame.ring_theta[idx] = wrap_angle(dot(d, e1).atan2(dot(d, e0)));
            }
        }
        frame.finish(mesh)?;
        Ok(frame)
    }

    /// Rotate the basis at every vertex `v` by `angles[v]`: the new `e0` is
    /// the old basis direction at angle `angles[v]`. Coefficients of a fixed
    /// tangent vector change by `exp(-i angles[v])`.
    pub fn rotated(&self, mesh: &SurfaceMesh, angles: &[f64]) -> Result<Self> {
        let n = self.num_vertices();
        if angles.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: angles.len() });
        }
        if mesh.fingerprint() != self.mesh_fingerprint {
            return Err(Error::FingerprintMismatch);
        }
        let mut out = self.clone();
        for v in 0..n {
            let (s, c) = angles[v].sin_cos();
            let (a, b) = (self.e0[v], self.e1[v]);
            out.e0[v] = [c * a[0] + s * b[0], c * a[1] + s * b[1], c * a[2] + s * b[2]];
            out.e1[v] = [c * b[0] - s * a[0], c * b[1] - s * a[1], c * b[2] - s * a[2]];
            for idx in self.ring_offsets[v]..self.ring_offsets[v + 1] {
                out.ring_theta[idx] = wrap_angle(self.ring_theta[idx] - angles[v]);
            }
        }
        out.finish(mesh)?;
        Ok(out)
    }

    fn finish(&mut self, mesh: &SurfaceMesh) -> Result<()> {
        let nh = 3 * mesh.num_faces();
        let mut he_theta = vec![0.0; nh];
        let mut he_theta_back = vec![0.0; nh];
        for h in 0..nh {
            let a = mesh.halfedge_tail(h);
            let b = mesh.halfedge_head(h);
            he_theta[h] = self.angle(a, b).ok_or(Error::NotAdjacent(a, b))?;
            he_theta_back[h] = self.angle(b, a).ok_or(Error::NotAdjacent(b, a))?;
        }
        self.he_theta = he_theta;
        self.he_theta_back = he_theta_back;
        let mut fnv = Fnv::new();
        fnv.word(self.mesh_fingerprint);
        for &t in &self.ring_theta {
            fnv.f64(t);
        }
        for (a, b) in self.e0.iter().zip(&self.e1) {
            a.iter().chain(b.iter()).for_each(|&x| fnv.f64(x));
        }
        self.fingerprint = fnv.finish();
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.e0.len()
    }

    pub fn e0(&self, v: usize) -> Vec3 {
        self.e0[v]
    }

    pub fn e1(&self, v: usize) -> Vec3 {
        self.e1[v]
    }

    /// Sum of corner angles around `v` before rescaling.
    pub fn total_angle(&self, v: usize) -> f64 {
        self.total_angle[v]
    }

    /// Neighbours of `v` in one-ring order.
    pub fn ring_neighbors(&self, v: usize) -> &[usize] {
        &self.ring_neighbor[self.ring_offsets[v]..self.ring_offsets[v + 1]]
    }

    /// Angular coordinates of the outgoing edges of `v`, in one-ring order.
    pub fn ring_angles(&self, v: usize) -> &[f64] {
        &self.ring_theta[self.ring_offsets[v]..self.ring_offsets[v + 1]]
    }

    /// Angular coordinate of edge `i -> j` in the frame of `i`.
    pub fn angle(&self, i: usize, j: usize) -> Option<f64> {
        let range = self.ring_offsets[i]..self.ring_offsets[i + 1];
        range.clone().find(|&idx| self.ring_neighbor[idx] == j).map(|idx| self.ring_theta[idx])
    }

    /// Angle of halfedge `h` (tail -> head) in the tail frame.
    pub fn halfedge_angle(&self, h: usize) -> f64 {
        self.he_theta[h]
    }

    /// Angle of the reverse of halfedge `h` in the head frame.
    pub fn halfedge_angle_back(&self, h: usize) -> f64 {
        self.he_theta_back[h]
    }

    /// Transport from the tail frame of `h` into its head frame.
    pub fn halfedge_transport(&self, h: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.he_theta_back[h] + PI - self.he_theta[h])
    }

    /// `r_ij`: rotation carrying coefficients in frame `i` into frame `j`.
    pub fn transport(&self, i: usize, j: usize) -> Result<Complex64> {
        let tij = self.angle(i, j).ok_or(Error::NotAdjacent(i, j))?;
        let tji = self.angle(j, i).ok_or(Error::NotAdjacent(i, j))?;
        Ok(Complex64::from_polar(1.0, tji + PI - tij))
    }

    /// Embed tangent coefficients at `v` as a 3D vector.
    pub fn embed(&self, v: usize, u: Complex64) -> Vec3 {
        let (a, b) = (self.e0[v], self.e1[v]);
        [u.re * a[0] + u.im * b[0], u.re * a[1] + u.im * b[1], u.re * a[2] + u.im * b[2]]
    }

    /// Coefficients of the tangential part of `x` at `v`.
    pub fn project(&self, v: usize, x: Vec3) -> Complex64 {
        Complex64::new(dot(x, self.e0[v]), dot(x, self.e1[v]))
    }

    pub fn mesh_fingerprint(&self) -> u64 {
        self.mesh_fingerprint
    }

    /// Hash of the mesh and all frame data.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Product of transports along a closed vertex loop
/// `loop_[0] -> loop_[1] -> ... -> loop_[0]`.
pub fn transport_loop_holonomy(frame: &IntrinsicFrame, vertex_loop: &[usize]) -> Result<Complex64> {
    let mut acc = Complex64::new(1.0, 0.0);
    let len = vertex_loop.len();
    for t in 0..len {
        let (i, j) = (vertex_loop[t], vertex_loop[(t + 1) % len]);
        acc *= frame.transport(i, j)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn arg_mod(z: Complex64, target: f64) -> f64 {
        let d = wrap_angle(z.arg() - target);
        d.min(TAU - d)
    }

    #[test]
    fn frames_are_orthonormal_tangent() {
        let m = shapes::bumpy_sphere(2);
        let f = build_frames(&m).unwrap();
        for v in 0..m.num_vertices() {
            let (a, b, n) = (f.e0(v), f.e1(v), m.vertex_normal(v));
            assert!((dot(a, a) - 1.0).abs() < 1e-10);
            assert!((dot(b, b) - 1.0).abs() < 1e-10);
            assert!(dot(a, b).abs() < 1e-10);
            assert!(dot(a, n).abs() < 1e-10 && dot(b, n).abs() < 1e-10);
        }
    }

    #[test]
    fn ring_angles_increase_and_span() {
        let m = shapes::bumpy_sphere(2);
        let f = build_frames(&m).unwrap();
        for v in 0..m.num_vertices() {
            let th = f.ring_angles(v);
            assert_eq!(th[0], 0.0);
            assert!(th.windows(2).all(|w| w[1] > w[0]));
            assert!(*th.last().unwrap() < TAU);
        }
    }

    #[test]
    fn flat_interior_rescale_is_one() {
        let m = shapes::grid(4, 4, 0.3);
        let f = build_frames(&m).unwrap();
        let v = 2 * 5 + 2;
        assert!((f.total_angle(v) - TAU).abs() < 1e-12);
        // angles equal the true planar angles relative to the first edge
        let p = m.positions()[v];
        let nb = f.ring_neighbors(v);
        let q0 = m.positions()[nb[0]];
        let a0 = (q0[1] - p[1]).atan2(q0[0] - p[0]);
        for (k, &j) in nb.iter().enumerate() {
            let q = m.positions()[j];
            let a = wrap_angle((q[1] - p[1]).atan2(q[0] - p[0]) - a0);
            assert!((a - f.ring_angles(v)[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn global_basis_makes_transport_trivial() {
        let m = shapes::grid(5, 4, 0.25);
        let f = IntrinsicFrame::from_global_basis(&m, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        for h in 0..3 * m.num_faces() {
            let r = f.halfedge_transport(h);
            assert!((r - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn transport_antisymmetry() {
        let m = shapes::bumpy_sphere(1);
        let f = build_frames(&m).unwrap();
        for h in 0..3 * m.num_faces() {
            let (a, b) = (m.halfedge_tail(h), m.halfedge_head(h));
            let r = f.transport(a, b).unwrap() * f.transport(b, a).unwrap();
            assert!((r - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            assert!((f.halfedge_transport(h).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_cycle_is_exactly_one() {
        let m = shapes::icosphere(1);
        let f = build_frames(&m).unwrap();
        let j = f.ring_neighbors(0)[0];
        let z = transport_loop_holonomy(&f, &[0, j]).unwrap();
        assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn non_adjacent_loop_is_rejected() {
        let m = shapes::grid(3, 3, 1.0);
        let f = build_frames(&m).unwrap();
        assert_eq!(transport_loop_holonomy(&f, &[0, 15]).unwrap_err(), Error::NotAdjacent(0, 15));
    }

    #[test]
    fn flat_loop_has_no_holonomy() {
        let m = shapes::grid(6, 6, 0.2);
        let f = build_frames(&m).unwrap();
        // loop through interior vertices around an interior square
        let id = |i: usize, j: usize| j * 7 + i;
        let lp = [id(1, 1), id(2, 1), id(3, 1), id(3, 2), id(3, 3), id(2, 3), id(1, 3), id(1, 2)];
        let z = transport_loop_holonomy(&f, &lp).unwrap();
        assert!(z.arg().abs() < 1e-10);
    }

    #[test]
    fn cone_holonomy_is_angle_defect() {
        for &theta in &[1.2 * PI, 1.5 * PI, 1.9 * PI] {
            let m = shapes::cone(9, theta);
            let f = build_frames(&m).unwrap();
            assert!((f.total_angle(0) - theta).abs() < 1e-12);
            let lp: Vec<usize> = f.ring_neighbors(0).to_vec();
            for &v in &lp {
                assert!((f.total_angle(v) - TAU).abs() < 1e-12);
            }
            let z = transport_loop_holonomy(&f, &lp).unwrap();
            assert!(arg_mod(z, TAU - theta) < 1e-10, "theta {theta}: {}", z.arg());
        }
    }

    #[test]
    fn cube_corner_holonomy() {
        let m = shapes::cube(2);
        let f = build_frames(&m).unwrap();
        assert!((f.total_angle(0) - 1.5 * PI).abs() < 1e-12);
        let lp: Vec<usize> = f.ring_neighbors(0).to_vec();
        let z = transport_loop_holonomy(&f, &lp).unwrap();
        assert!(arg_mod(z, 0.5 * PI) < 1e-10, "{}", z.arg());
    }

    #[test]
    fn rotation_shifts_coefficients() {
        let m = shapes::bumpy_sphere(1);
        let f = build_frames(&m).unwrap();
        let angles: Vec<f64> = (0..m.num_vertices()).map(|v| 0.37 * v as f64).collect();
        let g = f.rotated(&m, &angles).unwrap();
        let u = Complex64::new(0.3, -0.8);
        for v in 0..m.num_vertices() {
            let x = f.embed(v, u);
            let w = g.project(v, x);
            let expect = u * Complex64::from_polar(1.0, -angles[v]);
            assert!((w - expect).norm() < 1e-12);
        }
        // transport conjugates by the frame rotations
        for h in 0..3 * m.num_faces() {
            let (a, b) = (m.halfedge_tail(h), m.halfedge_head(h));
            let expect = f.halfedge_transport(h) * Complex64::from_polar(1.0, angles[a] - angles[b]);
            assert!((g.halfedge_transport(h) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn rigid_motion_leaves_angles_unchanged() {
        let m = shapes::bumpy_sphere(2);
        let moved = shapes::deformed(&m, |p| shapes::rigid_transform(p, [0.3, -1.0, 0.4], 1.1, [2.0, -3.0, 0.5]));
        let f = build_frames(&m).unwrap();
        let g = build_frames(&moved).unwrap();
        for v in 0..m.num_vertices() {
            assert!((f.total_angle(v) - g.total_angle(v)).abs() < 1e-10);
            for (a, b) in f.ring_angles(v).iter().zip(g.ring_angles(v)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        for h in 0..3 * m.num_faces() {
            assert!((f.halfedge_transport(h) - g.halfedge_transport(h)).norm() < 1e-10);
        }
    }

    #[test]
    fn isometric_fold_keeps_angles() {
        let flat = shapes::grid(6, 4, 0.5);
        let bent = shapes::folded_grid(6, 4, 0.5, &[(2, 0.9), (4, -0.6)]);
        let f = build_frames(&flat).unwrap();
        let g = build_frames(&bent).unwrap();
        for v in 0..flat.num_vertices() {
            for (a, b) in f.ring_angles(v).iter().zip(g.ring_angles(v)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn deterministic() {
        let m = shapes::bumpy_sphere(2);
        let a = build_frames(&m).unwrap();
        let b = build_frames(&m).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.ring_theta, b.ring_theta);
    }
}
