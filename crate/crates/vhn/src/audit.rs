//! Paired evaluations that check the invariances the architecture promises:
//! tangent basis choice, rigid motion, isometric bending and remeshing.
//!
//! Every audit rebuilds frames, operators, bases and features from scratch
//! for the transformed input, so nothing stale can leak between the runs.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vhn_core::mesh::{add, cross, dot, norm, normalized, scale, sub, Vec3};
use vhn_core::rosy::{angular_error, rosy_angle, AngularError, Domain, RosyField};
use vhn_core::shapes::rigid_transform;
use vhn_core::{Complex64, MeshBundle, SurfaceMesh, VhnParams};

use crate::cache::PrepSettings;
use crate::error::{Result, VhnError};
use crate::infer::{pin_time_scale, predict};

pub const BASIS_THRESHOLD: f64 = 1e-5;
pub const RIGID_THRESHOLD: f64 = 1e-6;
pub const ISOMETRY_THRESHOLD: f64 = 1e-4;
/// Mean angular error, degrees.
pub const REMESH_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditKind {
    Basis,
    Rigid,
    Isometry,
    Remesh,
}

impl AuditKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditKind::Basis => "basis",
            AuditKind::Rigid => "rigid",
            AuditKind::Isometry => "isometry",
            AuditKind::Remesh => "remesh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [AuditKind::Basis, AuditKind::Rigid, AuditKind::Isometry, AuditKind::Remesh].into_iter().find(|k| k.as_str() == s)
    }

    pub fn default_threshold(self) -> f64 {
        match self {
            AuditKind::Basis => BASIS_THRESHOLD,
            AuditKind::Rigid => RIGID_THRESHOLD,
            AuditKind::Isometry => ISOMETRY_THRESHOLD,
            AuditKind::Remesh => REMESH_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub kind: AuditKind,
    /// Largest and mean distance between the paired embedded vectors.
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
    /// Largest discrepancy divided by the largest reference magnitude.
    pub relative: f64,
    /// N-RoSy angular error between the paired outputs, radians.
    pub angular: AngularError,
    /// The quantity compared against `threshold`: `relative` for basis,
    /// rigid and isometry audits, mean angular error in degrees for remesh.
    pub metric: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl AuditReport {
    fn new(kind: AuditKind, diffs: &[f64], reference_scale: f64, angular: AngularError, threshold: f64) -> Self {
        let max = diffs.iter().cloned().fold(0.0, f64::max);
        let mean = diffs.iter().sum::<f64>() / diffs.len().max(1) as f64;
        let relative = if reference_scale > 0.0 { max / reference_scale } else { max };
        let metric = if kind == AuditKind::Remesh { angular.mean.to_degrees() } else { relative };
        AuditReport { kind, max_discrepancy: max, mean_discrepancy: mean, relative, angular, metric, threshold, passed: metric <= threshold }
    }

    /// One tab-separated `key=value` line.
    pub fn to_line(&self) -> String {
        format!(
            "audit={}\tpassed={}\tmetric={:e}\tthreshold={:e}\tmax={:e}\tmean={:e}\trelative={:e}\tangle_mean_deg={:e}\tangle_max_deg={:e}",
            self.kind.as_str(),
            self.passed,
            self.metric,
            self.threshold,
            self.max_discrepancy,
            self.mean_discrepancy,
            self.relative,
            self.angular.mean.to_degrees(),
            self.angular.max.to_degrees()
        )
    }
}

fn build(mesh: SurfaceMesh, settings: &PrepSettings) -> Result<MeshBundle> {
    Ok(MeshBundle::build(mesh, &settings.features, settings.k, &settings.eigen)?)
}

fn embed_all(bundle: &MeshBundle, u: &[Complex64]) -> Vec<Vec3> {
    u.iter().enumerate().map(|(v, z)| bundle.frame.embed(v, *z)).collect()
}

fn max_norm(vs: &[Vec3]) -> f64 {
    vs.iter().map(|v| norm(*v)).fold(0.0, f64::max)
}

fn field(values: Vec<Complex64>, order: u32) -> Result<RosyField> {
    // both sides are expressed in the same frames before comparison
    Ok(RosyField::new(values, order, Domain::Vertices, 0)?)
}

/// Random per-vertex rotations of the tangent bases. Outputs are compared as
/// embedded 3D vectors, each run through its own frames.
pub fn audit_basis(params: &VhnParams, bundle: &MeshBundle, settings: &PrepSettings, rotations: usize, order: u32, seed: u64, threshold: f64) -> Result<AuditReport> {
    let params = pin_time_scale(params, bundle);
    let reference = predict(&params, bundle)?;
    let ref_embedded = embed_all(bundle, &reference);
    let scale_ref = max_norm(&ref_embedded);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diffs = vec![0.0; bundle.num_vertices()];
    let mut angles_all = vec![0.0; bundle.num_vertices()];
    for _ in 0..rotations {
        let angles: Vec<f64> = (0..bundle.num_vertices()).map(|_| rng.random_range(0.0..TAU)).collect();
        let frame = bundle.frame.rotated(&bundle.mesh, &angles)?;
        let other = MeshBundle::build_with_frame(bundle.mesh.clone(), frame, &settings.features, settings.k, &settings.eigen)?;
        let out = predict(&params, &other)?;
        for (v, z) in out.iter().enumerate() {
            let e = other.frame.embed(v, *z);
            diffs[v] = f64::max(diffs[v], norm(sub(e, ref_embedded[v])));
            let back = bundle.frame.project(v, e);
            angles_all[v] = f64::max(angles_all[v], rosy_angle(reference[v], back, order));
        }
    }
    Ok(AuditReport::new(AuditKind::Basis, &diffs, scale_ref, AngularError::from_angles(angles_all), threshold))
}

/// A rigid motion drawn from `seed`, or the identity.
pub fn random_rigid_motion(seed: u64) -> (Vec3, f64, Vec3) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = normalized([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
    let angle = rng.random_range(-PI..PI);
    let t = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
    (axis, angle, t)
}

/// Rigidly moved copy of the mesh. Frames are intrinsic and deterministic,
/// so output coefficients should agree directly.
pub fn audit_rigid(params: &VhnParams, bundle: &MeshBundle, settings: &PrepSettings, motion: (Vec3, f64, Vec3), order: u32, threshold: f64) -> Result<AuditReport> {
    let params = pin_time_scale(params, bundle);
    let (axis, angle, t) = motion;
    let positions = bundle.mesh.positions().iter().map(|p| rigid_transform(*p, axis, angle, t)).collect();
    let moved = build(bundle.mesh.with_positions(positions)?, settings)?;
    compare_coefficients(AuditKind::Rigid, &params, bundle, &moved, order, threshold)
}

/// Two meshes with identical connectivity and (numerically) identical edge
/// lengths, compared coefficient by coefficient.
pub fn audit_isometry(params: &VhnParams, a: &MeshBundle, b: &MeshBundle, order: u32, threshold: f64) -> Result<AuditReport> {
    if a.mesh.faces() != b.mesh.faces() {
        return Err(VhnError::Validation("isometry audit needs two meshes with identical connectivity".into()));
    }
    let params = pin_time_scale(params, a);
    compare_coefficients(AuditKind::Isometry, &params, a, b, order, threshold)
}

fn compare_coefficients(kind: AuditKind, params: &VhnParams, a: &MeshBundle, b: &MeshBundle, order: u32, threshold: f64) -> Result<AuditReport> {
    let ua = predict(params, a)?;
    let ub = predict(params, b)?;
    let diffs: Vec<f64> = ua.iter().zip(&ub).map(|(x, y)| (x - y).norm()).collect();
    let scale = ua.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let angular = angular_error(&field(ua, order)?, &field(ub, order)?)?;
    Ok(AuditReport::new(kind, &diffs, scale, angular, threshold))
}

/// Closest point on triangle `abc` to `p`, as barycentric weights.
pub fn closest_point_barycentric(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> [f64; 3] {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Nearest surface point of `mesh` to `p`: face index and barycentric
/// weights. Brute force over faces.
pub fn nearest_surface_point(mesh: &SurfaceMesh, p: Vec3) -> (usize, [f64; 3]) {
    let pos = mesh.positions();
    let mut best = (f64::INFINITY, 0, [1.0, 0.0, 0.0]);
    for (f, face) in mesh.faces().iter().enumerate() {
        let (a, b, c) = (pos[face[0]], pos[face[1]], pos[face[2]]);
        let w = closest_point_barycentric(p, a, b, c);
        let q = add(add(scale(a, w[0]), scale(b, w[1])), scale(c, w[2]));
        let d = norm(sub(q, p));
        if d < best.0 {
            best = (d, f, w);
        }
    }
    (best.1, best.2)
}

/// Rotate `x` by the smallest rotation carrying unit normal `from` onto `to`.
fn minimal_rotation(x: Vec3, from: Vec3, to: Vec3) -> Vec3 {
    let v = cross(from, to);
    let c = dot(from, to);
    if c <= -1.0 + 1e-12 {
        // antipodal normals: no preferred rotation, leave the vector be
        return x;
    }
    add(add(scale(x, c), cross(v, x)), scale(v, dot(v, x) / (1.0 + c)))
}

/// Source field carried onto the target vertices: each target vertex takes
/// the nearest point on the source surface, the three corner vectors there
/// are rotated from their vertex tangent planes into the target tangent
/// plane, and their N-th powers are interpolated barycentrically.
pub fn transfer_field(source: &MeshBundle, u: &[Complex64], target: &MeshBundle, order: u32) -> Vec<Complex64> {
    let faces = source.mesh.faces();
    (0..target.num_vertices())
        .map(|t| {
            let p = target.mesh.positions()[t];
            let nt = target.mesh.vertex_normal(t);
            let (f, w) = nearest_surface_point(&source.mesh, p);
            let mut power = Complex64::new(0.0, 0.0);
            let mut magnitude = 0.0;
            for c in 0..3 {
                if w[c] == 0.0 {
                    continue;
                }
                let s = faces[f][c];
                let x = minimal_rotation(source.frame.embed(s, u[s]), source.mesh.vertex_normal(s), nt);
                let z = target.frame.project(t, x);
                power += z.powu(order) * w[c];
                magnitude += z.norm() * w[c];
            }
            let r = power.norm();
            if r == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(magnitude, power.arg() / order as f64)
            }
        })
        .collect()
}

/// Predict on both meshes, carry the source prediction onto the target and
/// compare there.
pub fn audit_remesh(params: &VhnParams, source: &MeshBundle, target: &MeshBundle, order: u32, threshold_deg: f64) -> Result<AuditReport> {
    let params = pin_time_scale(params, source);
    let us = predict(&params, source)?;
    let ut = predict(&params, target)?;
    let carried = transfer_field(source, &us, target, order);
    let n = order as f64;
    let mut diffs = Vec::with_capacity(ut.len());
    for (a, b) in carried.iter().zip(&ut) {
        // pick the representative of the carried class closest to the target
        let best = (0..order)
            .map(|k| a * Complex64::from_polar(1.0, TAU * k as f64 / n))
            .map(|z| (z - b).norm())
            .fold(f64::INFINITY, f64::min);
        diffs.push(best);
    }
    let scale = ut.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let angular = angular_error(&field(carried, order)?, &field(ut, order)?)?;
    Ok(AuditReport::new(AuditKind::Remesh, &diffs, scale, angular, threshold_deg))
}
