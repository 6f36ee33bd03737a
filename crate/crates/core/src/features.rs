//! Intrinsic tangent-vector input features.
//!
//! The default input is the vertex gradient of heat kernel signature
//! channels. Curvature-based alternatives (gradients of Gaussian and mean
//! curvature, scaled principal directions) are available for ablations.
//! All of them are expressed in the vertex tangent frames.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::frame::IntrinsicFrame;
use crate::mesh::{dot, sub, SurfaceMesh};
use crate::ops::{assemble_mass_matrix, assemble_scalar_laplacian, build_vertex_to_face_transport, face_gradient, faces_to_vertices, MassMatrix};
use crate::spectral::{solve_eigenbasis, EigenConfig, SpectralBasis};

/// Number of heat kernel signature channels.
pub const DEFAULT_HKS_CHANNELS: usize = 15;
/// Modes of the scalar eigenbasis used for the signature.
pub const DEFAULT_SCALAR_K: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Gradients of heat kernel signature channels.
    HksGradient,
    /// Gradient of Gaussian curvature.
    GaussianCurvatureGradient,
    /// Gradient of mean curvature.
    MeanCurvatureGradient,
    /// Principal curvature direction as a line field, scaled by anisotropy.
    PrincipalDirections,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::HksGradient => "hks-gradient",
            FeatureKind::GaussianCurvatureGradient => "gaussian-curvature-gradient",
            FeatureKind::MeanCurvatureGradient => "mean-curvature-gradient",
            FeatureKind::PrincipalDirections => "principal-directions",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FeatureKind::HksGradient,
            FeatureKind::GaussianCurvatureGradient,
            FeatureKind::MeanCurvatureGradient,
            FeatureKind::PrincipalDirections,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// Which channels to generate and how to post-process them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub kinds: Vec<FeatureKind>,
    pub hks_channels: usize,
    pub scalar_k: usize,
    pub normalize: bool,
    pub rotate_concat: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            kinds: vec![FeatureKind::HksGradient],
            hks_channels: DEFAULT_HKS_CHANNELS,
            scalar_k: DEFAULT_SCALAR_K,
            normalize: true,
            rotate_concat: true,
        }
    }
}

impl FeatureSpec {
    /// Width of the generated field.
    pub fn channels(&self) -> usize {
        let base: usize = self
            .kinds
            .iter()
            .map(|k| if *k == FeatureKind::HksGradient { self.hks_channels } else { 1 })
            .sum();
        if self.rotate_concat {
            2 * base
        } else {
            base
        }
    }

    /// Short textual description, stable across runs.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for (i, k) in self.kinds.iter().enumerate() {
            if i > 0 {
                s.push('+');
            }
            s.push_str(k.name());
        }
        s.push_str(&alloc::format!(
            ";hks={};k={};normalize={};rotate={}",
            self.hks_channels, self.scalar_k, self.normalize, self.rotate_concat
        ));
        s
    }
}

/// `n x c` vertex-frame coefficients plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    pub values: CMat,
    pub provenance: String,
    /// Fingerprint of the frame the coefficients refer to.
    pub frame: u64,
}

impl FeatureField {
    pub fn channels(&self) -> usize {
        self.values.cols()
    }
}

/// Eigenbasis of the cotan Laplacian, used for the heat kernel signature.
pub fn scalar_basis(mesh: &SurfaceMesh, k: usize, config: &EigenConfig) -> Result<SpectralBasis> {
    let l = assemble_scalar_laplacian(mesh).to_complex();
    let mass = assemble_mass_matrix(mesh);
    solve_eigenbasis(&l, &mass, k.min(mesh.num_vertices()), config)
}

/// Log-spaced diffusion times on `[4 ln 10 / λ_k, 4 ln 10 / λ_2]`.
pub fn default_hks_times(basis: &SpectralBasis, count: usize) -> Result<Vec<f64>> {
    let values = &basis.values;
    if values.len() < 2 {
        return Err(Error::TooManyModes { k: 2, n: values.len() });
    }
    let top = values[values.len() - 1];
    if !(values[1] > 1e-10 * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::Disconnected);
    }
    let lo = (4.0 * 10f64.ln() / top).ln();
    let hi = (4.0 * 10f64.ln() / values[1]).ln();
    Ok((0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            (lo + t * (hi - lo)).exp()
        })
        .collect())
}

/// `HKS(v, t) = Σ_i exp(−λ_i t) |φ_i(v)|²`, one column per time.
pub fn hks_scalar(basis: &SpectralBasis, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if basis.values.len() >= 2 && !(basis.values[1] > 1e-10 * basis.values.last().unwrap().max(f64::MIN_POSITIVE)) {
        return Err(Error::Disconnected);
    }
    if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0)) {
        return Err(Error::NegativeTime(t));
    }
    let n = basis.n();
    Ok(times
        .iter()
        .map(|&t| {
            let decay: Vec<f64> = basis.values.iter().map(|l| (-l * t).exp()).collect();
            (0..n)
                .map(|v| basis.vectors.row(v).iter().zip(&decay).map(|(z, d)| d * z.norm_sqr()).sum())
                .collect()
        })
        .collect())
}

/// Vertex gradient: per-face gradients carried back into vertex frames and
/// averaged with incident face areas.
pub fn gradient_feature(mesh: &SurfaceMesh, frame: &IntrinsicFrame, scalar: &[f64]) -> Result<Vec<Complex64>> {
    let tfo = build_vertex_to_face_transport(mesh, frame);
    faces_to_vertices(mesh, &tfo, &face_gradient(mesh, scalar)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureFeatures {
    pub gaussian: Vec<f64>,
    pub mean: Vec<f64>,
    /// Principal direction as a 2-RoSy representative, length `|κ1 − κ2|`.
    pub pcd: Vec<Complex64>,
    /// Vertices whose quadric fit was rank deficient (their `pcd` is zero).
    pub rank_deficient: Vec<usize>,
}

/// `2π − Θ` at interior vertices, `π − Θ` on the boundary.
pub fn angle_defects(mesh: &SurfaceMesh) -> Vec<f64> {
    let mut total = vec![0.0; mesh.num_vertices()];
    for (f, face) in mesh.faces().iter().enumerate() {
        for c in 0..3 {
            total[face[c]] += mesh.corner_angle(3 * f + c);
        }
    }
    total
        .iter()
        .enumerate()
        .map(|(v, t)| if mesh.is_boundary(v) { PI - t } else { 2.0 * PI - t })
        .collect()
}

pub fn curvature_features(mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> Result<CurvatureFeatures> {
    let n = mesh.num_vertices();
    let mass = assemble_mass_matrix(mesh);
    let gaussian: Vec<f64> = angle_defects(mesh).iter().zip(&mass.diag).map(|(d, a)| d / a).collect();

    let l = assemble_scalar_laplacian(mesh);
    let voronoi = mixed_voronoi_areas(mesh);
    let p = mesh.positions();
    let mut lx = vec![[0.0; 3]; n];
    for (r, out) in lx.iter_mut().enumerate() {
        for (c, w) in l.row(r) {
            for d in 0..3 {
                out[d] += w * p[c][d];
            }
        }
    }
    let mean = (0..n)
        .map(|v| {
            let hn: [f64; 3] = core::array::from_fn(|d| lx[v][d] / voronoi[v]);
            let mag = 0.5 * dot(hn, hn).sqrt();
            if dot(hn, mesh.vertex_normal(v)) < 0.0 {
                -mag
            } else {
                mag
            }
        })
        .collect();

    let mut pcd = Vec::with_capacity(n);
    let mut rank_deficient = Vec::new();
    for v in 0..n {
        match quadric_shape_operator(mesh, frame, v) {
            Some([a, b, c]) => {
                // traceless part of [[2a, b], [b, 2c]] in doubled-angle form
                let power = Complex64::new(2.0 * a - 2.0 * c, 2.0 * b);
                let mag = power.norm();
                if mag == 0.0 {
                    pcd.push(Complex64::new(0.0, 0.0));
                } else {
                    let mut phi = 0.5 * power.im.atan2(power.re);
                    if phi < 0.0 {
                        phi += PI;
                    }
                    pcd.push(Complex64::from_polar(mag, phi));
                }
            }
            None => {
                rank_deficient.push(v);
                pcd.push(Complex64::new(0.0, 0.0));
            }
        }
    }
    Ok(CurvatureFeatures { gaussian, mean, pcd, rank_deficient })
}

/// Mixed Voronoi vertex areas: circumcentric cells for non-obtuse triangles,
/// half or quarter of the triangle otherwise.
pub fn mixed_voronoi_areas(mesh: &SurfaceMesh) -> Vec<f64> {
    let mut area = vec![0.0; mesh.num_vertices()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(f);
        let obtuse = (0..3).find(|&c| mesh.corner_angle(3 * f + c) > 0.5 * PI);
        for c in 0..3 {
            area[face[c]] += match obtuse {
                Some(o) if o == c => 0.5 * a,
                Some(_) => 0.25 * a,
                None => {
                    // edges c -> c+1 and c+2 -> c, weighted by their opposite cotangents
                    let l_next = mesh.edge_length(3 * f + c);
                    let l_prev = mesh.edge_length(3 * f + (c + 2) % 3);
                    let cot_next = mesh.corner_cotan(3 * f + (c + 2) % 3);
                    let cot_prev = mesh.corner_cotan(3 * f + (c + 1) % 3);
                    0.125 * (l_next * l_next * cot_next + l_prev * l_prev * cot_prev)
                }
            };
        }
    }
    area
}

/// Least-squares fit of `h = a x² + b xy + c y² + d x + e y` over the one
/// ring, with `(x, y)` the intrinsic polar layout of each neighbour and `h`
/// its height along the vertex normal. Returns `[a, b, c]`.
fn quadric_shape_operator(mesh: &SurfaceMesh, frame: &IntrinsicFrame, v: usize) -> Option<[f64; 3]> {
    let nbrs = frame.ring_neighbors(v);
    let angles = frame.ring_angles(v);
    if nbrs.len() < 5 {
        return None;
    }
    let p = mesh.positions();
    let normal = mesh.vertex_normal(v);
    let mut ata = [[0.0; 5]; 5];
    let mut atb = [0.0; 5];
    let mut scale = 0.0;
    for (&j, &theta) in nbrs.iter().zip(angles) {
        let d = sub(p[j], p[v]);
        let len = dot(d, d).sqrt();
        scale += len;
        let (x, y) = (len * theta.cos(), len * theta.sin());
        let h = dot(d, normal);
        let row = [x * x, x * y, y * y, x, y];
        for r in 0..5 {
            atb[r] += row[r] * h;
            for c in 0..5 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    // equilibrate so the pivot test is scale free
    let s: [f64; 5] = core::array::from_fn(|i| if ata[i][i] > 0.0 { 1.0 / ata[i][i].sqrt() } else { 0.0 });
    if s.iter().any(|&x| x == 0.0) || !(scale > 0.0) {
        return None;
    }
    for r in 0..5 {
        atb[r] *= s[r];
        for c in 0..5 {
            ata[r][c] *= s[r] * s[c];
        }
    }
    let sol = solve_spd5(ata, atb)?;
    Some([sol[0] * s[0], sol[1] * s[1], sol[2] * s[2]])
}

fn solve_spd5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    for k in 0..5 {
        let d = a[k][k];
        if !(d > 1e-10) {
            return None;
        }
        let d = d.sqrt();
        a[k][k] = d;
        for i in k + 1..5 {
            a[i][k] /= d;
        }
        for j in k + 1..5 {
            for i in j..5 {
                a[i][j] -= a[i][k] * a[j][k];
            }
        }
    }
    for i in 0..5 {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    for i in (0..5).rev() {
        for k in i + 1..5 {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Some(b)
}

/// Scale each channel to unit mass-weighted mean magnitude and optionally
/// append every channel rotated by a quarter turn.
pub fn normalize_and_augment(field: &FeatureField, mass: &MassMatrix, length_scale: f64, normalize: bool, rotate_concat: bool) -> Result<FeatureField> {
    let (n, c) = (field.values.rows(), field.values.cols());
    if mass.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mass.len() });
    }
    let total = mass.trace();
    let width = if rotate_concat { 2 * c } else { c };
    let mut out = CMat::zeros(n, width);
    for ch in 0..c {
        let mean = (0..n).map(|v| mass.diag[v] * field.values[(v, ch)].norm()).sum::<f64>() / total;
        let factor = if normalize && mean >= 1e-12 * length_scale { 1.0 / mean } else { 1.0 };
        for v in 0..n {
            let z = field.values[(v, ch)] * factor;
            out[(v, ch)] = z;
            if rotate_concat {
                out[(v, c + ch)] = Complex64::new(-z.im, z.re);
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("feature normalization".into()));
    }
    Ok(FeatureField { values: out, provenance: field.provenance.clone(), frame: field.frame })
}

/// Raw (unnormalized, unaugmented) channels for `spec`.
pub fn raw_features(mesh: &SurfaceMesh, frame: &IntrinsicFrame, scalar: &SpectralBasis, spec: &FeatureSpec) -> Result<FeatureField> {
    let n = mesh.num_vertices();
    let mut columns: Vec<Vec<Complex64>> = Vec::new();
    let mut curvature: Option<CurvatureFeatures> = None;
    for kind in &spec.kinds {
        match kind {
            FeatureKind::HksGradient => {
                let times = default_hks_times(scalar, spec.hks_channels)?;
                for hks in hks_scalar(scalar, &times)? {
                    columns.push(gradient_feature(mesh, frame, &hks)?);
                }
            }
            other => {
                if curvature.is_none() {
                    curvature = Some(curvature_features(mesh, frame)?);
                }
                let cf = curvature.as_ref().unwrap();
                columns.push(match other {
                    FeatureKind::GaussianCurvatureGradient => gradient_feature(mesh, frame, &cf.gaussian)?,
                    FeatureKind::MeanCurvatureGradient => gradient_feature(mesh, frame, &cf.mean)?,
                    _ => cf.pcd.clone(),
                });
            }
        }
    }
    let values = CMat::from_fn(n, columns.len(), |v, c| columns[c][v]);
    Ok(FeatureField { values, provenance: spec.describe(), frame: frame.fingerprint() })
}

/// Full feature pipeline: raw channels, normalization and augmentation.
pub fn compute_features(mesh: &SurfaceMesh, frame: &IntrinsicFrame, scalar: &SpectralBasis, spec: &FeatureSpec) -> Result<FeatureField> {
    let raw = raw_features(mesh, frame, scalar, spec)?;
    let mass = assemble_mass_matrix(mesh);
    normalize_and_augment(&raw, &mass, mesh.bbox_diagonal(), spec.normalize, spec.rotate_concat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::build_frames;
    use crate::shapes;

    #[test]
    fn default_spec_has_thirty_channels() {
        let spec = FeatureSpec::default();
        assert_eq!(spec.hks_channels, 15);
        assert_eq!(spec.channels(), 30);
        assert_eq!(FeatureKind::parse("hks-gradient"), Some(FeatureKind::HksGradient));
    }

    #[test]
    fn hks_on_the_icosphere() {
        let mesh = shapes::icosphere(4);
        let basis = scalar_basis(&mesh, 128, &EigenConfig::default()).unwrap();
        let times = default_hks_times(&basis, 15).unwrap();
        assert_eq!(times.len(), 15);
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        let hks = hks_scalar(&basis, &times).unwrap();
        assert_eq!(hks.len(), 15);
        for col in &hks {
            let max = col.iter().copied().fold(f64::MIN, f64::max);
            let min = col.iter().copied().fold(f64::MAX, f64::min);
            assert!(max / min < 1.02, "{}", max / min);
        }
        // long times leave only the constant mode
        let late = hks_scalar(&basis, &[100.0]).unwrap();
        let area = mesh.total_area();
        let worst = late[0].iter().map(|h| (h * area - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        let a = shapes::icosahedron();
        let mut p = a.positions().to_vec();
        let mut f = a.faces().to_vec();
        let offset = p.len();
        p.extend(a.positions().iter().map(|x| [x[0] + 5.0, x[1], x[2]]));
        f.extend(a.faces().iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        let two = SurfaceMesh::new(p, f).unwrap();
        let basis = scalar_basis(&two, 6, &EigenConfig::default()).unwrap();
        assert!(matches!(default_hks_times(&basis, 15), Err(Error::Disconnected)));
        assert!(matches!(hks_scalar(&basis, &[1.0]), Err(Error::Disconnected)));
    }

    #[test]
    fn gradient_of_linear_field_on_flat_sheet() {
        let mesh = shapes::grid(6, 5, 0.25);
        let frame = IntrinsicFrame::from_global_basis(&mesh, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        let f: Vec<f64> = mesh.positions().iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 1.0).collect();
        let g = gradient_feature(&mesh, &frame, &f).unwrap();
        for v in 0..mesh.num_vertices() {
            assert!((g[v] - Complex64::new(2.0, -3.0)).norm() < 1e-10);
        }
        let zero = gradient_feature(&mesh, &frame, &vec![4.0; mesh.num_vertices()]).unwrap();
        assert!(zero.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn height_gradient_on_the_sphere() {
        // surface gradient of z on the unit sphere has length sqrt(1 - z²)
        // and points towards the north pole
        let mesh = shapes::icosphere(3);
        let frame = build_frames(&mesh).unwrap();
        let f: Vec<f64> = mesh.positions().iter().map(|p| p[2]).collect();
        let g = gradient_feature(&mesh, &frame, &f).unwrap();
        for (v, p) in mesh.positions().iter().enumerate() {
            let want = [-p[2] * p[0], -p[2] * p[1], 1.0 - p[2] * p[2]];
            let got = frame.embed(v, g[v]);
            let err = (0..3).map(|d| (got[d] - want[d]).powi(2)).sum::<f64>().sqrt();
            assert!(err < 0.05, "vertex {v}: {err}");
        }
    }

    #[test]
    fn gauss_bonnet_and_flat_curvature() {
        let ico = shapes::icosahedron();
        let total: f64 = angle_defects(&ico).iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-10);
        let cube = shapes::cube(3);
        let total: f64 = angle_defects(&cube).iter().sum();
        assert!((total - 2.0 * PI * cube.euler_characteristic() as f64).abs() < 1e-10);

        let sheet = shapes::grid(4, 4, 0.5);
        let frame = build_frames(&sheet).unwrap();
        let cf = curvature_features(&sheet, &frame).unwrap();
        for v in 0..sheet.num_vertices() {
            if !sheet.is_boundary(v) {
                assert!(cf.gaussian[v].abs() < 1e-10);
                assert!(cf.mean[v].abs() < 1e-10);
                assert!(cf.pcd[v].norm() < 1e-10);
            }
        }
    }

    #[test]
    fn voronoi_areas_partition_the_surface() {
        for mesh in [shapes::icosphere(2), shapes::cone(7, 0.6), shapes::bumpy_sphere(1)] {
            let total: f64 = mixed_voronoi_areas(&mesh).iter().sum();
            assert!((total - mesh.total_area()).abs() < 1e-12 * mesh.total_area());
        }
    }

    #[test]
    fn sphere_mean_curvature_is_one() {
        let mesh = shapes::icosphere(4);
        let frame = build_frames(&mesh).unwrap();
        let cf = curvature_features(&mesh, &frame).unwrap();
        assert!(cf.mean.iter().all(|h| (h - 1.0).abs() < 0.1));
        // barycentric cells are only accurate at regular vertices
        assert!((0..mesh.num_vertices()).filter(|&v| mesh.ring(v).len() == 6).all(|v| (cf.gaussian[v] - 1.0).abs() < 0.1));
        assert!(cf.rank_deficient.is_empty());
        // umbilic everywhere, so the scaled principal directions are small
        assert!(cf.pcd.iter().all(|z| z.norm() < 0.1));
    }

    #[test]
    fn cylinder_principal_direction_follows_the_axis() {
        // wrap a grid around a cylinder of radius 1 along y; curvature is
        // 1 around the circumference and 0 along the axis
        let flat = shapes::grid(40, 6, 2.0 * PI / 40.0);
        let mesh = shapes::deformed(&flat, |p| [p[0].cos(), p[1], p[0].sin()]);
        let frame = build_frames(&mesh).unwrap();
        let cf = curvature_features(&mesh, &frame).unwrap();
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary(v) || cf.rank_deficient.contains(&v) {
                continue;
            }
            assert!((cf.pcd[v].norm() - 1.0).abs() < 0.05, "{}", cf.pcd[v].norm());
            // the max-curvature line lies along the circumference, orthogonal to y
            let dir = frame.embed(v, cf.pcd[v] / cf.pcd[v].norm());
            assert!(dir[1].abs() < 0.05);
        }
    }

    #[test]
    fn normalization_and_rotation() {
        let mesh = shapes::icosahedron();
        let mass = assemble_mass_matrix(&mesh);
        let n = mesh.num_vertices();
        let values = CMat::from_fn(n, 2, |v, c| if c == 0 { Complex64::from_polar(2.0, v as f64) } else { Complex64::new(0.0, 0.0) });
        let field = FeatureField { values, provenance: String::new(), frame: 0 };
        let out = normalize_and_augment(&field, &mass, mesh.bbox_diagonal(), true, true).unwrap();
        assert_eq!(out.channels(), 4);
        for v in 0..n {
            assert!((out.values[(v, 0)].norm() - 1.0).abs() < 1e-12);
            assert_eq!(out.values[(v, 1)], Complex64::new(0.0, 0.0));
            assert_eq!(out.values[(v, 2)], out.values[(v, 0)] * Complex64::i());
            assert_eq!(out.values[(v, 2)].norm(), out.values[(v, 0)].norm());
        }
    }

    #[test]
    fn default_pipeline_is_normalized_and_rigid_invariant() {
        let mesh = shapes::bumpy_sphere(2);
        let spec = FeatureSpec::default();
        let cfg = EigenConfig::default();
        let run = |m: &SurfaceMesh| {
            let frame = build_frames(m).unwrap();
            let basis = scalar_basis(m, spec.scalar_k, &cfg).unwrap();
            compute_features(m, &frame, &basis, &spec).unwrap()
        };
        let a = run(&mesh);
        assert_eq!(a.channels(), 30);
        let mass = assemble_mass_matrix(&mesh);
        for c in 0..30 {
            let mean = (0..mesh.num_vertices()).map(|v| mass.diag[v] * a.values[(v, c)].norm()).sum::<f64>() / mass.trace();
            assert!((mean - 1.0).abs() < 1e-8);
        }
        let moved = shapes::deformed(&mesh, |p| shapes::rigid_transform(p, [1.0, 2.0, 0.5], 0.7, [0.3, -1.0, 2.0]));
        let b = run(&moved);
        assert!(a.values.max_diff(&b.values) < 1e-8, "{}", a.values.max_diff(&b.values));
    }
}
