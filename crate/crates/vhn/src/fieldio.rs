//! ASCII field files.
//!
//! ```text
//! VHNFIELD 1
//! domain vertices
//! order 4
//! count 642
//! frame 5f1c0e7d2a9b3c41
//! 0 re im e0x e0y e0z e1x e1y e1z vx vy vz
//! ...
//! ```
//!
//! Every float is written with 17 significant digits, which reproduces the
//! `f64` exactly on import. The embedded vector `re e0 + im e1` lets viewers
//! and downstream tools ignore frames entirely. Vertex fields refer to the
//! intrinsic vertex frames; face fields to the per-face frames, which depend
//! on the mesh alone.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vhn_core::mesh::Vec3;
use vhn_core::ops::face_basis;
use vhn_core::rosy::{Domain, RosyField};
use vhn_core::{Complex64, Error, IntrinsicFrame, SurfaceMesh};

use crate::binfmt::write_atomic;
use crate::error::{Result, VhnError};

const MAGIC: &str = "VHNFIELD";
const CROSS_MAGIC: &str = "VHNCROSS";
const VERSION: u32 = 1;

/// Fingerprint a field on `domain` of `mesh` must carry.
pub fn domain_frame(domain: Domain, mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> u64 {
    match domain {
        Domain::Vertices => frame.fingerprint(),
        Domain::Faces => mesh.fingerprint(),
    }
}

fn element_basis(domain: Domain, mesh: &SurfaceMesh, frame: &IntrinsicFrame, i: usize) -> (Vec3, Vec3) {
    match domain {
        Domain::Vertices => (frame.e0(i), frame.e1(i)),
        Domain::Faces => face_basis(mesh, i),
    }
}

fn embed(e0: Vec3, e1: Vec3, u: Complex64) -> Vec3 {
    [u.re * e0[0] + u.im * e1[0], u.re * e0[1] + u.im * e1[1], u.re * e0[2] + u.im * e1[2]]
}

fn check_consistent(field: &RosyField, mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> Result<()> {
    let expected = match field.domain {
        Domain::Vertices => mesh.num_vertices(),
        Domain::Faces => mesh.num_faces(),
    };
    if field.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: field.len() }.into());
    }
    if frame.mesh_fingerprint() != mesh.fingerprint() || field.frame != domain_frame(field.domain, mesh, frame) {
        return Err(Error::FingerprintMismatch.into());
    }
    Ok(())
}

/// Embedded 3D vectors of every element.
pub fn embedded_vectors(field: &RosyField, mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> Result<Vec<Vec3>> {
    check_consistent(field, mesh, frame)?;
    Ok(field
        .values
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let (e0, e1) = element_basis(field.domain, mesh, frame, i);
            embed(e0, e1, *u)
        })
        .collect())
}

pub fn field_to_string(field: &RosyField, mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> Result<String> {
    check_consistent(field, mesh, frame)?;
    let mut s = String::with_capacity(field.len() * 240);
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "domain {}", field.domain.as_str());
    let _ = writeln!(s, "order {}", field.order);
    let _ = writeln!(s, "count {}", field.len());
    let _ = writeln!(s, "frame {:016x}", field.frame);
    for (i, u) in field.values.iter().enumerate() {
        let (e0, e1) = element_basis(field.domain, mesh, frame, i);
        let v = embed(e0, e1, *u);
        let _ = write!(s, "{i} {:.16e} {:.16e}", u.re, u.im);
        for x in e0.iter().chain(&e1).chain(&v) {
            let _ = write!(s, " {x:.16e}");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn export_field(field: &RosyField, mesh: &SurfaceMesh, frame: &IntrinsicFrame, path: &Path) -> Result<()> {
    write_atomic(path, field_to_string(field, mesh, frame)?.as_bytes())
}

fn header_value<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str, path: &Path) -> Result<(usize, &'a str)> {
    let (no, line) = lines.next().ok_or_else(|| VhnError::format(path, format!("missing {key} line")))?;
    match line.split_once(' ') {
        Some((k, v)) if k == key => Ok((no, v.trim())),
        _ => Err(VhnError::Parse { path: path.to_path_buf(), line: no, message: format!("expected {key:?}") }),
    }
}

pub fn parse_field(text: &str, path: &Path) -> Result<RosyField> {
    let perr = |line: usize, message: String| VhnError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, magic) = lines.next().ok_or_else(|| VhnError::format(path, "empty file"))?;
    if magic.trim() != format!("{MAGIC} {VERSION}") {
        return Err(perr(1, format!("expected \"{MAGIC} {VERSION}\"")));
    }
    let (no, domain) = header_value(&mut lines, "domain", path)?;
    let domain = match domain {
        "vertices" => Domain::Vertices,
        "faces" => Domain::Faces,
        other => return Err(perr(no, format!("unknown domain {other:?}"))),
    };
    let (no, order) = header_value(&mut lines, "order", path)?;
    let order: u32 = order.parse().map_err(|_| perr(no, "bad order".into()))?;
    let (no, count) = header_value(&mut lines, "count", path)?;
    let count: usize = count.parse().map_err(|_| perr(no, "bad count".into()))?;
    let (no, frame) = header_value(&mut lines, "frame", path)?;
    let frame = u64::from_str_radix(frame, 16).map_err(|_| perr(no, "bad frame fingerprint".into()))?;
    let mut values = Vec::with_capacity(count);
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut t = line.split_whitespace();
        let idx: usize = t.next().and_then(|x| x.parse().ok()).ok_or_else(|| perr(no, "bad index".into()))?;
        if idx != values.len() {
            return Err(perr(no, format!("expected element {}, found {idx}", values.len())));
        }
        let mut num = || -> Result<f64> { t.next().and_then(|x| x.parse().ok()).ok_or_else(|| perr(no, "bad coefficient".into())) };
        let re = num()?;
        let im = num()?;
        values.push(Complex64::new(re, im));
    }
    if values.len() != count {
        return Err(VhnError::format(path, format!("header announces {count} elements, found {}", values.len())));
    }
    Ok(RosyField::new(values, order, domain, frame)?)
}

pub fn import_field(path: &Path) -> Result<RosyField> {
    let text = fs::read_to_string(path).map_err(|e| VhnError::io(path, e))?;
    parse_field(&text, path)
}

/// Per-face crosses for quad-meshing tools: each line holds the face index
/// followed by the `N` symmetric directions `u e^{2πik/N}` as 3D vectors.
pub fn crosses_to_string(field: &RosyField, mesh: &SurfaceMesh, frame: &IntrinsicFrame) -> Result<String> {
    if field.domain != Domain::Faces {
        return Err(VhnError::Validation("cross export needs a face field".into()));
    }
    check_consistent(field, mesh, frame)?;
    let n = field.order;
    let mut s = String::new();
    let _ = writeln!(s, "{CROSS_MAGIC} {VERSION}");
    let _ = writeln!(s, "order {n}");
    let _ = writeln!(s, "count {}", field.len());
    for (f, u) in field.values.iter().enumerate() {
        let (e0, e1) = face_basis(mesh, f);
        let _ = write!(s, "{f}");
        for k in 0..n {
            let r = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64);
            for x in embed(e0, e1, u * r) {
                let _ = write!(s, " {x:.16e}");
            }
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn export_crosses(field: &RosyField, mesh: &SurfaceMesh, frame: &IntrinsicFrame, path: &Path) -> Result<()> {
    write_atomic(path, crosses_to_string(field, mesh, frame)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use vhn_core::frame::build_frames;
    use vhn_core::mesh::SurfaceMesh;
    use vhn_core::shapes;

    fn triangle() -> SurfaceMesh {
        SurfaceMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn embedded_vector_uses_the_frame() {
        let mesh = triangle();
        let frame = build_frames(&mesh).unwrap();
        // the first outgoing edge of vertex 0 runs along x
        assert!((frame.e0(0)[0] - 1.0).abs() < 1e-15);
        let mut values = vec![Complex64::new(0.0, 0.0); 3];
        values[0] = Complex64::new(1.0, 0.0);
        let field = RosyField::new(values, 4, Domain::Vertices, frame.fingerprint()).unwrap();
        let text = field_to_string(&field, &mesh, &frame).unwrap();
        let first = text.lines().nth(5).unwrap();
        let nums: Vec<f64> = first.split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect();
        assert_eq!(&nums[8..], &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn wrong_frame_is_rejected() {
        let mesh = shapes::icosahedron();
        let frame = build_frames(&mesh).unwrap();
        let field = RosyField::new(vec![Complex64::new(1.0, 0.0); 12], 4, Domain::Vertices, 7).unwrap();
        assert!(field_to_string(&field, &mesh, &frame).is_err());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let p = Path::new("f");
        assert!(parse_field("", p).is_err());
        assert!(parse_field("VHNFIELD 2\n", p).is_err());
        let ok = "VHNFIELD 1\ndomain faces\norder 4\ncount 1\nframe 00000000000000ff\n0 1 2\n";
        let f = parse_field(ok, p).unwrap();
        assert_eq!((f.domain, f.order, f.frame), (Domain::Faces, 4, 255));
        assert!(parse_field(&ok.replace("count 1", "count 2"), p).is_err());
        assert!(parse_field(&ok.replace("\n0 1 2", "\n3 1 2"), p).unwrap_err().to_string().contains(":6:"));
    }

    #[test]
    fn crosses_hold_n_rotated_copies() {
        let mesh = triangle();
        let frame = build_frames(&mesh).unwrap();
        let field = RosyField::new(vec![Complex64::new(2.0, 0.0)], 4, Domain::Faces, mesh.fingerprint()).unwrap();
        let text = crosses_to_string(&field, &mesh, &frame).unwrap();
        let nums: Vec<f64> = text.lines().nth(3).unwrap().split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect();
        assert_eq!(nums.len(), 12);
        let want = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [-2.0, 0.0, 0.0], [0.0, -2.0, 0.0]];
        for (k, w) in want.iter().enumerate() {
            for d in 0..3 {
                assert!((nums[3 * k + d] - w[d]).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(seed in any::<u64>(), order in 1u32..7) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mesh = shapes::icosahedron();
            let frame = build_frames(&mesh).unwrap();
            let values = (0..12).map(|_| Complex64::new(rng.random_range(-1e3..1e3) * rng.random::<f64>().powi(20), rng.random::<f64>() - 0.5)).collect();
            let field = RosyField::new(values, order, Domain::Vertices, frame.fingerprint()).unwrap();
            let back = parse_field(&field_to_string(&field, &mesh, &frame).unwrap(), Path::new("f")).unwrap();
            prop_assert_eq!(back, field);
        }
    }
}
