//! Wavefront OBJ input. Only `v` and `f` records matter; everything else
//! (normals, texture coordinates, groups, materials) is skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vhn_core::mesh::Vec3;
use vhn_core::SurfaceMesh;

use crate::error::{Result, VhnError};

/// Raw vertex and face lists before mesh validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjData {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| VhnError::io(path, e))?;
    let data = parse_obj(&text, path)?;
    Ok(SurfaceMesh::new(data.positions, data.faces)?)
}

pub fn parse_obj(text: &str, path: &Path) -> Result<ObjData> {
    let err = |line: usize, message: String| VhnError::Parse { path: path.to_path_buf(), line, message };
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut p = [0.0f64; 3];
                for c in p.iter_mut() {
                    let t = tokens.next().ok_or_else(|| err(line_no, "vertex needs three coordinates".into()))?;
                    *c = t.parse().map_err(|_| err(line_no, format!("bad coordinate {t:?}")))?;
                    if !c.is_finite() {
                        return Err(err(line_no, format!("non-finite coordinate {t:?}")));
                    }
                }
                // an optional fourth (w) coordinate is allowed and ignored
                positions.push(p);
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(3);
                for t in tokens {
                    let head = t.split('/').next().unwrap_or("");
                    let v: i64 = head.parse().map_err(|_| err(line_no, format!("bad face index {t:?}")))?;
                    let resolved = if v > 0 {
                        v - 1
                    } else if v < 0 {
                        positions.len() as i64 + v
                    } else {
                        return Err(err(line_no, "face index 0 is invalid (indices are 1-based)".into()));
                    };
                    if resolved < 0 {
                        return Err(err(line_no, format!("face index {v} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() != 3 {
                    return Err(err(line_no, format!("non-triangular face with {} vertices", idx.len())));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok(ObjData { positions, faces })
}

pub fn to_obj_string(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    for p in mesh.positions() {
        let _ = writeln!(s, "v {:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_obj(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_obj_string(mesh)).map_err(|e| VhnError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use vhn_core::shapes;

    fn parse(text: &str) -> Result<ObjData> {
        parse_obj(text, Path::new("test.obj"))
    }

    #[test]
    fn right_triangle() {
        let d = parse("# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n").unwrap();
        let m = SurfaceMesh::new(d.positions, d.faces).unwrap();
        assert_eq!(m.num_faces(), 1);
        assert!((m.total_area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quad_face_is_rejected_with_line_number() {
        let e = parse("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("non-triangular face"), "{msg}");
        assert!(msg.contains(":5:"), "{msg}");
    }

    #[test]
    fn malformed_lines_report_their_line() {
        assert!(parse("v 0 0\n").unwrap_err().to_string().contains(":1:"));
        assert!(parse("v 0 0 0\nv 1 0 x\n").unwrap_err().to_string().contains(":2:"));
        assert!(parse("v 0 0 0\nf 0 1 2\n").is_err());
    }

    #[test]
    fn negative_indices_are_relative() {
        let d = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(d.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn round_trip_preserves_geometry() {
        let m = shapes::icosahedron();
        let d = parse(&to_obj_string(&m)).unwrap();
        assert_eq!(d.faces, m.faces());
        assert_eq!(d.positions, m.positions());
    }
}
