//! Validated manifold triangle meshes.
//!
//! Halfedge `h = 3 * f + c` runs from `faces[f][c]` to `faces[f][(c + 1) % 3]`;
//! the same index names the corner of face `f` at vertex `faces[f][c]`.
//! Corner angles, cotangents and areas are computed from edge lengths only.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fingerprint::Fnv;

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: Vec3) -> Vec3 {
    let l = norm(a);
    if l > 0.0 {
        scale(a, 1.0 / l)
    } else {
        a
    }
}

/// Validation thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshConfig {
    /// Faces with area below `area_epsilon * bbox_diagonal^2` are rejected.
    pub area_epsilon: f64,
    /// Edges shorter than `edge_epsilon * bbox_diagonal` cannot seed a frame.
    pub edge_epsilon: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { area_epsilon: 1e-12, edge_epsilon: 1e-14 }
    }
}

/// One outgoing edge in a vertex's counterclockwise one-ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingEntry {
    pub neighbor: usize,
    /// Corner (halfedge index) spanning the wedge from this edge to the next
    /// one in counterclockwise order. `None` for the last edge of a boundary
    /// vertex.
    pub wedge: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    positions: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    twin: Vec<Option<usize>>,
    edge_length: Vec<f64>,
    corner_angle: Vec<f64>,
    corner_cotan: Vec<f64>,
    face_area: Vec<f64>,
    face_normal: Vec<Vec3>,
    vertex_area: Vec<f64>,
    vertex_normal: Vec<Vec3>,
    ring_offsets: Vec<usize>,
    ring: Vec<RingEntry>,
    boundary: Vec<bool>,
    num_edges: usize,
    bbox_diagonal: f64,
    fingerprint: u64,
}

impl SurfaceMesh {
    pub fn new(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_config(positions, faces, &MeshConfig::default())
    }

    pub fn with_config(
        positions: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        config: &MeshConfig,
    ) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = positions.len();
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= n {
                    return Err(Error::IndexOutOfRange { face: f, index: v, count: n });
                }
            }
            if face[0] == face[1] || face[0] == face[2] {
                return Err(Error::RepeatedVertex { face: f, vertex: face[0] });
            }
            if face[1] == face[2] {
                return Err(Error::RepeatedVertex { face: f, vertex: face[1] });
            }
        }

        let twin = build_twins(&faces)?;
        let num_edges = twin.iter().enumerate().filter(|(h, t)| t.map_or(true, |t| t > *h)).count();
        let (ring_offsets, ring, boundary) = build_rings(n, &faces, &twin)?;

        let bbox_diagonal = bounding_diagonal(&positions);
        let area_threshold = config.area_epsilon * bbox_diagonal * bbox_diagonal;

        let nh = 3 * faces.len();
        let mut edge_length = vec![0.0; nh];
        for (f, face) in faces.iter().enumerate() {
            for c in 0..3 {
                edge_length[3 * f + c] = norm(sub(positions[face[(c + 1) % 3]], positions[face[c]]));
            }
        }

        let mut corner_angle = vec![0.0; nh];
        let mut corner_cotan = vec![0.0; nh];
        let mut face_area = vec![0.0; faces.len()];
        let mut face_normal = vec![[0.0; 3]; faces.len()];
        for (f, face) in faces.iter().enumerate() {
            let l = [edge_length[3 * f], edge_length[3 * f + 1], edge_length[3 * f + 2]];
            let area = heron_area(l[0], l[1], l[2]);
            if !(area > area_threshold) {
                return Err(Error::DegenerateFace { face: f, area, threshold: area_threshold });
            }
            face_area[f] = area;
            for c in 0..3 {
                // sides adjacent to corner c: l[c] (c -> c+1) and l[c+2] (c+2 -> c)
                let opp = l[(c + 1) % 3];
                let (b, d) = (l[c], l[(c + 2) % 3]);
                let num = b * b + d * d - opp * opp;
                corner_cotan[3 * f + c] = num / (4.0 * area);
                corner_angle[3 * f + c] = (4.0 * area).atan2(num);
            }
            let p = [positions[face[0]], positions[face[1]], positions[face[2]]];
            face_normal[f] = normalized(cross(sub(p[1], p[0]), sub(p[2], p[0])));
        }

        let mut vertex_area = vec![0.0; n];
        let mut vertex_normal = vec![[0.0; 3]; n];
        for (f, face) in faces.iter().enumerate() {
            for c in 0..3 {
                vertex_area[face[c]] += face_area[f] / 3.0;
                vertex_normal[face[c]] =
                    add(vertex_normal[face[c]], scale(face_normal[f], corner_angle[3 * f + c]));
            }
        }
        for nrm in vertex_normal.iter_mut() {
            *nrm = normalized(*nrm);
        }

        let mut fnv = Fnv::new();
        fnv.word(n as u64);
        for p in &positions {
            p.iter().for_each(|&x| fnv.f64(x));
        }
        for face in &faces {
            face.iter().for_each(|&v| fnv.word(v as u64));
        }

        Ok(SurfaceMesh {
            positions,
            faces,
            twin,
            edge_length,
            corner_angle,
            corner_cotan,
            face_area,
            face_normal,
            vertex_area,
            vertex_normal,
            ring_offsets,
            ring,
            boundary,
            num_edges,
            bbox_diagonal,
            fingerprint: fnv.finish(),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges as i64 + self.num_faces() as i64
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Opposite halfedge, `None` on the boundary.
    pub fn twin(&self, h: usize) -> Option<usize> {
        self.twin[h]
    }

    pub fn halfedge_tail(&self, h: usize) -> usize {
        self.faces[h / 3][h % 3]
    }

    pub fn halfedge_head(&self, h: usize) -> usize {
        self.faces[h / 3][(h % 3 + 1) % 3]
    }

    /// Length of halfedge `h`.
    pub fn edge_length(&self, h: usize) -> f64 {
        self.edge_length[h]
    }

    /// Interior angle at corner `h` (radians).
    pub fn corner_angle(&self, h: usize) -> f64 {
        self.corner_angle[h]
    }

    pub fn corner_cotan(&self, h: usize) -> f64 {
        self.corner_cotan[h]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_area[f]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_area
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_normal[f]
    }

    /// Barycentric vertex areas: one third of the incident face areas.
    pub fn vertex_areas(&self) -> &[f64] {
        &self.vertex_area
    }

    /// Angle-weighted vertex normal.
    pub fn vertex_normal(&self, v: usize) -> Vec3 {
        self.vertex_normal[v]
    }

    pub fn total_area(&self) -> f64 {
        self.face_area.iter().sum()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Counterclockwise one-ring of `v`. Interior rings start at the
    /// lowest-index neighbour, boundary rings at the boundary edge that
    /// opens the fan.
    pub fn ring(&self, v: usize) -> &[RingEntry] {
        &self.ring[self.ring_offsets[v]..self.ring_offsets[v + 1]]
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox_diagonal
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for h in 0..self.edge_length.len() {
            if self.twin[h].map_or(true, |t| t > h) {
                sum += self.edge_length[h];
                count += 1;
            }
        }
        sum / count as f64
    }

    /// Content hash of positions and connectivity.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Same connectivity with new positions, revalidated.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.positions.len(),
                found: positions.len(),
            });
        }
        Self::new(positions, self.faces.clone())
    }
}

/// Area from side lengths, Kahan's stable form of Heron's formula.
pub fn heron_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    let [a, b, c] = s;
    let q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if q <= 0.0 {
        0.0
    } else {
        0.25 * q.sqrt()
    }
}

fn bounding_diagonal(positions: &[Vec3]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let mut lo = positions[0];
    let mut hi = positions[0];
    for p in positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    norm(sub(hi, lo))
}

fn build_twins(faces: &[[usize; 3]]) -> Result<Vec<Option<usize>>> {
    // sort directed edges; duplicates mean a non-manifold or misoriented edge
    let mut directed: Vec<(usize, usize, usize)> = Vec::with_capacity(3 * faces.len());
    for (f, face) in faces.iter().enumerate() {
        for c in 0..3 {
            directed.push((face[c], face[(c + 1) % 3], 3 * f + c));
        }
    }
    directed.sort_unstable();
    for w in directed.windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            return Err(Error::NonManifoldEdge(w[0].0.min(w[0].1), w[0].0.max(w[0].1)));
        }
    }
    let mut twin = vec![None; directed.len()];
    for &(a, b, h) in &directed {
        if let Ok(pos) = directed.binary_search_by(|probe| (probe.0, probe.1).cmp(&(b, a))) {
            twin[h] = Some(directed[pos].2);
        }
    }
    Ok(twin)
}

type Rings = (Vec<usize>, Vec<RingEntry>, Vec<bool>);

fn build_rings(n: usize, faces: &[[usize; 3]], _twin: &[Option<usize>]) -> Result<Rings> {
    let mut corners: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (f, face) in faces.iter().enumerate() {
        for c in 0..3 {
            corners[face[c]].push(3 * f + c);
        }
    }
    let start_of = |h: usize| faces[h / 3][(h % 3 + 1) % 3];
    let end_of = |h: usize| faces[h / 3][(h % 3 + 2) % 3];

    let mut offsets = Vec::with_capacity(n + 1);
    let mut ring = Vec::new();
    let mut boundary = vec![false; n];
    offsets.push(0);
    for v in 0..n {
        let cs = &corners[v];
        if cs.is_empty() {
            return Err(Error::IsolatedVertex(v));
        }
        let find_start = |a: usize| cs.iter().copied().find(|&h| start_of(h) == a);
        let opens: Vec<usize> =
            cs.iter().copied().filter(|&h| !cs.iter().any(|&g| end_of(g) == start_of(h))).collect();
        let first = match opens.len() {
            0 => {
                // interior: start at the corner whose opening edge has the lowest neighbour
                *cs.iter().min_by_key(|&&h| start_of(h)).expect("nonempty")
            }
            1 => {
                boundary[v] = true;
                opens[0]
            }
            _ => return Err(Error::NonManifoldVertex(v)),
        };
        let mut h = first;
        let mut visited = 0usize;
        loop {
            ring.push(RingEntry { neighbor: start_of(h), wedge: Some(h) });
            visited += 1;
            if visited > cs.len() {
                return Err(Error::NonManifoldVertex(v));
            }
            let b = end_of(h);
            match find_start(b) {
                Some(next) if next == first => break,
                Some(next) => h = next,
                None => {
                    ring.push(RingEntry { neighbor: b, wedge: None });
                    break;
                }
            }
        }
        if visited != cs.len() {
            return Err(Error::NonManifoldVertex(v));
        }
        offsets.push(ring.len());
    }
    Ok((offsets, ring, boundary))
}
