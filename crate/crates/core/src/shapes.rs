//! Procedural test and fixture meshes.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::mesh::{normalized, SurfaceMesh, Vec3};

fn build(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> SurfaceMesh {
    SurfaceMesh::new(positions, faces).expect("procedural mesh is valid")
}

fn icosahedron_data() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5.0.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let positions = raw.iter().map(|&p| normalized(p)).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (positions, faces)
}

/// Regular icosahedron inscribed in the unit sphere.
pub fn icosahedron() -> SurfaceMesh {
    let (p, f) = icosahedron_data();
    build(p, f)
}

/// Unit icosphere after `level` midpoint subdivisions
/// (12, 42, 162, 642, 2562, ... vertices).
pub fn icosphere(level: usize) -> SurfaceMesh {
    let (mut positions, mut faces) = icosahedron_data();
    for _ in 0..level {
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for face in &faces {
            let mut mid = [0usize; 3];
            for c in 0..3 {
                let (a, b) = (face[c], face[(c + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[c] = *midpoint.entry(key).or_insert_with(|| {
                    let pa = positions[a];
                    let pb = positions[b];
                    positions.push(normalized([
                        pa[0] + pb[0],
                        pa[1] + pb[1],
                        pa[2] + pb[2],
                    ]));
                    positions.len() - 1
                });
            }
            next.push([face[0], mid[0], mid[2]]);
            next.push([face[1], mid[1], mid[0]]);
            next.push([face[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }
    build(positions, faces)
}

/// Flat `nx` by `ny` grid of split squares in the z = 0 plane, vertex
/// `(i, j)` at index `j * (nx + 1) + i`.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> SurfaceMesh {
    let (p, f) = grid_data(nx, ny, spacing);
    build(p, f)
}

fn grid_data(nx: usize, ny: usize, spacing: f64) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push([i as f64 * spacing, j as f64 * spacing, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            // alternate the diagonal so the grid has no preferred direction
            if (i + j) % 2 == 0 {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    (positions, faces)
}

/// Grid sheet folded along the vertical grid lines `x = columns[i] * spacing`
/// by the matching angles. Folding along mesh edges keeps every edge length,
/// so the result is isometric to [`grid`].
pub fn folded_grid(nx: usize, ny: usize, spacing: f64, folds: &[(usize, f64)]) -> SurfaceMesh {
    let (mut positions, faces) = grid_data(nx, ny, spacing);
    let original: Vec<f64> = positions.iter().map(|p| p[0]).collect();
    let mut order: Vec<(usize, f64)> = folds.to_vec();
    order.sort_by(|a, b| b.0.cmp(&a.0));
    for (column, angle) in order {
        let x0 = column as f64 * spacing;
        let (s, c) = angle.sin_cos();
        for (p, &ox) in positions.iter_mut().zip(&original) {
            if ox > x0 + 0.5 * spacing * 1e-6 {
                let dx = p[0] - x0;
                let dz = p[2];
                p[0] = x0 + c * dx - s * dz;
                p[2] = s * dx + c * dz;
            }
        }
    }
    build(positions, faces)
}

/// Polyhedral cone: an apex, `sectors` planar sectors, and two rings of
/// vertices on the sector rays. Only the apex carries curvature; its total
/// angle is `apex_angle`. Ring one (indices `1..=sectors`) is interior.
pub fn cone(sectors: usize, apex_angle: f64) -> SurfaceMesh {
    // choose the half-opening so that the apex angle sum is apex_angle:
    // sector angle between unit rays (sin b cos u, sin b sin u, -cos b)
    let target = apex_angle / sectors as f64;
    let du = 2.0 * PI / sectors as f64;
    // solve cos(target) = cos^2 b + sin^2 b cos du for b
    let sin2 = (1.0 - target.cos()) / (1.0 - du.cos());
    let sb = sin2.sqrt();
    let cb = (1.0 - sin2).max(0.0).sqrt();
    let mut positions = vec![[0.0, 0.0, 0.0]];
    for r in 1..=2 {
        for j in 0..sectors {
            let u = j as f64 * du;
            let d = [sb * u.cos(), sb * u.sin(), -cb];
            positions.push([d[0] * r as f64, d[1] * r as f64, d[2] * r as f64]);
        }
    }
    let ring1 = |j: usize| 1 + j % sectors;
    let ring2 = |j: usize| 1 + sectors + j % sectors;
    let mut faces = Vec::new();
    for j in 0..sectors {
        faces.push([0, ring1(j), ring1(j + 1)]);
        faces.push([ring1(j), ring2(j), ring2(j + 1)]);
        faces.push([ring1(j), ring2(j + 1), ring1(j + 1)]);
    }
    build(positions, faces)
}

/// Surface of the unit cube `[0, 1]^3`, each side split into `n` by `n`
/// squares. Corner `(0, 0, 0)` is vertex 0.
pub fn cube(n: usize) -> SurfaceMesh {
    let mut index: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |key: [usize; 3], positions: &mut Vec<Vec3>| -> usize {
        *index.entry(key).or_insert_with(|| {
            positions.push([key[0] as f64 / n as f64, key[1] as f64 / n as f64, key[2] as f64 / n as f64]);
            positions.len() - 1
        })
    };
    vid([0, 0, 0], &mut positions);
    // (normal axis, side, u axis, v axis) with u x v along the outward normal
    let sides = [
        (0, n, 1, 2),
        (0, 0, 2, 1),
        (1, n, 2, 0),
        (1, 0, 0, 2),
        (2, n, 0, 1),
        (2, 0, 1, 0),
    ];
    for &(axis, side, ua, va) in &sides {
        let key = |a: usize, b: usize| {
            let mut k = [0usize; 3];
            k[axis] = side;
            k[ua] = a;
            k[va] = b;
            k
        };
        for b in 0..n {
            for a in 0..n {
                let v00 = vid(key(a, b), &mut positions);
                let v10 = vid(key(a + 1, b), &mut positions);
                let v11 = vid(key(a + 1, b + 1), &mut positions);
                let v01 = vid(key(a, b + 1), &mut positions);
                faces.push([v00, v10, v11]);
                faces.push([v00, v11, v01]);
            }
        }
    }
    build(positions, faces)
}

/// Apply `f` to every position and rebuild.
pub fn deformed(mesh: &SurfaceMesh, f: impl Fn(Vec3) -> Vec3) -> SurfaceMesh {
    let positions = mesh.positions().iter().map(|&p| f(p)).collect();
    build(positions, mesh.faces().to_vec())
}

/// Smooth, asymmetric radial bump applied to a unit sphere mesh. Used to
/// break the icosahedral symmetry of [`icosphere`] fixtures.
pub fn bumpy_sphere(level: usize) -> SurfaceMesh {
    deformed(&icosphere(level), |p| {
        let r = 1.0 + 0.15 * (2.0 * p[0] + 0.5).sin() * (1.5 * p[1]).cos() + 0.1 * p[2] * p[2];
        [p[0] * r * 1.2, p[1] * r, p[2] * r * 0.85]
    })
}

/// Rigid motion: rotation about `axis` by `angle`, then translation.
pub fn rigid_transform(p: Vec3, axis: Vec3, angle: f64, translation: Vec3) -> Vec3 {
    let k = normalized(axis);
    let (s, c) = angle.sin_cos();
    let kxp = crate::mesh::cross(k, p);
    let kdp = crate::mesh::dot(k, p);
    [
        p[0] * c + kxp[0] * s + k[0] * kdp * (1.0 - c) + translation[0],
        p[1] * c + kxp[1] * s + k[1] * kdp * (1.0 - c) + translation[1],
        p[2] * c + kxp[2] * s + k[2] * kdp * (1.0 - c) + translation[2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_sizes() {
        for (level, n) in [(0, 12), (1, 42), (2, 162), (3, 642)] {
            let m = icosphere(level);
            assert_eq!(m.num_vertices(), n);
            assert_eq!(m.euler_characteristic(), 2);
        }
    }

    #[test]
    fn cube_is_closed() {
        let m = cube(2);
        assert_eq!(m.num_vertices(), 26);
        assert_eq!(m.euler_characteristic(), 2);
        assert!((m.total_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cone_apex_angle() {
        let m = cone(7, 1.5 * PI);
        let total: f64 = m.ring(0).iter().filter_map(|e| e.wedge).map(|h| m.corner_angle(h)).sum();
        assert!((total - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn fold_preserves_edge_lengths() {
        let flat = grid(6, 3, 0.5);
        let bent = folded_grid(6, 3, 0.5, &[(2, 0.7), (4, -0.5)]);
        for h in 0..3 * flat.num_faces() {
            assert!((flat.edge_length(h) - bent.edge_length(h)).abs() < 1e-14);
        }
        assert!(bent.positions().iter().any(|p| p[2].abs() > 0.1));
    }
}
