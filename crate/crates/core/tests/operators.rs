//! Property tests of the operator pipeline through the public API, on
//! randomly deformed closed meshes and random complex signals.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vhn_core::frame::build_frames;
use vhn_core::ops::{assemble_connection_laplacian, assemble_mass_matrix};
use vhn_core::shapes;
use vhn_core::spectral::{direct_diffuse, mass_norms, project, solve_connection_basis, spectral_diffuse, EigenConfig};
use vhn_core::{CMat, Complex64, SurfaceMesh};

fn wobbly_sphere(amp: f64, freq: [f64; 3], stretch: f64) -> SurfaceMesh {
    shapes::deformed(&shapes::icosphere(2), |p| {
        let r = 1.0 + amp * (freq[0] * p[0]).sin() * (freq[1] * p[1] + freq[2] * p[2]).cos();
        [stretch * r * p[0], r * p[1], r * p[2]]
    })
}

fn mesh_strategy() -> impl Strategy<Value = SurfaceMesh> {
    (0.0..0.3f64, prop::array::uniform3(0.5..4.0f64), 0.6..1.6f64).prop_map(|(a, f, s)| wobbly_sphere(a, f, s))
}

fn signal(n: usize, cols: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(n, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transports_are_unit_and_reverse_to_conjugates(mesh in mesh_strategy()) {
        let frame = build_frames(&mesh).unwrap();
        for f in mesh.faces() {
            for c in 0..3 {
                let (i, j) = (f[c], f[(c + 1) % 3]);
                let r = frame.transport(i, j).unwrap();
                prop_assert!((r.norm() - 1.0).abs() < 1e-12);
                prop_assert!((frame.transport(j, i).unwrap() - r.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_is_hermitian_and_positive_semidefinite(mesh in mesh_strategy(), seed in 0u64..1000) {
        let frame = build_frames(&mesh).unwrap();
        let lap = assemble_connection_laplacian(&mesh, &frame);
        prop_assert!(lap.matrix.hermitian_defect() < 1e-12);
        let u = signal(mesh.num_vertices(), 1, seed).col(0);
        let lu = lap.matrix.apply(&u);
        let form: Complex64 = u.iter().zip(&lu).map(|(a, b)| a.conj() * b).sum();
        prop_assert!(form.im.abs() < 1e-10 * form.re.abs().max(1.0));
        prop_assert!(form.re > -1e-12);
    }

    #[test]
    fn mass_trace_is_surface_area(mesh in mesh_strategy()) {
        let mass = assemble_mass_matrix(&mesh);
        prop_assert!(mass.diag.iter().all(|&m| m > 0.0));
        prop_assert!((mass.trace() - mesh.total_area()).abs() < 1e-10 * mesh.total_area());
    }

    #[test]
    fn diffusion_never_grows_the_mass_norm(mesh in mesh_strategy(), s in 1e-4..1.0f64, seed in 0u64..1000) {
        let frame = build_frames(&mesh).unwrap();
        let lap = assemble_connection_laplacian(&mesh, &frame);
        let mass = assemble_mass_matrix(&mesh);
        let u = signal(mesh.num_vertices(), 2, seed);
        let before = mass_norms(&mass, &u);
        let direct = mass_norms(&mass, &direct_diffuse(&lap.matrix, &mass, &u, s).unwrap());
        let basis = solve_connection_basis(&lap, &mass, 24, &EigenConfig::default()).unwrap();
        let spectral = mass_norms(&mass, &spectral_diffuse(&basis, &mass, &u, &[s]).unwrap());
        for c in 0..2 {
            prop_assert!(direct[c] <= before[c] * (1.0 + 1e-12));
            prop_assert!(spectral[c] <= before[c] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn truncated_basis_is_mass_orthonormal(mesh in mesh_strategy()) {
        let frame = build_frames(&mesh).unwrap();
        let lap = assemble_connection_laplacian(&mesh, &frame);
        let mass = assemble_mass_matrix(&mesh);
        let basis = solve_connection_basis(&lap, &mass, 16, &EigenConfig::default()).unwrap();
        // Φᴴ M Φ is the projection of the basis itself
        let gram = project(&basis, &mass, &basis.vectors);
        for a in 0..basis.k() {
            for b in 0..basis.k() {
                let expected = if a == b { 1.0 } else { 0.0 };
                prop_assert!((gram.row(a)[b] - Complex64::new(expected, 0.0)).norm() < 1e-9);
            }
        }
        prop_assert!(basis.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(basis.values[0] > -1e-10);
    }
}
