//! Small reproducible problems shared by the acceptance run, the integration
//! tests and the `fixture` example.

use std::f64::consts::PI;

use vhn_core::features::FeatureSpec;
use vhn_core::shapes;
use vhn_core::spectral::EigenConfig;
use vhn_core::{Complex64, MeshBundle, SurfaceMesh, TrainConfig, VhnConfig};

use crate::cache::PrepSettings;

/// Coarse and fine tessellations of the same bumpy closed surface (642 and
/// 2562 vertices). Vertices of both lie exactly on it.
pub fn remesh_pair() -> (SurfaceMesh, SurfaceMesh) {
    (shapes::bumpy_sphere(3), shapes::bumpy_sphere(4))
}

/// The mesh the overfit run trains on: the coarse side of [`remesh_pair`].
pub fn overfit_mesh() -> SurfaceMesh {
    shapes::bumpy_sphere(3)
}

/// Default feature pipeline with the default 128 modes.
pub fn overfit_settings() -> PrepSettings {
    PrepSettings::default()
}

/// A smooth target the network can represent: the gradient of the
/// longest-time heat kernel signature, rotated and scaled by `1 + i/2`.
/// Needs the HKS gradient to be the first feature kind.
pub fn synthetic_target(bundle: &MeshBundle) -> Vec<Complex64> {
    let hks = bundle.features.values.col(FeatureSpec::default().hks_channels - 1);
    hks.iter().map(|z| z * Complex64::new(1.0, 0.5)).collect()
}

/// Reduced widths so 2000 full-batch steps finish in minutes on one core.
pub fn overfit_model_config() -> VhnConfig {
    VhnConfig {
        num_blocks: 2,
        hidden_channels: 64,
        times_per_block: 2,
        k: 128,
        in_channels: FeatureSpec::default().channels(),
        out_channels: 1,
        dropout: 0.0,
        time_scale: None,
    }
}

pub const OVERFIT_INIT_SEED: u64 = 1;

/// With a single example an epoch is one step. The learning rate is ten
/// times the default and decays every 100 steps instead of 150, since the
/// default schedule is tuned for a large dataset and a noisy gradient.
pub fn overfit_train_config() -> TrainConfig {
    TrainConfig { learning_rate: 1e-3, decay_every: 100, epochs: 2000, dropout: 0.0, ..TrainConfig::default() }
}

/// A flat sheet of 12 x 12 cells (169 vertices) and the same sheet folded
/// along two grid lines.
/// Folding along edges keeps every edge length.
pub fn isometry_pair() -> (SurfaceMesh, SurfaceMesh) {
    let flat = shapes::grid(12, 12, 0.1);
    let bent = shapes::folded_grid(12, 12, 0.1, &[(4, 0.5 * PI), (8, -0.35 * PI)]);
    (flat, bent)
}

/// Settings small enough for the 169-vertex sheets.
pub fn isometry_settings() -> PrepSettings {
    PrepSettings { features: FeatureSpec::default(), k: 64, eigen: EigenConfig::default() }
}

/// Settings for the gradient-check model: 42 vertices, 20 modes and two
/// HKS gradients (four input channels with their rotations).
pub fn tiny_settings() -> PrepSettings {
    PrepSettings { features: FeatureSpec { hks_channels: 2, scalar_k: 30, ..FeatureSpec::default() }, k: 20, eigen: EigenConfig::default() }
}

pub fn tiny_mesh() -> SurfaceMesh {
    shapes::bumpy_sphere(1)
}

/// Two blocks of four channels and two diffusion times, with dropout on so
/// that the masks are exercised too.
pub fn tiny_model_config() -> VhnConfig {
    VhnConfig { num_blocks: 2, hidden_channels: 4, times_per_block: 2, k: 20, in_channels: 4, out_channels: 1, dropout: 0.3, time_scale: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vhn_core::mesh::{norm, sub};

    #[test]
    fn isometry_pair_keeps_edge_lengths() {
        let (a, b) = isometry_pair();
        assert_eq!(a.faces(), b.faces());
        for f in a.faces() {
            for c in 0..3 {
                let (i, j) = (f[c], f[(c + 1) % 3]);
                let la = norm(sub(a.positions()[i], a.positions()[j]));
                let lb = norm(sub(b.positions()[i], b.positions()[j]));
                assert!((la - lb).abs() < 1e-13);
            }
        }
        // and the bend is real
        assert!(b.positions().iter().any(|p| p[2].abs() > 0.1));
    }

    #[test]
    fn remesh_pair_sizes() {
        let (a, b) = remesh_pair();
        assert_eq!((a.num_vertices(), b.num_vertices()), (642, 2562));
    }
}
