//! Turning network outputs into N-RoSy fields.

use vhn_core::model::{forward, Mode};
use vhn_core::ops::{build_vertex_to_face_transport, VertexToFaceTransport};
use vhn_core::rosy::{canonical_root, Domain, RosyField};
use vhn_core::{Complex64, MeshBundle, VhnParams};

use crate::error::{Result, VhnError};

/// Parameters with the diffusion time unit pinned. Checkpoints from training
/// always carry one; untrained parameters take `reference`'s.
pub fn pin_time_scale(params: &VhnParams, reference: &MeshBundle) -> VhnParams {
    let mut p = params.clone();
    if p.config.time_scale.is_none() {
        p.config.time_scale = Some(reference.time_scale());
    }
    p
}

/// Eval-mode prediction, first output channel, in the vertex frames of
/// `bundle`.
pub fn predict(params: &VhnParams, bundle: &MeshBundle) -> Result<Vec<Complex64>> {
    if params.config.out_channels != 1 {
        return Err(VhnError::Validation("field prediction needs a single output channel".into()));
    }
    Ok(forward(params, bundle, Mode::Eval, 0)?.col(0))
}

pub fn vertex_field(values: Vec<Complex64>, order: u32, bundle: &MeshBundle) -> Result<RosyField> {
    Ok(RosyField::new(values, order, Domain::Vertices, bundle.frame.fingerprint())?)
}

/// Per-face field: corner values are transported into the face frame and
/// averaged in the power representation, so that representatives differing
/// by a symmetry rotation do not cancel.
pub fn face_field(vertex: &RosyField, bundle: &MeshBundle) -> Result<RosyField> {
    if vertex.domain != Domain::Vertices || vertex.frame != bundle.frame.fingerprint() {
        return Err(vhn_core::Error::FingerprintMismatch.into());
    }
    let tfo = build_vertex_to_face_transport(&bundle.mesh, &bundle.frame);
    let values = power_average_to_faces(&tfo, bundle, &vertex.values, vertex.order);
    Ok(RosyField::new(values, vertex.order, Domain::Faces, bundle.mesh.fingerprint())?)
}

fn power_average_to_faces(tfo: &VertexToFaceTransport, bundle: &MeshBundle, u: &[Complex64], order: u32) -> Vec<Complex64> {
    bundle
        .mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            let p: Complex64 = (0..3).map(|c| (tfo.rotation(f, c) * u[face[c]]).powu(order)).sum::<Complex64>() / 3.0;
            canonical_root(p, order)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use vhn_core::features::FeatureSpec;
    use vhn_core::ops::average_to_faces;
    use vhn_core::rosy::{angular_error, rosy_angle};
    use vhn_core::shapes;
    use vhn_core::spectral::EigenConfig;

    #[test]
    fn power_average_matches_plain_average_for_aligned_corners() {
        let spec = FeatureSpec { hks_channels: 2, scalar_k: 20, ..FeatureSpec::default() };
        let b = MeshBundle::build(shapes::grid(4, 4, 1.0), &spec, 8, &EigenConfig::default()).unwrap();
        // a constant field on a flat grid, written in each vertex frame
        let u: Vec<Complex64> = (0..b.num_vertices()).map(|v| b.frame.project(v, [0.6, 0.8, 0.0])).collect();
        let field = vertex_field(u.clone(), 4, &b).unwrap();
        let faces = face_field(&field, &b).unwrap();
        let tfo = build_vertex_to_face_transport(&b.mesh, &b.frame);
        let plain = average_to_faces(&tfo, &u).unwrap();
        // boundary vertices rescale their angles, so only interior faces see
        // identical corner values
        for (f, face) in b.mesh.faces().iter().enumerate() {
            if face.iter().all(|v| !b.mesh.is_boundary(*v)) {
                assert!(rosy_angle(faces.values[f], plain[f], 4) < 1e-12, "face {f}");
                assert!((faces.values[f].norm() - plain[f].norm()).abs() < 1e-12);
            }
        }
        // representatives rotated by a quarter turn at some vertices change nothing
        let mixed: Vec<Complex64> = u.iter().enumerate().map(|(i, z)| if i % 3 == 0 { z * Complex64::i() } else { *z }).collect();
        let again = face_field(&vertex_field(mixed, 4, &b).unwrap(), &b).unwrap();
        assert!(angular_error(&faces, &again).unwrap().max < 1e-12);
    }
}
