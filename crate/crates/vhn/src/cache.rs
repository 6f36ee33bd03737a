//! Precomputed mesh bundles keyed by a content hash of the mesh and of every
//! setting that influences the expensive parts (spectral basis and input
//! features). Frames and sparse operators are rebuilt on load; they are cheap
//! and deterministic, and their fingerprints must match the stored ones.

use std::fs;
use std::path::{Path, PathBuf};

use vhn_core::cmat::CMat;
use vhn_core::features::{FeatureField, FeatureSpec};
use vhn_core::frame::build_frames;
use vhn_core::ops::{assemble_connection_laplacian, assemble_mass_matrix};
use vhn_core::spectral::{EigenConfig, SpectralBasis};
use vhn_core::{Complex64, MeshBundle, SurfaceMesh};

use crate::binfmt::{content_hash, Reader, Writer};
use crate::error::{Result, VhnError};

const MAGIC: &[u8; 8] = b"VHNCACHE";
const VERSION: u32 = 1;

/// Everything besides the mesh that determines a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepSettings {
    pub features: FeatureSpec,
    pub k: usize,
    pub eigen: EigenConfig,
}

impl Default for PrepSettings {
    fn default() -> Self {
        PrepSettings { features: FeatureSpec::default(), k: vhn_core::spectral::DEFAULT_K, eigen: EigenConfig::default() }
    }
}

impl PrepSettings {
    pub fn describe(&self) -> String {
        format!("k={};features={};eigen={:?}", self.k, self.features.describe(), self.eigen)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    /// Loaded from a valid cache entry.
    Fresh,
    /// No entry existed (or caching is off); built and stored.
    Built,
    /// An entry existed but could not be used; rebuilt and replaced.
    Rebuilt,
}

impl CacheStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheStatus::Fresh => "fresh",
            CacheStatus::Built => "built",
            CacheStatus::Rebuilt => "rebuilt",
        }
    }
}

#[derive(Debug)]
pub struct Prepared {
    pub bundle: MeshBundle,
    pub key: String,
    pub status: CacheStatus,
    /// Why a stale entry was discarded, if one was.
    pub warning: Option<String>,
}

/// Canonical bytes of a mesh: positions then faces, little-endian.
pub fn mesh_bytes(mesh: &SurfaceMesh) -> Vec<u8> {
    let mut b = Vec::with_capacity(mesh.num_vertices() * 24 + mesh.num_faces() * 24);
    for p in mesh.positions() {
        for c in p {
            b.extend_from_slice(&c.to_le_bytes());
        }
    }
    for f in mesh.faces() {
        for i in f {
            b.extend_from_slice(&(*i as u64).to_le_bytes());
        }
    }
    b
}

pub fn cache_key(mesh: &SurfaceMesh, settings: &PrepSettings) -> String {
    content_hash(&[&mesh_bytes(mesh), settings.describe().as_bytes(), &VERSION.to_le_bytes()])
}

pub fn entry_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.bundle"))
}

/// Load `mesh`'s bundle from `dir` when a valid entry exists, else build it
/// (and store it when `dir` is given). Asking for more modes than the mesh
/// has vertices is an error here, whereas [`MeshBundle::build`] truncates.
pub fn prepare(mesh: SurfaceMesh, settings: &PrepSettings, dir: Option<&Path>) -> Result<Prepared> {
    if settings.k > mesh.num_vertices() {
        return Err(vhn_core::Error::TooManyModes { k: settings.k, n: mesh.num_vertices() }.into());
    }
    let key = cache_key(&mesh, settings);
    let Some(dir) = dir else {
        let bundle = MeshBundle::build(mesh, &settings.features, settings.k, &settings.eigen)?;
        return Ok(Prepared { bundle, key, status: CacheStatus::Built, warning: None });
    };
    let path = entry_path(dir, &key);
    let mut status = CacheStatus::Built;
    let mut warning = None;
    if path.exists() {
        match read_entry(&path, mesh.clone(), settings) {
            Ok(bundle) => return Ok(Prepared { bundle, key, status: CacheStatus::Fresh, warning: None }),
            Err(e) => {
                status = CacheStatus::Rebuilt;
                warning = Some(format!("discarding cache entry: {e}"));
            }
        }
    }
    let bundle = MeshBundle::build(mesh, &settings.features, settings.k, &settings.eigen)?;
    write_entry(&path, &bundle, settings)?;
    Ok(Prepared { bundle, key, status, warning })
}

fn write_cmat(w: &mut Writer, m: &CMat) {
    w.u64(m.rows() as u64);
    w.u64(m.cols() as u64);
    for z in m.as_slice() {
        w.f64(z.re);
        w.f64(z.im);
    }
}

fn read_cmat(r: &mut Reader) -> Result<CMat> {
    let rows = r.usize()?;
    let cols = r.usize()?;
    let raw = r.f64s(rows.saturating_mul(cols).saturating_mul(2))?;
    let data = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok(CMat::from_vec(rows, cols, data))
}

pub fn write_entry(path: &Path, bundle: &MeshBundle, settings: &PrepSettings) -> Result<()> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.str(&settings.describe());
    w.u64(bundle.mesh.fingerprint());
    w.u64(bundle.frame.fingerprint());
    w.u64(bundle.basis.values.len() as u64);
    w.f64s(&bundle.basis.values);
    write_cmat(&mut w, &bundle.basis.vectors);
    w.str(&bundle.features.provenance);
    write_cmat(&mut w, &bundle.features.values);
    w.write_to(path)
}

pub fn read_entry(path: &Path, mesh: SurfaceMesh, settings: &PrepSettings) -> Result<MeshBundle> {
    let data = fs::read(path).map_err(|e| VhnError::io(path, e))?;
    let mut r = Reader::open(&data, path, MAGIC, VERSION)?;
    if r.str()? != settings.describe() {
        return Err(VhnError::format(path, "settings differ"));
    }
    let (mesh_fp, frame_fp) = (r.u64()?, r.u64()?);
    let k = r.usize()?;
    let values = r.f64s(k)?;
    let vectors = read_cmat(&mut r)?;
    let provenance = r.str()?;
    let features = read_cmat(&mut r)?;
    r.finish()?;
    if mesh_fp != mesh.fingerprint() {
        return Err(VhnError::format(path, "entry belongs to a different mesh"));
    }
    let frame = build_frames(&mesh)?;
    if frame_fp != frame.fingerprint() {
        return Err(VhnError::format(path, "entry was built with different frames"));
    }
    let laplacian = assemble_connection_laplacian(&mesh, &frame);
    let mass = assemble_mass_matrix(&mesh);
    let basis = SpectralBasis { vectors, values, source: frame_fp };
    let features = FeatureField { values: features, provenance, frame: frame_fp };
    Ok(MeshBundle::from_parts(mesh, frame, laplacian, mass, basis, features)?)
}
