//! The `vhn` command line. Results go to stdout and diagnostics to stderr,
//! one `key=value` record per line.

use std::collections::HashSet;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use vhn_core::frame::build_frames;
use vhn_core::ops::{assemble_connection_laplacian, assemble_mass_matrix};
use vhn_core::rosy::{angular_error, Domain, RosyField};
use vhn_core::train::{rosy_loss, train, EpochRecord, Example, TrainObserver};
use vhn_core::{Complex64, MeshBundle, VhnParams};

use crate::audit::{self, AuditKind};
use crate::cache::{prepare, CacheStatus, PrepSettings, Prepared};
use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::config::RunConfig;
use crate::error::{ExitKind, Result, VhnError};
use crate::fieldio::{export_crosses, export_field, import_field};
use crate::infer::{face_field, predict, vertex_field};
use crate::mtx::export_operators;
use crate::obj::load_obj;

#[derive(Debug, Parser)]
#[command(name = "vhn", version, about = "Vector heat networks: learned tangent vector and N-RoSy fields on triangle meshes")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed (training, audits).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cache directory for precomputed mesh data.
    #[arg(long, global = true, env = "VHN_CACHE")]
    pub cache: Option<PathBuf>,
    /// Output directory (defaults to the configuration's, else `.`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of spectral modes.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Rotational symmetry order N.
    #[arg(long, global = true)]
    pub rosy: Option<u32>,
    /// Audit threshold (relative discrepancy, or mean degrees for remesh).
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or refresh cached frames, operators, bases and features.
    Precompute,
    /// Write each mesh's input features as a table.
    Features,
    /// Train on the configured meshes and their ground-truth fields.
    Train,
    /// Loss and angular error of a checkpoint on the configured meshes.
    Eval { checkpoint: PathBuf },
    /// Predict a field on a mesh and export vertex, face and cross files.
    Infer { checkpoint: PathBuf, mesh: PathBuf },
    /// Write a mesh's connection Laplacian and mass matrix (Matrix Market).
    Export { mesh: PathBuf },
    /// Check an invariance of a checkpoint on a mesh.
    Audit {
        #[arg(value_enum)]
        kind: AuditArg,
        checkpoint: PathBuf,
        mesh: PathBuf,
        /// Second mesh: the isometric copy, or the remeshed surface.
        pair: Option<PathBuf>,
        /// Number of random basis rotations.
        #[arg(long, default_value_t = 20)]
        rotations: usize,
        /// Use the identity instead of a random rigid motion.
        #[arg(long)]
        identity: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AuditArg {
    Basis,
    Rigid,
    Isometry,
    Remesh,
}

impl From<AuditArg> for AuditKind {
    fn from(a: AuditArg) -> Self {
        match a {
            AuditArg::Basis => AuditKind::Basis,
            AuditArg::Rigid => AuditKind::Rigid,
            AuditArg::Isometry => AuditKind::Isometry,
            AuditArg::Remesh => AuditKind::Remesh,
        }
    }
}

/// One diagnostic record on stderr. Values with spaces, quotes or `=` are
/// quoted.
pub fn log(level: &str, event: &str, fields: &[(&str, &dyn Display)]) {
    let mut line = format!("level={level} event={event}");
    for (k, v) in fields {
        let v = v.to_string();
        if v.is_empty() || v.contains(|c: char| c.is_whitespace() || c == '"' || c == '=') {
            line.push_str(&format!(" {k}={v:?}"));
        } else {
            line.push_str(&format!(" {k}={v}"));
        }
    }
    eprintln!("{line}");
}

pub fn log_error(e: &VhnError) {
    log("error", "failed", &[("code", &(e.exit_kind() as i32)), ("message", e)]);
}

/// Run a parsed command. `Ok` carries the exit status for commands that
/// report failures per item and keep going.
pub fn run(cli: Cli) -> Result<ExitKind> {
    let ctx = Context::new(&cli)?;
    match cli.command {
        Command::Precompute => ctx.precompute(),
        Command::Features => ctx.features(),
        Command::Train => ctx.train(),
        Command::Eval { ref checkpoint } => ctx.eval(checkpoint),
        Command::Infer { ref checkpoint, ref mesh } => ctx.infer(checkpoint, mesh),
        Command::Export { ref mesh } => ctx.export(mesh),
        Command::Audit { kind, ref checkpoint, ref mesh, ref pair, rotations, identity } => ctx.audit(kind.into(), checkpoint, mesh, pair.as_deref(), rotations, identity),
    }
}

struct Context {
    config: Option<RunConfig>,
    cache: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    k: Option<usize>,
    rosy: Option<u32>,
    threshold: Option<f64>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = cli.config.as_deref().map(RunConfig::load).transpose()?;
        if let Some(c) = &mut config {
            if let Some(seed) = cli.seed {
                c.seed = seed;
            }
            if let Some(k) = cli.k {
                c.model.k = k;
            }
            if let Some(n) = cli.rosy {
                c.train.rosy_order = n;
            }
            c.validate()?;
        }
        // flag (or VHN_CACHE, which clap folds into it), then configuration
        let cache = cli.cache.clone().or_else(|| config.as_ref().and_then(|c| c.cache_dir.clone()));
        let out = cli.out.clone().or_else(|| config.as_ref().and_then(|c| c.out_dir.clone())).unwrap_or_else(|| PathBuf::from("."));
        Ok(Context { config, cache, out, seed: cli.seed, k: cli.k, rosy: cli.rosy, threshold: cli.threshold })
    }

    fn config(&self) -> Result<&RunConfig> {
        self.config.as_ref().ok_or_else(|| VhnError::Validation("this command needs --config".into()))
    }

    fn prepare(&self, mesh: &Path, settings: &PrepSettings) -> Result<Prepared> {
        let prepared = prepare(load_obj(mesh)?, settings, self.cache.as_deref())?;
        if let Some(w) = &prepared.warning {
            log("warn", "cache", &[("mesh", &mesh.display()), ("message", w)]);
        }
        log("info", "prepare", &[("mesh", &mesh.display()), ("status", &prepared.status.as_str()), ("key", &prepared.key)]);
        Ok(prepared)
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| VhnError::io(&self.out, e))?;
        Ok(self.out.join(name))
    }

    /// Settings and symmetry order a checkpoint was trained with; flags may
    /// restate them but not change them.
    fn checkpoint_settings(&self, ckpt: &Checkpoint) -> Result<(PrepSettings, u32)> {
        if let Some(k) = self.k {
            if k != ckpt.meta.model.k {
                return Err(VhnError::Validation(format!("--k {k} does not match the checkpoint's k = {}", ckpt.meta.model.k)));
            }
        }
        if let Some(n) = self.rosy {
            if n != ckpt.meta.rosy_order {
                return Err(VhnError::Validation(format!("--rosy {n} does not match the checkpoint's N = {}", ckpt.meta.rosy_order)));
            }
        }
        Ok((ckpt.meta.prep_settings()?, ckpt.meta.rosy_order))
    }

    fn precompute(&self) -> Result<ExitKind> {
        let config = self.config()?;
        let settings = config.prep_settings();
        let (mut built, mut rebuilt, mut fresh, mut failed) = (0, 0, 0, 0);
        let mut status = ExitKind::Success;
        for entry in &config.meshes {
            match self.prepare(&entry.mesh, &settings) {
                Ok(p) => match p.status {
                    CacheStatus::Built => built += 1,
                    CacheStatus::Rebuilt => rebuilt += 1,
                    CacheStatus::Fresh => fresh += 1,
                },
                Err(e) => {
                    log("error", "prepare", &[("mesh", &entry.mesh.display()), ("code", &(e.exit_kind() as i32)), ("message", &e)]);
                    failed += 1;
                    if status == ExitKind::Success {
                        status = e.exit_kind();
                    }
                }
            }
        }
        println!("summary: {built} built, {rebuilt} rebuilt, {fresh} fresh, {failed} failed");
        Ok(status)
    }

    fn features(&self) -> Result<ExitKind> {
        let config = self.config()?;
        let settings = config.prep_settings();
        let stems = output_stems(config.meshes.iter().map(|m| m.mesh.as_path()))?;
        for (entry, stem) in config.meshes.iter().zip(stems) {
            let p = self.prepare(&entry.mesh, &settings)?;
            let path = self.out_path(&format!("{stem}.features.tsv"))?;
            crate::binfmt::write_atomic(&path, features_table(&p.bundle).as_bytes())?;
            println!("wrote\t{}", path.display());
        }
        Ok(ExitKind::Success)
    }

    fn load_examples(&self, config: &RunConfig, settings: &PrepSettings, order: u32) -> Result<Vec<(PathBuf, Example)>> {
        let mut out = Vec::with_capacity(config.meshes.len());
        for entry in &config.meshes {
            let field_path = entry.field.as_ref().ok_or_else(|| VhnError::Validation(format!("mesh {} has no ground-truth field", entry.mesh.display())))?;
            let bundle = self.prepare(&entry.mesh, settings)?.bundle;
            let field = import_field(field_path)?;
            check_ground_truth(&field, &bundle, order, field_path)?;
            out.push((entry.mesh.clone(), Example { bundle, gt: field.values }));
        }
        Ok(out)
    }

    fn train(&self) -> Result<ExitKind> {
        let config = self.config()?;
        let tc = config.train_config();
        let examples: Vec<Example> = self.load_examples(config, &config.prep_settings(), tc.rosy_order)?.into_iter().map(|(_, e)| e).collect();
        let init = VhnParams::init(&config.vhn_config(), config.seed)?;
        let log_path = self.out_path("loss.tsv")?;
        let log_file = File::create(&log_path).map_err(|e| VhnError::io(&log_path, e))?;
        let mut observer = CheckpointObserver { run: config, out: self, log: BufWriter::new(log_file), log_path, last: None, error: None };
        let result = train(&examples, init, &tc, &mut observer);
        observer.log.flush().map_err(|e| VhnError::io(&observer.log_path, e))?;
        if let Some(e) = observer.error.take() {
            return Err(e);
        }
        let outcome = match result {
            Ok(o) => o,
            Err(e) => {
                // keep the last parameters that produced a finite loss
                if let Some((params, record)) = &observer.last {
                    let path = self.out_path("abort.ckpt")?;
                    Checkpoint { meta: CheckpointMeta::new(config, params, record.epoch, record.total), params: params.clone() }.save(&path)?;
                    log("error", "train", &[("message", &e), ("dumped", &path.display())]);
                }
                return Err(e.into());
            }
        };
        let last_record = outcome.history.last().copied();
        let path = self.out_path("last.ckpt")?;
        let (epoch, loss) = last_record.map_or((0, f64::NAN), |r| (r.epoch + 1, r.total));
        Checkpoint { meta: CheckpointMeta::new(config, &outcome.params, epoch, loss), params: outcome.params.clone() }.save(&path)?;
        println!("epochs={}\tbest_loss={}\tlast={}\tbest={}", outcome.history.len(), outcome.best_loss, path.display(), self.out.join("best.ckpt").display());
        Ok(ExitKind::Success)
    }

    fn eval(&self, checkpoint: &Path) -> Result<ExitKind> {
        let config = self.config()?;
        let ckpt = Checkpoint::load(checkpoint)?;
        check_compatible(config, &ckpt.meta)?;
        let (settings, order) = self.checkpoint_settings(&ckpt)?;
        println!("mesh\tvertices\ttotal\tmagnitude\tdirection\tangle_mean_deg\tangle_median_deg\tangle_max_deg");
        for (mesh, ex) in self.load_examples(config, &settings, order)? {
            let pred = predict(&ckpt.params, &ex.bundle)?;
            let loss = rosy_loss(&pred, &ex.gt, &ex.bundle.mass, order)?;
            let frame = ex.bundle.frame.fingerprint();
            let ang = angular_error(&RosyField::new(pred, order, Domain::Vertices, frame)?, &RosyField::new(ex.gt, order, Domain::Vertices, frame)?)?;
            println!(
                "{}\t{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}",
                mesh.display(),
                ex.bundle.num_vertices(),
                loss.total,
                loss.magnitude,
                loss.direction,
                ang.mean.to_degrees(),
                ang.median.to_degrees(),
                ang.max.to_degrees()
            );
        }
        Ok(ExitKind::Success)
    }

    fn infer(&self, checkpoint: &Path, mesh: &Path) -> Result<ExitKind> {
        let ckpt = Checkpoint::load(checkpoint)?;
        let (settings, order) = self.checkpoint_settings(&ckpt)?;
        let bundle = self.prepare(mesh, &settings)?.bundle;
        let stem = stem_of(mesh)?;
        let vertices = vertex_field(predict(&ckpt.params, &bundle)?, order, &bundle)?;
        let faces = face_field(&vertices, &bundle)?;
        let vpath = self.out_path(&format!("{stem}.vertices.field"))?;
        let fpath = self.out_path(&format!("{stem}.faces.field"))?;
        let cpath = self.out_path(&format!("{stem}.cross"))?;
        export_field(&vertices, &bundle.mesh, &bundle.frame, &vpath)?;
        export_field(&faces, &bundle.mesh, &bundle.frame, &fpath)?;
        export_crosses(&faces, &bundle.mesh, &bundle.frame, &cpath)?;
        for p in [vpath, fpath, cpath] {
            println!("wrote\t{}", p.display());
        }
        Ok(ExitKind::Success)
    }

    fn export(&self, mesh_path: &Path) -> Result<ExitKind> {
        let mesh = load_obj(mesh_path)?;
        let frame = build_frames(&mesh)?;
        let laplacian = assemble_connection_laplacian(&mesh, &frame);
        let mass = assemble_mass_matrix(&mesh);
        let stem = stem_of(mesh_path)?;
        let lpath = self.out_path(&format!("{stem}.laplacian.mtx"))?;
        let mpath = self.out_path(&format!("{stem}.mass.mtx"))?;
        export_operators(&laplacian, &mass, &lpath, &mpath)?;
        println!("wrote\t{}", lpath.display());
        println!("wrote\t{}", mpath.display());
        Ok(ExitKind::Success)
    }

    fn audit(&self, kind: AuditKind, checkpoint: &Path, mesh: &Path, pair: Option<&Path>, rotations: usize, identity: bool) -> Result<ExitKind> {
        let ckpt = Checkpoint::load(checkpoint)?;
        let (settings, order) = self.checkpoint_settings(&ckpt)?;
        let threshold = self.threshold.unwrap_or_else(|| kind.default_threshold());
        let seed = self.seed.or(self.config.as_ref().map(|c| c.seed)).unwrap_or(0);
        let pair_bundle = |what: &str| -> Result<MeshBundle> {
            let p = pair.ok_or_else(|| VhnError::Validation(format!("{} audit needs the {what} mesh as a second argument", kind.as_str())))?;
            Ok(self.prepare(p, &settings)?.bundle)
        };
        let params = &ckpt.params;
        let report = match kind {
            AuditKind::Basis => {
                let b = self.prepare(mesh, &settings)?.bundle;
                audit::audit_basis(params, &b, &settings, rotations, order, seed, threshold)?
            }
            AuditKind::Rigid => {
                let b = self.prepare(mesh, &settings)?.bundle;
                let motion = if identity { ([0.0, 0.0, 1.0], 0.0, [0.0; 3]) } else { audit::random_rigid_motion(seed) };
                audit::audit_rigid(params, &b, &settings, motion, order, threshold)?
            }
            AuditKind::Isometry => {
                let other = pair_bundle("isometric")?;
                let b = self.prepare(mesh, &settings)?.bundle;
                audit::audit_isometry(params, &b, &other, order, threshold)?
            }
            AuditKind::Remesh => {
                let target = pair_bundle("remeshed")?;
                let b = self.prepare(mesh, &settings)?.bundle;
                audit::audit_remesh(params, &b, &target, order, threshold)?
            }
        };
        println!("{}", report.to_line());
        if !report.passed {
            return Err(VhnError::AuditFailed(format!("{} metric {:e} exceeds {:e}", kind.as_str(), report.metric, report.threshold)));
        }
        Ok(ExitKind::Success)
    }
}

struct CheckpointObserver<'a> {
    run: &'a RunConfig,
    out: &'a Context,
    log: BufWriter<File>,
    log_path: PathBuf,
    last: Option<(VhnParams, EpochRecord)>,
    /// IO failures are kept here and end training early.
    error: Option<VhnError>,
}

impl CheckpointObserver<'_> {
    fn record(&mut self, r: &EpochRecord, params: &VhnParams, best: Option<&VhnParams>) -> Result<()> {
        writeln!(self.log, "{}\t{}\t{}\t{}\t{}", r.epoch, r.learning_rate, r.total, r.magnitude, r.direction).map_err(|e| VhnError::io(&self.log_path, e))?;
        if let Some(b) = best {
            Checkpoint { meta: CheckpointMeta::new(self.run, b, r.epoch, r.total), params: b.clone() }.save(&self.out.out_path("best.ckpt")?)?;
        }
        let every = self.run.train.checkpoint_every;
        if every > 0 && (r.epoch + 1) % every == 0 {
            let path = self.out.out_path(&format!("epoch-{:05}.ckpt", r.epoch + 1))?;
            Checkpoint { meta: CheckpointMeta::new(self.run, params, r.epoch + 1, r.total), params: params.clone() }.save(&path)?;
        }
        if r.epoch % 50 == 0 {
            log("info", "epoch", &[("epoch", &r.epoch), ("lr", &r.learning_rate), ("loss", &r.total)]);
        }
        self.last = Some((params.clone(), *r));
        Ok(())
    }
}

impl TrainObserver for CheckpointObserver<'_> {
    fn epoch(&mut self, r: &EpochRecord, params: &VhnParams, best: Option<&VhnParams>) -> vhn_core::Result<bool> {
        match self.record(r, params, best) {
            Ok(()) => Ok(true),
            Err(e) => {
                self.error = Some(e);
                Ok(false)
            }
        }
    }
}

fn check_ground_truth(field: &RosyField, bundle: &MeshBundle, order: u32, path: &Path) -> Result<()> {
    if field.domain != Domain::Vertices {
        return Err(VhnError::Validation(format!("{}: ground truth must be a vertex field", path.display())));
    }
    if field.order != order {
        return Err(VhnError::Validation(format!("{}: field has N = {}, run uses N = {order}", path.display(), field.order)));
    }
    if field.values.len() != bundle.num_vertices() || field.frame != bundle.frame.fingerprint() {
        return Err(VhnError::Validation(format!("{}: field was written for different mesh frames", path.display())));
    }
    Ok(())
}

/// The configuration must describe the model the checkpoint holds. The
/// diffusion time unit is exempt: training fills it in.
fn check_compatible(config: &RunConfig, meta: &CheckpointMeta) -> Result<()> {
    let mut model = config.model.clone();
    model.time_scale = meta.model.time_scale;
    model.dropout = meta.model.dropout;
    if model != meta.model || config.features != meta.features || config.eigen != meta.eigen {
        return Err(VhnError::Validation("checkpoint was trained with a different model, feature or eigensolver configuration".into()));
    }
    Ok(())
}

fn stem_of(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| VhnError::Validation(format!("cannot derive an output name from {}", path.display())))
}

fn output_stems<'a>(paths: impl Iterator<Item = &'a Path>) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    paths
        .map(|p| {
            let s = stem_of(p)?;
            if !seen.insert(s.clone()) {
                return Err(VhnError::Validation(format!("two meshes share the output name {s:?}")));
            }
            Ok(s)
        })
        .collect()
}

/// `# provenance`, then one row per vertex: index and the real and
/// imaginary part of every channel.
fn features_table(bundle: &MeshBundle) -> String {
    let f = &bundle.features;
    let mut s = format!("# features {} frame {:016x} channels {}\n", f.provenance, f.frame, f.channels());
    for v in 0..f.values.rows() {
        s.push_str(&v.to_string());
        for c in 0..f.channels() {
            let z: Complex64 = f.values[(v, c)];
            s.push_str(&format!("\t{:.16e}\t{:.16e}", z.re, z.im));
        }
        s.push('\n');
    }
    s
}
