//! Write a small ready-to-run project: the coarse and fine bumpy spheres, the
//! synthetic 4-RoSy target on the coarse one, the flat and folded sheets, and
//! a configuration for the overfit run.
//!
//!     cargo run --release -p vhn --example fixture -- demo
//!     vhn --config demo/config.json train

use std::fs;
use std::path::PathBuf;

use serde_json::json;

use vhn::cache::prepare;
use vhn::fieldio::export_field;
use vhn::fixtures;
use vhn::infer::vertex_field;
use vhn::obj::write_obj;

fn main() -> vhn::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "vhn-demo".into()));
    fs::create_dir_all(&dir).map_err(|e| vhn::VhnError::io(&dir, e))?;

    let (coarse, fine) = fixtures::remesh_pair();
    let (flat, bent) = fixtures::isometry_pair();
    write_obj(&coarse, dir.join("coarse.obj"))?;
    write_obj(&fine, dir.join("fine.obj"))?;
    write_obj(&flat, dir.join("flat.obj"))?;
    write_obj(&bent, dir.join("bent.obj"))?;

    // the target refers to the frames of the mesh as it is read back
    let settings = fixtures::overfit_settings();
    let reloaded = vhn::obj::load_obj(dir.join("coarse.obj"))?;
    let bundle = prepare(reloaded, &settings, None)?.bundle;
    let target = vertex_field(fixtures::synthetic_target(&bundle), 4, &bundle)?;
    export_field(&target, &bundle.mesh, &bundle.frame, &dir.join("coarse.field"))?;

    let m = fixtures::overfit_model_config();
    let t = fixtures::overfit_train_config();
    let config = json!({
        "meshes": [{"mesh": "coarse.obj", "field": "coarse.field"}],
        "model": {
            "num_blocks": m.num_blocks,
            "hidden_channels": m.hidden_channels,
            "times_per_block": m.times_per_block,
            "k": m.k,
            "dropout": m.dropout
        },
        "train": {
            "learning_rate": t.learning_rate,
            "decay_every": t.decay_every,
            "epochs": t.epochs,
            "rosy_order": 4
        },
        "cache_dir": "cache",
        "out_dir": "run",
        "seed": fixtures::OVERFIT_INIT_SEED
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).map_err(|e| vhn::VhnError::io(&path, e))?;
    println!("wrote {}", dir.display());
    Ok(())
}
