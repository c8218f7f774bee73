use std::collections::HashMap;

use anyhow::Result;
use scarmap_core::dataset::{build_dataset_with, count_samples, DatasetOptions, SimInput};
use scarmap_core::egm::EgmArray;
use scarmap_core::io::write_json;
use scarmap_core::substrate::{load_tensor_field, FieldKind};
use scarmap_core::Error as CoreError;

use crate::stage::{Entry, Stage};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {}

fn artifact(
    dir: &std::path::Path,
    e: &Entry,
    what: &str,
) -> scarmap_core::Result<std::path::PathBuf> {
    e.file.as_ref().map(|f| dir.join(f)).ok_or_else(|| {
        CoreError::InvalidParameter(format!("simulation {} has no {what} file", e.sim_id))
    })
}

pub fn run(ctx: &Ctx, _args: &Args) -> Result<()> {
    let (egm, egm_hash) = ctx.ws.load(Stage::Egm)?;
    let (subs, subs_hash) = ctx.ws.load(Stage::Substrates)?;
    let (egm_dir, sub_dir) = (ctx.ws.dir(Stage::Egm), ctx.ws.dir(Stage::Substrates));
    let by_id: HashMap<u32, &Entry> = subs.entries.iter().map(|e| (e.sim_id, e)).collect();
    let index: Vec<(u32, FieldKind)> = egm.entries.iter().map(|e| (e.sim_id, e.kind)).collect();

    let d = &ctx.cfg.dataset;
    let opts = DatasetOptions {
        spec: d.spec,
        noise_sigma: d.noise_sigma,
        noise: d.noise,
        seed: ctx.seed,
        folds: d.folds,
        target_n: d.target_n,
    };
    let dir = ctx.ws.prepare_output(Stage::Dataset)?;
    let load = |i: usize| -> scarmap_core::Result<SimInput> {
        let e = &egm.entries[i];
        let s = by_id.get(&e.sim_id).ok_or_else(|| {
            CoreError::InvalidParameter(format!("simulation {} has no substrate", e.sim_id))
        })?;
        let array = EgmArray::load(artifact(&egm_dir, e, "electrogram")?)?;
        if array.len() != d.spec.l {
            return Err(CoreError::InvalidParameter(format!(
                "simulation {} has {} electrogram samples but dataset.spec.l = {}",
                e.sim_id,
                array.len(),
                d.spec.l
            )));
        }
        let (tensor, _) = load_tensor_field(&artifact(&sub_dir, s, "substrate")?)?;
        Ok(SimInput {
            sim_id: e.sim_id,
            kind: e.kind,
            egm: array,
            tensor,
        })
    };
    let mut manifest = build_dataset_with(&index, load, &opts, &dir)?;
    manifest
        .upstream
        .insert(Stage::Egm.dir_name().into(), egm_hash);
    manifest
        .upstream
        .insert(Stage::Substrates.dir_name().into(), subs_hash);
    write_json(dir.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} samples from {} simulations ({} per simulation, {} folds) to {}",
        manifest.samples.len(),
        manifest.sims.len(),
        count_samples(&d.spec),
        manifest.folds.len(),
        dir.display()
    );
    Ok(())
}
