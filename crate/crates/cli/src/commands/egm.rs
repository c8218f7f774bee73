use std::collections::BTreeMap;

use anyhow::{Context, Result};
use rayon::prelude::*;
use scarmap_core::egm::EgmRecorder;
use scarmap_core::ep::{read_vm_frame, read_vm_manifest};
use serde_json::json;

use super::file_name;
use crate::stage::{entry_file, sim_stem, Entry, Stage, StageManifest};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {}

pub fn run(ctx: &Ctx, _args: &Args) -> Result<()> {
    let (sims, sims_hash) = ctx.ws.load(Stage::Sims)?;
    let sim_dir = ctx.ws.dir(Stage::Sims);
    let dir = ctx.ws.prepare_output(Stage::Egm)?;
    let el = &ctx.cfg.electrodes;

    let entries = sims
        .entries
        .par_iter()
        .map(|e| -> Result<Entry> {
            let path = entry_file(&sim_dir, e, Stage::Sims)
                .context("the simulate stage ran with --egm and no --keep-vm")?;
            let vm = read_vm_manifest(&path)?;
            let [frames, rows, cols] = vm.shape;
            let extent = (cols as f64 * vm.dx_cm, rows as f64 * vm.dx_cm);
            let mut rec = EgmRecorder::new(
                el.grid(extent)?,
                el.sigma_e,
                el.sample_interval_ms,
                el.coarsen,
            );
            rec.prepare(rows, cols, vm.dx_cm, vm.dt_record_ms)?;
            // frame by frame, so full-size stacks never sit in memory
            for k in 0..frames {
                rec.push(read_vm_frame(&path, &vm, k)?.view())?;
            }
            let out = rec.into_array().save(dir.join(sim_stem(e.sim_id)))?;
            Ok(Entry {
                sim_id: e.sim_id,
                kind: e.kind,
                seed: e.seed,
                file: Some(file_name(&out)),
                info: BTreeMap::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut m = StageManifest::new(
        Stage::Egm,
        ctx.seed,
        json!({ "electrodes": el, "inline": false }),
    );
    m.upstream.insert(Stage::Sims.dir_name().into(), sims_hash);
    m.entries = entries;
    ctx.ws.save(Stage::Egm, &m)?;
    println!(
        "recorded {} electrogram arrays into {}",
        m.entries.len(),
        dir.display()
    );
    Ok(())
}
