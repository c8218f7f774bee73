use std::collections::BTreeMap;

use anyhow::{Context, Result};
use rayon::prelude::*;
use scarmap_core::egm::EgmRecorder;
use scarmap_core::ep::{run as run_sim, NullSink, RunSummary, Tee, VmStackWriter};
use scarmap_core::io::file_sha256;
use scarmap_core::substrate::load_tensor_field;
use serde_json::json;

use super::file_name;
use crate::stage::{entry_file, sim_stem, Entry, Stage, StageManifest};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Record electrograms during the run and write the egm stage too.
    #[arg(long)]
    pub egm: bool,
    /// With --egm, still write the V_m frame stacks.
    #[arg(long, requires = "egm")]
    pub keep_vm: bool,
}

fn summary_info(s: &RunSummary) -> BTreeMap<String, serde_json::Value> {
    [
        ("steps", json!(s.steps)),
        ("frames", json!(s.frames)),
        ("u_min", json!(s.u_min)),
        ("u_max", json!(s.u_max)),
        ("activation_coverage", json!(s.activation_coverage)),
        ("last_activation_ms", json!(s.last_activation_ms)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let (subs, subs_hash) = ctx.ws.load(Stage::Substrates)?;
    let sub_dir = ctx.ws.dir(Stage::Substrates);
    let dir = ctx.ws.prepare_output(Stage::Sims)?;
    let egm_dir = if args.egm {
        Some(ctx.ws.prepare_output(Stage::Egm)?)
    } else {
        None
    };
    let keep_vm = !args.egm || args.keep_vm;
    let cfg = &ctx.cfg.sim;
    let el = &ctx.cfg.electrodes;

    let results = subs
        .entries
        .par_iter()
        .map(|e| -> Result<(Entry, Option<Entry>)> {
            let (tensor, _) = load_tensor_field(&entry_file(&sub_dir, e, Stage::Substrates)?)?;
            cfg.validate(&tensor)
                .with_context(|| format!("simulation {} configuration", e.sim_id))?;
            let stem = dir.join(sim_stem(e.sim_id));
            let mut vm = keep_vm.then(|| VmStackWriter::new(&stem));
            let mut rec = match &egm_dir {
                Some(_) => Some(EgmRecorder::new(
                    el.grid(tensor.extent())?,
                    el.sigma_e,
                    el.sample_interval_ms,
                    el.coarsen,
                )),
                None => None,
            };
            let summary = match (vm.as_mut(), rec.as_mut()) {
                (Some(a), Some(b)) => run_sim(cfg, &tensor, Tee(a, b)),
                (Some(a), None) => run_sim(cfg, &tensor, a),
                (None, Some(b)) => run_sim(cfg, &tensor, b),
                (None, None) => run_sim(cfg, &tensor, NullSink),
            }
            .with_context(|| format!("simulation {}", e.sim_id))?;
            log::info!(
                "simulation {} ({}): coverage {:.3}",
                e.sim_id,
                e.kind,
                summary.activation_coverage
            );
            let sim_entry = Entry {
                sim_id: e.sim_id,
                kind: e.kind,
                seed: e.seed,
                file: vm.map(|w| file_name(&w.manifest_path())),
                info: summary_info(&summary),
            };
            let egm_entry = match (rec, &egm_dir) {
                (Some(r), Some(d)) => {
                    let path = r.into_array().save(d.join(sim_stem(e.sim_id)))?;
                    Some(Entry {
                        sim_id: e.sim_id,
                        kind: e.kind,
                        seed: e.seed,
                        file: Some(file_name(&path)),
                        info: BTreeMap::new(),
                    })
                }
                _ => None,
            };
            Ok((sim_entry, egm_entry))
        })
        .collect::<Result<Vec<_>>>()?;

    let (sims, egms): (Vec<Entry>, Vec<Option<Entry>>) = results.into_iter().unzip();
    let mut m = StageManifest::new(
        Stage::Sims,
        ctx.seed,
        json!({ "sim": cfg, "keep_vm": keep_vm }),
    );
    m.upstream
        .insert(Stage::Substrates.dir_name().into(), subs_hash);
    m.entries = sims;
    ctx.ws.save(Stage::Sims, &m)?;
    println!(
        "simulated {} substrates into {}",
        m.entries.len(),
        dir.display()
    );

    if let Some(d) = egm_dir {
        let mut em = StageManifest::new(
            Stage::Egm,
            ctx.seed,
            json!({ "electrodes": el, "inline": true }),
        );
        em.upstream.insert(
            Stage::Sims.dir_name().into(),
            file_sha256(ctx.ws.manifest_path(Stage::Sims))?,
        );
        em.entries = egms.into_iter().flatten().collect();
        ctx.ws.save(Stage::Egm, &em)?;
        println!(
            "recorded {} electrogram arrays into {}",
            em.entries.len(),
            d.display()
        );
    }
    Ok(())
}
