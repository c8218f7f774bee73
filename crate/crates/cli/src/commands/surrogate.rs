use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use rayon::prelude::*;
use scarmap_core::dataset::Mode;
use scarmap_core::io::write_json;
use scarmap_core::stats::{
    make_surrogates, surrogate_test_field, SurrogateMethod, SurrogateSource,
};
use scarmap_core::substrate::{save_tensor_field, DiffusionTensorField};
use serde_json::json;

use super::collect_pairs;
use super::eval::{surrogate_options, SimSurrogates, SourceArg};
use crate::stage::{sim_stem, Entry, Stage, StageManifest};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Directory of predicted fields (sim_00000.json, ...).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "C")]
    pub mode: Mode,
    #[arg(long)]
    pub fold: Option<usize>,
    /// Surrogates per simulation.
    #[arg(long)]
    pub count: Option<usize>,
    /// phase or permute.
    #[arg(long)]
    pub method: Option<SurrogateMethod>,
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    /// Also write the first K surrogate maps of each simulation as fields.
    #[arg(long, default_value_t = 0)]
    pub save: usize,
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let ev = &ctx.cfg.eval;
    let count = args.count.unwrap_or(ev.surrogates);
    let source = args.source.map(SurrogateSource::from).unwrap_or(ev.source);
    let (pairs, ds_hash) = collect_pairs(ctx, &args.pred, args.mode, args.fold)?;
    let dir = ctx.ws.prepare_output(Stage::Surrogate)?;

    let results = pairs
        .par_iter()
        .map(|p| -> Result<(SimSurrogates, Vec<String>)> {
            let mut opts = surrogate_options(ctx, count, source, p.sim_id);
            if let Some(m) = args.method {
                opts.surrogate.method = m;
            }
            let result = surrogate_test_field(&p.pred.d_xx, &p.truth.d_xx, &opts)?;
            let mut saved = Vec::new();
            if args.save > 0 {
                let src = match source {
                    SurrogateSource::Prediction => &p.pred.d_xx,
                    SurrogateSource::Truth => &p.truth.d_xx,
                };
                // same seeds as the test, so these are its first K surrogates
                let maps = make_surrogates(src, opts.seed, args.save.min(count), &opts.surrogate)?;
                for (k, s) in maps.into_iter().enumerate() {
                    let f = DiffusionTensorField::isotropic(s, p.pred.dx)?;
                    let stem = dir.join(format!("{}.s{k:03}", sim_stem(p.sim_id)));
                    let path = save_tensor_field(
                        &stem,
                        &f,
                        Some(opts.seed),
                        json!({ "surrogate_of": "d_xx", "index": k, "source": source }),
                        None,
                    )?;
                    saved.push(super::file_name(&path));
                }
            }
            Ok((
                SimSurrogates {
                    sim_id: p.sim_id,
                    result,
                },
                saved,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let (records, saved): (Vec<SimSurrogates>, Vec<Vec<String>>) = results.into_iter().unzip();
    write_json(dir.join("results.json"), &records)?;
    let mut m = StageManifest::new(
        Stage::Surrogate,
        ctx.seed,
        json!({
            "mode": args.mode,
            "fold": args.fold,
            "count": count,
            "source": source,
            "surrogate": ev.surrogate,
            "method": args.method.unwrap_or(ev.surrogate.method),
        }),
    );
    m.upstream.insert(Stage::Dataset.dir_name().into(), ds_hash);
    m.entries = pairs
        .iter()
        .zip(saved)
        .map(|(p, files)| Entry {
            sim_id: p.sim_id,
            kind: p.kind,
            seed: surrogate_options(ctx, count, source, p.sim_id).seed,
            file: None,
            info: BTreeMap::from([
                ("prediction_sha256".to_string(), json!(p.pred_sha256)),
                ("saved_fields".to_string(), json!(files)),
            ]),
        })
        .collect();
    ctx.ws.save(Stage::Surrogate, &m)?;
    for r in &records {
        println!(
            "simulation {}: rmse {:.4e}, surrogate mean {:.4e}, percentile {:.3}, p {:.3}",
            r.sim_id,
            r.result.rmse_prediction,
            r.result.surrogate_mean(),
            r.result.percentile,
            r.result.p_value
        );
    }
    Ok(())
}
