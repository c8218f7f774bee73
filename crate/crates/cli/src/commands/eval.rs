use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::ValueEnum;
use rayon::prelude::*;
use scarmap_core::dataset::Mode;
use scarmap_core::io::{derive_seed, write_json};
use scarmap_core::stats::{
    aggregate, jaccard_by, rmse, surrogate_test_field, write_aggregate_csv, write_records_json,
    EvalRecord, SurrogateSource, SurrogateTestOptions, SurrogateTestResult,
};
use scarmap_core::substrate::DiffusionTensorField;
use serde::Serialize;
use serde_json::json;

use super::{collect_pairs, Pair};
use crate::stage::{Entry, Stage, StageManifest};
use crate::Ctx;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Prediction,
    Truth,
}

impl From<SourceArg> for SurrogateSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Prediction => SurrogateSource::Prediction,
            SourceArg::Truth => SurrogateSource::Truth,
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Directory of predicted fields (sim_00000.json, ...).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "C")]
    pub mode: Mode,
    /// Only simulations in this fold.
    #[arg(long)]
    pub fold: Option<usize>,
    /// Surrogates per simulation; 0 skips the surrogate test.
    #[arg(long)]
    pub surrogates: Option<usize>,
    /// Jaccard scar threshold, cm²/ms.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
}

/// RMSE over all three tensor components.
pub fn tensor_rmse(a: &DiffusionTensorField, b: &DiffusionTensorField) -> Result<f64> {
    let parts = [
        rmse(a.d_xx.view(), b.d_xx.view())?,
        rmse(a.d_yy.view(), b.d_yy.view())?,
        rmse(a.d_xy.view(), b.d_xy.view())?,
    ];
    Ok((parts.iter().map(|r| r * r).sum::<f64>() / 3.0).sqrt())
}

#[derive(Serialize)]
pub struct SimSurrogates {
    pub sim_id: u32,
    #[serde(flatten)]
    pub result: SurrogateTestResult,
}

pub fn surrogate_options(
    ctx: &Ctx,
    count: usize,
    source: SurrogateSource,
    sim_id: u32,
) -> SurrogateTestOptions {
    SurrogateTestOptions {
        count,
        seed: derive_seed(ctx.seed, &[u64::from(sim_id)]),
        source,
        surrogate: ctx.cfg.eval.surrogate,
    }
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let ev = &ctx.cfg.eval;
    let count = args.surrogates.unwrap_or(ev.surrogates);
    let threshold = args.threshold.unwrap_or(ev.threshold);
    let source = args.source.map(SurrogateSource::from).unwrap_or(ev.source);
    let (pairs, ds_hash) = collect_pairs(ctx, &args.pred, args.mode, args.fold)?;
    let dir = ctx.ws.prepare_output(Stage::Eval)?;

    let scored = pairs
        .par_iter()
        .map(
            |p: &Pair| -> Result<(EvalRecord, Option<SurrogateTestResult>)> {
                let test = if count > 0 {
                    let opts = surrogate_options(ctx, count, source, p.sim_id);
                    Some(surrogate_test_field(&p.pred.d_xx, &p.truth.d_xx, &opts)?)
                } else {
                    None
                };
                let rec = EvalRecord {
                    sim_id: p.sim_id,
                    rmse: tensor_rmse(&p.pred, &p.truth)?,
                    jaccard: jaccard_by(&p.truth, &p.pred, threshold, ev.channel)?,
                    percentile: test.as_ref().map(|t| t.percentile),
                    p_value: test.as_ref().map(|t| t.p_value),
                };
                Ok((rec, test))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let (records, tests): (Vec<EvalRecord>, Vec<Option<SurrogateTestResult>>) =
        scored.into_iter().unzip();
    let tests: Vec<SurrogateTestResult> = tests.into_iter().flatten().collect();
    let report = aggregate(&records, &tests);

    write_records_json(&dir.join("records.json"), &records)?;
    write_aggregate_csv(&dir.join("aggregate.csv"), &report)?;
    if !tests.is_empty() {
        let per_sim: Vec<SimSurrogates> = records
            .iter()
            .zip(&tests)
            .map(|(r, t)| SimSurrogates {
                sim_id: r.sim_id,
                result: t.clone(),
            })
            .collect();
        write_json(dir.join("surrogates.json"), &per_sim)?;
    }
    let mut m = StageManifest::new(
        Stage::Eval,
        ctx.seed,
        json!({
            "mode": args.mode,
            "fold": args.fold,
            "threshold": threshold,
            "channel": ev.channel,
            "surrogates": count,
            "source": source,
            "surrogate": ev.surrogate,
        }),
    );
    m.upstream.insert(Stage::Dataset.dir_name().into(), ds_hash);
    m.entries = pairs
        .iter()
        .map(|p| Entry {
            sim_id: p.sim_id,
            kind: p.kind,
            seed: derive_seed(ctx.seed, &[u64::from(p.sim_id)]),
            file: None,
            info: BTreeMap::from([("prediction_sha256".to_string(), json!(p.pred_sha256))]),
        })
        .collect();
    ctx.ws.save(Stage::Eval, &m)?;

    println!(
        "{} simulations: rmse {:.4e} ± {:.2e}, jaccard {:.3} ± {:.3}",
        report.count, report.rmse_mean, report.rmse_sd, report.jaccard_mean, report.jaccard_sd
    );
    if let Some(p) = report.median_percentile {
        println!("median percentile {p:.3}");
    }
    if let Some(w) = report.welch {
        println!(
            "welch t {:.3}, df {:.1}, one-sided p {:.3e}",
            w.t, w.df, w.p_value
        );
    }
    if let Some(p) = report.combined_p {
        println!("combined surrogate p {p:.3e}");
    }
    println!("reports in {}", dir.display());
    Ok(())
}
