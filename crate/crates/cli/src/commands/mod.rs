pub mod dataset;
pub mod egm;
pub mod eval;
pub mod gen;
pub mod plot;
pub mod simulate;
pub mod surrogate;

use std::path::Path;

use anyhow::{Context, Result};
use ndarray::{Array3, Axis};
use scarmap_core::dataset::{Dataset, Mode};
use scarmap_core::inverse::{load_prediction, prediction_stem};
use scarmap_core::io::file_sha256;
use scarmap_core::substrate::{DiffusionTensorField, FieldKind};

use crate::stage::Stage;
use crate::{Ctx, Invalid};

pub(crate) fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// A predicted field and the dataset target it is scored against.
pub(crate) struct Pair {
    pub sim_id: u32,
    pub kind: FieldKind,
    pub truth: DiffusionTensorField,
    pub pred: DiffusionTensorField,
    pub pred_sha256: String,
}

fn target_field(t: &Array3<f32>, dx: f64) -> Result<DiffusionTensorField> {
    let plane = |k: usize| t.index_axis(Axis(0), k).mapv(f64::from);
    Ok(DiffusionTensorField::new(plane(0), plane(1), plane(2), dx)?)
}

/// Predictions found in `pred_dir` for the dataset simulations selected by
/// `mode` and `fold`, with the dataset manifest hash.
pub(crate) fn collect_pairs(
    ctx: &Ctx,
    pred_dir: &Path,
    mode: Mode,
    fold: Option<usize>,
) -> Result<(Vec<Pair>, String)> {
    let hash = ctx.ws.verified_hash(Stage::Dataset)?;
    let ds = Dataset::open(ctx.ws.dir(Stage::Dataset))?;
    let m = &ds.manifest;
    let mut ids: Vec<u32> = m.modes.get(mode.name()).cloned().unwrap_or_default();
    if let Some(f) = fold {
        let members = m.folds.get(f).ok_or_else(|| {
            Invalid(format!(
                "fold {f} does not exist; the dataset has {}",
                m.folds.len()
            ))
        })?;
        ids.retain(|id| members.contains(id));
    }
    if !pred_dir.is_dir() {
        return Err(Invalid(format!(
            "prediction directory {} does not exist",
            pred_dir.display()
        ))
        .into());
    }
    let mut pairs = Vec::new();
    for id in ids {
        let Some(pred) = load_prediction(pred_dir, id)
            .with_context(|| format!("prediction for simulation {id}"))?
        else {
            log::debug!("no prediction for simulation {id}");
            continue;
        };
        let truth = target_field(&ds.target(id)?, pred.dx)?;
        if truth.dim() != pred.dim() {
            return Err(Invalid(format!(
                "prediction for simulation {id} is {:?}, the target is {:?}",
                pred.dim(),
                truth.dim()
            ))
            .into());
        }
        let kind = m.sim(id).map(|s| s.kind).expect("mode lists dataset sims");
        let pred_sha256 = file_sha256(prediction_stem(pred_dir, id).with_extension("f32"))?;
        pairs.push(Pair {
            sim_id: id,
            kind,
            truth,
            pred,
            pred_sha256,
        });
    }
    if pairs.is_empty() {
        return Err(Invalid(format!(
            "no predictions for the selected {mode} simulations in {} (expected files like sim_00000.json)",
            pred_dir.display()
        ))
        .into());
    }
    Ok((pairs, hash))
}
