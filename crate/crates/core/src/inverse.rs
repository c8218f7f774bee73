//! Contract with the inverse-model trainer, which runs out of process.
//!
//! The trainer reads a dataset directory, writes one predicted tensor field
//! per simulation in the substrate field format, and logs a per-epoch loss
//! curve as CSV. Everything here is shapes, defaults and file formats; the
//! network itself lives with the trainer.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, Mode, NOISE_SIGMA};
use crate::error::{Error, Result};
use crate::substrate::{load_tensor_field, save_tensor_field, DiffusionTensorField};

/// Tensor channels (d_xx, d_yy, d_xy) followed by the two coordinate
/// channels the network also reconstructs.
pub const OUTPUT_CHANNELS: usize = 5;
pub const TENSOR_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub encoder: Vec<usize>,
    pub decoder: Vec<usize>,
    pub output_channels: usize,
    /// Electrodes per side of the input.
    pub input_side: usize,
    pub output_side: usize,
    /// Coordinate channels appended at the first and last layers.
    pub coordconv: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            encoder: vec![60, 120, 240],
            decoder: vec![120, 60, 30, 15],
            output_channels: OUTPUT_CHANNELS,
            input_side: 29,
            output_side: 96,
            coordconv: true,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(Error::InvalidParameter(
                "encoder and decoder need at least one stage".into(),
            ));
        }
        if self.encoder.iter().chain(&self.decoder).any(|&d| d == 0) {
            return Err(Error::InvalidParameter(
                "layer depths must be positive".into(),
            ));
        }
        if self.output_channels < TENSOR_CHANNELS {
            return Err(Error::InvalidParameter(format!(
                "{} output channels cannot hold a tensor field",
                self.output_channels
            )));
        }
        if self.input_side == 0 || self.output_side == 0 {
            return Err(Error::InvalidParameter("empty input or output grid".into()));
        }
        Ok(())
    }

    /// `(channels, side, side)` for samples of `n` electrogram frames.
    pub fn input_shape(&self, n: usize) -> Result<[usize; 3]> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "samples need at least one frame".into(),
            ));
        }
        Ok([n + 2, self.input_side, self.input_side])
    }

    pub fn output_shape(&self) -> [usize; 3] {
        [self.output_channels, self.output_side, self.output_side]
    }

    /// Checks that a dataset layout fits this model.
    pub fn check_dataset(&self, m: &DatasetManifest) -> Result<()> {
        let [_, rows, cols] = m.layout.egm;
        if rows != self.input_side || cols != self.input_side {
            return Err(Error::ShapeMismatch(format!(
                "dataset electrodes {rows}×{cols}, model expects {0}×{0}",
                self.input_side
            )));
        }
        if m.target_n != self.output_side {
            return Err(Error::ShapeMismatch(format!(
                "dataset targets {0}×{0}, model produces {1}×{1}",
                m.target_n, self.output_side
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Decoupled (AdamW-style) weight decay.
    pub weight_decay: f64,
    pub folds: usize,
    pub noise_sigma: f64,
    pub mode: Mode,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            folds: 10,
            noise_sigma: NOISE_SIGMA,
            mode: Mode::C,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "{} folds leave nothing to test on",
                self.folds
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter(
                "rates and noise must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One line of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub train_rmse: f64,
    pub val_rmse: f64,
}

pub const CURVE_HEADER: &str = "epoch,train_rmse,val_rmse";

pub fn write_training_curve(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut s = format!("{CURVE_HEADER}\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.epoch, p.train_rmse, p.val_rmse);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_training_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CURVE_HEADER) {
        return Err(Error::format(
            path,
            format!("expected header `{CURVE_HEADER}`"),
        ));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let bad = || Error::format(path, format!("line {}: `{l}`", k + 2));
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(CurvePoint {
                epoch: f[0].parse().map_err(|_| bad())?,
                train_rmse: f[1].parse().map_err(|_| bad())?,
                val_rmse: f[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Mean of per-sample network outputs for one simulation, as a tensor field.
///
/// Each output is `(channels, m, m)` with the tensor in the first three
/// channels; any further (coordinate) channels are dropped.
pub fn average_outputs(
    outputs: &[(u32, Array3<f32>)],
    dx: f64,
) -> Result<(u32, DiffusionTensorField)> {
    let (sim_id, first) = outputs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no samples to average".into()))?;
    if let Some((other, _)) = outputs.iter().find(|(id, _)| id != sim_id) {
        return Err(Error::InvalidParameter(format!(
            "samples from simulations {sim_id} and {other} cannot be averaged together"
        )));
    }
    let shape = first.dim();
    if shape.0 < TENSOR_CHANNELS {
        return Err(Error::ShapeMismatch(format!(
            "{} channels, need at least 3",
            shape.0
        )));
    }
    let mut sum = Array3::<f64>::zeros((TENSOR_CHANNELS, shape.1, shape.2));
    for (_, o) in outputs {
        if o.dim() != shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                o.dim(),
                shape
            )));
        }
        for k in 0..TENSOR_CHANNELS {
            let mut acc = sum.index_axis_mut(Axis(0), k);
            acc.zip_mut_with(&o.index_axis(Axis(0), k), |a, &v| *a += f64::from(v));
        }
    }
    sum /= outputs.len() as f64;
    let plane = |k: usize| -> Array2<f64> { sum.index_axis(Axis(0), k).to_owned() };
    Ok((
        *sim_id,
        DiffusionTensorField::new(plane(0), plane(1), plane(2), dx)?,
    ))
}

/// `dir/sim_00042.json` and friends.
pub fn prediction_stem(dir: &Path, sim_id: u32) -> PathBuf {
    dir.join(format!("sim_{sim_id:05}"))
}

pub fn save_prediction(dir: &Path, sim_id: u32, field: &DiffusionTensorField) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_tensor_field(
        &prediction_stem(dir, sim_id),
        field,
        None,
        serde_json::json!({ "source": "prediction", "sim_id": sim_id }),
        None,
    )
}

/// Predicted field for `sim_id`, or `None` when the trainer wrote none.
pub fn load_prediction(dir: &Path, sim_id: u32) -> Result<Option<DiffusionTensorField>> {
    let path = prediction_stem(dir, sim_id).with_extension("json");
    if !path.exists() {
        return Ok(None);
    }
    load_tensor_field(&path).map(|(f, _)| Some(f))
}
