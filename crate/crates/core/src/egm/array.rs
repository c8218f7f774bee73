use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::grid::ElectrodeGrid;
use super::kernel::EgmKernel;
use crate::ep::{FrameInfo, FrameSink};
use crate::error::{Error, Result};
use crate::io::{read_f32, read_json, write_f32, write_json};

/// Electrograms: `data[[t, r, c]]` is electrode `(r, c)` at sample `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EgmArray {
    pub data: Array3<f64>,
    pub sample_interval_ms: f64,
    pub grid: ElectrodeGrid,
    pub sigma_e: f64,
}

impl EgmArray {
    pub fn len(&self) -> usize {
        self.data.len_of(Axis(0))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time series of one electrode.
    pub fn trace(&self, r: usize, c: usize) -> Vec<f64> {
        self.data.slice(ndarray::s![.., r, c]).to_vec()
    }

    pub fn peak_to_peak(&self, r: usize, c: usize) -> f64 {
        let t = self.trace(r, c);
        let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = t.iter().copied().fold(f64::INFINITY, f64::min);
        if t.is_empty() {
            0.0
        } else {
            max - min
        }
    }

    /// `t_ms,phi` rows for a single electrode.
    pub fn to_csv(&self, r: usize, c: usize) -> Result<String> {
        if r >= self.grid.rows || c >= self.grid.cols {
            return Err(Error::InvalidParameter(format!(
                "electrode ({r}, {c}) outside the {}×{} grid",
                self.grid.rows, self.grid.cols
            )));
        }
        let mut s = String::from("t_ms,phi\n");
        for (k, v) in self.trace(r, c).into_iter().enumerate() {
            let _ = writeln!(s, "{},{}", (k + 1) as f64 * self.sample_interval_ms, v);
        }
        Ok(s)
    }

    pub fn save(&self, stem: impl AsRef<Path>) -> Result<PathBuf> {
        let stem = stem.as_ref();
        let data_path = stem.with_extension("f32");
        write_f32(&data_path, self.data.iter().copied())?;
        let (t, r, c) = self.data.dim();
        let m = EgmManifest {
            kind: "egm".into(),
            shape: [t, r, c],
            sample_interval_ms: self.sample_interval_ms,
            spacing_cm: self.grid.spacing,
            z_cm: self.grid.z,
            sigma_e: self.sigma_e,
            origin_cm: [self.grid.origin.0, self.grid.origin.1],
            data: file_name(&data_path),
        };
        let json = stem.with_extension("json");
        write_json(&json, &m)?;
        Ok(json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let m: EgmManifest = read_json(path)?;
        if m.kind != "egm" {
            return Err(Error::format(
                path,
                format!("expected kind egm, found {}", m.kind),
            ));
        }
        let data_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&m.data);
        let raw = read_f32(&data_path)?;
        let data = Array3::from_shape_vec(m.shape, raw.into_iter().map(f64::from).collect())
            .map_err(|e| {
                Error::format(
                    path,
                    format!("data does not match shape {:?}: {e}", m.shape),
                )
            })?;
        Ok(Self {
            data,
            sample_interval_ms: m.sample_interval_ms,
            grid: ElectrodeGrid {
                rows: m.shape[1],
                cols: m.shape[2],
                spacing: m.spacing_cm,
                z: m.z_cm,
                origin: (m.origin_cm[0], m.origin_cm[1]),
            },
            sigma_e: m.sigma_e,
        })
    }
}

pub(crate) fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgmManifest {
    pub kind: String,
    /// [samples, rows, cols]
    pub shape: [usize; 3],
    pub sample_interval_ms: f64,
    pub spacing_cm: f64,
    pub z_cm: f64,
    pub sigma_e: f64,
    pub origin_cm: [f64; 2],
    pub data: String,
}

/// Frame sink that turns V_m frames into electrograms as they arrive.
///
/// Frames must come at the sampling interval or an integer fraction of it;
/// intermediate frames are skipped.
pub struct EgmRecorder {
    grid: ElectrodeGrid,
    sigma_e: f64,
    sample_interval_ms: f64,
    coarsen: usize,
    kernel: Option<EgmKernel>,
    stride: usize,
    seen: usize,
    samples: Vec<Vec<f64>>,
}

impl EgmRecorder {
    pub fn new(grid: ElectrodeGrid, sigma_e: f64, sample_interval_ms: f64, coarsen: usize) -> Self {
        Self {
            grid,
            sigma_e,
            sample_interval_ms,
            coarsen,
            kernel: None,
            stride: 1,
            seen: 0,
            samples: Vec::new(),
        }
    }

    /// Builds the kernel up front for frames of the given geometry.
    pub fn prepare(
        &mut self,
        rows: usize,
        cols: usize,
        dx: f64,
        frame_interval_ms: f64,
    ) -> Result<()> {
        let ratio = self.sample_interval_ms / frame_interval_ms;
        if !(ratio >= 1.0 - 1e-9) || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "frames every {frame_interval_ms} ms cannot be sampled every {} ms",
                self.sample_interval_ms
            )));
        }
        self.stride = ratio.round() as usize;
        self.kernel = Some(EgmKernel::new(
            rows,
            cols,
            dx,
            &self.grid,
            self.sigma_e,
            self.coarsen,
        )?);
        self.seen = 0;
        self.samples.clear();
        Ok(())
    }

    pub fn push(&mut self, vm: ArrayView2<f64>) -> Result<()> {
        let kernel = self
            .kernel
            .as_ref()
            .ok_or_else(|| Error::Config("recorder used before prepare".into()))?;
        self.seen += 1;
        if self.seen % self.stride == 0 {
            self.samples.push(kernel.apply(vm)?);
        }
        Ok(())
    }

    pub fn into_array(self) -> EgmArray {
        let (r, c) = (self.grid.rows, self.grid.cols);
        let t = self.samples.len();
        let flat: Vec<f64> = self.samples.into_iter().flatten().collect();
        EgmArray {
            data: Array3::from_shape_vec((t, r, c), flat).expect("sample length matches grid"),
            sample_interval_ms: self.sample_interval_ms,
            grid: self.grid,
            sigma_e: self.sigma_e,
        }
    }
}

impl FrameSink for EgmRecorder {
    fn begin(&mut self, info: &FrameInfo) -> Result<()> {
        self.prepare(info.rows, info.cols, info.dx_cm, info.dt_record_ms)
    }

    fn frame(&mut self, _: usize, _: f64, vm: ArrayView2<f64>) -> Result<()> {
        self.push(vm)
    }
}

/// Electrograms for a stack of frames recorded every `frame_interval_ms`.
pub fn record_grid(
    frames: ArrayView3<f64>,
    dx: f64,
    frame_interval_ms: f64,
    grid: &ElectrodeGrid,
    sigma_e: f64,
    sample_interval_ms: f64,
) -> Result<EgmArray> {
    let (_, rows, cols) = frames.dim();
    let mut rec = EgmRecorder::new(*grid, sigma_e, sample_interval_ms, 1);
    rec.prepare(rows, cols, dx, frame_interval_ms)?;
    for f in frames.outer_iter() {
        rec.push(f)?;
    }
    Ok(rec.into_array())
}
