use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_f32, read_f32_range, write_json};

/// What a sink learns about the stream before the first frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameInfo {
    pub rows: usize,
    pub cols: usize,
    pub dx_cm: f64,
    pub dt_record_ms: f64,
    pub frames: usize,
    pub v0_mv: f64,
    pub vfi_mv: f64,
}

/// Consumer of recorded transmembrane-potential frames (mV).
pub trait FrameSink {
    fn begin(&mut self, _info: &FrameInfo) -> Result<()> {
        Ok(())
    }
    fn frame(&mut self, index: usize, t_ms: f64, vm: ArrayView2<f64>) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<S: FrameSink + ?Sized> FrameSink for &mut S {
    fn begin(&mut self, info: &FrameInfo) -> Result<()> {
        (**self).begin(info)
    }
    fn frame(&mut self, index: usize, t_ms: f64, vm: ArrayView2<f64>) -> Result<()> {
        (**self).frame(index, t_ms, vm)
    }
    fn finish(&mut self) -> Result<()> {
        (**self).finish()
    }
}

pub struct NullSink;

impl FrameSink for NullSink {
    fn frame(&mut self, _: usize, _: f64, _: ArrayView2<f64>) -> Result<()> {
        Ok(())
    }
}

/// Keeps every frame in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub times: Vec<f64>,
    pub frames: Vec<Array2<f64>>,
}

impl FrameSink for MemorySink {
    fn frame(&mut self, _: usize, t_ms: f64, vm: ArrayView2<f64>) -> Result<()> {
        self.times.push(t_ms);
        self.frames.push(vm.to_owned());
        Ok(())
    }
}

/// Wraps a closure as a sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(usize, f64, ArrayView2<f64>) -> Result<()>> FrameSink for FnSink<F> {
    fn frame(&mut self, index: usize, t_ms: f64, vm: ArrayView2<f64>) -> Result<()> {
        (self.0)(index, t_ms, vm)
    }
}

/// Feeds both sinks.
pub struct Tee<A, B>(pub A, pub B);

impl<A: FrameSink, B: FrameSink> FrameSink for Tee<A, B> {
    fn begin(&mut self, info: &FrameInfo) -> Result<()> {
        self.0.begin(info)?;
        self.1.begin(info)
    }
    fn frame(&mut self, index: usize, t_ms: f64, vm: ArrayView2<f64>) -> Result<()> {
        self.0.frame(index, t_ms, vm)?;
        self.1.frame(index, t_ms, vm)
    }
    fn finish(&mut self) -> Result<()> {
        self.0.finish()?;
        self.1.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmStackManifest {
    pub kind: String,
    /// [frames, rows, cols]
    pub shape: [usize; 3],
    pub dt_record_ms: f64,
    pub dx_cm: f64,
    #[serde(rename = "V0_mV")]
    pub v0_mv: f64,
    #[serde(rename = "Vfi_mV")]
    pub vfi_mv: f64,
    /// Raw little-endian f32 file, relative to the manifest.
    pub data: String,
}

/// Streams frames to `<stem>.f32` and writes `<stem>.json` on finish.
pub struct VmStackWriter {
    stem: PathBuf,
    out: Option<BufWriter<File>>,
    info: Option<FrameInfo>,
    written: usize,
}

impl VmStackWriter {
    pub fn new(stem: impl AsRef<Path>) -> Self {
        Self {
            stem: stem.as_ref().to_path_buf(),
            out: None,
            info: None,
            written: 0,
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.stem.with_extension("json")
    }

    fn data_path(&self) -> PathBuf {
        self.stem.with_extension("f32")
    }
}

impl FrameSink for VmStackWriter {
    fn begin(&mut self, info: &FrameInfo) -> Result<()> {
        let path = self.data_path();
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.out = Some(BufWriter::new(f));
        self.info = Some(*info);
        self.written = 0;
        Ok(())
    }

    fn frame(&mut self, _: usize, _: f64, vm: ArrayView2<f64>) -> Result<()> {
        let path = self.data_path();
        let out = self
            .out
            .as_mut()
            .ok_or_else(|| Error::Config("frame before begin".into()))?;
        for &x in vm.iter() {
            out.write_all(&(x as f32).to_le_bytes())
                .map_err(|e| Error::io(&path, e))?;
        }
        self.written += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        let path = self.data_path();
        if let Some(mut out) = self.out.take() {
            out.flush().map_err(|e| Error::io(&path, e))?;
        }
        let info = self
            .info
            .ok_or_else(|| Error::Config("finish before begin".into()))?;
        let manifest = VmStackManifest {
            kind: "vm_stack".into(),
            shape: [self.written, info.rows, info.cols],
            dt_record_ms: info.dt_record_ms,
            dx_cm: info.dx_cm,
            v0_mv: info.v0_mv,
            vfi_mv: info.vfi_mv,
            data: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        write_json(self.manifest_path(), &manifest)
    }
}

fn data_file(manifest_path: &Path, m: &VmStackManifest) -> PathBuf {
    manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&m.data)
}

pub fn read_vm_manifest(path: impl AsRef<Path>) -> Result<VmStackManifest> {
    let path = path.as_ref();
    let m: VmStackManifest = crate::io::read_json(path)?;
    if m.kind != "vm_stack" {
        return Err(Error::format(
            path,
            format!("expected kind vm_stack, found {}", m.kind),
        ));
    }
    Ok(m)
}

pub fn load_vm_stack(path: impl AsRef<Path>) -> Result<(Array3<f32>, VmStackManifest)> {
    let path = path.as_ref();
    let m = read_vm_manifest(path)?;
    let data = read_f32(data_file(path, &m))?;
    let arr = Array3::from_shape_vec(m.shape, data).map_err(|e| {
        Error::format(
            path,
            format!("data does not match shape {:?}: {e}", m.shape),
        )
    })?;
    Ok((arr, m))
}

/// Reads a single frame without loading the stack.
pub fn read_vm_frame(
    path: impl AsRef<Path>,
    m: &VmStackManifest,
    index: usize,
) -> Result<Array2<f64>> {
    let path = path.as_ref();
    if index >= m.shape[0] {
        return Err(Error::InvalidParameter(format!(
            "frame {index} out of range for {} frames",
            m.shape[0]
        )));
    }
    let n = m.shape[1] * m.shape[2];
    let raw = read_f32_range(data_file(path, m), (index * n * 4) as u64, n)?;
    Ok(Array2::from_shape_fn((m.shape[1], m.shape[2]), |(i, j)| {
        raw[i * m.shape[2] + j] as f64
    }))
}
