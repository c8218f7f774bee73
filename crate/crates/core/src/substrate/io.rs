//! Tensor fields on disk: `<stem>.f32` holds the three components
//! (d_xx, d_yy, d_xy), each row-major little-endian float32, and
//! `<stem>.json` describes them.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DiffusionTensorField, COMPONENTS};
use crate::error::{Error, Result};
use crate::io::{read_f32, read_json, read_u8, write_f32, write_json, write_u8};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFieldManifest {
    pub kind: String,
    pub shape: [usize; 3],
    pub dx_cm: f64,
    pub components: Vec<String>,
    pub seed: Option<u64>,
    pub generator_config: serde_json::Value,
    /// Data file name, relative to the manifest.
    pub data: String,
    /// Scar mask file name, when the field came with one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

pub const TENSOR_FIELD_KIND: &str = "tensor_field";

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<stem>.f32` and `<stem>.json`; returns the manifest path.
pub fn save_tensor_field(
    stem: &Path,
    field: &DiffusionTensorField,
    seed: Option<u64>,
    generator_config: serde_json::Value,
    mask: Option<&Array2<u8>>,
) -> Result<PathBuf> {
    let (rows, cols) = field.dim();
    let data_path = with_suffix(stem, ".f32");
    let values = field
        .d_xx
        .iter()
        .chain(field.d_yy.iter())
        .chain(field.d_xy.iter())
        .copied();
    write_f32(&data_path, values)?;
    let mask_name = match mask {
        Some(m) => {
            let p = save_mask(stem, m)?;
            Some(file_name(&p))
        }
        None => None,
    };
    let manifest = TensorFieldManifest {
        kind: TENSOR_FIELD_KIND.into(),
        shape: [3, rows, cols],
        dx_cm: field.dx,
        components: COMPONENTS.iter().map(|s| s.to_string()).collect(),
        seed,
        generator_config,
        data: file_name(&data_path),
        mask: mask_name,
    };
    let json_path = with_suffix(stem, ".json");
    write_json(&json_path, &manifest)?;
    Ok(json_path)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads a field from its JSON manifest.
pub fn load_tensor_field(
    manifest_path: &Path,
) -> Result<(DiffusionTensorField, TensorFieldManifest)> {
    let manifest: TensorFieldManifest = read_json(manifest_path)?;
    if manifest.kind != TENSOR_FIELD_KIND {
        return Err(Error::format(
            manifest_path,
            format!(
                "expected a {TENSOR_FIELD_KIND} manifest, found `{}`",
                manifest.kind
            ),
        ));
    }
    let [c, rows, cols] = manifest.shape;
    if c != 3 {
        return Err(Error::format(
            manifest_path,
            "tensor fields have 3 components",
        ));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let data_path = dir.join(&manifest.data);
    let data = read_f32(&data_path)?;
    if data.len() != 3 * rows * cols {
        return Err(Error::format(
            &data_path,
            format!("expected {} values, found {}", 3 * rows * cols, data.len()),
        ));
    }
    let plane = |k: usize| {
        Array2::from_shape_vec(
            (rows, cols),
            data[k * rows * cols..(k + 1) * rows * cols]
                .iter()
                .map(|&v| f64::from(v))
                .collect(),
        )
        .expect("length checked")
    };
    let field = DiffusionTensorField::new(plane(0), plane(1), plane(2), manifest.dx_cm)?;
    Ok((field, manifest))
}

/// Writes `<stem>.mask.u8` (row-major, 1 = scar).
pub fn save_mask(stem: &Path, mask: &Array2<u8>) -> Result<PathBuf> {
    let path = with_suffix(stem, ".mask.u8");
    let bytes: Vec<u8> = mask.iter().copied().collect();
    write_u8(&path, &bytes)?;
    Ok(path)
}

pub fn load_mask(path: &Path, rows: usize, cols: usize) -> Result<Array2<u8>> {
    let bytes = read_u8(path)?;
    Array2::from_shape_vec((rows, cols), bytes)
        .map_err(|_| Error::format(path, format!("mask is not {rows}×{cols}")))
}
