use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::substrate::{DiffusionTensorField, D_HEALTHY, D_SCAR};

/// Midpoint between healthy and scar diffusivity, cm²/ms.
pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.5 * (D_HEALTHY + D_SCAR);

fn same_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Root mean square difference.
pub fn rmse(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    same_shape(a.dim(), b.dim())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum = Zip::from(&a)
        .and(&b)
        .fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y));
    Ok((sum / a.len() as f64).sqrt())
}

/// Which per-cell scalar is thresholded into a scar mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskChannel {
    #[default]
    Dxx,
    /// Largest tensor eigenvalue. Unlike `d_xx` it does not dip below the
    /// threshold in healthy tissue whose fibres run across x.
    MaxEigen,
}

/// Cells whose diffusivity lies below `threshold`.
pub fn scar_mask(f: &DiffusionTensorField, threshold: f64, channel: MaskChannel) -> Array2<bool> {
    match channel {
        MaskChannel::Dxx => f.d_xx.mapv(|d| d < threshold),
        MaskChannel::MaxEigen => {
            Array2::from_shape_fn(f.dim(), |(i, j)| f.eigenvalues(i, j).1 < threshold)
        }
    }
}

/// Intersection over union; two empty masks score 1.
pub fn jaccard_masks(a: ArrayView2<bool>, b: ArrayView2<bool>) -> Result<f64> {
    same_shape(a.dim(), b.dim())?;
    let (mut inter, mut union) = (0usize, 0usize);
    Zip::from(&a).and(&b).for_each(|&x, &y| {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    });
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Jaccard index of the scar masks of two tensor fields, thresholding `d_xx`.
pub fn jaccard(
    truth: &DiffusionTensorField,
    pred: &DiffusionTensorField,
    threshold: f64,
) -> Result<f64> {
    jaccard_by(truth, pred, threshold, MaskChannel::Dxx)
}

pub fn jaccard_by(
    truth: &DiffusionTensorField,
    pred: &DiffusionTensorField,
    threshold: f64,
    channel: MaskChannel,
) -> Result<f64> {
    same_shape(truth.dim(), pred.dim())?;
    jaccard_masks(
        scar_mask(truth, threshold, channel).view(),
        scar_mask(pred, threshold, channel).view(),
    )
}

/// Autocorrelation of the demeaned field averaged over rings of integer
/// radius `1..=max_lag` cells. Entry `k - 1` holds lag `k`.
///
/// Each offset contributes the mean product over its overlapping pairs,
/// normalized by the field variance. A constant field yields zeros.
pub fn radial_autocorrelation(x: ArrayView2<f64>, max_lag: usize) -> Vec<f64> {
    let (rows, cols) = x.dim();
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let z = x.mapv(|v| v - mean);
    let var = z.iter().map(|v| v * v).sum::<f64>() / n;
    let mut acc = vec![0.0; max_lag];
    let mut counts = vec![0usize; max_lag];
    if var <= 0.0 || max_lag == 0 {
        return acc;
    }
    let l = max_lag as isize;
    for dy in -l..=l {
        for dx in -l..=l {
            let r = ((dy * dy + dx * dx) as f64).sqrt().round() as usize;
            if r == 0 || r > max_lag {
                continue;
            }
            let (ay, ax) = (dy.unsigned_abs(), dx.unsigned_abs());
            if ay >= rows || ax >= cols {
                continue;
            }
            let (i0, j0) = ((-dy).max(0) as usize, (-dx).max(0) as usize);
            let (h, w) = (rows - ay, cols - ax);
            let mut s = 0.0;
            for i in i0..i0 + h {
                let a = z.row(i);
                let b = z.row((i as isize + dy) as usize);
                for j in j0..j0 + w {
                    s += a[j] * b[(j as isize + dx) as usize];
                }
            }
            acc[r - 1] += s / (h * w) as f64 / var;
            counts[r - 1] += 1;
        }
    }
    for (a, c) in acc.iter_mut().zip(counts) {
        if c > 0 {
            *a /= c as f64;
        }
    }
    acc
}

/// `‖a − b‖ / ‖b‖` in the Euclidean norm.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
