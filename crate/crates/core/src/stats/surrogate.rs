//! Wavelet surrogates: fields that keep the multiscale energy layout of an
//! input while scrambling where the structure sits.

use ndarray::{Array2, Array3, Axis, Zip};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtcwt::{dtcwt_forward, dtcwt_inverse};
use crate::error::{Error, Result};
use crate::io::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMethod {
    /// Uniform random phase per coefficient, magnitude kept.
    #[default]
    Phase,
    /// Coefficients shuffled within each level and orientation.
    Permute,
}

impl std::str::FromStr for SurrogateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phase" => Ok(Self::Phase),
            "permute" | "permutation" => Ok(Self::Permute),
            _ => Err(Error::InvalidParameter(format!(
                "unknown surrogate method `{s}` (expected phase or permute)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateOptions {
    pub method: SurrogateMethod,
    /// Decomposition depth; `None` picks [`default_levels`].
    pub levels: Option<usize>,
    /// Refinement passes that pull subband magnitudes (and optionally the
    /// value histogram) back onto their targets after each inverse.
    pub iterations: usize,
    /// Rank-order remap onto the input's sorted values between passes.
    pub match_histogram: bool,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self {
            method: SurrogateMethod::Phase,
            levels: None,
            iterations: 6,
            match_histogram: true,
        }
    }
}

/// Deepest level (at most 4) whose coarsest subband is still 6 cells or more
/// across. 96×96 gives 4.
pub fn default_levels(rows: usize, cols: usize) -> usize {
    let m = rows.min(cols);
    (1..=4).rev().find(|&l| m >> l >= 6).unwrap_or(1)
}

fn mean_sd(x: &Array2<f64>) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn make_surrogate(field: &Array2<f64>, seed: u64) -> Result<Array2<f64>> {
    make_surrogate_with(field, seed, &SurrogateOptions::default())
}

/// One surrogate of `field`, rescaled to its mean and standard deviation.
/// The lowpass band is left untouched; detail magnitudes are kept (phase) or
/// moved around within their subband (permute).
pub fn make_surrogate_with(
    field: &Array2<f64>,
    seed: u64,
    opts: &SurrogateOptions,
) -> Result<Array2<f64>> {
    if let Some(v) = field.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "surrogate input contains {v}"
        )));
    }
    let first = field.iter().next().copied().unwrap_or(0.0);
    if field.iter().all(|&v| v == first) {
        return Ok(field.clone());
    }
    let (mean, sd) = mean_sd(field);
    if sd <= 1e-12 * mean.abs() {
        return Ok(Array2::from_elem(field.dim(), mean));
    }
    let levels = opts
        .levels
        .unwrap_or_else(|| default_levels(field.nrows(), field.ncols()));
    let p0 = dtcwt_forward(field, levels)?;
    let mut p = p0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for level in p.levels.iter_mut() {
        for k in 0..level.dim().2 {
            let mut band = level.index_axis_mut(Axis(2), k);
            match opts.method {
                SurrogateMethod::Phase => {
                    for z in band.iter_mut() {
                        let theta = rng.random::<f64>() * std::f64::consts::TAU;
                        *z *= Complex64::from_polar(1.0, theta);
                    }
                }
                SurrogateMethod::Permute => {
                    let mut vals: Vec<Complex64> = band.iter().copied().collect();
                    vals.shuffle(&mut rng);
                    for (z, v) in band.iter_mut().zip(vals) {
                        *z = v;
                    }
                }
            }
        }
    }
    let targets: Vec<Array3<f64>> = p.levels.iter().map(|l| l.mapv(|z| z.norm())).collect();
    let sorted = {
        let mut v: Vec<f64> = field.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let mut s = dtcwt_inverse(&p)?;
    for _ in 0..opts.iterations {
        if opts.match_histogram {
            rank_remap(&mut s, &sorted);
        }
        let mut q = dtcwt_forward(&s, levels)?;
        q.lowpass.assign(&p0.lowpass);
        for (level, target) in q.levels.iter_mut().zip(&targets) {
            Zip::from(level).and(target).for_each(|z, &m| {
                let r = z.norm();
                *z = if r > 0.0 {
                    *z * (m / r)
                } else {
                    Complex64::new(m, 0.0)
                };
            });
        }
        s = dtcwt_inverse(&q)?;
    }
    if opts.match_histogram {
        rank_remap(&mut s, &sorted);
    }
    let (sm, ss) = mean_sd(&s);
    if ss == 0.0 {
        return Ok(field.clone());
    }
    Ok(s.mapv(|v| (v - sm) / ss * sd + mean))
}

/// Replaces each value by the one of equal rank in `sorted`.
fn rank_remap(s: &mut Array2<f64>, sorted: &[f64]) {
    let mut order: Vec<(f64, u32)> = s.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let out = s.as_slice_mut().expect("standard layout");
    for (&(_, i), &v) in order.iter().zip(sorted) {
        out[i as usize] = v;
    }
}

/// `count` surrogates, the `k`-th seeded from `(seed, k)`; built in parallel.
pub fn make_surrogates(
    field: &Array2<f64>,
    seed: u64,
    count: usize,
    opts: &SurrogateOptions,
) -> Result<Vec<Array2<f64>>> {
    (0..count)
        .into_par_iter()
        .map(|k| make_surrogate_with(field, derive_seed(seed, &[k as u64]), opts))
        .collect()
}

/// Full-field random permutation of cell values. Keeps the histogram and
/// discards all spatial structure.
pub fn shuffle_field(field: &Array2<f64>, seed: u64) -> Array2<f64> {
    let mut vals: Vec<f64> = field.iter().copied().collect();
    vals.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Array2::from_shape_vec(field.dim(), vals).expect("same length")
}
