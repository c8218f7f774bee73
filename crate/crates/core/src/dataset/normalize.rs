use ndarray::{Array3, ArrayView3, ArrayViewMut3, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::io::derive_seed;

/// Noise level on normalized inputs.
pub const NOISE_SIGMA: f64 = 0.05;

/// Z-score of each electrode over the time axis (axis 0) of a
/// `(time, rows, cols)` block. Channels without variation become zero.
pub fn normalize(block: ArrayView3<f64>) -> Array3<f64> {
    let mut out = block.to_owned();
    normalize_in_place(out.view_mut());
    out
}

pub fn normalize_in_place(mut block: ArrayViewMut3<f64>) {
    let t = block.len_of(Axis(0));
    if t == 0 {
        return;
    }
    for mut lane in block.lanes_mut(Axis(0)) {
        let mean = lane.sum() / t as f64;
        let var = lane.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t as f64;
        let sd = var.sqrt();
        // rounding in the mean of a constant channel leaves ~1e-16 relative spread
        if !(sd > 1e-12 * mean.abs().max(f64::MIN_POSITIVE)) {
            lane.fill(0.0);
        } else {
            lane.mapv_inplace(|x| (x - mean) / sd);
        }
    }
}

/// Seed for the noise of one sample in one epoch.
pub fn noise_seed(base: u64, epoch: u64, sample: u64) -> u64 {
    derive_seed(base, &[0x6e6f697365, epoch, sample])
}

/// Adds i.i.d. `N(0, sigma²)` to every entry, deterministically per seed.
pub fn add_noise_f32(values: &mut [f32], sigma: f64, seed: u64) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for v in values.iter_mut() {
        *v = (*v as f64 + normal.sample(&mut rng)) as f32;
    }
}

/// f64 version of [`add_noise_f32`].
pub fn add_noise(block: &mut Array3<f64>, sigma: f64, seed: u64) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    Zip::from(block).for_each(|v| *v += normal.sample(&mut rng));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_channel_is_zero() {
        let b = Array3::from_elem((7, 2, 2), 0.1 + 0.2);
        assert!(normalize(b.view()).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn moments() {
        let b = Array3::from_shape_fn((20, 3, 3), |(t, i, j)| {
            ((t * 7 + i * 3 + j) % 13) as f64 * 1.7 - 4.0
        });
        let z = normalize(b.view());
        for lane in z.lanes(Axis(0)) {
            let m = lane.mean().unwrap();
            let sd = lane.std(0.0);
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_sigma_is_identity() {
        let mut v = vec![1.0f32, 2.0, 3.0];
        add_noise_f32(&mut v, 0.0, 5);
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
    }
}
