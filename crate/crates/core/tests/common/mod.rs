//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scarmap_core::ep::{NullSink, Rect, SimConfig, StimulusProtocol};
use scarmap_core::substrate::DiffusionTensorField;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-cell random SPD tensors with eigenvalues in [1e-4, 1e-3] and random
/// orientation.
pub fn random_spd_field(seed: u64, n: usize, dx: f64) -> DiffusionTensorField {
    let mut r = rng(seed);
    let mut xx = Array2::zeros((n, n));
    let mut yy = Array2::zeros((n, n));
    let mut xy = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let l1: f64 = r.random_range(1e-4..1e-3);
            let l2: f64 = r.random_range(1e-4..1e-3);
            let a: f64 = r.random_range(0.0..std::f64::consts::PI);
            let (s, c) = a.sin_cos();
            xx[[i, j]] = l1 * c * c + l2 * s * s;
            yy[[i, j]] = l1 * s * s + l2 * c * c;
            xy[[i, j]] = (l1 - l2) * s * c;
        }
    }
    DiffusionTensorField::new(xx, yy, xy, dx).unwrap()
}

/// Sum of a few random low-frequency modes.
pub fn smooth_random_field(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
    let mut r = rng(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                r.random_range(-1.0..1.0),
                r.random_range(0.5..4.0),
                r.random_range(0.5..4.0),
                r.random_range(0.0..6.3),
            )
        })
        .collect();
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let y = i as f64 / rows as f64;
        let x = j as f64 / cols as f64;
        modes
            .iter()
            .map(|&(a, kx, ky, ph)| a * (std::f64::consts::TAU * (kx * x + ky * y) + ph).sin())
            .sum()
    })
}

/// Dense matrix of the zero-flux face-flux discretization, assembled face by
/// face. Row-major cell index `i * cols + j`.
pub fn assemble_dense(d: &DiffusionTensorField) -> (usize, Vec<f64>) {
    let (rows, cols) = d.dim();
    let n = rows * cols;
    let h2 = d.dx * d.dx;
    let mut a = vec![0.0; n * n];
    let k = |i: usize, j: usize| i * cols + j;
    let clamp = |x: isize, hi: usize| x.clamp(0, hi as isize - 1) as usize;
    // a flux F = Σ c_m u_m adds +F to `plus` and -F to `minus`
    let mut add = |plus: usize, minus: usize, terms: &[(usize, f64)]| {
        for &(m, c) in terms {
            a[plus * n + m] += c;
            a[minus * n + m] -= c;
        }
    };
    for i in 0..rows {
        for j in 0..cols.saturating_sub(1) {
            let axx = (d.d_xx[[i, j]] + d.d_xx[[i, j + 1]]) / 2.0 / h2;
            let bxy = (d.d_xy[[i, j]] + d.d_xy[[i, j + 1]]) / 2.0 / (4.0 * h2);
            let up = clamp(i as isize - 1, rows);
            let dn = clamp(i as isize + 1, rows);
            add(
                k(i, j),
                k(i, j + 1),
                &[
                    (k(i, j + 1), axx),
                    (k(i, j), -axx),
                    (k(dn, j), bxy),
                    (k(up, j), -bxy),
                    (k(dn, j + 1), bxy),
                    (k(up, j + 1), -bxy),
                ],
            );
        }
    }
    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols {
            let ayy = (d.d_yy[[i, j]] + d.d_yy[[i + 1, j]]) / 2.0 / h2;
            let bxy = (d.d_xy[[i, j]] + d.d_xy[[i + 1, j]]) / 2.0 / (4.0 * h2);
            let l = clamp(j as isize - 1, cols);
            let r = clamp(j as isize + 1, cols);
            add(
                k(i, j),
                k(i + 1, j),
                &[
                    (k(i + 1, j), ayy),
                    (k(i, j), -ayy),
                    (k(i, r), bxy),
                    (k(i, l), -bxy),
                    (k(i + 1, r), bxy),
                    (k(i + 1, l), -bxy),
                ],
            );
        }
    }
    (n, a)
}

pub fn dense_apply(n: usize, a: &[f64], u: &Array2<f64>) -> Array2<f64> {
    let flat: Vec<f64> = u.iter().copied().collect();
    let out: Vec<f64> = (0..n)
        .map(|r| {
            a[r * n..(r + 1) * n]
                .iter()
                .zip(&flat)
                .map(|(x, y)| x * y)
                .sum()
        })
        .collect();
    Array2::from_shape_vec(u.dim(), out).unwrap()
}

/// Plane-wave conduction velocity (cm/ms) along x in a thin strip with
/// constant diffusivity `d_along`, measured between x = 0.5 and 1.5 cm.
pub fn planar_cv(dx: f64, dt: f64, d_along: f64) -> f64 {
    let cols = (2.0 / dx).round() as usize;
    let rows = 4;
    let t = DiffusionTensorField::uniform(rows, cols, d_along, d_along, 0.0, dx).unwrap();
    let cfg = SimConfig {
        dx,
        dt,
        duration_ms: 120.0,
        record_every_ms: 10.0,
        stimulus: Some(StimulusProtocol {
            region: Rect {
                x0: 0.0,
                y0: 0.0,
                width: 0.05,
                height: rows as f64 * dx,
            },
            ..Default::default()
        }),
        ..Default::default()
    };
    let s = scarmap_core::ep::run(&cfg, &t, NullSink).unwrap();
    let a = &s.activation_times;
    let t1 = a[[1, (0.5 / dx).round() as usize]];
    let t2 = a[[1, (1.5 / dx).round() as usize]];
    assert!(
        t1.is_finite() && t2.is_finite(),
        "wave did not cross the strip"
    );
    1.0 / (t2 - t1)
}

/// Gradient and double-loop rectangle rule written out longhand.
pub fn naive_phi(v: &Array2<f64>, dx: f64, p: [f64; 3], sigma: f64) -> f64 {
    let (rows, cols) = v.dim();
    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let gx = if j == 0 {
                (-3.0 * v[[i, 0]] + 4.0 * v[[i, 1]] - v[[i, 2]]) / (2.0 * dx)
            } else if j == cols - 1 {
                (3.0 * v[[i, j]] - 4.0 * v[[i, j - 1]] + v[[i, j - 2]]) / (2.0 * dx)
            } else {
                (v[[i, j + 1]] - v[[i, j - 1]]) / (2.0 * dx)
            };
            let gy = if i == 0 {
                (-3.0 * v[[0, j]] + 4.0 * v[[1, j]] - v[[2, j]]) / (2.0 * dx)
            } else if i == rows - 1 {
                (3.0 * v[[i, j]] - 4.0 * v[[i - 1, j]] + v[[i - 2, j]]) / (2.0 * dx)
            } else {
                (v[[i + 1, j]] - v[[i - 1, j]]) / (2.0 * dx)
            };
            let x = (j as f64 + 0.5) * dx;
            let y = (i as f64 + 0.5) * dx;
            let d = [p[0] - x, p[1] - y, p[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            total += (gx * d[0] + gy * d[1]) / (4.0 * std::f64::consts::PI * sigma * r.powi(3))
                * dx
                * dx;
        }
    }
    total
}

/// Number of start offsets m whose frames m·N_τ + n·N_t, n = 1..N, all lie
/// in 1..=L, found by trying every m.
pub fn enumerate_samples(n: usize, n_t: usize, n_tau: usize, l: usize) -> usize {
    (0..=l)
        .filter(|m| {
            (1..=n).all(|k| {
                let idx = m * n_tau + k * n_t;
                (1..=l).contains(&idx)
            })
        })
        .count()
}

/// Same for the 0-based reading: frames m·N_τ + n·N_t, n = 0..N-1, in 0..L.
pub fn enumerate_samples_zero(n: usize, n_t: usize, n_tau: usize, l: usize) -> usize {
    (0..=l)
        .filter(|m| (0..n).all(|k| m * n_tau + k * n_t < l))
        .count()
}

/// A 96×96 block-averaged `d_xx` map of a random 384×384 scar layout.
pub fn smooth_scar_field(seed: u64) -> Array2<f64> {
    use scarmap_core::substrate::{gen_scar_map, resample_tensor_field, ScarConfig};
    let map = gen_scar_map(seed, &ScarConfig::default().with_n(384)).unwrap();
    let t = DiffusionTensorField::isotropic(map.diffusivity(), 0.01).unwrap();
    resample_tensor_field(&t, 96).unwrap().d_xx
}

/// Radially averaged autocorrelation by explicit pair enumeration.
pub fn naive_radial_autocorrelation(x: &Array2<f64>, max_lag: usize) -> Vec<f64> {
    let (rows, cols) = x.dim();
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut out = Vec::new();
    for lag in 1..=max_lag {
        let mut ring = Vec::new();
        let l = max_lag as i64;
        for dy in -l..=l {
            for dx in -l..=l {
                let r = ((dy * dy + dx * dx) as f64).sqrt().round() as usize;
                if r != lag {
                    continue;
                }
                let (mut s, mut c) = (0.0, 0usize);
                for i in 0..rows as i64 {
                    for j in 0..cols as i64 {
                        let (k, m) = (i + dy, j + dx);
                        if k < 0 || m < 0 || k >= rows as i64 || m >= cols as i64 {
                            continue;
                        }
                        s += (x[[i as usize, j as usize]] - mean)
                            * (x[[k as usize, m as usize]] - mean);
                        c += 1;
                    }
                }
                ring.push(s / c as f64 / var);
            }
        }
        out.push(ring.iter().sum::<f64>() / ring.len() as f64);
    }
    out
}
