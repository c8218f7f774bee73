//! Rule-based fibre orientation fields.
//!
//! A random path crosses the field from the left border to the right border
//! through five equidistant control points whose vertical offsets are normal
//! with variance 0.09 (normalized field units, path centred at mid-height).
//! The fibre angle of every cell is the tangent angle of the interpolating
//! natural cubic spline, carried off the path either along the normal of the
//! chord joining the end points or to the nearest point on the path.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spline::NaturalCubicSpline;
use crate::error::{Error, Result};

pub const CONTROL_POINTS: usize = 5;
pub const OFFSET_VARIANCE: f64 = 0.09;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FibreExtension {
    /// Each cell takes the angle of the path point hit by the line through
    /// the cell perpendicular to the end-point chord.
    #[default]
    ChordNormal,
    /// Each cell takes the angle at its nearest point on the path.
    NearestPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FibreAngleField {
    /// Degrees, measured from the +x (column) axis towards +y (row).
    pub alpha: Array2<f64>,
    /// `(x_i, y_i)` in normalized units; the path runs at height `0.5 + y_i`.
    pub control_points: [(f64, f64); CONTROL_POINTS],
}

impl FibreAngleField {
    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn spline(&self) -> NaturalCubicSpline {
        path_spline(&self.control_points)
    }
}

fn path_spline(points: &[(f64, f64); CONTROL_POINTS]) -> NaturalCubicSpline {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| 0.5 + p.1).collect();
    NaturalCubicSpline::new(&xs, &ys).expect("equidistant knots are strictly increasing")
}

/// Equidistant abscissae from the left border (0) to the right border (1).
pub fn control_abscissae() -> [f64; CONTROL_POINTS] {
    let mut xs = [0.0; CONTROL_POINTS];
    for (i, x) in xs.iter_mut().enumerate() {
        *x = i as f64 / (CONTROL_POINTS - 1) as f64;
    }
    xs
}

pub fn gen_fibre_field(seed: u64, n: usize) -> Result<FibreAngleField> {
    gen_fibre_field_with(seed, n, FibreExtension::default())
}

pub fn gen_fibre_field_with(
    seed: u64,
    n: usize,
    extension: FibreExtension,
) -> Result<FibreAngleField> {
    validate_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, OFFSET_VARIANCE.sqrt()).expect("positive std");
    let xs = control_abscissae();
    let mut points = [(0.0, 0.0); CONTROL_POINTS];
    for (p, &x) in points.iter_mut().zip(xs.iter()) {
        *p = (x, normal.sample(&mut rng));
    }
    fibre_field_from_points(points, n, extension)
}

fn validate_n(n: usize) -> Result<()> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!(
            "fibre field size must be at least 16 (got {n})"
        )));
    }
    Ok(())
}

pub fn fibre_field_from_points(
    control_points: [(f64, f64); CONTROL_POINTS],
    n: usize,
    extension: FibreExtension,
) -> Result<FibreAngleField> {
    validate_n(n)?;
    let xs = control_abscissae();
    for (p, x) in control_points.iter().zip(xs.iter()) {
        if (p.0 - x).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "control points must sit at equidistant abscissae 0, 0.25, ..., 1".into(),
            ));
        }
        if !p.1.is_finite() {
            return Err(Error::InvalidParameter("non-finite control point".into()));
        }
    }
    let spline = path_spline(&control_points);
    let inv = 1.0 / n as f64;
    let mut alpha = Array2::zeros((n, n));
    match extension {
        FibreExtension::ChordNormal => {
            let col_angle: Vec<f64> = (0..n)
                .map(|j| tangent_degrees(&spline, (j as f64 + 0.5) * inv))
                .collect();
            for mut row in alpha.rows_mut() {
                row.iter_mut().zip(&col_angle).for_each(|(a, &c)| *a = c);
            }
        }
        FibreExtension::NearestPoint => {
            let samples = 8 * n + 1;
            let path: Vec<(f64, f64)> = (0..samples)
                .map(|k| {
                    let t = k as f64 / (samples - 1) as f64;
                    (t, spline.eval(t))
                })
                .collect();
            alpha
                .axis_iter_mut(ndarray::Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(i, mut row)| {
                    let y = (i as f64 + 0.5) * inv;
                    for (j, a) in row.iter_mut().enumerate() {
                        let x = (j as f64 + 0.5) * inv;
                        let t = nearest_parameter(&spline, &path, x, y);
                        *a = tangent_degrees(&spline, t);
                    }
                });
        }
    }
    Ok(FibreAngleField {
        alpha,
        control_points,
    })
}

fn tangent_degrees(spline: &NaturalCubicSpline, t: f64) -> f64 {
    spline.deriv(t).atan().to_degrees()
}

fn nearest_parameter(spline: &NaturalCubicSpline, path: &[(f64, f64)], x: f64, y: f64) -> f64 {
    // The vertical foot bounds the nearest distance, hence the search window.
    let bound = (y - spline.eval(x)).abs();
    let last = path.len() - 1;
    let lo = (((x - bound).max(0.0)) * last as f64).floor() as usize;
    let hi = ((((x + bound).min(1.0)) * last as f64).ceil() as usize).min(last);
    let mut best = (f64::INFINITY, x);
    for &(t, s) in &path[lo..=hi] {
        let d = (t - x) * (t - x) + (s - y) * (s - y);
        if d < best.0 {
            best = (d, t);
        }
    }
    // Newton polish of d/dt |p(t) - (x, y)|^2 = 0.
    let (mut dist, mut t) = best;
    for _ in 0..4 {
        let s = spline.eval(t);
        let ds = spline.deriv(t);
        let g = (t - x) + (s - y) * ds;
        let h = 1.0 + ds * ds + (s - y) * spline.second_deriv(t);
        if h <= 0.0 {
            break;
        }
        let cand = (t - g / h).clamp(0.0, 1.0);
        let sc = spline.eval(cand);
        let dc = (cand - x) * (cand - x) + (sc - y) * (sc - y);
        if dc >= dist {
            break;
        }
        dist = dc;
        t = cand;
    }
    t
}
