//! Minimal raster output: heatmaps and unlabelled line plots.

use clap::ValueEnum;
use image::{Rgb, RgbImage};
use ndarray::ArrayView2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Colormap {
    /// Dark for low values; thresholding the luminance recovers level sets.
    Gray,
    Viridis,
}

// sampled at eighths of the matplotlib map
const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

const INVALID: Rgb<u8> = Rgb([255, 0, 255]);

fn color(t: f64, cmap: Colormap) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    match cmap {
        Colormap::Gray => {
            let g = (t * 255.0).round() as u8;
            Rgb([g, g, g])
        }
        Colormap::Viridis => {
            let x = t * (VIRIDIS.len() - 1) as f64;
            let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
            let f = x - i as f64;
            let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
            Rgb(std::array::from_fn(|k| {
                (f64::from(a[k]) + f * (f64::from(b[k]) - f64::from(a[k]))).round() as u8
            }))
        }
    }
}

/// Finite min and max, or `None` if there are no finite values.
pub fn finite_range(v: ArrayView2<f64>) -> Option<(f64, f64)> {
    v.iter()
        .filter(|x| x.is_finite())
        .fold(None, |acc, &x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
        })
}

/// One `scale`×`scale` block per cell; row 0 at the top. Non-finite cells
/// are magenta; a flat range maps everything to the low colour.
pub fn heatmap(v: ArrayView2<f64>, range: (f64, f64), scale: u32, cmap: Colormap) -> RgbImage {
    let (rows, cols) = v.dim();
    let (lo, hi) = range;
    let span = hi - lo;
    let scale = scale.max(1);
    RgbImage::from_fn(cols as u32 * scale, rows as u32 * scale, |x, y| {
        let val = v[[(y / scale) as usize, (x / scale) as usize]];
        if !val.is_finite() {
            return INVALID;
        }
        let t = if span > 0.0 { (val - lo) / span } else { 0.0 };
        color(t, cmap)
    })
}

pub struct Series<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub color: [u8; 3],
}

/// Polylines over a shared data range inside a grey frame.
pub fn line_plot(series: &[Series<'_>], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let margin = 20i64;
    let (w, h) = (width as i64 - 2 * margin, height as i64 - 2 * margin);
    if w < 2 || h < 2 {
        return img;
    }
    let frame = Rgb([160, 160, 160]);
    for x in margin..=margin + w {
        put(&mut img, x, margin, frame);
        put(&mut img, x, margin + h, frame);
    }
    for y in margin..=margin + h {
        put(&mut img, margin, y, frame);
        put(&mut img, margin + w, y, frame);
    }
    let pts = series.iter().flat_map(|s| s.x.iter().zip(s.y.iter()));
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (&x, &y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        (x0, x1, y0, y1) = (x0.min(x), x1.max(x), y0.min(y), y1.max(y));
    }
    if !x0.is_finite() {
        return img;
    }
    let sx = if x1 > x0 { w as f64 / (x1 - x0) } else { 0.0 };
    let sy = if y1 > y0 { h as f64 / (y1 - y0) } else { 0.0 };
    let to_px = |x: f64, y: f64| {
        (
            margin + ((x - x0) * sx).round() as i64,
            margin + h - ((y - y0) * sy).round() as i64,
        )
    };
    for s in series {
        let c = Rgb(s.color);
        let mut prev: Option<(i64, i64)> = None;
        for (&x, &y) in s.x.iter().zip(s.y) {
            if !(x.is_finite() && y.is_finite()) {
                prev = None;
                continue;
            }
            let p = to_px(x, y);
            match prev {
                Some(q) => segment(&mut img, q, p, c),
                None => put(&mut img, p.0, p.1, c),
            }
            prev = Some(p);
        }
    }
    img
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Bresenham.
fn segment(img: &mut RgbImage, (mut x, mut y): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let (sx, sy) = (if x < x1 { 1 } else { -1 }, if y < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        put(img, x, y, c);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
