//! Two-dimensional dual-tree complex wavelet transform.
//!
//! Kingsbury's separable dual-tree: near-symmetric biorthogonal filters at
//! level 1 and quarter-shift filters above, with symmetric (half-sample)
//! extension at the borders. Follows the column-filtering formulation of
//! the reference `dtcwt` package, so coefficients agree with it to rounding.

use ndarray::{s, Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};

// Near-symmetric 13,19 tap biorthogonal pair ("near_sym_b").
const H0O: [f64; 13] = [
    -0.0017578125,
    0.0,
    0.022265625,
    -0.046875,
    -0.0482421875,
    0.296875,
    0.55546875,
    0.296875,
    -0.0482421875,
    -0.046875,
    0.022265625,
    0.0,
    -0.0017578125,
];
const G0O: [f64; 19] = [
    7.062639508928571e-05,
    0.0,
    -0.0013419015066964285,
    -0.0018833705357142855,
    0.007156808035714285,
    0.023856026785714284,
    -0.05564313616071428,
    -0.05168805803571428,
    0.29975760323660716,
    0.5594308035714286,
    0.29975760323660716,
    -0.05168805803571428,
    -0.05564313616071428,
    0.023856026785714284,
    0.007156808035714285,
    -0.0018833705357142855,
    -0.0013419015066964285,
    0.0,
    7.062639508928571e-05,
];
const H1O: [f64; 19] = [
    -7.062639508928571e-05,
    0.0,
    0.0013419015066964285,
    -0.0018833705357142855,
    -0.007156808035714285,
    0.023856026785714284,
    0.05564313616071428,
    -0.05168805803571428,
    -0.29975760323660716,
    0.5594308035714286,
    -0.29975760323660716,
    -0.05168805803571428,
    0.05564313616071428,
    0.023856026785714284,
    -0.007156808035714285,
    -0.0018833705357142855,
    0.0013419015066964285,
    0.0,
    -7.062639508928571e-05,
];
const G1O: [f64; 13] = [
    -0.0017578125,
    0.0,
    0.022265625,
    0.046875,
    -0.0482421875,
    -0.296875,
    0.55546875,
    -0.296875,
    -0.0482421875,
    0.046875,
    0.022265625,
    0.0,
    -0.0017578125,
];
// Quarter-shift 14-tap tree-a filters ("qshift_b"). Tree b uses the
// time reverses; synthesis filters are the analysis filters of the other
// tree.
const H0A: [f64; 14] = [
    0.003253142763653182,
    -0.00388321199915849,
    0.03466034684485349,
    -0.03887280126882779,
    -0.11720388769911527,
    0.27529538466888204,
    0.7561456438925225,
    0.5688104207121227,
    0.011866092033797,
    -0.1067118046866654,
    0.023825384794920298,
    0.01702522388155399,
    -0.005439475937274115,
    -0.004556895628475491,
];
const H1A: [f64; 14] = [
    -0.004556895628475491,
    0.005439475937274115,
    0.01702522388155399,
    -0.023825384794920298,
    -0.1067118046866654,
    -0.011866092033797,
    0.5688104207121227,
    -0.7561456438925225,
    0.27529538466888204,
    0.11720388769911527,
    -0.03887280126882779,
    -0.03466034684485349,
    -0.00388321199915849,
    -0.003253142763653182,
];

struct QShift {
    h0a: Vec<f64>,
    h0b: Vec<f64>,
    g0a: Vec<f64>,
    g0b: Vec<f64>,
    h1a: Vec<f64>,
    h1b: Vec<f64>,
    g1a: Vec<f64>,
    g1b: Vec<f64>,
}

fn qshift() -> QShift {
    let rev = |a: &[f64]| a.iter().rev().copied().collect::<Vec<_>>();
    QShift {
        h0a: H0A.to_vec(),
        h0b: rev(&H0A),
        g0a: rev(&H0A),
        g0b: H0A.to_vec(),
        h1a: H1A.to_vec(),
        h1b: rev(&H1A),
        g1a: rev(&H1A),
        g1b: H1A.to_vec(),
    }
}

/// Coefficients of a multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub lowpass: Array2<f64>,
    /// Finest level first; each `(h, w, 6)` holds the six oriented subbands.
    pub levels: Vec<Array3<Complex64>>,
    /// Shape of the transformed field, restored by the inverse.
    pub shape: (usize, usize),
}

impl WaveletPyramid {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }
}

/// Half-sample symmetric extension index on `0..n`.
fn reflect(k: isize, n: usize) -> usize {
    let p = 2 * n as isize;
    let m = k.rem_euclid(p);
    if m >= n as isize {
        (p - 1 - m) as usize
    } else {
        m as usize
    }
}

/// `out[i] = Σ_k h[k]·x[idx[i + len(h) − 1 − k]]`, column-wise ("valid" part).
fn conv_rows(x: &Array2<f64>, idx: &[usize], h: &[f64]) -> Array2<f64> {
    let hs = h.len();
    let rows = idx.len() + 1 - hs;
    let cols = x.ncols();
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        let mut orow = out.row_mut(i);
        for (k, &hk) in h.iter().enumerate() {
            let src = x.row(idx[i + hs - 1 - k]);
            orow.scaled_add(hk, &src);
        }
    }
    out
}

fn colfilter(x: &Array2<f64>, h: &[f64]) -> Array2<f64> {
    let r = x.nrows() as isize;
    let m2 = (h.len() / 2) as isize;
    let xe: Vec<usize> = (-m2..r + m2).map(|k| reflect(k, x.nrows())).collect();
    conv_rows(x, &xe, h)
}

fn evens(h: &[f64]) -> Vec<f64> {
    h.iter().step_by(2).copied().collect()
}

fn odds(h: &[f64]) -> Vec<f64> {
    h.iter().skip(1).step_by(2).copied().collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gather(xe: &[usize], t: &[isize], shift: isize) -> Vec<usize> {
    t.iter().map(|&k| xe[(k + shift) as usize]).collect()
}

/// Column filtering with decimation by two.
fn coldfilt(x: &Array2<f64>, ha: &[f64], hb: &[f64]) -> Array2<f64> {
    let r = x.nrows();
    debug_assert!(r % 4 == 0 && ha.len() == hb.len() && ha.len() % 2 == 0);
    let m = ha.len() as isize;
    let xe: Vec<usize> = (-m..r as isize + m).map(|k| reflect(k, r)).collect();
    let (hao, hae, hbo, hbe) = (evens(ha), odds(ha), evens(hb), odds(hb));
    let t: Vec<isize> = (5..r as isize + 2 * m - 2).step_by(4).collect();
    let ya = &conv_rows(x, &gather(&xe, &t, -1), &hao) + &conv_rows(x, &gather(&xe, &t, -3), &hae);
    let yb = &conv_rows(x, &gather(&xe, &t, 0), &hbo) + &conv_rows(x, &gather(&xe, &t, -2), &hbe);
    let mut y = Array2::zeros((r / 2, x.ncols()));
    let (s1, s2) = if dot(ha, hb) > 0.0 { (0, 1) } else { (1, 0) };
    y.slice_mut(s![s1..;2, ..]).assign(&ya);
    y.slice_mut(s![s2..;2, ..]).assign(&yb);
    y
}

/// Column filtering with interpolation by two.
fn colifilt(x: &Array2<f64>, ha: &[f64], hb: &[f64]) -> Array2<f64> {
    let r = x.nrows();
    debug_assert!(r % 2 == 0 && ha.len() == hb.len() && ha.len() % 2 == 0);
    let m = ha.len() as isize;
    let m2 = m / 2;
    let xe: Vec<usize> = (-m2..r as isize + m2).map(|k| reflect(k, r)).collect();
    let (hao, hae, hbo, hbe) = (evens(ha), odds(ha), evens(hb), odds(hb));
    let positive = dot(ha, hb) > 0.0;
    let mut y = Array2::zeros((2 * r, x.ncols()));
    let parts = if m2 % 2 == 0 {
        let t: Vec<isize> = (3..r as isize + m).step_by(2).collect();
        let (ta, tb) = if positive { (0, -1) } else { (-1, 0) };
        [
            conv_rows(x, &gather(&xe, &t, tb - 2), &hae),
            conv_rows(x, &gather(&xe, &t, ta - 2), &hbe),
            conv_rows(x, &gather(&xe, &t, tb), &hao),
            conv_rows(x, &gather(&xe, &t, ta), &hbo),
        ]
    } else {
        let t: Vec<isize> = (2..r as isize + m - 1).step_by(2).collect();
        let (ta, tb) = if positive { (0, -1) } else { (-1, 0) };
        [
            conv_rows(x, &gather(&xe, &t, tb), &hao),
            conv_rows(x, &gather(&xe, &t, ta), &hbo),
            conv_rows(x, &gather(&xe, &t, tb), &hae),
            conv_rows(x, &gather(&xe, &t, ta), &hbe),
        ]
    };
    for (k, p) in parts.iter().enumerate() {
        y.slice_mut(s![k..;4, ..]).assign(p);
    }
    y
}

fn tr(a: Array2<f64>) -> Array2<f64> {
    a.reversed_axes().as_standard_layout().into_owned()
}

/// Quads of real pixels to the two complex subbands `(p − q, p + q)`.
fn q2c(y: &Array2<f64>) -> (Array2<Complex64>, Array2<Complex64>) {
    let (h, w) = (y.nrows() / 2, y.ncols() / 2);
    let r = 0.5f64.sqrt();
    let mut lo = Array2::zeros((h, w));
    let mut hi = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let p = Complex64::new(y[[2 * i, 2 * j]] * r, y[[2 * i, 2 * j + 1]] * r);
            let q = Complex64::new(y[[2 * i + 1, 2 * j + 1]] * r, -y[[2 * i + 1, 2 * j]] * r);
            lo[[i, j]] = p - q;
            hi[[i, j]] = p + q;
        }
    }
    (lo, hi)
}

fn c2q(w0: ndarray::ArrayView2<Complex64>, w1: ndarray::ArrayView2<Complex64>) -> Array2<f64> {
    let (h, w) = w0.dim();
    let sc = 0.5f64.sqrt();
    let mut x = Array2::zeros((2 * h, 2 * w));
    for i in 0..h {
        for j in 0..w {
            let p = (w0[[i, j]] + w1[[i, j]]) * sc;
            let q = (w0[[i, j]] - w1[[i, j]]) * sc;
            x[[2 * i, 2 * j]] = p.re;
            x[[2 * i, 2 * j + 1]] = p.im;
            x[[2 * i + 1, 2 * j]] = q.im;
            x[[2 * i + 1, 2 * j + 1]] = -q.re;
        }
    }
    x
}

fn store(
    level: &mut Array3<Complex64>,
    a: usize,
    b: usize,
    pair: (Array2<Complex64>, Array2<Complex64>),
) {
    level.slice_mut(s![.., .., a]).assign(&pair.0);
    level.slice_mut(s![.., .., b]).assign(&pair.1);
}

fn pad_to_four(x: Array2<f64>) -> Array2<f64> {
    let mut x = x;
    if x.nrows() % 4 != 0 {
        let n = x.nrows();
        x = ndarray::concatenate![
            ndarray::Axis(0),
            x.slice(s![..1, ..]),
            x,
            x.slice(s![n - 1.., ..])
        ];
    }
    if x.ncols() % 4 != 0 {
        let n = x.ncols();
        x = ndarray::concatenate![
            ndarray::Axis(1),
            x.slice(s![.., ..1]),
            x,
            x.slice(s![.., n - 1..])
        ];
    }
    x
}

/// Decomposes `x` into `levels` scales.
pub fn dtcwt_forward(x: &Array2<f64>, levels: usize) -> Result<WaveletPyramid> {
    let shape = x.dim();
    let min_side = shape.0.min(shape.1);
    if levels == 0 || min_side < (1usize << levels) {
        return Err(Error::InvalidParameter(format!(
            "a {}×{} field cannot carry {levels} wavelet levels",
            shape.0, shape.1
        )));
    }
    let mut x = x.clone();
    if x.nrows() % 2 != 0 {
        let n = x.nrows();
        x = ndarray::concatenate![ndarray::Axis(0), x, x.slice(s![n - 1.., ..])];
    }
    if x.ncols() % 2 != 0 {
        let n = x.ncols();
        x = ndarray::concatenate![ndarray::Axis(1), x, x.slice(s![.., n - 1..])];
    }
    let q = qshift();
    let mut out = Vec::with_capacity(levels);

    let lo = tr(colfilter(&x, &H0O));
    let hi = tr(colfilter(&x, &H1O));
    let mut lolo = tr(colfilter(&lo, &H0O));
    let mut yh = Array3::zeros((lolo.nrows() / 2, lolo.ncols() / 2, 6));
    store(&mut yh, 0, 5, q2c(&tr(colfilter(&hi, &H0O))));
    store(&mut yh, 2, 3, q2c(&tr(colfilter(&lo, &H1O))));
    store(&mut yh, 1, 4, q2c(&tr(colfilter(&hi, &H1O))));
    out.push(yh);

    for _ in 1..levels {
        lolo = pad_to_four(lolo);
        let lo = tr(coldfilt(&lolo, &q.h0b, &q.h0a));
        let hi = tr(coldfilt(&lolo, &q.h1b, &q.h1a));
        lolo = tr(coldfilt(&lo, &q.h0b, &q.h0a));
        let mut yh = Array3::zeros((lolo.nrows() / 2, lolo.ncols() / 2, 6));
        store(&mut yh, 0, 5, q2c(&tr(coldfilt(&hi, &q.h0b, &q.h0a))));
        store(&mut yh, 2, 3, q2c(&tr(coldfilt(&lo, &q.h1b, &q.h1a))));
        store(&mut yh, 1, 4, q2c(&tr(coldfilt(&hi, &q.h1b, &q.h1a))));
        out.push(yh);
    }
    Ok(WaveletPyramid {
        lowpass: lolo,
        levels: out,
        shape,
    })
}

fn bands(level: &Array3<Complex64>, a: usize, b: usize) -> Array2<f64> {
    c2q(level.slice(s![.., .., a]), level.slice(s![.., .., b]))
}

/// Reconstructs the field from its pyramid.
pub fn dtcwt_inverse(p: &WaveletPyramid) -> Result<Array2<f64>> {
    let q = qshift();
    let n = p.levels.len();
    if n == 0 {
        return Err(Error::InvalidParameter("pyramid has no levels".into()));
    }
    let mut z = p.lowpass.clone();
    for level in (1..n).rev() {
        let yh = &p.levels[level];
        let lh = bands(yh, 0, 5);
        let hl = bands(yh, 2, 3);
        let hh = bands(yh, 1, 4);
        let y1 = &colifilt(&z, &q.g0b, &q.g0a) + &colifilt(&lh, &q.g1b, &q.g1a);
        let y2 = &colifilt(&hl, &q.g0b, &q.g0a) + &colifilt(&hh, &q.g1b, &q.g1a);
        z = tr(&colifilt(&tr(y1), &q.g0b, &q.g0a) + &colifilt(&tr(y2), &q.g1b, &q.g1a));
        let prev = p.levels[level - 1].dim();
        let want = (2 * prev.0, 2 * prev.1);
        if z.nrows() != want.0 {
            let r = z.nrows();
            z = z.slice(s![1..r - 1, ..]).to_owned();
        }
        if z.ncols() != want.1 {
            let c = z.ncols();
            z = z.slice(s![.., 1..c - 1]).to_owned();
        }
        if z.dim() != want {
            return Err(Error::ShapeMismatch(format!(
                "level {level} reconstructs to {:?}, expected {want:?}",
                z.dim()
            )));
        }
    }
    let yh = &p.levels[0];
    let lh = bands(yh, 0, 5);
    let hl = bands(yh, 2, 3);
    let hh = bands(yh, 1, 4);
    let y1 = &colfilter(&z, &G0O) + &colfilter(&lh, &G1O);
    let y2 = &colfilter(&hl, &G0O) + &colfilter(&hh, &G1O);
    let z = tr(&colfilter(&tr(y1), &G0O) + &colfilter(&tr(y2), &G1O));
    Ok(z.slice(s![..p.shape.0, ..p.shape.1]).to_owned())
}
