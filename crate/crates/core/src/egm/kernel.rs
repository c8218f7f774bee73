//! Rectangle-rule evaluation of the extracellular potential
//! `φ(p) = ∫ ∇V·(p − x′) / (4πσ‖p − x′‖³) dΩ`.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::grid::ElectrodeGrid;
use crate::error::{Error, Result};

/// Second-order gradient `(∂x, ∂y)`: central differences inside, one-sided
/// three-point differences on the border.
pub fn gradient(v: ArrayView2<f64>, dx: f64) -> (Array2<f64>, Array2<f64>) {
    let (rows, cols) = v.dim();
    let d1 = |f: &dyn Fn(usize) -> f64, k: usize, n: usize| -> f64 {
        match n {
            0 | 1 => 0.0,
            2 => (f(1) - f(0)) / dx,
            _ if k == 0 => (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * dx),
            _ if k == n - 1 => (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * dx),
            _ => (f(k + 1) - f(k - 1)) / (2.0 * dx),
        }
    };
    let gx = Array2::from_shape_fn((rows, cols), |(i, j)| d1(&|c| v[[i, c]], j, cols));
    let gy = Array2::from_shape_fn((rows, cols), |(i, j)| d1(&|r| v[[r, j]], i, rows));
    (gx, gy)
}

fn block_mean(a: &Array2<f64>, c: usize) -> Array2<f64> {
    if c == 1 {
        return a.clone();
    }
    let (rows, cols) = (a.nrows() / c, a.ncols() / c);
    let w = 1.0 / (c * c) as f64;
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let mut s = 0.0;
        for di in 0..c {
            for dj in 0..c {
                s += a[[i * c + di, j * c + dj]];
            }
        }
        s * w
    })
}

/// Potential at one probe, summing over every cell directly.
pub fn phi_e_at(vm: ArrayView2<f64>, dx: f64, probe: [f64; 3], sigma_e: f64) -> Result<f64> {
    if !(probe[2] > 0.0) {
        return Err(Error::Singularity(probe[2]));
    }
    if !(sigma_e > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_e = {sigma_e} must be positive"
        )));
    }
    let (gx, gy) = gradient(vm, dx);
    let scale = dx * dx / (4.0 * PI * sigma_e);
    let mut acc = 0.0;
    for ((i, j), &ax) in gx.indexed_iter() {
        let rx = probe[0] - (j as f64 + 0.5) * dx;
        let ry = probe[1] - (i as f64 + 0.5) * dx;
        let r2 = rx * rx + ry * ry + probe[2] * probe[2];
        acc += (ax * rx + gy[[i, j]] * ry) / (r2 * r2.sqrt());
    }
    Ok(acc * scale)
}

struct Table {
    kx: Array2<f64>,
    ky: Array2<f64>,
}

/// Precomputed integration weights for a fixed electrode grid.
///
/// Electrodes sharing the same sub-cell offset share one table indexed by
/// the integer cell displacement, so memory is about `4·rows·cols` weights
/// per distinct offset instead of per electrode.
pub struct EgmKernel {
    rows: usize,
    cols: usize,
    dx: f64,
    coarsen: usize,
    tables: Vec<Table>,
    // (table, base row, base col) per electrode, row-major
    electrodes: Vec<(usize, isize, isize)>,
    grid: ElectrodeGrid,
    sigma_e: f64,
}

impl EgmKernel {
    /// `rows×cols` frames of spacing `dx`; the integral is taken on cells
    /// `coarsen` times larger, with the gradient block-averaged onto them.
    pub fn new(
        rows: usize,
        cols: usize,
        dx: f64,
        grid: &ElectrodeGrid,
        sigma_e: f64,
        coarsen: usize,
    ) -> Result<Self> {
        if coarsen == 0 || rows % coarsen != 0 || cols % coarsen != 0 {
            return Err(Error::InvalidParameter(format!(
                "coarsening factor {coarsen} must divide the {rows}×{cols} grid"
            )));
        }
        if !(sigma_e > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_e = {sigma_e} must be positive"
            )));
        }
        grid.validate((cols as f64 * dx, rows as f64 * dx))?;
        let h = dx * coarsen as f64;
        let (rc, cc) = (rows / coarsen, cols / coarsen);
        let scale = h * h / (4.0 * PI * sigma_e);
        let z2 = grid.z * grid.z;

        let mut groups: HashMap<(i64, i64), usize> = HashMap::new();
        let mut offsets: Vec<(f64, f64)> = Vec::new();
        let mut electrodes = Vec::with_capacity(grid.len());
        for p in grid.positions() {
            // position in cell-centre index units
            let ax = p[0] / h - 0.5;
            let ay = p[1] / h - 0.5;
            let (bx, by) = (ax.floor(), ay.floor());
            let (fx, fy) = (ax - bx, ay - by);
            let key = ((fx * 1e9).round() as i64, (fy * 1e9).round() as i64);
            let t = *groups.entry(key).or_insert_with(|| {
                offsets.push((fx, fy));
                offsets.len() - 1
            });
            electrodes.push((t, by as isize, bx as isize));
        }
        // displacement (cell − base) spans [−n, n]
        let (tr, tc) = (2 * rc + 1, 2 * cc + 1);
        let tables = offsets
            .par_iter()
            .map(|&(fx, fy)| {
                let mut kx = Array2::zeros((tr, tc));
                let mut ky = Array2::zeros((tr, tc));
                for a in 0..tr {
                    let ry = (fy - (a as f64 - rc as f64)) * h;
                    for b in 0..tc {
                        let rx = (fx - (b as f64 - cc as f64)) * h;
                        let r2 = rx * rx + ry * ry + z2;
                        let w = scale / (r2 * r2.sqrt());
                        kx[[a, b]] = rx * w;
                        ky[[a, b]] = ry * w;
                    }
                }
                Table { kx, ky }
            })
            .collect();
        Ok(Self {
            rows,
            cols,
            dx,
            coarsen,
            tables,
            electrodes,
            grid: *grid,
            sigma_e,
        })
    }

    pub fn grid(&self) -> &ElectrodeGrid {
        &self.grid
    }

    pub fn sigma_e(&self) -> f64 {
        self.sigma_e
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    /// Potentials for all electrodes, row-major.
    pub fn apply(&self, vm: ArrayView2<f64>) -> Result<Vec<f64>> {
        if vm.dim() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch(format!(
                "frame {:?} vs kernel {:?}",
                vm.dim(),
                (self.rows, self.cols)
            )));
        }
        let (gx, gy) = gradient(vm, self.dx);
        let (gx, gy) = (block_mean(&gx, self.coarsen), block_mean(&gy, self.coarsen));
        let (rc, cc) = gx.dim();
        let out = self
            .electrodes
            .par_iter()
            .map(|&(t, bi, bj)| {
                let tab = &self.tables[t];
                let mut acc = 0.0;
                for i in 0..rc {
                    let a = (i as isize - bi + rc as isize) as usize;
                    let b0 = (cc as isize - bj) as usize;
                    let kx = &tab.kx.row(a).to_slice().expect("contiguous")[b0..b0 + cc];
                    let ky = &tab.ky.row(a).to_slice().expect("contiguous")[b0..b0 + cc];
                    let gxr = gx.row(i);
                    let gyr = gy.row(i);
                    let gxr = gxr.as_slice().expect("contiguous");
                    let gyr = gyr.as_slice().expect("contiguous");
                    for j in 0..cc {
                        acc += gxr[j] * kx[j] + gyr[j] * ky[j];
                    }
                }
                acc
            })
            .collect();
        Ok(out)
    }
}
