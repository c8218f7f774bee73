//! `∇·(D∇u)` for heterogeneous anisotropic `D` on a cell-centred grid.
//!
//! Fluxes live on cell faces. The normal part uses the face average of
//! `d_xx` (or `d_yy`) times the one-sided difference across the face; the
//! cross part uses the face average of `d_xy` times the tangential central
//! difference averaged over the two cells. For constant `D` this is the
//! standard five-point stencil plus the centred four-point cross stencil.
//! Boundary faces carry zero flux, and tangential differences next to the
//! boundary use mirrored ghost cells, so the operator sums to zero over the
//! grid.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::substrate::DiffusionTensorField;

#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    rows: usize,
    cols: usize,
    // x-faces, rows × (cols-1): d_xx/dx² and d_xy/(4dx²)
    ax: Array2<f64>,
    bx: Array2<f64>,
    // y-faces, (rows-1) × cols: d_yy/dx² and d_xy/(4dx²)
    ay: Array2<f64>,
    by: Array2<f64>,
}

impl DiffusionOperator {
    pub fn new(d: &DiffusionTensorField, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dx = {dx} must be positive"
            )));
        }
        let (rows, cols) = d.dim();
        let h2 = dx * dx;
        let xfaces = (rows, cols.saturating_sub(1));
        let yfaces = (rows.saturating_sub(1), cols);
        let ax = Array2::from_shape_fn(xfaces, |(i, j)| {
            0.5 * (d.d_xx[[i, j]] + d.d_xx[[i, j + 1]]) / h2
        });
        let bx = Array2::from_shape_fn(xfaces, |(i, j)| {
            0.5 * (d.d_xy[[i, j]] + d.d_xy[[i, j + 1]]) / (4.0 * h2)
        });
        let ay = Array2::from_shape_fn(yfaces, |(i, j)| {
            0.5 * (d.d_yy[[i, j]] + d.d_yy[[i + 1, j]]) / h2
        });
        let by = Array2::from_shape_fn(yfaces, |(i, j)| {
            0.5 * (d.d_xy[[i, j]] + d.d_xy[[i + 1, j]]) / (4.0 * h2)
        });
        Ok(Self {
            rows,
            cols,
            ax,
            bx,
            ay,
            by,
        })
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Writes the operator applied to `u` into `out`.
    pub fn apply(&self, u: ArrayView2<f64>, out: &mut Array2<f64>, parallel: bool) {
        assert_eq!(u.dim(), (self.rows, self.cols), "field shape");
        assert_eq!(out.dim(), (self.rows, self.cols), "output shape");
        let u = u.as_standard_layout();
        let flat = u.as_slice().expect("standard layout");
        if parallel && self.rows >= 32 {
            out.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(i, mut row)| self.apply_row(i, flat, row.as_slice_mut().unwrap()));
        } else {
            for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
                self.apply_row(i, flat, row.as_slice_mut().unwrap());
            }
        }
    }

    /// Row `i` of the operator applied to the row-major field `u`.
    pub(crate) fn apply_row(&self, i: usize, u: &[f64], out: &mut [f64]) {
        let (rows, n) = (self.rows, self.cols);
        let row = |k: usize| &u[k * n..(k + 1) * n];
        let cur = row(i);
        let up = row(i.saturating_sub(1));
        let dn = row(if i + 1 < rows { i + 1 } else { i });
        let (has_up, has_dn) = (i > 0, i + 1 < rows);
        // mirrored ghosts: the centred difference becomes one-sided at the ends
        let cx = |r: &[f64], j: usize| r[(j + 1).min(n - 1)] - r[j.saturating_sub(1)];
        let xf = if n > 1 { i * (n - 1) } else { 0 };
        let ax = &self.ax.as_slice().expect("standard layout")[xf..xf + n.saturating_sub(1)];
        let bx = &self.bx.as_slice().expect("standard layout")[xf..xf + n.saturating_sub(1)];
        let ay = self.ay.as_slice().expect("standard layout");
        let by = self.by.as_slice().expect("standard layout");
        let (ay_dn, by_dn) = if has_dn {
            (&ay[i * n..(i + 1) * n], &by[i * n..(i + 1) * n])
        } else {
            (&ay[..0], &by[..0])
        };
        let (ay_up, by_up) = if has_up {
            (&ay[(i - 1) * n..i * n], &by[(i - 1) * n..i * n])
        } else {
            (&ay[..0], &by[..0])
        };

        let mut flux_left = 0.0;
        for j in 0..n {
            let flux_right = if j + 1 < n {
                ax[j] * (cur[j + 1] - cur[j]) + bx[j] * ((dn[j] - up[j]) + (dn[j + 1] - up[j + 1]))
            } else {
                0.0
            };
            let flux_down = if has_dn {
                ay_dn[j] * (dn[j] - cur[j]) + by_dn[j] * (cx(cur, j) + cx(dn, j))
            } else {
                0.0
            };
            let flux_up = if has_up {
                ay_up[j] * (cur[j] - up[j]) + by_up[j] * (cx(up, j) + cx(cur, j))
            } else {
                0.0
            };
            out[j] = (flux_right - flux_left) + (flux_down - flux_up);
            flux_left = flux_right;
        }
    }
}

/// Convenience wrapper: builds the operator and applies it once.
pub fn diffusion_term(
    u: ArrayView2<f64>,
    d: &DiffusionTensorField,
    dx: f64,
) -> Result<Array2<f64>> {
    if u.dim() != d.dim() {
        return Err(Error::ShapeMismatch(format!(
            "field {:?} vs tensor {:?}",
            u.dim(),
            d.dim()
        )));
    }
    let op = DiffusionOperator::new(d, dx)?;
    let mut out = Array2::zeros(u.dim());
    op.apply(u, &mut out, false);
    Ok(out)
}

/// Sum of the field, used for conservation checks.
pub fn total(u: &Array2<f64>) -> f64 {
    Zip::from(u).fold(0.0, |acc, &x| acc + x)
}
