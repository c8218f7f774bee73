use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SIGMA_E: f64 = 20.0;

/// Regular array of point electrodes above the tissue plane.
///
/// Electrode `(r, c)` sits at `origin + (c, r)·spacing`, height `z`, with
/// `x` along tissue columns and `y` along tissue rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeGrid {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub z: f64,
    /// `(x, y)` of electrode (0, 0), cm.
    pub origin: (f64, f64),
}

impl ElectrodeGrid {
    /// Centres the array in a domain of the given `(width, height)`.
    pub fn centred(
        rows: usize,
        cols: usize,
        spacing: f64,
        z: f64,
        extent: (f64, f64),
    ) -> Result<Self> {
        let g = Self {
            rows,
            cols,
            spacing,
            z,
            origin: (
                (extent.0 - (cols.saturating_sub(1)) as f64 * spacing) / 2.0,
                (extent.1 - (rows.saturating_sub(1)) as f64 * spacing) / 2.0,
            ),
        };
        g.validate(extent)?;
        Ok(g)
    }

    /// 29×29 at 0.4 cm, 0.1 cm above the tissue.
    pub fn reference(extent: (f64, f64)) -> Result<Self> {
        Self::centred(29, 29, 0.4, 0.1, extent)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, r: usize, c: usize) -> [f64; 3] {
        [
            self.origin.0 + c as f64 * self.spacing,
            self.origin.1 + r as f64 * self.spacing,
            self.z,
        ]
    }

    /// Row-major electrode positions.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .map(|(r, c)| self.position(r, c))
            .collect()
    }

    /// Electrode coordinates scaled to [0, 1] across the array, as
    /// `(x, y)` planes of shape rows×cols.
    pub fn normalized_coords(&self) -> (Vec<f64>, Vec<f64>) {
        let norm = |k: usize, n: usize| {
            if n > 1 {
                k as f64 / (n - 1) as f64
            } else {
                0.5
            }
        };
        let mut xs = Vec::with_capacity(self.len());
        let mut ys = Vec::with_capacity(self.len());
        for r in 0..self.rows {
            for c in 0..self.cols {
                xs.push(norm(c, self.cols));
                ys.push(norm(r, self.rows));
            }
        }
        (xs, ys)
    }

    pub fn validate(&self, extent: (f64, f64)) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter(
                "electrode grid needs at least one electrode".into(),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "electrode spacing {}",
                self.spacing
            )));
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(Error::Singularity(self.z));
        }
        let tol = 1e-9;
        let x1 = self.origin.0 + (self.cols - 1) as f64 * self.spacing;
        let y1 = self.origin.1 + (self.rows - 1) as f64 * self.spacing;
        if self.origin.0 < -tol
            || self.origin.1 < -tol
            || x1 > extent.0 + tol
            || y1 > extent.1 + tol
        {
            return Err(Error::InvalidParameter(format!(
                "electrode footprint ({:.4}, {:.4})–({x1:.4}, {y1:.4}) cm does not fit the {:.4}×{:.4} cm domain",
                self.origin.0, self.origin.1, extent.0, extent.1
            )));
        }
        Ok(())
    }
}
