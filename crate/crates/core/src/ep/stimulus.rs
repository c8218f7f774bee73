use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in tissue coordinates (cm). `x` runs along
/// columns, `y` along rows, both from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x0 + self.width && y >= self.y0 && y <= self.y0 + self.height
    }
}

/// Periodic rectangular current injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusProtocol {
    pub region: Rect,
    pub period_ms: f64,
    pub pulse_width_ms: f64,
    /// Injected rate in 1/ms, divided by C_m before it enters du/dt.
    pub amplitude: f64,
    pub start_ms: f64,
}

impl Default for StimulusProtocol {
    fn default() -> Self {
        Self {
            region: Rect {
                x0: 0.0,
                y0: 0.0,
                width: 1.0,
                height: 1.0,
            },
            period_ms: 150.0,
            pulse_width_ms: 2.0,
            amplitude: 0.5,
            start_ms: 0.0,
        }
    }
}

impl StimulusProtocol {
    /// A square of side `side` cm at the top-left corner.
    pub fn corner(side: f64) -> Self {
        Self {
            region: Rect {
                x0: 0.0,
                y0: 0.0,
                width: side,
                height: side,
            },
            ..Self::default()
        }
    }

    /// `extent` is the domain `(width, height)` in cm.
    pub fn validate(&self, extent: (f64, f64)) -> Result<()> {
        let r = &self.region;
        if !(self.pulse_width_ms > 0.0 && self.period_ms > self.pulse_width_ms) {
            return Err(Error::InvalidParameter(format!(
                "stimulus needs period > pulse width > 0, got {} and {}",
                self.period_ms, self.pulse_width_ms
            )));
        }
        if !(self.amplitude.is_finite() && self.start_ms.is_finite() && self.start_ms >= 0.0) {
            return Err(Error::InvalidParameter(
                "stimulus amplitude/start must be finite".into(),
            ));
        }
        let tol = 1e-9;
        if !(r.width > 0.0 && r.height > 0.0)
            || r.x0 < -tol
            || r.y0 < -tol
            || r.x0 + r.width > extent.0 + tol
            || r.y0 + r.height > extent.1 + tol
        {
            return Err(Error::InvalidParameter(format!(
                "stimulus region {r:?} is not inside the {:.4}×{:.4} cm domain",
                extent.0, extent.1
            )));
        }
        Ok(())
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.start_ms && (t - self.start_ms).rem_euclid(self.period_ms) < self.pulse_width_ms
    }

    /// Cells whose centres fall inside the region.
    pub fn mask(&self, rows: usize, cols: usize, dx: f64) -> Result<Array2<bool>> {
        let m = Array2::from_shape_fn((rows, cols), |(i, j)| {
            self.region
                .contains((j as f64 + 0.5) * dx, (i as f64 + 0.5) * dx)
        });
        if !m.iter().any(|&b| b) {
            return Err(Error::InvalidParameter(format!(
                "stimulus region {:?} covers no cell centre at dx = {dx}",
                self.region
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_timing() {
        let s = StimulusProtocol::default();
        assert!(s.active(0.0));
        assert!(s.active(1.99));
        assert!(!s.active(2.0));
        assert!(!s.active(149.9));
        assert!(s.active(150.0));
        assert!(s.active(301.5));
    }

    #[test]
    fn mask_counts_cell_centres() {
        let s = StimulusProtocol::corner(0.1);
        let m = s.mask(50, 50, 0.01).unwrap();
        assert_eq!(m.iter().filter(|&&b| b).count(), 100);
        assert!(m[[0, 0]] && m[[9, 9]] && !m[[10, 0]]);
    }

    #[test]
    fn validation() {
        let mut s = StimulusProtocol::default();
        assert!(s.validate((0.5, 0.5)).is_err());
        assert!(s.validate((3.0, 3.0)).is_ok());
        s.pulse_width_ms = 200.0;
        assert!(s.validate((3.0, 3.0)).is_err());
        let tiny = StimulusProtocol::corner(0.001);
        assert!(tiny.mask(10, 10, 0.01).is_err());
    }
}
