use ndarray::{Array2, Zip};

use super::fibre::FibreAngleField;
use super::scar::ScarMap;
use crate::error::{Error, Result};

/// Symmetric 2×2 diffusivity tensor per cell, in cm²/ms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTensorField {
    pub d_xx: Array2<f64>,
    pub d_yy: Array2<f64>,
    pub d_xy: Array2<f64>,
    /// Cell size in cm.
    pub dx: f64,
}

pub const COMPONENTS: [&str; 3] = ["d_xx", "d_yy", "d_xy"];

impl DiffusionTensorField {
    pub fn new(d_xx: Array2<f64>, d_yy: Array2<f64>, d_xy: Array2<f64>, dx: f64) -> Result<Self> {
        if d_xx.dim() != d_yy.dim() || d_xx.dim() != d_xy.dim() {
            return Err(Error::ShapeMismatch(format!(
                "tensor components {:?}, {:?}, {:?}",
                d_xx.dim(),
                d_yy.dim(),
                d_xy.dim()
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cell size {dx} must be positive"
            )));
        }
        Ok(Self {
            d_xx,
            d_yy,
            d_xy,
            dx,
        })
    }

    pub fn isotropic(d: Array2<f64>, dx: f64) -> Result<Self> {
        let zeros = Array2::zeros(d.dim());
        Self::new(d.clone(), d, zeros, dx)
    }

    pub fn uniform(
        rows: usize,
        cols: usize,
        d_xx: f64,
        d_yy: f64,
        d_xy: f64,
        dx: f64,
    ) -> Result<Self> {
        Self::new(
            Array2::from_elem((rows, cols), d_xx),
            Array2::from_elem((rows, cols), d_yy),
            Array2::from_elem((rows, cols), d_xy),
            dx,
        )
    }

    pub fn dim(&self) -> (usize, usize) {
        self.d_xx.dim()
    }

    /// Physical extent `(width, height)` in cm.
    pub fn extent(&self) -> (f64, f64) {
        let (r, c) = self.dim();
        (c as f64 * self.dx, r as f64 * self.dx)
    }

    pub fn component(&self, name: &str) -> Option<&Array2<f64>> {
        match name {
            "d_xx" | "dxx" => Some(&self.d_xx),
            "d_yy" | "dyy" => Some(&self.d_yy),
            "d_xy" | "dxy" => Some(&self.d_xy),
            _ => None,
        }
    }

    /// Eigenvalues `(smaller, larger)` of the tensor at a cell.
    pub fn eigenvalues(&self, i: usize, j: usize) -> (f64, f64) {
        sym_eigenvalues(self.d_xx[[i, j]], self.d_yy[[i, j]], self.d_xy[[i, j]])
    }

    pub fn max_eigenvalue(&self) -> f64 {
        Zip::from(&self.d_xx)
            .and(&self.d_yy)
            .and(&self.d_xy)
            .fold(0.0f64, |m, &a, &b, &c| m.max(sym_eigenvalues(a, b, c).1))
    }

    /// True when every cell is symmetric positive definite.
    pub fn is_spd(&self) -> bool {
        Zip::from(&self.d_xx)
            .and(&self.d_yy)
            .and(&self.d_xy)
            .fold(true, |ok, &a, &b, &c| {
                ok && a > 0.0 && b > 0.0 && a * b - c * c > 0.0
            })
    }
}

pub(crate) fn sym_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + b);
    let r = (0.25 * (a - b) * (a - b) + c * c).sqrt();
    (mean - r, mean + r)
}

/// Longitudinal diffusivity and anisotropy ratio fields.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyParams {
    /// cm²/ms
    pub d_l: Array2<f64>,
    /// `d_l / d_t`, at least 1
    pub lambda: Array2<f64>,
}

impl AnisotropyParams {
    pub fn homogeneous(n: usize, d_l: f64, lambda: f64) -> Self {
        Self {
            d_l: Array2::from_elem((n, n), d_l),
            lambda: Array2::from_elem((n, n), lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_l.dim() != self.lambda.dim() {
            return Err(Error::ShapeMismatch(format!(
                "d_l {:?} vs lambda {:?}",
                self.d_l.dim(),
                self.lambda.dim()
            )));
        }
        if let Some(l) = self.lambda.iter().find(|&&l| !(l >= 1.0)) {
            return Err(Error::InvalidParameter(format!("anisotropy ratio {l} < 1")));
        }
        Ok(())
    }
}

/// Assembles `D = R(α) diag(d_l, d_l/λ) R(α)ᵀ` per cell.
///
/// Without a fibre field the tissue is isotropic (α = 0, λ = 1). With a scar
/// map, `d_l` is `d_scar` inside the mask and `d_healthy` outside; otherwise
/// it is taken from `aniso`.
pub fn tensor_from(
    scar: Option<&ScarMap>,
    fibre: Option<&FibreAngleField>,
    aniso: &AnisotropyParams,
    dx: f64,
) -> Result<DiffusionTensorField> {
    if scar.is_none() && fibre.is_none() {
        return Err(Error::InvalidParameter(
            "tensor_from needs a scar map, a fibre field, or both".into(),
        ));
    }
    aniso.validate()?;
    let dim = aniso.d_l.dim();
    if let Some(s) = scar {
        if s.mask.dim() != dim {
            return Err(Error::ShapeMismatch(format!(
                "scar map {:?} vs anisotropy {:?}",
                s.mask.dim(),
                dim
            )));
        }
    }
    if let Some(f) = fibre {
        if f.alpha.dim() != dim {
            return Err(Error::ShapeMismatch(format!(
                "fibre field {:?} vs anisotropy {:?}",
                f.alpha.dim(),
                dim
            )));
        }
    }
    let d_l = match scar {
        Some(s) => s.diffusivity(),
        None => aniso.d_l.clone(),
    };
    if let Some(d) = d_l.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "longitudinal diffusivity {d} must be positive"
        )));
    }
    let mut d_xx = Array2::zeros(dim);
    let mut d_yy = Array2::zeros(dim);
    let mut d_xy = Array2::zeros(dim);
    match fibre {
        None => {
            d_xx.assign(&d_l);
            d_yy.assign(&d_l);
        }
        Some(f) => {
            Zip::from(&mut d_xx)
                .and(&mut d_yy)
                .and(&mut d_xy)
                .and(&d_l)
                .and(&aniso.lambda)
                .and(&f.alpha)
                .for_each(|xx, yy, xy, &dl, &lam, &alpha| {
                    let dt = dl / lam;
                    let (s, c) = alpha.to_radians().sin_cos();
                    *xx = dl * c * c + dt * s * s;
                    *yy = dl * s * s + dt * c * c;
                    *xy = (dl - dt) * s * c;
                });
        }
    }
    DiffusionTensorField::new(d_xx, d_yy, d_xy, dx)
}

/// Area-weighted block average onto an `m×m` grid covering the same extent.
pub fn resample_tensor_field(f: &DiffusionTensorField, m: usize) -> Result<DiffusionTensorField> {
    let (rows, cols) = f.dim();
    if rows != cols {
        return Err(Error::ShapeMismatch(format!(
            "resampling expects a square field, got {rows}×{cols}"
        )));
    }
    if m == 0 || m > rows {
        return Err(Error::InvalidParameter(format!(
            "target size {m} must be in 1..={rows}"
        )));
    }
    let w = overlap_weights(rows, m);
    Ok(DiffusionTensorField {
        d_xx: block_average(&f.d_xx, &w),
        d_yy: block_average(&f.d_yy, &w),
        d_xy: block_average(&f.d_xy, &w),
        dx: f.dx * rows as f64 / m as f64,
    })
}

/// For each output cell, the `(input index, weight)` pairs; weights sum to 1.
fn overlap_weights(n: usize, m: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = n as f64 / m as f64;
    (0..m)
        .map(|k| {
            let lo = k as f64 * ratio;
            let hi = (k + 1) as f64 * ratio;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n);
            (first..last)
                .filter_map(|j| {
                    let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                    (overlap > 1e-12).then_some((j, overlap / ratio))
                })
                .collect()
        })
        .collect()
}

fn block_average(a: &Array2<f64>, w: &[Vec<(usize, f64)>]) -> Array2<f64> {
    let m = w.len();
    let rows = a.nrows();
    let mut tmp = Array2::zeros((rows, m));
    for i in 0..rows {
        for (k, ws) in w.iter().enumerate() {
            tmp[[i, k]] = ws.iter().map(|&(j, wt)| wt * a[[i, j]]).sum();
        }
    }
    let mut out = Array2::zeros((m, m));
    for (k, ws) in w.iter().enumerate() {
        for &(i, wt) in ws {
            let mut row = out.row_mut(k);
            row.scaled_add(wt, &tmp.row(i));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::fibre::{fibre_field_from_points, gen_fibre_field, FibreExtension};
    use crate::substrate::scar::{gen_scar_map, ScarConfig};
    use approx::assert_relative_eq;

    fn uniform_angle(n: usize, deg: f64) -> FibreAngleField {
        let mut f = fibre_field_from_points(
            [(0.0, 0.0), (0.25, 0.0), (0.5, 0.0), (0.75, 0.0), (1.0, 0.0)],
            n.max(16),
            FibreExtension::ChordNormal,
        )
        .unwrap();
        f.alpha = Array2::from_elem((n, n), deg);
        f
    }

    #[test]
    fn axis_aligned_fibres() {
        let f = uniform_angle(16, 0.0);
        let t = tensor_from(
            None,
            Some(&f),
            &AnisotropyParams::homogeneous(16, 1e-3, 4.0),
            0.01,
        )
        .unwrap();
        assert_relative_eq!(t.d_xx[[3, 3]], 1e-3, max_relative = 1e-14);
        assert_relative_eq!(t.d_yy[[3, 3]], 2.5e-4, max_relative = 1e-14);
        assert_eq!(t.d_xy[[3, 3]], 0.0);
    }

    #[test]
    fn diagonal_fibres() {
        let f = uniform_angle(16, 45.0);
        let t = tensor_from(
            None,
            Some(&f),
            &AnisotropyParams::homogeneous(16, 1e-3, 4.0),
            0.01,
        )
        .unwrap();
        assert_relative_eq!(t.d_xx[[0, 0]], 6.25e-4, max_relative = 1e-12);
        assert_relative_eq!(t.d_yy[[0, 0]], 6.25e-4, max_relative = 1e-12);
        assert_relative_eq!(t.d_xy[[0, 0]], 3.75e-4, max_relative = 1e-12);
    }

    #[test]
    fn eigenvalues_are_longitudinal_and_transverse() {
        let fibre = gen_fibre_field(21, 48).unwrap();
        let scar = gen_scar_map(21, &ScarConfig::default().with_n(48)).unwrap();
        let lam = 4.0;
        let t = tensor_from(
            Some(&scar),
            Some(&fibre),
            &AnisotropyParams::homogeneous(48, 1e-3, lam),
            0.01,
        )
        .unwrap();
        for i in 0..48 {
            for j in 0..48 {
                // Oracle: characteristic polynomial roots of the 2x2 block.
                let (a, b, c) = (t.d_xx[[i, j]], t.d_yy[[i, j]], t.d_xy[[i, j]]);
                let tr = a + b;
                let det = a * b - c * c;
                let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
                let dl = if scar.mask[[i, j]] == 1 { 1e-4 } else { 1e-3 };
                assert!((tr / 2.0 + disc - dl).abs() < 1e-12);
                assert!((tr / 2.0 - disc - dl / lam).abs() < 1e-12);
            }
        }
        assert!(t.is_spd());
    }

    #[test]
    fn isotropic_scar_path_has_no_cross_terms() {
        let scar = gen_scar_map(2, &ScarConfig::default().with_n(32)).unwrap();
        let t = tensor_from(
            Some(&scar),
            None,
            &AnisotropyParams::homogeneous(32, 1e-3, 1.0),
            0.1,
        )
        .unwrap();
        assert!(t.d_xy.iter().all(|&v| v == 0.0));
        assert_eq!(t.d_xx, t.d_yy);
    }

    #[test]
    fn superposition_matches_components() {
        let n = 40;
        let scar = gen_scar_map(8, &ScarConfig::default().with_n(n)).unwrap();
        let fibre = gen_fibre_field(8, n).unwrap();
        let combined = tensor_from(
            Some(&scar),
            Some(&fibre),
            &AnisotropyParams::homogeneous(n, 1e-3, 4.0),
            0.01,
        )
        .unwrap();
        // Same tensor when the scar is pre-baked into d_l.
        let aniso = AnisotropyParams {
            d_l: scar.diffusivity(),
            lambda: Array2::from_elem((n, n), 4.0),
        };
        let split = tensor_from(None, Some(&fibre), &aniso, 0.01).unwrap();
        assert_eq!(combined, split);
    }

    #[test]
    fn errors() {
        let aniso = AnisotropyParams::homogeneous(16, 1e-3, 4.0);
        assert!(tensor_from(None, None, &aniso, 0.01).is_err());
        let f = uniform_angle(20, 0.0);
        assert!(matches!(
            tensor_from(None, Some(&f), &aniso, 0.01),
            Err(Error::ShapeMismatch(_))
        ));
        let bad = AnisotropyParams::homogeneous(16, 0.0, 4.0);
        let f16 = uniform_angle(16, 0.0);
        assert!(matches!(
            tensor_from(None, Some(&f16), &bad, 0.01),
            Err(Error::InvalidParameter(_))
        ));
        let low = AnisotropyParams::homogeneous(16, 1e-3, 0.5);
        assert!(tensor_from(None, Some(&f16), &low, 0.01).is_err());
    }

    #[test]
    fn resample_constant_field() {
        let f = DiffusionTensorField::uniform(30, 30, 1e-3, 5e-4, 1e-4, 0.01).unwrap();
        for m in [1, 7, 15, 30] {
            let r = resample_tensor_field(&f, m).unwrap();
            assert_eq!(r.dim(), (m, m));
            assert!(r.d_xx.iter().all(|v| (v - 1e-3).abs() < 1e-15));
            assert!(r.d_xy.iter().all(|v| (v - 1e-4).abs() < 1e-15));
            assert_relative_eq!(r.extent().0, 0.3, max_relative = 1e-12);
        }
    }

    #[test]
    fn resample_checkerboard_halves() {
        let n = 24;
        let d = Array2::from_shape_fn((n, n), |(i, j)| if (i + j) % 2 == 0 { 1e-3 } else { 1e-4 });
        let f = DiffusionTensorField::isotropic(d, 0.01).unwrap();
        let r = resample_tensor_field(&f, n / 2).unwrap();
        assert!(r.d_xx.iter().all(|v| (v - 5.5e-4).abs() < 1e-15));
    }

    #[test]
    fn resample_reference_geometry() {
        let f = DiffusionTensorField::uniform(1200, 1200, 1e-3, 1e-3, 0.0, 0.01).unwrap();
        let r = resample_tensor_field(&f, 96).unwrap();
        assert_eq!(r.dim(), (96, 96));
        assert_relative_eq!(r.dx, 0.125, max_relative = 1e-12);
        assert_relative_eq!(r.extent().0, 12.0, max_relative = 1e-12);
    }

    #[test]
    fn resample_non_divisible_preserves_mean() {
        let n = 50;
        let d = Array2::from_shape_fn((n, n), |(i, j)| 1e-4 + 1e-5 * ((i * 7 + j * 3) % 11) as f64);
        let f = DiffusionTensorField::isotropic(d.clone(), 0.01).unwrap();
        let r = resample_tensor_field(&f, 24).unwrap();
        let mean_in = d.mean().unwrap();
        let mean_out = r.d_xx.mean().unwrap();
        assert_relative_eq!(mean_in, mean_out, max_relative = 1e-12);
        assert!(r.is_spd());
        assert!(resample_tensor_field(&f, 51).is_err());
    }
}
