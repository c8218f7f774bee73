//! Randomized conductivity substrates and their diffusion tensor fields.

mod fibre;
mod io;
mod scar;
mod spline;
mod tensor;

pub use fibre::{
    control_abscissae, fibre_field_from_points, gen_fibre_field, gen_fibre_field_with,
    FibreAngleField, FibreExtension, CONTROL_POINTS, OFFSET_VARIANCE,
};
pub use io::{load_mask, load_tensor_field, save_mask, save_tensor_field, TensorFieldManifest};
pub use scar::{gen_scar_map, ScarConfig, ScarMap, D_HEALTHY, D_SCAR};
pub use spline::NaturalCubicSpline;
pub use tensor::{
    resample_tensor_field, tensor_from, AnisotropyParams, DiffusionTensorField, COMPONENTS,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::derive_seed;

/// The three substrate families of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldKind {
    /// heterogeneous isotropic (scar only)
    HeI,
    /// homogeneous anisotropic (fibres only)
    HoA,
    /// heterogeneous anisotropic (scar and fibres)
    HeA,
}

impl FieldKind {
    pub const ALL: [FieldKind; 3] = [FieldKind::HeI, FieldKind::HoA, FieldKind::HeA];

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::HeI => "HeI",
            FieldKind::HoA => "HoA",
            FieldKind::HeA => "HeA",
        }
    }
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Simulation counts per kind in the reference dataset. They total 329; a
/// 330-simulation request gets the extra simulation by largest remainder.
pub const REFERENCE_MIX: [(FieldKind, usize); 3] = [
    (FieldKind::HeI, 107),
    (FieldKind::HoA, 186),
    (FieldKind::HeA, 36),
];

/// Splits `count` simulations across kinds in the reference proportions
/// (largest-remainder rounding), HeI first.
pub fn reference_mix(count: usize) -> Vec<(FieldKind, usize)> {
    let total: usize = REFERENCE_MIX.iter().map(|(_, c)| c).sum();
    let mut parts: Vec<(FieldKind, usize, f64)> = REFERENCE_MIX
        .iter()
        .map(|&(k, c)| {
            let exact = count as f64 * c as f64 / total as f64;
            (k, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = parts.iter().map(|p| p.1).sum();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| parts[b].2.partial_cmp(&parts[a].2).unwrap().then(a.cmp(&b)));
    for &idx in order.iter().take(count - assigned) {
        parts[idx].1 += 1;
    }
    parts.into_iter().map(|(k, c, _)| (k, c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubstrateConfig {
    /// Cells per side.
    pub n: usize,
    /// Cell size in cm.
    pub dx: f64,
    pub scar: ScarConfig,
    /// Anisotropy ratio used whenever fibres are present.
    pub lambda: f64,
    /// Longitudinal diffusivity of fibre-only fields, cm²/ms.
    pub d_l: f64,
    pub fibre_extension: FibreExtension,
}

impl Default for SubstrateConfig {
    fn default() -> Self {
        Self {
            n: 1200,
            dx: 0.01,
            scar: ScarConfig::default(),
            lambda: 4.0,
            d_l: D_HEALTHY,
            fibre_extension: FibreExtension::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Substrate {
    pub kind: FieldKind,
    pub seed: u64,
    pub scar: Option<ScarMap>,
    pub fibre: Option<FibreAngleField>,
    pub tensor: DiffusionTensorField,
}

/// Draws one substrate of the requested kind. Scar and fibre components use
/// independent sub-seeds of `seed`.
pub fn gen_substrate(kind: FieldKind, seed: u64, cfg: &SubstrateConfig) -> Result<Substrate> {
    let n = cfg.n;
    let scar_cfg = ScarConfig {
        n,
        ..cfg.scar.clone()
    };
    let scar = match kind {
        FieldKind::HeI | FieldKind::HeA => Some(gen_scar_map(derive_seed(seed, &[1]), &scar_cfg)?),
        FieldKind::HoA => None,
    };
    let fibre = match kind {
        FieldKind::HoA | FieldKind::HeA => Some(gen_fibre_field_with(
            derive_seed(seed, &[2]),
            n,
            cfg.fibre_extension,
        )?),
        FieldKind::HeI => None,
    };
    let lambda = if fibre.is_some() { cfg.lambda } else { 1.0 };
    let aniso = AnisotropyParams::homogeneous(n, cfg.d_l, lambda);
    let tensor = tensor_from(scar.as_ref(), fibre.as_ref(), &aniso, cfg.dx)?;
    Ok(Substrate {
        kind,
        seed,
        scar,
        fibre,
        tensor,
    })
}
