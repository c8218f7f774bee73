//! Pipeline configuration: a preset, optionally overlaid by a TOML or JSON
//! file that only needs to name the keys it changes.

use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use scarmap_core::dataset::{NoiseMode, SampleSpec, DEFAULT_TARGET_N, NOISE_SIGMA};
use scarmap_core::egm::{ElectrodeGrid, DEFAULT_SIGMA_E};
use scarmap_core::ep::{SimConfig, StimulusProtocol};
use scarmap_core::stats::{
    MaskChannel, SurrogateOptions, SurrogateSource, DEFAULT_JACCARD_THRESHOLD,
};
use scarmap_core::substrate::SubstrateConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 3 cm tissue, 200 ms, 15×15 electrodes.
    Desk,
    /// 12 cm tissue, 1 s, 29×29 electrodes.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_cm: f64,
    pub z_cm: f64,
    /// mS/cm
    pub sigma_e: f64,
    pub sample_interval_ms: f64,
    /// Integration cells per side are this many solver cells.
    pub coarsen: usize,
}

impl ElectrodeConfig {
    pub fn grid(&self, extent: (f64, f64)) -> Result<ElectrodeGrid> {
        Ok(ElectrodeGrid::centred(
            self.rows,
            self.cols,
            self.spacing_cm,
            self.z_cm,
            extent,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub spec: SampleSpec,
    pub noise: NoiseMode,
    pub noise_sigma: f64,
    pub folds: usize,
    pub target_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Scar threshold for the Jaccard index, cm²/ms.
    pub threshold: f64,
    pub channel: MaskChannel,
    /// Surrogates per simulation; 0 skips the surrogate test.
    pub surrogates: usize,
    pub source: SurrogateSource,
    pub surrogate: SurrogateOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub substrate: SubstrateConfig,
    pub sim: SimConfig,
    pub electrodes: ElectrodeConfig,
    pub dataset: DatasetConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn preset(p: Preset) -> Self {
        let eval = EvalConfig {
            threshold: DEFAULT_JACCARD_THRESHOLD,
            channel: MaskChannel::Dxx,
            surrogates: 100,
            source: SurrogateSource::Prediction,
            surrogate: SurrogateOptions::default(),
        };
        match p {
            Preset::Full => Self {
                substrate: SubstrateConfig {
                    n: 1200,
                    dx: 0.01,
                    ..SubstrateConfig::default()
                },
                sim: SimConfig {
                    dx: 0.01,
                    dt: 0.01,
                    duration_ms: 1000.0,
                    record_every_ms: 1.0,
                    // 10×10 mm pacing square, 150 ms period
                    stimulus: Some(StimulusProtocol::corner(1.0)),
                    ..SimConfig::default()
                },
                electrodes: ElectrodeConfig {
                    rows: 29,
                    cols: 29,
                    spacing_cm: 0.4,
                    z_cm: 0.1,
                    sigma_e: DEFAULT_SIGMA_E,
                    sample_interval_ms: 1.0,
                    coarsen: 4,
                },
                dataset: DatasetConfig {
                    spec: SampleSpec::new(10, 5, 25, 1000),
                    noise: NoiseMode::OnTheFly,
                    noise_sigma: NOISE_SIGMA,
                    folds: 10,
                    target_n: DEFAULT_TARGET_N,
                },
                eval,
            },
            // quarter-size tissue: the pacing square, electrode pitch and
            // record length shrink with it
            Preset::Desk => Self {
                substrate: SubstrateConfig {
                    n: 300,
                    dx: 0.01,
                    ..SubstrateConfig::default()
                },
                sim: SimConfig {
                    dx: 0.01,
                    dt: 0.01,
                    duration_ms: 200.0,
                    record_every_ms: 1.0,
                    stimulus: Some(StimulusProtocol::corner(0.25)),
                    ..SimConfig::default()
                },
                electrodes: ElectrodeConfig {
                    rows: 15,
                    cols: 15,
                    spacing_cm: 0.2,
                    z_cm: 0.1,
                    sigma_e: DEFAULT_SIGMA_E,
                    sample_interval_ms: 1.0,
                    coarsen: 1,
                },
                dataset: DatasetConfig {
                    spec: SampleSpec::new(10, 5, 25, 200),
                    noise: NoiseMode::OnTheFly,
                    noise_sigma: NOISE_SIGMA,
                    folds: 3,
                    target_n: DEFAULT_TARGET_N,
                },
                eval,
            },
        }
    }

    /// The preset with `path` (TOML, or JSON by extension) merged on top.
    pub fn load(preset: Preset, path: Option<&Path>) -> Result<Self> {
        let mut base = serde_json::to_value(Self::preset(preset))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let overlay: Value = if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text)
                    .map_err(|e| Invalid(format!("{}: {e}", path.display())))?
            } else {
                toml::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))?
            };
            merge(&mut base, overlay);
        }
        let cfg: Self =
            serde_json::from_value(base).map_err(|e| Invalid(format!("configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.substrate;
        if (s.dx - self.sim.dx).abs() > 1e-12 * s.dx {
            return Err(Invalid(format!(
                "substrate.dx = {} but sim.dx = {}; they must agree",
                s.dx, self.sim.dx
            ))
            .into());
        }
        let extent = (s.n as f64 * s.dx, s.n as f64 * s.dx);
        self.electrodes.grid(extent)?;
        if self.electrodes.coarsen == 0 || s.n % self.electrodes.coarsen != 0 {
            return Err(Invalid(format!(
                "electrodes.coarsen = {} must divide the {}-cell side",
                self.electrodes.coarsen, s.n
            ))
            .into());
        }
        self.dataset.spec.validate()?;
        if let Some(st) = &self.sim.stimulus {
            st.validate(extent)?;
        }
        Ok(())
    }
}

/// Objects merge key by key; anything else is replaced.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
