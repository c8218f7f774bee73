use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SET1: &str = include_str!("../../data/fk_params_set1.toml");

/// Three-variable Fenton–Karma model constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkParams {
    #[serde(default)]
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub tau_v_plus: f64,
    /// v recovery time constant above `u_v`.
    pub tau_v1_minus: f64,
    /// v recovery time constant below `u_v`.
    pub tau_v2_minus: f64,
    pub tau_w_plus: f64,
    pub tau_w_minus: f64,
    pub tau_d: f64,
    pub tau_0: f64,
    pub tau_r: f64,
    pub tau_si: f64,
    pub k: f64,
    pub u_c_si: f64,
    pub u_c: f64,
    pub u_v: f64,
    pub v0_mv: f64,
    pub vfi_mv: f64,
    /// µF/cm²
    pub c_m: f64,
    /// Surface-to-volume ratio (1/cm). Only relevant when diffusivities are
    /// derived from conductivities; simulations take D directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for FkParams {
    fn default() -> Self {
        Self::from_toml(SET1).expect("bundled parameter set parses")
    }
}

impl FkParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: FkParams =
            toml::from_str(text).map_err(|e| Error::Config(format!("ionic parameters: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let taus = [
            ("tau_v_plus", self.tau_v_plus),
            ("tau_v1_minus", self.tau_v1_minus),
            ("tau_v2_minus", self.tau_v2_minus),
            ("tau_w_plus", self.tau_w_plus),
            ("tau_w_minus", self.tau_w_minus),
            ("tau_d", self.tau_d),
            ("tau_0", self.tau_0),
            ("tau_r", self.tau_r),
            ("tau_si", self.tau_si),
        ];
        for (name, v) in taus {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if !(self.u_c > 0.0 && self.u_c < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "u_c = {} outside (0, 1)",
                self.u_c
            )));
        }
        if !(self.c_m > 0.0) {
            return Err(Error::InvalidParameter("c_m must be positive".into()));
        }
        Ok(())
    }

    /// Smallest gate time constant; forward Euler keeps v, w in [0, 1] for
    /// `dt` up to this value.
    pub fn min_gate_tau(&self) -> f64 {
        [
            self.tau_v_plus,
            self.tau_v1_minus,
            self.tau_v2_minus,
            self.tau_w_plus,
            self.tau_w_minus,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// Dimensional membrane potential in mV.
    pub fn to_mv(&self, u: f64) -> f64 {
        u * (self.vfi_mv - self.v0_mv) + self.v0_mv
    }
}
