use std::time::Instant;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::diffusion::DiffusionOperator;
use super::params::FkParams;
use super::reaction::reaction_rates;
use super::sink::{FrameInfo, FrameSink};
use super::stimulus::StimulusProtocol;
use crate::error::{Error, Result};
use crate::substrate::DiffusionTensorField;

/// Soft bounds on u; leaving them is logged, not fatal.
pub const U_SOFT_MIN: f64 = -0.1;
pub const U_SOFT_MAX: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Grid spacing, cm.
    pub dx: f64,
    /// Time step, ms.
    pub dt: f64,
    pub duration_ms: f64,
    pub record_every_ms: f64,
    pub params: FkParams,
    /// No stimulus when absent.
    pub stimulus: Option<StimulusProtocol>,
    /// Disable to run pure diffusion.
    pub ionic: bool,
    pub parallel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dx: 0.01,
            dt: 0.01,
            duration_ms: 1000.0,
            record_every_ms: 1.0,
            params: FkParams::default(),
            stimulus: Some(StimulusProtocol::default()),
            ionic: true,
            parallel: true,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Largest stable explicit step for this tensor field.
    pub fn max_stable_dt(&self, tensor: &DiffusionTensorField) -> f64 {
        let lmax = tensor.max_eigenvalue();
        if lmax > 0.0 {
            self.dx * self.dx / (4.0 * lmax)
        } else {
            f64::INFINITY
        }
    }

    pub fn steps(&self) -> u64 {
        (self.duration_ms / self.dt).round() as u64
    }

    pub fn record_stride(&self) -> u64 {
        (self.record_every_ms / self.dt).round() as u64
    }

    pub fn frame_count(&self) -> usize {
        (self.steps() / self.record_stride()) as usize
    }

    pub fn validate(&self, tensor: &DiffusionTensorField) -> Result<()> {
        self.params.validate()?;
        if !(self.dx > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dx = {} and dt = {} must be positive",
                self.dx, self.dt
            )));
        }
        if (tensor.dx - self.dx).abs() > 1e-9 * self.dx {
            return Err(Error::InvalidParameter(format!(
                "tensor spacing {} cm differs from solver dx {} cm",
                tensor.dx, self.dx
            )));
        }
        let limit = self.max_stable_dt(tensor);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "dt = {} ms exceeds the explicit stability limit {:.6} ms",
                self.dt, limit
            )));
        }
        if self.ionic && self.dt > self.params.min_gate_tau() / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "dt = {} ms too large for gate time constant {} ms",
                self.dt,
                self.params.min_gate_tau()
            )));
        }
        if !(self.duration_ms >= 0.0 && self.duration_ms.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "duration {} ms",
                self.duration_ms
            )));
        }
        let steps = self.duration_ms / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "duration {} ms is not a whole number of {} ms steps",
                self.duration_ms, self.dt
            )));
        }
        let stride = self.record_every_ms / self.dt;
        if !(stride >= 1.0 - 1e-9) || (stride - stride.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "record_every {} ms must be a positive multiple of dt {} ms",
                self.record_every_ms, self.dt
            )));
        }
        if let Some(s) = &self.stimulus {
            s.validate(tensor.extent())?;
        }
        Ok(())
    }
}

/// Model state on the grid at time `t` (ms).
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub w: Array2<f64>,
    pub t: f64,
}

impl SimState {
    /// u = 0, v = w = 1.
    pub fn rest(rows: usize, cols: usize) -> Self {
        Self {
            u: Array2::zeros((rows, cols)),
            v: Array2::ones((rows, cols)),
            w: Array2::ones((rows, cols)),
            t: 0.0,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.u.dim()
    }
}

#[derive(Debug, Clone, Copy)]
struct RowStats {
    min: f64,
    max: f64,
    // 0 = all finite, 1 = u, 2 = v, 3 = w
    bad: u8,
}

impl RowStats {
    fn merge(a: Self, b: Self) -> Self {
        let bad = match (a.bad, b.bad) {
            (0, x) | (x, 0) => x,
            (x, y) => x.min(y),
        };
        Self {
            min: a.min.min(b.min),
            max: a.max.max(b.max),
            bad,
        }
    }
}

/// Owns the working state of one simulation.
pub struct Simulator {
    cfg: SimConfig,
    op: DiffusionOperator,
    stim_mask: Option<Array2<bool>>,
    state: SimState,
    scratch: Array2<f64>,
    steps: u64,
    activation: Array2<f64>,
    u_min: f64,
    u_max: f64,
    soft_steps: u64,
}

impl Simulator {
    pub fn new(cfg: &SimConfig, tensor: &DiffusionTensorField) -> Result<Self> {
        let (rows, cols) = tensor.dim();
        Self::with_state(cfg, tensor, SimState::rest(rows, cols))
    }

    pub fn with_state(
        cfg: &SimConfig,
        tensor: &DiffusionTensorField,
        state: SimState,
    ) -> Result<Self> {
        cfg.validate(tensor)?;
        let (rows, cols) = tensor.dim();
        if state.dim() != (rows, cols)
            || state.v.dim() != (rows, cols)
            || state.w.dim() != (rows, cols)
        {
            return Err(Error::ShapeMismatch(format!(
                "state {:?} vs tensor {:?}",
                state.dim(),
                (rows, cols)
            )));
        }
        let op = DiffusionOperator::new(tensor, cfg.dx)?;
        let stim_mask = match &cfg.stimulus {
            Some(s) => Some(s.mask(rows, cols, cfg.dx)?),
            None => None,
        };
        let steps = (state.t / cfg.dt).round() as u64;
        let u_min = state.u.iter().copied().fold(f64::INFINITY, f64::min);
        let u_max = state.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let uc = cfg.params.u_c;
        let activation = state
            .u
            .mapv(|x| if x >= uc { state.t } else { f64::INFINITY });
        Ok(Self {
            cfg: cfg.clone(),
            op,
            stim_mask,
            scratch: Array2::zeros((rows, cols)),
            state,
            steps,
            activation,
            u_min,
            u_max,
            soft_steps: 0,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }

    /// First time (ms) each cell reached u_c, linearly interpolated within
    /// the step; infinite where it never did.
    pub fn activation_times(&self) -> &Array2<f64> {
        &self.activation
    }

    pub fn vm(&self) -> Array2<f64> {
        let p = &self.cfg.params;
        self.state.u.mapv(|u| p.to_mv(u))
    }

    /// Advances one forward Euler step.
    pub fn step(&mut self) -> Result<()> {
        let cfg = &self.cfg;
        let p = &cfg.params;
        let dt = cfg.dt;
        let t0 = self.time();
        let stim_amp = match (&cfg.stimulus, &self.stim_mask) {
            (Some(s), Some(m)) if s.active(t0) => Some((s.amplitude / p.c_m, m)),
            _ => None,
        };
        let ionic = cfg.ionic;
        let uc = p.u_c;
        let op = &self.op;
        let u_old: ArrayView2<f64> = self.state.u.view();
        let cols = u_old.ncols();
        let flat = u_old.as_slice().expect("state is standard layout");

        let kernel =
            |i: usize, un: &mut [f64], v: &mut [f64], w: &mut [f64], act: &mut [f64]| -> RowStats {
                let mut lap = vec![0.0; cols];
                op.apply_row(i, flat, &mut lap);
                let uo = u_old.row(i);
                let mut st = RowStats {
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                    bad: 0,
                };
                for j in 0..cols {
                    let u = uo[j];
                    let mut du = lap[j];
                    if ionic {
                        let r = reaction_rates(u, v[j], w[j], p);
                        du += r.du;
                        v[j] += dt * r.dv;
                        w[j] += dt * r.dw;
                    }
                    if let Some((a, m)) = stim_amp {
                        if m[[i, j]] {
                            du += a;
                        }
                    }
                    let unew = u + dt * du;
                    un[j] = unew;
                    if unew >= uc && u < uc && act[j].is_infinite() {
                        act[j] = t0 + dt * (uc - u) / (unew - u);
                    }
                    if !unew.is_finite() {
                        st.bad = if st.bad == 0 { 1 } else { st.bad.min(1) };
                    } else if !v[j].is_finite() && st.bad != 1 {
                        st.bad = if st.bad == 0 { 2 } else { st.bad.min(2) };
                    } else if !w[j].is_finite() && st.bad == 0 {
                        st.bad = 3;
                    }
                    st.min = st.min.min(unew);
                    st.max = st.max.max(unew);
                }
                st
            };

        let zip = Zip::indexed(self.scratch.rows_mut())
            .and(self.state.v.rows_mut())
            .and(self.state.w.rows_mut())
            .and(self.activation.rows_mut());
        let run_row = |i: usize,
                       mut un: ndarray::ArrayViewMut1<f64>,
                       mut v: ndarray::ArrayViewMut1<f64>,
                       mut w: ndarray::ArrayViewMut1<f64>,
                       mut act: ndarray::ArrayViewMut1<f64>| {
            kernel(
                i,
                un.as_slice_mut().expect("contiguous row"),
                v.as_slice_mut().expect("contiguous row"),
                w.as_slice_mut().expect("contiguous row"),
                act.as_slice_mut().expect("contiguous row"),
            )
        };
        let per_row = if cfg.parallel && u_old.nrows() >= 32 {
            zip.par_map_collect(run_row)
        } else {
            zip.map_collect(run_row)
        };
        let stats = per_row.iter().copied().fold(
            RowStats {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
                bad: 0,
            },
            RowStats::merge,
        );

        std::mem::swap(&mut self.state.u, &mut self.scratch);
        self.steps += 1;
        self.state.t = self.time();

        if stats.bad != 0 {
            return Err(Error::Instability {
                step: self.steps,
                time_ms: self.state.t,
                field: ["u", "v", "w"][(stats.bad - 1) as usize],
            });
        }
        if stats.min < U_SOFT_MIN || stats.max > U_SOFT_MAX {
            if self.soft_steps == 0 {
                log::warn!(
                    "u left [{U_SOFT_MIN}, {U_SOFT_MAX}] at step {} (range {:.4}..{:.4}); the run may be marginally unstable",
                    self.steps,
                    stats.min,
                    stats.max
                );
            }
            self.soft_steps += 1;
        }
        self.u_min = self.u_min.min(stats.min);
        self.u_max = self.u_max.max(stats.max);
        Ok(())
    }

    fn summary(&self, frames: usize, wall: f64) -> RunSummary {
        let finite: Vec<f64> = self
            .activation
            .iter()
            .copied()
            .filter(|t| t.is_finite())
            .collect();
        RunSummary {
            steps: self.steps,
            frames,
            t_end_ms: self.time(),
            u_min: self.u_min,
            u_max: self.u_max,
            soft_bound_steps: self.soft_steps,
            activation_coverage: finite.len() as f64 / self.activation.len().max(1) as f64,
            last_activation_ms: finite
                .iter()
                .copied()
                .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t)))),
            wall_time_s: wall,
            activation_times: self.activation.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub frames: usize,
    pub t_end_ms: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Steps at which u left the soft bounds.
    pub soft_bound_steps: u64,
    /// Fraction of cells that reached u_c.
    pub activation_coverage: f64,
    pub last_activation_ms: Option<f64>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub activation_times: Array2<f64>,
}

/// One explicit step from `s`. Rebuilds the operator, so prefer
/// [`Simulator`] in loops.
pub fn step(s: &SimState, cfg: &SimConfig, tensor: &DiffusionTensorField) -> Result<SimState> {
    let mut sim = Simulator::with_state(cfg, tensor, s.clone())?;
    sim.step()?;
    Ok(sim.into_state())
}

/// Runs from rest for `cfg.duration_ms`, handing V_m frames to `sink` every
/// `cfg.record_every_ms`.
pub fn run<S: FrameSink>(
    cfg: &SimConfig,
    tensor: &DiffusionTensorField,
    mut sink: S,
) -> Result<RunSummary> {
    let started = Instant::now();
    let mut sim = Simulator::new(cfg, tensor)?;
    let (rows, cols) = tensor.dim();
    let steps = cfg.steps();
    let stride = cfg.record_stride();
    sink.begin(&FrameInfo {
        rows,
        cols,
        dx_cm: cfg.dx,
        dt_record_ms: stride as f64 * cfg.dt,
        frames: cfg.frame_count(),
        v0_mv: cfg.params.v0_mv,
        vfi_mv: cfg.params.vfi_mv,
    })?;
    let mut frames = 0;
    for s in 1..=steps {
        sim.step()?;
        if s % stride == 0 {
            sink.frame(frames, sim.time(), sim.vm().view())?;
            frames += 1;
        }
    }
    sink.finish()?;
    let summary = sim.summary(frames, started.elapsed().as_secs_f64());
    log::info!(
        "simulated {} steps, {} frames, coverage {:.3}, {:.1} s",
        summary.steps,
        summary.frames,
        summary.activation_coverage,
        summary.wall_time_s
    );
    Ok(summary)
}
