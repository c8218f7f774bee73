//! Python bindings: substrates, simulation, electrograms, dataset access and
//! the evaluation statistics. Arrays cross the boundary as numpy arrays.

use std::path::PathBuf;

use ndarray::{Array2, Array3};
use numpy::{
    IntoPyArray, PyArray2, PyArray3, PyArray4, PyReadonlyArray1, PyReadonlyArray2, PyReadonlyArray3,
};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scarmap_core::dataset::{self as ds, SampleSpec};
use scarmap_core::egm::{record_grid, EgmRecorder, ElectrodeGrid, DEFAULT_SIGMA_E};
use scarmap_core::ep::{self, MemorySink, NullSink, SimConfig, StimulusProtocol, Tee};
use scarmap_core::stats::{
    self, MaskChannel, SurrogateMethod, SurrogateOptions, SurrogateSource, SurrogateTestOptions,
    DEFAULT_JACCARD_THRESHOLD,
};
use scarmap_core::substrate::{self as sub, DiffusionTensorField, FieldKind};
use scarmap_core::Error;

pyo3::create_exception!(scarmap, InstabilityError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Instability { .. } => InstabilityError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for scarmap_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn parse_kind(s: &str) -> PyResult<FieldKind> {
    FieldKind::ALL
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| {
            PyValueError::new_err(format!(
                "unknown field kind `{s}` (expected HeI, HoA or HeA)"
            ))
        })
}

/// A 2-D diffusion tensor field (cm²/ms) on a square grid of spacing `dx` cm.
#[pyclass(name = "TensorField", module = "scarmap", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyTensorField {
    inner: DiffusionTensorField,
}

#[pymethods]
impl PyTensorField {
    #[new]
    fn new(
        d_xx: PyReadonlyArray2<f64>,
        d_yy: PyReadonlyArray2<f64>,
        d_xy: PyReadonlyArray2<f64>,
        dx: f64,
    ) -> PyResult<Self> {
        let inner = DiffusionTensorField::new(
            d_xx.as_array().to_owned(),
            d_yy.as_array().to_owned(),
            d_xy.as_array().to_owned(),
            dx,
        )
        .py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn isotropic(d: PyReadonlyArray2<f64>, dx: f64) -> PyResult<Self> {
        Ok(Self {
            inner: DiffusionTensorField::isotropic(d.as_array().to_owned(), dx).py()?,
        })
    }

    /// Reads a field manifest written by `save` or the command-line tool.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = sub::load_tensor_field(&path).py()?;
        Ok(Self { inner })
    }

    /// Writes `<stem>.json` and its data file; returns the manifest path.
    #[pyo3(signature = (stem, seed=None))]
    fn save(&self, stem: PathBuf, seed: Option<u64>) -> PyResult<String> {
        let p = sub::save_tensor_field(
            &stem,
            &self.inner,
            seed,
            serde_json::json!({ "source": "python" }),
            None,
        )
        .py()?;
        Ok(p.display().to_string())
    }

    #[getter]
    fn d_xx<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.d_xx.clone().into_pyarray(py)
    }

    #[getter]
    fn d_yy<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.d_yy.clone().into_pyarray(py)
    }

    #[getter]
    fn d_xy<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.d_xy.clone().into_pyarray(py)
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.dim()
    }

    fn is_spd(&self) -> bool {
        self.inner.is_spd()
    }

    fn max_eigenvalue(&self) -> f64 {
        self.inner.max_eigenvalue()
    }

    /// Bilinear resample onto an `m`×`m` grid covering the same tissue.
    fn resample(&self, m: usize) -> PyResult<Self> {
        Ok(Self {
            inner: sub::resample_tensor_field(&self.inner, m).py()?,
        })
    }

    fn __repr__(&self) -> String {
        let (r, c) = self.inner.dim();
        format!("TensorField({r}x{c}, dx={} cm)", self.inner.dx)
    }
}

/// Draws one substrate. Returns `(field, mask)`; `mask` is a uint8 array
/// (1 = scar) or None for fibre-only kinds.
#[pyfunction]
#[pyo3(signature = (kind, seed, n=300, dx=0.01))]
fn gen_substrate<'py>(
    py: Python<'py>,
    kind: &str,
    seed: u64,
    n: usize,
    dx: f64,
) -> PyResult<(PyTensorField, Option<Bound<'py, PyArray2<u8>>>)> {
    let kind = parse_kind(kind)?;
    let cfg = sub::SubstrateConfig {
        n,
        dx,
        ..sub::SubstrateConfig::default()
    };
    let s = py.detach(|| sub::gen_substrate(kind, seed, &cfg)).py()?;
    let mask = s.scar.map(|m| m.mask.into_pyarray(py));
    Ok((PyTensorField { inner: s.tensor }, mask))
}

/// Per-kind counts for a mixed dataset of `count` simulations.
#[pyfunction]
fn reference_mix(count: usize) -> Vec<(String, usize)> {
    sub::reference_mix(count)
        .into_iter()
        .map(|(k, c)| (k.name().to_string(), c))
        .collect()
}

/// Runs the monodomain model from rest.
///
/// Returns a dict with `vm` (frames × rows × cols, mV) when `keep_vm`,
/// `egm` (samples × rows × cols, mV) when `electrodes = (rows, cols,
/// spacing_cm, z_cm)` is given, plus `activation_times` and a run summary.
#[pyfunction]
#[pyo3(signature = (
    field, duration_ms=200.0, dt=0.01, record_every_ms=1.0, stimulus_side_cm=Some(0.25),
    electrodes=None, sigma_e=DEFAULT_SIGMA_E, coarsen=1, keep_vm=true
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    field: &PyTensorField,
    duration_ms: f64,
    dt: f64,
    record_every_ms: f64,
    stimulus_side_cm: Option<f64>,
    electrodes: Option<(usize, usize, f64, f64)>,
    sigma_e: f64,
    coarsen: usize,
    keep_vm: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let tensor = &field.inner;
    let cfg = SimConfig {
        dx: tensor.dx,
        dt,
        duration_ms,
        record_every_ms,
        stimulus: stimulus_side_cm.map(StimulusProtocol::corner),
        ..SimConfig::default()
    };
    cfg.validate(tensor).py()?;
    let mut rec = match electrodes {
        Some((r, c, spacing, z)) => Some(EgmRecorder::new(
            ElectrodeGrid::centred(r, c, spacing, z, tensor.extent()).py()?,
            sigma_e,
            record_every_ms,
            coarsen,
        )),
        None => None,
    };
    let mut mem = keep_vm.then(MemorySink::default);
    let summary = py
        .detach(|| match (mem.as_mut(), rec.as_mut()) {
            (Some(a), Some(b)) => ep::run(&cfg, tensor, Tee(a, b)),
            (Some(a), None) => ep::run(&cfg, tensor, a),
            (None, Some(b)) => ep::run(&cfg, tensor, b),
            (None, None) => ep::run(&cfg, tensor, NullSink),
        })
        .py()?;

    let out = PyDict::new(py);
    if let Some(m) = mem {
        let (r, c) = tensor.dim();
        let mut stack = Array3::zeros((m.frames.len(), r, c));
        for (k, f) in m.frames.iter().enumerate() {
            stack.index_axis_mut(ndarray::Axis(0), k).assign(f);
        }
        out.set_item("vm", stack.into_pyarray(py))?;
        out.set_item("times_ms", m.times)?;
    }
    if let Some(rec) = rec {
        out.set_item("egm", rec.into_array().data.into_pyarray(py))?;
    }
    out.set_item("steps", summary.steps)?;
    out.set_item("frames", summary.frames)?;
    out.set_item("u_min", summary.u_min)?;
    out.set_item("u_max", summary.u_max)?;
    out.set_item("activation_coverage", summary.activation_coverage)?;
    out.set_item("last_activation_ms", summary.last_activation_ms)?;
    out.set_item("wall_time_s", summary.wall_time_s)?;
    out.set_item(
        "activation_times",
        summary.activation_times.into_pyarray(py),
    )?;
    Ok(out)
}

/// Electrograms of a recorded V_m stack (frames × rows × cols, mV).
#[pyfunction]
#[pyo3(signature = (
    frames, dx, frame_interval_ms, rows, cols, spacing_cm, z_cm=0.1,
    sigma_e=DEFAULT_SIGMA_E, sample_interval_ms=1.0
))]
#[allow(clippy::too_many_arguments)]
fn electrograms<'py>(
    py: Python<'py>,
    frames: PyReadonlyArray3<f64>,
    dx: f64,
    frame_interval_ms: f64,
    rows: usize,
    cols: usize,
    spacing_cm: f64,
    z_cm: f64,
    sigma_e: f64,
    sample_interval_ms: f64,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let f = frames.as_array();
    let (_, r, c) = f.dim();
    let grid = ElectrodeGrid::centred(rows, cols, spacing_cm, z_cm, (c as f64 * dx, r as f64 * dx))
        .py()?;
    let egm = record_grid(f, dx, frame_interval_ms, &grid, sigma_e, sample_interval_ms).py()?;
    Ok(egm.data.into_pyarray(py))
}

fn spec(n: usize, n_t: usize, n_tau: usize, l: usize, zero_based: bool) -> SampleSpec {
    let s = SampleSpec::new(n, n_t, n_tau, l);
    if zero_based {
        s.zero_based()
    } else {
        s
    }
}

#[pyfunction]
#[pyo3(signature = (n, n_t, n_tau, l, zero_based=false))]
fn count_samples(n: usize, n_t: usize, n_tau: usize, l: usize, zero_based: bool) -> usize {
    ds::count_samples(&spec(n, n_t, n_tau, l, zero_based))
}

/// Cuts an `(L, rows, cols)` recording into `(count, N, rows, cols)` windows.
#[pyfunction]
#[pyo3(signature = (egm, n, n_t, n_tau, zero_based=false))]
fn extract_samples<'py>(
    py: Python<'py>,
    egm: PyReadonlyArray3<f64>,
    n: usize,
    n_t: usize,
    n_tau: usize,
    zero_based: bool,
) -> PyResult<Bound<'py, PyArray4<f64>>> {
    let a = egm.as_array();
    let (l, r, c) = a.dim();
    let blocks = ds::extract_samples(a, &spec(n, n_t, n_tau, l, zero_based)).py()?;
    let mut out = ndarray::Array4::zeros((blocks.len(), n, r, c));
    for (k, b) in blocks.iter().enumerate() {
        out.index_axis_mut(ndarray::Axis(0), k).assign(b);
    }
    Ok(out.into_pyarray(py))
}

/// Per-electrode zero-mean, unit-variance scaling of an `(N, rows, cols)` block.
#[pyfunction]
fn normalize<'py>(py: Python<'py>, block: PyReadonlyArray3<f64>) -> Bound<'py, PyArray3<f64>> {
    ds::normalize(block.as_array()).into_pyarray(py)
}

/// Read access to a dataset directory.
#[pyclass(name = "Dataset", module = "scarmap", frozen)]
pub struct PyDataset {
    inner: ds::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn open(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ds::Dataset::open(path).py()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Sample `idx` as a dict of `egm`, `coords`, `target`, `sim_id`, `m`.
    /// With `epoch` set on an on-the-fly dataset, noise is added.
    #[pyo3(signature = (idx, epoch=None))]
    fn sample<'py>(
        &self,
        py: Python<'py>,
        idx: usize,
        epoch: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.sample(idx, epoch).py()?;
        let out = PyDict::new(py);
        out.set_item("egm", s.egm.into_pyarray(py))?;
        out.set_item("coords", s.coords.into_pyarray(py))?;
        out.set_item("target", s.target.into_pyarray(py))?;
        out.set_item("sim_id", s.sim_id)?;
        out.set_item("m", s.m)?;
        Ok(out)
    }

    /// `(3, m, m)` target tensor of one simulation.
    fn target<'py>(&self, py: Python<'py>, sim_id: u32) -> PyResult<Bound<'py, PyArray3<f32>>> {
        Ok(self.inner.target(sim_id).py()?.into_pyarray(py))
    }

    fn sim_ids(&self) -> Vec<u32> {
        self.inner.manifest.sims.iter().map(|s| s.sim_id).collect()
    }
}

#[pyfunction]
fn rmse(a: PyReadonlyArray2<f64>, b: PyReadonlyArray2<f64>) -> PyResult<f64> {
    stats::rmse(a.as_array(), b.as_array()).py()
}

fn channel(name: &str) -> PyResult<MaskChannel> {
    match name.to_ascii_lowercase().as_str() {
        "d_xx" | "dxx" => Ok(MaskChannel::Dxx),
        "max_eigen" | "max_eigenvalue" => Ok(MaskChannel::MaxEigen),
        _ => Err(PyValueError::new_err(format!(
            "unknown mask channel `{name}`"
        ))),
    }
}

/// Jaccard index of the thresholded scar masks.
#[pyfunction]
#[pyo3(signature = (truth, pred, threshold=DEFAULT_JACCARD_THRESHOLD, channel="d_xx"))]
fn jaccard(
    truth: &PyTensorField,
    pred: &PyTensorField,
    threshold: f64,
    channel: &str,
) -> PyResult<f64> {
    stats::jaccard_by(
        &truth.inner,
        &pred.inner,
        threshold,
        self::channel(channel)?,
    )
    .py()
}

fn surrogate_opts(
    method: &str,
    iterations: usize,
    match_histogram: bool,
) -> PyResult<SurrogateOptions> {
    Ok(SurrogateOptions {
        method: method.parse::<SurrogateMethod>().py()?,
        iterations,
        match_histogram,
        ..SurrogateOptions::default()
    })
}

/// `(count, rows, cols)` wavelet surrogates of a 2-D field.
#[pyfunction]
#[pyo3(signature = (field, seed, count, method="phase", iterations=6, match_histogram=true))]
fn make_surrogates<'py>(
    py: Python<'py>,
    field: PyReadonlyArray2<f64>,
    seed: u64,
    count: usize,
    method: &str,
    iterations: usize,
    match_histogram: bool,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let opts = surrogate_opts(method, iterations, match_histogram)?;
    let f: Array2<f64> = field.as_array().to_owned();
    let maps = py
        .detach(|| stats::make_surrogates(&f, seed, count, &opts))
        .py()?;
    let (r, c) = f.dim();
    let mut out = Array3::zeros((maps.len(), r, c));
    for (k, m) in maps.iter().enumerate() {
        out.index_axis_mut(ndarray::Axis(0), k).assign(m);
    }
    Ok(out.into_pyarray(py))
}

/// Surrogate test of a predicted 2-D field against the truth.
#[pyfunction]
#[pyo3(signature = (pred, truth, count=100, seed=0, source="prediction", method="phase"))]
fn surrogate_test<'py>(
    py: Python<'py>,
    pred: PyReadonlyArray2<f64>,
    truth: PyReadonlyArray2<f64>,
    count: usize,
    seed: u64,
    source: &str,
    method: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let source = match source {
        "prediction" => SurrogateSource::Prediction,
        "truth" => SurrogateSource::Truth,
        _ => {
            return Err(PyValueError::new_err(format!(
                "source must be prediction or truth, got `{source}`"
            )))
        }
    };
    let opts = SurrogateTestOptions {
        count,
        seed,
        source,
        surrogate: surrogate_opts(method, 6, true)?,
    };
    let (p, t) = (pred.as_array().to_owned(), truth.as_array().to_owned());
    let r = py
        .detach(|| stats::surrogate_test_field(&p, &t, &opts))
        .py()?;
    let out = PyDict::new(py);
    out.set_item("rmse_prediction", r.rmse_prediction)?;
    out.set_item("rmse_surrogates", r.rmse_surrogates)?;
    out.set_item("percentile", r.percentile)?;
    out.set_item("p_value", r.p_value)?;
    Ok(out)
}

/// One-sided Welch test of `mean(a) < mean(b)`: `(t, df, p)` or None.
#[pyfunction]
fn welch_less(
    a: PyReadonlyArray1<f64>,
    b: PyReadonlyArray1<f64>,
) -> PyResult<Option<(f64, f64, f64)>> {
    let (a, b) = (a.as_array(), b.as_array());
    let (a, b) = (a.to_vec(), b.to_vec());
    Ok(stats::welch_less(&a, &b).map(|w| (w.t, w.df, w.p_value)))
}

/// Fisher's combined p-value, or None for an empty list.
#[pyfunction]
fn fisher_combine(p: Vec<f64>) -> Option<f64> {
    stats::fisher_combine(&p)
}

/// Averages per-sample network outputs `(C ≥ 3, m, m)` of one simulation
/// into a tensor field.
#[pyfunction]
fn average_outputs(
    outputs: Vec<(u32, PyReadonlyArray3<f32>)>,
    dx: f64,
) -> PyResult<(u32, PyTensorField)> {
    let owned: Vec<(u32, Array3<f32>)> = outputs
        .iter()
        .map(|(id, a)| (*id, a.as_array().to_owned()))
        .collect();
    let (id, inner) = scarmap_core::inverse::average_outputs(&owned, dx).py()?;
    Ok((id, PyTensorField { inner }))
}

#[pymodule]
fn scarmap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InstabilityError", m.py().get_type::<InstabilityError>())?;
    m.add("DEFAULT_JACCARD_THRESHOLD", DEFAULT_JACCARD_THRESHOLD)?;
    m.add("D_HEALTHY", sub::D_HEALTHY)?;
    m.add("D_SCAR", sub::D_SCAR)?;
    m.add_class::<PyTensorField>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(gen_substrate, m)?)?;
    m.add_function(wrap_pyfunction!(reference_mix, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(electrograms, m)?)?;
    m.add_function(wrap_pyfunction!(count_samples, m)?)?;
    m.add_function(wrap_pyfunction!(extract_samples, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(make_surrogates, m)?)?;
    m.add_function(wrap_pyfunction!(surrogate_test, m)?)?;
    m.add_function(wrap_pyfunction!(welch_less, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_combine, m)?)?;
    m.add_function(wrap_pyfunction!(average_outputs, m)?)?;
    Ok(())
}
