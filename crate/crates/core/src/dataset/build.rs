use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normalize::{add_noise_f32, noise_seed, normalize_in_place, NOISE_SIGMA};
use super::spec::{count_samples, extract_samples, SampleSpec};
use crate::egm::EgmArray;
use crate::error::{Error, Result};
use crate::io::{derive_seed, read_f32, read_f32_range, read_json, write_f32_slice, write_json};
use crate::substrate::{resample_tensor_field, DiffusionTensorField, FieldKind};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_TARGET_N: usize = 96;

/// Dataset subsets by substrate type; `C` is the combined set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    HeI,
    HoA,
    HeA,
    C,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::HeI, Mode::HoA, Mode::HeA, Mode::C];

    pub fn name(self) -> &'static str {
        match self {
            Mode::HeI => "HeI",
            Mode::HoA => "HoA",
            Mode::HeA => "HeA",
            Mode::C => "C",
        }
    }

    pub fn includes(self, kind: FieldKind) -> bool {
        match self {
            Mode::HeI => kind == FieldKind::HeI,
            Mode::HoA => kind == FieldKind::HoA,
            Mode::HeA => kind == FieldKind::HeA,
            Mode::C => true,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("unknown mode {s:?}; expected HeI, HoA, HeA or C"))
            })
    }
}

/// When input noise is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Shards hold clean inputs; readers draw noise per epoch.
    #[default]
    OnTheFly,
    /// Noise drawn once (epoch 0) and written into the shards.
    Baked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub spec: SampleSpec,
    pub noise_sigma: f64,
    pub noise: NoiseMode,
    pub seed: u64,
    pub folds: usize,
    pub target_n: usize,
}

impl DatasetOptions {
    pub fn new(spec: SampleSpec, seed: u64) -> Self {
        Self {
            spec,
            noise_sigma: NOISE_SIGMA,
            noise: NoiseMode::OnTheFly,
            seed,
            folds: DEFAULT_FOLDS,
            target_n: DEFAULT_TARGET_N,
        }
    }
}

/// One simulation's electrograms and ground-truth field.
#[derive(Debug, Clone)]
pub struct SimInput {
    pub sim_id: u32,
    pub kind: FieldKind,
    pub egm: EgmArray,
    pub tensor: DiffusionTensorField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEntry {
    pub sim_id: u32,
    pub kind: FieldKind,
    pub fold: usize,
    pub samples: usize,
    pub first_sample: usize,
    pub egm_shard: String,
    pub target_shard: String,
    /// Per-sample noisy coordinates, baked datasets only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords_shard: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub sim_id: u32,
    pub m: u32,
    pub shard: String,
    pub offset_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub egm: [usize; 3],
    pub coords: [usize; 3],
    pub target: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: String,
    pub version: u32,
    pub spec: SampleSpec,
    pub noise_sigma: f64,
    pub noise_mode: NoiseMode,
    pub seed: u64,
    pub target_n: usize,
    pub layout: Layout,
    pub coords_file: String,
    pub sims: Vec<SimEntry>,
    pub samples: Vec<SampleEntry>,
    /// Simulation ids per fold.
    pub folds: Vec<Vec<u32>>,
    /// Simulations per substrate type.
    pub class_counts: BTreeMap<String, usize>,
    /// Simulation ids per mode.
    pub modes: BTreeMap<String, Vec<u32>>,
    /// Content hashes of the inputs, filled in by callers that track them.
    #[serde(default)]
    pub upstream: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn sim(&self, sim_id: u32) -> Option<&SimEntry> {
        self.sims.iter().find(|s| s.sim_id == sim_id)
    }

    /// Sample indices of `mode` whose simulation is in one of `folds`.
    pub fn select(&self, mode: Mode, folds: &[usize]) -> Vec<usize> {
        let keep: HashSet<u32> = self
            .sims
            .iter()
            .filter(|s| mode.includes(s.kind) && folds.contains(&s.fold))
            .map(|s| s.sim_id)
            .collect();
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| keep.contains(&s.sim_id))
            .map(|(i, _)| i)
            .collect()
    }

    /// `(train, test)` sample indices with `test_fold` held out.
    pub fn split(&self, mode: Mode, test_fold: usize) -> (Vec<usize>, Vec<usize>) {
        let others: Vec<usize> = (0..self.folds.len()).filter(|&f| f != test_fold).collect();
        (self.select(mode, &others), self.select(mode, &[test_fold]))
    }
}

/// Splits simulations into `k` folds, stratified by substrate type: each
/// type is shuffled and dealt round-robin, continuing where the previous
/// type stopped so fold sizes differ by at most one.
pub fn assign_folds(sims: &[(u32, FieldKind)], k: usize, seed: u64) -> Result<Vec<Vec<u32>>> {
    if k == 0 || sims.len() < k {
        return Err(Error::InvalidParameter(format!(
            "{} simulations cannot fill {k} folds",
            sims.len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (ki, kind) in FieldKind::ALL.into_iter().enumerate() {
        let mut ids: Vec<u32> = sims.iter().filter(|s| s.1 == kind).map(|s| s.0).collect();
        ids.sort_unstable();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            &[0x666f6c64, ki as u64],
        )));
        for id in ids {
            folds[next % k].push(id);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

struct Prepared {
    sim_id: u32,
    kind: FieldKind,
    samples: usize,
    grid: (usize, usize),
}

fn shard_names(sim_id: u32) -> (String, String, String) {
    (
        format!("sims/sim_{sim_id:05}.egm.f32"),
        format!("sims/sim_{sim_id:05}.target.f32"),
        format!("sims/sim_{sim_id:05}.coords.f32"),
    )
}

fn coords_block(rows: usize, cols: usize) -> Array3<f32> {
    let norm = |k: usize, n: usize| {
        if n > 1 {
            k as f32 / (n - 1) as f32
        } else {
            0.5
        }
    };
    Array3::from_shape_fn((2, rows, cols), |(c, i, j)| {
        if c == 0 {
            norm(j, cols)
        } else {
            norm(i, rows)
        }
    })
}

/// Writes one simulation's shards. `first_sample` is its global sample
/// offset, used to seed baked noise.
fn write_sim(
    dir: &Path,
    sim: &SimInput,
    opts: &DatasetOptions,
    first_sample: usize,
) -> Result<Prepared> {
    let spec = &opts.spec;
    let (_, rows, cols) = sim.egm.data.dim();
    let mut blocks = extract_samples(sim.egm.data.view(), spec)?;
    let (egm_name, target_name, coords_name) = shard_names(sim.sim_id);
    let per = spec.n * rows * cols;
    let mut egm = Vec::with_capacity(blocks.len() * per);
    let mut coords = Vec::new();
    let clean_coords = coords_block(rows, cols);
    for (m, b) in blocks.iter_mut().enumerate() {
        normalize_in_place(b.view_mut());
        let mut vals: Vec<f32> = b.iter().map(|&x| x as f32).collect();
        if opts.noise == NoiseMode::Baked {
            let seed = noise_seed(opts.seed, 0, (first_sample + m) as u64);
            let mut c: Vec<f32> = clean_coords.iter().copied().collect();
            let mut joined = vals;
            joined.append(&mut c);
            add_noise_f32(&mut joined, opts.noise_sigma, seed);
            let c = joined.split_off(per);
            coords.extend(c);
            vals = joined;
        }
        egm.extend(vals);
    }
    write_f32_slice(dir.join(&egm_name), &egm)?;
    if opts.noise == NoiseMode::Baked {
        write_f32_slice(dir.join(&coords_name), &coords)?;
    }
    let target = if sim.tensor.dim().0 == opts.target_n {
        sim.tensor.clone()
    } else {
        resample_tensor_field(&sim.tensor, opts.target_n)?
    };
    let tvals: Vec<f32> = target
        .d_xx
        .iter()
        .chain(target.d_yy.iter())
        .chain(target.d_xy.iter())
        .map(|&x| x as f32)
        .collect();
    write_f32_slice(dir.join(&target_name), &tvals)?;
    Ok(Prepared {
        sim_id: sim.sim_id,
        kind: sim.kind,
        samples: blocks.len(),
        grid: (rows, cols),
    })
}

/// Builds a dataset directory from in-memory simulations.
pub fn build_dataset(
    sims: &[SimInput],
    opts: &DatasetOptions,
    dir: &Path,
) -> Result<DatasetManifest> {
    let index: Vec<(u32, FieldKind)> = sims.iter().map(|s| (s.sim_id, s.kind)).collect();
    build_dataset_with(&index, |i| Ok(sims[i].clone()), opts, dir)
}

/// Builds a dataset, loading simulation `i` of `sims` through `load(i)`
/// so only the simulations in flight are held in memory.
pub fn build_dataset_with<F>(
    sims: &[(u32, FieldKind)],
    load: F,
    opts: &DatasetOptions,
    dir: &Path,
) -> Result<DatasetManifest>
where
    F: Fn(usize) -> Result<SimInput> + Sync,
{
    opts.spec.validate()?;
    let mut seen = HashSet::new();
    if let Some(dup) = sims.iter().find(|s| !seen.insert(s.0)) {
        return Err(Error::InvalidParameter(format!(
            "duplicate simulation id {}",
            dup.0
        )));
    }
    let folds = assign_folds(sims, opts.folds, opts.seed)?;
    fs::create_dir_all(dir.join("sims")).map_err(|e| Error::io(dir, e))?;

    // every simulation yields the same sample count, so offsets are known up front
    let per_sim = count_samples(&opts.spec);
    let prepared: Vec<Prepared> = (0..sims.len())
        .into_par_iter()
        .map(|i| {
            let sim = load(i)?;
            if (sim.sim_id, sim.kind) != sims[i] {
                return Err(Error::InvalidParameter(format!(
                    "loader returned simulation {} for slot {}",
                    sim.sim_id, sims[i].0
                )));
            }
            write_sim(dir, &sim, opts, i * per_sim)
        })
        .collect::<Result<_>>()?;

    let grid = prepared.first().map(|p| p.grid).unwrap_or((0, 0));
    if let Some(p) = prepared.iter().find(|p| p.grid != grid) {
        return Err(Error::ShapeMismatch(format!(
            "simulation {} has a {:?} electrode grid, expected {:?}",
            p.sim_id, p.grid, grid
        )));
    }
    let (rows, cols) = grid;
    write_f32_slice(
        dir.join("coords.f32"),
        coords_block(rows, cols)
            .as_slice()
            .expect("standard layout"),
    )?;

    let fold_of = |id: u32| {
        folds
            .iter()
            .position(|f| f.contains(&id))
            .expect("every sim has a fold")
    };
    let stride = (opts.spec.n * rows * cols * 4) as u64;
    let mut sim_entries = Vec::new();
    let mut samples = Vec::new();
    for p in &prepared {
        let (egm_name, target_name, coords_name) = shard_names(p.sim_id);
        sim_entries.push(SimEntry {
            sim_id: p.sim_id,
            kind: p.kind,
            fold: fold_of(p.sim_id),
            samples: p.samples,
            first_sample: samples.len(),
            egm_shard: egm_name.clone(),
            target_shard: target_name,
            coords_shard: (opts.noise == NoiseMode::Baked).then_some(coords_name),
        });
        for m in 0..p.samples {
            samples.push(SampleEntry {
                sim_id: p.sim_id,
                m: m as u32,
                shard: egm_name.clone(),
                offset_bytes: m as u64 * stride,
            });
        }
    }
    let mut class_counts = BTreeMap::new();
    for kind in FieldKind::ALL {
        class_counts.insert(
            kind.name().to_string(),
            sims.iter().filter(|s| s.1 == kind).count(),
        );
    }
    let modes = Mode::ALL
        .into_iter()
        .map(|m| {
            let mut ids: Vec<u32> = sims
                .iter()
                .filter(|s| m.includes(s.1))
                .map(|s| s.0)
                .collect();
            ids.sort_unstable();
            (m.name().to_string(), ids)
        })
        .collect();
    let manifest = DatasetManifest {
        kind: "dataset".into(),
        version: 1,
        spec: opts.spec,
        noise_sigma: opts.noise_sigma,
        noise_mode: opts.noise,
        seed: opts.seed,
        target_n: opts.target_n,
        layout: Layout {
            egm: [opts.spec.n, rows, cols],
            coords: [2, rows, cols],
            target: [3, opts.target_n, opts.target_n],
        },
        coords_file: "coords.f32".into(),
        sims: sim_entries,
        samples,
        folds,
        class_counts,
        modes,
        upstream: BTreeMap::new(),
    };
    write_json(dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// One network input with its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `(N, rows, cols)` normalized electrograms.
    pub egm: Array3<f32>,
    /// `(2, rows, cols)`: x then y electrode coordinates in [0, 1].
    pub coords: Array3<f32>,
    /// `(3, m, m)`: d_xx, d_yy, d_xy.
    pub target: Array3<f32>,
    pub sim_id: u32,
    pub m: u32,
}

/// Read access to a built dataset.
pub struct Dataset {
    dir: PathBuf,
    pub manifest: DatasetManifest,
    coords: Array3<f32>,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join("manifest.json");
        let manifest: DatasetManifest = read_json(&path)?;
        if manifest.kind != "dataset" {
            return Err(Error::format(
                &path,
                format!("expected kind dataset, found {}", manifest.kind),
            ));
        }
        let c = read_f32(dir.join(&manifest.coords_file))?;
        let coords = Array3::from_shape_vec(manifest.layout.coords, c)
            .map_err(|e| Error::format(&path, format!("coords file: {e}")))?;
        Ok(Self {
            dir,
            manifest,
            coords,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    pub fn target(&self, sim_id: u32) -> Result<Array3<f32>> {
        let e = self
            .manifest
            .sim(sim_id)
            .ok_or_else(|| Error::InvalidParameter(format!("no simulation {sim_id} in dataset")))?;
        let v = read_f32(self.dir.join(&e.target_shard))?;
        Array3::from_shape_vec(self.manifest.layout.target, v)
            .map_err(|err| Error::format(self.dir.join(&e.target_shard), err.to_string()))
    }

    /// Sample `idx`. With `epoch = Some(e)` on an on-the-fly dataset, noise
    /// is drawn from the sample's epoch seed; `None` returns clean inputs.
    pub fn sample(&self, idx: usize, epoch: Option<u64>) -> Result<Sample> {
        let entry = self
            .manifest
            .samples
            .get(idx)
            .ok_or_else(|| Error::InvalidParameter(format!("sample {idx} out of range")))?;
        let lay = &self.manifest.layout;
        let n = lay.egm.iter().product();
        let egm = read_f32_range(self.dir.join(&entry.shard), entry.offset_bytes, n)?;
        let sim = self
            .manifest
            .sim(entry.sim_id)
            .expect("sample refers to a listed sim");
        let nc: usize = lay.coords.iter().product();
        let coords = match &sim.coords_shard {
            Some(file) => {
                let v =
                    read_f32_range(self.dir.join(file), (entry.m as usize * nc * 4) as u64, nc)?;
                Array3::from_shape_vec(lay.coords, v).expect("layout")
            }
            None => self.coords.clone(),
        };
        let mut s = Sample {
            egm: Array3::from_shape_vec(lay.egm, egm).expect("layout"),
            coords,
            target: self.target(entry.sim_id)?,
            sim_id: entry.sim_id,
            m: entry.m,
        };
        if let (NoiseMode::OnTheFly, Some(e)) = (self.manifest.noise_mode, epoch) {
            let seed = noise_seed(self.manifest.seed, e, idx as u64);
            let mut joined: Vec<f32> = s.egm.iter().chain(s.coords.iter()).copied().collect();
            add_noise_f32(&mut joined, self.manifest.noise_sigma, seed);
            let c = joined.split_off(n);
            s.egm = Array3::from_shape_vec(lay.egm, joined).expect("layout");
            s.coords = Array3::from_shape_vec(lay.coords, c).expect("layout");
        }
        Ok(s)
    }

    /// All samples of one simulation, stacked along a new leading axis.
    pub fn sim_egm(&self, sim_id: u32) -> Result<ndarray::Array4<f32>> {
        let e = self
            .manifest
            .sim(sim_id)
            .ok_or_else(|| Error::InvalidParameter(format!("no simulation {sim_id} in dataset")))?;
        let blocks: Vec<Array3<f32>> = (e.first_sample..e.first_sample + e.samples)
            .map(|i| self.sample(i, None).map(|s| s.egm))
            .collect::<Result<_>>()?;
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        if views.is_empty() {
            let l = &self.manifest.layout.egm;
            return Ok(ndarray::Array4::zeros((0, l[0], l[1], l[2])));
        }
        Ok(ndarray::stack(Axis(0), &views).expect("equal shapes"))
    }
}
