//! Network inputs cut from electrogram recordings.

pub mod build;
pub mod normalize;
pub mod spec;

pub use build::{
    assign_folds, build_dataset, build_dataset_with, Dataset, DatasetManifest, DatasetOptions,
    Layout, Mode, NoiseMode, Sample, SampleEntry, SimEntry, SimInput, DEFAULT_FOLDS,
    DEFAULT_TARGET_N,
};
pub use normalize::{
    add_noise, add_noise_f32, noise_seed, normalize, normalize_in_place, NOISE_SIGMA,
};
pub use spec::{count_samples, extract_samples, IndexBase, SampleSpec};
