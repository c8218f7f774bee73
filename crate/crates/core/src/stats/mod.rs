//! Evaluation statistics for predicted diffusivity fields.

mod dtcwt;
mod metrics;
mod significance;
mod surrogate;

pub use dtcwt::{dtcwt_forward, dtcwt_inverse, WaveletPyramid};
pub use metrics::{
    jaccard, jaccard_by, jaccard_masks, radial_autocorrelation, relative_l2, rmse, scar_mask,
    MaskChannel, DEFAULT_JACCARD_THRESHOLD,
};
pub use significance::{
    aggregate, fisher_combine, percentile_of, read_records_json, surrogate_test,
    surrogate_test_field, welch_less, write_aggregate_csv, write_records_json, AggregateReport,
    EvalRecord, SurrogateSource, SurrogateTestOptions, SurrogateTestResult, WelchTest,
    MIN_STABLE_SURROGATES,
};
pub use surrogate::{
    default_levels, make_surrogate, make_surrogate_with, make_surrogates, shuffle_field,
    SurrogateMethod, SurrogateOptions,
};
