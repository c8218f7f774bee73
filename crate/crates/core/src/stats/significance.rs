use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use super::metrics::rmse;
use super::surrogate::{make_surrogates, SurrogateOptions};
use crate::error::{Error, Result};
use crate::substrate::DiffusionTensorField;

/// Below this many surrogates the percentile is too coarse to trust.
pub const MIN_STABLE_SURROGATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTestResult {
    pub rmse_prediction: f64,
    pub rmse_surrogates: Vec<f64>,
    /// Fraction of surrogates at least as close to the truth as the prediction.
    pub percentile: f64,
    /// `(1 + #{surrogate ≤ prediction}) / (count + 1)`.
    pub p_value: f64,
}

impl SurrogateTestResult {
    pub fn surrogate_mean(&self) -> f64 {
        self.rmse_surrogates.iter().sum::<f64>() / self.rmse_surrogates.len() as f64
    }
}

/// Which field the surrogates are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateSource {
    #[default]
    Prediction,
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateTestOptions {
    pub count: usize,
    pub seed: u64,
    pub source: SurrogateSource,
    pub surrogate: SurrogateOptions,
}

impl Default for SurrogateTestOptions {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            source: SurrogateSource::Prediction,
            surrogate: SurrogateOptions::default(),
        }
    }
}

/// Fraction of `surrogates` with RMSE at or below `prediction`.
pub fn percentile_of(prediction: f64, surrogates: &[f64]) -> f64 {
    if surrogates.is_empty() {
        return f64::NAN;
    }
    let k = surrogates.iter().filter(|&&s| s <= prediction).count();
    k as f64 / surrogates.len() as f64
}

/// Surrogate test on the `d_xx` component of two tensor fields.
pub fn surrogate_test(
    pred: &DiffusionTensorField,
    truth: &DiffusionTensorField,
    count: usize,
    seed: u64,
) -> Result<SurrogateTestResult> {
    let opts = SurrogateTestOptions {
        count,
        seed,
        ..SurrogateTestOptions::default()
    };
    surrogate_test_field(&pred.d_xx, &truth.d_xx, &opts)
}

pub fn surrogate_test_field(
    pred: &Array2<f64>,
    truth: &Array2<f64>,
    opts: &SurrogateTestOptions,
) -> Result<SurrogateTestResult> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    if opts.count == 0 {
        return Err(Error::InvalidParameter(
            "surrogate count must be positive".into(),
        ));
    }
    if opts.count < MIN_STABLE_SURROGATES {
        log::warn!(
            "{} surrogates give a percentile resolution of only {:.3}",
            opts.count,
            1.0 / opts.count as f64
        );
    }
    let source = match opts.source {
        SurrogateSource::Prediction => pred,
        SurrogateSource::Truth => truth,
    };
    let rmse_prediction = rmse(pred.view(), truth.view())?;
    let rmse_surrogates = make_surrogates(source, opts.seed, opts.count, &opts.surrogate)?
        .iter()
        .map(|s| rmse(s.view(), truth.view()))
        .collect::<Result<Vec<_>>>()?;
    let percentile = percentile_of(rmse_prediction, &rmse_surrogates);
    let hits = percentile * opts.count as f64;
    Ok(SurrogateTestResult {
        rmse_prediction,
        percentile,
        p_value: (1.0 + hits) / (opts.count as f64 + 1.0),
        rmse_surrogates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    /// `(mean(a) − mean(b)) / se`
    pub t: f64,
    pub df: f64,
    /// One-sided, alternative `mean(a) < mean(b)`.
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t-test. Needs two or more values per sample.
pub fn welch_less(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let p = if ma < mb {
            0.0
        } else if ma > mb {
            1.0
        } else {
            0.5
        };
        let t = (ma - mb).signum() * f64::INFINITY;
        return Some(WelchTest {
            t,
            df: f64::INFINITY,
            p_value: p,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some(WelchTest {
        t,
        df,
        p_value: dist.cdf(t),
    })
}

/// Fisher's combination of independent p-values.
pub fn fisher_combine(p: &[f64]) -> Option<f64> {
    if p.is_empty() {
        return None;
    }
    let x = -2.0 * p.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).sum::<f64>();
    let dist = ChiSquared::new(2.0 * p.len() as f64).ok()?;
    Some(1.0 - dist.cdf(x))
}

/// Per-simulation evaluation line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sim_id: u32,
    pub rmse: f64,
    pub jaccard: f64,
    pub percentile: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub count: usize,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub jaccard_mean: f64,
    pub jaccard_sd: f64,
    pub median_percentile: Option<f64>,
    /// Prediction RMSEs against per-simulation mean surrogate RMSEs.
    pub welch: Option<WelchTest>,
    /// Fisher combination of the per-simulation surrogate p-values.
    pub combined_p: Option<f64>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if x.len() == 1 {
        return (x[0], 0.0);
    }
    let (m, v) = mean_var(x);
    (m, v.sqrt())
}

/// Summarizes records; `tests` may be empty when no surrogate test ran.
pub fn aggregate(records: &[EvalRecord], tests: &[SurrogateTestResult]) -> AggregateReport {
    let rm: Vec<f64> = records.iter().map(|r| r.rmse).collect();
    let jc: Vec<f64> = records.iter().map(|r| r.jaccard).collect();
    let (rmse_mean, rmse_sd) = mean_sd(&rm);
    let (jaccard_mean, jaccard_sd) = mean_sd(&jc);
    let mut pct: Vec<f64> = records.iter().filter_map(|r| r.percentile).collect();
    let pv: Vec<f64> = records.iter().filter_map(|r| r.p_value).collect();
    let pred: Vec<f64> = tests.iter().map(|t| t.rmse_prediction).collect();
    let surr: Vec<f64> = tests.iter().map(|t| t.surrogate_mean()).collect();
    AggregateReport {
        count: records.len(),
        rmse_mean,
        rmse_sd,
        jaccard_mean,
        jaccard_sd,
        median_percentile: median(&mut pct),
        welch: welch_less(&pred, &surr),
        combined_p: fisher_combine(&pv),
    }
}

pub fn write_records_json(path: &Path, records: &[EvalRecord]) -> Result<()> {
    crate::io::write_json(path, &records)
}

pub fn read_records_json(path: &Path) -> Result<Vec<EvalRecord>> {
    crate::io::read_json(path)
}

/// Two-column `metric,value` table; absent values are left empty.
pub fn write_aggregate_csv(path: &Path, a: &AggregateReport) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let rows = [
        ("count", a.count.to_string()),
        ("rmse_mean", a.rmse_mean.to_string()),
        ("rmse_sd", a.rmse_sd.to_string()),
        ("jaccard_mean", a.jaccard_mean.to_string()),
        ("jaccard_sd", a.jaccard_sd.to_string()),
        ("median_percentile", opt(a.median_percentile)),
        ("welch_t", opt(a.welch.map(|w| w.t))),
        ("welch_df", opt(a.welch.map(|w| w.df))),
        ("welch_p", opt(a.welch.map(|w| w.p_value))),
        ("combined_p", opt(a.combined_p)),
    ];
    let mut text = String::from("metric,value\n");
    for (k, v) in rows {
        text.push_str(&format!("{k},{v}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_counts_ties() {
        assert_eq!(percentile_of(1.0, &[0.5, 1.0, 2.0, 3.0]), 0.5);
        assert_eq!(percentile_of(0.0, &[0.5, 1.0]), 0.0);
        assert!(percentile_of(0.0, &[]).is_nan());
    }

    #[test]
    fn welch_against_reference() {
        // scipy.stats.ttest_ind(a, b, equal_var=False, alternative="less")
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [3.0, 4.5, 5.0, 6.5, 7.0, 8.0];
        let w = welch_less(&a, &b).unwrap();
        assert!((w.t - -2.5887392067622947).abs() < 1e-9, "{}", w.t);
        assert!((w.df - 8.973974220210568).abs() < 1e-9, "{}", w.df);
        assert!(
            (w.p_value - 0.014670212468275413).abs() < 1e-9,
            "{}",
            w.p_value
        );
        assert!(welch_less(&[1.0], &b).is_none());
    }

    #[test]
    fn fisher_of_uniform_midpoints() {
        // one p-value of 0.5 passes through unchanged
        assert!((fisher_combine(&[0.5]).unwrap() - 0.5).abs() < 1e-12);
        assert!(fisher_combine(&[0.01, 0.02]).unwrap() < 0.01);
    }
}
