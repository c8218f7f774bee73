use ndarray::{s, Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the within-sample index `n` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexBase {
    /// Frames `mN_τ + nN_t` for `n = 1..N` on a 1-based time axis, so the
    /// first retained frame of sample 0 is frame `N_t`.
    #[default]
    One,
    /// Frames `mN_τ + nN_t` for `n = 0..N-1` on a 0-based time axis.
    Zero,
}

/// Sampling of an `L`-frame recording into `N`-frame windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub n: usize,
    pub n_t: usize,
    pub n_tau: usize,
    pub l: usize,
    #[serde(default)]
    pub index_base: IndexBase,
}

impl SampleSpec {
    pub fn new(n: usize, n_t: usize, n_tau: usize, l: usize) -> Self {
        Self {
            n,
            n_t,
            n_tau,
            l,
            index_base: IndexBase::One,
        }
    }

    pub fn zero_based(self) -> Self {
        Self {
            index_base: IndexBase::Zero,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_t == 0 || self.n_tau == 0 {
            return Err(Error::InvalidParameter(format!(
                "N, N_t and N_tau must be at least 1, got {}, {}, {}",
                self.n, self.n_t, self.n_tau
            )));
        }
        if (self.n - 1) * self.n_t >= self.l {
            return Err(Error::InvalidParameter(format!(
                "a sample spans {} frames but the recording has {}",
                (self.n - 1) * self.n_t + 1,
                self.l
            )));
        }
        Ok(())
    }

    /// 0-based array indices of the frames in sample `m`.
    pub fn frame_indices(&self, m: usize) -> Vec<usize> {
        match self.index_base {
            IndexBase::One => (1..=self.n)
                .map(|k| m * self.n_tau + k * self.n_t - 1)
                .collect(),
            IndexBase::Zero => (0..self.n).map(|k| m * self.n_tau + k * self.n_t).collect(),
        }
    }
}

/// Number of windows whose every frame lies inside the recording.
pub fn count_samples(spec: &SampleSpec) -> usize {
    let span = match spec.index_base {
        // last frame (1-based) of sample m is mN_τ + N·N_t ≤ L
        IndexBase::One => spec.n * spec.n_t,
        // last frame (0-based) is mN_τ + (N−1)N_t ≤ L − 1
        IndexBase::Zero => (spec.n - 1) * spec.n_t + 1,
    };
    if spec.n_tau == 0 || span > spec.l {
        return 0;
    }
    (spec.l - span) / spec.n_tau + 1
}

/// Copies every window out of a `(L, rows, cols)` recording, giving
/// `(count, N, rows, cols)` blocks in sample order.
pub fn extract_samples<T: Copy>(egm: ArrayView3<T>, spec: &SampleSpec) -> Result<Vec<Array3<T>>> {
    spec.validate()?;
    if egm.len_of(Axis(0)) != spec.l {
        return Err(Error::ShapeMismatch(format!(
            "recording has {} frames, sample spec expects L = {}",
            egm.len_of(Axis(0)),
            spec.l
        )));
    }
    Ok((0..count_samples(spec))
        .map(|m| {
            let idx = spec.frame_indices(m);
            let views: Vec<_> = idx.iter().map(|&t| egm.slice(s![t, .., ..])).collect();
            ndarray::stack(Axis(0), &views).expect("frames share a shape")
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_counts() {
        assert_eq!(count_samples(&SampleSpec::new(10, 5, 25, 1000)), 39);
        assert_eq!(count_samples(&SampleSpec::new(1000, 1, 1, 1000)), 1);
        assert_eq!(count_samples(&SampleSpec::new(17, 3, 22, 1000)), 44);
        assert_eq!(count_samples(&SampleSpec::new(1, 1, 1, 1000)), 1000);
    }

    #[test]
    fn first_window_indices() {
        let s = SampleSpec::new(10, 5, 25, 1000);
        let one_based: Vec<usize> = s.frame_indices(0).iter().map(|i| i + 1).collect();
        assert_eq!(one_based, (1..=10).map(|k| 5 * k).collect::<Vec<_>>());
        assert_eq!(s.zero_based().frame_indices(1)[0], 25);
    }

    #[test]
    fn validation() {
        assert!(SampleSpec::new(0, 1, 1, 10).validate().is_err());
        assert!(SampleSpec::new(11, 1, 1, 10).validate().is_err());
        assert!(SampleSpec::new(10, 1, 1, 10).validate().is_ok());
    }
}
