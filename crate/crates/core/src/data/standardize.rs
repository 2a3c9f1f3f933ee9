use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Per-feature affine map to zero mean / unit population standard deviation.
///
/// Columns with zero spread keep `std = 1` (they only get centred).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::data("cannot fit a standardizer on an empty dataset"));
        }
        let n = train.len() as f64;
        let m = train.feature_count();
        let mut mean = vec![0.0; m];
        for s in train.samples() {
            for (acc, &x) in mean.iter_mut().zip(&s.rss) {
                *acc += x;
            }
        }
        for x in &mut mean {
            *x /= n;
        }
        let mut var = vec![0.0; m];
        for s in train.samples() {
            for ((acc, &x), &mu) in var.iter_mut().zip(&s.rss).zip(&mean) {
                *acc += (x - mu) * (x - mu);
            }
        }
        let std = var
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                let sd = (v / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    log::warn!(
                        "feature {} is constant in the training data; leaving it unscaled",
                        j + 1
                    );
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn feature_count(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.mean.len() {
            return Err(Error::shape(format!(
                "standardizer fitted on {} features applied to {cols}",
                self.mean.len()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds.feature_count())?;
        let samples = ds
            .samples()
            .iter()
            .map(|s| {
                let mut s = s.clone();
                for ((x, &mu), &sd) in s.rss.iter_mut().zip(&self.mean).zip(&self.std) {
                    *x = (*x - mu) / sd;
                }
                s
            })
            .collect();
        Ok(ds.with_samples(samples))
    }

    pub fn apply_matrix<S: Scalar>(&self, m: &Matrix<S>) -> Result<Matrix<S>> {
        self.check(m.cols())?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((x, &mu), &sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - S::of(mu)) / S::of(sd);
            }
        }
        Ok(out)
    }

    /// Maps standardized rows back to the original units.
    pub fn invert<S: Scalar>(&self, m: &Matrix<S>) -> Result<Matrix<S>> {
        self.check(m.cols())?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((x, &mu), &sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = *x * S::of(sd) + S::of(mu);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if s.mean.len() != s.std.len() || s.std.iter().any(|&x| x.is_nan() || x <= 0.0) {
            return Err(Error::data(format!(
                "{}: malformed standardizer",
                path.display()
            )));
        }
        Ok(s)
    }
}
