use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{FeatureMatrix, FeatureRow};
use crate::corpus::Polarity;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Multinomial Naive Bayes with Laplace smoothing (alpha = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NaiveBayesModel<T> {
    n_features: usize,
    class_counts: [usize; 3],
    /// `None` for classes absent from training; they are never predicted.
    log_prior: [Option<T>; 3],
    /// `log_likelihood[class][feature]`.
    log_likelihood: Vec<Vec<T>>,
}

pub fn fit_nb<T: Scalar>(x: &FeatureMatrix<T>, y: &[Polarity]) -> Result<NaiveBayesModel<T>> {
    if y.is_empty() {
        return Err(Error::Empty("no training samples"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            found: x.n_rows(),
        });
    }
    let d = x.n_cols();
    let mut class_counts = [0usize; 3];
    let mut feature_sums = vec![vec![T::zero(); d]; 3];
    for (r, (row, label)) in x.rows().zip(y).enumerate() {
        let k = label.index();
        class_counts[k] += 1;
        for (j, v) in row.nonzeros() {
            if v < T::zero() {
                return Err(Error::Negative { row: r, column: j });
            }
            feature_sums[k][j] = feature_sums[k][j] + v;
        }
    }
    let n = T::from_count(y.len());
    let log_prior = class_counts.map(|c| (c > 0).then(|| (T::from_count(c) / n).ln()));
    let alpha = T::one();
    let log_likelihood = feature_sums
        .into_iter()
        .map(|sums| {
            let total: T = sums.iter().copied().sum::<T>() + alpha * T::from_count(d);
            sums.into_iter().map(|s| ((s + alpha) / total).ln()).collect()
        })
        .collect();
    Ok(NaiveBayesModel {
        n_features: d,
        class_counts,
        log_prior,
        log_likelihood,
    })
}

impl<T: Scalar> NaiveBayesModel<T> {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_counts(&self) -> [usize; 3] {
        self.class_counts
    }

    pub fn log_prior(&self) -> [Option<T>; 3] {
        self.log_prior
    }

    pub fn log_likelihood(&self, class: Polarity, feature: usize) -> T {
        self.log_likelihood[class.index()][feature]
    }

    /// Unnormalized log posterior per class; `None` for untrained classes.
    pub fn joint_log_likelihood<R: FeatureRow<T> + ?Sized>(&self, x: &R) -> Result<[Option<T>; 3]> {
        if x.dim() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                found: x.dim(),
            });
        }
        let nz = x.nonzeros();
        let mut out = [None; 3];
        for k in 0..3 {
            if let Some(p) = self.log_prior[k] {
                let ll = &self.log_likelihood[k];
                out[k] = Some(p + nz.iter().map(|&(j, v)| v * ll[j]).sum::<T>());
            }
        }
        Ok(out)
    }

    /// Argmax of the joint log likelihood; ties go to the lowest encoding.
    pub fn predict<R: FeatureRow<T> + ?Sized>(&self, x: &R) -> Result<Polarity> {
        let scores = self.joint_log_likelihood(x)?;
        let mut best: Option<(usize, T)> = None;
        for (k, s) in scores.iter().enumerate() {
            if let Some(s) = *s {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((k, s));
                }
            }
        }
        let (k, _) = best.expect("at least one class has training samples");
        Ok(Polarity::ALL[k])
    }

    pub fn predict_batch<R: FeatureRow<T> + Sync>(&self, rows: &[R]) -> Result<Vec<Polarity>> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    pub(crate) fn check(&self) -> std::result::Result<(), String> {
        if self.log_likelihood.len() != 3 || self.log_likelihood.iter().any(|r| r.len() != self.n_features) {
            return Err("likelihood table shape does not match feature dimension".into());
        }
        if self.log_prior.iter().all(Option::is_none) {
            return Err("no class has a prior".into());
        }
        Ok(())
    }
}

/// Free-function form of [`NaiveBayesModel::predict`].
pub fn predict_nb<T: Scalar, R: FeatureRow<T> + ?Sized>(model: &NaiveBayesModel<T>, x: &R) -> Result<Polarity> {
    model.predict(x)
}
