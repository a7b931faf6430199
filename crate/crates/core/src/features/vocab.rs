use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sparse::SparseVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub min_df: usize,
    pub max_features: Option<usize>,
    /// Echo of the preprocessing setting the documents were produced with.
    pub use_stemming: bool,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            min_df: 2,
            max_features: Some(20_000),
            use_stemming: true,
        }
    }
}

/// Term -> column mapping with document frequencies.
///
/// Columns are assigned in lexicographic term order, so fitting on any
/// permutation of the same documents gives the same vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    n_documents: usize,
    config: VocabConfig,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    n_documents: usize,
    config: VocabConfig,
    terms: Vec<String>,
    df: Vec<usize>,
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = String;

    fn try_from(f: VocabularyFile) -> std::result::Result<Self, String> {
        if f.terms.len() != f.df.len() {
            return Err("terms and df lengths differ".into());
        }
        if f.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err("terms must be strictly sorted".into());
        }
        let index = f.terms.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Vocabulary {
            terms: f.terms,
            df: f.df,
            n_documents: f.n_documents,
            config: f.config,
            index,
        })
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            n_documents: v.n_documents,
            config: v.config,
            terms: v.terms,
            df: v.df,
        }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn config(&self) -> &VocabConfig {
        &self.config
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Hex SHA-256 over the ordered term list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.terms {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        format!("{:x}", h.finalize())
    }
}

/// Fits a vocabulary over tokenized documents.
///
/// Terms need `df >= min_df`; with `max_features`, the highest-df terms are
/// kept (ties broken lexicographically) before indices are assigned.
pub fn fit_vocabulary<S: AsRef<str>>(docs: &[Vec<S>], config: &VocabConfig) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::Empty("no documents to fit a vocabulary on"));
    }
    if config.min_df == 0 {
        return Err(Error::InvalidArgument("min_df must be at least 1".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let distinct: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = df.into_iter().filter(|&(_, n)| n >= config.min_df).collect();
    if let Some(cap) = config.max_features {
        // Stable sort keeps lexicographic order among equal df.
        kept.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
        kept.truncate(cap);
        kept.sort_by(|a, b| a.0.cmp(b.0));
    }
    if kept.is_empty() {
        return Err(Error::Empty("no term reaches min_df"));
    }
    let (terms, df): (Vec<String>, Vec<usize>) = kept.into_iter().map(|(t, n)| (t.to_string(), n)).unzip();
    let index = terms.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    Ok(Vocabulary {
        terms,
        df,
        n_documents: docs.len(),
        config: config.clone(),
        index,
    })
}

/// Term counts; out-of-vocabulary tokens are ignored.
pub fn count_vector<T: Scalar, S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseVector<T> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let entries = counts.into_iter().map(|(i, c)| (i, T::from_count(c))).collect();
    SparseVector::from_sorted(vocab.len(), entries)
}

/// Smoothed inverse document frequency: `ln((1 + n) / (1 + df)) + 1`.
pub fn idf<T: Scalar>(vocab: &Vocabulary, index: usize) -> T {
    let n = T::from_count(1 + vocab.n_documents());
    let df = T::from_count(1 + vocab.df(index));
    (n / df).ln() + T::one()
}

/// Scales counts by idf, then L2-normalizes. The zero vector stays zero.
pub fn tfidf_transform<T: Scalar>(counts: &SparseVector<T>, vocab: &Vocabulary) -> Result<SparseVector<T>> {
    if counts.dim() != vocab.len() {
        return Err(Error::Dimension {
            expected: vocab.len(),
            found: counts.dim(),
        });
    }
    let weighted = counts.map_values(|i, c| c * idf::<T>(vocab, i));
    let norm = weighted.l2_norm();
    if norm == T::zero() {
        return Ok(weighted);
    }
    Ok(weighted.map_values(|_, v| v / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn docs() -> Vec<Vec<&'static str>> {
        vec![vec!["a", "b", "a"], vec!["a", "c"]]
    }

    fn cfg(min_df: usize, max_features: Option<usize>) -> VocabConfig {
        VocabConfig { min_df, max_features, use_stemming: false }
    }

    #[test]
    fn fits_by_hand() {
        let v = fit_vocabulary(&docs(), &cfg(1, None)).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert_eq!((v.df(0), v.df(1), v.df(2)), (2, 1, 1));
        assert_eq!(v.n_documents(), 2);
        assert_eq!(v.index_of("c"), Some(2));
    }

    #[test]
    fn min_df_threshold() {
        let v = fit_vocabulary(&docs(), &cfg(2, None)).unwrap();
        assert_eq!(v.terms(), ["a"]);
    }

    #[test]
    fn max_features_tie_break() {
        let v = fit_vocabulary(&docs(), &cfg(1, Some(2))).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_vocabulary::<&str>(&[], &cfg(1, None)).is_err());
        assert!(fit_vocabulary(&docs(), &cfg(3, None)).is_err());
        assert!(fit_vocabulary(&docs(), &cfg(0, None)).is_err());
    }

    #[test]
    fn counts() {
        let v = fit_vocabulary(&docs(), &cfg(1, None)).unwrap();
        let c: SparseVector<f64> = count_vector(&["a", "b", "a"], &v);
        assert_eq!(c.entries(), [(0, 2.0), (1, 1.0)]);
        let oov: SparseVector<f64> = count_vector(&["x", "y"], &v);
        assert!(oov.is_zero());
        assert_eq!(oov.dim(), 3);
        assert!(count_vector::<f64, &str>(&[], &v).is_zero());
    }

    #[test]
    fn tfidf_worked_example() {
        // Frozen from an independent hand computation of the smoothed-idf + L2 formula.
        let v = fit_vocabulary(&docs(), &cfg(1, None)).unwrap();
        let c: SparseVector<f64> = count_vector(&["a", "b", "a"], &v);
        let t = tfidf_transform(&c, &v).unwrap();
        assert_relative_eq!(t.get(0), 0.8181802073667197, epsilon = 1e-9);
        assert_relative_eq!(t.get(1), 0.5749618667993135, epsilon = 1e-9);
        assert_eq!(t.get(2), 0.0);
    }

    #[test]
    fn tfidf_zero_and_dimension() {
        let v = fit_vocabulary(&docs(), &cfg(1, None)).unwrap();
        assert!(tfidf_transform(&SparseVector::<f64>::zeros(3), &v).unwrap().is_zero());
        assert!(tfidf_transform(&SparseVector::<f64>::zeros(2), &v).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let v = fit_vocabulary(&docs(), &cfg(1, None)).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
    }

    fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        proptest::collection::vec(proptest::collection::vec("[a-f]{1,2}", 0..8), 1..12)
    }

    proptest! {
        #[test]
        fn order_independent(docs in corpus(), seed in any::<u64>()) {
            let mut shuffled = docs.clone();
            crate::rng::SeededRng::new(seed).shuffle(&mut shuffled);
            let a = fit_vocabulary(&docs, &cfg(1, Some(5)));
            let b = fit_vocabulary(&shuffled, &cfg(1, Some(5)));
            prop_assert_eq!(a.ok(), b.ok());
        }

        #[test]
        fn count_sum_is_in_vocab_tokens(docs in corpus(), probe in proptest::collection::vec("[a-h]{1,2}", 0..20)) {
            if let Ok(v) = fit_vocabulary(&docs, &cfg(1, None)) {
                let c: SparseVector<f64> = count_vector(&probe, &v);
                let in_vocab = probe.iter().filter(|t| v.index_of(t).is_some()).count();
                prop_assert_eq!(c.entries().iter().map(|e| e.1).sum::<f64>(), in_vocab as f64);
            }
        }

        #[test]
        fn tfidf_unit_norm(docs in corpus(), probe in proptest::collection::vec("[a-f]{1,2}", 0..20)) {
            if let Ok(v) = fit_vocabulary(&docs, &cfg(1, None)) {
                let t = tfidf_transform(&count_vector::<f64, _>(&probe, &v), &v).unwrap();
                if !t.is_zero() {
                    prop_assert!((t.l2_norm() - 1.0).abs() <= 1e-9);
                }
            }
        }
    }
}
