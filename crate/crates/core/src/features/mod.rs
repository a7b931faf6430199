//! Hybrid feature assembly.
//!
//! Layout of one feature vector, in column order:
//!
//! | block       | width | content                                 |
//! |-------------|-------|-----------------------------------------|
//! | text bag    | V     | TF-IDF of the preprocessed comment      |
//! | aspect bag  | V     | TF-IDF of the preprocessed aspect term  |
//! | polarity    | 3 × P | provider scores, in provider list order |
//!
//! Each block can be switched off for ablations. The bag blocks share one
//! vocabulary fitted on the training partition.

mod polarity;
mod sparse;
mod vocab;

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use polarity::{
    polarity_features, write_cache, BatchItem, CacheRecord, FileProvider, Health, LabelScores,
    PolarityProvider, PolarityScores, RemoteProvider, ScoreQuery, ScoreRequest, ScoreResponse,
    SUM_TOLERANCE,
};
pub use sparse::SparseVector;
pub use vocab::{count_vector, fit_vocabulary, idf, tfidf_transform, VocabConfig, Vocabulary};

use crate::corpus::AspectInstance;
use crate::error::{Error, Result};
use crate::preprocess::Preprocessor;
use crate::scalar::Scalar;

/// Which blocks an experiment includes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub text_bag: bool,
    pub aspect_bag: bool,
    pub polarity: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            text_bag: true,
            aspect_bag: true,
            polarity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockKind {
    TextBag,
    AspectBag,
    Polarity { provider_id: String },
    /// Reserved for dense embedding providers; not produced by this build.
    Embedding { source: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    #[serde(flatten)]
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

/// Column layout shared by every vector of one experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub blocks: Vec<Block>,
    pub dim: usize,
    /// Fingerprint of the vocabulary behind the bag blocks.
    pub vocabulary: String,
}

impl FeatureLayout {
    pub fn new(vocab: &Vocabulary, provider_ids: &[&str], config: &FeatureConfig) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |kind: BlockKind, len: usize| {
            blocks.push(Block { kind, offset, len });
            offset += len;
        };
        if config.text_bag {
            push(BlockKind::TextBag, vocab.len());
        }
        if config.aspect_bag {
            push(BlockKind::AspectBag, vocab.len());
        }
        if config.polarity {
            for id in provider_ids {
                push(BlockKind::Polarity { provider_id: id.to_string() }, 3);
            }
        }
        FeatureLayout {
            blocks,
            dim: offset,
            vocabulary: vocab.fingerprint(),
        }
    }

    /// Width of the sparse (bag) prefix.
    pub fn sparse_dim(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b.kind, BlockKind::TextBag | BlockKind::AspectBag))
            .map(|b| b.len)
            .sum()
    }

    /// Hex SHA-256 of the canonical JSON form; stored in model files.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("layout serializes");
        format!("{:x}", Sha256::digest(json))
    }
}

/// Bag blocks as one sparse vector, followed by the dense polarity block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub sparse: SparseVector<T>,
    pub dense: Vec<T>,
    pub layout: Arc<FeatureLayout>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn dim(&self) -> usize {
        self.sparse.dim() + self.dense.len()
    }

    pub fn get(&self, index: usize) -> T {
        let sd = self.sparse.dim();
        if index < sd {
            self.sparse.get(index)
        } else {
            self.dense.get(index - sd).copied().unwrap_or_else(T::zero)
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = self.sparse.to_dense();
        out.extend_from_slice(&self.dense);
        out
    }

    /// `(column, value)` pairs of all nonzero entries, ascending.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        let sd = self.sparse.dim();
        self.sparse.entries().iter().copied().chain(
            self.dense
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(move |(i, v)| (sd + i, *v)),
        )
    }
}

/// Turns instances into feature vectors under one fixed layout.
pub struct FeatureExtractor {
    preprocessor: Preprocessor,
    vocab: Vocabulary,
    providers: Vec<Arc<dyn PolarityProvider>>,
    config: FeatureConfig,
    layout: Arc<FeatureLayout>,
}

impl std::fmt::Debug for FeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureExtractor")
            .field("layout", &self.layout)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl FeatureExtractor {
    pub fn new(
        preprocessor: Preprocessor,
        vocab: Vocabulary,
        providers: Vec<Arc<dyn PolarityProvider>>,
        config: FeatureConfig,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &providers {
            if !seen.insert(p.provider_id().to_string()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate provider id {:?}",
                    p.provider_id()
                )));
            }
        }
        if config.polarity && providers.is_empty() {
            return Err(Error::InvalidArgument(
                "polarity block enabled but no providers configured".into(),
            ));
        }
        let ids: Vec<&str> = providers.iter().map(|p| p.provider_id()).collect();
        let layout = FeatureLayout::new(&vocab, &ids, &config);
        if layout.dim == 0 {
            return Err(Error::InvalidArgument("every feature block is disabled".into()));
        }
        Ok(FeatureExtractor {
            preprocessor,
            vocab,
            providers,
            config,
            layout: Arc::new(layout),
        })
    }

    pub fn layout(&self) -> &Arc<FeatureLayout> {
        &self.layout
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn bags<T: Scalar>(&self, inst: &AspectInstance) -> SparseVector<T> {
        let v = self.vocab.len();
        let mut entries: Vec<(usize, T)> = Vec::new();
        let mut offset = 0;
        let mut add = |terms: Vec<String>| {
            let counts: SparseVector<T> = count_vector(&terms, &self.vocab);
            // Dimensions agree by construction.
            let weights = tfidf_transform(&counts, &self.vocab).expect("vocabulary dimension");
            entries.extend(weights.entries().iter().map(|&(i, w)| (offset + i, w)));
            offset += v;
        };
        if self.config.text_bag {
            add(self.preprocessor.terms(&inst.text));
        }
        if self.config.aspect_bag {
            add(self.preprocessor.terms(&inst.aspect_term));
        }
        SparseVector::from_sorted(self.layout.sparse_dim(), entries)
    }

    fn vector<T: Scalar>(&self, inst: &AspectInstance, scores: &[PolarityScores]) -> FeatureVector<T> {
        let dense = scores
            .iter()
            .flat_map(|s| s.scores.iter().map(|&v| T::from_f64_lossy(v)))
            .collect();
        FeatureVector {
            sparse: self.bags(inst),
            dense,
            layout: Arc::clone(&self.layout),
        }
    }

    fn active_providers(&self) -> &[Arc<dyn PolarityProvider>] {
        if self.config.polarity {
            &self.providers
        } else {
            &[]
        }
    }

    pub fn assemble<T: Scalar>(&self, inst: &AspectInstance) -> Result<FeatureVector<T>> {
        let scores = self
            .active_providers()
            .iter()
            .map(|p| p.score(inst.into()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.vector(inst, &scores))
    }

    /// Assembles many instances, querying each provider in batch mode.
    pub fn assemble_all<T: Scalar>(&self, insts: &[AspectInstance]) -> Result<Vec<FeatureVector<T>>> {
        let queries: Vec<ScoreQuery<'_>> = insts.iter().map(ScoreQuery::from).collect();
        let per_provider: Vec<Vec<PolarityScores>> = self
            .active_providers()
            .iter()
            .map(|p| p.score_batch(&queries).into_iter().collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(insts
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let scores: Vec<PolarityScores> = per_provider.iter().map(|s| s[i].clone()).collect();
                self.vector(inst, &scores)
            })
            .collect())
    }
}

/// One-shot assembly for a single instance.
pub fn assemble_features<T: Scalar>(
    inst: &AspectInstance,
    preprocessor: &Preprocessor,
    vocab: &Vocabulary,
    providers: Vec<Arc<dyn PolarityProvider>>,
    config: &FeatureConfig,
) -> Result<FeatureVector<T>> {
    FeatureExtractor::new(preprocessor.clone(), vocab.clone(), providers, config.clone())?.assemble(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Polarity;

    fn inst(id: &str, text: &str, aspect: &str) -> AspectInstance {
        let byte = text.find(aspect).unwrap();
        let start = text[..byte].chars().count();
        AspectInstance {
            id: id.into(),
            text: text.into(),
            aspect_term: aspect.into(),
            aspect_start: start,
            aspect_end: start + aspect.chars().count(),
            label: Polarity::Positive,
        }
    }

    fn vocab3() -> Vocabulary {
        let docs = vec![vec!["a", "b", "a"], vec!["a", "c"]];
        fit_vocabulary(&docs, &VocabConfig { min_df: 1, max_features: None, use_stemming: false }).unwrap()
    }

    fn provider(lines: &str) -> Arc<dyn PolarityProvider> {
        Arc::new(FileProvider::read(lines.as_bytes(), "c", None).unwrap())
    }

    #[test]
    fn dimension_with_one_provider() {
        let p = provider(r#"{"id":"x","provider_id":"m","scores":[0.7,0.2,0.1]}"#);
        let v: FeatureVector<f64> = assemble_features(
            &inst("x", "a b a", "b"),
            &Preprocessor::default(),
            &vocab3(),
            vec![p],
            &FeatureConfig::default(),
        )
        .unwrap();
        assert_eq!(v.dim(), 9);
        assert_eq!(v.layout.dim, 9);
        assert_eq!(&v.to_dense()[6..], [0.7, 0.2, 0.1]);
        // Aspect bag holds only "b", normalized to 1.
        assert_eq!(v.get(3 + 1), 1.0);
    }

    #[test]
    fn bag_only_ablation() {
        let cfg = FeatureConfig { polarity: false, ..Default::default() };
        let v: FeatureVector<f32> =
            assemble_features(&inst("x", "a c", "c"), &Preprocessor::default(), &vocab3(), vec![], &cfg).unwrap();
        assert_eq!(v.dim(), 6);
        assert!(v.dense.is_empty());
    }

    #[test]
    fn polarity_without_providers_is_rejected() {
        let err = FeatureExtractor::new(Preprocessor::default(), vocab3(), vec![], FeatureConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_provider_ids_rejected() {
        let p = provider(r#"{"id":"x","provider_id":"m","scores":[0.7,0.2,0.1]}"#);
        let err = FeatureExtractor::new(
            Preprocessor::default(),
            vocab3(),
            vec![p.clone(), p],
            FeatureConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn deterministic_and_batch_equivalent() {
        let p = provider(concat!(
            r#"{"id":"x","provider_id":"m","scores":[0.7,0.2,0.1]}"#, "\n",
            r#"{"id":"y","provider_id":"m","scores":[0.1,0.2,0.7]}"#,
        ));
        let fx = FeatureExtractor::new(Preprocessor::default(), vocab3(), vec![p], FeatureConfig::default()).unwrap();
        let xs = [inst("x", "a b", "a"), inst("y", "c a c", "c")];
        let one: FeatureVector<f64> = fx.assemble(&xs[0]).unwrap();
        assert_eq!(one, fx.assemble(&xs[0]).unwrap());
        let all: Vec<FeatureVector<f64>> = fx.assemble_all(&xs).unwrap();
        assert_eq!(all[0], one);
        assert_eq!(all[1], fx.assemble(&xs[1]).unwrap());
        assert!(fx.assemble::<f64>(&inst("z", "a", "a")).is_err());
    }

    #[test]
    fn layout_hash_tracks_blocks() {
        let v = vocab3();
        let full = FeatureLayout::new(&v, &["m"], &FeatureConfig::default());
        let bag = FeatureLayout::new(&v, &["m"], &FeatureConfig { polarity: false, ..Default::default() });
        assert_ne!(full.hash(), bag.hash());
        assert_eq!(full.hash(), FeatureLayout::new(&v, &["m"], &FeatureConfig::default()).hash());
        assert_eq!(full.sparse_dim(), 6);
    }

    #[test]
    fn nonzeros_cover_both_blocks() {
        let p = provider(r#"{"id":"x","provider_id":"m","scores":[0.0,0.4,0.6]}"#);
        let fx = FeatureExtractor::new(Preprocessor::default(), vocab3(), vec![p], FeatureConfig::default()).unwrap();
        let v: FeatureVector<f64> = fx.assemble(&inst("x", "c", "c")).unwrap();
        let nz: Vec<usize> = v.nonzeros().map(|(i, _)| i).collect();
        assert_eq!(nz, [2, 5, 7, 8]);
    }
}
