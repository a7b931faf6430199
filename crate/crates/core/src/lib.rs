//! Aspect-based sentiment analysis for Persian text: normalization and
//! tokenization, dictionary-driven augmentation, hybrid TF-IDF plus
//! polarity-score features, a CART decision tree and an evaluation harness.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the width for common use.

pub mod augment;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod lexicon;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod synth;

pub use corpus::{AspectInstance, Dataset, Polarity};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SparseVector64 = features::SparseVector<f64>;
pub type SparseVector32 = features::SparseVector<f32>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type FeatureMatrix64 = classifier::FeatureMatrix<f64>;
pub type FeatureMatrix32 = classifier::FeatureMatrix<f32>;
pub type DecisionTree64 = classifier::DecisionTree<f64>;
pub type DecisionTree32 = classifier::DecisionTree<f32>;
pub type NaiveBayes64 = classifier::NaiveBayesModel<f64>;
pub type NaiveBayes32 = classifier::NaiveBayesModel<f32>;
pub type Model64 = classifier::Model<f64>;
pub type Model32 = classifier::Model<f32>;
