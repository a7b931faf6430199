//! CART decision tree, multinomial Naive Bayes and model files.

mod matrix;
mod nb;
mod tree;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use matrix::{FeatureMatrix, FeatureRow, RowView};
pub use nb::{fit_nb, predict_nb, NaiveBayesModel};
pub use tree::{best_split, fit_tree, gini, DecisionTree, Node, SplitCandidate, TreeParams};

use crate::corpus::Polarity;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "pabsa-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Tree,
    Nb,
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassifierKind::Tree => "tree",
            ClassifierKind::Nb => "nb",
        })
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(ClassifierKind::Tree),
            "nb" => Ok(ClassifierKind::Nb),
            other => Err(Error::InvalidArgument(format!("unknown classifier {other:?} (expected tree or nb)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Tree(DecisionTree<T>),
    NaiveBayes(NaiveBayesModel<T>),
}

impl<T: Scalar> Model<T> {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::Tree(_) => ClassifierKind::Tree,
            Model::NaiveBayes(_) => ClassifierKind::Nb,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Tree(m) => m.n_features(),
            Model::NaiveBayes(m) => m.n_features(),
        }
    }

    pub fn predict<R: FeatureRow<T> + ?Sized>(&self, x: &R) -> Result<Polarity> {
        match self {
            Model::Tree(m) => m.predict(x),
            Model::NaiveBayes(m) => m.predict(x),
        }
    }

    pub fn predict_batch<R: FeatureRow<T> + Sync>(&self, rows: &[R]) -> Result<Vec<Polarity>> {
        match self {
            Model::Tree(m) => m.predict_batch(rows),
            Model::NaiveBayes(m) => m.predict_batch(rows),
        }
    }
}

/// Self-describing header stored alongside the model body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub kind: ClassifierKind,
    pub scalar: String,
    pub feature_dim: usize,
    pub layout_hash: String,
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    #[serde(flatten)]
    header: ModelHeader,
    model: M,
}

/// Serializes a model to JSON bytes.
pub fn model_to_bytes<T: Scalar>(model: &Model<T>, layout_hash: &str) -> Vec<u8> {
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kind: model.kind(),
        scalar: T::NAME.into(),
        feature_dim: model.n_features(),
        layout_hash: layout_hash.into(),
    };
    let body = match model {
        Model::Tree(m) => serde_json::to_value(m),
        Model::NaiveBayes(m) => serde_json::to_value(m),
    }
    .expect("model serialization is infallible");
    let mut out = serde_json::to_vec(&Envelope { header, model: body }).expect("json value serializes");
    out.push(b'\n');
    out
}

pub fn save_model<T: Scalar>(model: &Model<T>, layout_hash: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(model, layout_hash)).map_err(|e| Error::io(path, e))
}

fn envelope(bytes: &[u8]) -> Result<Envelope<serde_json::Value>> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::Corrupt(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Corrupt("missing version tag".into()))?;
    if version > MODEL_VERSION as u64 {
        return Err(Error::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            supported: MODEL_VERSION,
        });
    }
    if value.get("format").and_then(serde_json::Value::as_str) != Some(MODEL_FORMAT) {
        return Err(Error::Corrupt(format!("not a {MODEL_FORMAT} file")));
    }
    let env: Envelope<serde_json::Value> =
        serde_json::from_value(value).map_err(|e| Error::Corrupt(e.to_string()))?;
    if env.header.version != MODEL_VERSION {
        return Err(Error::Corrupt(format!("unknown version {}", env.header.version)));
    }
    Ok(env)
}

/// Reads only the header, e.g. to pick the scalar type before loading.
pub fn read_model_header(path: impl AsRef<Path>) -> Result<ModelHeader> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(envelope(&bytes)?.header)
}

pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<(Model<T>, ModelHeader)> {
    let env = envelope(bytes)?;
    let header = env.header;
    if header.scalar != T::NAME {
        return Err(Error::InvalidArgument(format!(
            "model stores {} values but {} was requested",
            header.scalar,
            T::NAME
        )));
    }
    let corrupt = |e: serde_json::Error| Error::Corrupt(e.to_string());
    let model = match header.kind {
        ClassifierKind::Tree => {
            let t: DecisionTree<T> = serde_json::from_value(env.model).map_err(corrupt)?;
            t.check().map_err(Error::Corrupt)?;
            Model::Tree(t)
        }
        ClassifierKind::Nb => {
            let m: NaiveBayesModel<T> = serde_json::from_value(env.model).map_err(corrupt)?;
            m.check().map_err(Error::Corrupt)?;
            Model::NaiveBayes(m)
        }
    };
    if model.n_features() != header.feature_dim {
        return Err(Error::Corrupt(format!(
            "header feature_dim {} disagrees with model body {}",
            header.feature_dim,
            model.n_features()
        )));
    }
    Ok((model, header))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<(Model<T>, ModelHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
