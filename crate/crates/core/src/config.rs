//! Experiment configuration, read from TOML.
//!
//! Relative paths are resolved against the directory of the config file.
//! Command-line overrides are applied on top by the caller (flags > file >
//! defaults).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::classifier::{ClassifierKind, TreeParams};
use crate::corpus::Granularity;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FileProvider, PolarityProvider, RemoteProvider, VocabConfig};
use crate::preprocess::{Preprocessor, Stoplist};

/// Environment variable naming the default base URL for remote providers.
pub const POLARITY_URL_ENV: &str = "PABSA_POLARITY_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in comparison tables.
    pub name: String,
    /// Seeds the split and augmentation.
    pub seed: u64,
    pub scalar: ScalarKind,
    pub out: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub split: SplitSection,
    pub preprocess: PreprocessSection,
    pub augment: AugmentSection,
    pub features: FeaturesSection,
    pub classifier: ClassifierSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 42,
            scalar: ScalarKind::F64,
            out: None,
            dataset: DatasetSection::default(),
            split: SplitSection::default(),
            preprocess: PreprocessSection::default(),
            augment: AugmentSection::default(),
            features: FeaturesSection::default(),
            classifier: ClassifierSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub ratio: f64,
    pub granularity: Granularity,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            ratio: 0.8,
            granularity: Granularity::Target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub remove_stopwords: bool,
    /// Custom stopword list; the bundled Persian list is used when absent.
    pub stopwords: Option<PathBuf>,
    pub stemming: bool,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            remove_stopwords: true,
            stopwords: None,
            stemming: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub enabled: bool,
    /// Augment only the training partition (the test side stays untouched).
    pub train_only: bool,
    pub synonyms: Option<PathBuf>,
    pub entities: Option<PathBuf>,
    pub synonym_rate: f64,
    pub entity_rate: f64,
    pub protect_aspect: bool,
    pub copies: usize,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentConfig::default();
        AugmentSection {
            enabled: false,
            train_only: true,
            synonyms: None,
            entities: None,
            synonym_rate: d.synonym_rate,
            entity_rate: d.entity_rate,
            protect_aspect: d.protect_aspect,
            copies: d.copies,
        }
    }
}

impl AugmentSection {
    pub fn to_config(&self, seed: u64) -> AugmentConfig {
        AugmentConfig {
            synonym_rate: self.synonym_rate,
            entity_rate: self.entity_rate,
            seed,
            protect_aspect: self.protect_aspect,
            copies: self.copies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub min_df: usize,
    /// 0 means no cap.
    pub max_features: usize,
    pub text_bag: bool,
    pub aspect_bag: bool,
    pub polarity: bool,
    pub providers: Vec<ProviderSpec>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let v = VocabConfig::default();
        let f = FeatureConfig::default();
        FeaturesSection {
            min_df: v.min_df,
            max_features: v.max_features.unwrap_or(0),
            text_bag: f.text_bag,
            aspect_bag: f.aspect_bag,
            polarity: f.polarity,
            providers: Vec::new(),
        }
    }
}

impl FeaturesSection {
    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            text_bag: self.text_bag,
            aspect_bag: self.aspect_bag,
            polarity: self.polarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderSpec {
    File {
        id: String,
        path: PathBuf,
    },
    Remote {
        id: String,
        /// Falls back to `PABSA_POLARITY_URL`.
        url: Option<String>,
        /// Expected `model_id` reported by the service; defaults to `id`.
        model_id: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
}

fn default_timeout() -> u64 {
    30
}

fn default_batch() -> usize {
    64
}

impl ProviderSpec {
    pub fn id(&self) -> &str {
        match self {
            ProviderSpec::File { id, .. } | ProviderSpec::Remote { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub kind: ClassifierKind,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_impurity_decrease: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let p = TreeParams::default();
        ClassifierSection {
            kind: ClassifierKind::Tree,
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split,
            min_samples_leaf: p.min_samples_leaf,
            min_impurity_decrease: p.min_impurity_decrease,
        }
    }
}

impl ClassifierSection {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            min_impurity_decrease: self.min_impurity_decrease,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    /// Reads a config file; returns the parsed config and the verbatim text.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cfg = Self::parse(&text, base).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to toml")
    }

    pub fn vocab_config(&self) -> VocabConfig {
        VocabConfig {
            min_df: self.features.min_df,
            max_features: (self.features.max_features > 0).then_some(self.features.max_features),
            use_stemming: self.preprocess.stemming,
        }
    }

    /// Checks value ranges, provider id uniqueness and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dataset.path.as_os_str().is_empty() {
            return bad("dataset.path is not set".into());
        }
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return bad(format!("split.ratio {} must lie strictly between 0 and 1", self.split.ratio));
        }
        if self.features.min_df == 0 {
            return bad("features.min_df must be at least 1".into());
        }
        self.classifier.tree_params().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.augment.enabled {
            self.augment.to_config(self.seed).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut ids = HashSet::new();
        for p in &self.features.providers {
            if !ids.insert(p.id()) {
                return bad(format!("duplicate provider id {:?}", p.id()));
            }
        }
        if self.features.polarity && self.features.providers.is_empty() {
            return bad("features.polarity is on but no providers are listed".into());
        }
        let mut must_exist: Vec<(&str, &Path)> = vec![("dataset", &self.dataset.path)];
        if let Some(p) = &self.preprocess.stopwords {
            must_exist.push(("stopword list", p));
        }
        if self.augment.enabled {
            for (what, p) in [("synonym lexicon", &self.augment.synonyms), ("entity dictionary", &self.augment.entities)] {
                match p {
                    Some(p) => must_exist.push((what, p)),
                    None => return bad(format!("augmentation is enabled but no {what} is set")),
                }
            }
        }
        if self.features.polarity {
            for spec in &self.features.providers {
                if let ProviderSpec::File { path, .. } = spec {
                    must_exist.push(("polarity cache", path));
                }
            }
        }
        for (what, p) in must_exist {
            let full = self.resolve(p);
            if !full.is_file() {
                return bad(format!("{what} {} does not exist", full.display()));
            }
        }
        Ok(())
    }

    pub fn preprocessor(&self) -> Result<Preprocessor> {
        let stoplist = if !self.preprocess.remove_stopwords {
            None
        } else if let Some(p) = &self.preprocess.stopwords {
            Some(Stoplist::load(self.resolve(p))?)
        } else {
            Some(Stoplist::persian())
        };
        Ok(Preprocessor::new(stoplist, self.preprocess.stemming))
    }

    /// Opens every provider, in list order. `env_url` is the value of
    /// [`POLARITY_URL_ENV`], used for remote providers without a `url`.
    pub fn providers(&self, env_url: Option<&str>) -> Result<Vec<Arc<dyn PolarityProvider>>> {
        self.features
            .providers
            .iter()
            .map(|spec| -> Result<Arc<dyn PolarityProvider>> {
                match spec {
                    ProviderSpec::File { id, path } => Ok(Arc::new(FileProvider::open_for(self.resolve(path), id)?)),
                    ProviderSpec::Remote {
                        id,
                        url,
                        model_id,
                        timeout_secs,
                        batch_size,
                    } => {
                        let url = url.as_deref().or(env_url).ok_or_else(|| {
                            Error::Config(format!("remote provider {id:?} has no url and {POLARITY_URL_ENV} is unset"))
                        })?;
                        let expected = model_id.as_deref().unwrap_or(id);
                        let p = RemoteProvider::connect(url, expected, Duration::from_secs(*timeout_secs))?
                            .with_batch_size(*batch_size);
                        Ok(Arc::new(p))
                    }
                }
            })
            .collect()
    }
}
