use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{confusion_matrix, metrics, EvalReport, ExperimentEcho};
use crate::augment::{augment_dataset, write_audit, AugmentAudit};
use crate::classifier::{
    fit_nb, fit_tree, load_model, model_to_bytes, ClassifierKind, FeatureMatrix, Model,
};
use crate::config::ExperimentConfig;
use crate::corpus::{load_dataset, split, AspectInstance, Dataset, Polarity};
use crate::error::{Error, Result, Stage, StageExt};
use crate::features::{fit_vocabulary, BlockKind, FeatureExtractor, Vocabulary};
use crate::lexicon::{load_entities, load_synonyms};
use crate::scalar::Scalar;

/// Result of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome<T> {
    pub report: EvalReport,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub model: Model<T>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub predicted: Polarity,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gold: Option<Polarity>,
}

/// Input record for prediction; the label is optional.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnlabeledInstance {
    pub id: String,
    pub text: String,
    pub aspect_term: String,
    pub aspect_start: usize,
    pub aspect_end: usize,
    #[serde(default)]
    pub label: Option<Polarity>,
}

impl UnlabeledInstance {
    /// Features never look at the label, so a missing one is filled with any value.
    fn to_instance(&self) -> Result<AspectInstance> {
        let inst = AspectInstance {
            id: self.id.clone(),
            text: self.text.clone(),
            aspect_term: self.aspect_term.clone(),
            aspect_start: self.aspect_start,
            aspect_end: self.aspect_end,
            label: self.label.unwrap_or(Polarity::Positive),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Vec<Self>> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::parse(&name, i + 1, e))?);
        }
        if out.is_empty() {
            return Err(Error::Empty("no instances to predict"));
        }
        Ok(out)
    }
}

fn digest_ids(train: &Dataset, test: &Dataset) -> String {
    let mut h = Sha256::new();
    for id in train.ids() {
        h.update(id.as_bytes());
        h.update([0]);
    }
    h.update([1]);
    for id in test.ids() {
        h.update(id.as_bytes());
        h.update([0]);
    }
    format!("{:x}", h.finalize())
}

fn augment_side(d: &Dataset, cfg: &ExperimentConfig) -> Result<(Dataset, Vec<AugmentAudit>)> {
    let a = &cfg.augment;
    let (Some(syn), Some(ent)) = (&a.synonyms, &a.entities) else {
        return Err(Error::Config("augmentation needs both a synonym lexicon and an entity dictionary".into()));
    };
    let lex = load_synonyms(cfg.resolve(syn))?;
    let dict = load_entities(cfg.resolve(ent))?;
    augment_dataset(d, &lex, &dict, &a.to_config(cfg.seed))
}

/// Feature extractor for an experiment config around a fitted vocabulary.
pub fn build_extractor(cfg: &ExperimentConfig, vocab: Vocabulary, env_url: Option<&str>) -> Result<FeatureExtractor> {
    let pre = cfg.preprocessor().stage(Stage::Preprocess)?;
    let providers = if cfg.features.polarity {
        cfg.providers(env_url).stage(Stage::Features)?
    } else {
        Vec::new()
    };
    FeatureExtractor::new(pre, vocab, providers, cfg.features.feature_config()).stage(Stage::Features)
}

fn block_name(kind: &BlockKind) -> String {
    match kind {
        BlockKind::TextBag => "text_bag".into(),
        BlockKind::AspectBag => "aspect_bag".into(),
        BlockKind::Polarity { provider_id } => format!("polarity:{provider_id}"),
        BlockKind::Embedding { source } => format!("embedding:{source}"),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_jsonl<S: Serialize>(path: &Path, items: &[S]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn id_lines(d: &Dataset) -> String {
    d.ids().flat_map(|id| [id, "\n"]).collect()
}

/// load -> split -> augment (optional) -> preprocess -> vocabulary (train only)
/// -> features -> train -> evaluate -> write.
///
/// `verbatim` is the original config text, copied into the output directory.
/// Nothing is written when `cfg.out` is `None`. Errors carry the failing stage.
pub fn run_experiment<T: Scalar>(
    cfg: &ExperimentConfig,
    verbatim: Option<&str>,
    env_url: Option<&str>,
) -> Result<ExperimentOutcome<T>> {
    cfg.validate().stage(Stage::Config)?;
    let data = load_dataset(cfg.resolve(&cfg.dataset.path)).stage(Stage::Load)?;
    let (train, test) = split(&data, cfg.split.ratio, cfg.seed, cfg.split.granularity).stage(Stage::Split)?;
    let digest = digest_ids(&train, &test);

    let mut audits = Vec::new();
    let (train_fit, test_eval) = if cfg.augment.enabled {
        let (tr, mut a) = augment_side(&train, cfg).stage(Stage::Augment)?;
        audits.append(&mut a);
        let te = if cfg.augment.train_only {
            test.clone()
        } else {
            let (te, mut a) = augment_side(&test, cfg).stage(Stage::Augment)?;
            audits.append(&mut a);
            te
        };
        (tr, te)
    } else {
        (train.clone(), test.clone())
    };

    let pre = cfg.preprocessor().stage(Stage::Preprocess)?;
    let docs: Vec<Vec<String>> = train_fit.instances().iter().map(|i| pre.terms(&i.text)).collect();
    let vocab = fit_vocabulary(&docs, &cfg.vocab_config()).stage(Stage::Vocabulary)?;

    let extractor = build_extractor(cfg, vocab, env_url)?;
    let x_train = extractor.assemble_all::<T>(train_fit.instances()).stage(Stage::Features)?;
    let x_test = extractor.assemble_all::<T>(test_eval.instances()).stage(Stage::Features)?;
    let layout = extractor.layout().clone();

    let y_train = train_fit.labels();
    let m_train = FeatureMatrix::from_features(&x_train).stage(Stage::Train)?;
    let model = match cfg.classifier.kind {
        ClassifierKind::Tree => Model::Tree(fit_tree(&m_train, &y_train, &cfg.classifier.tree_params()).stage(Stage::Train)?),
        ClassifierKind::Nb => Model::NaiveBayes(fit_nb(&m_train, &y_train).stage(Stage::Train)?),
    };

    let y_test = test_eval.labels();
    let y_pred = model.predict_batch(&x_test).stage(Stage::Evaluate)?;
    let cm = confusion_matrix(&y_test, &y_pred).stage(Stage::Evaluate)?;
    let report = EvalReport {
        name: cfg.name.clone(),
        experiment: ExperimentEcho {
            seed: cfg.seed,
            scalar: T::NAME.into(),
            split_ratio: cfg.split.ratio,
            granularity: cfg.split.granularity,
            split_digest: digest,
            n_train: train.len(),
            n_test: test.len(),
            augmented: cfg.augment.enabled,
            n_train_after_augment: train_fit.len(),
            feature_blocks: layout.blocks.iter().map(|b| block_name(&b.kind)).collect(),
            providers: cfg.features.providers.iter().map(|p| p.id().to_string()).collect(),
            vocabulary_size: extractor.vocabulary().len(),
            feature_dim: layout.dim,
            layout_hash: layout.hash(),
            classifier: cfg.classifier.kind,
            tree_params: (cfg.classifier.kind == ClassifierKind::Tree).then(|| cfg.classifier.tree_params()),
        },
        metrics: metrics(&cm).stage(Stage::Evaluate)?,
    };
    let predictions: Vec<Prediction> = test_eval
        .instances()
        .iter()
        .zip(&y_pred)
        .map(|(i, p)| Prediction {
            id: i.id.clone(),
            predicted: *p,
            gold: Some(i.label),
        })
        .collect();

    if let Some(out) = &cfg.out {
        let out = cfg.resolve(out);
        let write = || -> Result<()> {
            fs::create_dir_all(out.join("split")).map_err(|e| Error::io(&out, e))?;
            write_file(&out.join("report.json"), report.to_json().as_bytes())?;
            write_file(&out.join("report.txt"), report.render().as_bytes())?;
            let resolved = cfg.to_toml();
            write_file(&out.join("config.toml"), verbatim.unwrap_or(&resolved).as_bytes())?;
            write_file(&out.join("config.resolved.toml"), resolved.as_bytes())?;
            write_file(&out.join("split/train_ids.txt"), id_lines(&train).as_bytes())?;
            write_file(&out.join("split/test_ids.txt"), id_lines(&test).as_bytes())?;
            write_file(&out.join("model.json"), &model_to_bytes(&model, &layout.hash()))?;
            let vocab_json = serde_json::to_vec(extractor.vocabulary()).expect("vocabulary serializes");
            write_file(&out.join("vocabulary.json"), &vocab_json)?;
            let layout_json = serde_json::to_vec_pretty(layout.as_ref()).expect("layout serializes");
            write_file(&out.join("layout.json"), &layout_json)?;
            write_jsonl(&out.join("predictions.jsonl"), &predictions)?;
            if cfg.augment.enabled {
                let path = out.join("augment_audit.jsonl");
                let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                write_audit(&audits, BufWriter::new(f)).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        };
        write().stage(Stage::Write)?;
    }

    Ok(ExperimentOutcome {
        report,
        train_ids: train.ids().map(String::from).collect(),
        test_ids: test.ids().map(String::from).collect(),
        model,
        predictions,
    })
}

/// Labels new instances with a saved model. The feature layout rebuilt from
/// `cfg` and the vocabulary must match the one the model was trained with.
pub fn predict_instances<T: Scalar>(
    cfg: &ExperimentConfig,
    model_path: &Path,
    vocab_path: &Path,
    input: &[UnlabeledInstance],
    env_url: Option<&str>,
) -> Result<Vec<Prediction>> {
    let (model, header) = load_model::<T>(model_path).stage(Stage::Predict)?;
    let vocab: Vocabulary = {
        let text = fs::read_to_string(vocab_path).map_err(|e| Error::io(vocab_path, e)).stage(Stage::Load)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(vocab_path.display().to_string(), e.line(), e))
            .stage(Stage::Load)?
    };
    let extractor = build_extractor(cfg, vocab, env_url)?;
    let layout = extractor.layout();
    if layout.dim != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            found: layout.dim,
        }
        .at(Stage::Predict));
    }
    if layout.hash() != header.layout_hash {
        return Err(Error::InvalidArgument(format!(
            "feature layout {} differs from the model's {}",
            layout.hash(),
            header.layout_hash
        ))
        .at(Stage::Predict));
    }
    let insts = input
        .iter()
        .map(UnlabeledInstance::to_instance)
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Load)?;
    let x = extractor.assemble_all::<T>(&insts).stage(Stage::Features)?;
    let pred = model.predict_batch(&x).stage(Stage::Predict)?;
    Ok(input
        .iter()
        .zip(pred)
        .map(|(u, p)| Prediction {
            id: u.id.clone(),
            predicted: p,
            gold: u.label,
        })
        .collect())
}

/// Default location of the vocabulary saved next to a model file.
pub fn sibling_vocabulary(model_path: &Path) -> PathBuf {
    model_path.with_file_name("vocabulary.json")
}
