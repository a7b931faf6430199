use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pabsa::augment::{augment_dataset, write_audit};
use pabsa::classifier::{read_model_header, ClassifierKind};
use pabsa::config::{ExperimentConfig, ScalarKind, POLARITY_URL_ENV};
use pabsa::corpus::{dataset_stats, load_dataset, split, Granularity};
use pabsa::eval::{compare, predict_instances, run_experiment, sibling_vocabulary, EvalReport, UnlabeledInstance};
use pabsa::lexicon::{load_entities, load_synonyms};
use pabsa::Scalar;

#[derive(Parser)]
#[command(name = "pabsa", version, about = "Aspect-based sentiment analysis toolkit for Persian text")]
struct Cli {
    /// Experiment config (TOML). Command-line flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Random seed for splitting and augmentation [default: 42]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file or directory, depending on the command.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Base URL for remote polarity providers that do not set one.
    #[arg(long, global = true, env = POLARITY_URL_ENV, value_name = "URL")]
    polarity_url: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dataset statistics.
    Stats(StatsArgs),
    /// Split a dataset into train.jsonl and test.jsonl.
    Split(SplitArgs),
    /// Write an augmented dataset and a replacement audit.
    Augment(AugmentArgs),
    /// Run an experiment described by --config.
    Run(RunArgs),
    /// Render a comparison table over report files.
    Compare(CompareArgs),
    /// Label instances with a trained model.
    Predict(PredictArgs),
}

#[derive(Args)]
struct StatsArgs {
    /// Dataset (JSONL); defaults to the config's dataset.
    dataset: Option<PathBuf>,
    /// Print JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SplitArgs {
    dataset: Option<PathBuf>,
    /// Training share [default: 0.8]
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long, value_enum)]
    granularity: Option<GranularityArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Target,
    Comment,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Target => Granularity::Target,
            GranularityArg::Comment => Granularity::Comment,
        }
    }
}

#[derive(Args)]
struct AugmentArgs {
    dataset: Option<PathBuf>,
    /// Synonym lexicon (TSV).
    #[arg(long)]
    synonyms: Option<PathBuf>,
    /// Entity dictionary (TSV).
    #[arg(long)]
    entities: Option<PathBuf>,
    #[arg(long)]
    synonym_rate: Option<f64>,
    #[arg(long)]
    entity_rate: Option<f64>,
    #[arg(long)]
    copies: Option<usize>,
    /// Allow replacements inside the aspect span.
    #[arg(long)]
    no_protect_aspect: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    scalar: Option<ScalarArg>,
    #[arg(long, value_enum)]
    classifier: Option<ClassifierArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalarArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Tree,
    Nb,
}

#[derive(Args)]
struct CompareArgs {
    /// report.json files.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `run`.
    #[arg(long)]
    model: PathBuf,
    /// Instances to label (JSONL; `label` optional).
    #[arg(long)]
    input: PathBuf,
    /// Vocabulary file [default: vocabulary.json next to the model]
    #[arg(long)]
    vocabulary: Option<PathBuf>,
}

struct Ctx {
    config: Option<(ExperimentConfig, String)>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    polarity_url: Option<String>,
}

impl Ctx {
    fn cfg(&self) -> Option<&ExperimentConfig> {
        self.config.as_ref().map(|c| &c.0)
    }

    fn require_cfg(&self, command: &str) -> Result<&(ExperimentConfig, String)> {
        self.config
            .as_ref()
            .with_context(|| format!("`{command}` needs --config"))
    }

    fn seed(&self) -> u64 {
        self.seed.or(self.cfg().map(|c| c.seed)).unwrap_or(42)
    }

    fn dataset(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p);
        }
        match self.cfg() {
            Some(c) if !c.dataset.path.as_os_str().is_empty() => Ok(c.resolve(&c.dataset.path)),
            _ => bail!("no dataset given (pass a path or --config)"),
        }
    }

    /// Config-relative path, for values that came from the config file.
    fn config_path(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        let c = self.cfg()?;
        p.as_ref().map(|p| c.resolve(p))
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))
}

fn cmd_stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let path = ctx.dataset(a.dataset)?;
    let stats = dataset_stats(&load_dataset(&path)?)?;
    let text = if a.json {
        serde_json::to_string_pretty(&stats)? + "\n"
    } else {
        stats.render()
    };
    emit(ctx.out.as_deref(), text.as_bytes())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut so = io::stdout().lock();
            so.write_all(bytes)?;
            so.flush()?;
            Ok(())
        }
    }
}

fn cmd_split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let path = ctx.dataset(a.dataset)?;
    let ratio = a.ratio.or(ctx.cfg().map(|c| c.split.ratio)).unwrap_or(0.8);
    let granularity = a
        .granularity
        .map(Granularity::from)
        .or(ctx.cfg().map(|c| c.split.granularity))
        .unwrap_or_default();
    let out = ctx.out.clone().context("`split` needs --out <dir>")?;
    let (train, test) = split(&load_dataset(&path)?, ratio, ctx.seed(), granularity)?;
    create_dir(&out)?;
    train.save(out.join("train.jsonl"))?;
    test.save(out.join("test.jsonl"))?;
    eprintln!("{} train / {} test -> {}", train.len(), test.len(), out.display());
    Ok(())
}

fn cmd_augment(ctx: &Ctx, a: AugmentArgs) -> Result<()> {
    let path = ctx.dataset(a.dataset)?;
    let section = ctx.cfg().map(|c| c.augment.clone()).unwrap_or_default();
    let synonyms = a
        .synonyms
        .or_else(|| ctx.config_path(&section.synonyms))
        .context("no synonym lexicon (pass --synonyms or set augment.synonyms)")?;
    let entities = a
        .entities
        .or_else(|| ctx.config_path(&section.entities))
        .context("no entity dictionary (pass --entities or set augment.entities)")?;
    let mut cfg = section.to_config(ctx.seed());
    cfg.synonym_rate = a.synonym_rate.unwrap_or(cfg.synonym_rate);
    cfg.entity_rate = a.entity_rate.unwrap_or(cfg.entity_rate);
    cfg.copies = a.copies.unwrap_or(cfg.copies);
    if a.no_protect_aspect {
        cfg.protect_aspect = false;
    }
    let out = ctx.out.clone().context("`augment` needs --out <dir>")?;

    let data = load_dataset(&path)?;
    let lex = load_synonyms(&synonyms)?;
    let dict = load_entities(&entities)?;
    let (augmented, audits) = augment_dataset(&data, &lex, &dict, &cfg)?;
    create_dir(&out)?;
    augmented.save(out.join("augmented.jsonl"))?;
    let audit_path = out.join("audit.jsonl");
    let f = File::create(&audit_path).with_context(|| format!("cannot write {}", audit_path.display()))?;
    write_audit(&audits, BufWriter::new(f))?;
    eprintln!("{} instances ({} new) -> {}", augmented.len(), augmented.len() - data.len(), out.display());
    Ok(())
}

fn cmd_run(ctx: &Ctx, a: RunArgs) -> Result<()> {
    let (cfg, text) = ctx.require_cfg("run")?;
    let mut cfg = cfg.clone();
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &ctx.out {
        cfg.out = Some(std::path::absolute(out)?);
    }
    if cfg.out.is_none() {
        cfg.out = Some(std::path::absolute(Path::new("runs").join(&cfg.name))?);
    }
    match a.scalar {
        Some(ScalarArg::F32) => cfg.scalar = ScalarKind::F32,
        Some(ScalarArg::F64) => cfg.scalar = ScalarKind::F64,
        None => {}
    }
    match a.classifier {
        Some(ClassifierArg::Tree) => cfg.classifier.kind = ClassifierKind::Tree,
        Some(ClassifierArg::Nb) => cfg.classifier.kind = ClassifierKind::Nb,
        None => {}
    }
    let url = ctx.polarity_url.as_deref();
    let report = match cfg.scalar {
        ScalarKind::F32 => run_experiment::<f32>(&cfg, Some(text), url)?.report,
        ScalarKind::F64 => run_experiment::<f64>(&cfg, Some(text), url)?.report,
    };
    let out = cfg.resolve(cfg.out.as_deref().expect("set above"));
    eprintln!("report written to {}", out.join("report.json").display());
    print!("{}", report.render());
    Ok(())
}

fn cmd_compare(ctx: &Ctx, a: CompareArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(EvalReport::load)
        .collect::<pabsa::Result<Vec<_>>>()?;
    emit(ctx.out.as_deref(), compare(&reports).as_bytes())
}

fn predict_with<T: Scalar>(ctx: &Ctx, cfg: &ExperimentConfig, a: &PredictArgs, vocab: &Path) -> Result<()> {
    let input = UnlabeledInstance::read(&a.input)?;
    let preds = predict_instances::<T>(cfg, &a.model, vocab, &input, ctx.polarity_url.as_deref())?;
    let mut buf = Vec::new();
    for p in preds {
        serde_json::to_writer(&mut buf, &p)?;
        buf.push(b'\n');
    }
    emit(ctx.out.as_deref(), &buf)
}

fn cmd_predict(ctx: &Ctx, a: PredictArgs) -> Result<()> {
    let (cfg, _) = ctx.require_cfg("predict")?;
    let vocab = a.vocabulary.clone().unwrap_or_else(|| sibling_vocabulary(&a.model));
    let header = read_model_header(&a.model)?;
    match header.scalar.as_str() {
        "f32" => predict_with::<f32>(ctx, cfg, &a, &vocab),
        "f64" => predict_with::<f64>(ctx, cfg, &a, &vocab),
        other => bail!("model uses unsupported scalar type {other:?}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        let config = cli.config.as_ref().map(ExperimentConfig::load).transpose()?;
        let ctx = Ctx {
            config,
            seed: cli.seed,
            out: cli.out,
            polarity_url: cli.polarity_url,
        };
        match cli.command {
            Command::Stats(a) => cmd_stats(&ctx, a),
            Command::Split(a) => cmd_split(&ctx, a),
            Command::Augment(a) => cmd_augment(&ctx, a),
            Command::Run(a) => cmd_run(&ctx, a),
            Command::Compare(a) => cmd_compare(&ctx, a),
            Command::Predict(a) => cmd_predict(&ctx, a),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Core errors already embed their cause in the message.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
