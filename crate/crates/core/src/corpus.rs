//! Aspect-annotated datasets: loading, validation, statistics and seeded splits.
//!
//! The on-disk format is JSON Lines, one record per line:
//!
//! ```text
//! {"id":"c1-t1","text":"...","aspect_term":"...","aspect_start":4,"aspect_end":9,"label":"positive"}
//! ```
//!
//! Offsets are half-open and count Unicode scalar values.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{normalize, tokenize};
use crate::rng::SeededRng;

/// Sentiment label with a fixed integer encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive = 0,
    Neutral = 1,
    Negative = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Polarity> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "neutral" => Ok(Polarity::Neutral),
            "negative" => Ok(Polarity::Negative),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

/// One labelled aspect target inside a comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectInstance {
    pub id: String,
    pub text: String,
    pub aspect_term: String,
    pub aspect_start: usize,
    pub aspect_end: usize,
    pub label: Polarity,
}

/// Substring by character offsets; `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[from..to])
}

impl AspectInstance {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidInstance {
            id: self.id.clone(),
            message,
        };
        if self.aspect_start >= self.aspect_end {
            return Err(invalid(format!(
                "empty or inverted aspect span {}..{}",
                self.aspect_start, self.aspect_end
            )));
        }
        let len = self.text.chars().count();
        if self.aspect_end > len {
            return Err(invalid(format!(
                "aspect_end {} exceeds text length {len}",
                self.aspect_end
            )));
        }
        let slice = char_slice(&self.text, self.aspect_start, self.aspect_end).unwrap_or_default();
        if slice != self.aspect_term {
            return Err(invalid(format!(
                "text[{}..{}] is {slice:?}, aspect_term is {:?}",
                self.aspect_start, self.aspect_end, self.aspect_term
            )));
        }
        Ok(())
    }

    pub fn aspect_span(&self) -> (usize, usize) {
        (self.aspect_start, self.aspect_end)
    }
}

/// Instances sharing one identical comment text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    /// Indices into [`Dataset::instances`], ascending.
    pub members: Vec<usize>,
}

/// An ordered, validated collection of aspect instances.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    instances: Vec<AspectInstance>,
    comments: Vec<Comment>,
}

impl Dataset {
    /// Validates every instance and id uniqueness, then groups by comment text.
    pub fn new(instances: Vec<AspectInstance>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            inst.validate()?;
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::DuplicateId(inst.id.clone()));
            }
        }
        Ok(Self::grouped(instances))
    }

    fn grouped(instances: Vec<AspectInstance>) -> Self {
        let mut by_text: HashMap<&str, usize> = HashMap::new();
        let mut comments: Vec<Comment> = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            let slot = *by_text.entry(inst.text.as_str()).or_insert_with(|| {
                comments.push(Comment { members: Vec::new() });
                comments.len() - 1
            });
            comments[slot].members.push(i);
        }
        Dataset { instances, comments }
    }

    pub fn instances(&self) -> &[AspectInstance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<AspectInstance> {
        self.instances
    }

    /// Comment groups in order of first appearance.
    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.instances.iter().map(|i| i.id.as_str())
    }

    pub fn labels(&self) -> Vec<Polarity> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Parses JSON Lines. Blank lines are skipped; line numbers are 1-based.
    pub fn read(reader: impl BufRead, source_name: &str) -> Result<Self> {
        let mut instances = Vec::new();
        let mut ids = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::parse(source_name, line_no, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RawRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(source_name, line_no, format!("malformed record: {e}")))?;
            let label = record
                .label
                .parse::<Polarity>()
                .map_err(|e| Error::parse(source_name, line_no, e))?;
            let inst = AspectInstance {
                id: record.id,
                text: record.text,
                aspect_term: record.aspect_term,
                aspect_start: record.aspect_start,
                aspect_end: record.aspect_end,
                label,
            };
            inst.validate().map_err(|e| Error::parse(source_name, line_no, e))?;
            if !ids.insert(inst.id.clone()) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    Error::DuplicateId(inst.id.clone()),
                ));
            }
            instances.push(inst);
        }
        Ok(Self::grouped(instances))
    }

    pub fn write(&self, mut writer: impl Write) -> std::io::Result<()> {
        for inst in &self.instances {
            serde_json::to_writer(&mut writer, inst)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    aspect_term: String,
    aspect_start: usize,
    aspect_end: usize,
    label: String,
}

/// Loads a JSON Lines dataset file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::read(BufReader::new(file), &path.display().to_string())
}

/// Corpus-level counts. Token and length figures are over distinct comments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_targets: usize,
    pub n_positive: usize,
    pub n_neutral: usize,
    pub n_negative: usize,
    pub n_tokens: usize,
    pub n_unique_words: usize,
    pub n_comments: usize,
    pub avg_words_per_comment: f64,
    pub text_len_avg: f64,
    pub text_len_max: usize,
    pub text_len_min: usize,
}

impl CorpusStats {
    /// `n_tokens / n_comments` without rounding.
    pub fn avg_words_exact(&self) -> Ratio<u64> {
        Ratio::new(self.n_tokens as u64, self.n_comments as u64)
    }

    /// Proportion of each class among targets, in encoding order.
    pub fn class_shares(&self) -> [f64; 3] {
        let n = self.n_targets as f64;
        [
            self.n_positive as f64 / n,
            self.n_neutral as f64 / n,
            self.n_negative as f64 / n,
        ]
    }

    /// Two-table text rendering (properties, then distribution/length details).
    pub fn render(&self) -> String {
        let pct = self.class_shares();
        let mut out = String::new();
        out.push_str("Property                         Value\n");
        out.push_str("-------------------------------  ----------\n");
        let rows: [(&str, String); 8] = [
            ("Number of sentiment targets", self.n_targets.to_string()),
            ("Positive polarity targets", self.n_positive.to_string()),
            ("Negative polarity targets", self.n_negative.to_string()),
            ("Neutral polarity targets", self.n_neutral.to_string()),
            ("Total number of tokens", self.n_tokens.to_string()),
            ("Unique words", self.n_unique_words.to_string()),
            ("Total number of comments", self.n_comments.to_string()),
            ("Average words per comment", format!("{:.2}", self.avg_words_per_comment)),
        ];
        for (k, v) in rows {
            out.push_str(&format!("{k:<31}  {v}\n"));
        }
        out.push('\n');
        out.push_str("Statistics       Information\n");
        out.push_str("---------------  ----------------------------\n");
        out.push_str(&format!("{:<15}  {}\n", "Total Samples", self.n_comments));
        out.push_str(&format!("{:<15}  {}\n", "Total Aspects", self.n_targets));
        out.push_str(&format!("{:<15}  {} ({:.1}%)\n", "Positive", self.n_positive, pct[0] * 100.0));
        out.push_str(&format!("{:<15}  {} ({:.1}%)\n", "Neutral", self.n_neutral, pct[1] * 100.0));
        out.push_str(&format!("{:<15}  {} ({:.1}%)\n", "Negative", self.n_negative, pct[2] * 100.0));
        out.push_str(&format!(
            "{:<15}  Avg: {:.2}, Max: {}, Min: {}\n",
            "Text Length", self.text_len_avg, self.text_len_max, self.text_len_min
        ));
        out
    }
}

/// Computes corpus statistics. Token counts use [`tokenize`] over the
/// normalized text of each distinct comment (punctuation tokens included);
/// text lengths are character counts of the raw comment text.
pub fn dataset_stats(d: &Dataset) -> Result<CorpusStats> {
    if d.is_empty() {
        return Err(Error::Empty("dataset has no comments; averages are undefined"));
    }
    let mut counts = [0usize; 3];
    for inst in d.instances() {
        counts[inst.label.index()] += 1;
    }

    let mut n_tokens = 0;
    let mut vocab: HashSet<String> = HashSet::new();
    let mut len_sum = 0usize;
    let mut len_max = 0usize;
    let mut len_min = usize::MAX;
    for comment in d.comments() {
        let text = &d.instances[comment.members[0]].text;
        let tokens = tokenize(&normalize(text));
        n_tokens += tokens.len();
        vocab.extend(tokens.into_iter().map(|t| t.surface));
        let len = text.chars().count();
        len_sum += len;
        len_max = len_max.max(len);
        len_min = len_min.min(len);
    }
    let n_comments = d.comments().len();
    Ok(CorpusStats {
        n_targets: d.len(),
        n_positive: counts[0],
        n_neutral: counts[1],
        n_negative: counts[2],
        n_tokens,
        n_unique_words: vocab.len(),
        n_comments,
        avg_words_per_comment: n_tokens as f64 / n_comments as f64,
        text_len_avg: len_sum as f64 / n_comments as f64,
        text_len_max: len_max,
        text_len_min: len_min,
    })
}

/// Unit that a split shuffles and assigns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Individual aspect targets.
    #[default]
    Target,
    /// Whole comments, keeping all of a comment's targets together.
    Comment,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(Granularity::Target),
            "comment" => Ok(Granularity::Comment),
            other => Err(Error::InvalidArgument(format!(
                "unknown granularity {other:?} (expected target or comment)"
            ))),
        }
    }
}

/// Number of units on the training side: `floor(ratio * n)`.
///
/// A 1e-9 slack absorbs binary representation error, so a ratio written as
/// 0.29 over 100 units gives 29 rather than 28.
pub fn train_size(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Seeded train/test partition.
///
/// Units (targets or comments) are listed in dataset order, shuffled with
/// Fisher-Yates under SplitMix64(`seed`), and the first `train_size` units go
/// to training. Both sides keep the original dataset order of instances.
pub fn split(
    d: &Dataset,
    train_ratio: f64,
    seed: u64,
    granularity: Granularity,
) -> Result<(Dataset, Dataset)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train ratio {train_ratio} is outside (0, 1)"
        )));
    }
    if d.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset"));
    }

    let units: Vec<Vec<usize>> = match granularity {
        Granularity::Target => (0..d.len()).map(|i| vec![i]).collect(),
        Granularity::Comment => d.comments.iter().map(|c| c.members.clone()).collect(),
    };
    let n_train = train_size(train_ratio, units.len());
    if n_train == 0 || n_train == units.len() {
        return Err(Error::InvalidArgument(format!(
            "ratio {train_ratio} over {} units leaves one side empty",
            units.len()
        )));
    }

    let mut order: Vec<usize> = (0..units.len()).collect();
    SeededRng::new(seed).shuffle(&mut order);

    let mut in_train = vec![false; d.len()];
    for &u in &order[..n_train] {
        for &i in &units[u] {
            in_train[i] = true;
        }
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(d.len() - n_train);
    for (inst, t) in d.instances.iter().zip(in_train) {
        if t {
            train.push(inst.clone());
        } else {
            test.push(inst.clone());
        }
    }
    Ok((Dataset::grouped(train), Dataset::grouped(test)))
}
