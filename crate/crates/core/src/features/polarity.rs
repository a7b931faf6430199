//! Polarity-score providers.
//!
//! A provider maps an aspect instance to a 3-way distribution over
//! (positive, neutral, negative). Two backends ship: a precomputed JSON Lines
//! cache and an HTTP client for the scoring service.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::AspectInstance;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on the sum of a score vector.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityScores {
    pub provider_id: String,
    /// Ordered (positive, neutral, negative).
    pub scores: [f64; 3],
}

impl PolarityScores {
    pub fn new(provider_id: impl Into<String>, scores: [f64; 3]) -> Result<Self> {
        let s = PolarityScores {
            provider_id: provider_id.into(),
            scores,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidScores {
            provider: self.provider_id.clone(),
            message,
        };
        if let Some(bad) = self.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(invalid(format!("score {bad} outside [0, 1]")));
        }
        let sum: f64 = self.scores.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid(format!("scores sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// What a provider sees of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreQuery<'a> {
    pub id: &'a str,
    pub text: &'a str,
    pub aspect_term: &'a str,
    pub aspect_span: (usize, usize),
}

impl<'a> From<&'a AspectInstance> for ScoreQuery<'a> {
    fn from(inst: &'a AspectInstance) -> Self {
        ScoreQuery {
            id: &inst.id,
            text: &inst.text,
            aspect_term: &inst.aspect_term,
            aspect_span: inst.aspect_span(),
        }
    }
}

/// Source of polarity scores. Implementations must be deterministic for a
/// fixed input and fixed provider state.
pub trait PolarityProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    fn score(&self, query: ScoreQuery<'_>) -> Result<PolarityScores>;

    /// Scores many queries; results are positional.
    fn score_batch(&self, queries: &[ScoreQuery<'_>]) -> Vec<Result<PolarityScores>> {
        queries.iter().map(|q| self.score(*q)).collect()
    }
}

fn provider_error(provider: &str, id: &str, e: impl std::fmt::Display) -> Error {
    Error::Provider {
        provider: provider.to_string(),
        id: id.to_string(),
        message: e.to_string(),
    }
}

/// Concatenated score blocks, one per provider in list order.
pub fn polarity_features<T: Scalar>(
    inst: &AspectInstance,
    providers: &[&dyn PolarityProvider],
) -> Result<Vec<T>> {
    if providers.is_empty() {
        return Err(Error::InvalidArgument("no polarity providers".into()));
    }
    let mut block = Vec::with_capacity(3 * providers.len());
    for p in providers {
        let s = p.score(inst.into())?;
        block.extend(s.scores.iter().map(|&v| T::from_f64_lossy(v)));
    }
    Ok(block)
}

/// One line of a polarity cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub id: String,
    pub provider_id: String,
    pub scores: [f64; 3],
}

/// Writes score records in cache-file format.
pub fn write_cache(records: &[CacheRecord], mut w: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Provider answering from a precomputed cache keyed by instance id.
#[derive(Debug, Clone)]
pub struct FileProvider {
    provider_id: String,
    scores: HashMap<String, [f64; 3]>,
}

impl FileProvider {
    /// Opens a cache holding records of a single provider.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::load(path.as_ref(), None)
    }

    /// Opens a cache that may mix providers, keeping only `provider_id`.
    pub fn open_for(path: impl AsRef<Path>, provider_id: &str) -> Result<Self> {
        Self::load(path.as_ref(), Some(provider_id))
    }

    fn load(path: &Path, only: Option<&str>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), &path.display().to_string(), only)
    }

    pub fn read(reader: impl BufRead, source_name: &str, only: Option<&str>) -> Result<Self> {
        let mut provider_id: Option<String> = only.map(str::to_string);
        let mut scores = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::parse(source_name, line_no, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CacheRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(source_name, line_no, format!("malformed cache line: {e}")))?;
            match (&provider_id, only) {
                (Some(_), Some(want)) if rec.provider_id != want => continue,
                (Some(have), None) if *have != rec.provider_id => {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!(
                            "cache mixes providers {have:?} and {:?}; select one explicitly",
                            rec.provider_id
                        ),
                    ))
                }
                (None, _) => provider_id = Some(rec.provider_id.clone()),
                _ => {}
            }
            PolarityScores::new(rec.provider_id.as_str(), rec.scores)
                .map_err(|e| Error::parse(source_name, line_no, e))?;
            if scores.insert(rec.id.clone(), rec.scores).is_some() {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("duplicate cache entry for {:?}", rec.id),
                ));
            }
        }
        let provider_id = provider_id
            .ok_or_else(|| Error::parse(source_name, 0, "cache holds no records"))?;
        Ok(FileProvider { provider_id, scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl PolarityProvider for FileProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn score(&self, query: ScoreQuery<'_>) -> Result<PolarityScores> {
        let scores = self
            .scores
            .get(query.id)
            .ok_or_else(|| provider_error(&self.provider_id, query.id, "no cache entry"))?;
        Ok(PolarityScores {
            provider_id: self.provider_id.clone(),
            scores: *scores,
        })
    }
}

/// Request body of the scoring service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<String>,
    pub text: String,
    pub aspect_term: String,
    pub aspect_start: usize,
    pub aspect_end: usize,
}

impl From<ScoreQuery<'_>> for ScoreRequest {
    fn from(q: ScoreQuery<'_>) -> Self {
        ScoreRequest {
            id: Some(q.id.to_string()),
            text: q.text.to_string(),
            aspect_term: q.aspect_term.to_string(),
            aspect_start: q.aspect_span.0,
            aspect_end: q.aspect_span.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
}

/// Response body of the scoring service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub model_id: String,
    pub scores: LabelScores,
}

/// One element of a batch response: a score or a positional error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchItem {
    Ok(ScoreResponse),
    Err { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
}

/// HTTP client for the scoring service.
///
/// Every response is re-validated against the score invariants; nothing is
/// renormalized on the client side.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    base_url: String,
    model_id: String,
    agent: ureq::Agent,
    batch_size: usize,
}

impl RemoteProvider {
    /// Connects and checks `GET /v1/health` reports `model_id`.
    pub fn connect(base_url: &str, model_id: &str, timeout: Duration) -> Result<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let provider = RemoteProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            model_id: model_id.to_string(),
            agent,
            batch_size: 64,
        };
        let health = provider.health()?;
        if health.model_id != model_id {
            return Err(Error::Transport(format!(
                "service at {} serves {:?}, expected {model_id:?}",
                provider.base_url, health.model_id
            )));
        }
        Ok(provider)
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn health(&self) -> Result<Health> {
        let url = format!("{}/v1/health", self.base_url);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| Error::Transport(format!("GET {url}: {e}")))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(Error::Transport(format!("GET {url}: HTTP {status}")));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| Error::Transport(format!("GET {url}: {e}")))
    }

    fn check(&self, id: &str, resp: ScoreResponse) -> Result<PolarityScores> {
        if resp.model_id != self.model_id {
            return Err(provider_error(
                &self.model_id,
                id,
                format!("response from model {:?}", resp.model_id),
            ));
        }
        let s = resp.scores;
        PolarityScores::new(self.model_id.as_str(), [s.positive, s.neutral, s.negative])
            .map_err(|e| provider_error(&self.model_id, id, e))
    }

    /// `Ok(None)` when the service has no batch endpoint.
    fn post_batch(&self, queries: &[ScoreQuery<'_>]) -> Result<Option<Vec<BatchItem>>> {
        let url = format!("{}/v1/polarity:batch", self.base_url);
        let body: Vec<ScoreRequest> = queries.iter().map(|q| (*q).into()).collect();
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        match resp.status().as_u16() {
            200 => {}
            404 | 405 => return Ok(None),
            other => return Err(Error::Transport(format!("POST {url}: HTTP {other}"))),
        }
        let items: Vec<BatchItem> = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        if items.len() != queries.len() {
            return Err(Error::Transport(format!(
                "POST {url}: {} results for {} requests",
                items.len(),
                queries.len()
            )));
        }
        Ok(Some(items))
    }
}

impl PolarityProvider for RemoteProvider {
    fn provider_id(&self) -> &str {
        &self.model_id
    }

    fn score(&self, query: ScoreQuery<'_>) -> Result<PolarityScores> {
        let url = format!("{}/v1/polarity", self.base_url);
        let fail = |e: String| provider_error(&self.model_id, query.id, e);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(ScoreRequest::from(query))
            .map_err(|e| fail(format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(fail(format!("POST {url}: HTTP {status} {body}")));
        }
        let parsed: ScoreResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| fail(format!("POST {url}: {e}")))?;
        self.check(query.id, parsed)
    }

    fn score_batch(&self, queries: &[ScoreQuery<'_>]) -> Vec<Result<PolarityScores>> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(self.batch_size) {
            match self.post_batch(chunk) {
                Ok(Some(items)) => {
                    for (q, item) in chunk.iter().zip(items) {
                        out.push(match item {
                            BatchItem::Ok(r) => self.check(q.id, r),
                            BatchItem::Err { error } => Err(provider_error(&self.model_id, q.id, error)),
                        });
                    }
                }
                Ok(None) => out.extend(chunk.iter().map(|q| self.score(*q))),
                Err(e) => {
                    let msg = e.to_string();
                    out.extend(chunk.iter().map(|q| Err(provider_error(&self.model_id, q.id, &msg))));
                }
            }
        }
        out
    }
}
