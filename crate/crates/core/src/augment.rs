//! Label-preserving augmentation by synonym and entity replacement.
//!
//! Each pass tokenizes the instance text, looks candidates up by their
//! normalized (unstemmed) surface, and replaces them under a seeded
//! generator. Replacements are recorded in an [`AugmentAudit`] whose spans
//! refer to the source text, so replaying the audit reproduces the output.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, AspectInstance, Dataset};
use crate::error::{Error, Result};
use crate::lexicon::{match_key, EntityDictionary, SynonymLexicon};
use crate::preprocess::{normalize, tokenize, Token};
use crate::rng::{derive_seed, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Replacement probability per eligible token.
    pub synonym_rate: f64,
    /// Replacement probability per matched entity.
    pub entity_rate: f64,
    pub seed: u64,
    pub protect_aspect: bool,
    /// Augmented variants generated per source instance.
    pub copies: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            synonym_rate: 0.1,
            entity_rate: 0.1,
            seed: 42,
            protect_aspect: true,
            copies: 1,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [("synonym_rate", self.synonym_rate), ("entity_rate", self.entity_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidArgument(format!("{name} {rate} is outside [0, 1]")));
            }
        }
        if self.copies == 0 {
            return Err(Error::InvalidArgument("copies must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementKind {
    Synonym,
    Entity,
}

impl fmt::Display for ReplacementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReplacementKind::Synonym => "synonym",
            ReplacementKind::Entity => "entity",
        })
    }
}

/// One substitution over the half-open character span `start..end` of the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub start: usize,
    pub end: usize,
    pub original: String,
    pub replacement: String,
    pub kind: ReplacementKind,
}

impl Replacement {
    fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }

    fn growth(&self) -> isize {
        self.replacement.chars().count() as isize - (self.end - self.start) as isize
    }
}

/// Replacements applied to produce one augmented instance.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AugmentAudit {
    pub instance_id: String,
    pub source_id: String,
    /// Sorted by start, non-overlapping.
    pub replacements: Vec<Replacement>,
}

#[derive(Serialize)]
struct AuditLine<'a> {
    instance_id: &'a str,
    source_id: &'a str,
    span: [usize; 2],
    original: &'a str,
    replacement: &'a str,
    kind: ReplacementKind,
}

/// Writes one JSON line per replacement.
pub fn write_audit(audits: &[AugmentAudit], mut w: impl Write) -> std::io::Result<()> {
    for audit in audits {
        for r in &audit.replacements {
            let line = AuditLine {
                instance_id: &audit.instance_id,
                source_id: &audit.source_id,
                span: [r.start, r.end],
                original: &r.original,
                replacement: &r.replacement,
                kind: r.kind,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()
}

fn disjoint(token: &Token, span: (usize, usize)) -> bool {
    token.end <= span.0 || token.start >= span.1
}

fn shifted(pos: usize, by: isize) -> usize {
    (pos as isize + by) as usize
}

/// Applies sorted, non-overlapping replacements and moves the aspect span.
///
/// A span boundary falling strictly inside a replaced region snaps outward to
/// that region's new edge, so the aspect always covers whole replacements.
fn apply(inst: &AspectInstance, replacements: &[Replacement], new_id: String) -> AspectInstance {
    let chars: Vec<char> = inst.text.chars().collect();
    let mut text = String::with_capacity(inst.text.len());
    let mut cursor = 0;
    for r in replacements {
        text.extend(&chars[cursor..r.start]);
        text.push_str(&r.replacement);
        cursor = r.end;
    }
    text.extend(&chars[cursor..]);

    let map = |pos: usize, is_end: bool| -> usize {
        let mut delta = 0isize;
        for r in replacements {
            if r.end <= pos {
                delta += r.growth();
            } else if r.start < pos {
                let new_start = shifted(r.start, delta);
                return if is_end {
                    new_start + r.replacement.chars().count()
                } else {
                    new_start
                };
            } else {
                break;
            }
        }
        shifted(pos, delta)
    };
    let aspect_start = map(inst.aspect_start, false);
    let aspect_end = map(inst.aspect_end, true);
    let aspect_term = char_slice(&text, aspect_start, aspect_end)
        .unwrap_or_default()
        .to_string();

    AspectInstance {
        id: new_id,
        text,
        aspect_term,
        aspect_start,
        aspect_end,
        label: inst.label,
    }
}

fn eligible(inst: &AspectInstance, protect_aspect: bool, blocked: &[Replacement], start: usize, end: usize) -> bool {
    let probe = Token {
        surface: String::new(),
        start,
        end,
        is_punct: false,
    };
    (!protect_aspect || disjoint(&probe, inst.aspect_span()))
        && !blocked.iter().any(|b| b.overlaps(start, end))
}

fn plan_synonyms(
    inst: &AspectInstance,
    lex: &SynonymLexicon,
    rate: f64,
    seed: u64,
    protect_aspect: bool,
    blocked: &[Replacement],
) -> Vec<Replacement> {
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::new();
    for token in tokenize(&inst.text) {
        if token.is_punct || !eligible(inst, protect_aspect, blocked, token.start, token.end) {
            continue;
        }
        let synonyms = lex.lookup_normalized(&normalize(&token.surface));
        if synonyms.is_empty() {
            continue;
        }
        if rng.chance(rate) {
            let pick = &synonyms[rng.below(synonyms.len())];
            out.push(Replacement {
                start: token.start,
                end: token.end,
                original: token.surface,
                replacement: pick.clone(),
                kind: ReplacementKind::Synonym,
            });
        }
    }
    out
}

/// Longest-match entity spans over token windows: `(start, end, surface)`.
fn entity_matches<'d>(text: &str, dict: &'d EntityDictionary) -> Vec<(usize, usize, &'d str)> {
    let tokens = tokenize(text);
    let keys: Vec<String> = tokens.iter().map(|t| normalize(&t.surface)).collect();
    let mut matches = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = dict.max_tokens().min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|n| {
            let key = match_key(keys[i..i + n].iter().map(String::as_str));
            dict.surface_for_key(&key).map(|s| (n, s))
        });
        match hit {
            Some((n, surface)) => {
                matches.push((tokens[i].start, tokens[i + n - 1].end, surface));
                i += n;
            }
            None => i += 1,
        }
    }
    matches
}

fn plan_entities(
    inst: &AspectInstance,
    dict: &EntityDictionary,
    rate: f64,
    seed: u64,
    protect_aspect: bool,
    blocked: &[Replacement],
) -> Vec<Replacement> {
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::new();
    for (start, end, surface) in entity_matches(&inst.text, dict) {
        if !eligible(inst, protect_aspect, blocked, start, end) {
            continue;
        }
        let Some(tag) = dict.entity_type(surface) else { continue };
        let candidates: Vec<&String> = dict
            .entities_of_type(tag)
            .iter()
            .filter(|s| s.as_str() != surface)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        if rng.chance(rate) {
            let pick = candidates[rng.below(candidates.len())];
            out.push(Replacement {
                start,
                end,
                original: char_slice(&inst.text, start, end).unwrap_or_default().to_string(),
                replacement: pick.clone(),
                kind: ReplacementKind::Entity,
            });
        }
    }
    out
}

/// Replaces each eligible token that has synonyms with probability `rate`.
///
/// Rates outside `[0, 1]` behave as the nearest bound.
pub fn synonym_replace(
    inst: &AspectInstance,
    lex: &SynonymLexicon,
    rate: f64,
    seed: u64,
    protect_aspect: bool,
) -> (AspectInstance, AugmentAudit) {
    let plan = plan_synonyms(inst, lex, rate, seed, protect_aspect, &[]);
    finish(inst, plan, format!("{}~syn", inst.id))
}

/// Replaces each matched entity with probability `rate` by a different
/// surface of the same type. Types with a single surface are left alone.
pub fn entity_replace(
    inst: &AspectInstance,
    dict: &EntityDictionary,
    rate: f64,
    seed: u64,
    protect_aspect: bool,
) -> (AspectInstance, AugmentAudit) {
    let plan = plan_entities(inst, dict, rate, seed, protect_aspect, &[]);
    finish(inst, plan, format!("{}~ent", inst.id))
}

fn finish(inst: &AspectInstance, plan: Vec<Replacement>, id: String) -> (AspectInstance, AugmentAudit) {
    let out = apply(inst, &plan, id);
    let audit = AugmentAudit {
        instance_id: out.id.clone(),
        source_id: inst.id.clone(),
        replacements: plan,
    };
    (out, audit)
}

/// Synonym pass followed by an entity pass over the result. Entity matches may
/// not touch synonym output; the audit is mapped back to source offsets.
pub fn augment_instance(
    inst: &AspectInstance,
    lex: &SynonymLexicon,
    dict: &EntityDictionary,
    cfg: &AugmentConfig,
    index: usize,
    copy: usize,
) -> (AspectInstance, AugmentAudit) {
    let base = derive_seed(cfg.seed, &[index as u64, copy as u64]);
    let id = format!("{}~aug{}", inst.id, copy + 1);

    let synonyms = plan_synonyms(
        inst,
        lex,
        cfg.synonym_rate,
        derive_seed(base, &[0]),
        cfg.protect_aspect,
        &[],
    );
    let middle = apply(inst, &synonyms, id.clone());

    // Synonym outputs, in the coordinates of the intermediate text.
    let mut moved = Vec::with_capacity(synonyms.len());
    let mut delta = 0isize;
    for r in &synonyms {
        let start = shifted(r.start, delta);
        moved.push(Replacement {
            start,
            end: start + r.replacement.chars().count(),
            ..r.clone()
        });
        delta += r.growth();
    }
    let entities = plan_entities(
        &middle,
        dict,
        cfg.entity_rate,
        derive_seed(base, &[1]),
        cfg.protect_aspect,
        &moved,
    );
    let out = apply(&middle, &entities, id);

    let mut replacements = synonyms.clone();
    for e in entities {
        let back: isize = synonyms
            .iter()
            .zip(&moved)
            .filter(|(_, m)| m.end <= e.start)
            .map(|(r, _)| r.growth())
            .sum();
        replacements.push(Replacement {
            start: shifted(e.start, -back),
            end: shifted(e.end, -back),
            ..e
        });
    }
    replacements.sort_by_key(|r| r.start);

    let audit = AugmentAudit {
        instance_id: out.id.clone(),
        source_id: inst.id.clone(),
        replacements,
    };
    (out, audit)
}

/// Originals followed by `cfg.copies` variants of each instance, in order.
///
/// Per-variant seeds depend only on `(cfg.seed, index, copy)`, so the result
/// is independent of scheduling.
pub fn augment_dataset(
    d: &Dataset,
    lex: &SynonymLexicon,
    dict: &EntityDictionary,
    cfg: &AugmentConfig,
) -> Result<(Dataset, Vec<AugmentAudit>)> {
    cfg.validate()?;
    let variants: Vec<(AspectInstance, AugmentAudit)> = d
        .instances()
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, inst)| (0..cfg.copies).map(move |k| augment_instance(inst, lex, dict, cfg, i, k)))
        .collect();

    let mut instances = d.instances().to_vec();
    let mut audits = Vec::with_capacity(variants.len());
    for (inst, audit) in variants {
        instances.push(inst);
        audits.push(audit);
    }
    Ok((Dataset::new(instances)?, audits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Polarity;

    fn inst(text: &str, aspect: &str) -> AspectInstance {
        let byte = text.find(aspect).unwrap();
        let start = text[..byte].chars().count();
        AspectInstance {
            id: "i1".into(),
            text: text.into(),
            aspect_term: aspect.into(),
            aspect_start: start,
            aspect_end: start + aspect.chars().count(),
            label: Polarity::Negative,
        }
    }

    fn lex(rows: &[(&str, &[&str])]) -> SynonymLexicon {
        SynonymLexicon::from_pairs(rows.iter().map(|(h, s)| (*h, s.to_vec()))).unwrap()
    }

    #[test]
    fn zero_rate_is_identity() {
        let src = inst("good phone", "phone");
        let (out, audit) = synonym_replace(&src, &lex(&[("good", &["fine"])]), 0.0, 42, true);
        assert_eq!(out.text, src.text);
        assert!(audit.replacements.is_empty());
    }

    #[test]
    fn forced_synonym_shifts_aspect() {
        let src = inst("good phone", "phone");
        let (out, audit) = synonym_replace(&src, &lex(&[("good", &["excellent"])]), 1.0, 42, true);
        assert_eq!(out.text, "excellent phone");
        let shift = "excellent".len() - "good".len();
        assert_eq!(out.aspect_start, src.aspect_start + shift);
        assert_eq!(out.aspect_end, src.aspect_end + shift);
        assert_eq!(out.aspect_term, "phone");
        assert_eq!(out.label, src.label);
        assert_ne!(out.id, src.id);
        assert!(out.id.starts_with("i1"));
        assert_eq!(audit.replacements.len(), 1);
        assert_eq!(audit.replacements[0].original, "good");
        out.validate().unwrap();
    }

    #[test]
    fn aspect_is_protected() {
        let src = inst("good phone", "phone");
        let l = lex(&[("phone", &["mobile"]), ("good", &["fine"])]);
        let (out, _) = synonym_replace(&src, &l, 1.0, 1, true);
        assert_eq!(out.text, "fine phone");
        let (out, _) = synonym_replace(&src, &l, 1.0, 1, false);
        assert_eq!(out.text, "fine mobile");
        assert_eq!(out.aspect_term, "mobile");
        out.validate().unwrap();
    }

    #[test]
    fn lookup_is_normalized() {
        // Arabic yeh in the text, Persian yeh in the lexicon.
        let src = inst("گوشي عالی", "عالی");
        let (out, _) = synonym_replace(&src, &lex(&[("گوشی", &["موبایل"])]), 1.0, 3, true);
        assert_eq!(out.text, "موبایل عالی");
        assert_eq!(out.aspect_term, "عالی");
    }

    #[test]
    fn deterministic() {
        let src = inst("a b c d e f g", "d");
        let l = lex(&[("a", &["x", "y", "z"]), ("b", &["x", "y"]), ("f", &["u", "v", "w"])]);
        let first = synonym_replace(&src, &l, 0.5, 9, true);
        assert_eq!(first, synonym_replace(&src, &l, 0.5, 9, true));
    }

    #[test]
    fn entity_swap() {
        let dict = EntityDictionary::from_pairs([("Tehran", "City"), ("Shiraz", "City")]).unwrap();
        let src = inst("bought in Tehran", "bought");
        let (out, audit) = entity_replace(&src, &dict, 1.0, 42, true);
        assert_eq!(out.text, "bought in Shiraz");
        assert_eq!(audit.replacements[0].kind, ReplacementKind::Entity);
    }

    #[test]
    fn single_surface_type_never_replaced() {
        let dict = EntityDictionary::from_pairs([("Tehran", "City"), ("Samsung", "Brand")]).unwrap();
        let src = inst("bought in Tehran", "bought");
        let (out, audit) = entity_replace(&src, &dict, 1.0, 42, true);
        assert_eq!(out.text, src.text);
        assert!(audit.replacements.is_empty());
    }

    #[test]
    fn entity_on_aspect_is_protected() {
        let dict = EntityDictionary::from_pairs([("Tehran", "City"), ("Shiraz", "City")]).unwrap();
        let src = inst("bought in Tehran", "Tehran");
        let (out, _) = entity_replace(&src, &dict, 1.0, 42, true);
        assert_eq!(out.text, src.text);
        let (out, _) = entity_replace(&src, &dict, 1.0, 42, false);
        assert_eq!(out.text, "bought in Shiraz");
        assert_eq!(out.aspect_term, "Shiraz");
    }

    #[test]
    fn longest_entity_wins() {
        let dict = EntityDictionary::from_pairs([
            ("New York", "City"),
            ("York", "City"),
            ("Tabriz", "City"),
        ])
        .unwrap();
        let src = inst("flew to New  York today", "today");
        let matches = entity_matches(&src.text, &dict);
        assert_eq!(matches, [(8, 17, "New York")]);
    }

    #[test]
    fn combined_audit_replays() {
        let l = lex(&[("flew", &["travelled"]), ("today", &["now"])]);
        let dict = EntityDictionary::from_pairs([("Tehran", "City"), ("Shiraz", "City")]).unwrap();
        let src = inst("flew to Tehran today ok", "ok");
        let cfg = AugmentConfig {
            synonym_rate: 1.0,
            entity_rate: 1.0,
            ..Default::default()
        };
        let (out, audit) = augment_instance(&src, &l, &dict, &cfg, 0, 0);
        assert_eq!(out.text, "travelled to Shiraz now ok");
        assert_eq!(out.aspect_term, "ok");
        assert_eq!(apply(&src, &audit.replacements, out.id.clone()), out);
        let spans: Vec<_> = audit.replacements.iter().map(|r| (r.start, r.end)).collect();
        assert_eq!(spans, [(0, 4), (8, 14), (15, 20)]);
    }

    #[test]
    fn dataset_sizes_and_identity() {
        let d = Dataset::new(vec![
            AspectInstance { id: "a".into(), ..inst("good phone", "phone") },
            AspectInstance { id: "b".into(), ..inst("bad screen", "screen") },
            AspectInstance { id: "c".into(), ..inst("ok price", "price") },
        ])
        .unwrap();
        let l = lex(&[("good", &["fine"])]);
        let dict = EntityDictionary::default();
        let cfg = AugmentConfig { synonym_rate: 0.0, entity_rate: 0.0, copies: 1, ..Default::default() };
        let (out, audits) = augment_dataset(&d, &l, &dict, &cfg).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(audits.len(), 3);
        for (src, variant) in d.instances().iter().zip(&out.instances()[3..]) {
            assert_eq!(variant.text, src.text);
            assert_ne!(variant.id, src.id);
        }

        let cfg = AugmentConfig { copies: 2, ..cfg };
        assert_eq!(augment_dataset(&d, &l, &dict, &cfg).unwrap().0.len(), 9);
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        assert!(AugmentConfig { copies: 0, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { synonym_rate: 1.5, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { entity_rate: -0.1, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn audit_lines() {
        let src = inst("good phone", "phone");
        let (_, audit) = synonym_replace(&src, &lex(&[("good", &["fine"])]), 1.0, 42, true);
        let mut buf = Vec::new();
        write_audit(&[audit], &mut buf).unwrap();
        let line: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(line["span"], serde_json::json!([0, 4]));
        assert_eq!(line["kind"], "synonym");
        assert_eq!(line["source_id"], "i1");
    }
}
