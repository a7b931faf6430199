//! Synthetic benchmark data with a known structure.
//!
//! Every comment mentions one aspect. A class cue word appears in only part
//! of the comments, so bag-of-words features alone cannot separate the
//! classes; the synthetic polarity scores always put their largest mass on
//! the true label.

use crate::corpus::{AspectInstance, Dataset, Polarity};
use crate::error::Result;
use crate::features::CacheRecord;
use crate::rng::SeededRng;

const ASPECTS: [&str; 8] = ["گوشی", "باتری", "صفحه", "دوربین", "قیمت", "ارسال", "کیفیت", "طراحی"];
const CUES: [[&str; 4]; 3] = [
    ["عالی", "خوب", "راضی", "بی‌نظیر"],
    ["معمولی", "متوسط", "قابل‌قبول", "عادی"],
    ["ضعیف", "افتضاح", "خراب", "ناراضی"],
];
const FILLER: [&str; 12] = [
    "محصول", "خریدم", "هفته", "پیش", "دیجی‌کالا", "استفاده", "روزانه", "سفارش", "بسته", "رنگ", "مدل", "فروشنده",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    /// Share of comments that contain a class cue word.
    pub cue_rate: f64,
    pub provider_id: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 375,
            seed: 42,
            cue_rate: 0.6,
            provider_id: "synthetic".into(),
        }
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Balanced synthetic dataset plus a polarity cache covering every instance.
pub fn generate(cfg: &SynthConfig) -> Result<(Dataset, Vec<CacheRecord>)> {
    let mut rng = SeededRng::new(cfg.seed);
    let mut instances = Vec::with_capacity(cfg.n);
    let mut cache = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let label = Polarity::ALL[i % 3];
        let aspect = ASPECTS[rng.below(ASPECTS.len())];
        let mut words: Vec<&str> = (0..2 + rng.below(3)).map(|_| FILLER[rng.below(FILLER.len())]).collect();
        let at = rng.below(words.len() + 1);
        words.insert(at, aspect);
        if rng.chance(cfg.cue_rate) {
            let cue = CUES[label.index()][rng.below(4)];
            words.insert(at + 1, cue);
        }
        words.push(FILLER[rng.below(FILLER.len())]);
        let text = words.join(" ");
        let start = words[..at].iter().map(|w| w.chars().count() + 1).sum::<usize>();
        let id = format!("s{:04}", i + 1);
        instances.push(AspectInstance {
            id: id.clone(),
            text,
            aspect_term: aspect.to_string(),
            aspect_start: start,
            aspect_end: start + aspect.chars().count(),
            label,
        });

        let top = round6(0.5 + 0.4 * rng.unit());
        let rest = 1.0 - top;
        let a = round6(rest * rng.unit());
        let b = round6(1.0 - top - a);
        let mut scores = [0.0; 3];
        let others: Vec<usize> = (0..3).filter(|&k| k != label.index()).collect();
        scores[label.index()] = top;
        scores[others[0]] = a;
        scores[others[1]] = b;
        cache.push(CacheRecord {
            id,
            provider_id: cfg.provider_id.clone(),
            scores,
        });
    }
    Ok((Dataset::new(instances)?, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::PolarityScores;

    #[test]
    fn valid_and_deterministic() {
        let (d, c) = generate(&SynthConfig::default()).unwrap();
        assert_eq!(d.len(), 375);
        assert_eq!(c.len(), 375);
        for (inst, rec) in d.instances().iter().zip(&c) {
            assert_eq!(inst.id, rec.id);
            PolarityScores::new(&rec.provider_id, rec.scores).unwrap();
            let top = (0..3).max_by(|&a, &b| rec.scores[a].total_cmp(&rec.scores[b])).unwrap();
            assert_eq!(top, inst.label.index());
        }
        assert_eq!(generate(&SynthConfig::default()).unwrap().0, d);
    }
}
