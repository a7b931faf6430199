//! Random instances and invariant checks for augmentation.

#![allow(dead_code)]

use pabsa::augment::{augment_instance, AugmentConfig};
use pabsa::corpus::{char_slice, AspectInstance, Polarity};
use pabsa::lexicon::{EntityDictionary, SynonymLexicon};
use pabsa::rng::SeededRng;

const FILLER: [&str; 8] = ["این", "محصول", "را", "از", "خریدم", "و", "بود", "است"];
const PUNCT: [&str; 3] = ["،", ".", "!"];

pub fn lexicons() -> (SynonymLexicon, EntityDictionary) {
    let lex = SynonymLexicon::from_pairs([
        ("خوب", vec!["عالی", "مناسب"]),
        ("بد", vec!["ضعیف"]),
        ("گوشی", vec!["تلفن همراه", "موبایل"]),
        ("سریع", vec!["تند"]),
    ])
    .unwrap();
    let dict = EntityDictionary::from_pairs([
        ("سامسونگ", "BRAND"),
        ("اپل", "BRAND"),
        ("سامسونگ گلکسی", "PRODUCT"),
        ("آیفون", "PRODUCT"),
        ("تهران", "CITY"),
        ("شیراز", "CITY"),
    ])
    .unwrap();
    (lex, dict)
}

fn vocabulary(lex: &SynonymLexicon, dict: &EntityDictionary) -> Vec<String> {
    let mut v: Vec<String> = FILLER.iter().map(|s| s.to_string()).collect();
    for (h, syns) in lex.iter() {
        v.push(h.to_string());
        v.extend(syns.iter().cloned());
    }
    for t in dict.types().collect::<Vec<_>>() {
        v.extend(dict.entities_of_type(t).iter().cloned());
    }
    v
}

pub fn random_instance(rng: &mut SeededRng, lex: &SynonymLexicon, dict: &EntityDictionary, n: usize) -> AspectInstance {
    let vocab = vocabulary(lex, dict);
    let len = 2 + rng.below(10);
    let mut words: Vec<String> = (0..len).map(|_| vocab[rng.below(vocab.len())].clone()).collect();
    if rng.chance(0.3) {
        let at = rng.below(words.len());
        words[at].push_str(PUNCT[rng.below(PUNCT.len())]);
    }
    let a = rng.below(words.len());
    let b = (a + 1 + rng.below(2)).min(words.len());
    let start: usize = words[..a].iter().map(|w| w.chars().count() + 1).sum();
    let text = words.join(" ");
    let end = start + words[a..b].join(" ").chars().count();
    let inst = AspectInstance {
        id: format!("r{n}"),
        aspect_term: char_slice(&text, start, end).unwrap().to_string(),
        text,
        aspect_start: start,
        aspect_end: end,
        label: Polarity::ALL[rng.below(3)],
    };
    inst.validate().unwrap();
    inst
}

/// Checks every augmentation invariant for one instance.
pub fn check_instance(
    inst: &AspectInstance,
    lex: &SynonymLexicon,
    dict: &EntityDictionary,
    seed: u64,
    protect_aspect: bool,
) -> Result<(), String> {
    let cfg = AugmentConfig {
        synonym_rate: 0.5,
        entity_rate: 0.5,
        seed,
        protect_aspect,
        copies: 1,
    };
    let (out, audit) = augment_instance(inst, lex, dict, &cfg, 0, 0);
    if out.label != inst.label {
        return Err(format!("{}: label changed", inst.id));
    }
    out.validate().map_err(|e| format!("aspect slice broken: {e}"))?;
    if protect_aspect && out.aspect_term != inst.aspect_term {
        return Err(format!("{}: protected aspect changed to {:?}", inst.id, out.aspect_term));
    }
    if augment_instance(inst, lex, dict, &cfg, 0, 0) != (out.clone(), audit.clone()) {
        return Err(format!("{}: not deterministic", inst.id));
    }

    // Replay the audit on the source text.
    let mut chars: Vec<char> = inst.text.chars().collect();
    let mut prev_end = 0;
    for r in &audit.replacements {
        if r.start < prev_end || r.start >= r.end {
            return Err(format!("{}: overlapping or empty replacement {r:?}", inst.id));
        }
        prev_end = r.end;
        if char_slice(&inst.text, r.start, r.end) != Some(r.original.as_str()) {
            return Err(format!("{}: audit original {:?} does not match source", inst.id, r.original));
        }
    }
    for r in audit.replacements.iter().rev() {
        chars.splice(r.start..r.end, r.replacement.chars());
    }
    let replayed: String = chars.into_iter().collect();
    if replayed != out.text {
        return Err(format!("{}: replay gives {replayed:?}, output is {:?}", inst.id, out.text));
    }

    let zero = AugmentConfig {
        synonym_rate: 0.0,
        entity_rate: 0.0,
        ..cfg
    };
    let (same, empty) = augment_instance(inst, lex, dict, &zero, 0, 0);
    if same.text != inst.text || same.aspect_span() != inst.aspect_span() || !empty.replacements.is_empty() {
        return Err(format!("{}: rate 0 changed the instance", inst.id));
    }
    Ok(())
}
