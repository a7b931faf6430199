//! Persian-aware text preprocessing: normalization, tokenization with
//! character offsets, stopword removal and rule-based suffix stemming.
//!
//! All offsets are counted in Unicode scalar values (`char`s), never bytes.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_categories::UnicodeCategories;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Zero-width non-joiner, the word-internal joiner of Persian orthography.
pub const ZWNJ: char = '\u{200C}';

const ARABIC_YEH: char = '\u{064A}';
const FARSI_YEH: char = '\u{06CC}';
const ARABIC_KAF: char = '\u{0643}';
const KEHEH: char = '\u{06A9}';
const TATWEEL: char = '\u{0640}';

const PERSIAN_PUNCT: [char; 3] = ['\u{060C}', '\u{061B}', '\u{061F}'];

/// Stopword list shipped with the toolkit.
pub const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords-fa.txt");

fn is_arabic_diacritic(c: char) -> bool {
    ('\u{064B}'..='\u{065F}').contains(&c)
}

fn unify_char(c: char) -> Option<char> {
    match c {
        ARABIC_YEH => Some(FARSI_YEH),
        ARABIC_KAF => Some(KEHEH),
        TATWEEL => None,
        c if is_arabic_diacritic(c) => None,
        // Arabic-Indic digits onto the Extended (Persian) block.
        '\u{0660}'..='\u{0669}' => char::from_u32(c as u32 - 0x0660 + 0x06F0),
        c => Some(c),
    }
}

/// Normalizes Persian text.
///
/// Steps, in order: NFC; yeh/kaf unification; removal of Arabic diacritics and
/// tatweel; Arabic-Indic digits mapped to Persian digits; ZWNJ stripped at
/// word edges; whitespace runs collapsed to one space and trimmed.
pub fn normalize(text: &str) -> String {
    let unified: String = text.nfc().filter_map(unify_char).collect();
    // Diacritic removal can leave a composable pair behind.
    let unified: String = unified.nfc().collect();

    let mut out = String::with_capacity(unified.len());
    for word in unified.split(char::is_whitespace) {
        let word = word.trim_matches(ZWNJ);
        if word.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// True for characters that form single-character punctuation tokens.
pub fn is_punct(c: char) -> bool {
    c.is_punctuation() || c.is_symbol() || PERSIAN_PUNCT.contains(&c)
}

/// A token with half-open character offsets into the tokenized text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub is_punct: bool,
}

/// Splits on whitespace; punctuation and symbol characters become their own
/// tokens. ZWNJ never splits.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;

    let flush = |word: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            tokens.push(Token {
                surface: std::mem::take(word),
                start,
                end,
                is_punct: false,
            });
        }
    };

    let mut pos = 0;
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut word, word_start, pos, &mut tokens);
        } else if is_punct(c) {
            flush(&mut word, word_start, pos, &mut tokens);
            tokens.push(Token {
                surface: c.to_string(),
                start: pos,
                end: pos + 1,
                is_punct: true,
            });
        } else {
            if word.is_empty() {
                word_start = pos;
            }
            word.push(c);
        }
        pos += 1;
    }
    flush(&mut word, word_start, pos, &mut tokens);
    tokens
}

/// Set of normalized stopwords.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| normalize(w.as_ref()))
            .filter(|w| !w.is_empty())
            .collect();
        Stoplist { words }
    }

    /// Parses the one-word-per-line format; `#` lines and blank lines are skipped.
    pub fn parse(content: &str) -> Self {
        Self::new(
            content
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&content))
    }

    /// The bundled Persian stoplist.
    pub fn persian() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Drops tokens whose surface is stoplisted. Survivors keep order and offsets.
pub fn remove_stopwords(tokens: Vec<Token>, stoplist: &Stoplist) -> Vec<Token> {
    tokens
        .into_iter()
        .filter(|t| !stoplist.contains(&t.surface))
        .collect()
}

const SUFFIXES: [&str; 10] = [
    "ها", "ان", "تر", "ترین", "ام", "ات", "اش", "مان", "تان", "شان",
];

const MIN_STEM_CHARS: usize = 2;

/// Strips the longest listed suffix (optionally preceded by ZWNJ) in one pass.
///
/// A suffix is only stripped if at least two characters remain; otherwise the
/// next shorter matching suffix is tried.
pub fn stem(token: &str) -> String {
    let len = token.chars().count();
    let mut candidates: Vec<usize> = Vec::new();
    for suffix in SUFFIXES {
        if let Some(rest) = token.strip_suffix(suffix) {
            let n = suffix.chars().count();
            let with_zwnj = rest.ends_with(ZWNJ);
            candidates.push(if with_zwnj { n + 1 } else { n });
        }
    }
    candidates.sort_unstable_by(|a, b| b.cmp(a));
    for strip in candidates {
        if len >= strip + MIN_STEM_CHARS {
            let stem: String = token.chars().take(len - strip).collect();
            // A stem never ends in a joiner; the guard above counts it as a char.
            if stem.ends_with(ZWNJ) || stem.chars().count() < MIN_STEM_CHARS {
                continue;
            }
            return stem;
        }
    }
    token.to_string()
}

/// normalize -> tokenize -> drop punctuation -> remove stopwords -> stem.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    stoplist: Option<Stoplist>,
    stemming: bool,
}

impl Preprocessor {
    pub fn new(stoplist: Option<Stoplist>, stemming: bool) -> Self {
        Preprocessor { stoplist, stemming }
    }

    pub fn stemming(&self) -> bool {
        self.stemming
    }

    /// Terms for bag-of-words features. Punctuation tokens are dropped.
    pub fn terms(&self, text: &str) -> Vec<String> {
        let normalized = normalize(text);
        let mut tokens: Vec<Token> = tokenize(&normalized)
            .into_iter()
            .filter(|t| !t.is_punct)
            .collect();
        if let Some(stoplist) = &self.stoplist {
            tokens = remove_stopwords(tokens, stoplist);
        }
        tokens
            .into_iter()
            .map(|t| if self.stemming { stem(&t.surface) } else { t.surface })
            .collect()
    }
}
