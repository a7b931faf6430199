//! Synonym lexicon and named-entity gazetteer.
//!
//! Both resources are UTF-8 TSV with `#` comment lines:
//!
//! ```text
//! headword<TAB>syn1|syn2|...      (synonyms)
//! surface<TAB>TypeTag             (entities)
//! ```
//!
//! Every string is stored in [`normalize`]d form.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::preprocess::{normalize, tokenize};

fn read_source(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-comment, non-blank lines as `(line_no, left, right)`.
fn tsv_lines<'a>(
    content: &'a str,
    source_name: &'a str,
) -> impl Iterator<Item = Result<(usize, &'a str, &'a str)>> + 'a {
    content.lines().enumerate().filter_map(move |(n, line)| {
        let line_no = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            return None;
        }
        Some(match line.split_once('\t') {
            Some((left, right)) if !right.contains('\t') => Ok((line_no, left, right)),
            _ => Err(Error::parse(
                source_name,
                line_no,
                "expected exactly two tab-separated fields",
            )),
        })
    })
}

/// Directed headword -> synonyms relation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: IndexMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn parse(content: &str, source_name: &str) -> Result<Self> {
        let mut entries: IndexMap<String, Vec<String>> = IndexMap::new();
        for line in tsv_lines(content, source_name) {
            let (line_no, head, syns) = line?;
            let head = normalize(head);
            if head.is_empty() {
                return Err(Error::parse(source_name, line_no, "empty headword"));
            }
            let syns: Vec<String> = syns
                .split('|')
                .map(normalize)
                .filter(|s| !s.is_empty())
                .collect();
            if syns.is_empty() {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("empty synonym list for {head:?}"),
                ));
            }
            if syns.contains(&head) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("{head:?} is listed as its own synonym"),
                ));
            }
            let list = entries.entry(head).or_default();
            for s in syns {
                if !list.contains(&s) {
                    list.push(s);
                }
            }
        }
        Ok(SynonymLexicon { entries })
    }

    pub fn from_pairs<I, H, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (H, Vec<S>)>,
        H: AsRef<str>,
        S: AsRef<str>,
    {
        let content: String = pairs
            .into_iter()
            .map(|(h, syns)| {
                let joined: Vec<&str> = syns.iter().map(AsRef::as_ref).collect();
                format!("{}\t{}\n", h.as_ref(), joined.join("|"))
            })
            .collect();
        Self::parse(&content, "<inline>")
    }

    /// Normalized lookup; empty when the word has no entry.
    pub fn synonyms_of(&self, word: &str) -> &[String] {
        self.lookup_normalized(&normalize(word))
    }

    /// Lookup for a string already in normalized form.
    pub fn lookup_normalized(&self, word: &str) -> &[String] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

pub fn load_synonyms(path: impl AsRef<Path>) -> Result<SynonymLexicon> {
    let path = path.as_ref();
    SynonymLexicon::parse(&read_source(path)?, &path.display().to_string())
}

/// Entity surface -> type tag, with the inverse grouping kept in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityDictionary {
    entries: IndexMap<String, String>,
    by_type: IndexMap<String, Vec<String>>,
    // Token-joined match key -> surface, for n-gram matching over token streams.
    keys: IndexMap<String, String>,
    max_tokens: usize,
}

/// Key used to match a token window against entity surfaces.
pub fn match_key<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    tokens.into_iter().collect::<Vec<_>>().join(" ")
}

impl EntityDictionary {
    pub fn parse(content: &str, source_name: &str) -> Result<Self> {
        let mut dict = EntityDictionary::default();
        for line in tsv_lines(content, source_name) {
            let (line_no, surface, tag) = line?;
            let surface = normalize(surface);
            let tag = tag.trim();
            if surface.is_empty() || tag.is_empty() {
                return Err(Error::parse(source_name, line_no, "empty surface or type tag"));
            }
            match dict.entries.get(&surface) {
                Some(existing) if existing == tag => continue,
                Some(existing) => {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("{surface:?} is already typed {existing:?}, not {tag:?}"),
                    ))
                }
                None => {}
            }
            let tokens = tokenize(&surface);
            let key = match_key(tokens.iter().map(|t| t.surface.as_str()));
            if let Some(other) = dict.keys.get(&key) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("{surface:?} tokenizes identically to {other:?}"),
                ));
            }
            dict.max_tokens = dict.max_tokens.max(tokens.len());
            dict.keys.insert(key, surface.clone());
            dict.by_type
                .entry(tag.to_string())
                .or_default()
                .push(surface.clone());
            dict.entries.insert(surface, tag.to_string());
        }
        Ok(dict)
    }

    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let content: String = pairs
            .into_iter()
            .map(|(s, t)| format!("{}\t{}\n", s.as_ref(), t.as_ref()))
            .collect();
        Self::parse(&content, "<inline>")
    }

    pub fn entity_type(&self, phrase: &str) -> Option<&str> {
        self.entries.get(&normalize(phrase)).map(String::as_str)
    }

    /// Surfaces of one type in file order; empty for unknown tags.
    pub fn entities_of_type(&self, tag: &str) -> &[String] {
        self.by_type.get(tag).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.by_type.keys().map(String::as_str)
    }

    /// Surface whose token sequence equals `key` (see [`match_key`]).
    pub fn surface_for_key(&self, key: &str) -> Option<&str> {
        self.keys.get(key).map(String::as_str)
    }

    /// Longest entity surface, in tokens.
    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_entities(path: impl AsRef<Path>) -> Result<EntityDictionary> {
    let path = path.as_ref();
    EntityDictionary::parse(&read_source(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_synonyms() {
        let lex = SynonymLexicon::parse("# comment\nbig\tlarge|huge\n", "s.tsv").unwrap();
        assert_eq!(lex.synonyms_of("big"), ["large", "huge"]);
        assert!(lex.synonyms_of("small").is_empty());
    }

    #[test]
    fn merges_duplicate_headwords() {
        let lex = SynonymLexicon::parse("big\tlarge|huge\nbig\thuge|vast\n", "s.tsv").unwrap();
        assert_eq!(lex.synonyms_of("big"), ["large", "huge", "vast"]);
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn synonym_errors() {
        let err = SynonymLexicon::parse("big\tbig\n", "s.tsv").unwrap_err();
        assert!(err.to_string().contains("own synonym"), "{err}");
        assert!(SynonymLexicon::parse("big\t\n", "s.tsv").is_err());
        assert!(SynonymLexicon::parse("big\t | \n", "s.tsv").is_err());
        let err = SynonymLexicon::parse("ok\tfine\nno tab here\n", "s.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn self_synonym_detected_after_normalization() {
        assert!(SynonymLexicon::parse("علي\tعلی\n", "s.tsv").is_err());
    }

    #[test]
    fn lookup_normalizes_query() {
        let lex = SynonymLexicon::parse("زیبا\tقشنگ|خوشگل\n", "s.tsv").unwrap();
        // Arabic yeh in the query.
        assert_eq!(lex.synonyms_of("زيبا"), ["قشنگ", "خوشگل"]);
    }

    #[test]
    fn parses_entities() {
        let dict = EntityDictionary::parse(
            "Tehran\tCity\nShiraz\tCity\nSamsung\tBrand\nTabriz\tCity\nTehran\tCity\n",
            "e.tsv",
        )
        .unwrap();
        assert_eq!(dict.entity_type("Tehran"), Some("City"));
        assert_eq!(dict.entity_type("Paris"), None);
        assert_eq!(dict.entities_of_type("City"), ["Tehran", "Shiraz", "Tabriz"]);
        assert!(dict.entities_of_type("Person").is_empty());
        assert_eq!(dict.types().collect::<Vec<_>>(), ["City", "Brand"]);
    }

    #[test]
    fn conflicting_entity_types() {
        let err = EntityDictionary::parse("Tehran\tCity\nTehran\tProvince\n", "e.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn multi_word_entities() {
        let dict = EntityDictionary::parse("New  York\tCity\nSt. Louis\tCity\n", "e.tsv").unwrap();
        assert_eq!(dict.entity_type("New York"), Some("City"));
        assert_eq!(dict.max_tokens(), 3);
        assert_eq!(dict.surface_for_key("St . Louis"), Some("St. Louis"));
    }

    fn tag() -> impl Strategy<Value = String> {
        prop_oneof![Just("City".to_string()), Just("Brand".into()), Just("Person".into())]
    }

    proptest! {
        #[test]
        fn entity_index_is_inverse(entries in proptest::collection::vec(("[a-e]{1,3}", tag()), 0..30)) {
            // Keep the first type per surface so the file is consistent.
            let mut seen = std::collections::HashMap::new();
            let content: String = entries
                .iter()
                .filter(|(s, t)| seen.entry(s.clone()).or_insert_with(|| t.clone()) == t)
                .map(|(s, t)| format!("{s}\t{t}\n"))
                .collect();
            let dict = EntityDictionary::parse(&content, "e.tsv").unwrap();
            for t in ["City", "Brand", "Person"] {
                for s in dict.entities_of_type(t) {
                    prop_assert_eq!(dict.entity_type(s), Some(t));
                }
            }
            for (s, t) in &seen {
                prop_assert!(dict.entities_of_type(t).contains(s));
            }
        }

        #[test]
        fn synonyms_never_contain_query(
            rows in proptest::collection::vec(("[a-d]{1,2}", proptest::collection::vec("[a-d]{1,2}", 1..4)), 0..20)
        ) {
            let content: String = rows
                .iter()
                .filter(|(h, syns)| !syns.contains(h))
                .map(|(h, syns)| format!("{h}\t{}\n", syns.join("|")))
                .collect();
            let lex = SynonymLexicon::parse(&content, "s.tsv").unwrap();
            for (h, syns) in lex.iter() {
                prop_assert!(!syns.is_empty());
                prop_assert!(!syns.iter().any(|s| s == h));
                let distinct: std::collections::HashSet<_> = syns.iter().collect();
                prop_assert_eq!(distinct.len(), syns.len());
            }
        }
    }
}
