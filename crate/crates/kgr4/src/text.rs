//! Tokenization, lemmatization and coarse part-of-speech tagging.
//!
//! Everything here is deterministic and dependency-free: a whitespace and
//! punctuation tokenizer, a rule-based suffix-stripping lemmatizer with an
//! irregular-verb table, and a lexicon-driven tagger with an OTHER fallback.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Result;

/// Coarse POS tag set. Only verbs, nouns and proper nouns matter downstream
/// (they are the pool pseudo concepts are sampled from).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PosTag {
    Verb,
    Noun,
    Propn,
    Other,
}

impl PosTag {
    pub fn is_content(self) -> bool {
        matches!(self, PosTag::Verb | PosTag::Noun | PosTag::Propn)
    }

    pub fn parse(s: &str) -> Option<PosTag> {
        match s {
            "VERB" => Some(PosTag::Verb),
            "NOUN" => Some(PosTag::Noun),
            "PROPN" => Some(PosTag::Propn),
            "OTHER" => Some(PosTag::Other),
            _ => None,
        }
    }
}

/// Bundled word -> tag table. Lookups are on lemmas, lowercased.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: BTreeMap<String, PosTag>,
}

const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");
const IRREGULAR_VERBS: &str = include_str!("../data/irregular.tsv");

impl Lexicon {
    pub fn bundled() -> Lexicon {
        Lexicon::parse(BUNDLED_LEXICON).expect("bundled lexicon is well-formed")
    }

    pub fn from_path(path: &Path) -> Result<Lexicon> {
        let text = std::fs::read_to_string(path)?;
        Lexicon::parse(&text)
    }

    fn parse(text: &str) -> Result<Lexicon> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let word = parts.next().unwrap_or("");
            let tag = parts.next().and_then(PosTag::parse);
            match tag {
                Some(tag) if !word.is_empty() => {
                    entries.insert(word.to_lowercase(), tag);
                }
                _ => {
                    return Err(crate::error::Kgr4Error::Malformed {
                        line: i + 1,
                        msg: format!("bad lexicon line {line:?}"),
                    })
                }
            }
        }
        Ok(Lexicon { entries })
    }

    pub fn lookup(&self, lemma: &str) -> Option<PosTag> {
        self.entries.get(&lemma.to_lowercase()).copied()
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.entries.contains_key(&lemma.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn irregular_table() -> &'static BTreeMap<String, String> {
    use std::sync::OnceLock;
    static TABLE: OnceLock<BTreeMap<String, String>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut map = BTreeMap::new();
        for line in IRREGULAR_VERBS.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            if let (Some(form), Some(lemma)) = (parts.next(), parts.next()) {
                map.insert(form.to_lowercase(), lemma.to_lowercase());
            }
        }
        map
    })
}

/// Split into word tokens: maximal runs of alphanumeric characters plus
/// internal apostrophes and hyphens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ((ch == '\'' || ch == '-') && !current.is_empty()) {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    // strip trailing apostrophes/hyphens left by the loose inner-char rule
    tokens
        .into_iter()
        .map(|t| t.trim_end_matches(['\'', '-']).to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

fn ends_with_any(s: &str, suffixes: &[&str]) -> bool {
    suffixes.iter().any(|x| s.ends_with(x))
}

fn undouble(stem: &str) -> String {
    let bytes = stem.as_bytes();
    let n = bytes.len();
    if n >= 2 && bytes[n - 1] == bytes[n - 2] {
        let c = bytes[n - 1] as char;
        if c.is_ascii_alphabetic() && !matches!(c, 'l' | 's' | 'e') {
            return stem[..n - 1].to_string();
        }
    }
    stem.to_string()
}

/// One rule application. Returns the input unchanged when no rule fires.
fn lemma_step(word: &str, lexicon: &Lexicon) -> String {
    if let Some(lemma) = irregular_table().get(word) {
        return lemma.clone();
    }
    if lexicon.contains(word) {
        return word.to_string();
    }
    let n = word.chars().count();
    if word.ends_with("ies") && n > 4 {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.ends_with("es") && n > 4 {
        let stem = &word[..word.len() - 2];
        if ends_with_any(stem, &["x", "z", "ch", "sh", "ss"]) {
            return stem.to_string();
        }
    }
    if word.ends_with('s') && !ends_with_any(word, &["ss", "us", "is"]) && n > 3 {
        return word[..word.len() - 1].to_string();
    }
    if word.ends_with("ing") && n > 5 {
        let stem = &word[..word.len() - 3];
        if lexicon.contains(&format!("{stem}e")) {
            return format!("{stem}e");
        }
        return undouble(stem);
    }
    if word.ends_with("ed") && n > 3 {
        let stem = &word[..word.len() - 2];
        // 4-letter forms ("used") only when the e-restored stem is attested,
        // so "need"/"seed" stay intact
        if lexicon.contains(&format!("{stem}e")) {
            return format!("{stem}e");
        }
        if n > 4 {
            if stem.ends_with(['v', 'c', 'g', 'u']) {
                return format!("{stem}e");
            }
            return undouble(stem);
        }
    }
    word.to_string()
}

/// Rule-based lemmatizer. Runs suffix rules to a fixpoint, which makes it
/// idempotent by construction: lemmatize(lemmatize(w)) == lemmatize(w).
pub fn lemmatize(word: &str, lexicon: &Lexicon) -> String {
    let mut current = word.to_lowercase();
    loop {
        let next = lemma_step(&current, lexicon);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Lexicon tag for the lemma; unknown capitalized non-initial tokens are
/// treated as proper nouns, everything else unknown is OTHER.
pub fn tag(token: &str, lemma: &str, sentence_initial: bool, lexicon: &Lexicon) -> PosTag {
    if let Some(t) = lexicon.lookup(lemma) {
        return t;
    }
    let capitalized = token.chars().next().is_some_and(|c| c.is_uppercase());
    if capitalized && !sentence_initial {
        PosTag::Propn
    } else {
        PosTag::Other
    }
}

/// An analyzed sentence: surface text plus aligned tokens, lemmas and tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
    pub tags: Vec<PosTag>,
}

impl Sentence {
    pub fn analyze(id: impl Into<String>, text: &str, lexicon: &Lexicon) -> Sentence {
        let tokens = tokenize(text);
        let lemmas: Vec<String> = tokens.iter().map(|t| lemmatize(t, lexicon)).collect();
        let tags: Vec<PosTag> = tokens
            .iter()
            .zip(&lemmas)
            .enumerate()
            .map(|(i, (tok, lem))| tag(tok, lem, i == 0, lexicon))
            .collect();
        Sentence {
            id: id.into(),
            text: text.to_string(),
            tokens,
            lemmas,
            tags,
        }
    }

    /// Reserved empty prototype slot. The only Sentence allowed to have no
    /// tokens.
    pub fn sentinel() -> Sentence {
        Sentence {
            id: String::new(),
            text: String::new(),
            tokens: Vec::new(),
            lemmas: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.text.is_empty() && self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::bundled()
    }

    #[test]
    fn tokenize_splits_on_punctuation() {
        assert_eq!(
            tokenize("A man, washing his hands!"),
            vec!["A", "man", "washing", "his", "hands"]
        );
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn lemmatize_common_suffixes() {
        let lex = lex();
        assert_eq!(lemmatize("hands", &lex), "hand");
        assert_eq!(lemmatize("washing", &lex), "wash");
        assert_eq!(lemmatize("washes", &lex), "wash");
        assert_eq!(lemmatize("running", &lex), "run");
        assert_eq!(lemmatize("used", &lex), "use");
        assert_eq!(lemmatize("studies", &lex), "study");
        assert_eq!(lemmatize("sink", &lex), "sink");
    }

    #[test]
    fn lemmatize_irregulars() {
        let lex = lex();
        assert_eq!(lemmatize("ran", &lex), "run");
        assert_eq!(lemmatize("children", &lex), "child");
        assert_eq!(lemmatize("Was", &lex), "be");
    }

    #[test]
    fn lemmatize_is_idempotent_on_fixed_words() {
        let lex = lex();
        for w in [
            "hands", "washes", "running", "sing", "glass", "buses", "weddings", "things", "used",
            "dog", "a", "misses", "Wed", "is",
        ] {
            let once = lemmatize(w, &lex);
            assert_eq!(lemmatize(&once, &lex), once, "word {w}");
        }
    }

    #[test]
    fn short_words_are_left_alone() {
        let lex = lex();
        assert_eq!(lemmatize("sing", &lex), "sing");
        assert_eq!(lemmatize("its", &lex), "its");
    }

    #[test]
    fn tagging_uses_lexicon_and_propn_heuristic() {
        let lex = lex();
        let s = Sentence::analyze("0", "The girl visits Paris", &lex);
        assert_eq!(s.tags[1], PosTag::Noun);
        assert_eq!(s.tags[3], PosTag::Propn);
        assert_eq!(s.tags[0], PosTag::Other);
    }

    #[test]
    fn analyze_alignment_invariant() {
        let lex = lex();
        let s = Sentence::analyze("x", "A man is washing his hands with soap in a sink.", &lex);
        assert_eq!(s.tokens.len(), s.lemmas.len());
        assert_eq!(s.tokens.len(), s.tags.len());
        assert!(!s.tokens.is_empty());
    }
}
