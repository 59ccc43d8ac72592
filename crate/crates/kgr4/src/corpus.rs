//! Corpora, concept sets and training-instance construction: ingestion,
//! pseudo-concept extraction, the pretraining set and retrospective
//! augmentation.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Kgr4Error, Result};
use crate::index::{rough_search, InvertedIndex, PrototypeSet};
use crate::text::{Lexicon, Sentence};

pub const MAX_CONCEPTS: usize = 5;

/// A lemmatized, order-insensitive set of 1..=5 concepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSet {
    concepts: BTreeSet<String>,
    /// true when the concepts were extracted from a sentence rather than
    /// given by a dataset
    pub pseudo: bool,
}

impl ConceptSet {
    pub fn new(concepts: impl IntoIterator<Item = String>, pseudo: bool) -> Result<ConceptSet> {
        let concepts: BTreeSet<String> = concepts.into_iter().collect();
        if concepts.is_empty() {
            return Err(Kgr4Error::EmptyConceptSet);
        }
        if concepts.len() > MAX_CONCEPTS {
            return Err(Kgr4Error::InvalidArgument(format!(
                "concept set has {} concepts, max {MAX_CONCEPTS}",
                concepts.len()
            )));
        }
        Ok(ConceptSet { concepts, pseudo })
    }

    pub fn from_raw(words: &[String], lexicon: &Lexicon) -> Result<ConceptSet> {
        ConceptSet::new(
            words.iter().map(|w| crate::text::lemmatize(w, lexicon)),
            false,
        )
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.concepts.contains(lemma)
    }

    /// Sorted iteration; this ordering is also the serialization order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(|s| s.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceKind {
    Pretrain,
    Augmented,
    Edit,
    Copy,
}

/// One generator training instance: concepts, exactly three prototypes and a
/// target sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub concepts: ConceptSet,
    pub prototypes: Vec<Sentence>,
    pub target: Sentence,
    pub kind: InstanceKind,
}

impl TrainingInstance {
    pub fn new(
        concepts: ConceptSet,
        prototypes: Vec<Sentence>,
        target: Sentence,
        kind: InstanceKind,
    ) -> Result<TrainingInstance> {
        if prototypes.len() != 3 {
            return Err(Kgr4Error::InvalidArgument(format!(
                "expected exactly 3 prototypes, got {}",
                prototypes.len()
            )));
        }
        if kind == InstanceKind::Copy
            && prototypes.iter().filter(|p| p.text == target.text).count() != 1
        {
            return Err(Kgr4Error::InvalidArgument(
                "COPY instance needs exactly one prototype equal to the target".into(),
            ));
        }
        Ok(TrainingInstance {
            concepts,
            prototypes,
            target,
            kind,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    PlainLines,
    CommongenPairs,
}

impl CorpusFormat {
    pub fn parse(s: &str) -> Option<CorpusFormat> {
        match s {
            "jsonl" => Some(CorpusFormat::Jsonl),
            "plain-lines" => Some(CorpusFormat::PlainLines),
            "commongen-pairs" => Some(CorpusFormat::CommongenPairs),
            _ => None,
        }
    }
}

/// An analyzed sentence collection. For commongen-pairs input it also carries
/// the (concept set, target sentence index) pairs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub pairs: Vec<(ConceptSet, usize)>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Sentence {
        &self.sentences[idx]
    }

    /// Union of all surface token forms.
    pub fn vocab(&self) -> BTreeSet<String> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().cloned())
            .collect()
    }

    /// All word forms relevant for model vocabularies: tokens plus lemmas.
    pub fn word_forms(&self) -> BTreeSet<String> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().chain(s.lemmas.iter()).cloned())
            .collect()
    }

    pub fn paired(&self) -> Vec<(ConceptSet, Sentence)> {
        self.pairs
            .iter()
            .map(|(c, i)| (c.clone(), self.sentences[*i].clone()))
            .collect()
    }

    /// Stable content hash over sentence ids and texts.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for s in &self.sentences {
            h.update(s.id.as_bytes());
            h.update([0]);
            h.update(s.text.as_bytes());
            h.update([0]);
        }
        crate::nn::hex_digest(h)
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: String,
    text: String,
}

#[derive(Deserialize)]
struct PairRecord {
    concepts: Vec<String>,
    target: String,
}

/// Read a corpus file. Every non-blank line becomes one analyzed sentence
/// with deterministic ids in file order.
pub fn ingest(path: &Path, format: CorpusFormat, lexicon: &Lexicon) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut corpus = Corpus::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let seq = corpus.sentences.len();
        match format {
            CorpusFormat::PlainLines => {
                corpus
                    .sentences
                    .push(Sentence::analyze(seq.to_string(), trimmed, lexicon));
            }
            CorpusFormat::Jsonl => {
                let rec: JsonlRecord =
                    serde_json::from_str(trimmed).map_err(|e| Kgr4Error::Malformed {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })?;
                corpus
                    .sentences
                    .push(Sentence::analyze(rec.id, &rec.text, lexicon));
            }
            CorpusFormat::CommongenPairs => {
                let rec: PairRecord =
                    serde_json::from_str(trimmed).map_err(|e| Kgr4Error::Malformed {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })?;
                let concepts =
                    ConceptSet::from_raw(&rec.concepts, lexicon).map_err(|e| {
                        Kgr4Error::Malformed {
                            line: lineno + 1,
                            msg: e.to_string(),
                        }
                    })?;
                let sentence = Sentence::analyze(seq.to_string(), &rec.target, lexicon);
                if sentence.is_empty() {
                    return Err(Kgr4Error::Malformed {
                        line: lineno + 1,
                        msg: "empty target sentence".into(),
                    });
                }
                corpus.sentences.push(sentence);
                corpus.pairs.push((concepts, seq));
            }
        }
    }
    Ok(corpus)
}

/// Sample up to `k` distinct content-word lemmas (VERB/NOUN/PROPN) from a
/// tagged sentence, without replacement.
pub fn extract_pseudo_concepts(
    sentence: &Sentence,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ConceptSet> {
    if k == 0 {
        return Err(Kgr4Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > MAX_CONCEPTS {
        return Err(Kgr4Error::InvalidArgument(format!(
            "k = {k} exceeds the concept-set limit {MAX_CONCEPTS}"
        )));
    }
    // distinct eligible lemmas in first-occurrence order
    let mut seen = BTreeSet::new();
    let mut eligible: Vec<&str> = Vec::new();
    for (lemma, tag) in sentence.lemmas.iter().zip(&sentence.tags) {
        if tag.is_content() && seen.insert(lemma.as_str()) {
            eligible.push(lemma);
        }
    }
    if eligible.is_empty() {
        return Err(Kgr4Error::NoContentWords(sentence.text.clone()));
    }
    let take = k.min(eligible.len());
    let sampled: Vec<String> = eligible
        .choose_multiple(rng, take)
        .map(|s| s.to_string())
        .collect();
    ConceptSet::new(sampled, true)
}

/// Build the pretraining dataset: one PRETRAIN instance per corpus sentence,
/// concepts sampled from the sentence, prototypes from rough concept-matching
/// retrieval only (no scorer), excluding the sentence itself.
pub fn build_pretrain_set(
    ext: &Corpus,
    idx: &InvertedIndex,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TrainingInstance>> {
    if ext.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    let mut out = Vec::with_capacity(ext.len());
    for (i, sentence) in ext.sentences.iter().enumerate() {
        let concepts = match extract_pseudo_concepts(sentence, k, rng) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("skipping sentence {}: {e}", sentence.id);
                continue;
            }
        };
        let ranked = rough_search(idx, ext, &concepts, 3 + 1);
        let prototypes: Vec<Sentence> = ranked
            .into_iter()
            .filter(|&j| j != i)
            .take(3)
            .map(|j| ext.sentences[j].clone())
            .collect();
        let padded = pad_prototypes(prototypes);
        out.push(TrainingInstance::new(
            concepts,
            padded,
            sentence.clone(),
            InstanceKind::Pretrain,
        )?);
    }
    Ok(out)
}

/// Pad to exactly three prototype slots with the empty sentinel.
pub fn pad_prototypes(mut prototypes: Vec<Sentence>) -> Vec<Sentence> {
    prototypes.truncate(3);
    while prototypes.len() < 3 {
        prototypes.push(Sentence::sentinel());
    }
    prototypes
}

/// Expand training pairs into the finetuning set: each pair becomes an EDIT
/// instance, plus one AUGMENTED instance per pair whose target is the third
/// prototype and whose concepts are pseudo concepts of that prototype.
pub fn build_retrospective_augmentation(
    train: &[(ConceptSet, Sentence)],
    prototypes_of: &[PrototypeSet],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TrainingInstance>> {
    if train.len() != prototypes_of.len() {
        return Err(Kgr4Error::InvalidArgument(
            "each training pair needs a retrieved prototype set".into(),
        ));
    }
    let mut out = Vec::with_capacity(train.len() * 2);
    for ((concepts, target), protos) in train.iter().zip(prototypes_of) {
        out.push(TrainingInstance::new(
            concepts.clone(),
            protos.prototypes.clone(),
            target.clone(),
            InstanceKind::Edit,
        )?);
    }
    for ((_, _), protos) in train.iter().zip(prototypes_of) {
        let p3 = &protos.prototypes[2];
        if p3.is_sentinel() {
            continue;
        }
        match extract_pseudo_concepts(p3, k, rng) {
            Ok(pseudo) => {
                out.push(TrainingInstance::new(
                    pseudo,
                    protos.prototypes.clone(),
                    p3.clone(),
                    InstanceKind::Augmented,
                )?);
            }
            Err(e) => log::warn!("augmentation skipped for prototype {}: {e}", p3.id),
        }
    }
    Ok(out)
}

/// Dataset JSONL record.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub kind: String,
    pub concepts: Vec<String>,
    pub prototypes: [String; 3],
    pub target: String,
}

pub fn kind_tag(kind: InstanceKind) -> &'static str {
    match kind {
        InstanceKind::Pretrain => "PRETRAIN",
        InstanceKind::Augmented => "AUGMENTED",
        InstanceKind::Edit => "EDIT",
        InstanceKind::Copy => "COPY",
    }
}

fn parse_kind(s: &str) -> Option<InstanceKind> {
    match s {
        "PRETRAIN" => Some(InstanceKind::Pretrain),
        "AUGMENTED" => Some(InstanceKind::Augmented),
        "EDIT" => Some(InstanceKind::Edit),
        "COPY" => Some(InstanceKind::Copy),
        _ => None,
    }
}

/// Write instances as dataset JSONL, one object per line, deterministic.
pub fn write_dataset(path: &Path, instances: &[TrainingInstance]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for inst in instances {
        let rec = DatasetRecord {
            kind: kind_tag(inst.kind).to_string(),
            concepts: inst.concepts.iter().map(|s| s.to_string()).collect(),
            prototypes: [
                inst.prototypes[0].text.clone(),
                inst.prototypes[1].text.clone(),
                inst.prototypes[2].text.clone(),
            ],
            target: inst.target.text.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a dataset JSONL file back, re-analyzing the sentences.
pub fn read_dataset(path: &Path, lexicon: &Lexicon) -> Result<Vec<TrainingInstance>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(line).map_err(|e| Kgr4Error::Malformed {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        let kind = parse_kind(&rec.kind).ok_or_else(|| Kgr4Error::Malformed {
            line: lineno + 1,
            msg: format!("unknown instance kind {:?}", rec.kind),
        })?;
        let concepts = ConceptSet::new(rec.concepts.into_iter(), kind != InstanceKind::Edit)
            .map_err(|e| Kgr4Error::Malformed {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        let prototypes = rec
            .prototypes
            .iter()
            .enumerate()
            .map(|(j, t)| {
                if t.is_empty() {
                    Sentence::sentinel()
                } else {
                    Sentence::analyze(format!("{lineno}-p{j}"), t, lexicon)
                }
            })
            .collect();
        let target = Sentence::analyze(format!("{lineno}-t"), &rec.target, lexicon);
        out.push(TrainingInstance::new(concepts, prototypes, target, kind)?);
    }
    Ok(out)
}

/// Difficulty-bucket connection pairs file: one "lemma_a<TAB>lemma_b" per line.
pub fn read_concept_graph(path: &Path) -> Result<BTreeSet<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next()) {
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => {
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                pairs.insert((a.to_string(), b.to_string()));
            }
            _ => {
                return Err(Kgr4Error::Malformed {
                    line: lineno + 1,
                    msg: "expected lemma_a<TAB>lemma_b".into(),
                })
            }
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;
    use rand::SeedableRng;
    use std::io::Write;

    fn lex() -> Lexicon {
        Lexicon::bundled()
    }

    fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("kgr4_corpus_test_{name}"));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn ingest_plain_lines() {
        let path = write_temp("plain.txt", "a dog runs\na cat sits\nbirds sing\n");
        let c = ingest(&path, CorpusFormat::PlainLines, &lex()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.sentences[0].id, "0");
        assert_eq!(c.sentences[2].id, "2");
    }

    #[test]
    fn ingest_empty_file() {
        let path = write_temp("empty.txt", "");
        let c = ingest(&path, CorpusFormat::PlainLines, &lex()).unwrap();
        assert_eq!(c.len(), 0);
    }

    #[test]
    fn ingest_commongen_pair() {
        let path = write_temp(
            "pairs.jsonl",
            r#"{"concepts":["hand","sink","wash","soap"],"target":"The girl uses soap to wash her hands at the sink."}"#,
        );
        let c = ingest(&path, CorpusFormat::CommongenPairs, &lex()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.pairs.len(), 1);
        let (concepts, target_idx) = &c.pairs[0];
        assert!(concepts.contains("hand"));
        assert!(concepts.contains("wash"));
        assert_eq!(
            c.sentences[*target_idx].text,
            "The girl uses soap to wash her hands at the sink."
        );
    }

    #[test]
    fn ingest_malformed_names_line() {
        let path = write_temp("bad.jsonl", "{\"id\":\"0\",\"text\":\"ok\"}\nnot json\n");
        let err = ingest(&path, CorpusFormat::Jsonl, &lex()).unwrap_err();
        match err {
            Kgr4Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn pseudo_concepts_are_content_lemmas() {
        let s = Sentence::analyze("0", "A man is washing his hands with soap in a sink.", &lex());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cs = extract_pseudo_concepts(&s, 4, &mut rng).unwrap();
        assert_eq!(cs.len(), 4);
        let eligible: BTreeSet<&str> = ["man", "wash", "hand", "soap", "sink"].into();
        for c in cs.iter() {
            assert!(eligible.contains(c), "unexpected concept {c}");
        }
    }

    #[test]
    fn pseudo_concepts_clamp_and_determinism() {
        let s = Sentence::analyze("0", "A dog runs.", &lex());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cs = extract_pseudo_concepts(&s, 5, &mut rng).unwrap();
        assert_eq!(cs.len(), 2); // dog, run

        let s2 = Sentence::analyze("0", "A man is washing his hands with soap.", &lex());
        let a = extract_pseudo_concepts(&s2, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = extract_pseudo_concepts(&s2, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pseudo_concepts_no_content_words() {
        let s = Sentence::analyze("0", "of the and", &lex());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            extract_pseudo_concepts(&s, 3, &mut rng),
            Err(Kgr4Error::NoContentWords(_))
        ));
    }

    #[test]
    fn pretrain_set_shape() {
        let path = write_temp(
            "pre.txt",
            "a man washes his hands\na dog runs in the park\na cat sits on the chair\n\
             a girl eats an apple\na boy throws a ball\nthe woman reads a book\n\
             a child plays in the garden\nthe man drinks water\na bird sings in a tree\n\
             the boy kicks the ball\n",
        );
        let c = ingest(&path, CorpusFormat::PlainLines, &lex()).unwrap();
        let idx = build_index(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = build_pretrain_set(&c, &idx, 5, &mut rng).unwrap();
        assert!(set.len() <= 10);
        for inst in &set {
            assert_eq!(inst.kind, InstanceKind::Pretrain);
            assert_eq!(inst.prototypes.len(), 3);
            // concepts come from the target sentence
            for concept in inst.concepts.iter() {
                assert!(inst.target.lemmas.iter().any(|l| l == concept));
            }
            // self-exclusion
            for p in inst.prototypes.iter().filter(|p| !p.is_sentinel()) {
                assert_ne!(p.id, inst.target.id);
            }
        }
    }

    #[test]
    fn pretrain_degenerate_pool_pads_with_sentinels() {
        let path = write_temp("one.txt", "a man washes his hands\n");
        let c = ingest(&path, CorpusFormat::PlainLines, &lex()).unwrap();
        let idx = build_index(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = build_pretrain_set(&c, &idx, 5, &mut rng).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set[0].prototypes.iter().all(|p| p.is_sentinel()));
    }

    #[test]
    fn augmentation_counts_and_subset() {
        let lex = lex();
        let target = Sentence::analyze("t", "a man washes his hands", &lex);
        let concepts = ConceptSet::new(["man".into(), "wash".into()], false).unwrap();
        let p3 = Sentence::analyze("p3", "a girl eats an apple in the park", &lex);
        let protos = PrototypeSet {
            prototypes: vec![
                Sentence::analyze("p1", "a dog runs", &lex),
                Sentence::analyze("p2", "a cat sits", &lex),
                p3.clone(),
            ],
            scores: vec![0.9, 0.5, 0.3],
        };
        let train = vec![(concepts, target)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out =
            build_retrospective_augmentation(&train, std::slice::from_ref(&protos), 5, &mut rng)
                .unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].kind, InstanceKind::Edit);
        assert_eq!(out[1].kind, InstanceKind::Augmented);
        assert_eq!(out[1].target.text, p3.text);
        for c in out[1].concepts.iter() {
            assert!(p3.lemmas.iter().any(|l| l == c));
        }
    }

    #[test]
    fn augmentation_skips_sentinel_p3() {
        let lex = lex();
        let target = Sentence::analyze("t", "a man washes his hands", &lex);
        let concepts = ConceptSet::new(["man".into()], false).unwrap();
        let protos = PrototypeSet {
            prototypes: vec![
                Sentence::analyze("p1", "a dog runs", &lex),
                Sentence::sentinel(),
                Sentence::sentinel(),
            ],
            scores: vec![0.9, 0.0, 0.0],
        };
        let train = vec![(concepts, target)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out =
            build_retrospective_augmentation(&train, std::slice::from_ref(&protos), 5, &mut rng)
                .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind, InstanceKind::Edit);
    }

    #[test]
    fn dataset_round_trip() {
        let lex = lex();
        let inst = TrainingInstance::new(
            ConceptSet::new(["dog".into(), "run".into()], false).unwrap(),
            vec![
                Sentence::analyze("a", "a dog runs", &lex),
                Sentence::analyze("b", "a cat sits", &lex),
                Sentence::sentinel(),
            ],
            Sentence::analyze("t", "the dog runs fast", &lex),
            InstanceKind::Edit,
        )
        .unwrap();
        let path = std::env::temp_dir().join("kgr4_dataset_rt.jsonl");
        write_dataset(&path, std::slice::from_ref(&inst)).unwrap();
        let back = read_dataset(&path, &lex).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].target.text, inst.target.text);
        assert!(back[0].prototypes[2].is_sentinel());
        assert_eq!(back[0].concepts, inst.concepts);
    }
}
