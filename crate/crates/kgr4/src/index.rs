//! Inverted-index lexical retrieval over lemmatized sentences, plus
//! scorer-reranked prototype selection.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{ConceptSet, Corpus};
use crate::error::{Kgr4Error, Result};
use crate::scorer::Scorer;
use crate::text::Sentence;

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// Lemma -> sorted, duplicate-free posting lists of sentence positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedIndex {
    pub version: u32,
    pub corpus_hash: String,
    pub postings: BTreeMap<String, Vec<usize>>,
}

impl InvertedIndex {
    /// Hash of the index structure; used to assert queries are read-only.
    pub fn structural_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("index serializes");
        crate::nn::hash_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path, corpus: &Corpus) -> Result<InvertedIndex> {
        let text = std::fs::read_to_string(path)?;
        let idx: InvertedIndex = serde_json::from_str(&text)?;
        if idx.version != INDEX_FORMAT_VERSION {
            return Err(Kgr4Error::Index(format!(
                "unsupported index version {}",
                idx.version
            )));
        }
        if idx.corpus_hash != corpus.hash() {
            return Err(Kgr4Error::Index(
                "index corpus hash does not match the provided corpus".into(),
            ));
        }
        Ok(idx)
    }
}

/// Exactly the positions of sentences containing each lemma.
pub fn build_index(corpus: &Corpus) -> InvertedIndex {
    let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, sentence) in corpus.sentences.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        for lemma in &sentence.lemmas {
            if seen.insert(lemma.as_str()) {
                postings.entry(lemma.clone()).or_default().push(i);
            }
        }
    }
    InvertedIndex {
        version: INDEX_FORMAT_VERSION,
        corpus_hash: corpus.hash(),
        postings,
    }
}

/// Rough concept-matching search: up to `pool` sentence positions ranked by
/// (matched-concept count desc, sentence length asc, position asc). Sentences
/// matching zero concepts are not returned.
pub fn rough_search(
    idx: &InvertedIndex,
    corpus: &Corpus,
    concepts: &ConceptSet,
    pool: usize,
) -> Vec<usize> {
    let mut match_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for concept in concepts.iter() {
        if let Some(list) = idx.postings.get(concept) {
            for &i in list {
                *match_counts.entry(i).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(usize, usize)> = match_counts.into_iter().collect();
    ranked.sort_by(|&(ia, ca), &(ib, cb)| {
        cb.cmp(&ca)
            .then(corpus.sentences[ia].len().cmp(&corpus.sentences[ib].len()))
            .then(ia.cmp(&ib))
    });
    ranked.into_iter().take(pool).map(|(i, _)| i).collect()
}

/// The final 3-slot prototype set with non-increasing scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub prototypes: Vec<Sentence>,
    pub scores: Vec<f64>,
}

impl PrototypeSet {
    pub fn sentinel_only() -> PrototypeSet {
        PrototypeSet {
            prototypes: vec![Sentence::sentinel(), Sentence::sentinel(), Sentence::sentinel()],
            scores: vec![0.0, 0.0, 0.0],
        }
    }
}

/// Retrieve the top-3 prototypes for a concept set. With a scorer the rough
/// candidates are re-ranked by its probability; without one (the pretraining
/// path) the rough concept-matching order is kept. `exclude_id` drops the
/// query's own target sentence from the candidates.
pub fn retrieve_prototypes(
    idx: &InvertedIndex,
    corpus: &Corpus,
    concepts: &ConceptSet,
    scorer: Option<&Scorer>,
    pool: usize,
    exclude_id: Option<&str>,
) -> Result<PrototypeSet> {
    if pool < 3 {
        return Err(Kgr4Error::InvalidArgument("pool must be >= 3".into()));
    }
    let candidates: Vec<usize> = rough_search(idx, corpus, concepts, pool)
        .into_iter()
        .filter(|&i| exclude_id != Some(corpus.sentences[i].id.as_str()))
        .collect();

    let mut scored: Vec<(usize, f64)> = match scorer {
        Some(scorer) => {
            let mut scored = Vec::with_capacity(candidates.len());
            for &i in &candidates {
                let s = scorer.score(concepts, &corpus.sentences[i])?;
                scored.push((i, s));
            }
            // stable sort keeps the rough order among score ties
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            scored
        }
        None => {
            let n = candidates.len();
            candidates
                .into_iter()
                .enumerate()
                .map(|(rank, i)| (i, (n - rank) as f64 / n.max(1) as f64))
                .collect()
        }
    };
    scored.truncate(3);

    let mut prototypes: Vec<Sentence> = Vec::with_capacity(3);
    let mut scores: Vec<f64> = Vec::with_capacity(3);
    for (i, s) in scored {
        prototypes.push(corpus.sentences[i].clone());
        scores.push(s);
    }
    while prototypes.len() < 3 {
        prototypes.push(Sentence::sentinel());
        scores.push(0.0);
    }
    Ok(PrototypeSet { prototypes, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest, CorpusFormat};
    use crate::text::Lexicon;
    use std::io::Write;

    fn toy_corpus(lines: &str, name: &str) -> Corpus {
        let path = std::env::temp_dir().join(format!("kgr4_index_test_{name}"));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        ingest(&path, CorpusFormat::PlainLines, &Lexicon::bundled()).unwrap()
    }

    #[test]
    fn build_index_postings() {
        let c = toy_corpus("a dog runs\na cat sits\n", "basic");
        let idx = build_index(&c);
        assert_eq!(idx.postings["dog"], vec![0]);
        assert_eq!(idx.postings["cat"], vec![1]);
        assert_eq!(idx.postings["a"], vec![0, 1]);
    }

    #[test]
    fn empty_corpus_empty_index() {
        let c = Corpus::default();
        let idx = build_index(&c);
        assert!(idx.postings.is_empty());
    }

    #[test]
    fn postings_cover_all_ids() {
        let c = toy_corpus("a dog runs\na cat sits\nbirds sing songs\n", "cover");
        let idx = build_index(&c);
        let mut ids: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
        for list in idx.postings.values() {
            assert!(list.windows(2).all(|w| w[0] < w[1]), "sorted, no dups");
            ids.extend(list.iter().copied());
        }
        assert_eq!(ids, (0..3).collect());
    }

    #[test]
    fn rough_search_ranks_by_overlap() {
        let c = toy_corpus("a dog runs\na cat sits\n", "rank");
        let idx = build_index(&c);
        let x = ConceptSet::new(["dog".into(), "run".into()], false).unwrap();
        let hits = rough_search(&idx, &c, &x, 10);
        assert_eq!(hits[0], 0);
    }

    #[test]
    fn rough_search_zero_match_is_empty() {
        let c = toy_corpus("a dog runs\n", "zebra");
        let idx = build_index(&c);
        let x = ConceptSet::new(["zebra".into()], false).unwrap();
        assert!(rough_search(&idx, &c, &x, 10).is_empty());
    }

    #[test]
    fn rough_search_tie_break_length_then_id() {
        // both match "dog" once; second sentence is shorter
        let c = toy_corpus("a dog runs in the park\na dog sits\nthe dog eats\n", "tie");
        let idx = build_index(&c);
        let x = ConceptSet::new(["dog".into()], false).unwrap();
        let hits = rough_search(&idx, &c, &x, 10);
        // id 1 ("a dog sits", 3 tokens) and id 2 ("the dog eats", 3 tokens) tie
        // on length, broken by position; id 0 is longest
        assert_eq!(hits, vec![1, 2, 0]);
    }

    #[test]
    fn retrieve_pads_with_sentinel() {
        let c = toy_corpus("a dog runs\na dog sits\n", "pad");
        let idx = build_index(&c);
        let x = ConceptSet::new(["dog".into()], false).unwrap();
        let protos = retrieve_prototypes(&idx, &c, &x, None, 100, None).unwrap();
        assert_eq!(protos.prototypes.len(), 3);
        assert!(protos.prototypes[2].is_sentinel());
        assert!(protos.scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn retrieve_excludes_self() {
        let c = toy_corpus("a dog runs\na dog sits\nthe dog eats\n", "excl");
        let idx = build_index(&c);
        let x = ConceptSet::new(["dog".into()], false).unwrap();
        let protos = retrieve_prototypes(&idx, &c, &x, None, 100, Some("1")).unwrap();
        assert!(protos.prototypes.iter().all(|p| p.id != "1"));
    }

    #[test]
    fn queries_do_not_mutate_index() {
        let c = toy_corpus("a dog runs\na cat sits\n", "readonly");
        let idx = build_index(&c);
        let before = idx.structural_hash();
        let x = ConceptSet::new(["dog".into(), "cat".into()], false).unwrap();
        let _ = rough_search(&idx, &c, &x, 10);
        let _ = retrieve_prototypes(&idx, &c, &x, None, 100, None).unwrap();
        assert_eq!(idx.structural_hash(), before);
    }

    #[test]
    fn persistence_validates_corpus_hash() {
        let c = toy_corpus("a dog runs\n", "persist");
        let idx = build_index(&c);
        let path = std::env::temp_dir().join("kgr4_index_persist.json");
        idx.save(&path).unwrap();
        assert!(InvertedIndex::load(&path, &c).is_ok());
        let other = toy_corpus("a cat sits\n", "persist2");
        assert!(InvertedIndex::load(&path, &other).is_err());
    }
}
