//! Seeded synthetic corpus with graded relevance, logged slates, a synonym
//! lexicon and a stopword list.
//!
//! Each topic has one anchor word shared by all of its documents and queries.
//! A query is `anchor facet1 facet2`, and carries three hidden intent words
//! that never appear in query text. Documents are assigned to queries in
//! turn and take one of these shapes:
//!
//! - primary (grade 2): one answer sentence holding the query as a phrase and
//!   the intent words as a phrase; other sentences carry single intent words
//!   and facet synonyms.
//! - partial (grade 1): one answer sentence with the anchor and the intent
//!   phrase; other sentences carry single intent words. Only the anchor ties
//!   these to the query, so they surface once a feedback sentence brings the
//!   intent words in.
//! - lure (grade 0): both facets repeated across sentences, never as the
//!   full query phrase, with no intent words.
//! - background (grade 0): topic vocabulary with at most one facet of some
//!   query of the topic.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::SynonymLexicon;
use crate::corpus::{queries_to_tsv, qrels_to_tsv, CorpusIndex, Document, Query, QrelTable};
use crate::error::{Error, Result};
use crate::metrics::labeled_reward;
use crate::policy::{logged_to_jsonl, LoggedRecord};

const STOPWORDS: &[&str] = &["the", "of", "and", "a", "in", "to", "is", "for", "with", "on", "as", "by"];
const CONSONANTS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "th"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub seed: u64,
    pub topics: usize,
    pub docs_per_topic: usize,
    pub queries_per_topic: usize,
    /// Length of logged slates.
    pub slate_len: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            topics: 8,
            docs_per_topic: 30,
            queries_per_topic: 8,
            slate_len: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocKind {
    Primary,
    Partial,
    Lure,
    Background,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub documents: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: QrelTable,
    pub logged: Vec<LoggedRecord>,
    pub lexicon: SynonymLexicon,
    pub stopwords: Vec<String>,
    /// Answer sentence index of every relevant (query, document) pair.
    pub answers: BTreeMap<(String, String), usize>,
    pub kinds: BTreeMap<String, DocKind>,
}

struct Vocab {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Vocab {
    fn word(&mut self) -> String {
        loop {
            let syl = self.rng.gen_range(2..=3);
            let w: String = (0..syl)
                .map(|_| {
                    format!(
                        "{}{}",
                        CONSONANTS.choose(&mut self.rng).expect("nonempty"),
                        VOWELS.choose(&mut self.rng).expect("nonempty")
                    )
                })
                .collect();
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }
}

struct QuerySpec {
    id: String,
    anchor: String,
    facets: [String; 2],
    intent: Vec<String>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> &'a str {
    pool.choose(rng).expect("nonempty pool")
}

/// A sentence of about `len` tokens: each run stays contiguous and in order,
/// runs and filler tokens are shuffled together.
fn sentence(rng: &mut ChaCha8Rng, runs: &[&[&str]], filler: &[String], len: usize) -> String {
    let content: usize = runs.iter().map(|r| r.len()).sum();
    let n_fill = len.saturating_sub(content).max(2);
    let mut items: Vec<Vec<String>> = runs.iter().map(|r| r.iter().map(|t| t.to_string()).collect()).collect();
    for _ in 0..n_fill {
        items.push(vec![pick(rng, filler).to_string()]);
    }
    items.shuffle(rng);
    let mut s = items.concat().join(" ");
    if let Some(f) = s.get(0..1) {
        let up = f.to_uppercase();
        s.replace_range(0..1, &up);
    }
    s.push('.');
    s
}

pub fn generate(p: SynthParams) -> Result<SyntheticData> {
    if p.topics == 0 || p.docs_per_topic == 0 || p.queries_per_topic == 0 || p.slate_len == 0 {
        return Err(Error::invalid("synthetic sizes must be at least 1"));
    }
    let mut vocab = Vocab {
        rng: ChaCha8Rng::seed_from_u64(p.seed ^ 0x5eed_c0de),
        used: STOPWORDS.iter().map(|s| s.to_string()).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let generic = vocab.words(120);
    let mut lex_lines = BTreeMap::new();
    let stop: Vec<String> = STOPWORDS.iter().map(|s| s.to_string()).collect();

    let mut documents = Vec::new();
    let mut queries = Vec::new();
    let mut qrels = QrelTable::new();
    let mut answers = BTreeMap::new();
    let mut kinds = BTreeMap::new();

    for t in 0..p.topics {
        let anchor = vocab.word();
        let topic_words = vocab.words(30);
        let mut filler: Vec<String> = generic.clone();
        filler.extend(topic_words.iter().cloned());
        filler.extend(stop.iter().cloned());
        filler.extend(stop.iter().cloned());

        let specs: Vec<QuerySpec> = (0..p.queries_per_topic)
            .map(|k| QuerySpec {
                id: format!("t{t}-q{k}"),
                anchor: anchor.clone(),
                facets: [vocab.word(), vocab.word()],
                intent: vocab.words(3),
            })
            .collect();
        let mut synonyms: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for s in &specs {
            for f in &s.facets {
                let n = rng.gen_range(1..=2);
                synonyms.insert(f.clone(), vocab.words(n));
            }
            queries.push(Query::new(&s.id, format!("{} {} {}", s.anchor, s.facets[0], s.facets[1]))?);
        }
        for tw in topic_words.iter().take(10) {
            synonyms.insert(tw.clone(), vocab.words(1));
        }

        let mut topic_docs = Vec::new();
        for j in 0..p.docs_per_topic {
            let k = j % p.queries_per_topic;
            let round = j / p.queries_per_topic;
            let kind = match round {
                0 => DocKind::Primary,
                1 | 3 => DocKind::Partial,
                2 => DocKind::Lure,
                _ => DocKind::Background,
            };
            let q = &specs[k];
            let [f1, f2] = [q.facets[0].as_str(), q.facets[1].as_str()];
            let syn = |f: &str, rng: &mut ChaCha8Rng| synonyms[f].choose(rng).expect("nonempty").clone();
            let n_sent = rng.gen_range(4..=6);
            let answer_at = rng.gen_range(0..n_sent);
            let mut sentences = Vec::with_capacity(n_sent);
            for i in 0..n_sent {
                let len = rng.gen_range(7..=11);
                let [i0, i1, i2] = [q.intent[0].as_str(), q.intent[1].as_str(), q.intent[2].as_str()];
                let s = match kind {
                    DocKind::Primary if i == answer_at => {
                        sentence(&mut rng, &[&[&q.anchor, f1, f2], &[i0, i1, i2]], &filler, len)
                    }
                    DocKind::Primary => {
                        let s1 = if i % 2 == 0 { syn(f1, &mut rng) } else { syn(f2, &mut rng) };
                        sentence(&mut rng, &[&[&q.intent[i % 3]], &[&s1]], &filler, len)
                    }
                    DocKind::Partial if i == answer_at => sentence(&mut rng, &[&[&q.anchor], &[i0, i1, i2]], &filler, len),
                    DocKind::Partial => sentence(&mut rng, &[&[&q.intent[(i + j) % 3]]], &filler, len),
                    DocKind::Lure if i == 0 => sentence(&mut rng, &[&[&q.anchor, f1], &[f2]], &filler, len),
                    DocKind::Lure => {
                        let f = if i % 2 == 0 { f1 } else { f2 };
                        let extra = if i == 1 { q.anchor.as_str() } else { f };
                        sentence(&mut rng, &[&[f], &[extra]], &filler, len)
                    }
                    DocKind::Background if i == answer_at => {
                        let other = &specs[rng.gen_range(0..specs.len())];
                        let f = other.facets[rng.gen_range(0..2)].clone();
                        sentence(&mut rng, &[&[&anchor], &[&f]], &filler, len)
                    }
                    DocKind::Background => {
                        let a = pick(&mut rng, &topic_words).to_string();
                        sentence(&mut rng, &[&[&a]], &filler, len)
                    }
                };
                sentences.push(s);
            }
            let doc_id = format!("t{t}-d{j:02}");
            for s in &specs {
                let grade = if s.id == q.id {
                    match kind {
                        DocKind::Primary => 2,
                        DocKind::Partial => 1,
                        _ => 0,
                    }
                } else {
                    0
                };
                qrels.insert(&s.id, &doc_id, grade);
                if grade > 0 {
                    answers.insert((s.id.clone(), doc_id.clone()), answer_at);
                }
            }
            kinds.insert(doc_id.clone(), kind);
            topic_docs.push(Document::from_sentences(doc_id, sentences));
        }
        for (k, v) in synonyms {
            lex_lines.insert(k, v);
        }
        documents.extend(topic_docs);
    }

    let lexicon = SynonymLexicon::from_tsv(
        &lex_lines
            .iter()
            .map(|(k, v)| format!("{k}\t{}\n", v.join(",")))
            .collect::<String>(),
    )?;

    let index = CorpusIndex::from_documents(documents.clone())?;
    let mut logged = Vec::new();
    for q in &queries {
        let top: Vec<String> = index.bm25_ids(q, p.slate_len).into_iter().map(|(d, _)| d).collect();
        if top.is_empty() {
            continue;
        }
        let reward = labeled_reward(&top, &qrels, &q.query_id);
        let mut shuffled = top.clone();
        shuffled.shuffle(&mut rng);
        logged.push(LoggedRecord {
            query_id: q.query_id.clone(),
            doc_ids: top,
            reward: Some(reward),
        });
        logged.push(LoggedRecord {
            query_id: q.query_id.clone(),
            doc_ids: shuffled,
            reward: None,
        });
    }

    Ok(SyntheticData {
        documents,
        queries,
        qrels,
        logged,
        lexicon,
        stopwords: stop,
        answers,
        kinds,
    })
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const QUERIES_FILE: &str = "queries.tsv";
pub const QRELS_FILE: &str = "qrels.tsv";
pub const LOGGED_FILE: &str = "logged.jsonl";
pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const STOPWORDS_FILE: &str = "stopwords.txt";

impl SyntheticData {
    pub fn index(&self) -> Result<CorpusIndex> {
        CorpusIndex::from_documents(self.documents.clone())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let index = self.index()?;
        let files = [
            (CORPUS_FILE, index.to_jsonl()),
            (QUERIES_FILE, queries_to_tsv(&self.queries)),
            (QRELS_FILE, qrels_to_tsv(&self.qrels)),
            (LOGGED_FILE, logged_to_jsonl(&self.logged)?),
            (LEXICON_FILE, self.lexicon.to_tsv()),
            (STOPWORDS_FILE, self.stopwords.iter().map(|s| format!("{s}\n")).collect()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn small_counts() {
        let d = generate(SynthParams {
            seed: 3,
            topics: 2,
            docs_per_topic: 5,
            queries_per_topic: 2,
            slate_len: 10,
        })
        .unwrap();
        assert_eq!(d.documents.len(), 10);
        assert_eq!(d.queries.len(), 4);
        // every query judged against every document of its topic
        assert_eq!(d.qrels.len(), 4 * 5);
        assert!(d.queries.iter().all(|q| d.qrels.has_relevant(&q.query_id)));
    }

    #[test]
    fn answer_sentence_has_highest_overlap() {
        let d = generate(SynthParams::default()).unwrap();
        let idx = d.index().unwrap();
        for ((qid, doc_id), &ans) in &d.answers {
            let q = d.queries.iter().find(|q| &q.query_id == qid).unwrap();
            let qt: BTreeSet<String> = tokenize(&q.text).into_iter().collect();
            let doc = idx.get(doc_id).unwrap();
            let ov: Vec<usize> = doc
                .sentences
                .iter()
                .map(|s| tokenize(&s.text).into_iter().collect::<BTreeSet<_>>().intersection(&qt).count())
                .collect();
            let best = *ov.iter().max().unwrap();
            assert_eq!(ov[ans], best, "{qid} {doc_id}");
            assert!(ov.iter().enumerate().all(|(i, &o)| i == ans || o < best), "{qid} {doc_id} {ov:?}");
        }
    }

    #[test]
    fn regeneration_is_identical() {
        let a = generate(SynthParams::default()).unwrap();
        let b = generate(SynthParams::default()).unwrap();
        assert_eq!(a.documents.iter().map(|d| d.full_text()).collect::<Vec<_>>(), b.documents.iter().map(|d| d.full_text()).collect::<Vec<_>>());
        assert_eq!(a.logged, b.logged);
        assert_eq!(a.lexicon, b.lexicon);
    }
}
