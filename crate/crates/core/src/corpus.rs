//! Document ingestion, sentence segmentation, query/qrel loading and BM25
//! initial retrieval.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::TextFeatures;
use crate::error::{Error, Result};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
}

/// Splits on '.', '!' or '?' followed by whitespace (or end of input).
///
/// A fragment with fewer than two tokens is merged into the previous
/// sentence; a leading short fragment is carried forward into the next one.
/// Merged sentences keep the original text between their boundaries.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut fragments: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().map_or(true, |&(_, n)| n.is_whitespace());
            if at_boundary {
                fragments.push((start.take().unwrap(), i + c.len_utf8()));
            }
        }
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            fragments.push((s, end));
        }
    }

    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut pending: Option<usize> = None;
    for (s, e) in fragments {
        let s = pending.take().unwrap_or(s);
        if tokenize(&text[s..e]).len() >= 2 {
            spans.push((s, e));
        } else if let Some(last) = spans.last_mut() {
            last.1 = e;
        } else {
            pending = Some(s);
        }
    }
    if let Some(s) = pending {
        // Only short fragments overall: keep them as one sentence.
        spans.push((s, text.trim_end().len()));
    }
    spans
        .into_iter()
        .enumerate()
        .map(|(index, (s, e))| Sentence {
            index,
            text: text[s..e].to_owned(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("query text is empty"));
        }
        Ok(Query {
            query_id: query_id.into(),
            text,
        })
    }
}

/// A document with its sentences and their hashed features.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "DocumentRecord", into = "DocumentRecord")]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub token_count: usize,
    features: Vec<TextFeatures>,
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    doc_id: String,
    sentences: Vec<String>,
}

impl From<DocumentRecord> for Document {
    fn from(r: DocumentRecord) -> Self {
        Document::from_sentences(r.doc_id, r.sentences)
    }
}

impl From<Document> for DocumentRecord {
    fn from(d: Document) -> Self {
        DocumentRecord {
            doc_id: d.doc_id,
            sentences: d.sentences.into_iter().map(|s| s.text).collect(),
        }
    }
}

impl Document {
    pub fn from_sentences(doc_id: impl Into<String>, sentences: Vec<String>) -> Self {
        let sentences: Vec<Sentence> = sentences
            .into_iter()
            .enumerate()
            .map(|(index, text)| Sentence { index, text })
            .collect();
        let token_count = sentences.iter().map(|s| tokenize(&s.text).len()).sum();
        let features = sentences.iter().map(|s| TextFeatures::new(&s.text)).collect();
        Document {
            doc_id: doc_id.into(),
            sentences,
            token_count,
            features,
        }
    }

    pub fn from_text(doc_id: impl Into<String>, text: &str) -> Self {
        let sentences = split_sentences(text).into_iter().map(|s| s.text).collect();
        Document::from_sentences(doc_id, sentences)
    }

    pub fn sentence_features(&self) -> &[TextFeatures] {
        &self.features
    }

    pub fn full_text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Graded relevance judgments. Absent pairs have grade 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QrelTable {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl QrelTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Option<u32> {
        self.grades
            .entry(query_id.to_owned())
            .or_default()
            .insert(doc_id.to_owned(), grade)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    /// Whether the pair was explicitly judged (grade 0 included).
    pub fn judged(&self, query_id: &str, doc_id: &str) -> bool {
        self.grades
            .get(query_id)
            .is_some_and(|m| m.contains_key(doc_id))
    }

    pub fn judgments(&self, query_id: &str) -> impl Iterator<Item = (&str, u32)> {
        self.grades
            .get(query_id)
            .into_iter()
            .flat_map(|m| m.iter().map(|(d, g)| (d.as_str(), *g)))
    }

    pub fn has_relevant(&self, query_id: &str) -> bool {
        self.judgments(query_id).any(|(_, g)| g > 0)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.grades.values().all(|m| m.is_empty())
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(|m| m.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable BM25 index. Documents are stored sorted by `doc_id`, so document
/// indices and postings order agree with ascending `doc_id`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusIndex {
    docs: Vec<Document>,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_len: Vec<u32>,
    avg_len: f64,
    #[serde(skip)]
    by_id: HashMap<String, u32>,
}

#[derive(Deserialize)]
struct CorpusLine {
    doc_id: String,
    #[serde(default)]
    sentences: Option<Vec<String>>,
    #[serde(default)]
    text: Option<String>,
}

impl CorpusIndex {
    pub fn from_documents(mut docs: Vec<Document>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        for pair in docs.windows(2) {
            if pair[0].doc_id == pair[1].doc_id {
                return Err(Error::DuplicateDoc(pair[0].doc_id.clone()));
            }
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            if doc.sentences.is_empty() {
                return Err(Error::EmptyDocument(doc.doc_id.clone()));
            }
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            let mut len = 0u32;
            for s in &doc.sentences {
                for tok in tokenize(&s.text) {
                    *tf.entry(tok).or_default() += 1;
                    len += 1;
                }
            }
            for (term, n) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: i as u32,
                    tf: n,
                });
            }
            doc_len.push(len);
        }
        let avg_len = doc_len.iter().map(|&l| l as f64).sum::<f64>() / docs.len() as f64;
        let mut index = CorpusIndex {
            docs,
            postings,
            doc_len,
            avg_len,
            by_id: HashMap::new(),
        };
        index.rebuild_lookup();
        Ok(index)
    }

    fn rebuild_lookup(&mut self) {
        self.by_id = self
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i as u32))
            .collect();
    }

    /// Parses corpus JSONL: one `{"doc_id", "sentences"}` or `{"doc_id", "text"}`
    /// object per line. Pre-split sentences take precedence over `text`.
    pub fn from_jsonl(content: &str) -> Result<Self> {
        let mut docs = Vec::new();
        let mut seen = BTreeSet::new();
        for (n, line) in content.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CorpusLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if !seen.insert(rec.doc_id.clone()) {
                return Err(Error::DuplicateDoc(rec.doc_id));
            }
            let doc = match (rec.sentences, rec.text) {
                (Some(s), _) => Document::from_sentences(
                    rec.doc_id,
                    s.into_iter().filter(|t| !t.trim().is_empty()).collect(),
                ),
                (None, Some(t)) => Document::from_text(rec.doc_id, &t),
                (None, None) => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "record needs `sentences` or `text`".into(),
                    })
                }
            };
            if doc.sentences.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("document {:?} has no sentences", doc.doc_id),
                });
            }
            docs.push(doc);
        }
        Self::from_documents(docs)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.docs {
            let rec = serde_json::json!({
                "doc_id": d.doc_id,
                "sentences": d.sentences.iter().map(|s| &s.text).collect::<Vec<_>>(),
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    /// Loads either corpus JSONL or a serialized index (a single JSON object
    /// with a `postings` field).
    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if content.trim_start().starts_with('{') && content.contains("\"postings\"") {
            let mut index: CorpusIndex = serde_json::from_str(&content)?;
            index.rebuild_lookup();
            return Ok(index);
        }
        Self::from_jsonl(&content)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc(&self, idx: u32) -> &Document {
        &self.docs[idx as usize]
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i as usize])
    }

    pub fn index_of(&self, doc_id: &str) -> Option<u32> {
        self.by_id.get(doc_id).copied()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn doc_len(&self, idx: u32) -> u32 {
        self.doc_len[idx as usize]
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    /// Okapi BM25 with `idf = ln(1 + (N - df + 0.5) / (df + 0.5))`. Results are
    /// sorted by descending score, ties by ascending `doc_id`.
    pub fn bm25_retrieve(&self, query: &str, k: usize) -> Vec<(u32, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let n = self.docs.len() as f64;
        let mut scores = vec![0.0f64; self.docs.len()];
        let mut hit = vec![false; self.docs.len()];
        for term in &terms {
            let plist = self.postings(term);
            if plist.is_empty() {
                continue;
            }
            let df = plist.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for p in plist {
                let tf = p.tf as f64;
                let len = self.doc_len[p.doc as usize] as f64;
                let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * len / self.avg_len);
                scores[p.doc as usize] += idf * tf * (BM25_K1 + 1.0) / (tf + norm);
                hit[p.doc as usize] = true;
            }
        }
        let mut ranked: Vec<(u32, f64)> = (0..self.docs.len())
            .filter(|&i| hit[i])
            .map(|i| (i as u32, scores[i]))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }

    /// [`Self::bm25_retrieve`] with document ids resolved.
    pub fn bm25_ids(&self, query: &Query, k: usize) -> Vec<(String, f64)> {
        self.bm25_retrieve(&query.text, k)
            .into_iter()
            .map(|(i, s)| (self.doc(i).doc_id.clone(), s))
            .collect()
    }
}

pub fn ingest_corpus(path: &Path) -> Result<CorpusIndex> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CorpusIndex::from_jsonl(&content)
}

fn data_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parses `query_id \t text` rows.
pub fn parse_queries(content: &str) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (line, row) in data_lines(content) {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 tab-separated columns, found {}", cols.len()),
            });
        }
        let q = Query::new(cols[0].trim(), cols[1].trim()).map_err(|_| Error::Parse {
            line,
            message: "empty query text".into(),
        })?;
        out.push(q);
    }
    Ok(out)
}

/// Parses TREC qrels (`query_id \t 0 \t doc_id \t grade`). Duplicate pairs keep
/// the last grade; each duplicate produces a warning string.
pub fn parse_qrels(content: &str) -> Result<(QrelTable, Vec<String>)> {
    let mut table = QrelTable::new();
    let mut warnings = Vec::new();
    for (line, row) in data_lines(content) {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        let grade: u32 = cols[3].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("grade {:?} is not a non-negative integer", cols[3]),
        })?;
        let (q, d) = (cols[0].trim(), cols[2].trim());
        if let Some(prev) = table.insert(q, d, grade) {
            warnings.push(format!(
                "line {line}: duplicate judgment ({q}, {d}); grade {prev} replaced by {grade}"
            ));
        }
    }
    Ok((table, warnings))
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_queries(&content)
}

pub fn load_qrels(path: &Path) -> Result<QrelTable> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (table, warnings) = parse_qrels(&content)?;
    for w in warnings {
        tracing::warn!("{}: {w}", path.display());
    }
    Ok(table)
}

pub fn queries_to_tsv(queries: &[Query]) -> String {
    queries
        .iter()
        .map(|q| format!("{}\t{}\n", q.query_id, q.text))
        .collect()
}

pub fn qrels_to_tsv(qrels: &QrelTable) -> String {
    let mut out = String::new();
    for q in qrels.query_ids() {
        for (d, g) in qrels.judgments(q) {
            out.push_str(&format!("{q}\t0\t{d}\t{g}\n"));
        }
    }
    out
}
