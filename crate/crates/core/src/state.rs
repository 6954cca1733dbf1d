//! Search state (query plus accumulated feedback sentences) and slate actions.

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, Query};
use crate::error::{Error, Result};

/// The query and the feedback sentences collected so far. `f_0` is the query;
/// feedback sentences are `f_1..f_E`, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub query: Query,
    pub feedback: Vec<String>,
}

impl State {
    pub fn new(query: Query) -> Self {
        State {
            query,
            feedback: Vec::new(),
        }
    }

    pub fn with_feedback(query: Query, feedback: Vec<String>) -> Self {
        State { query, feedback }
    }

    /// Number of feedback sentences currently held.
    pub fn e_cur(&self) -> usize {
        self.feedback.len()
    }

    /// Query followed by feedback sentences.
    pub fn left_texts(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.query.text.as_str()).chain(self.feedback.iter().map(String::as_str))
    }

    /// Appends `sentence` unless its text is already present. At capacity the
    /// oldest feedback sentence is evicted first. The query never changes.
    pub fn append_feedback(&self, sentence: &str, e_max: usize) -> State {
        let mut next = self.clone();
        if e_max == 0 || next.feedback.iter().any(|f| f == sentence) {
            return next;
        }
        while next.feedback.len() >= e_max {
            next.feedback.remove(0);
        }
        next.feedback.push(sentence.to_owned());
        next
    }
}

/// An ordered slate of documents (corpus indices) and the representative
/// sentence chosen for each.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlateAction {
    pub docs: Vec<u32>,
    #[serde(default)]
    pub reps: Vec<usize>,
}

impl SlateAction {
    pub fn new(docs: Vec<u32>) -> Self {
        SlateAction {
            docs,
            reps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn has_reps(&self) -> bool {
        self.reps.len() == self.docs.len()
    }

    pub fn has_duplicates(&self) -> bool {
        let mut d = self.docs.clone();
        d.sort_unstable();
        d.windows(2).any(|w| w[0] == w[1])
    }

    pub fn doc_ids(&self, index: &CorpusIndex) -> Vec<String> {
        self.docs
            .iter()
            .map(|&d| index.doc(d).doc_id.clone())
            .collect()
    }

    pub fn from_ids(index: &CorpusIndex, ids: &[String]) -> Result<Self> {
        let docs = ids
            .iter()
            .map(|id| {
                index
                    .index_of(id)
                    .ok_or_else(|| Error::UnknownDocument(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SlateAction::new(docs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Query {
        Query::new("q1", "solar panels").unwrap()
    }

    #[test]
    fn append_semantics() {
        let s = State::new(q());
        let s1 = s.append_feedback("panels lose output.", 5);
        assert_eq!(s1.e_cur(), 1);
        assert_eq!(s1.append_feedback("panels lose output.", 5), s1);
        let mut fifo = State::new(q());
        for t in ["a b.", "c d.", "e f."] {
            fifo = fifo.append_feedback(t, 2);
        }
        assert_eq!(fifo.feedback, ["c d.", "e f."]);
        assert_eq!(fifo.query, q());
    }

    #[test]
    fn left_texts_start_with_query() {
        let s = State::with_feedback(q(), vec!["x y.".into()]);
        assert_eq!(s.left_texts().collect::<Vec<_>>(), ["solar panels", "x y."]);
    }
}
