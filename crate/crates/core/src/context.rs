use std::sync::Arc;

use crate::corpus::{CorpusIndex, Document};
use crate::encoder::{HashEncoder, PairCode, TextCode};
use crate::qnet::ndcg_weights;
use crate::state::State;

/// A corpus index paired with an encoder and the encoded sentences of every
/// document. Immutable once built; share it behind an `Arc`.
#[derive(Debug)]
pub struct SearchContext {
    index: Arc<CorpusIndex>,
    encoder: HashEncoder,
    codes: Vec<Vec<TextCode>>,
}

/// Encoded left-hand texts of a state (`f_0` = query, then feedback) and the
/// normalized discount weights over them.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub left: Vec<TextCode>,
    pub weights: Vec<f64>,
}

impl SearchContext {
    pub fn new(index: Arc<CorpusIndex>, encoder: HashEncoder) -> Self {
        let codes = index
            .documents()
            .iter()
            .map(|d| d.sentence_features().iter().map(|f| encoder.code(f)).collect())
            .collect();
        SearchContext {
            index,
            encoder,
            codes,
        }
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn shared_index(&self) -> Arc<CorpusIndex> {
        Arc::clone(&self.index)
    }

    pub fn encoder(&self) -> &HashEncoder {
        &self.encoder
    }

    pub fn doc(&self, idx: u32) -> &Document {
        self.index.doc(idx)
    }

    pub fn sentence_codes(&self, doc: u32) -> &[TextCode] {
        &self.codes[doc as usize]
    }

    pub fn prepare(&self, state: &State) -> PreparedState {
        PreparedState {
            left: state.left_texts().map(|t| self.encoder.code_text(t)).collect(),
            weights: ndcg_weights(state.e_cur()),
        }
    }

    pub fn prepare_text(&self, text: &str) -> TextCode {
        self.encoder.code_text(text)
    }

    pub fn pair<'a>(&'a self, left: &'a TextCode, doc: u32, sentence: usize) -> PairCode<'a> {
        self.encoder.pair(left, &self.codes[doc as usize][sentence])
    }
}
