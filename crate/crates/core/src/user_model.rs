//! The user simulation function: a softmax classification head over pair
//! encodings, `U = softmax(W_T tanh(x) + B_T)`, reporting the probability of
//! the "Selected" class.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{PreparedState, SearchContext};
use crate::corpus::{tokenize, CorpusIndex, Document, Query, QrelTable};
use crate::encoder::{HashEncoder, PairCode, TextCode};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::state::SlateAction;

/// Index of the "Selected" class in the softmax output.
pub const SELECTED: usize = 1;

const PROB_FLOOR: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NotSelected = 0,
    Selected = 1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainPair {
    pub left_text: String,
    pub sentence: String,
    pub label: Label,
}

/// Trainable parameters `W_T` (2 x d, row-major by class) and `B_T`, plus the
/// Adam moments used by pretraining and rearrangement updates.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    dim: usize,
    pub w: Vec<f64>,
    pub b: [f64; 2],
    pub(crate) adam: Adam,
}

/// Gradient with the same layout as [`UserModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct UserGrad {
    pub w: Vec<f64>,
    pub b: [f64; 2],
}

impl UserGrad {
    fn zeros(dim: usize) -> Self {
        UserGrad {
            w: vec![0.0; 2 * dim],
            b: [0.0; 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub accuracy: f64,
    pub steps: usize,
}

impl UserModel {
    pub fn zeros(dim: usize) -> Self {
        UserModel {
            dim,
            w: vec![0.0; 2 * dim],
            b: [0.0; 2],
            adam: Adam::new(2 * dim + 2),
        }
    }

    /// Uniform in `[-1/sqrt(d), 1/sqrt(d)]`, biases zero.
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut m = UserModel::zeros(dim);
        for w in &mut m.w {
            *w = rng.gen_range(-bound..=bound);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn set_adam(&mut self, adam: Adam) -> Result<()> {
        if adam.len() != 2 * self.dim + 2 {
            return Err(Error::Checkpoint("user model optimizer size mismatch".into()));
        }
        self.adam = adam;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|v| v.is_finite())
    }

    pub fn logits(&self, enc: &HashEncoder, pair: &PairCode<'_>) -> [f64; 2] {
        let (w0, w1) = self.w.split_at(self.dim);
        let (mut z0, mut z1) = (0.0, 0.0);
        enc.for_each_tanh(pair, |i, t| {
            z0 += w0[i] * t;
            z1 += w1[i] * t;
        });
        [z0 + self.b[0], z1 + self.b[1]]
    }

    /// P(Selected), kept strictly inside (0, 1).
    pub fn prob(&self, enc: &HashEncoder, pair: &PairCode<'_>) -> f64 {
        selected_prob(self.logits(enc, pair))
    }

    /// `u_score` on raw texts.
    pub fn u_score(&self, enc: &HashEncoder, left: &str, sentence: &str) -> Result<f64> {
        let (l, s) = (enc.code_text(left), enc.code_text(sentence));
        let p = self.prob(enc, &enc.pair(&l, &s));
        if !p.is_finite() {
            return Err(Error::NonFinite("u_score".into()));
        }
        Ok(p)
    }

    /// Max `u_score` over the first `m` sentences of a document, with the
    /// (lowest) argmax index.
    pub fn doc_score_text(
        &self,
        enc: &HashEncoder,
        left: &str,
        doc: &Document,
        m: usize,
    ) -> Result<(f64, usize)> {
        if m == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        if doc.sentences.is_empty() {
            return Err(Error::EmptyDocument(doc.doc_id.clone()));
        }
        let l = enc.code_text(left);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, f) in doc.sentence_features().iter().enumerate().take(m) {
            let s = enc.code(f);
            let p = self.prob(enc, &enc.pair(&l, &s));
            if p > best.0 {
                best = (p, i);
            }
        }
        Ok(best)
    }

    /// Document score against an encoded left text, on a corpus document.
    pub fn doc_score(&self, ctx: &SearchContext, left: &TextCode, doc: u32, m: usize) -> Result<(f64, usize)> {
        if m == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        let codes = ctx.sentence_codes(doc);
        if codes.is_empty() {
            return Err(Error::EmptyDocument(ctx.doc(doc).doc_id.clone()));
        }
        let enc = ctx.encoder();
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, s) in codes.iter().enumerate().take(m) {
            let p = self.prob(enc, &enc.pair(left, s));
            if p > best.0 {
                best = (p, i);
            }
        }
        Ok(best)
    }

    /// Mean cross-entropy and its gradient over encoded pairs.
    pub fn cross_entropy_gradient(&self, enc: &HashEncoder, pairs: &[(PairCode<'_>, Label)]) -> (f64, UserGrad) {
        let mut grad = UserGrad::zeros(self.dim);
        let mut loss = 0.0;
        let scale = 1.0 / pairs.len().max(1) as f64;
        for (pair, label) in pairs {
            let z = self.logits(enc, pair);
            let probs = softmax(z);
            let y = *label as usize;
            loss -= log_softmax(z)[y];
            let mut dz = probs;
            dz[y] -= 1.0;
            self.accumulate(enc, pair, [dz[0] * scale, dz[1] * scale], &mut grad);
        }
        (loss * scale, grad)
    }

    fn accumulate(&self, enc: &HashEncoder, pair: &PairCode<'_>, dz: [f64; 2], grad: &mut UserGrad) {
        let dim = self.dim;
        enc.for_each_tanh(pair, |i, t| {
            grad.w[i] += dz[0] * t;
            grad.w[dim + i] += dz[1] * t;
        });
        grad.b[0] += dz[0];
        grad.b[1] += dz[1];
    }

    pub fn apply(&mut self, grad: &UserGrad, lr: f64) {
        self.adam.step(
            lr,
            [
                (self.w.as_mut_slice(), grad.w.as_slice()),
                (self.b.as_mut_slice(), grad.b.as_slice()),
            ],
        );
    }

    /// Minibatch Adam on cross-entropy. Reports full-set loss before and after.
    pub fn pretrain(
        &mut self,
        enc: &HashEncoder,
        pairs: &[PretrainPair],
        epochs: usize,
        lr: f64,
        batch: usize,
        seed: u64,
    ) -> Result<PretrainReport> {
        if pairs.is_empty() {
            return Err(Error::invalid("pretraining needs at least one pair"));
        }
        let texts: BTreeSet<&str> = pairs
            .iter()
            .flat_map(|p| [p.left_text.as_str(), p.sentence.as_str()])
            .collect();
        let codes: std::collections::HashMap<&str, TextCode> =
            texts.into_iter().map(|t| (t, enc.code_text(t))).collect();
        let encoded: Vec<(PairCode<'_>, Label)> = pairs
            .iter()
            .map(|p| (enc.pair(&codes[p.left_text.as_str()], &codes[p.sentence.as_str()]), p.label))
            .collect();

        let (initial_loss, _) = self.cross_entropy_gradient(enc, &encoded);
        if !initial_loss.is_finite() {
            return Err(Error::NonFinite("pretraining loss".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        let batch = batch.max(1);
        let mut steps = 0;
        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let mb: Vec<(PairCode<'_>, Label)> = chunk.iter().map(|&i| encoded[i].clone()).collect();
                let (loss, grad) = self.cross_entropy_gradient(enc, &mb);
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("pretraining loss at epoch {epoch}")));
                }
                self.apply(&grad, lr);
                steps += 1;
            }
        }
        let (final_loss, _) = self.cross_entropy_gradient(enc, &encoded);
        if !final_loss.is_finite() {
            return Err(Error::NonFinite("pretraining loss".into()));
        }
        let correct = encoded
            .iter()
            .filter(|(p, l)| (self.prob(enc, p) > 0.5) == (*l == Label::Selected))
            .count();
        Ok(PretrainReport {
            initial_loss,
            final_loss,
            accuracy: correct as f64 / encoded.len() as f64,
            steps,
        })
    }

    /// Rearrangement loss: mean over positions `j` and left texts `f` of
    /// `(U(f, d_Q_j) - U(f, d_U_j))^2`, with the `d_U` side held fixed as the
    /// target. Both slates must carry representative sentences.
    pub fn rearrangement_gradient(
        &self,
        ctx: &SearchContext,
        state: &PreparedState,
        a_q: &SlateAction,
        a_u: &SlateAction,
    ) -> Result<(f64, UserGrad)> {
        check_same_documents(a_q, a_u)?;
        let enc = ctx.encoder();
        let mut grad = UserGrad::zeros(self.dim);
        let n = (a_q.len() * state.left.len()).max(1) as f64;
        let mut loss = 0.0;
        for j in 0..a_q.len() {
            for f in &state.left {
                let target = self.prob(enc, &ctx.pair(f, a_u.docs[j], a_u.reps[j]));
                let pair = ctx.pair(f, a_q.docs[j], a_q.reps[j]);
                let p = self.prob(enc, &pair);
                let r = p - target;
                loss += r * r;
                if r != 0.0 {
                    let g = 2.0 * r / n * p * (1.0 - p);
                    self.accumulate(enc, &pair, [-g, g], &mut grad);
                }
            }
        }
        Ok((loss / n, grad))
    }

    /// One Adam step on the rearrangement loss; returns the pre-step loss.
    /// A zero loss leaves the parameters and optimizer untouched.
    pub fn rearrangement_update(
        &mut self,
        ctx: &SearchContext,
        state: &PreparedState,
        a_q: &SlateAction,
        a_u: &SlateAction,
        lr: f64,
    ) -> Result<f64> {
        let (loss, grad) = self.rearrangement_gradient(ctx, state, a_q, a_u)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("rearrangement loss".into()));
        }
        if loss > 0.0 {
            self.apply(&grad, lr);
        }
        Ok(loss)
    }

    /// Mean of `U(f, d_Q_j) - U(f, d_U_j)` over positions and left texts.
    /// Each side is summed in ascending order, so two orderings of the same
    /// documents (with the same representatives) give exactly zero.
    pub fn rearrangement_delta(
        &self,
        ctx: &SearchContext,
        state: &PreparedState,
        a_q: &SlateAction,
        a_u: &SlateAction,
    ) -> Result<f64> {
        check_same_documents(a_q, a_u)?;
        let enc = ctx.encoder();
        let side = |a: &SlateAction| {
            let mut v: Vec<f64> = state
                .left
                .iter()
                .flat_map(|f| a.docs.iter().zip(&a.reps).map(move |(&d, &r)| (f, d, r)))
                .map(|(f, d, r)| self.prob(enc, &ctx.pair(f, d, r)))
                .collect();
            v.sort_by(f64::total_cmp);
            v.into_iter().sum::<f64>()
        };
        let n = (a_q.len() * state.left.len()).max(1) as f64;
        Ok((side(a_q) - side(a_u)) / n)
    }
}

fn check_same_documents(a: &SlateAction, b: &SlateAction) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut x = a.docs.clone();
    let mut y = b.docs.clone();
    x.sort_unstable();
    y.sort_unstable();
    if x != y {
        return Err(Error::invalid("slates contain different documents"));
    }
    if !a.has_reps() || !b.has_reps() {
        return Err(Error::invalid("slates need representative sentences"));
    }
    Ok(())
}

pub fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

fn log_softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    [z[0] - lse, z[1] - lse]
}

fn selected_prob(z: [f64; 2]) -> f64 {
    softmax(z)[SELECTED].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Token-overlap count used to pick positive sentences.
fn overlap(query_tokens: &BTreeSet<String>, sentence: &str) -> usize {
    tokenize(sentence)
        .into_iter()
        .collect::<BTreeSet<_>>()
        .intersection(query_tokens)
        .count()
}

/// Builds Selected/NotSelected sentence pairs: for every (query, relevant
/// document) the sentence with the largest query-token overlap (lowest index
/// on ties) is a positive; each positive is matched by one sentence drawn
/// from a grade-0 document of the same query.
pub fn generate_pretrain_pairs(
    index: &CorpusIndex,
    qrels: &QrelTable,
    queries: &[Query],
    seed: u64,
) -> Result<Vec<PretrainPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for q in queries {
        let qtok: BTreeSet<String> = tokenize(&q.text).into_iter().collect();
        let mut positives = Vec::new();
        for (doc_id, grade) in qrels.judgments(&q.query_id) {
            if grade == 0 {
                continue;
            }
            let Some(doc) = index.get(doc_id) else { continue };
            let mut best = (0usize, 0usize);
            for s in &doc.sentences {
                let o = overlap(&qtok, &s.text);
                if o > best.0 {
                    best = (o, s.index);
                }
            }
            positives.push(doc.sentences[best.1].text.clone());
        }
        if positives.is_empty() {
            continue;
        }
        let negatives: Vec<&Document> = index
            .documents()
            .iter()
            .filter(|d| qrels.grade(&q.query_id, &d.doc_id) == 0)
            .collect();
        for p in &positives {
            out.push(PretrainPair {
                left_text: q.text.clone(),
                sentence: p.clone(),
                label: Label::Selected,
            });
        }
        if negatives.is_empty() {
            continue;
        }
        for _ in &positives {
            let d = negatives[rng.gen_range(0..negatives.len())];
            let s = &d.sentences[rng.gen_range(0..d.sentences.len())];
            out.push(PretrainPair {
                left_text: q.text.clone(),
                sentence: s.text.clone(),
                label: Label::NotSelected,
            });
        }
    }
    if !out.iter().any(|p| p.label == Label::Selected) {
        return Err(Error::NoPositives);
    }
    Ok(out)
}
