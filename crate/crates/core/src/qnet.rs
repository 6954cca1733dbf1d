//! Slate value network: per-document weighted pair embeddings are concatenated
//! in slate order and passed through one tanh hidden layer.
//!
//! `W1` is stored input-major (`w1t[(pos * d + j) * h + r]`) so sparse inputs
//! and cached per-position projections both read contiguous rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::{PreparedState, SearchContext};
use crate::encoder::Vector;
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::state::SlateAction;
use crate::user_model::UserModel;

/// Discount weights over `f_0..f_E`: `(1/ln(e+1))` for `e = 1..E+1`,
/// normalized to sum to one.
pub fn ndcg_weights(e_cur: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=e_cur + 1).map(|e| 1.0 / ((e + 1) as f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// `V(s, d) = sum_e w_e U(f_e, d)` for one sentence of a corpus document.
pub fn v_score(ctx: &SearchContext, user: &UserModel, state: &PreparedState, doc: u32, sentence: usize) -> f64 {
    let enc = ctx.encoder();
    let mut v = 0.0;
    for (f, w) in state.left.iter().zip(&state.weights) {
        v += w * user.prob(enc, &ctx.pair(f, doc, sentence));
    }
    v
}

/// Argmax of `V` over the first `m` sentences (lowest index on ties), with
/// the winning value.
pub fn select_representative(
    ctx: &SearchContext,
    user: &UserModel,
    state: &PreparedState,
    doc: u32,
    m: usize,
) -> Result<(usize, f64)> {
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    let n = ctx.sentence_codes(doc).len();
    if n == 0 {
        return Err(Error::EmptyDocument(ctx.doc(doc).doc_id.clone()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..n.min(m) {
        let v = v_score(ctx, user, state, doc, i);
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// `x' = sum_e w_e encode_pair(f_e, sentence)`.
pub fn weighted_embed(ctx: &SearchContext, state: &PreparedState, doc: u32, sentence: usize) -> Vector {
    let enc = ctx.encoder();
    let mut out = Vector::zeros(enc.dim());
    for (f, w) in state.left.iter().zip(&state.weights) {
        enc.add_dense(&ctx.pair(f, doc, sentence), *w, &mut out);
    }
    out
}

/// Fills representatives for every slate document under `state`.
pub fn with_representatives(
    ctx: &SearchContext,
    user: &UserModel,
    state: &PreparedState,
    docs: &[u32],
    m: usize,
) -> Result<SlateAction> {
    let reps = docs
        .iter()
        .map(|&d| select_representative(ctx, user, state, d, m).map(|(i, _)| i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SlateAction {
        docs: docs.to_vec(),
        reps,
    })
}

/// Embeddings of a slate whose representatives are already chosen.
pub fn slate_embeddings(ctx: &SearchContext, state: &PreparedState, slate: &SlateAction) -> Result<Vec<Vector>> {
    if !slate.has_reps() {
        return Err(Error::invalid("slate needs representative sentences"));
    }
    Ok(slate
        .docs
        .iter()
        .zip(&slate.reps)
        .map(|(&d, &r)| weighted_embed(ctx, state, d, r))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QParams {
    pub n: usize,
    pub d: usize,
    pub h: usize,
    pub w1t: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QGrad {
    pub w1t: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl QParams {
    pub fn zeros(n: usize, d: usize, h: usize) -> Self {
        QParams {
            n,
            d,
            h,
            w1t: vec![0.0; n * d * h],
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
        }
    }

    /// Uniform `±1/sqrt(fan_in)` per layer.
    pub fn init(n: usize, d: usize, h: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = QParams::zeros(n, d, h);
        let b_in = 1.0 / ((n * d) as f64).sqrt();
        let b_hid = 1.0 / (h as f64).sqrt();
        for w in p.w1t.iter_mut().chain(p.b1.iter_mut()) {
            *w = rng.gen_range(-b_in..=b_in);
        }
        for w in &mut p.w2 {
            *w = rng.gen_range(-b_hid..=b_hid);
        }
        p.b2 = rng.gen_range(-b_hid..=b_hid);
        p
    }

    pub fn len(&self) -> usize {
        self.w1t.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_finite(&self) -> bool {
        self.b2.is_finite() && self.w1t.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite())
    }

    /// `W1[:, pos block] · x` for one slate position.
    pub fn project(&self, pos: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.h];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let row = &self.w1t[(pos * self.d + j) * self.h..][..self.h];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xj * w;
            }
        }
        out
    }

    /// Output from per-position projections, summed onto `b1` in slate order.
    pub fn value_from_projections<'a>(&self, projections: impl IntoIterator<Item = &'a [f64]>) -> f64 {
        let mut pre = self.b1.clone();
        for p in projections {
            for (a, b) in pre.iter_mut().zip(p) {
                *a += b;
            }
        }
        self.head(&pre)
    }

    fn head(&self, pre: &[f64]) -> f64 {
        let mut q = 0.0;
        for (w, z) in self.w2.iter().zip(pre) {
            q += w * z.tanh();
        }
        q + self.b2
    }

    fn check_inputs(&self, inputs: &[Vector]) -> Result<()> {
        if inputs.len() != self.n {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: self.n,
            });
        }
        if let Some(x) = inputs.iter().find(|x| x.len() != self.d) {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: self.d,
            });
        }
        Ok(())
    }

    /// `Q` of concatenated slate embeddings.
    pub fn forward(&self, inputs: &[Vector]) -> Result<f64> {
        self.check_inputs(inputs)?;
        let projs: Vec<Vec<f64>> = inputs.iter().enumerate().map(|(p, x)| self.project(p, x)).collect();
        Ok(self.value_from_projections(projs.iter().map(Vec::as_slice)))
    }

    fn forward_hidden(&self, inputs: &[Vector]) -> (f64, Vec<f64>) {
        let mut pre = self.b1.clone();
        for (pos, x) in inputs.iter().enumerate() {
            for (a, b) in pre.iter_mut().zip(self.project(pos, x)) {
                *a += b;
            }
        }
        let q = self.head(&pre);
        (q, pre.iter().map(|z| z.tanh()).collect())
    }

    fn backward(&self, inputs: &[Vector], hidden: &[f64], g: f64, grad: &mut QGrad) {
        grad.b2 += g;
        let mut dpre = vec![0.0; self.h];
        for r in 0..self.h {
            grad.w2[r] += g * hidden[r];
            dpre[r] = g * self.w2[r] * (1.0 - hidden[r] * hidden[r]);
            grad.b1[r] += dpre[r];
        }
        for (pos, x) in inputs.iter().enumerate() {
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                let row = &mut grad.w1t[(pos * self.d + j) * self.h..][..self.h];
                for (o, dp) in row.iter_mut().zip(&dpre) {
                    *o += xj * dp;
                }
            }
        }
    }

    /// Mean over samples of `(y - Qbar)^2`, `Qbar` the mean of `Q` over each
    /// sample's input sets, with the gradient w.r.t. these parameters.
    pub fn loss_and_grad(&self, samples: &[TrainSample]) -> Result<(f64, QGrad)> {
        let mut grad = QGrad {
            w1t: vec![0.0; self.w1t.len()],
            b1: vec![0.0; self.h],
            w2: vec![0.0; self.h],
            b2: 0.0,
        };
        if samples.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let b = samples.len() as f64;
        let mut loss = 0.0;
        for s in samples {
            if s.inputs.is_empty() {
                return Err(Error::invalid("training sample without inputs"));
            }
            let mut fwd = Vec::with_capacity(s.inputs.len());
            let mut qsum = 0.0;
            for x in &s.inputs {
                self.check_inputs(x)?;
                let (q, hidden) = self.forward_hidden(x);
                qsum += q;
                fwd.push(hidden);
            }
            let qbar = qsum / s.inputs.len() as f64;
            let r = s.target - qbar;
            loss += r * r;
            let g = -2.0 * r / b / s.inputs.len() as f64;
            for (x, hidden) in s.inputs.iter().zip(&fwd) {
                self.backward(x, hidden, g, &mut grad);
            }
        }
        Ok((loss / b, grad))
    }
}

/// One regression example: target `y` and the embedding sets of the state and
/// its augmentations under the taken action.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub target: f64,
    pub inputs: Vec<Vec<Vector>>,
}

/// Online and target parameters with the optimizer for the online copy.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    pub online: QParams,
    pub target: QParams,
    pub(crate) adam: Adam,
    pub steps: u64,
}

impl QNet {
    pub fn new(n: usize, d: usize, h: usize, seed: u64) -> Self {
        let online = QParams::init(n, d, h, seed);
        QNet {
            adam: Adam::new(online.len()),
            target: online.clone(),
            online,
            steps: 0,
        }
    }

    pub fn from_params(online: QParams, target: QParams, adam: Adam, steps: u64) -> Result<Self> {
        if (online.n, online.d, online.h) != (target.n, target.d, target.h) || adam.len() != online.len() {
            return Err(Error::Checkpoint("value network shapes disagree".into()));
        }
        Ok(QNet {
            online,
            target,
            adam,
            steps,
        })
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn n(&self) -> usize {
        self.online.n
    }

    pub fn d(&self) -> usize {
        self.online.d
    }

    pub fn h(&self) -> usize {
        self.online.h
    }

    /// One Adam step on the online parameters; returns the pre-step loss.
    /// A zero loss skips the step.
    pub fn train_step(&mut self, samples: &[TrainSample], lr: f64) -> Result<f64> {
        let (loss, grad) = self.online.loss_and_grad(samples)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("value loss".into()));
        }
        if loss > 0.0 {
            let p = &mut self.online;
            self.adam.step(
                lr,
                [
                    (p.w1t.as_mut_slice(), grad.w1t.as_slice()),
                    (p.b1.as_mut_slice(), grad.b1.as_slice()),
                    (p.w2.as_mut_slice(), grad.w2.as_slice()),
                    (std::slice::from_mut(&mut p.b2), std::slice::from_ref(&grad.b2)),
                ],
            );
            if !p.is_finite() {
                return Err(Error::NonFinite("value network parameters".into()));
            }
        }
        self.steps += 1;
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }
}

/// `Q(s, a)`; representatives are recomputed for `state`.
pub fn q_value(
    ctx: &SearchContext,
    params: &QParams,
    user: &UserModel,
    state: &PreparedState,
    docs: &[u32],
    m: usize,
) -> Result<f64> {
    let slate = with_representatives(ctx, user, state, docs, m)?;
    params.forward(&slate_embeddings(ctx, state, &slate)?)
}

/// Mean of `Q` over the state and its augmentations.
pub fn q_value_augmented(
    ctx: &SearchContext,
    params: &QParams,
    user: &UserModel,
    state: &PreparedState,
    augmentations: &[PreparedState],
    docs: &[u32],
    m: usize,
) -> Result<f64> {
    let mut sum = q_value(ctx, params, user, state, docs, m)?;
    for a in augmentations {
        sum += q_value(ctx, params, user, a, docs, m)?;
    }
    Ok(sum / (augmentations.len() + 1) as f64)
}

/// `y = r` for terminal transitions (or when `gamma` is zero), otherwise
/// `r + gamma * max(values)`.
pub fn td_target(reward: f64, terminal: bool, gamma: f64, next_values: &[f64]) -> Result<f64> {
    if terminal || gamma == 0.0 {
        return Ok(reward);
    }
    let max = next_values
        .iter()
        .cloned()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or_else(|| Error::invalid("non-terminal target needs at least one candidate value"))?;
    Ok(reward + gamma * max)
}
