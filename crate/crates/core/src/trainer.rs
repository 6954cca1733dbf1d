//! Offline training episodes, simulated feedback, online sessions and
//! evaluation.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::Augmenter;
use crate::checkpoint::Checkpoint;
use crate::config::{RewardMode, TrainerConfig};
use crate::context::{PreparedState, SearchContext};
use crate::corpus::{Query, QrelTable};
use crate::encoder::HashEncoder;
use crate::error::{Error, Result};
use crate::metrics::{
    labeled_reward, mrr, ndcg_at_k, reward_transition, u_gain, u_scores, MetricReport, QueryMetrics,
};
use crate::policy::{candidate_set, epsilon_greedy, greedy_slate, initial_u_ranking, sliding_window_rank, Branch, LoggedData, PolicyParams};
use crate::qnet::{slate_embeddings, td_target, v_score, with_representatives, QNet, TrainSample};
use crate::replay::{FeedbackPool, ReplayMemory, Transition};
use crate::state::{SlateAction, State};
use crate::user_model::{generate_pretrain_pairs, PretrainReport, UserModel};

const USER_SEED: u64 = 0x0055_e12a;
const QNET_SEED: u64 = 0x00a1_0e75;
const ORDER_SEED: u64 = 0x0bde_12ed;

/// Queries with judgments, logged slates and the paraphraser.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub queries: Vec<Query>,
    pub qrels: QrelTable,
    pub logged: LoggedData,
    pub augmenter: Augmenter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub user: UserModel,
    pub qnet: QNet,
}

impl Model {
    pub fn init(config: &TrainerConfig) -> Self {
        Model {
            user: UserModel::init(config.dim, config.seed ^ USER_SEED),
            qnet: QNet::new(config.n, config.dim, config.hidden, config.seed ^ QNET_SEED),
        }
    }

    pub fn to_checkpoint(&self, enc: &HashEncoder) -> Checkpoint {
        Checkpoint::from_models(enc, &self.user, Some(&self.qnet))
    }

    pub fn from_checkpoint(c: Checkpoint, enc: &HashEncoder) -> Result<Self> {
        match c.into_models(enc)? {
            (user, Some(qnet)) => Ok(Model { user, qnet }),
            _ => Err(Error::Checkpoint("checkpoint has no value network".into())),
        }
    }

    fn policy(config: &TrainerConfig) -> PolicyParams {
        PolicyParams {
            n: config.n,
            window: config.m,
            sentences: config.sentences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub action: Vec<String>,
    pub reward: f64,
    pub q_value: f64,
    pub branch: Branch,
    pub feedback: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: usize,
    pub query_id: String,
    pub epsilon: f64,
    pub steps: Vec<StepTrace>,
    pub final_state: State,
    pub best_reward: f64,
}

pub fn traces_to_jsonl(traces: &[EpisodeTrace]) -> Result<String> {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    Ok(out)
}

/// Pretrains `U` on pairs from `queries`, plus pairs from paraphrased copies
/// of each query when augmentation is enabled.
pub fn pretrain_user(
    config: &TrainerConfig,
    ctx: &SearchContext,
    data: &Dataset,
    queries: &[Query],
    user: &mut UserModel,
) -> Result<PretrainReport> {
    let mut pairs = generate_pretrain_pairs(ctx.index(), &data.qrels, queries, config.seed)?;
    if config.n_augment > 0 {
        let mut variants = Vec::new();
        for q in queries {
            for v in 0..config.n_augment {
                let p = data.augmenter.paraphrase(&q.text, v);
                if p.changed {
                    variants.push(Query::new(&q.query_id, p.text)?);
                }
            }
        }
        match generate_pretrain_pairs(ctx.index(), &data.qrels, &variants, config.seed.wrapping_add(1)) {
            Ok(more) => pairs.extend(more),
            Err(Error::NoPositives) => {}
            Err(e) => return Err(e),
        }
    }
    user.pretrain(
        ctx.encoder(),
        &pairs,
        config.pretrain_epochs,
        config.pretrain_lr,
        config.pretrain_batch,
        config.seed,
    )
}

/// Simulated user: among the slate's relevant documents (every document when
/// the query has no judgments), the representative sentence with the largest
/// `V` that is not already feedback is appended iff its `u_score` against the
/// query exceeds `tau`.
pub fn simulate_feedback(
    ctx: &SearchContext,
    user: &UserModel,
    qrels: &QrelTable,
    state: &State,
    prepared: &PreparedState,
    slate: &SlateAction,
    tau: f64,
    e_max: usize,
) -> Result<State> {
    if !slate.has_reps() {
        return Err(Error::invalid("slate needs representative sentences"));
    }
    let qid = &state.query.query_id;
    let known = qrels.judgments(qid).next().is_some();
    let mut best: Option<(f64, u32, usize)> = None;
    for (&d, &rep) in slate.docs.iter().zip(&slate.reps) {
        let doc = ctx.doc(d);
        if known && qrels.grade(qid, &doc.doc_id) == 0 {
            continue;
        }
        if state.feedback.iter().any(|f| *f == doc.sentences[rep].text) {
            continue;
        }
        let v = v_score(ctx, user, prepared, d, rep);
        if best.map_or(true, |(b, _, _)| v > b) {
            best = Some((v, d, rep));
        }
    }
    if let Some((_, d, rep)) = best {
        let u = user.prob(ctx.encoder(), &ctx.pair(&prepared.left[0], d, rep));
        if u > tau {
            return Ok(state.append_feedback(&ctx.doc(d).sentences[rep].text, e_max));
        }
    }
    Ok(state.clone())
}

/// Slate reward under the configured mode.
pub fn slate_reward(
    config: &TrainerConfig,
    ctx: &SearchContext,
    user: &UserModel,
    data: &Dataset,
    query: &Query,
    slate: &SlateAction,
) -> Result<f64> {
    let ids = slate.doc_ids(ctx.index());
    let qid = &query.query_id;
    let labeled = || labeled_reward(&ids, &data.qrels, qid);
    let logged = data.logged.get(qid).map(Vec::as_slice).unwrap_or(&[]);
    let transition = || {
        let q = ctx.prepare_text(&query.text);
        reward_transition(ctx, user, &q, &slate.docs, logged, config.sentences)
    };
    match config.reward_mode {
        RewardMode::Labeled => Ok(labeled()),
        RewardMode::Transition => transition(),
        RewardMode::Auto => {
            let covered = data.qrels.has_relevant(qid) && ids.iter().all(|d| data.qrels.judged(qid, d));
            if covered || logged.is_empty() {
                return Ok(labeled());
            }
            match transition() {
                Err(Error::NoRewardTerms) => Ok(labeled()),
                r => r,
            }
        }
    }
}

/// Offline training state: model, replay memory, feedback pool and the
/// working copy of the logged slates.
pub struct Trainer<'a> {
    pub config: TrainerConfig,
    ctx: &'a SearchContext,
    data: &'a Dataset,
    pub model: Model,
    pub memory: ReplayMemory,
    pub pool: FeedbackPool,
    rng: ChaCha8Rng,
    working: BTreeMap<String, VecDeque<crate::metrics::LoggedSlate>>,
    pub epsilon: f64,
    pub train_steps: u64,
    pub syncs: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainerConfig, ctx: &'a SearchContext, data: &'a Dataset, model: Model) -> Result<Self> {
        config.validate()?;
        if model.qnet.n() != config.n || model.qnet.d() != ctx.encoder().dim() {
            return Err(Error::invalid("model shape does not match the configuration"));
        }
        Ok(Trainer {
            ctx,
            data,
            model,
            memory: ReplayMemory::new(config.replay_capacity),
            pool: FeedbackPool::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            working: data
                .logged
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect(),
            epsilon: config.epsilon,
            train_steps: 0,
            syncs: 0,
            config,
        })
    }

    fn policy(&self) -> PolicyParams {
        Model::policy(&self.config)
    }

    /// Runs `config.episodes` episodes, visiting queries in a fresh seeded
    /// order on every pass.
    pub fn run(&mut self, queries: &[Query]) -> Result<Vec<EpisodeTrace>> {
        if queries.is_empty() {
            return Err(Error::invalid("no training queries"));
        }
        let mut order_rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ ORDER_SEED);
        let mut order: Vec<usize> = Vec::new();
        let mut traces = Vec::new();
        for episode in 0..self.config.episodes {
            if episode % queries.len() == 0 {
                order = (0..queries.len()).collect();
                order.shuffle(&mut order_rng);
            }
            let q = &queries[order[episode % queries.len()]];
            if let Some(t) = self.run_episode(episode, q)? {
                traces.push(t);
            }
            self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_min);
        }
        Ok(traces)
    }

    /// One episode of `T` steps on `query`. Returns `None` when the query
    /// retrieves too few documents to fill a slate.
    pub fn run_episode(&mut self, episode: usize, query: &Query) -> Result<Option<EpisodeTrace>> {
        let cfg = self.config.clone();
        let ctx = self.ctx;
        let pool_docs: Vec<u32> = ctx
            .index()
            .bm25_retrieve(&query.text, cfg.size_i)
            .into_iter()
            .map(|(d, _)| d)
            .collect();
        if pool_docs.len() < cfg.n {
            tracing::warn!(query = %query.query_id, retrieved = pool_docs.len(), "skipping episode: retrieval pool too small");
            return Ok(None);
        }
        let candidates = candidate_set(ctx, &self.model.user, &query.text, &pool_docs, cfg.size_t, cfg.sentences)?;
        let mut state = if cfg.state_retrieval {
            self.pool.retrieve_state(ctx.encoder(), query, cfg.psi)
        } else {
            State::new(query.clone())
        };
        let empty = VecDeque::new();
        let mut steps = Vec::with_capacity(cfg.steps);
        let mut best_reward = f64::NEG_INFINITY;
        for t in 0..cfg.steps {
            let prepared = ctx.prepare(&state);
            let mut logged = self.working.remove(&query.query_id).unwrap_or_else(|| empty.clone());
            let policy = self.policy();
            let picked = epsilon_greedy(
                &mut self.rng,
                self.epsilon,
                &mut logged,
                ctx,
                &self.model.user,
                &self.model.qnet.online,
                &prepared,
                &candidates,
                policy,
            );
            if !logged.is_empty() {
                self.working.insert(query.query_id.clone(), logged);
            }
            let (action, branch) = picked?;
            let action = if action.has_reps() {
                action
            } else {
                with_representatives(ctx, &self.model.user, &prepared, &action.docs, cfg.sentences)?
            };
            let q_value = self.model.qnet.online.forward(&slate_embeddings(ctx, &prepared, &action)?)?;
            let reward = slate_reward(&cfg, ctx, &self.model.user, self.data, query, &action)?;
            if !reward.is_finite() {
                return Err(Error::NonFinite("reward".into()));
            }
            let next = simulate_feedback(
                ctx,
                &self.model.user,
                &self.data.qrels,
                &state,
                &prepared,
                &action,
                cfg.tau,
                cfg.e_max,
            )?;
            let augmentations = self.data.augmenter.augment_state(&state, cfg.n_augment);
            self.memory.push(Transition {
                state: state.clone(),
                action: action.clone(),
                reward,
                next_state: next.clone(),
                terminal: t + 1 == cfg.steps,
                augmentations,
                candidates: candidates.clone(),
            });
            let loss = self.train_minibatch()?;
            if cfg.rearrangement {
                let a_u = initial_u_ranking(ctx, &self.model.user, &prepared, &candidates, cfg.n, cfg.sentences)?;
                let a_q = sliding_window_rank(ctx, &self.model.qnet.online, &prepared, &a_u, cfg.m)?.slate;
                self.model.user.rearrangement_update(ctx, &prepared, &a_q, &a_u, cfg.lr)?;
            }
            best_reward = best_reward.max(reward);
            steps.push(StepTrace {
                action: action.doc_ids(ctx.index()),
                reward,
                q_value,
                branch,
                feedback: state.e_cur(),
                loss: Some(loss),
            });
            state = next;
        }
        let final_reward = self.state_reward(query, &state, &candidates)?;
        self.pool.push_final_state(ctx.encoder(), &state, final_reward);
        Ok(Some(EpisodeTrace {
            episode,
            query_id: query.query_id.clone(),
            epsilon: self.epsilon,
            steps,
            final_state: state,
            best_reward,
        }))
    }

    /// Reward of the greedy slate a state produces, used to rank final states.
    fn state_reward(&self, query: &Query, state: &State, candidates: &[u32]) -> Result<f64> {
        let prepared = self.ctx.prepare(state);
        let (_, w) = greedy_slate(
            self.ctx,
            &self.model.user,
            &self.model.qnet.online,
            &prepared,
            candidates,
            self.policy(),
        )?;
        slate_reward(&self.config, self.ctx, &self.model.user, self.data, query, &w.slate)
    }

    fn target_for(&self, t: &Transition) -> Result<f64> {
        let cfg = &self.config;
        if t.terminal || cfg.gamma == 0.0 {
            return td_target(t.reward, true, cfg.gamma, &[]);
        }
        let mut states = vec![t.next_state.clone()];
        if cfg.augment_targets {
            states.extend(self.data.augmenter.augment_state(&t.next_state, cfg.n_augment));
        }
        let mut sum = 0.0;
        for s in &states {
            let prepared = self.ctx.prepare(s);
            let a = initial_u_ranking(self.ctx, &self.model.user, &prepared, &t.candidates, cfg.n, cfg.sentences)?;
            let w = sliding_window_rank(self.ctx, &self.model.qnet.target, &prepared, &a, cfg.m)?;
            sum += td_target(t.reward, false, cfg.gamma, &[w.q_final])?;
        }
        Ok(sum / states.len() as f64)
    }

    /// Samples a minibatch and takes one step on the value network. Syncs the
    /// target network every `c` steps.
    fn train_minibatch(&mut self) -> Result<f64> {
        let batch: Vec<Transition> = self
            .memory
            .sample(&mut self.rng, self.config.batch)?
            .into_iter()
            .cloned()
            .collect();
        let mut samples = Vec::with_capacity(batch.len());
        for t in &batch {
            let target = self.target_for(t)?;
            let mut inputs = Vec::with_capacity(t.augmentations.len() + 1);
            for s in std::iter::once(&t.state).chain(&t.augmentations) {
                let prepared = self.ctx.prepare(s);
                let slate = with_representatives(self.ctx, &self.model.user, &prepared, &t.action.docs, self.config.sentences)?;
                inputs.push(slate_embeddings(self.ctx, &prepared, &slate)?);
            }
            samples.push(TrainSample { target, inputs });
        }
        let loss = self.model.qnet.train_step(&samples, self.config.lr)?;
        self.train_steps += 1;
        if self.train_steps % self.config.c as u64 == 0 {
            self.model.qnet.sync_target();
            self.syncs += 1;
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Model,
    pub traces: Vec<EpisodeTrace>,
    pub pool: FeedbackPool,
    pub pretrain: Option<PretrainReport>,
    pub train_steps: u64,
}

/// Initializes, optionally pretrains `U`, then runs offline training on
/// `queries`.
pub fn train(config: &TrainerConfig, ctx: &SearchContext, data: &Dataset, queries: &[Query]) -> Result<TrainOutput> {
    config.validate()?;
    let mut model = Model::init(config);
    let pretrain = if config.pretrain {
        Some(pretrain_user(config, ctx, data, queries, &mut model.user)?)
    } else {
        None
    };
    let mut trainer = Trainer::new(config.clone(), ctx, data, model)?;
    let traces = trainer.run(queries)?;
    Ok(TrainOutput {
        train_steps: trainer.train_steps,
        model: trainer.model,
        traces,
        pool: trainer.pool,
        pretrain,
    })
}

/// An interactive session: greedy slates only, no weight updates.
/// Transitions are buffered for a later offline refresh.
#[derive(Debug, Clone)]
pub struct OnlineSession {
    pub state: State,
    pub candidates: Vec<u32>,
    pub slate: SlateAction,
    /// `V` of each slate document's representative under the current state.
    pub scores: Vec<f64>,
    pub state_retrieved: bool,
    pub steps: usize,
    pub transitions: Vec<Transition>,
}

impl OnlineSession {
    pub fn start(
        config: &TrainerConfig,
        ctx: &SearchContext,
        model: &Model,
        pool: Option<&FeedbackPool>,
        query: Query,
    ) -> Result<Self> {
        let pool_docs: Vec<u32> = ctx
            .index()
            .bm25_retrieve(&query.text, config.size_i)
            .into_iter()
            .map(|(d, _)| d)
            .collect();
        if pool_docs.len() < config.n {
            return Err(Error::invalid(format!(
                "query retrieves {} documents, a slate needs {}",
                pool_docs.len(),
                config.n
            )));
        }
        let candidates = candidate_set(ctx, &model.user, &query.text, &pool_docs, config.size_t, config.sentences)?;
        let state = match pool {
            Some(p) => p.retrieve_state(ctx.encoder(), &query, config.psi),
            None => State::new(query),
        };
        let mut s = OnlineSession {
            state_retrieved: !state.feedback.is_empty(),
            state,
            candidates,
            slate: SlateAction::default(),
            scores: Vec::new(),
            steps: 1,
            transitions: Vec::new(),
        };
        s.rerank(config, ctx, model)?;
        Ok(s)
    }

    fn rerank(&mut self, config: &TrainerConfig, ctx: &SearchContext, model: &Model) -> Result<()> {
        let prepared = ctx.prepare(&self.state);
        let (_, w) = greedy_slate(ctx, &model.user, &model.qnet.online, &prepared, &self.candidates, Model::policy(config))?;
        self.scores = w
            .slate
            .docs
            .iter()
            .zip(&w.slate.reps)
            .map(|(&d, &r)| v_score(ctx, &model.user, &prepared, d, r))
            .collect();
        self.slate = w.slate;
        Ok(())
    }

    /// Unlabeled quality of the current slate: its u-DCG against the query,
    /// relative to a slate of certain selections.
    pub fn reward(&self, config: &TrainerConfig, ctx: &SearchContext, model: &Model) -> Result<f64> {
        let q = ctx.prepare_text(&self.state.query.text);
        Ok(u_gain(&u_scores(ctx, &model.user, &q, &self.slate.docs, config.sentences)?))
    }

    /// Applies a sentence selection from the current slate and reranks.
    pub fn feedback(
        &mut self,
        config: &TrainerConfig,
        ctx: &SearchContext,
        model: &Model,
        doc_id: &str,
        sentence_idx: usize,
    ) -> Result<()> {
        let doc = ctx
            .index()
            .index_of(doc_id)
            .filter(|d| self.slate.docs.contains(d))
            .ok_or_else(|| Error::StaleFeedback(doc_id.to_string()))?;
        let sentences = &ctx.doc(doc).sentences;
        let sentence = sentences.get(sentence_idx).ok_or_else(|| {
            Error::InvalidFeedback(format!("{doc_id} has {} sentences, got index {sentence_idx}", sentences.len()))
        })?;
        let next = self.state.append_feedback(&sentence.text, config.e_max);
        let reward = self.reward(config, ctx, model)?;
        self.transitions.push(Transition {
            state: self.state.clone(),
            action: self.slate.clone(),
            reward,
            next_state: next.clone(),
            terminal: false,
            augmentations: Vec::new(),
            candidates: self.candidates.clone(),
        });
        self.state = next;
        self.steps += 1;
        self.rerank(config, ctx, model)
    }
}

/// Replays feedback events through a session and returns the final session.
pub fn run_online_session(
    config: &TrainerConfig,
    ctx: &SearchContext,
    model: &Model,
    pool: Option<&FeedbackPool>,
    query: Query,
    events: &[(String, usize)],
) -> Result<OnlineSession> {
    let mut s = OnlineSession::start(config, ctx, model, pool, query)?;
    for (doc, idx) in events {
        s.feedback(config, ctx, model, doc, *idx)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Bm25,
    UOnly,
    Dqrank,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(EvalMode::Bm25),
            "u_only" => Ok(EvalMode::UOnly),
            "dqrank" => Ok(EvalMode::Dqrank),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// nDCG@10 and MRR per query. `dqrank` runs a session from the (optionally
/// retrieved) initial state and lets the simulated user give up to
/// `eval_rounds` feedback sentences; the last slate is scored and every
/// round's nDCG@10 is recorded.
pub fn evaluate(
    config: &TrainerConfig,
    ctx: &SearchContext,
    model: Option<&Model>,
    pool: Option<&FeedbackPool>,
    queries: &[Query],
    qrels: &QrelTable,
    mode: EvalMode,
) -> Result<MetricReport> {
    let need_model = || model.ok_or_else(|| Error::invalid("this evaluation mode needs a model"));
    let mut per_query = BTreeMap::new();
    for q in queries {
        let mut rounds = Vec::new();
        let slate: Vec<String> = match mode {
            EvalMode::Bm25 => ctx.index().bm25_ids(q, config.n).into_iter().map(|(d, _)| d).collect(),
            EvalMode::UOnly => {
                let m = need_model()?;
                let pool_docs: Vec<u32> = ctx.index().bm25_retrieve(&q.text, config.size_i).into_iter().map(|(d, _)| d).collect();
                if pool_docs.is_empty() {
                    Vec::new()
                } else {
                    let c = candidate_set(ctx, &m.user, &q.text, &pool_docs, config.size_t, config.sentences)?;
                    SlateAction::new(c.into_iter().take(config.n).collect()).doc_ids(ctx.index())
                }
            }
            EvalMode::Dqrank => {
                let m = need_model()?;
                let mut s = OnlineSession::start(config, ctx, m, if config.state_retrieval { pool } else { None }, q.clone())?;
                rounds.push(ndcg_at_k(&s.slate.doc_ids(ctx.index()), qrels, &q.query_id, 10));
                for _ in 0..config.eval_rounds {
                    let prepared = ctx.prepare(&s.state);
                    let next = simulate_feedback(ctx, &m.user, qrels, &s.state, &prepared, &s.slate, config.tau, config.e_max)?;
                    if next == s.state {
                        break;
                    }
                    let added = next.feedback.last().cloned().unwrap_or_default();
                    let (doc, idx) = s
                        .slate
                        .docs
                        .iter()
                        .zip(&s.slate.reps)
                        .find(|(&d, &r)| ctx.doc(d).sentences[r].text == added)
                        .map(|(&d, &r)| (ctx.doc(d).doc_id.clone(), r))
                        .ok_or_else(|| Error::invalid("simulated feedback outside the slate"))?;
                    s.feedback(config, ctx, m, &doc, idx)?;
                    rounds.push(ndcg_at_k(&s.slate.doc_ids(ctx.index()), qrels, &q.query_id, 10));
                }
                s.slate.doc_ids(ctx.index())
            }
        };
        per_query.insert(
            q.query_id.clone(),
            QueryMetrics {
                ndcg_at_10: ndcg_at_k(&slate, qrels, &q.query_id, 10),
                mrr: mrr(&slate, qrels, &q.query_id),
                ndcg_by_round: rounds,
            },
        );
    }
    Ok(MetricReport::from_queries(per_query))
}

/// `k` disjoint test folds of near-equal size over a seeded shuffle; each
/// train part keeps the input order.
pub fn kfold_split(queries: &[Query], k: usize, seed: u64) -> Result<Vec<(Vec<Query>, Vec<Query>)>> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if k > queries.len() {
        return Err(Error::invalid(format!("k={k} exceeds {} queries", queries.len())));
    }
    let mut idx: Vec<usize> = (0..queries.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k)
        .map(|f| {
            let mut test: Vec<usize> = idx.iter().enumerate().filter(|(p, _)| p % k == f).map(|(_, &i)| i).collect();
            test.sort_unstable();
            let train = (0..queries.len())
                .filter(|i| test.binary_search(i).is_err())
                .map(|i| queries[i].clone())
                .collect();
            (train, test.into_iter().map(|i| queries[i].clone()).collect())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qs(n: usize) -> Vec<Query> {
        (0..n).map(|i| Query::new(format!("q{i}"), format!("text {i}")).unwrap()).collect()
    }

    #[test]
    fn kfold_partitions() {
        let q = qs(10);
        let folds = kfold_split(&q, 5, 1).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = Vec::new();
        for (train, test) in &folds {
            assert_eq!(test.len(), 2);
            assert_eq!(train.len(), 8);
            assert!(test.iter().all(|t| !train.contains(t)));
            seen.extend(test.iter().map(|t| t.query_id.clone()));
        }
        seen.sort();
        let mut all: Vec<String> = q.iter().map(|x| x.query_id.clone()).collect();
        all.sort();
        assert_eq!(seen, all);
        assert_eq!(folds, kfold_split(&q, 5, 1).unwrap());
        assert!(kfold_split(&q, 11, 1).is_err());
    }

    #[test]
    fn eval_mode_parse() {
        assert_eq!("u_only".parse::<EvalMode>().unwrap(), EvalMode::UOnly);
        assert!("x".parse::<EvalMode>().is_err());
    }
}
