//! Candidate generation, the initial u-ranking, sliding-window reranking and
//! the epsilon-greedy behavior policy.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::{PreparedState, SearchContext};
use crate::corpus::CorpusIndex;
use crate::error::{Error, Result};
use crate::metrics::LoggedSlate;
use crate::qnet::{select_representative, weighted_embed, QParams};
use crate::state::SlateAction;
use crate::user_model::UserModel;

/// `T_q`: the top `size_t` documents of `pool` by `u(q, D)`, ties broken by
/// document id.
pub fn candidate_set(
    ctx: &SearchContext,
    user: &UserModel,
    query: &str,
    pool: &[u32],
    size_t: usize,
    m: usize,
) -> Result<Vec<u32>> {
    if pool.is_empty() {
        return Err(Error::invalid("empty retrieval pool"));
    }
    let q = ctx.prepare_text(query);
    let mut scored = pool
        .iter()
        .map(|&d| user.doc_score(ctx, &q, d, m).map(|(p, _)| (d, p)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(size_t).map(|(d, _)| d).collect())
}

/// Candidates sorted by `V` of their representative sentence under `state`,
/// truncated to `n`. Representatives are filled.
pub fn initial_u_ranking(
    ctx: &SearchContext,
    user: &UserModel,
    state: &PreparedState,
    candidates: &[u32],
    n: usize,
    m: usize,
) -> Result<SlateAction> {
    if n > candidates.len() {
        return Err(Error::invalid(format!("slate size {n} exceeds {} candidates", candidates.len())));
    }
    let mut scored = candidates
        .iter()
        .map(|&d| select_representative(ctx, user, state, d, m).map(|(rep, v)| (d, rep, v)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(SlateAction {
        docs: scored.iter().map(|s| s.0).collect(),
        reps: scored.iter().map(|s| s.1).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub slate: SlateAction,
    pub evaluations: usize,
    pub q_initial: f64,
    pub q_final: f64,
}

/// Greedy sliding-window reranking under `params`. Windows of width `m` start
/// at `G - m` and move to the top; inside a window each of its items is tried
/// at the window head with the others keeping their order, and the best
/// arrangement replaces the incumbent only if strictly better. Exactly
/// `(G - m + 1) * m` evaluations are made. Representatives stay attached to
/// their documents.
pub fn sliding_window_rank(
    ctx: &SearchContext,
    params: &QParams,
    state: &PreparedState,
    slate: &SlateAction,
    m: usize,
) -> Result<WindowResult> {
    let g = slate.len();
    if g != params.n {
        return Err(Error::LengthMismatch { left: g, right: params.n });
    }
    if m < 2 || m > g {
        return Err(Error::invalid(format!("window size {m} must lie in [2, {g}]")));
    }
    if !slate.has_reps() {
        return Err(Error::invalid("slate needs representative sentences"));
    }
    let embeds: Vec<_> = slate
        .docs
        .iter()
        .zip(&slate.reps)
        .map(|(&d, &r)| weighted_embed(ctx, state, d, r))
        .collect();
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; g * g];
    let mut eval = |order: &[usize]| -> f64 {
        for (pos, &item) in order.iter().enumerate() {
            let slot = &mut cache[pos * g + item];
            if slot.is_none() {
                *slot = Some(params.project(pos, &embeds[item]));
            }
        }
        params.value_from_projections(
            order
                .iter()
                .enumerate()
                .map(|(pos, &item)| cache[pos * g + item].as_deref().unwrap_or(&[])),
        )
    };

    let mut order: Vec<usize> = (0..g).collect();
    let mut evaluations = 0;
    let mut q_initial = f64::NAN;
    let mut incumbent = f64::NAN;
    let mut trial = order.clone();
    for s in (0..=g - m).rev() {
        let mut base = f64::NAN;
        let mut best: Option<(f64, usize)> = None;
        for i in 0..m {
            trial.copy_from_slice(&order);
            let item = trial.remove(s + i);
            trial.insert(s, item);
            let q = eval(&trial);
            evaluations += 1;
            if i == 0 {
                base = q;
                if q_initial.is_nan() {
                    q_initial = q;
                }
            } else if best.map_or(true, |(b, _)| q > b) {
                best = Some((q, i));
            }
        }
        incumbent = base;
        if let Some((q, i)) = best {
            if q > base {
                let item = order.remove(s + i);
                order.insert(s, item);
                incumbent = q;
            }
        }
    }
    Ok(WindowResult {
        slate: SlateAction {
            docs: order.iter().map(|&i| slate.docs[i]).collect(),
            reps: order.iter().map(|&i| slate.reps[i]).collect(),
        },
        evaluations,
        q_initial,
        q_final: incumbent,
    })
}

/// Maximum of `Q` over every ordering of the slate (small slates only).
pub fn exhaustive_best(ctx: &SearchContext, params: &QParams, state: &PreparedState, slate: &SlateAction) -> Result<f64> {
    let g = slate.len();
    if g != params.n || !slate.has_reps() {
        return Err(Error::invalid("exhaustive search needs a full slate with representatives"));
    }
    if g > 8 {
        return Err(Error::invalid("exhaustive search is limited to 8 documents"));
    }
    let embeds: Vec<_> = slate
        .docs
        .iter()
        .zip(&slate.reps)
        .map(|(&d, &r)| weighted_embed(ctx, state, d, r))
        .collect();
    let projs: Vec<Vec<Vec<f64>>> = (0..g)
        .map(|pos| embeds.iter().map(|x| params.project(pos, x)).collect())
        .collect();
    let mut order: Vec<usize> = (0..g).collect();
    let mut best = f64::NEG_INFINITY;
    permute(&mut order, 0, &mut |o| {
        let q = params.value_from_projections(o.iter().enumerate().map(|(p, &i)| projs[p][i].as_slice()));
        best = best.max(q);
    });
    Ok(best)
}

fn permute(v: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Which behavior produced a slate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Logged,
    Random,
    Greedy,
}

#[derive(Debug, Clone, Copy)]
pub struct PolicyParams {
    pub n: usize,
    pub window: usize,
    pub sentences: usize,
}

/// Uniform random ordered subset of `n` candidates.
pub fn random_slate(rng: &mut impl Rng, candidates: &[u32], n: usize) -> Vec<u32> {
    let mut pool = candidates.to_vec();
    let (chosen, _) = pool.partial_shuffle(rng, n);
    chosen.to_vec()
}

/// Forces a logged slate to exactly `n` distinct documents: duplicates are
/// dropped, the tail truncated, and short slates padded from `candidates`.
pub fn fit_slate(docs: &[u32], candidates: &[u32], n: usize) -> Vec<u32> {
    let mut seen = HashSet::new();
    let mut out: Vec<u32> = docs.iter().copied().filter(|d| seen.insert(*d)).take(n).collect();
    for &c in candidates {
        if out.len() >= n {
            break;
        }
        if seen.insert(c) {
            out.push(c);
        }
    }
    out
}

/// The greedy policy: initial u-ranking refined by the sliding window.
pub fn greedy_slate(
    ctx: &SearchContext,
    user: &UserModel,
    params: &QParams,
    state: &PreparedState,
    candidates: &[u32],
    p: PolicyParams,
) -> Result<(SlateAction, WindowResult)> {
    let initial = initial_u_ranking(ctx, user, state, candidates, p.n, p.sentences)?;
    let w = sliding_window_rank(ctx, params, state, &initial, p.window)?;
    Ok((initial, w))
}

/// Epsilon-greedy selection. With probability `epsilon` the next unused
/// logged slate is taken (removed from `logged`), or a random slate when
/// none are left; otherwise the greedy policy is used. One uniform draw is
/// consumed per call.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_greedy(
    rng: &mut impl Rng,
    epsilon: f64,
    logged: &mut VecDeque<LoggedSlate>,
    ctx: &SearchContext,
    user: &UserModel,
    params: &QParams,
    state: &PreparedState,
    candidates: &[u32],
    p: PolicyParams,
) -> Result<(SlateAction, Branch)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if candidates.len() < p.n {
        return Err(Error::invalid(format!(
            "candidate set has {} documents, slate needs {}",
            candidates.len(),
            p.n
        )));
    }
    if rng.gen::<f64>() < epsilon {
        if let Some(l) = logged.pop_front() {
            return Ok((SlateAction::new(fit_slate(&l.docs, candidates, p.n)), Branch::Logged));
        }
        return Ok((SlateAction::new(random_slate(rng, candidates, p.n)), Branch::Random));
    }
    let (_, w) = greedy_slate(ctx, user, params, state, candidates, p)?;
    Ok((w.slate, Branch::Greedy))
}

/// One line of a logged ranking file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRecord {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
}

/// Logged slates grouped by query id, in file order.
pub type LoggedData = BTreeMap<String, Vec<LoggedSlate>>;

pub fn parse_logged(content: &str, index: &CorpusIndex) -> Result<LoggedData> {
    let mut out = LoggedData::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LoggedRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(r) = rec.reward.filter(|r| !r.is_finite()) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("non-finite reward {r}"),
            });
        }
        let docs = SlateAction::from_ids(index, &rec.doc_ids)?.docs;
        out.entry(rec.query_id).or_default().push(LoggedSlate {
            docs,
            reward: rec.reward,
        });
    }
    Ok(out)
}

pub fn load_logged(path: &Path, index: &CorpusIndex) -> Result<LoggedData> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_logged(&s, index)
}

pub fn logged_to_jsonl(records: &[LoggedRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_slate_cases() {
        assert_eq!(fit_slate(&[3, 3, 1], &[1, 2, 3, 4], 3), [3, 1, 2]);
        assert_eq!(fit_slate(&[5, 6, 7, 8], &[], 2), [5, 6]);
    }

    #[test]
    fn random_slate_is_distinct_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c: Vec<u32> = (0..20).collect();
        let s = random_slate(&mut rng, &c, 10);
        assert_eq!(s.len(), 10);
        let set: HashSet<_> = s.iter().collect();
        assert_eq!(set.len(), 10);
    }

    #[test]
    fn permute_visits_all() {
        let mut v = vec![0, 1, 2, 3];
        let mut n = 0;
        permute(&mut v, 0, &mut |_| n += 1);
        assert_eq!(n, 24);
    }
}
