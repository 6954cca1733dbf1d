//! Ranking metrics and slate rewards.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::SearchContext;
use crate::corpus::QrelTable;
use crate::encoder::TextCode;
use crate::error::{Error, Result};
use crate::user_model::UserModel;

/// `sum_k gains[k] / ln(k + 2)` over 0-based positions.
pub fn dcg(gains: &[f64]) -> f64 {
    gains
        .iter()
        .enumerate()
        .map(|(k, g)| g / ((k + 2) as f64).ln())
        .sum()
}

/// nDCG@k with raw grades as gains. The ideal ranking is taken over every
/// judged document of the query; queries without a relevant judgment score 0.
pub fn ndcg_at_k<S: AsRef<str>>(slate: &[S], qrels: &QrelTable, query_id: &str, k: usize) -> f64 {
    let gains: Vec<f64> = slate
        .iter()
        .take(k)
        .map(|d| qrels.grade(query_id, d.as_ref()) as f64)
        .collect();
    let mut ideal: Vec<f64> = qrels.judgments(query_id).map(|(_, g)| g as f64).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    ideal.truncate(k);
    let idcg = dcg(&ideal);
    if idcg > 0.0 {
        dcg(&gains) / idcg
    } else {
        0.0
    }
}

/// Reciprocal rank of the first document with grade > 0, or 0.
pub fn mrr<S: AsRef<str>>(slate: &[S], qrels: &QrelTable, query_id: &str) -> f64 {
    slate
        .iter()
        .position(|d| qrels.grade(query_id, d.as_ref()) > 0)
        .map_or(0.0, |k| 1.0 / (k + 1) as f64)
}

/// Reward of a slate from relevance labels: nDCG over the slate length.
pub fn labeled_reward<S: AsRef<str>>(slate: &[S], qrels: &QrelTable, query_id: &str) -> f64 {
    ndcg_at_k(slate, qrels, query_id, slate.len())
}

/// DCG of `u` scores in the given order divided by the DCG of the same scores
/// sorted descending.
pub fn u_ndcg(scores: &[f64]) -> f64 {
    let mut ideal = scores.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let i = dcg(&ideal);
    if i > 0.0 {
        dcg(scores) / i
    } else {
        0.0
    }
}

/// DCG of `u` scores relative to a slate of certain selections (all ones).
pub fn u_gain(scores: &[f64]) -> f64 {
    let best = dcg(&vec![1.0; scores.len()]);
    if best > 0.0 {
        dcg(scores) / best
    } else {
        0.0
    }
}

/// A slate from the logged data `W_q`, with its reward when one was recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedSlate {
    pub docs: Vec<u32>,
    pub reward: Option<f64>,
}

/// Reward estimate for a slate from logged slates of the same query:
/// `mean_i (DCG_u(a) / DCG_u(a_i)) * R_i`. Logged slates with zero DCG are
/// skipped; `R_i` falls back to the u-based nDCG of the logged slate.
pub fn reward_transition_from_scores(slate_scores: &[f64], logged: &[(Vec<f64>, Option<f64>)]) -> Result<f64> {
    let num = dcg(slate_scores);
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, (scores, reward)) in logged.iter().enumerate() {
        let den = dcg(scores);
        if den <= 0.0 || !den.is_finite() {
            tracing::warn!(logged = i, "skipping logged slate with zero u-DCG");
            continue;
        }
        let r = reward.unwrap_or_else(|| u_ndcg(scores));
        total += num / den * r;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoRewardTerms);
    }
    Ok(total / used as f64)
}

/// `u(q, D)` for every document of `docs`.
pub fn u_scores(ctx: &SearchContext, user: &UserModel, query: &TextCode, docs: &[u32], m: usize) -> Result<Vec<f64>> {
    docs.iter()
        .map(|&d| user.doc_score(ctx, query, d, m).map(|(p, _)| p))
        .collect()
}

pub fn reward_transition(
    ctx: &SearchContext,
    user: &UserModel,
    query: &TextCode,
    slate: &[u32],
    logged: &[LoggedSlate],
    m: usize,
) -> Result<f64> {
    let a = u_scores(ctx, user, query, slate, m)?;
    let w = logged
        .iter()
        .map(|l| Ok((u_scores(ctx, user, query, &l.docs, m)?, l.reward)))
        .collect::<Result<Vec<_>>>()?;
    reward_transition_from_scores(&a, &w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub ndcg_at_10: f64,
    pub mrr: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ndcg_by_round: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ndcg_at_10: f64,
    pub mrr: f64,
    pub per_query: BTreeMap<String, QueryMetrics>,
}

impl MetricReport {
    /// Means over the per-query entries.
    pub fn from_queries(per_query: BTreeMap<String, QueryMetrics>) -> Self {
        let n = per_query.len().max(1) as f64;
        MetricReport {
            ndcg_at_10: per_query.values().map(|m| m.ndcg_at_10).sum::<f64>() / n,
            mrr: per_query.values().map(|m| m.mrr).sum::<f64>() / n,
            per_query,
        }
    }

    /// Mean nDCG@10 of the first ranking round, when rounds were recorded.
    pub fn first_round_ndcg(&self) -> Option<f64> {
        let firsts: Vec<f64> = self
            .per_query
            .values()
            .filter_map(|m| m.ndcg_by_round.first().copied())
            .collect();
        if firsts.is_empty() {
            None
        } else {
            Some(firsts.iter().sum::<f64>() / firsts.len() as f64)
        }
    }
}
