//! Classification and completion evaluation over a trained model.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use r2d2_core::config::KeepAgents;
use r2d2_core::debate::Debater;
use r2d2_core::metrics::{self, ClassificationMetrics, RankingMetrics};
use r2d2_core::{DebateConfig, KnowledgeGraph, Model, Query, Triple};

use crate::error::Result;
use crate::report::{query_view, QueryView};

/// Mean debate score of each query over `rollouts` seeded rollouts. Rollout
/// seeds depend only on `seed` and the query, so runs with different `keep`
/// see the same debates.
pub fn score_queries(
    kg: &KnowledgeGraph,
    model: &Model,
    debate: &DebateConfig,
    queries: &[Query],
    seed: u64,
    rollouts: usize,
    keep: KeepAgents,
) -> Result<Vec<f64>> {
    let debater = Debater::new(kg, model, debate);
    queries
        .iter()
        .map(|q| Ok(debater.classify_with_rollouts(&q.triple, seed, rollouts, keep)?.0))
        .collect()
}

pub fn classify(scores: &[f64], queries: &[Query], threshold: f64) -> Result<ClassificationMetrics> {
    let labels: Vec<bool> = queries.iter().map(|q| q.label).collect();
    Ok(metrics::classification_metrics(scores, &labels, threshold)?)
}

pub fn positive_rate(scores: &[f64], threshold: f64) -> f64 {
    scores.iter().filter(|&&s| s > threshold).count() as f64 / scores.len().max(1) as f64
}

/// One test query of a completion run, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedQuery {
    pub query: QueryView,
    pub rank: usize,
    pub candidates: usize,
    pub true_score: f64,
    /// Candidate objects scoring at least the true object.
    pub ahead: Vec<(String, f64)>,
}

/// Objects ranked against `(s, p, o)`: every entity observed as object of
/// `p`, minus those known to form a true triple with `s` (the true object
/// itself excepted).
pub fn candidates(kg: &KnowledgeGraph, query: &Triple, known: &BTreeSet<Triple>) -> Vec<Triple> {
    let mut out: Vec<Triple> = kg
        .objects_of(query.predicate)
        .iter()
        .map(|&o| Triple::new(query.subject, query.predicate, o))
        .filter(|t| t.object != query.object && !known.contains(t))
        .collect();
    out.push(*query);
    out
}

pub fn rank_query(
    debater: &Debater<'_>,
    query: &Triple,
    known: &BTreeSet<Triple>,
    seed: u64,
    rollouts: usize,
) -> Result<RankedQuery> {
    let kg = debater.kg;
    let cands = candidates(kg, query, known);
    let mut scores = Vec::with_capacity(cands.len());
    for c in &cands {
        scores.push(debater.classify_with_rollouts(c, seed, rollouts, KeepAgents::Both)?.0);
    }
    let (true_score, others) = scores.split_last().expect("candidates contain the query");
    let ahead = cands
        .iter()
        .zip(others)
        .filter(|(_, &s)| s >= *true_score)
        .map(|(c, &s)| (kg.entity_name(c.object).to_string(), s))
        .collect();
    Ok(RankedQuery {
        query: query_view(kg, query),
        rank: metrics::rank_of(*true_score, others),
        candidates: cands.len(),
        true_score: *true_score,
        ahead,
    })
}

pub fn rank_all(
    kg: &KnowledgeGraph,
    model: &Model,
    debate: &DebateConfig,
    queries: &[Triple],
    known: &BTreeSet<Triple>,
    seed: u64,
    rollouts: usize,
) -> Result<(RankingMetrics, Vec<RankedQuery>)> {
    let debater = Debater::new(kg, model, debate);
    let ranked = queries.iter().map(|q| rank_query(&debater, q, known, seed, rollouts)).collect::<Result<Vec<_>>>()?;
    let ranks: Vec<usize> = ranked.iter().map(|r| r.rank).collect();
    Ok((metrics::ranking_metrics(&ranks)?, ranked))
}
