//! Serialised outputs: transcripts, metric reports, ranking dumps and the
//! training log.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use r2d2_core::metrics::{ClassificationMetrics, RankingMetrics};
use r2d2_core::trainer::EpochRecord;
use r2d2_core::{KnowledgeGraph, Transcript};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub relation: String,
    pub entity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentView {
    pub agent: usize,
    pub round: usize,
    pub path: Vec<Hop>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptView {
    pub query: QueryView,
    pub seed: u64,
    pub score: f64,
    pub arguments: Vec<ArgumentView>,
}

pub fn query_view(kg: &KnowledgeGraph, t: &r2d2_core::Triple) -> QueryView {
    QueryView {
        subject: kg.entity_name(t.subject).into(),
        predicate: kg.relation_name(t.predicate).into(),
        object: kg.entity_name(t.object).into(),
    }
}

/// Surface-form arguments; `skip` leading arguments are left out.
pub fn argument_views(kg: &KnowledgeGraph, t: &Transcript, skip: usize) -> Vec<ArgumentView> {
    t.arguments
        .iter()
        .zip(&t.argument_scores)
        .skip(skip)
        .map(|(a, &score)| ArgumentView {
            agent: a.agent,
            round: a.round,
            path: a
                .actions
                .iter()
                .map(|&(r, e)| Hop { relation: kg.relation_name(r).into(), entity: kg.entity_name(e).into() })
                .collect(),
            score,
        })
        .collect()
}

pub fn transcript_view(kg: &KnowledgeGraph, t: &Transcript) -> TranscriptView {
    TranscriptView { query: query_view(kg, &t.query), seed: t.seed, score: t.score, arguments: argument_views(kg, t, 0) }
}

/// Human-readable transcript.
pub fn render_transcript(view: &TranscriptView, threshold: f64) -> String {
    let q = &view.query;
    let mut out = format!("query: {} --{}--> {} ?\n", q.subject, q.predicate, q.object);
    for a in &view.arguments {
        let side = if a.agent == 1 { "pro" } else { "con" };
        let mut path = q.subject.clone();
        for h in &a.path {
            let _ = write!(path, " -> {} -> {}", h.relation, h.entity);
        }
        let _ = writeln!(out, "  round {} agent {} ({side}) {:+.4}  {path}", a.round, a.agent, a.score);
    }
    let verdict = if view.score > threshold { "true" } else { "false" };
    let _ = writeln!(out, "judge: {:.4} (threshold {:.4}) => {verdict}", view.score, threshold);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub split: String,
    pub keep_agent: String,
    pub queries: usize,
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub positive_rate: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ClassificationRow {
    pub fn new(split: &str, keep_agent: &str, m: &ClassificationMetrics) -> Self {
        let n = m.true_positives + m.false_positives + m.true_negatives + m.false_negatives;
        Self {
            split: split.into(),
            keep_agent: keep_agent.into(),
            queries: n,
            threshold: m.threshold,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            roc_auc: m.roc_auc,
            pr_auc: m.pr_auc,
            positive_rate: (m.true_positives + m.false_positives) as f64 / n as f64,
            true_positives: m.true_positives,
            false_positives: m.false_positives,
            true_negatives: m.true_negatives,
            false_negatives: m.false_negatives,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub split: String,
    pub queries: usize,
    pub mrr: f64,
    pub mean_rank: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
}

impl RankingRow {
    pub fn new(split: &str, m: &RankingMetrics) -> Self {
        Self {
            split: split.into(),
            queries: m.queries,
            mrr: m.mrr,
            mean_rank: m.mean_rank,
            hits_at_1: m.hits_at_1,
            hits_at_3: m.hits_at_3,
            hits_at_10: m.hits_at_10,
        }
    }
}

/// One line per training epoch and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
}

pub fn log_rows(history: &[EpochRecord]) -> Vec<LogRow> {
    history
        .iter()
        .flat_map(|r| {
            [
                LogRow { epoch: r.epoch, split: "train".into(), loss: r.train_loss, accuracy: r.train_accuracy },
                LogRow { epoch: r.epoch, split: "valid".into(), loss: r.valid_loss, accuracy: r.valid_accuracy },
            ]
        })
        .collect()
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|source| Error::Csv { path: "<memory>".into(), source })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    crate::data::write_text(path, &csv_string(rows)?)
}

pub fn classification_table(rows: &[ClassificationRow]) -> String {
    let mut out = String::from("split   keep  n      thresh   acc     prec    recall  f1      roc_auc pr_auc  pos_rate\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<7} {:<5} {:<6} {:<8.4} {:<7.4} {:<7.4} {:<7.4} {:<7.4} {:<7.4} {:<7.4} {:.4}",
            r.split, r.keep_agent, r.queries, r.threshold, r.accuracy, r.precision, r.recall, r.f1, r.roc_auc, r.pr_auc,
            r.positive_rate
        );
    }
    out
}

pub fn ranking_table(rows: &[RankingRow]) -> String {
    let mut out = String::from("split   n      mrr     mean_rank  hits@1  hits@3  hits@10\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<7} {:<6} {:<7.4} {:<10.2} {:<7.4} {:<7.4} {:.4}",
            r.split, r.queries, r.mrr, r.mean_rank, r.hits_at_1, r.hits_at_3, r.hits_at_10
        );
    }
    out
}
