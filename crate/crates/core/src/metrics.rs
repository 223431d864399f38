//! Threshold selection, classification metrics and ranking metrics.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Threshold maximising accuracy of `score > threshold` on labelled scores.
///
/// Candidates are midpoints between adjacent distinct scores plus one value
/// below the minimum and the maximum itself; ties go to the smallest.
pub fn select_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let positives = labels.iter().filter(|&&l| l).count() as i64;
    let min = scores[order[0]];
    let mut best = (positives, libm::nextafter(min, f64::NEG_INFINITY));
    let mut correct = positives;
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            correct += if labels[order[i]] { -1 } else { 1 };
            i += 1;
        }
        let candidate = if i < order.len() { v + (scores[order[i]] - v) / 2.0 } else { v };
        if correct > best.0 {
            best = (correct, candidate);
        }
    }
    Ok(best.1)
}

fn check(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { expected: scores.len(), got: labels.len() });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// All classification metrics at a fixed threshold. Undefined ratios (no
/// predicted positives, no positives) are reported as 0.
pub fn classification_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ClassificationMetrics> {
    check(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(ClassificationMetrics {
        threshold,
        accuracy: ratio(tp + tn, scores.len()),
        precision,
        recall,
        f1,
        roc_auc: roc_auc(scores, labels)?,
        pr_auc: average_precision(scores, labels)?,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    })
}

/// Area under the ROC curve: the probability a random positive outscores a
/// random negative, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut pos, mut neg) = (0usize, 0usize);
    let mut wins = 0.0;
    let mut negatives_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        let (mut p, mut n) = (0usize, 0usize);
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] {
                p += 1;
            } else {
                n += 1;
            }
            i += 1;
        }
        wins += p as f64 * (negatives_below as f64 + 0.5 * n as f64);
        negatives_below += n;
        pos += p;
        neg += n;
    }
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Area under the precision-recall curve as average precision: the sum of
/// precision at each distinct threshold weighted by the recall gained there.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let total = labels.iter().filter(|&&l| l).count();
    if total == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        let before = tp;
        while i < order.len() && scores[order[i]] == v {
            tp += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        ap += (tp - before) as f64 / total as f64 * (tp as f64 / seen as f64);
    }
    Ok(ap)
}

/// Pessimistic 1-based rank of the true object: candidates tying with it
/// rank ahead.
pub fn rank_of(true_score: f64, candidate_scores: &[f64]) -> usize {
    1 + candidate_scores.iter().filter(|&&s| s >= true_score).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingMetrics {
    pub queries: usize,
    pub mrr: f64,
    pub mean_rank: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
}

pub fn ranking_metrics(ranks: &[usize]) -> Result<RankingMetrics> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = ranks.len() as f64;
    let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(RankingMetrics {
        queries: ranks.len(),
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        mean_rank: ranks.iter().map(|&r| r as f64).sum::<f64>() / n,
        hits_at_1: hits(1),
        hits_at_3: hits(3),
        hits_at_10: hits(10),
    })
}
