//! Brute-force references for the evaluation metrics.

use r2d2_core::metrics::{self, ClassificationMetrics};
use r2d2_core::rng::stream;
use rand::Rng;

/// Pairwise probability that a positive outscores a negative, ties 1/2.
pub fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

/// Average precision from the precision/recall at every distinct cutoff
/// `score >= t`, each counted from scratch.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let total = labels.iter().filter(|&&l| l).count() as f64;
    let mut cutoffs = scores.to_vec();
    cutoffs.sort_by(|a, b| b.total_cmp(a));
    cutoffs.dedup();
    let (mut ap, mut prev_tp) = (0.0, 0.0);
    for t in cutoffs {
        let selected: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = selected.iter().filter(|&&i| labels[i]).count() as f64;
        // recall gained times precision, in the same float form as the library
        ap += (tp - prev_tp) / total * (tp / selected.len() as f64);
        prev_tp = tp;
    }
    ap
}

pub fn accuracy_at(scores: &[f64], labels: &[bool], t: f64) -> usize {
    scores.iter().zip(labels).filter(|(&s, &l)| (s > t) == l).count()
}

/// Every candidate threshold: below the minimum, each midpoint, the maximum.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut c = vec![v[0] - 1.0];
    c.extend(v.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    c.push(*v.last().unwrap());
    c
}

/// Ranks of the true object, counted pairwise with ties against it.
pub fn brute_ranks(true_scores: &[f64], candidates: &[Vec<f64>]) -> Vec<usize> {
    true_scores
        .iter()
        .zip(candidates)
        .map(|(&t, c)| 1 + c.iter().filter(|&&s| !(s < t)).count())
        .collect()
}

/// Random labelled scores with both labels present; `coarse` instances
/// round scores to force ties.
pub fn instance(seed: u64, n: usize, coarse: bool) -> (Vec<f64>, Vec<bool>) {
    let mut rng = stream(seed, &[0x0a]);
    loop {
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random();
                if coarse { (s * 8.0).floor() / 8.0 } else { s }
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

/// Checks every metric against its reference on `instances` random cases;
/// returns the number checked or the first disagreement.
pub fn metric_suite(instances: usize, seed: u64) -> Result<usize, String> {
    for k in 0..instances {
        let n = 2 + k % 60;
        let (scores, labels) = instance(seed.wrapping_add(k as u64), n, k % 2 == 0);
        let auc = metrics::roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let mw = mann_whitney(&scores, &labels);
        if (auc - mw).abs() > 1e-12 {
            return Err(format!("instance {k}: roc {auc} vs mann-whitney {mw}"));
        }
        let ap = metrics::average_precision(&scores, &labels).map_err(|e| e.to_string())?;
        let ap_ref = average_precision(&scores, &labels);
        if ap != ap_ref {
            return Err(format!("instance {k}: ap {ap} vs {ap_ref}"));
        }

        let d = metrics::select_threshold(&scores, &labels).map_err(|e| e.to_string())?;
        let cands = threshold_candidates(&scores);
        let best = cands.iter().map(|&t| accuracy_at(&scores, &labels, t)).max().unwrap();
        let got = accuracy_at(&scores, &labels, d);
        if got != best {
            return Err(format!("instance {k}: threshold {d} gives {got}, exhaustive best {best}"));
        }
        let first = cands.iter().copied().find(|&t| accuracy_at(&scores, &labels, t) == best).unwrap();
        // below-min candidates differ in value but not in effect
        if first > scores.iter().copied().fold(f64::INFINITY, f64::min) && d != first {
            return Err(format!("instance {k}: threshold {d}, smallest optimum {first}"));
        }

        let m: ClassificationMetrics = metrics::classification_metrics(&scores, &labels, d).map_err(|e| e.to_string())?;
        if m.accuracy != got as f64 / n as f64 {
            return Err(format!("instance {k}: accuracy {}", m.accuracy));
        }

        let mut rng = stream(seed, &[0x7a, k as u64]);
        let q = 1 + k % 10;
        let trues: Vec<f64> = (0..q).map(|_| (rng.random::<f64>() * 5.0).floor()).collect();
        let cands: Vec<Vec<f64>> =
            (0..q).map(|_| (0..rng.random_range(0..15)).map(|_| (rng.random::<f64>() * 5.0).floor()).collect()).collect();
        let ranks: Vec<usize> = trues.iter().zip(&cands).map(|(&t, c)| metrics::rank_of(t, c)).collect();
        if ranks != brute_ranks(&trues, &cands) {
            return Err(format!("instance {k}: ranks {ranks:?}"));
        }
        let r = metrics::ranking_metrics(&ranks).map_err(|e| e.to_string())?;
        let qf = q as f64;
        let mrr: f64 = ranks.iter().map(|&x| 1.0 / x as f64).sum::<f64>() / qf;
        let mean: f64 = ranks.iter().sum::<usize>() as f64 / qf;
        let hits = |c: usize| ranks.iter().filter(|&&x| x <= c).count() as f64 / qf;
        if (r.mrr, r.mean_rank, r.hits_at_1, r.hits_at_3, r.hits_at_10) != (mrr, mean, hits(1), hits(3), hits(10)) {
            return Err(format!("instance {k}: ranking metrics {r:?}"));
        }
    }
    Ok(instances)
}
