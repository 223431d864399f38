//! Judge warmup, then alternating judge / agent batches. The judge fits the
//! debate outcome with cross-entropy; the agents follow REINFORCE with a
//! moving-average baseline and an entropy bonus.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::autodiff::{Adam, AdamConfig, Gradients, NodeId, ParamStore, Tape};
use crate::config::{KeepAgents, TrainConfig};
use crate::debate::{returns, Debater, Transcript};
use crate::error::{Error, Result};
use crate::judge::{judge_loss, PROB_EPS};
use crate::kg::{EntityId, KnowledgeGraph, Query};
use crate::metrics::select_threshold;
use crate::model::Model;
use crate::rng::{derive, stream};

/// Per-agent exponential moving average of the cumulative reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineState {
    values: [Option<f64>; 2],
    decay: f64,
}

impl BaselineState {
    pub fn new(decay: f64) -> Self {
        Self { values: [None; 2], decay }
    }

    /// Current baseline of agent `i` (0-based); 0 before the first update.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i].unwrap_or(0.0)
    }

    pub fn is_initialized(&self, i: usize) -> bool {
        self.values[i].is_some()
    }

    /// Moves the baseline toward `batch_mean`; the first update adopts it.
    pub fn update(&mut self, i: usize, batch_mean: f64) {
        self.values[i] = Some(match self.values[i] {
            None => batch_mean,
            Some(b) => self.decay * b + (1.0 - self.decay) * batch_mean,
        });
    }
}

/// One REINFORCE episode: summed log-probability and entropy nodes of one
/// agent's actions, and the advantage weighting them.
#[derive(Debug, Clone, Copy)]
pub struct Episode {
    pub log_prob: NodeId,
    pub entropy: NodeId,
    pub advantage: f64,
}

/// Surrogate whose gradient is the REINFORCE estimate with entropy bonus:
/// `-(1 / count) sum [adv * log pi + beta * H]`.
pub fn reinforce_loss(tape: &mut Tape<'_>, episodes: &[Episode], beta: f64, count: usize) -> Result<NodeId> {
    let mut terms = Vec::with_capacity(2 * episodes.len());
    for e in episodes {
        terms.push(tape.scale(e.log_prob, e.advantage)?);
        if beta != 0.0 {
            terms.push(tape.scale(e.entropy, beta)?);
        }
    }
    if terms.is_empty() {
        return Ok(tape.zeros(1));
    }
    let all = tape.concat(&terms)?;
    let total = tape.sum(all)?;
    Ok(tape.scale(total, -1.0 / count.max(1) as f64)?)
}

/// Which embeddings receive pretrained rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PretrainedScope {
    Agents,
    Judge,
    Both,
}

/// Overwrites entity embedding rows and freezes them. Returns the number of
/// rows written per tensor.
pub fn apply_pretrained(model: &mut Model, scope: PretrainedScope, rows: &[(EntityId, Vec<f64>)]) -> Result<usize> {
    let d = model.config.dim;
    if let Some((_, v)) = rows.iter().find(|(_, v)| v.len() != d) {
        return Err(Error::Dimension { expected: d, got: v.len() });
    }
    let mut targets = Vec::new();
    if scope != PretrainedScope::Judge {
        targets.extend(model.agents.iter().map(|a| a.entity));
    }
    if scope != PretrainedScope::Agents {
        targets.push(model.judge.entity);
    }
    for &id in &targets {
        for (e, v) in rows {
            if e.index() >= model.num_entities() {
                return Err(Error::UnknownEntity(format!("#{}", e.0)));
            }
            model.params.get_mut(id).row_mut(e.index()).copy_from_slice(v);
            model.params.freeze_row(id, e.index());
        }
    }
    let missing = model.num_entities() - rows.len().min(model.num_entities());
    if missing > 0 {
        log::info!("{missing} entities have no pretrained vector and stay trainable");
    }
    Ok(rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean judge loss over judge batches of the epoch (NaN if none ran).
    pub train_loss: f64,
    /// Fraction of training rollouts the judge got right at 0.5.
    pub train_accuracy: f64,
    pub valid_loss: f64,
    pub valid_accuracy: f64,
    pub threshold: f64,
    /// Mean cumulative reward per agent over agent batches.
    pub mean_returns: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchKind {
    Judge,
    Agents,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub best: ParamStore,
    pub best_epoch: usize,
    /// Validation-selected threshold of the best epoch.
    pub threshold: f64,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchStats {
    loss: f64,
    correct: usize,
    count: usize,
    returns: [f64; 2],
}

pub struct Trainer<'a> {
    kg: &'a KnowledgeGraph,
    config: TrainConfig,
    pub model: Model,
    judge_opt: Adam,
    agent_opt: Adam,
    pub baseline: BaselineState,
    batches_done: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(kg: &'a KnowledgeGraph, model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamConfig { lr: config.lr, ..AdamConfig::default() };
        let judge_opt = Adam::new(adam, &model.params, model.judge_ids());
        let agent_opt = Adam::new(adam, &model.params, model.agent_ids());
        Ok(Self {
            kg,
            config,
            model,
            judge_opt,
            agent_opt,
            baseline: BaselineState::new(config.baseline_decay),
            batches_done: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Batch schedule: `warmup` judge batches, then judge and agents in turn.
    pub fn batch_kind(index: usize, warmup: usize) -> BatchKind {
        if index < warmup || (index - warmup) % 2 == 0 {
            BatchKind::Judge
        } else {
            BatchKind::Agents
        }
    }

    fn rollout_seed(&self, batch: usize, item: usize, k: usize) -> u64 {
        derive(self.config.seed, &[0xba7c, batch as u64, item as u64, k as u64])
    }

    fn transcripts(&self, batch: &[Query], index: usize) -> Result<Vec<Vec<Transcript>>> {
        let debater = Debater::new(self.kg, &self.model, &self.config.debate);
        batch
            .iter()
            .enumerate()
            .map(|(i, q)| {
                (0..self.config.debate.rollouts_train)
                    .map(|k| debater.run(&q.triple, self.rollout_seed(index, i, k)))
                    .collect()
            })
            .collect()
    }

    /// Gradient of the judge loss on freshly sampled debates; every rollout
    /// is one sample.
    pub fn judge_gradients(&self, batch: &[Query], index: usize) -> Result<(Gradients, f64, usize)> {
        let transcripts = self.transcripts(batch, index)?;
        let debater = Debater::new(self.kg, &self.model, &self.config.debate);
        let mut tape = Tape::new(&self.model.params);
        let mut scored = Vec::new();
        let mut correct = 0;
        for (q, ts) in batch.iter().zip(&transcripts) {
            for t in ts {
                let trace = debater.rejudge(&mut tape, t, KeepAgents::Both)?;
                correct += usize::from((tape.scalar(trace.score) > 0.5) == q.label);
                scored.push((trace.score, q.label));
            }
        }
        let loss = judge_loss(
            &mut tape,
            &self.model.judge,
            &scored,
            self.config.lambda,
            self.config.penalty_scope,
            self.config.judge_loss,
        )?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::Diverged(format!("judge loss is {value}")));
        }
        let grads = tape.backward(loss)?;
        Ok((grads, value, correct))
    }

    /// REINFORCE gradient for both agents. Rollouts are first played to get
    /// the returns, then replayed on a tape with the same seeds.
    pub fn agent_gradients(&mut self, batch: &[Query], index: usize) -> Result<(Gradients, [f64; 2])> {
        let transcripts = self.transcripts(batch, index)?;
        let squash = self.config.sigmoid_rewards;
        let g: Vec<Vec<[f64; 2]>> =
            transcripts.iter().map(|ts| ts.iter().map(|t| returns(t, squash)).collect()).collect();
        let count = g.iter().map(Vec::len).sum::<usize>();

        let mut advantages = g.clone();
        let mut means = [0.0; 2];
        for i in 0..2 {
            let mean = g.iter().flatten().map(|r| r[i]).sum::<f64>() / count as f64;
            means[i] = mean;
            let b = if self.baseline.is_initialized(i) { self.baseline.value(i) } else { mean };
            for r in advantages.iter_mut().flatten() {
                r[i] -= b;
            }
            if self.config.normalize_advantages && count > 1 {
                let var = g.iter().flatten().map(|r| (r[i] - mean) * (r[i] - mean)).sum::<f64>() / count as f64;
                let std = libm::sqrt(var);
                if std > 1e-8 {
                    for r in advantages.iter_mut().flatten() {
                        r[i] /= std;
                    }
                }
            }
            self.baseline.update(i, mean);
        }

        let debater = Debater::new(self.kg, &self.model, &self.config.debate);
        let mut grads = Gradients::new(&self.model.params);
        let rounds = self.config.debate.rounds;
        for ((q, ts), advs) in batch.iter().zip(&transcripts).zip(&advantages) {
            for (t, adv) in ts.iter().zip(advs) {
                let mut tape = Tape::new(&self.model.params);
                let trace = debater.trace(&mut tape, &q.triple, t.seed, &[], 1, rounds, KeepAgents::Both)?;
                debug_assert_eq!(trace.transcript.arguments, t.arguments);
                let mut episodes = Vec::with_capacity(trace.log_probs.len());
                for (arg, (lp, ent)) in trace.transcript.arguments.iter().zip(trace.log_probs.iter().zip(&trace.entropies)) {
                    if let (Some(log_prob), Some(entropy)) = (*lp, *ent) {
                        episodes.push(Episode { log_prob, entropy, advantage: adv[arg.agent - 1] });
                    }
                }
                let loss = reinforce_loss(&mut tape, &episodes, self.config.beta, count)?;
                tape.backward_into(loss, &mut grads)?;
            }
        }
        if !grads.is_finite() {
            return Err(Error::Diverged("agent gradient is not finite".into()));
        }
        Ok((grads, means))
    }

    fn run_batch(&mut self, batch: &[Query], warmup: usize) -> Result<(BatchKind, BatchStats)> {
        let index = self.batches_done;
        let kind = Self::batch_kind(index, warmup);
        let mut stats = BatchStats::default();
        match kind {
            BatchKind::Judge => {
                let (grads, loss, correct) = self.judge_gradients(batch, index)?;
                self.judge_opt.step(&mut self.model.params, &grads)?;
                stats.loss = loss;
                stats.correct = correct;
                stats.count = batch.len() * self.config.debate.rollouts_train;
            }
            BatchKind::Agents => {
                let (grads, means) = self.agent_gradients(batch, index)?;
                self.agent_opt.step(&mut self.model.params, &grads)?;
                stats.returns = means;
            }
        }
        self.batches_done += 1;
        Ok((kind, stats))
    }

    /// Mean rollout scores of `queries` under the current model.
    pub fn score(&self, queries: &[Query], rollouts: usize) -> Result<Vec<f64>> {
        let debater = Debater::new(self.kg, &self.model, &self.config.debate);
        let seed = derive(self.config.seed, &[0x7a11d]);
        queries
            .iter()
            .map(|q| Ok(debater.classify_with_rollouts(&q.triple, seed, rollouts, KeepAgents::Both)?.0))
            .collect()
    }

    /// Trains for `config.epochs` epochs and keeps the parameters with the
    /// best validation accuracy.
    pub fn train(&mut self, train: &[Query], valid: &[Query]) -> Result<TrainOutcome> {
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        let bs = self.config.batch_size;
        let per_epoch = train.len().div_ceil(bs);
        let warmup = self.config.warmup_batches(per_epoch * self.config.epochs);
        let mut history = Vec::with_capacity(self.config.epochs);
        let mut best: Option<(f64, usize, f64, ParamStore)> = None;
        let mut order: Vec<Query> = train.to_vec();

        for epoch in 1..=self.config.epochs {
            order.shuffle(&mut stream(self.config.seed, &[0x5f, epoch as u64]));
            let (mut loss, mut judge_batches, mut correct, mut seen) = (0.0, 0usize, 0usize, 0usize);
            let (mut ret, mut agent_batches) = ([0.0; 2], 0usize);
            for batch in order.chunks(bs) {
                let (kind, s) = self.run_batch(batch, warmup)?;
                match kind {
                    BatchKind::Judge => {
                        loss += s.loss;
                        judge_batches += 1;
                        correct += s.correct;
                        seen += s.count;
                    }
                    BatchKind::Agents => {
                        ret[0] += s.returns[0];
                        ret[1] += s.returns[1];
                        agent_batches += 1;
                    }
                }
            }
            let ratio = |a: f64, n: usize| if n == 0 { f64::NAN } else { a / n as f64 };

            let (valid_loss, valid_accuracy, threshold) = if valid.is_empty() {
                (f64::NAN, f64::NAN, 0.5)
            } else {
                self.validate(valid)?
            };
            let record = EpochRecord {
                epoch,
                train_loss: ratio(loss, judge_batches),
                train_accuracy: ratio(correct as f64, seen),
                valid_loss,
                valid_accuracy,
                threshold,
                mean_returns: [ratio(ret[0], agent_batches), ratio(ret[1], agent_batches)],
            };
            log::info!(
                "epoch {epoch}: train loss {:.4} acc {:.3}, valid loss {:.4} acc {:.3}",
                record.train_loss,
                record.train_accuracy,
                record.valid_loss,
                record.valid_accuracy
            );
            history.push(record);
            let score = if valid_accuracy.is_nan() { 0.0 } else { valid_accuracy };
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, epoch, threshold, self.model.params.clone()));
            }
        }
        let (_, best_epoch, threshold, best) = best.expect("at least one epoch");
        Ok(TrainOutcome { best, best_epoch, threshold, history })
    }

    /// Validation loss, accuracy at the selected threshold, and the threshold.
    pub fn validate(&self, valid: &[Query]) -> Result<(f64, f64, f64)> {
        let scores = self.score(valid, self.config.rollouts_validation)?;
        let labels: Vec<bool> = valid.iter().map(|q| q.label).collect();
        let loss = scores
            .iter()
            .zip(&labels)
            .map(|(&s, &l)| {
                let s = s.clamp(PROB_EPS, 1.0 - PROB_EPS);
                -if l { libm::log(s) } else { libm::log(1.0 - s) }
            })
            .sum::<f64>()
            / scores.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("validation loss is {loss}")));
        }
        let threshold = select_threshold(&scores, &labels)?;
        let correct = scores.iter().zip(&labels).filter(|(&s, &l)| (s > threshold) == l).count();
        Ok((loss, correct as f64 / scores.len() as f64, threshold))
    }
}
