//! The judge: per-argument network `f`, sum-aggregated classifier, raw
//! per-argument scores for rewards, and the supervised loss.

use alloc::vec::Vec;

use crate::autodiff::{NodeId, ParamId, Tape};
use crate::config::JudgeLoss;
use crate::error::{Error, Result};
use crate::kg::{Action, Triple};
use crate::tensor::Tensor;

/// Probabilities are clamped to this distance from 0 and 1 before logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeParams {
    pub entity: ParamId,
    pub relation: ParamId,
    /// `(weights, bias)` per layer of `f`, each followed by ReLU.
    pub layers: Vec<(ParamId, ParamId)>,
    /// `W` in `w^T relu(W y)`.
    pub classifier: ParamId,
    /// `w` in `w^T relu(W y)`.
    pub output: ParamId,
}

impl JudgeParams {
    pub fn bind(&self, tape: &mut Tape<'_>) -> BoundJudge {
        let layers = self.layers.iter().map(|&(w, b)| (tape.param(w), tape.param(b))).collect();
        let params = tape.params();
        let dim = params.get(self.entity).cols();
        let path_length = params.get(self.layers[0].0).cols() / (2 * dim) - 1;
        BoundJudge {
            entity: self.entity,
            relation: self.relation,
            layers,
            classifier: tape.param(self.classifier),
            output: tape.param(self.output),
            dim,
            path_length,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundJudge {
    entity: ParamId,
    relation: ParamId,
    layers: Vec<(NodeId, NodeId)>,
    classifier: NodeId,
    output: NodeId,
    dim: usize,
    path_length: usize,
}

impl BoundJudge {
    pub fn path_length(&self) -> usize {
        self.path_length
    }

    /// `[r_1; e_1; ...; r_T; e_T; r_p; e_o]` in judge space. The query subject
    /// is never part of the input.
    pub fn embed_argument(&self, tape: &mut Tape<'_>, actions: &[Action], query: &Triple) -> Result<NodeId> {
        if actions.len() != self.path_length {
            return Err(Error::ArgumentLength { expected: self.path_length, got: actions.len() });
        }
        let mut pairs: Vec<(usize, usize)> = actions.iter().map(|(r, e)| (r.index(), e.index())).collect();
        pairs.push((query.predicate.index(), query.object.index()));
        let m = tape.embed_pairs(self.relation, self.entity, &pairs)?;
        let width = 2 * (self.path_length + 1) * self.dim;
        Ok(tape.reshape(m, &[width])?)
    }

    /// `y = f([tau; q^J])`.
    pub fn argument_representation(&self, tape: &mut Tape<'_>, actions: &[Action], query: &Triple) -> Result<NodeId> {
        let mut x = self.embed_argument(tape, actions, query)?;
        for &(w, b) in &self.layers {
            let z = tape.matmul(w, x)?;
            let z = tape.add(z, b)?;
            x = tape.relu(z)?;
        }
        Ok(x)
    }

    /// `w^T relu(W y)`, no sigmoid.
    pub fn logit(&self, tape: &mut Tape<'_>, y: NodeId) -> Result<NodeId> {
        let z = tape.matmul(self.classifier, y)?;
        let z = tape.relu(z)?;
        Ok(tape.dot(self.output, z)?)
    }

    /// Raw per-argument score used as reward.
    pub fn score_argument(&self, tape: &mut Tape<'_>, y: NodeId) -> Result<NodeId> {
        self.logit(tape, y)
    }

    /// `sigma(w^T relu(W sum y))` over the representations that are kept.
    pub fn classify(&self, tape: &mut Tape<'_>, ys: &[NodeId]) -> Result<NodeId> {
        // summing in a canonical order makes the result exactly independent
        // of argument order
        let mut ys = ys.to_vec();
        ys.sort_by(|&a, &b| {
            let (va, vb) = (tape.value(a), tape.value(b));
            va.iter().zip(vb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
        });
        let total = match ys.split_first() {
            None => tape.zeros(self.dim),
            Some((&first, rest)) => {
                let mut acc = first;
                for &y in rest {
                    acc = tape.add(acc, y)?;
                }
                acc
            }
        };
        let logit = self.logit(tape, total)?;
        Ok(tape.sigmoid(logit)?)
    }
}

/// Binary cross-entropy of one prediction, with clamping.
pub fn query_loss(tape: &mut Tape<'_>, score: NodeId, label: bool, form: JudgeLoss) -> Result<NodeId> {
    let raw = tape.scalar(score);
    let t = if raw < PROB_EPS || raw > 1.0 - PROB_EPS {
        log::debug!("clamping judge score {raw}");
        let clamped = raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
        // pass-through value with zero gradient
        tape.constant(Tensor::scalar(clamped))
    } else {
        score
    };
    let log_t = tape.log(t)?;
    let loss = match (label, form) {
        (true, _) => tape.scale(log_t, -1.0)?,
        (false, JudgeLoss::CrossEntropy) => {
            let neg = tape.scale(t, -1.0)?;
            let one = tape.constant(Tensor::scalar(1.0));
            let one_minus = tape.add(one, neg)?;
            let l = tape.log(one_minus)?;
            tape.scale(l, -1.0)?
        }
        (false, JudgeLoss::AsPrinted) => {
            let one = tape.constant(Tensor::scalar(-1.0));
            tape.add(one, log_t)?
        }
    };
    Ok(loss)
}

/// Tensors covered by the judge's L2 penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyScope {
    /// Embeddings, weights and biases.
    All,
    /// Dense weight matrices and the output vector only.
    Weights,
}

impl JudgeParams {
    pub fn penalized(&self, scope: PenaltyScope) -> Vec<ParamId> {
        let mut ids = alloc::vec![self.classifier, self.output];
        ids.extend(self.layers.iter().map(|&(w, _)| w));
        if scope == PenaltyScope::All {
            ids.extend([self.entity, self.relation]);
            ids.extend(self.layers.iter().map(|&(_, b)| b));
        }
        ids
    }
}

/// Mean loss over `(score, label)` pairs plus `lambda` times the squared L2
/// norm of the judge tensors in `scope`.
pub fn judge_loss(
    tape: &mut Tape<'_>,
    judge: &JudgeParams,
    scores: &[(NodeId, bool)],
    lambda: f64,
    scope: PenaltyScope,
    form: JudgeLoss,
) -> Result<NodeId> {
    let mut terms = Vec::with_capacity(scores.len());
    for &(s, label) in scores {
        terms.push(query_loss(tape, s, label, form)?);
    }
    let data = tape.concat(&terms)?;
    let sum = tape.sum(data)?;
    let mut loss = tape.scale(sum, 1.0 / scores.len().max(1) as f64)?;
    if lambda > 0.0 {
        let ids = judge.penalized(scope);
        let mut norms = Vec::with_capacity(ids.len());
        for id in ids {
            let p = tape.param(id);
            norms.push(tape.dot(p, p)?);
        }
        let all = tape.concat(&norms)?;
        let total = tape.sum(all)?;
        let penalty = tape.scale(total, lambda)?;
        loss = tape.add(loss, penalty)?;
    }
    Ok(loss)
}
