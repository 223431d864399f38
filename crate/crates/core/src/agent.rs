//! One debating agent: LSTM history encoder, action-scoring head and
//! categorical sampling.

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::autodiff::{NodeId, ParamId, Tape};
use crate::config::SamplingMode;
use crate::error::{Error, Result};
use crate::kg::{Action, EntityId, Triple};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentParams {
    pub entity: ParamId,
    pub relation: ParamId,
    /// `(weights, bias)` per LSTM layer.
    pub lstm: Vec<(ParamId, ParamId)>,
    pub w1: ParamId,
    pub w2: ParamId,
}

impl AgentParams {
    pub fn dim(&self, tape: &Tape<'_>) -> usize {
        tape.params().get(self.entity).cols()
    }

    /// Records the dense weights once so every step of a rollout reuses them.
    pub fn bind(&self, tape: &mut Tape<'_>) -> BoundAgent {
        let lstm = self.lstm.iter().map(|&(w, b)| (tape.param(w), tape.param(b))).collect();
        let dim = self.dim(tape);
        BoundAgent {
            entity: self.entity,
            relation: self.relation,
            lstm,
            w1: tape.param(self.w1),
            w2: tape.param(self.w2),
            dim,
        }
    }
}

/// Agent weights recorded on one tape.
#[derive(Debug, Clone)]
pub struct BoundAgent {
    entity: ParamId,
    relation: ParamId,
    lstm: Vec<(NodeId, NodeId)>,
    w1: NodeId,
    w2: NodeId,
    dim: usize,
}

/// Position, recurrent state and fixed query embedding of one agent.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub position: EntityId,
    /// `(h, c)` per layer.
    pub cells: Vec<(NodeId, NodeId)>,
    /// `[e_s; r_p; e_o]` in this agent's embedding space.
    pub query: NodeId,
}

impl BoundAgent {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fresh state at the query subject with zero recurrent state.
    pub fn start(&self, tape: &mut Tape<'_>, query: &Triple) -> Result<AgentState> {
        let s = tape.gather(self.entity, &[query.subject.index()])?;
        let p = tape.gather(self.relation, &[query.predicate.index()])?;
        let o = tape.gather(self.entity, &[query.object.index()])?;
        let q = tape.concat(&[s, p, o])?;
        let cells = self.zero_cells(tape);
        Ok(AgentState { position: query.subject, cells, query: q })
    }

    pub fn zero_cells(&self, tape: &mut Tape<'_>) -> Vec<(NodeId, NodeId)> {
        (0..self.lstm.len()).map(|_| (tape.zeros(self.dim), tape.zeros(self.dim))).collect()
    }

    /// Feeds `[a_{t-1}; q]` through the LSTM stack and returns the top hidden
    /// state. `prev` is `None` at the first step of an argument, which feeds a
    /// zero action embedding.
    pub fn encode_step(&self, tape: &mut Tape<'_>, state: &mut AgentState, prev: Option<Action>) -> Result<NodeId> {
        let action = match prev {
            Some((r, e)) => tape.embed_pairs(self.relation, self.entity, &[(r.index(), e.index())])?,
            None => tape.zeros(2 * self.dim),
        };
        let mut input = tape.concat(&[action, state.query])?;
        for (layer, &(w, b)) in self.lstm.iter().enumerate() {
            let (h, c) = state.cells[layer];
            let out = tape.lstm_cell(input, h, c, w, b)?;
            let h = tape.slice(out, 0, self.dim)?;
            let c = tape.slice(out, self.dim, self.dim)?;
            state.cells[layer] = (h, c);
            input = h;
        }
        Ok(input)
    }

    /// `softmax(A (W2 relu(W1 h)))` where row `k` of `A` is `[r_k; e_k]`.
    pub fn action_distribution(&self, tape: &mut Tape<'_>, hidden: NodeId, actions: &[Action]) -> Result<NodeId> {
        if actions.is_empty() {
            return Err(Error::EmptyActions);
        }
        let pairs: Vec<(usize, usize)> = actions.iter().map(|(r, e)| (r.index(), e.index())).collect();
        let rows = tape.embed_pairs(self.relation, self.entity, &pairs)?;
        let z = tape.matmul(self.w1, hidden)?;
        let z = tape.relu(z)?;
        let v = tape.matmul(self.w2, z)?;
        let logits = tape.matmul(rows, v)?;
        Ok(tape.softmax(logits)?)
    }
}

/// Draws an index from a probability vector.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], mode: SamplingMode, rng: &mut R) -> usize {
    match mode {
        SamplingMode::Greedy => greedy(probs),
        SamplingMode::Stochastic => match WeightedIndex::new(probs) {
            Ok(dist) => dist.sample(rng),
            Err(_) => greedy(probs),
        },
    }
}

/// Argmax with ties going to the lowest index.
pub fn greedy(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
