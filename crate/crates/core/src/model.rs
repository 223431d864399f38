//! Parameter layout for both agents and the judge.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::agent::AgentParams;
use crate::autodiff::{ParamId, ParamStore};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::judge::JudgeParams;
use crate::rng::stream;
use crate::tensor::Tensor;

/// Both agents and the judge over one shared [`ParamStore`].
///
/// Tensor names: `agent1/*`, `agent2/*`, `judge/*`.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub agents: [AgentParams; 2],
    pub judge: JudgeParams,
    num_entities: usize,
    num_relations: usize,
}

struct Init<R> {
    rng: R,
}

impl<R: Rng> Init<R> {
    fn embedding(&mut self, rows: usize, dim: usize) -> Tensor {
        let normal = Normal::new(0.0, 1.0 / libm::sqrt(dim as f64)).expect("valid std");
        let data = (0..rows * dim).map(|_| normal.sample(&mut self.rng)).collect();
        Tensor::from_vec(&[rows, dim], data)
    }

    /// Glorot/Xavier uniform.
    fn weight(&mut self, rows: usize, cols: usize) -> Tensor {
        let limit = libm::sqrt(6.0 / (rows + cols) as f64);
        let dist = Uniform::new_inclusive(-limit, limit).expect("valid range");
        let data = (0..rows * cols).map(|_| dist.sample(&mut self.rng)).collect();
        Tensor::from_vec(&[rows, cols], data)
    }
}

impl Model {
    pub fn new(config: ModelConfig, num_entities: usize, num_relations: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let mut init = Init { rng: stream(seed, &[0x1417]) };
        let mut params = ParamStore::new();

        let mut agent = |params: &mut ParamStore, prefix: &str| {
            let entity = params.add(format!("{prefix}/entity"), init.embedding(num_entities, d));
            let relation = params.add(format!("{prefix}/relation"), init.embedding(num_relations, d));
            let mut lstm = Vec::with_capacity(config.lstm_layers);
            for layer in 0..config.lstm_layers {
                // layer 0 reads [previous action (2d); query (3d)]
                let input = if layer == 0 { 5 * d } else { d };
                let w = params.add(format!("{prefix}/lstm{layer}/w"), init.weight(4 * d, input + d));
                let b = params.add(format!("{prefix}/lstm{layer}/b"), Tensor::zeros(&[4 * d]));
                lstm.push((w, b));
            }
            let w1 = params.add(format!("{prefix}/w1"), init.weight(d, d));
            let w2 = params.add(format!("{prefix}/w2"), init.weight(2 * d, d));
            AgentParams { entity, relation, lstm, w1, w2 }
        };
        let agent1 = agent(&mut params, "agent1");
        let agent2 = agent(&mut params, "agent2");

        let entity = params.add("judge/entity", init.embedding(num_entities, d));
        let relation = params.add("judge/relation", init.embedding(num_relations, d));
        let mut layers = Vec::with_capacity(config.judge_layers);
        for layer in 0..config.judge_layers {
            let input = if layer == 0 { 2 * (config.path_length + 1) * d } else { d };
            let w = params.add(format!("judge/f{layer}/w"), init.weight(d, input));
            let b = params.add(format!("judge/f{layer}/b"), Tensor::zeros(&[d]));
            layers.push((w, b));
        }
        let classifier = params.add("judge/classifier", init.weight(d, d));
        let output = params.add("judge/output", Tensor::vector(init.weight(d, 1).into_data()));
        let judge = JudgeParams { entity, relation, layers, classifier, output };

        Ok(Self { config, params, agents: [agent1, agent2], judge, num_entities, num_relations })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn agent(&self, which: usize) -> &AgentParams {
        &self.agents[which - 1]
    }

    pub fn judge_ids(&self) -> Vec<ParamId> {
        self.params.ids_with_prefix("judge/").collect()
    }

    pub fn agent_ids(&self) -> Vec<ParamId> {
        self.params.ids_with_prefix("agent").collect()
    }

    /// Overwrites every tensor from `other`, which must have the same layout.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<()> {
        for id in self.params.ids().collect::<Vec<_>>() {
            let name = self.params.name(id);
            let src = other.id(name).ok_or_else(|| Error::Config(format!("missing tensor {name}")))?;
            let src = other.get(src);
            let dst = self.params.get_mut(id);
            if src.shape() != dst.shape() {
                return Err(Error::Dimension { expected: dst.len(), got: src.len() });
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}
