//! Single-step bandit MDPs for the policy-gradient estimator.

use r2d2_core::agent::{sample_action, BoundAgent};
use r2d2_core::autodiff::{Adam, AdamConfig, Gradients, NodeId, ParamId, Tape};
use r2d2_core::config::ModelConfig;
use r2d2_core::kg::Action;
use r2d2_core::rng::stream;
use r2d2_core::trainer::{reinforce_loss, BaselineState, Episode};
use r2d2_core::{KnowledgeGraph, Model, SamplingMode, Triple};
use rand::Rng;

pub struct Bandit {
    pub kg: KnowledgeGraph,
    pub model: Model,
    pub query: Triple,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
}

impl Bandit {
    /// Two actions from one state; the first pays 1, the second 0.
    pub fn two_armed(seed: u64) -> Self {
        let kg = KnowledgeGraph::from_tsv("s\tr\tgood\ns\tr\tbad\n", true).unwrap();
        let r = kg.relation("r").unwrap();
        let actions = vec![(r, kg.entity("good").unwrap()), (r, kg.entity("bad").unwrap())];
        Self::new(kg, actions, vec![1.0, 0.0], seed)
    }

    /// The full action list of the state (self-loop and two edges) with
    /// uneven rewards.
    pub fn three_armed(seed: u64) -> Self {
        let kg = KnowledgeGraph::from_tsv("s\tr\tgood\ns\tr\tbad\n", true).unwrap();
        let s = kg.entity("s").unwrap();
        let actions = kg.actions_from(s, 400, &mut stream(0, &[]));
        Self::new(kg, actions, vec![0.2, 1.0, -0.5], seed)
    }

    fn new(kg: KnowledgeGraph, actions: Vec<Action>, rewards: Vec<f64>, seed: u64) -> Self {
        let cfg = ModelConfig { dim: 4, path_length: 1, lstm_layers: 1, judge_layers: 1 };
        let model = Model::new(cfg, kg.num_entities(), kg.num_relations(), seed).unwrap();
        let query = kg.resolve("s", "r", "good").unwrap();
        Self { kg, model, query, actions, rewards }
    }

    pub fn agent_ids(&self) -> Vec<ParamId> {
        self.model.params.ids_with_prefix("agent1/").collect()
    }

    fn policy(&self, tape: &mut Tape<'_>) -> NodeId {
        let agent: BoundAgent = self.model.agent(1).bind(tape);
        let mut state = agent.start(tape, &self.query).unwrap();
        let h = agent.encode_step(tape, &mut state, None).unwrap();
        agent.action_distribution(tape, h, &self.actions).unwrap()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let mut tape = Tape::new(&self.model.params);
        let p = self.policy(&mut tape);
        tape.value(p).to_vec()
    }

    pub fn entropy(&self) -> f64 {
        -self.probabilities().iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// Gradient of the surrogate for one episode choosing `k` with the
    /// given advantage.
    fn surrogate_gradient(&self, k: usize, advantage: f64) -> Vec<f64> {
        let mut tape = Tape::new(&self.model.params);
        let p = self.policy(&mut tape);
        let pick = tape.pick(p, k).unwrap();
        let lp = tape.log(pick).unwrap();
        let h = tape.entropy(p).unwrap();
        let loss = reinforce_loss(&mut tape, &[Episode { log_prob: lp, entropy: h, advantage }], 0.0, 1).unwrap();
        flatten(&tape.backward(loss).unwrap(), self)
    }

    /// Exact gradient of the expected reward, by enumeration.
    pub fn expected_reward_gradient(&self) -> Vec<f64> {
        let mut tape = Tape::new(&self.model.params);
        let p = self.policy(&mut tape);
        let terms: Vec<NodeId> = self
            .rewards
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let pk = tape.pick(p, k).unwrap();
                tape.scale(pk, r).unwrap()
            })
            .collect();
        let all = tape.concat(&terms).unwrap();
        let j = tape.sum(all).unwrap();
        flatten(&tape.backward(j).unwrap(), self)
    }
}

fn flatten(g: &Gradients, b: &Bandit) -> Vec<f64> {
    b.agent_ids().into_iter().flat_map(|id| g.dense(id, &b.model.params)).collect()
}

pub struct ToyRun {
    /// Probability of the best action before each update, then after the last.
    pub prob_best: Vec<f64>,
    pub final_entropy: f64,
}

/// REINFORCE with an EMA baseline and Adam, `batch` episodes per update.
pub fn train(mut bandit: Bandit, beta: f64, updates: usize, batch: usize, lr: f64, seed: u64) -> ToyRun {
    let ids = bandit.agent_ids();
    let mut adam = Adam::new(AdamConfig { lr, ..AdamConfig::default() }, &bandit.model.params, ids);
    let mut baseline = BaselineState::new(0.9);
    let mut rng = stream(seed, &[0x70]);
    let mut prob_best = Vec::with_capacity(updates + 1);
    for _ in 0..updates {
        let grads = {
            let mut tape = Tape::new(&bandit.model.params);
            let p = bandit.policy(&mut tape);
            let probs = tape.value(p).to_vec();
            prob_best.push(probs[0]);
            let picks: Vec<usize> = (0..batch).map(|_| sample_action(&probs, SamplingMode::Stochastic, &mut rng)).collect();
            let mean = picks.iter().map(|&k| bandit.rewards[k]).sum::<f64>() / batch as f64;
            let b = if baseline.is_initialized(0) { baseline.value(0) } else { mean };
            baseline.update(0, mean);
            let h = tape.entropy(p).unwrap();
            let episodes: Vec<Episode> = picks
                .iter()
                .map(|&k| {
                    let pk = tape.pick(p, k).unwrap();
                    let lp = tape.log(pk).unwrap();
                    Episode { log_prob: lp, entropy: h, advantage: bandit.rewards[k] - b }
                })
                .collect();
            let loss = reinforce_loss(&mut tape, &episodes, beta, batch).unwrap();
            tape.backward(loss).unwrap()
        };
        adam.step(&mut bandit.model.params, &grads).unwrap();
    }
    prob_best.push(bandit.probabilities()[0]);
    ToyRun { prob_best, final_entropy: bandit.entropy() }
}

/// z-scores of the sampled policy-gradient estimate against the exact
/// expected-reward gradient, projected on `directions` fixed random
/// directions, over `episodes` sampled episodes.
pub fn unbiasedness_z(episodes: usize, directions: usize, seed: u64) -> Vec<f64> {
    let bandit = Bandit::three_armed(seed);
    let exact = bandit.expected_reward_gradient();
    // the estimator for an episode choosing k is R_k grad log pi_k, the
    // negated surrogate gradient
    let per_action: Vec<Vec<f64>> = (0..bandit.actions.len())
        .map(|k| bandit.surrogate_gradient(k, bandit.rewards[k]).into_iter().map(|g| -g).collect())
        .collect();
    let probs = bandit.probabilities();
    let mut rng = stream(seed, &[0x0b]);
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..episodes {
        counts[sample_action(&probs, SamplingMode::Stochastic, &mut rng)] += 1;
    }
    let n = episodes as f64;
    (0..directions)
        .map(|j| {
            let mut drng = stream(seed, &[0xd1, j as u64]);
            let u: Vec<f64> = exact.iter().map(|_| drng.random_range(-1.0..1.0)).collect();
            let dot = |v: &[f64]| v.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
            let x: Vec<f64> = per_action.iter().map(|g| dot(g)).collect();
            let mean = counts.iter().zip(&x).map(|(&c, &v)| c as f64 * v).sum::<f64>() / n;
            let var = counts.iter().zip(&x).map(|(&c, &v)| c as f64 * (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean - dot(&exact)) / (var / n).sqrt()
        })
        .collect()
}
