use alloc::format;

use crate::error::{Error, Result};
use crate::judge::PenaltyScope;

/// Architecture hyperparameters. The argument length `T` lives here because it
/// fixes the judge's input width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Embedding width `d`.
    pub dim: usize,
    /// Actions per argument `T`.
    pub path_length: usize,
    pub lstm_layers: usize,
    /// Hidden layers of the judge network `f`.
    pub judge_layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { dim: 64, path_length: 2, lstm_layers: 1, judge_layers: 3 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.path_length == 0 || self.lstm_layers == 0 || self.judge_layers == 0 {
            return Err(Error::Config(format!("model sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Stochastic,
    /// Argmax, ties to the lowest action index.
    Greedy,
}

/// Which agents' arguments reach the judge's aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepAgents {
    Both,
    First,
    Second,
}

impl KeepAgents {
    pub fn keeps(self, agent: usize) -> bool {
        match self {
            KeepAgents::Both => true,
            KeepAgents::First => agent == 1,
            KeepAgents::Second => agent == 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebateConfig {
    /// Rounds `N`; each round holds one argument per agent.
    pub rounds: usize,
    pub rollouts_train: usize,
    pub rollouts_classification: usize,
    pub rollouts_completion: usize,
    pub max_out_degree: usize,
    /// Hide the query edge (and its inverse) from the agents.
    pub mask_query_edge: bool,
    pub mode: SamplingMode,
    /// Carry LSTM state from one argument to the agent's next one.
    pub carry_history: bool,
}

impl Default for DebateConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            rollouts_train: 20,
            rollouts_classification: 50,
            rollouts_completion: 100,
            max_out_degree: 400,
            mask_query_edge: true,
            mode: SamplingMode::Stochastic,
            carry_history: false,
        }
    }
}

impl DebateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.rollouts_train == 0 || self.rollouts_classification == 0 || self.rollouts_completion == 0 {
            return Err(Error::Config("rollout counts must be >= 1".into()));
        }
        if self.max_out_degree == 0 {
            return Err(Error::Config("max_out_degree must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgeLoss {
    /// `-[y log t + (1 - y) log(1 - t)]`.
    CrossEntropy,
    /// `-[y log t + (1 - y)(1 - log t)]`, kept for comparison only.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub debate: DebateConfig,
    /// Entropy bonus weight.
    pub beta: f64,
    /// L2 penalty on judge parameters.
    pub lambda: f64,
    pub penalty_scope: PenaltyScope,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Judge-only batches before alternation starts; `None` means 10% of all
    /// batches.
    pub judge_warmup_batches: Option<usize>,
    pub baseline_decay: f64,
    pub normalize_advantages: bool,
    /// Squash per-argument scores through a sigmoid before using them as
    /// rewards.
    pub sigmoid_rewards: bool,
    pub judge_loss: JudgeLoss,
    /// Rollouts per validation query when selecting the best epoch.
    pub rollouts_validation: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            debate: DebateConfig::default(),
            beta: 0.02,
            lambda: 0.02,
            penalty_scope: PenaltyScope::All,
            lr: 1e-4,
            batch_size: 32,
            epochs: 10,
            judge_warmup_batches: None,
            baseline_decay: 0.95,
            normalize_advantages: true,
            sigmoid_rewards: false,
            judge_loss: JudgeLoss::CrossEntropy,
            rollouts_validation: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.debate.validate()?;
        if self.batch_size == 0 || self.rollouts_validation == 0 {
            return Err(Error::Config("batch_size and rollouts_validation must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::Config("baseline_decay must be in [0, 1)".into()));
        }
        if self.beta < 0.0 || self.lambda < 0.0 || self.lr <= 0.0 {
            return Err(Error::Config("beta and lambda must be >= 0, lr > 0".into()));
        }
        Ok(())
    }

    pub fn warmup_batches(&self, total_batches: usize) -> usize {
        self.judge_warmup_batches.unwrap_or(total_batches / 10)
    }
}
