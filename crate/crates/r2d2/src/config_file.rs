//! Line-oriented `key = value` configuration.
//!
//! `#` starts a comment. Unknown keys are rejected so typos surface early.
//! [`render`] writes every key, and `parse(render(c)) == c`.

use std::path::Path;

use r2d2_core::config::{JudgeLoss, KeepAgents};
use r2d2_core::judge::PenaltyScope;
use r2d2_core::{SamplingMode, TrainConfig};

use crate::error::{Error, Result};

fn bool_of(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Applies `text` on top of `base`. `source` only labels error messages.
pub fn parse_onto(base: TrainConfig, text: &str, source: &Path) -> Result<TrainConfig> {
    let mut c = base;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::format(source, format!("line {}: {m}", i + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let invalid = || bad(format!("invalid value `{value}` for `{key}`"));
        macro_rules! num {
            () => {
                value.parse().map_err(|_| invalid())?
            };
        }
        let flag = || bool_of(value).ok_or_else(invalid);
        match key {
            "dim" => c.model.dim = num!(),
            "path_length" => c.model.path_length = num!(),
            "lstm_layers" => c.model.lstm_layers = num!(),
            "judge_layers" => c.model.judge_layers = num!(),
            "rounds" => c.debate.rounds = num!(),
            "rollouts_train" => c.debate.rollouts_train = num!(),
            "rollouts_classification" => c.debate.rollouts_classification = num!(),
            "rollouts_completion" => c.debate.rollouts_completion = num!(),
            "rollouts_validation" => c.rollouts_validation = num!(),
            "max_out_degree" => c.debate.max_out_degree = num!(),
            "mask_query_edge" => c.debate.mask_query_edge = flag()?,
            "carry_history" => c.debate.carry_history = flag()?,
            "sampling" => {
                c.debate.mode = match value {
                    "stochastic" => SamplingMode::Stochastic,
                    "greedy" => SamplingMode::Greedy,
                    _ => return Err(invalid()),
                }
            }
            "beta" => c.beta = num!(),
            "lambda" => c.lambda = num!(),
            "penalty_scope" => {
                c.penalty_scope = match value {
                    "all" => PenaltyScope::All,
                    "weights" => PenaltyScope::Weights,
                    _ => return Err(invalid()),
                }
            }
            "lr" => c.lr = num!(),
            "batch_size" => c.batch_size = num!(),
            "epochs" => c.epochs = num!(),
            "judge_warmup_batches" => {
                c.judge_warmup_batches = if value == "auto" { None } else { Some(num!()) }
            }
            "baseline_decay" => c.baseline_decay = num!(),
            "normalize_advantages" => c.normalize_advantages = flag()?,
            "sigmoid_rewards" => c.sigmoid_rewards = flag()?,
            "judge_loss" => {
                c.judge_loss = match value {
                    "cross_entropy" => JudgeLoss::CrossEntropy,
                    "as_printed" => JudgeLoss::AsPrinted,
                    _ => return Err(invalid()),
                }
            }
            "seed" => c.seed = num!(),
            _ => return Err(bad(format!("unknown key `{key}`"))),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn parse(text: &str, source: &Path) -> Result<TrainConfig> {
    parse_onto(TrainConfig::default(), text, source)
}

pub fn load(path: &Path) -> Result<TrainConfig> {
    parse(&crate::data::read_text(path)?, path)
}

pub fn render(c: &TrainConfig) -> String {
    let mode = match c.debate.mode {
        SamplingMode::Stochastic => "stochastic",
        SamplingMode::Greedy => "greedy",
    };
    let scope = match c.penalty_scope {
        PenaltyScope::All => "all",
        PenaltyScope::Weights => "weights",
    };
    let loss = match c.judge_loss {
        JudgeLoss::CrossEntropy => "cross_entropy",
        JudgeLoss::AsPrinted => "as_printed",
    };
    let warmup = c.judge_warmup_batches.map_or("auto".to_string(), |w| w.to_string());
    // `{:?}` prints floats with enough digits to round-trip
    [
        format!("dim = {}", c.model.dim),
        format!("path_length = {}", c.model.path_length),
        format!("lstm_layers = {}", c.model.lstm_layers),
        format!("judge_layers = {}", c.model.judge_layers),
        format!("rounds = {}", c.debate.rounds),
        format!("rollouts_train = {}", c.debate.rollouts_train),
        format!("rollouts_classification = {}", c.debate.rollouts_classification),
        format!("rollouts_completion = {}", c.debate.rollouts_completion),
        format!("rollouts_validation = {}", c.rollouts_validation),
        format!("max_out_degree = {}", c.debate.max_out_degree),
        format!("mask_query_edge = {}", c.debate.mask_query_edge),
        format!("carry_history = {}", c.debate.carry_history),
        format!("sampling = {mode}"),
        format!("beta = {:?}", c.beta),
        format!("lambda = {:?}", c.lambda),
        format!("penalty_scope = {scope}"),
        format!("lr = {:?}", c.lr),
        format!("batch_size = {}", c.batch_size),
        format!("epochs = {}", c.epochs),
        format!("judge_warmup_batches = {warmup}"),
        format!("baseline_decay = {:?}", c.baseline_decay),
        format!("normalize_advantages = {}", c.normalize_advantages),
        format!("sigmoid_rewards = {}", c.sigmoid_rewards),
        format!("judge_loss = {loss}"),
        format!("seed = {}", c.seed),
    ]
    .join("\n")
        + "\n"
}

pub fn parse_keep(value: &str) -> Option<KeepAgents> {
    match value {
        "both" => Some(KeepAgents::Both),
        "1" => Some(KeepAgents::First),
        "2" => Some(KeepAgents::Second),
        _ => None,
    }
}
