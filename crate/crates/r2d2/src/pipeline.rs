//! End-to-end runs over files: training with its reports, and evaluation
//! of a saved checkpoint.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use r2d2_core::config::KeepAgents;
use r2d2_core::debate::Debater;
use r2d2_core::metrics;
use r2d2_core::trainer::{apply_pretrained, PretrainedScope, TrainOutcome, Trainer};
use r2d2_core::{KnowledgeGraph, Model, Query, TrainConfig, Triple};

use crate::checkpoint::{self, Checkpoint};
use crate::data::{self, Row};
use crate::error::Result;
use crate::evaluate;
use crate::report::{self, ClassificationRow, RankingRow};

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const METRICS: &str = "metrics.csv";
pub const TRANSCRIPTS: &str = "transcripts.jsonl";
pub const RANKING: &str = "ranking.json";

/// Stream keys of the generated negatives per split.
const TRAIN_KEY: u64 = 1;
const VALID_KEY: u64 = 2;
const TEST_KEY: u64 = 3;

#[derive(Debug, Clone, Default)]
pub struct Splits {
    pub graph: PathBuf,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

/// Resolved splits over one graph.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub kg: KnowledgeGraph,
    pub train: Vec<(Triple, Option<bool>)>,
    pub valid: Vec<(Triple, Option<bool>)>,
    pub test: Vec<(Triple, Option<bool>)>,
    pub known: BTreeSet<Triple>,
}

impl Loaded {
    pub fn queries(&self, seed: u64) -> [Vec<Query>; 3] {
        [
            data::labeled_queries(&self.kg, &self.train, &self.known, seed, TRAIN_KEY),
            data::labeled_queries(&self.kg, &self.valid, &self.known, seed, VALID_KEY),
            data::labeled_queries(&self.kg, &self.test, &self.known, seed, TEST_KEY),
        ]
    }
}

fn rows(path: &Option<PathBuf>) -> Result<Vec<Row>> {
    path.as_deref().map_or(Ok(Vec::new()), data::read_rows)
}

/// Loads splits; with a checkpoint the graph must fit its vocabularies.
pub fn load(splits: &Splits, ck: Option<&Checkpoint>) -> Result<Loaded> {
    let graph = data::read_rows(&splits.graph)?;
    let (train, valid, test) = (rows(&splits.train)?, rows(&splits.valid)?, rows(&splits.test)?);
    let kg = match ck {
        Some(ck) => ck.graph(&graph)?,
        None => data::build_graph(&graph, &[&train, &valid, &test]),
    };
    let resolve = |r: &[Row]| -> Result<Vec<(Triple, Option<bool>)>> {
        data::resolve(&kg, r).map_err(|e| match (ck, e) {
            (Some(_), crate::Error::Core(e)) => crate::Error::VocabularyMismatch(e.to_string()),
            (_, e) => e,
        })
    };
    let (train, valid, test) = (resolve(&train)?, resolve(&valid)?, resolve(&test)?);
    let known = data::known_true(&kg, &[&train, &valid, &test]);
    Ok(Loaded { kg, train, valid, test, known })
}

/// Rounds every parameter through `f32`, the checkpoint storage type.
pub fn round_to_storage(model: &mut Model) {
    for id in model.params.ids().collect::<Vec<_>>() {
        for v in model.params.get_mut(id).data_mut() {
            *v = *v as f32 as f64;
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub outcome: TrainOutcome,
    /// Threshold re-selected on validation with the stored model.
    pub threshold: f64,
    pub metrics: Vec<ClassificationRow>,
}

/// Trains, then writes the checkpoint, training log, metrics and the first
/// rollout transcript of every test query under `out`.
///
/// Reported metrics use the checkpoint's `f32` parameters, so a later
/// evaluation of the checkpoint reproduces them.
pub fn train(
    splits: &Splits,
    config: TrainConfig,
    pretrained: Option<(&Path, PretrainedScope)>,
    out: &Path,
) -> Result<TrainReport> {
    let loaded = load(splits, None)?;
    let kg = &loaded.kg;
    let [train_q, valid_q, test_q] = loaded.queries(config.seed);
    log::info!(
        "{} entities, {} relations, {} edges; {} train / {} valid / {} test queries",
        kg.num_entities(),
        kg.relations().base_count(),
        kg.num_triples(),
        train_q.len(),
        valid_q.len(),
        test_q.len()
    );
    let mut model = Model::new(config.model, kg.num_entities(), kg.num_relations(), config.seed)?;
    if let Some((path, scope)) = pretrained {
        let rows = data::read_pretrained(path, kg)?;
        let n = apply_pretrained(&mut model, scope, &rows)?;
        log::info!("{n} pretrained rows loaded and frozen");
    }
    let mut trainer = Trainer::new(kg, model, config)?;
    let outcome = trainer.train(&train_q, &valid_q)?;
    report::write_csv(&out.join(TRAIN_LOG), &report::log_rows(&outcome.history))?;

    let mut model = trainer.model.clone();
    model.load_values(&outcome.best)?;
    round_to_storage(&mut model);

    let rollouts = config.debate.rollouts_classification;
    let valid_scores = evaluate::score_queries(kg, &model, &config.debate, &valid_q, config.seed, rollouts, KeepAgents::Both)?;
    let labels: Vec<bool> = valid_q.iter().map(|q| q.label).collect();
    let threshold = metrics::select_threshold(&valid_scores, &labels)?;
    checkpoint::save(&out.join(CHECKPOINT_DIR), kg, &model, &config, threshold)?;

    let mut rows = vec![ClassificationRow::new("valid", "both", &evaluate::classify(&valid_scores, &valid_q, threshold)?)];
    if !test_q.is_empty() {
        let scores = evaluate::score_queries(kg, &model, &config.debate, &test_q, config.seed, rollouts, KeepAgents::Both)?;
        rows.push(ClassificationRow::new("test", "both", &evaluate::classify(&scores, &test_q, threshold)?));
        write_transcripts(&out.join(TRANSCRIPTS), kg, &model, &config, &test_q)?;
    }
    report::write_csv(&out.join(METRICS), &rows)?;
    Ok(TrainReport { outcome, threshold, metrics: rows })
}

fn write_transcripts(path: &Path, kg: &KnowledgeGraph, model: &Model, config: &TrainConfig, queries: &[Query]) -> Result<()> {
    let debater = Debater::new(kg, model, &config.debate);
    let mut text = String::new();
    for q in queries {
        let (_, ts) = debater.classify_with_rollouts(&q.triple, config.seed, 1, KeepAgents::Both)?;
        text.push_str(&serde_json::to_string(&report::transcript_view(kg, &ts[0]))?);
        text.push('\n');
    }
    data::write_text(path, &text)
}

/// Classification report for the test split at the checkpoint threshold.
/// Ablated runs (`keep` other than both) are reported next to the full
/// debate so the positive-rate shift is visible.
pub fn evaluate_classification(
    splits: &Splits,
    checkpoint_dir: &Path,
    rollouts: Option<usize>,
    keep: KeepAgents,
    seed: Option<u64>,
) -> Result<Vec<ClassificationRow>> {
    let ck = checkpoint::load(checkpoint_dir)?;
    let loaded = load(splits, Some(&ck))?;
    let seed = seed.unwrap_or(ck.config.seed);
    let [_, _, test_q] = loaded.queries(seed);
    let rollouts = rollouts.unwrap_or(ck.config.debate.rollouts_classification);
    let score = |keep| evaluate::score_queries(&loaded.kg, &ck.model, &ck.config.debate, &test_q, seed, rollouts, keep);
    let mut rows = vec![ClassificationRow::new("test", "both", &evaluate::classify(&score(KeepAgents::Both)?, &test_q, ck.threshold)?)];
    if keep != KeepAgents::Both {
        let name = if keep == KeepAgents::First { "1" } else { "2" };
        rows.push(ClassificationRow::new("test", name, &evaluate::classify(&score(keep)?, &test_q, ck.threshold)?));
    }
    Ok(rows)
}

/// Ranks the true object of every positive test triple.
pub fn evaluate_completion(
    splits: &Splits,
    checkpoint_dir: &Path,
    rollouts: Option<usize>,
    seed: Option<u64>,
) -> Result<(RankingRow, Vec<evaluate::RankedQuery>)> {
    let ck = checkpoint::load(checkpoint_dir)?;
    let loaded = load(splits, Some(&ck))?;
    let seed = seed.unwrap_or(ck.config.seed);
    let positives: Vec<Triple> = loaded.test.iter().filter(|(_, l)| *l != Some(false)).map(|&(t, _)| t).collect();
    let rollouts = rollouts.unwrap_or(ck.config.debate.rollouts_completion);
    let (m, ranked) = evaluate::rank_all(&loaded.kg, &ck.model, &ck.config.debate, &positives, &loaded.known, seed, rollouts)?;
    Ok((RankingRow::new("test", &m), ranked))
}
