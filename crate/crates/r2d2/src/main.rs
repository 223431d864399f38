use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use r2d2::checkpoint;
use r2d2::config_file;
use r2d2::core::config::KeepAgents;
use r2d2::core::debate::Debater;
use r2d2::core::synthetic::{SyntheticConfig, SyntheticKg};
use r2d2::core::trainer::PretrainedScope;
use r2d2::core::TrainConfig;
use r2d2::data;
use r2d2::pipeline::{self, Splits};
use r2d2::report;
use r2d2::service::{self, ServiceConfig};

#[derive(Parser)]
#[command(name = "r2d2", version, about = "Knowledge-graph triple classification by debate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SplitArgs {
    /// Graph edges, TAB-separated triples.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
}

impl SplitArgs {
    fn splits(&self) -> Splits {
        Splits { graph: self.graph.clone(), train: self.train.clone(), valid: self.valid.clone(), test: self.test.clone() }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Keep {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

impl From<Keep> for KeepAgents {
    fn from(k: Keep) -> Self {
        match k {
            Keep::One => KeepAgents::First,
            Keep::Two => KeepAgents::Second,
            Keep::Both => KeepAgents::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Agents,
    Judge,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents and judge; writes checkpoint, training log and metrics.
    Train {
        #[command(flatten)]
        splits: SplitArgs,
        /// `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Rollouts per training query.
        #[arg(long)]
        rollouts: Option<usize>,
        /// Pretrained entity vectors, `entity<TAB>v1<TAB>...`.
        #[arg(long)]
        pretrained: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        pretrained_scope: Scope,
        #[arg(long)]
        out: PathBuf,
    },
    /// Triple-classification metrics on the test split.
    EvaluateClassification {
        #[command(flatten)]
        splits: SplitArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rollouts: Option<usize>,
        /// Aggregate only one agent's arguments (reported next to `both`).
        #[arg(long, value_enum, default_value = "both")]
        keep_agent: Keep,
        /// Directory for `metrics.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Object-ranking metrics for the positive test triples.
    EvaluateCompletion {
        #[command(flatten)]
        splits: SplitArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rollouts: Option<usize>,
        /// Directory for `metrics.csv` and `ranking.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one debate and print its transcript.
    Explain {
        subject: String,
        predicate: String,
        object: String,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Also write the transcript as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP debate service.
    Serve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Allowed CORS origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
        #[arg(long, default_value = "verdicts.jsonl")]
        verdict_log: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the rule-generated benchmark graph and splits.
    GenerateSynthetic {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn train_config(path: Option<&Path>, seed: Option<u64>, rollouts: Option<usize>) -> anyhow::Result<TrainConfig> {
    let mut c = match path {
        Some(p) => config_file::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(r) = rollouts {
        c.debate.rollouts_train = r;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { splits, config, seed, rollouts, pretrained, pretrained_scope, out } => {
            if splits.train.is_none() || splits.valid.is_none() {
                bail!("train needs --train and --valid");
            }
            let config = train_config(config.as_deref(), seed, rollouts)?;
            let scope = match pretrained_scope {
                Scope::Agents => PretrainedScope::Agents,
                Scope::Judge => PretrainedScope::Judge,
                Scope::Both => PretrainedScope::Both,
            };
            let report = pipeline::train(&splits.splits(), config, pretrained.as_deref().map(|p| (p, scope)), &out)?;
            println!("best epoch {} threshold {:.6}", report.outcome.best_epoch, report.threshold);
            print!("{}", report::classification_table(&report.metrics));
        }
        Command::EvaluateClassification { splits, checkpoint, seed, rollouts, keep_agent, out } => {
            if splits.test.is_none() {
                bail!("evaluate-classification needs --test");
            }
            let rows = pipeline::evaluate_classification(&splits.splits(), &checkpoint, rollouts, keep_agent.into(), seed)?;
            print!("{}", report::classification_table(&rows));
            if let [both, ablated] = rows.as_slice() {
                println!(
                    "positive-rate delta (keep {} vs both): {:+.4}",
                    ablated.keep_agent,
                    ablated.positive_rate - both.positive_rate
                );
            }
            if let Some(out) = out {
                report::write_csv(&out.join(pipeline::METRICS), &rows)?;
            }
        }
        Command::EvaluateCompletion { splits, checkpoint, seed, rollouts, out } => {
            if splits.test.is_none() {
                bail!("evaluate-completion needs --test");
            }
            let (row, ranked) = pipeline::evaluate_completion(&splits.splits(), &checkpoint, rollouts, seed)?;
            print!("{}", report::ranking_table(std::slice::from_ref(&row)));
            if let Some(out) = out {
                report::write_csv(&out.join(pipeline::METRICS), &[row])?;
                data::write_text(&out.join(pipeline::RANKING), &serde_json::to_string_pretty(&ranked)?)?;
            }
        }
        Command::Explain { subject, predicate, object, graph, checkpoint, seed, rounds, out } => {
            let ck = checkpoint::load(&checkpoint)?;
            let kg = ck.graph(&data::read_rows(&graph)?)?;
            let query = kg.resolve(&subject, &predicate, &object)?;
            let debater = Debater::new(&kg, &ck.model, &ck.config.debate);
            let rounds = rounds.unwrap_or(ck.config.debate.rounds);
            let t = debater.run_with(&query, seed.unwrap_or(ck.config.seed), rounds, KeepAgents::Both)?;
            let view = report::transcript_view(&kg, &t);
            print!("{}", report::render_transcript(&view, ck.threshold));
            if let Some(out) = out {
                data::write_text(&out, &serde_json::to_string_pretty(&view)?)?;
            }
        }
        Command::Serve { graph, checkpoint, bind, cors_origin, verdict_log, seed } => {
            let ck = checkpoint::load(&checkpoint)?;
            let kg = ck.graph(&data::read_rows(&graph)?).context("graph does not match the checkpoint")?;
            let mut config = ServiceConfig::from_checkpoint(&ck, verdict_log);
            config.allow_origin = cors_origin;
            if let Some(s) = seed {
                config.seed = s;
            }
            let app = service::router(Arc::new(kg), Arc::new(ck.model), config);
            tokio::runtime::Runtime::new()?.block_on(service::serve(&bind, app))?;
        }
        Command::GenerateSynthetic { seed, out } => {
            let s = SyntheticKg::generate(&SyntheticConfig { seed, ..SyntheticConfig::default() })?;
            data::write_text(&out.join("graph.tsv"), &s.graph_tsv())?;
            data::write_text(&out.join("train.tsv"), &s.split_tsv(&s.train))?;
            data::write_text(&out.join("valid.tsv"), &s.split_tsv(&s.valid))?;
            data::write_text(&out.join("test.tsv"), &s.split_tsv(&s.test))?;
            println!("{} entities, {} graph rows", s.graph.num_entities(), s.rows.len());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
