//! Alternating debates: `N` rounds, agent 1 then agent 2, each walking `T`
//! hops from the query subject; the judge aggregates every argument.

use alloc::vec::Vec;

use crate::agent::{sample_action, AgentState, BoundAgent};
use crate::autodiff::{NodeId, Tape};
use crate::config::{DebateConfig, KeepAgents, SamplingMode};
use crate::error::{Error, Result};
use crate::judge::BoundJudge;
use crate::kg::{Action, KnowledgeGraph, Triple};
use crate::model::Model;
use crate::rng::{derive, stream, triple_key};
use crate::tensor::sigmoid;

/// One agent's path of `T` actions starting at the query subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Argument {
    /// 1 argues the query is true, 2 that it is false.
    pub agent: usize,
    /// 1-based round.
    pub round: usize,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub query: Triple,
    /// Ordered agent 1, agent 2, agent 1, ...
    pub arguments: Vec<Argument>,
    /// Raw judge score of each argument on its own.
    pub argument_scores: Vec<f64>,
    /// Judge classification of the whole debate, in (0, 1).
    pub score: f64,
    pub seed: u64,
}

impl Transcript {
    pub fn rounds(&self) -> usize {
        self.arguments.len() / 2
    }

    /// All actions in debate order; the `k`-th action of agent `i` in round
    /// `n` sits at `(2(n-1) + i - 1) T + k` (1-based `k`).
    pub fn flat_actions(&self) -> Vec<Action> {
        self.arguments.iter().flat_map(|a| a.actions.iter().copied()).collect()
    }
}

/// Tape handles for one debate, used by training.
#[derive(Debug, Clone)]
pub struct DebateTrace {
    pub transcript: Transcript,
    /// Per argument: summed log-probability of the sampled actions.
    pub log_probs: Vec<Option<NodeId>>,
    /// Per argument: summed entropy of the step distributions.
    pub entropies: Vec<Option<NodeId>>,
    pub representations: Vec<NodeId>,
    pub argument_scores: Vec<NodeId>,
    pub score: NodeId,
}

/// Per-argument reward: `+t` for agent 1, `-t` for agent 2.
pub fn rewards(transcript: &Transcript, squash: bool) -> Vec<f64> {
    transcript
        .arguments
        .iter()
        .zip(&transcript.argument_scores)
        .map(|(a, &t)| {
            let t = if squash { sigmoid(t) } else { t };
            if a.agent == 1 {
                t
            } else {
                -t
            }
        })
        .collect()
}

/// Cumulative reward `G` of agents 1 and 2.
pub fn returns(transcript: &Transcript, squash: bool) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (a, r) in transcript.arguments.iter().zip(rewards(transcript, squash)) {
        g[a.agent - 1] += r;
    }
    g
}

/// Seed of rollout `k` for `query`. Greedy rollouts share one seed so they
/// are identical.
pub fn rollout_seed(seed: u64, query: &Triple, k: usize, mode: SamplingMode) -> u64 {
    let k = if mode == SamplingMode::Greedy { 0 } else { k as u64 };
    derive(seed, &[triple_key(query), k])
}

/// Runs debates for one model over one graph.
#[derive(Debug, Clone, Copy)]
pub struct Debater<'a> {
    pub kg: &'a KnowledgeGraph,
    pub model: &'a Model,
    pub config: &'a DebateConfig,
}

impl<'a> Debater<'a> {
    pub fn new(kg: &'a KnowledgeGraph, model: &'a Model, config: &'a DebateConfig) -> Self {
        Self { kg, model, config }
    }

    fn hidden_edges(&self, query: &Triple, position: crate::kg::EntityId) -> Vec<Action> {
        if !self.config.mask_query_edge {
            return Vec::new();
        }
        let mut out = Vec::new();
        if position == query.subject {
            out.push((query.predicate, query.object));
        }
        if position == query.object {
            out.push((self.kg.relations().inverse(query.predicate), query.subject));
        }
        out
    }

    fn check_query(&self, query: &Triple) -> Result<()> {
        let (ne, nr) = (self.kg.num_entities() as u32, self.kg.num_relations() as u32);
        if query.subject.0 >= ne {
            return Err(Error::UnknownEntity(alloc::format!("#{}", query.subject.0)));
        }
        if query.object.0 >= ne {
            return Err(Error::UnknownEntity(alloc::format!("#{}", query.object.0)));
        }
        if query.predicate.0 >= nr {
            return Err(Error::UnknownRelation(alloc::format!("#{}", query.predicate.0)));
        }
        if self.model.num_entities() != self.kg.num_entities() {
            return Err(Error::Dimension { expected: self.kg.num_entities(), got: self.model.num_entities() });
        }
        if self.model.num_relations() != self.kg.num_relations() {
            return Err(Error::Dimension { expected: self.kg.num_relations(), got: self.model.num_relations() });
        }
        Ok(())
    }

    /// Rolls one argument, recording log-probabilities and entropies.
    fn argue(
        &self,
        tape: &mut Tape<'_>,
        agent: &BoundAgent,
        state: &mut AgentState,
        query: &Triple,
        seed: u64,
        round: usize,
        which: usize,
    ) -> Result<(Argument, NodeId, NodeId)> {
        let mut rng = stream(seed, &[round as u64, which as u64]);
        let t_len = self.model.config.path_length;
        state.position = query.subject;
        if !self.config.carry_history {
            state.cells = agent.zero_cells(tape);
        }
        let mut actions = Vec::with_capacity(t_len);
        let mut log_probs = Vec::with_capacity(t_len);
        let mut entropies = Vec::with_capacity(t_len);
        let mut prev = None;
        for _ in 0..t_len {
            let h = agent.encode_step(tape, state, prev)?;
            let hidden = self.hidden_edges(query, state.position);
            let admissible =
                self.kg
                    .actions_from_excluding(state.position, self.config.max_out_degree, &hidden, &mut rng);
            let d = agent.action_distribution(tape, h, &admissible)?;
            let idx = sample_action(tape.value(d), self.config.mode, &mut rng);
            let p = tape.pick(d, idx)?;
            log_probs.push(tape.log(p)?);
            entropies.push(tape.entropy(d)?);
            let action = admissible[idx];
            actions.push(action);
            prev = Some(action);
            state.position = action.1;
        }
        let lp = tape.concat(&log_probs)?;
        let lp = tape.sum(lp)?;
        let ent = tape.concat(&entropies)?;
        let ent = tape.sum(ent)?;
        Ok((Argument { agent: which, round, actions }, lp, ent))
    }

    /// Records rounds `first..=last` on `tape`, after re-scoring `prior`
    /// arguments, and classifies the whole debate.
    pub fn trace(
        &self,
        tape: &mut Tape<'_>,
        query: &Triple,
        seed: u64,
        prior: &[Argument],
        first: usize,
        last: usize,
        keep: KeepAgents,
    ) -> Result<DebateTrace> {
        self.check_query(query)?;
        let agents = [self.model.agents[0].bind(tape), self.model.agents[1].bind(tape)];
        let judge = self.model.judge.bind(tape);
        let mut states = [agents[0].start(tape, query)?, agents[1].start(tape, query)?];

        let mut arguments: Vec<Argument> = prior.to_vec();
        let mut log_probs = alloc::vec![None; prior.len()];
        let mut entropies = alloc::vec![None; prior.len()];
        for round in first..=last {
            for which in 1..=2 {
                let (arg, lp, ent) =
                    self.argue(tape, &agents[which - 1], &mut states[which - 1], query, seed, round, which)?;
                arguments.push(arg);
                log_probs.push(Some(lp));
                entropies.push(Some(ent));
            }
        }
        self.judge_arguments(tape, &judge, query, seed, arguments, log_probs, entropies, keep)
    }

    #[allow(clippy::too_many_arguments)]
    fn judge_arguments(
        &self,
        tape: &mut Tape<'_>,
        judge: &BoundJudge,
        query: &Triple,
        seed: u64,
        arguments: Vec<Argument>,
        log_probs: Vec<Option<NodeId>>,
        entropies: Vec<Option<NodeId>>,
        keep: KeepAgents,
    ) -> Result<DebateTrace> {
        let mut ys = Vec::with_capacity(arguments.len());
        let mut scores = Vec::with_capacity(arguments.len());
        let mut kept = Vec::with_capacity(arguments.len());
        for arg in &arguments {
            let y = judge.argument_representation(tape, &arg.actions, query)?;
            ys.push(y);
            scores.push(judge.score_argument(tape, y)?);
            if keep.keeps(arg.agent) {
                kept.push(y);
            }
        }
        let score = judge.classify(tape, &kept)?;
        let transcript = Transcript {
            query: *query,
            argument_scores: scores.iter().map(|&s| tape.scalar(s)).collect(),
            score: tape.scalar(score),
            arguments,
            seed,
        };
        Ok(DebateTrace { transcript, log_probs, entropies, representations: ys, argument_scores: scores, score })
    }

    /// One debate of `config.rounds` rounds.
    pub fn run(&self, query: &Triple, seed: u64) -> Result<Transcript> {
        self.run_with(query, seed, self.config.rounds, KeepAgents::Both)
    }

    pub fn run_with(&self, query: &Triple, seed: u64, rounds: usize, keep: KeepAgents) -> Result<Transcript> {
        let mut tape = Tape::new(&self.model.params);
        Ok(self.trace(&mut tape, query, seed, &[], 1, rounds, keep)?.transcript)
    }

    /// Appends `extra` rounds to a finished debate. The result equals a fresh
    /// debate of `rounds + extra` rounds under the same seed.
    pub fn extend(&self, transcript: &Transcript, extra: usize) -> Result<Transcript> {
        let n = transcript.rounds();
        if self.config.carry_history {
            // recurrent state is not stored, replay from the start
            return self.run_with(&transcript.query, transcript.seed, n + extra, KeepAgents::Both);
        }
        let mut tape = Tape::new(&self.model.params);
        let trace = self.trace(
            &mut tape,
            &transcript.query,
            transcript.seed,
            &transcript.arguments,
            n + 1,
            n + extra,
            KeepAgents::Both,
        )?;
        Ok(trace.transcript)
    }

    /// Records the judge's view of fixed arguments on `tape`.
    pub fn rejudge(&self, tape: &mut Tape<'_>, transcript: &Transcript, keep: KeepAgents) -> Result<DebateTrace> {
        let judge = self.model.judge.bind(tape);
        let n = transcript.arguments.len();
        self.judge_arguments(
            tape,
            &judge,
            &transcript.query,
            transcript.seed,
            transcript.arguments.clone(),
            alloc::vec![None; n],
            alloc::vec![None; n],
            keep,
        )
    }

    /// Re-scores fixed arguments, e.g. to drop one side.
    pub fn judge_only(&self, transcript: &Transcript, keep: KeepAgents) -> Result<Transcript> {
        let mut tape = Tape::new(&self.model.params);
        Ok(self.rejudge(&mut tape, transcript, keep)?.transcript)
    }

    /// Mean classification over `rollouts` independent debates.
    pub fn classify_with_rollouts(
        &self,
        query: &Triple,
        seed: u64,
        rollouts: usize,
        keep: KeepAgents,
    ) -> Result<(f64, Vec<Transcript>)> {
        let rollouts = rollouts.max(1);
        let mut transcripts = Vec::with_capacity(rollouts);
        for k in 0..rollouts {
            let s = rollout_seed(seed, query, k, self.config.mode);
            transcripts.push(self.run_with(query, s, self.config.rounds, keep)?);
        }
        let mean = transcripts.iter().map(|t| t.score).sum::<f64>() / rollouts as f64;
        Ok((mean, transcripts))
    }

    /// Full debate with one agent's arguments withheld from the aggregate.
    pub fn ablated_classify(&self, query: &Triple, seed: u64, rollouts: usize, keep: KeepAgents) -> Result<f64> {
        Ok(self.classify_with_rollouts(query, seed, rollouts, keep)?.0)
    }
}
