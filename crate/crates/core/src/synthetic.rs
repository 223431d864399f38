//! Rule-generated graph with a known explanation for every positive query.
//!
//! `compose(a, c)` holds exactly when `first(a, b)` and `second(b, c)`; each
//! `a` has one `first` edge and each `b` one `second` edge, so every `a` has a
//! single true `compose` object. Distractor relations add alternative 2-hop
//! paths from `a` into the `c` block.
//!
//! Only a background share of `compose` facts is stored in the graph. Train,
//! validation and test queries are all held out, so a training negative
//! `(a, compose, c')` never sits next to a visible true edge `(a, compose, c)`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kg::{Action, GraphBuilder, KnowledgeGraph, Triple};
use crate::rng::stream;

pub const FIRST: &str = "first";
pub const SECOND: &str = "second";
pub const COMPOSE: &str = "compose";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub sources: usize,
    pub bridges: usize,
    pub targets: usize,
    pub distractors: usize,
    /// `compose` facts stored in the graph.
    pub background: usize,
    /// Held-out `compose` triples for validation and for test; the remaining
    /// sources become training queries.
    pub valid: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            sources: 155,
            bridges: 10,
            targets: 5,
            distractors: 30,
            background: 25,
            valid: 24,
            test: 24,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticKg {
    pub graph: KnowledgeGraph,
    /// Held-out `compose` triples for training queries.
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    /// Every true `compose` triple.
    pub truth: BTreeSet<Triple>,
    /// Surface-form rows of the graph, in insertion order.
    pub rows: Vec<[String; 3]>,
}

impl SyntheticKg {
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        let c = config;
        let held_out = c.background + c.valid + c.test;
        if c.sources <= held_out || c.background == 0 || c.bridges == 0 || c.targets < 2 || c.distractors == 0 {
            return Err(Error::Config(format!("synthetic sizes too small: {c:?}")));
        }
        let mut rng = stream(c.seed, &[0x5e7]);
        let name = |prefix: &str, i: usize| format!("{prefix}{i}");
        let mut rows: Vec<[String; 3]> = Vec::new();
        let mut edge = |s: String, p: &str, o: String| rows.push([s, p.into(), o]);

        let bridge_of: Vec<usize> = (0..c.sources).map(|_| rng.random_range(0..c.bridges)).collect();
        // every target is reachable when there are enough bridges
        let mut target_of: Vec<usize> = (0..c.bridges).map(|b| b % c.targets).collect();
        target_of.shuffle(&mut rng);
        for (a, &b) in bridge_of.iter().enumerate() {
            edge(name("a", a), FIRST, name("b", b));
        }
        for (b, &t) in target_of.iter().enumerate() {
            edge(name("b", b), SECOND, name("c", t));
        }
        for a in 0..c.sources {
            edge(name("a", a), "near", name("x", rng.random_range(0..c.distractors)));
        }
        for x in 0..c.distractors {
            edge(name("x", x), "points", name("c", rng.random_range(0..c.targets)));
        }
        for b in 0..c.bridges {
            edge(name("b", b), "near", name("x", rng.random_range(0..c.distractors)));
        }

        let mut order: Vec<usize> = (0..c.sources).collect();
        order.shuffle(&mut rng);
        let compose = |a: usize| [name("a", a), COMPOSE.into(), name("c", target_of[bridge_of[a]])];
        let (valid_src, rest) = order.split_at(c.valid);
        let (test_src, rest) = rest.split_at(c.test);
        let (background_src, train_src) = rest.split_at(c.background);

        let mut builder = GraphBuilder::new();
        for r in &rows {
            builder.add_edge(&r[0], &r[1], &r[2]);
        }
        for &a in background_src {
            let [s, p, o] = compose(a);
            builder.add_edge(&s, &p, &o);
            rows.push([s, p, o]);
        }
        for &a in train_src.iter().chain(valid_src).chain(test_src) {
            let [s, p, o] = compose(a);
            builder.register(&s, &p, &o);
        }
        let graph = builder.build(true);
        let resolve = |srcs: &[usize]| -> Result<Vec<Triple>> {
            srcs.iter()
                .map(|&a| {
                    let [s, p, o] = compose(a);
                    graph.resolve(&s, &p, &o)
                })
                .collect()
        };
        let train = resolve(train_src)?;
        let valid = resolve(valid_src)?;
        let test = resolve(test_src)?;
        let background = resolve(background_src)?;
        let truth = background.iter().chain(&train).chain(&valid).chain(&test).copied().collect();
        Ok(Self { graph, train, valid, test, truth, rows })
    }

    /// The generating 2-hop path `first` then `second` for a true triple.
    pub fn ground_truth_path(&self, query: &Triple) -> Option<[Action; 2]> {
        let g = &self.graph;
        let first = g.relation(FIRST).ok()?;
        let second = g.relation(SECOND).ok()?;
        let b = g.objects_for(query.subject, first).next()?;
        let c = g.objects_for(b, second).next()?;
        (c == query.object).then_some([(first, b), (second, c)])
    }

    /// Graph as TAB-separated text.
    pub fn graph_tsv(&self) -> String {
        tsv(self.rows.iter().map(|r| [r[0].as_str(), r[1].as_str(), r[2].as_str()]))
    }

    pub fn split_tsv(&self, triples: &[Triple]) -> String {
        let g = &self.graph;
        tsv(triples
            .iter()
            .map(|t| [g.entity_name(t.subject), g.relation_name(t.predicate), g.entity_name(t.object)]))
    }
}

fn tsv<'a>(rows: impl Iterator<Item = [&'a str; 3]>) -> String {
    let mut out = String::new();
    for [s, p, o] in rows {
        out.push_str(&format!("{s}\t{p}\t{o}\n"));
    }
    out
}
