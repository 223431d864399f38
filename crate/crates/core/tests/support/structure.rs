//! Structural invariants of debates, and the negative-sampler contract.

use r2d2_core::autodiff::Tape;
use r2d2_core::config::{KeepAgents, ModelConfig};
use r2d2_core::debate::{returns, rewards, Debater};
use r2d2_core::kg::Action;
use r2d2_core::rng::stream;
use r2d2_core::{DebateConfig, EntityId, KnowledgeGraph, Model, Triple};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

/// Random multigraph as TSV text; may contain duplicate rows.
pub fn random_graph_tsv(rng: &mut impl Rng, entities: usize, relations: usize, triples: usize) -> String {
    let mut text = String::new();
    for _ in 0..triples {
        let s = rng.random_range(0..entities);
        let p = rng.random_range(0..relations);
        let o = rng.random_range(0..entities);
        text.push_str(&format!("e{s}\tr{p}\te{o}\n"));
    }
    text
}

fn base_triples(kg: &KnowledgeGraph) -> Vec<Triple> {
    kg.triples().filter(|t| t.predicate.index() < kg.relations().base_count()).copied().collect()
}

fn hop_is_valid(kg: &KnowledgeGraph, query: &Triple, from: EntityId, hop: Action) -> bool {
    let (r, e) = hop;
    let rel = kg.relations();
    let hidden = (from == query.subject && r == query.predicate && e == query.object)
        || (from == query.object && r == rel.inverse(query.predicate) && e == query.subject);
    let exists = (r == rel.no_op() && e == from) || kg.neighbors(from).contains(&hop);
    exists && !hidden
}

/// Runs `cases` random debates on random graphs and checks shape,
/// alternation, path validity, query-edge masking, the self-loop guarantee,
/// reward signs, permutation invariance and subject blindness of the judge.
pub fn structural_suite(cases: usize, seed: u64) -> Result<usize, String> {
    for case in 0..cases {
        let mut rng = stream(seed, &[0x57, case as u64]);
        let (n, r, m) = (rng.random_range(3..12), rng.random_range(1..4), rng.random_range(1..30));
        let kg = KnowledgeGraph::from_tsv(&random_graph_tsv(&mut rng, n, r, m), true).map_err(|e| e.to_string())?;
        let t_len = rng.random_range(1..4);
        let rounds = rng.random_range(1..4);
        let cfg = ModelConfig { dim: 4, path_length: t_len, lstm_layers: 1, judge_layers: 2 };
        let model = Model::new(cfg, kg.num_entities(), kg.num_relations(), case as u64).map_err(|e| e.to_string())?;
        let debate = DebateConfig { rounds, max_out_degree: rng.random_range(1..6), ..DebateConfig::default() };
        let debater = Debater::new(&kg, &model, &debate);
        let fail = |m: String| Err(format!("case {case}: {m}"));

        for e in 0..kg.num_entities() {
            let e = EntityId(e as u32);
            let actions = kg.actions_from(e, debate.max_out_degree, &mut rng);
            if actions[0] != (kg.relations().no_op(), e) || actions.len() > debate.max_out_degree.max(1) {
                return fail(format!("action list of {e:?}: {actions:?}"));
            }
        }

        let triples = base_triples(&kg);
        let query = *triples.choose(&mut rng).expect("nonempty graph");
        let t = debater.run(&query, rng.random()).map_err(|e| e.to_string())?;
        if t.arguments.len() != 2 * rounds || t.argument_scores.len() != 2 * rounds {
            return fail(format!("{} arguments for {rounds} rounds", t.arguments.len()));
        }
        for (i, a) in t.arguments.iter().enumerate() {
            if a.agent != 1 + i % 2 || a.round != 1 + i / 2 || a.actions.len() != t_len {
                return fail(format!("argument {i}: agent {} round {} len {}", a.agent, a.round, a.actions.len()));
            }
            let mut at = query.subject;
            for &hop in &a.actions {
                if !hop_is_valid(&kg, &query, at, hop) {
                    return fail(format!("argument {i}: invalid hop {hop:?} from {at:?}"));
                }
                at = hop.1;
            }
        }

        let r = rewards(&t, false);
        for (i, a) in t.arguments.iter().enumerate() {
            let want = if a.agent == 1 { t.argument_scores[i] } else { -t.argument_scores[i] };
            if r[i].to_bits() != want.to_bits() {
                return fail(format!("reward {i}: {} vs {want}", r[i]));
            }
        }
        let g = returns(&t, false);
        let g1: f64 = (0..r.len()).step_by(2).map(|i| r[i]).sum();
        let g2: f64 = (1..r.len()).step_by(2).map(|i| r[i]).sum();
        if g != [g1, g2] {
            return fail(format!("returns {g:?}"));
        }

        let mut tape = Tape::new(&model.params);
        let judge = model.judge.bind(&mut tape);
        let mut ys: Vec<_> = t
            .arguments
            .iter()
            .map(|a| judge.argument_representation(&mut tape, &a.actions, &query))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let s1 = judge.classify(&mut tape, &ys).map_err(|e| e.to_string())?;
        ys.shuffle(&mut rng);
        let s2 = judge.classify(&mut tape, &ys).map_err(|e| e.to_string())?;
        if tape.scalar(s1).to_bits() != tape.scalar(s2).to_bits() || tape.scalar(s1).to_bits() != t.score.to_bits() {
            return fail(format!("permuted score {} vs {} (debate {})", tape.scalar(s1), tape.scalar(s2), t.score));
        }

        let mut moved = t.clone();
        moved.query.subject = EntityId(rng.random_range(0..kg.num_entities()) as u32);
        let rejudged = debater.judge_only(&moved, KeepAgents::Both).map_err(|e| e.to_string())?;
        if rejudged.score.to_bits() != t.score.to_bits() || rejudged.argument_scores != t.argument_scores {
            return fail("judge depends on the query subject".into());
        }
    }
    Ok(cases)
}

/// Draws corruptions of random triples of random 50-triple graphs; returns
/// the number of contract violations. A failed draw is a violation unless
/// no candidate exists.
pub fn sampler_violations(draws: usize, seed: u64) -> usize {
    let mut violations = 0;
    let mut rng = stream(seed, &[0x5a]);
    let mut graphs = 0;
    let mut kg = None;
    for d in 0..draws {
        if d % 20 == 0 {
            let (n, r) = (rng.random_range(5..30), rng.random_range(1..6));
            let tsv = random_graph_tsv(&mut rng, n, r, 50);
            kg = Some(KnowledgeGraph::from_tsv(&tsv, true).unwrap());
            graphs += 1;
        }
        let kg = kg.as_ref().unwrap();
        let triples = base_triples(kg);
        let t = *triples.choose(&mut rng).unwrap();
        match kg.corrupt(t, &mut rng) {
            Ok(n) => {
                let ok = n.subject == t.subject
                    && n.predicate == t.predicate
                    && !kg.contains(&n)
                    && kg.objects_of(t.predicate).contains(&n.object);
                violations += usize::from(!ok);
            }
            Err(_) => {
                let any = kg
                    .objects_of(t.predicate)
                    .iter()
                    .any(|&o| !kg.contains(&Triple::new(t.subject, t.predicate, o)));
                violations += usize::from(any);
            }
        }
    }
    debug_assert!(graphs >= draws / 20);
    violations
}
