//! Central finite differences against reverse-mode gradients.

use r2d2_core::autodiff::{NodeId, ParamId, ParamStore, Tape};
use r2d2_core::config::{JudgeLoss, ModelConfig};
use r2d2_core::judge::{judge_loss, PenaltyScope};
use r2d2_core::kg::Action;
use r2d2_core::rng::stream;
use r2d2_core::tensor::Tensor;
use r2d2_core::trainer::{reinforce_loss, Episode};
use r2d2_core::{KnowledgeGraph, Model};
use rand::Rng;

pub const EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub coordinates: usize,
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares the gradient of `f` with central differences over every
/// coordinate of every parameter in `store`.
pub fn check(name: &'static str, store: &ParamStore, f: impl Fn(&mut Tape<'_>) -> NodeId) -> Check {
    let mut tape = Tape::new(store);
    let loss = f(&mut tape);
    let grads = tape.backward(loss).expect("backward");
    let eval = |s: &ParamStore| {
        let mut t = Tape::new(s);
        let l = f(&mut t);
        t.scalar(l)
    };
    let mut worst = 0.0f64;
    let mut coordinates = 0;
    let mut probe = store.clone();
    for id in store.ids() {
        let analytic = grads.dense(id, store);
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + EPS;
            let plus = eval(&probe);
            probe.get_mut(id).data_mut()[i] = orig - EPS;
            let minus = eval(&probe);
            probe.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * EPS);
            worst = worst.max(rel_error(analytic[i], numeric));
            coordinates += 1;
        }
    }
    Check { name, max_rel_error: worst, coordinates }
}

fn uniform(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect())
}

/// Values in `[0.1, 1)` with a random sign, keeping ReLU inputs off the kink.
fn off_zero(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let v = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Tensor::from_vec(shape, v)
}

/// Projects a node onto fixed random weights so every output coordinate
/// contributes to the scalar.
fn project(tape: &mut Tape<'_>, out: NodeId, seed: u64) -> NodeId {
    let n = tape.value(out).len();
    let mut rng = stream(seed, &[0x9f0]);
    let r = tape.constant(uniform(&mut rng, &[n], -1.0, 1.0));
    let flat = tape.reshape(out, &[n]).unwrap();
    tape.dot(flat, r).unwrap()
}

struct Fixture {
    store: ParamStore,
    a: ParamId,
    b: ParamId,
    m: ParamId,
    k: ParamId,
    e: ParamId,
    pos: ParamId,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = stream(seed, &[0x6c]);
    let mut store = ParamStore::new();
    let a = store.add("a", off_zero(&mut rng, &[6]));
    let b = store.add("b", off_zero(&mut rng, &[6]));
    let m = store.add("m", uniform(&mut rng, &[4, 6], -1.0, 1.0));
    let k = store.add("k", uniform(&mut rng, &[6, 3], -1.0, 1.0));
    let e = store.add("e", uniform(&mut rng, &[5, 6], -1.0, 1.0));
    let pos = store.add("pos", uniform(&mut rng, &[6], 0.2, 2.0));
    Fixture { store, a, b, m, k, e, pos }
}

/// One check per tape primitive.
pub fn primitives(seed: u64) -> Vec<Check> {
    let f = fixture(seed);
    let (a, b, m, k, e, pos) = (f.a, f.b, f.m, f.k, f.e, f.pos);
    let s = &f.store;
    let mut out = Vec::new();
    macro_rules! case {
        ($name:expr, |$t:ident| $body:expr) => {
            out.push(check($name, s, |$t: &mut Tape<'_>| {
                let o = $body;
                project($t, o, 1)
            }));
        };
    }
    case!("param", |t| t.param(a));
    case!("gather", |t| t.gather(m, &[2, 0, 2]).unwrap());
    case!("embed_pairs", |t| t.embed_pairs(m, e, &[(1, 4), (3, 0), (1, 1)]).unwrap());
    case!("matmul_vector", |t| {
        let (x, y) = (t.param(m), t.param(a));
        t.matmul(x, y).unwrap()
    });
    case!("matmul_matrix", |t| {
        let (x, y) = (t.param(m), t.param(k));
        t.matmul(x, y).unwrap()
    });
    case!("add", |t| {
        let (x, y) = (t.param(a), t.param(b));
        t.add(x, y).unwrap()
    });
    case!("sub", |t| {
        let (x, y) = (t.param(a), t.param(b));
        t.sub(x, y).unwrap()
    });
    case!("mul", |t| {
        let (x, y) = (t.param(a), t.param(b));
        t.mul(x, y).unwrap()
    });
    case!("mul_shared_operand", |t| {
        let x = t.param(a);
        t.mul(x, x).unwrap()
    });
    case!("scale", |t| {
        let x = t.param(a);
        t.scale(x, -2.5).unwrap()
    });
    case!("relu", |t| {
        let x = t.param(a);
        t.relu(x).unwrap()
    });
    case!("tanh", |t| {
        let x = t.param(a);
        t.tanh(x).unwrap()
    });
    case!("sigmoid", |t| {
        let x = t.param(a);
        t.sigmoid(x).unwrap()
    });
    case!("log", |t| {
        let x = t.param(pos);
        t.log(x).unwrap()
    });
    case!("concat", |t| {
        let (x, y) = (t.param(a), t.param(b));
        t.concat(&[x, y, x]).unwrap()
    });
    case!("slice", |t| {
        let x = t.param(m);
        let flat = t.reshape(x, &[24]).unwrap();
        t.slice(flat, 5, 7).unwrap()
    });
    case!("reshape", |t| {
        let x = t.param(m);
        t.reshape(x, &[6, 4]).unwrap()
    });
    case!("softmax", |t| {
        let x = t.param(a);
        t.softmax(x).unwrap()
    });
    case!("masked_softmax", |t| {
        let x = t.param(a);
        t.masked_softmax(x, Some(&[true, false, true, true, false, true])).unwrap()
    });
    case!("sum", |t| {
        let x = t.param(m);
        t.sum(x).unwrap()
    });
    case!("dot", |t| {
        let (x, y) = (t.param(a), t.param(b));
        t.dot(x, y).unwrap()
    });
    case!("pick", |t| {
        let x = t.param(a);
        t.pick(x, 4).unwrap()
    });
    case!("entropy", |t| {
        let x = t.param(pos);
        t.entropy(x).unwrap()
    });
    case!("entropy_of_softmax", |t| {
        let x = t.param(a);
        let p = t.softmax(x).unwrap();
        t.entropy(p).unwrap()
    });
    out.push(lstm(seed));
    out
}

fn lstm(seed: u64) -> Check {
    let mut rng = stream(seed, &[0x157]);
    let (n, m) = (3, 2);
    let mut s = ParamStore::new();
    let x = s.add("x", uniform(&mut rng, &[n], -1.0, 1.0));
    let h = s.add("h", uniform(&mut rng, &[m], -1.0, 1.0));
    let c = s.add("c", uniform(&mut rng, &[m], -1.0, 1.0));
    let w = s.add("w", uniform(&mut rng, &[4 * m, n + m], -1.0, 1.0));
    let b = s.add("b", uniform(&mut rng, &[4 * m], -1.0, 1.0));
    check("lstm_cell", &s, |t| {
        let ids = [x, h, c, w, b].map(|p| t.param(p));
        // two chained steps so the recurrent paths are exercised
        let o1 = t.lstm_cell(ids[0], ids[1], ids[2], ids[3], ids[4]).unwrap();
        let h1 = t.slice(o1, 0, m).unwrap();
        let c1 = t.slice(o1, m, m).unwrap();
        let o2 = t.lstm_cell(ids[0], h1, c1, ids[3], ids[4]).unwrap();
        project(t, o2, 2)
    })
}

/// A small graph and model for the composed passes.
pub fn toy_model(seed: u64, dim: usize) -> (KnowledgeGraph, Model) {
    let kg = KnowledgeGraph::from_tsv("a\tr\tb\nb\ts\tc\na\ts\td\nd\tr\tc\nc\tr\ta\n", true).unwrap();
    let cfg = ModelConfig { dim, path_length: 2, lstm_layers: 2, judge_layers: 2 };
    let mut model = Model::new(cfg, kg.num_entities(), kg.num_relations(), seed).unwrap();
    // nonzero biases so their gradients are exercised
    let mut rng = stream(seed, &[0xb1a5]);
    for id in model.params.ids().collect::<Vec<_>>() {
        if model.params.name(id).ends_with("/b") {
            for v in model.params.get_mut(id).data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }
    (kg, model)
}

/// Summed log-probability and entropy of a fixed argument for `agent`.
fn argument_terms(t: &mut Tape<'_>, kg: &KnowledgeGraph, model: &Model, agent: usize, path: &[usize]) -> (NodeId, NodeId) {
    let q = kg.resolve("a", "r", "c").unwrap_or_else(|_| kg.resolve("a", "r", "b").unwrap());
    let bound = model.agent(agent).bind(t);
    let mut state = bound.start(t, &q).unwrap();
    let mut prev: Option<Action> = None;
    let mut rng = stream(0, &[]);
    let (mut lps, mut hs) = (Vec::new(), Vec::new());
    for &choice in path {
        let h = bound.encode_step(t, &mut state, prev).unwrap();
        let actions = kg.actions_from(state.position, 400, &mut rng);
        let probs = bound.action_distribution(t, h, &actions).unwrap();
        let k = choice % actions.len();
        let p = t.pick(probs, k).unwrap();
        lps.push(t.log(p).unwrap());
        hs.push(t.entropy(probs).unwrap());
        prev = Some(actions[k]);
        state.position = actions[k].1;
    }
    let lp = t.concat(&lps).unwrap();
    let h = t.concat(&hs).unwrap();
    (t.sum(lp).unwrap(), t.sum(h).unwrap())
}

fn fixed_arguments(kg: &KnowledgeGraph) -> Vec<Vec<Action>> {
    let r = kg.relation("r").unwrap();
    let s = kg.relation("s").unwrap();
    let e = |n: &str| kg.entity(n).unwrap();
    vec![
        vec![(r, e("b")), (s, e("c"))],
        vec![(s, e("d")), (r, e("c"))],
        vec![(kg.relations().no_op(), e("a")), (r, e("b"))],
        vec![(kg.relations().inverse(r), e("c")), (r, e("a"))],
    ]
}

/// Agent argument log-probability, judge classification loss and the
/// REINFORCE surrogate, each checked end to end.
pub fn composed(seed: u64) -> Vec<Check> {
    let (kg, model) = toy_model(seed, 3);
    let store = &model.params;
    let mut out = Vec::new();
    out.push(check("agent_argument", store, |t| {
        let (lp, h) = argument_terms(t, &kg, &model, 1, &[1, 2]);
        let h = t.scale(h, 0.3).unwrap();
        t.add(lp, h).unwrap()
    }));
    out.push(check("judge_loss", store, |t| {
        let q = kg.resolve("a", "r", "b").unwrap();
        let judge = model.judge.bind(t);
        let ys: Vec<NodeId> =
            fixed_arguments(&kg).iter().map(|a| judge.argument_representation(t, a, &q).unwrap()).collect();
        let score = judge.classify(t, &ys).unwrap();
        let single = judge.classify(t, &ys[..1]).unwrap();
        judge_loss(t, &model.judge, &[(score, true), (single, false)], 0.01, PenaltyScope::All, JudgeLoss::CrossEntropy)
            .unwrap()
    }));
    out.push(check("argument_score", store, |t| {
        let q = kg.resolve("a", "r", "b").unwrap();
        let judge = model.judge.bind(t);
        let y = judge.argument_representation(t, &fixed_arguments(&kg)[1], &q).unwrap();
        judge.score_argument(t, y).unwrap()
    }));
    out.push(check("reinforce_surrogate", store, |t| {
        let (lp1, h1) = argument_terms(t, &kg, &model, 1, &[1, 2]);
        let (lp2, h2) = argument_terms(t, &kg, &model, 2, &[0, 3]);
        let episodes = [
            Episode { log_prob: lp1, entropy: h1, advantage: 0.7 },
            Episode { log_prob: lp2, entropy: h2, advantage: -1.3 },
        ];
        reinforce_loss(t, &episodes, 0.1, 2).unwrap()
    }));
    out
}
