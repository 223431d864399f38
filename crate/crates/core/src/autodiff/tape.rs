use alloc::vec;
use alloc::vec::Vec;

use super::{AutodiffError, Gradients, ParamId, ParamStore};
use crate::tensor::{sigmoid, Tensor};

type Result<T> = core::result::Result<T, AutodiffError>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    /// Concatenated rows of an embedding table.
    Gather { param: ParamId, rows: Vec<usize> },
    /// One `[relation; entity]` row per pair.
    EmbedPairs { rel: ParamId, ent: ParamId, pairs: Vec<(usize, usize)> },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>),
    Slice { src: NodeId, start: usize },
    Reshape(NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Log(NodeId),
    Softmax(NodeId),
    Sum(NodeId),
    Pick { src: NodeId, index: usize },
    Entropy(NodeId),
    Lstm(LstmSaved),
}

#[derive(Debug, Clone)]
struct LstmSaved {
    x: NodeId,
    h: NodeId,
    c: NodeId,
    w: NodeId,
    b: NodeId,
    /// Activated gates laid out as `[i, f, o, g]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    /// Empty for parameter leaves; their values are read from the store.
    value: Vec<f64>,
}

/// Record of primitive applications in topological order.
///
/// Parameters are borrowed from the store, so a tape must be dropped before
/// the optimizer writes to it.
#[derive(Debug)]
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    check_finite: bool,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::new(), check_finite: cfg!(debug_assertions) }
    }

    /// Enables or disables the non-finite value check after every op.
    pub fn with_finite_check(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        let node = &self.nodes[id.0];
        match node.op {
            Op::Param(p) => self.params.get(p).data(),
            _ => &node.value,
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[0]
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, name: &'static str) -> Result<NodeId> {
        debug_assert_eq!(numel(&shape), value.len());
        if self.check_finite && !value.iter().all(|v| v.is_finite()) {
            return Err(AutodiffError::NonFinite { op: name });
        }
        self.nodes.push(Node { op, shape, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn mismatch(&self, op: &'static str, a: NodeId, b: NodeId) -> AutodiffError {
        AutodiffError::ShapeMismatch { op, lhs: self.shape(a).to_vec(), rhs: self.shape(b).to_vec() }
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let shape = t.shape().to_vec();
        self.nodes.push(Node { op: Op::Constant, shape, value: t.into_data() });
        NodeId(self.nodes.len() - 1)
    }

    pub fn zeros(&mut self, n: usize) -> NodeId {
        self.constant(Tensor::zeros(&[n]))
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let shape = self.params.get(id).shape().to_vec();
        self.nodes.push(Node { op: Op::Param(id), shape, value: Vec::new() });
        NodeId(self.nodes.len() - 1)
    }

    /// Rows of a 2-D parameter, concatenated into one vector.
    pub fn gather(&mut self, param: ParamId, rows: &[usize]) -> Result<NodeId> {
        let table = self.params.get(param);
        let (n, d) = (table.rows(), table.cols());
        let mut value = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            if r >= n {
                return Err(AutodiffError::OutOfRange { op: "gather", index: r, len: n });
            }
            value.extend_from_slice(table.row(r));
        }
        let op = Op::Gather { param, rows: rows.to_vec() };
        self.push(op, vec![rows.len() * d], value, "gather")
    }

    /// Matrix with one row `[rel[r]; ent[e]]` per `(r, e)` pair.
    pub fn embed_pairs(&mut self, rel: ParamId, ent: ParamId, pairs: &[(usize, usize)]) -> Result<NodeId> {
        let rt = self.params.get(rel);
        let et = self.params.get(ent);
        let d = rt.cols();
        if et.cols() != d {
            return Err(AutodiffError::ShapeMismatch {
                op: "embed_pairs",
                lhs: rt.shape().to_vec(),
                rhs: et.shape().to_vec(),
            });
        }
        let mut value = Vec::with_capacity(pairs.len() * 2 * d);
        for &(r, e) in pairs {
            if r >= rt.rows() {
                return Err(AutodiffError::OutOfRange { op: "embed_pairs", index: r, len: rt.rows() });
            }
            if e >= et.rows() {
                return Err(AutodiffError::OutOfRange { op: "embed_pairs", index: e, len: et.rows() });
            }
            value.extend_from_slice(rt.row(r));
            value.extend_from_slice(et.row(e));
        }
        let op = Op::EmbedPairs { rel, ent, pairs: pairs.to_vec() };
        self.push(op, vec![pairs.len(), 2 * d], value, "embed_pairs")
    }

    /// `[m, k] x [k]` or `[m, k] x [k, n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa.len() != 2 || sb.is_empty() || sb.len() > 2 || sa[1] != sb[0] {
            return Err(self.mismatch("matmul", a, b));
        }
        let (m, k) = (sa[0], sa[1]);
        let n = if sb.len() == 2 { sb[1] } else { 1 };
        let out_shape = if sb.len() == 2 { vec![m, n] } else { vec![m] };
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &av[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (l, &x) in arow.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[l * n..(l + 1) * n];
                for (o, &y) in orow.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        self.push(Op::MatMul(a, b), out_shape, out, "matmul")
    }

    fn zip_with(&mut self, a: NodeId, b: NodeId, op: Op, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch(name, a, b));
        }
        let value = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        self.push(op, shape, value, name)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    fn map(&mut self, a: NodeId, op: Op, name: &'static str, f: impl Fn(f64) -> f64) -> Result<NodeId> {
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(op, shape, value, name)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.map(a, Op::Scale(a, factor), "scale", |x| x * factor)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.map(a, Op::Relu(a), "relu", |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.map(a, Op::Tanh(a), "tanh", libm::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.map(a, Op::Sigmoid(a), "sigmoid", sigmoid)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.map(a, Op::Log(a), "log", libm::log)
    }

    /// Flat concatenation.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut value = Vec::new();
        for &p in parts {
            value.extend_from_slice(self.value(p));
        }
        let n = value.len();
        self.push(Op::Concat(parts.to_vec()), vec![n], value, "concat")
    }

    pub fn slice(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let total = self.value(src).len();
        if start + len > total {
            return Err(AutodiffError::OutOfRange { op: "slice", index: start + len, len: total });
        }
        let value = self.value(src)[start..start + len].to_vec();
        self.push(Op::Slice { src, start }, vec![len], value, "slice")
    }

    pub fn reshape(&mut self, src: NodeId, shape: &[usize]) -> Result<NodeId> {
        if numel(shape) != numel(self.shape(src)) {
            return Err(AutodiffError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(src).to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let value = self.value(src).to_vec();
        self.push(Op::Reshape(src), shape.to_vec(), value, "reshape")
    }

    pub fn softmax(&mut self, logits: NodeId) -> Result<NodeId> {
        self.masked_softmax(logits, None)
    }

    /// Softmax over the positions admitted by `mask`; the rest get exactly 0.
    pub fn masked_softmax(&mut self, logits: NodeId, mask: Option<&[bool]>) -> Result<NodeId> {
        let x = self.value(logits);
        if let Some(m) = mask {
            if m.len() != x.len() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "softmax",
                    lhs: self.shape(logits).to_vec(),
                    rhs: vec![m.len()],
                });
            }
        }
        let admitted = |i: usize| mask.is_none_or(|m| m[i]);
        let max = (0..x.len())
            .filter(|&i| admitted(i))
            .map(|i| x[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(AutodiffError::EmptySupport);
        }
        let mut value: Vec<f64> = (0..x.len())
            .map(|i| if admitted(i) { libm::exp(x[i] - max) } else { 0.0 })
            .collect();
        let z: f64 = value.iter().sum();
        value.iter_mut().for_each(|v| *v /= z);
        let shape = self.shape(logits).to_vec();
        self.push(Op::Softmax(logits), shape, value, "softmax")
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).iter().sum();
        self.push(Op::Sum(a), vec![1], vec![s], "sum")
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let m = self.mul(a, b)?;
        self.sum(m)
    }

    pub fn pick(&mut self, src: NodeId, index: usize) -> Result<NodeId> {
        let len = self.value(src).len();
        if index >= len {
            return Err(AutodiffError::OutOfRange { op: "pick", index, len });
        }
        let v = self.value(src)[index];
        self.push(Op::Pick { src, index }, vec![1], vec![v], "pick")
    }

    /// Shannon entropy `-sum p ln p` of a probability vector (0 ln 0 = 0).
    pub fn entropy(&mut self, p: NodeId) -> Result<NodeId> {
        let h = -self
            .value(p)
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * libm::log(v))
            .sum::<f64>();
        self.push(Op::Entropy(p), vec![1], vec![h], "entropy")
    }

    /// Standard four-gate LSTM cell.
    ///
    /// `w` is `[4m, n + m]` acting on `[x; h]`, `b` is `[4m]`; gate blocks are
    /// ordered input, forget, output, candidate. Returns `[h'; c']`.
    pub fn lstm_cell(&mut self, x: NodeId, h: NodeId, c: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let n = self.value(x).len();
        let m = self.value(h).len();
        let ws = self.shape(w);
        if self.value(c).len() != m {
            return Err(self.mismatch("lstm_cell", h, c));
        }
        if ws.len() != 2 || ws[0] != 4 * m || ws[1] != n + m {
            return Err(self.mismatch("lstm_cell", w, x));
        }
        if self.value(b).len() != 4 * m {
            return Err(self.mismatch("lstm_cell", b, h));
        }
        let wv = self.value(w);
        let (xv, hv, cv, bv) = (self.value(x), self.value(h), self.value(c), self.value(b));
        let cols = n + m;
        let mut gates = vec![0.0; 4 * m];
        for (r, g) in gates.iter_mut().enumerate() {
            let row = &wv[r * cols..(r + 1) * cols];
            let mut z = bv[r];
            z += row[..n].iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
            z += row[n..].iter().zip(hv).map(|(a, b)| a * b).sum::<f64>();
            *g = if r < 3 * m { sigmoid(z) } else { libm::tanh(z) };
        }
        let mut out = vec![0.0; 2 * m];
        let mut tanh_c = vec![0.0; m];
        for j in 0..m {
            let (ig, fg, og, gg) = (gates[j], gates[m + j], gates[2 * m + j], gates[3 * m + j]);
            let c_new = fg * cv[j] + ig * gg;
            tanh_c[j] = libm::tanh(c_new);
            out[j] = og * tanh_c[j];
            out[m + j] = c_new;
        }
        let saved = LstmSaved { x, h, c, w, b, gates, tanh_c };
        self.push(Op::Lstm(saved), vec![2 * m], out, "lstm_cell")
    }

    /// Gradients of a scalar node with respect to every parameter on the tape.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let mut grads = Gradients::new(self.params);
        self.backward_into(loss, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Tape::backward`], accumulating into existing buffers.
    pub fn backward_into(&self, loss: NodeId, out: &mut Gradients) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => {
                    let buf = out.buffer(*p, g.len());
                    buf.iter_mut().zip(&g).for_each(|(b, v)| *b += v);
                }
                Op::Gather { param, rows } => {
                    let table = self.params.get(*param);
                    let d = table.cols();
                    let buf = out.buffer(*param, table.len());
                    for (k, &r) in rows.iter().enumerate() {
                        let dst = &mut buf[r * d..(r + 1) * d];
                        dst.iter_mut().zip(&g[k * d..(k + 1) * d]).for_each(|(b, v)| *b += v);
                    }
                }
                Op::EmbedPairs { rel, ent, pairs } => {
                    let d = self.params.get(*rel).cols();
                    {
                        let buf = out.buffer(*rel, self.params.get(*rel).len());
                        for (k, &(r, _)) in pairs.iter().enumerate() {
                            let src = &g[2 * k * d..(2 * k + 1) * d];
                            buf[r * d..(r + 1) * d].iter_mut().zip(src).for_each(|(b, v)| *b += v);
                        }
                    }
                    let buf = out.buffer(*ent, self.params.get(*ent).len());
                    for (k, &(_, e)) in pairs.iter().enumerate() {
                        let src = &g[(2 * k + 1) * d..(2 * k + 2) * d];
                        buf[e * d..(e + 1) * d].iter_mut().zip(src).for_each(|(b, v)| *b += v);
                    }
                }
                Op::MatMul(a, b) => {
                    let sa = self.shape(*a);
                    let (m, k) = (sa[0], sa[1]);
                    let n = g.len() / m;
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = acc(&mut grads, *a, m * k);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for l in 0..k {
                            let brow = &bv[l * n..(l + 1) * n];
                            ga[i * k + l] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                    let gb = acc(&mut grads, *b, k * n);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for l in 0..k {
                            let x = av[i * k + l];
                            if x == 0.0 {
                                continue;
                            }
                            for (o, &y) in gb[l * n..(l + 1) * n].iter_mut().zip(grow) {
                                *o += x * y;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g, 1.0);
                    add_into(acc(&mut grads, *b, g.len()), &g, 1.0);
                }
                Op::Sub(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g, 1.0);
                    add_into(acc(&mut grads, *b, g.len()), &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), y) in ga.iter_mut().zip(&g).zip(bv) {
                        *o += gi * y;
                    }
                    let gb = acc(&mut grads, *b, g.len());
                    for ((o, gi), x) in gb.iter_mut().zip(&g).zip(av) {
                        *o += gi * x;
                    }
                }
                Op::Scale(a, f) => add_into(acc(&mut grads, *a, g.len()), &g, *f),
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        add_into(acc(&mut grads, p, len), &g[off..off + len], 1.0);
                        off += len;
                    }
                }
                Op::Slice { src, start } => {
                    let len = self.value(*src).len();
                    let gs = acc(&mut grads, *src, len);
                    add_into(&mut gs[*start..*start + g.len()], &g, 1.0);
                }
                Op::Reshape(src) => add_into(acc(&mut grads, *src, g.len()), &g, 1.0),
                Op::Relu(a) => {
                    let xv = self.value(*a);
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), &x) in ga.iter_mut().zip(&g).zip(xv) {
                        if x > 0.0 {
                            *o += gi;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *o += gi * (1.0 - y * y);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *o += gi * y * (1.0 - y);
                    }
                }
                Op::Log(a) => {
                    let xv = self.value(*a);
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), x) in ga.iter_mut().zip(&g).zip(xv) {
                        *o += gi / x;
                    }
                }
                Op::Softmax(a) => {
                    let p = &node.value;
                    let inner: f64 = p.iter().zip(&g).map(|(pi, gi)| pi * gi).sum();
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), pi) in ga.iter_mut().zip(&g).zip(p) {
                        *o += pi * (gi - inner);
                    }
                }
                Op::Sum(a) => {
                    let len = self.value(*a).len();
                    acc(&mut grads, *a, len).iter_mut().for_each(|o| *o += g[0]);
                }
                Op::Pick { src, index } => {
                    let len = self.value(*src).len();
                    acc(&mut grads, *src, len)[*index] += g[0];
                }
                Op::Entropy(p) => {
                    let pv = self.value(*p);
                    let gp = acc(&mut grads, *p, pv.len());
                    for (o, &v) in gp.iter_mut().zip(pv) {
                        if v > 0.0 {
                            *o -= g[0] * (libm::log(v) + 1.0);
                        }
                    }
                }
                Op::Lstm(s) => self.lstm_backward(s, &g, &mut grads),
            }
        }
        Ok(())
    }

    fn lstm_backward(&self, s: &LstmSaved, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let xv = self.value(s.x);
        let hv = self.value(s.h);
        let cv = self.value(s.c);
        let wv = self.value(s.w);
        let (n, m) = (xv.len(), hv.len());
        let cols = n + m;
        let (dh, dc_out) = g.split_at(m);

        let mut dz = vec![0.0; 4 * m];
        let mut dc_prev = vec![0.0; m];
        for j in 0..m {
            let (ig, fg, og, gg) = (s.gates[j], s.gates[m + j], s.gates[2 * m + j], s.gates[3 * m + j]);
            let tc = s.tanh_c[j];
            let dc = dc_out[j] + dh[j] * og * (1.0 - tc * tc);
            let d_o = dh[j] * tc;
            let d_i = dc * gg;
            let d_g = dc * ig;
            let d_f = dc * cv[j];
            dc_prev[j] = dc * fg;
            dz[j] = d_i * ig * (1.0 - ig);
            dz[m + j] = d_f * fg * (1.0 - fg);
            dz[2 * m + j] = d_o * og * (1.0 - og);
            dz[3 * m + j] = d_g * (1.0 - gg * gg);
        }

        add_into(acc(grads, s.c, m), &dc_prev, 1.0);
        add_into(acc(grads, s.b, 4 * m), &dz, 1.0);
        {
            let gw = acc(grads, s.w, 4 * m * cols);
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                let row = &mut gw[r * cols..(r + 1) * cols];
                for (o, &x) in row[..n].iter_mut().zip(xv) {
                    *o += dzr * x;
                }
                for (o, &h) in row[n..].iter_mut().zip(hv) {
                    *o += dzr * h;
                }
            }
        }
        let mut dx = vec![0.0; n];
        let mut dhp = vec![0.0; m];
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            let row = &wv[r * cols..(r + 1) * cols];
            for (o, &w) in dx.iter_mut().zip(&row[..n]) {
                *o += dzr * w;
            }
            for (o, &w) in dhp.iter_mut().zip(&row[n..]) {
                *o += dzr * w;
            }
        }
        add_into(acc(grads, s.x, n), &dx, 1.0);
        add_into(acc(grads, s.h, m), &dhp, 1.0);
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut [f64] {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}
