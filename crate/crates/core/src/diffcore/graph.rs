use super::Tensor;
use crate::{Error, Result};

/// Handle to a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Scale(NodeId, f64),
    Softmax(NodeId),
    LogSumExp(NodeId),
    L2Norm(NodeId),
    SoftmaxCrossEntropy(NodeId, NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Relu(..) => "relu",
            Op::Tanh(..) => "tanh",
            Op::Scale(..) => "scale",
            Op::Softmax(..) => "softmax",
            Op::LogSumExp(..) => "log_sum_exp",
            Op::L2Norm(..) => "l2_norm",
            Op::SoftmaxCrossEntropy(..) => "softmax_cross_entropy",
        }
    }
}

/// Tape of primitive operations in topological (insertion) order.
///
/// Shapes are fixed when nodes are recorded; `forward` binds leaf values and
/// evaluates every node, `backward` seeds any evaluated node and accumulates
/// gradients back to the leaves by summing over all paths. A graph is
/// single-threaded; concurrent workers each build their own.
pub struct Graph {
    ops: Vec<Op>,
    shapes: Vec<Vec<usize>>,
    values: Vec<Option<Tensor>>,
    grads: Vec<Option<Tensor>>,
    forwarded: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            ops: Vec::new(),
            shapes: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
            forwarded: false,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.ops.len()
    }

    /// Identifier of the most recently recorded node.
    pub fn output(&self) -> Option<NodeId> {
        if self.ops.is_empty() {
            None
        } else {
            Some(NodeId(self.ops.len() - 1))
        }
    }

    fn push(&mut self, op: Op, shape: Vec<usize>) -> NodeId {
        self.ops.push(op);
        self.shapes.push(shape);
        self.values.push(None);
        self.grads.push(None);
        self.forwarded = false;
        NodeId(self.ops.len() - 1)
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.shapes[id.0]
    }

    pub fn value(&self, id: NodeId) -> Option<&Tensor> {
        self.values[id.0].as_ref()
    }

    pub fn gradient(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Declare an input or parameter leaf with a fixed shape.
    pub fn leaf(&mut self, shape: &[usize]) -> NodeId {
        self.push(Op::Leaf, shape.to_vec())
    }

    fn mismatch(context: &'static str, expected: String, got: String) -> Error {
        Error::ShapeMismatch {
            context,
            expected,
            got,
        }
    }

    /// Matrix product of two rank-2 nodes: `[n,m] x [m,k] -> [n,k]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (&self.shapes[a.0], &self.shapes[b.0]);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Self::mismatch(
                "matmul",
                "[n,m] x [m,k]".into(),
                format!("{sa:?} x {sb:?}"),
            ));
        }
        let shape = vec![sa[0], sb[1]];
        Ok(self.push(Op::MatMul(a, b), shape))
    }

    /// Elementwise add; also accepts `[n,k] + [k]` (bias broadcast over rows).
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (&self.shapes[a.0], &self.shapes[b.0]);
        let broadcast = sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0];
        if sa != sb && !broadcast {
            return Err(Self::mismatch(
                "add",
                format!("{sa:?} (or matching bias)"),
                format!("{sb:?}"),
            ));
        }
        let shape = sa.clone();
        Ok(self.push(Op::Add(a, b), shape))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let shape = self.shapes[x.0].clone();
        self.push(Op::Relu(x), shape)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let shape = self.shapes[x.0].clone();
        self.push(Op::Tanh(x), shape)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let shape = self.shapes[x.0].clone();
        self.push(Op::Scale(x, c), shape)
    }

    /// Row-wise softmax of a vector or matrix.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let s = &self.shapes[x.0];
        if s.is_empty() {
            return Err(Self::mismatch("softmax", "vector or matrix".into(), "scalar".into()));
        }
        let shape = s.clone();
        Ok(self.push(Op::Softmax(x), shape))
    }

    /// Row-wise log-sum-exp: `[n,k] -> [n]`, `[k] -> scalar`.
    pub fn log_sum_exp(&mut self, x: NodeId) -> Result<NodeId> {
        let s = &self.shapes[x.0];
        let shape = match s.len() {
            1 => vec![],
            2 => vec![s[0]],
            _ => {
                return Err(Self::mismatch(
                    "log_sum_exp",
                    "vector or matrix".into(),
                    format!("{s:?}"),
                ))
            }
        };
        Ok(self.push(Op::LogSumExp(x), shape))
    }

    /// Euclidean norm of all elements, as a scalar.
    pub fn l2_norm(&mut self, x: NodeId) -> NodeId {
        self.push(Op::L2Norm(x), vec![])
    }

    /// Fused mean softmax-cross-entropy of logits `[n,k]` against target
    /// distributions `[n,k]` (one-hot rows for hard labels).
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: NodeId) -> Result<NodeId> {
        let (sl, st) = (&self.shapes[logits.0], &self.shapes[targets.0]);
        if sl.len() != 2 || sl != st {
            return Err(Self::mismatch(
                "softmax_cross_entropy",
                "matching [n,k] logits and targets".into(),
                format!("{sl:?} vs {st:?}"),
            ));
        }
        Ok(self.push(Op::SoftmaxCrossEntropy(logits, targets), vec![]))
    }

    /// Evaluate every node in recorded order. `bindings` must cover every
    /// leaf; returns the value of the last node.
    pub fn forward(&mut self, bindings: &[(NodeId, &Tensor)]) -> Result<Tensor> {
        for v in &mut self.values {
            *v = None;
        }
        for g in &mut self.grads {
            *g = None;
        }
        self.forwarded = false;
        for (id, t) in bindings {
            if !matches!(self.ops[id.0], Op::Leaf) {
                return Err(Error::InvalidConfig(format!(
                    "node {} is not a leaf and cannot be bound",
                    id.0
                )));
            }
            if self.shapes[id.0] != t.shape() {
                return Err(Self::mismatch(
                    "leaf binding",
                    format!("{:?}", self.shapes[id.0]),
                    format!("{:?}", t.shape()),
                ));
            }
            self.values[id.0] = Some((*t).clone());
        }
        for i in 0..self.ops.len() {
            if matches!(self.ops[i], Op::Leaf) {
                if self.values[i].is_none() {
                    return Err(Error::UnboundLeaf(i));
                }
                continue;
            }
            let out = self.eval(i)?;
            if !out.data().iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    op: self.ops[i].name(),
                });
            }
            self.values[i] = Some(out);
        }
        self.forwarded = true;
        let last = self.ops.len() - 1;
        Ok(self.values[last].clone().expect("last node evaluated"))
    }

    fn val(&self, id: NodeId) -> &Tensor {
        self.values[id.0].as_ref().expect("value present")
    }

    fn eval(&self, i: usize) -> Result<Tensor> {
        let out = match &self.ops[i] {
            Op::Leaf => unreachable!("leaves are bound, not evaluated"),
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.val(*a), self.val(*b));
                let (n, m, k) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                let (da, db) = (ta.data(), tb.data());
                let mut out = vec![0.0; n * k];
                for r in 0..n {
                    for l in 0..m {
                        let a_rl = da[r * m + l];
                        if a_rl == 0.0 {
                            continue;
                        }
                        let brow = &db[l * k..(l + 1) * k];
                        let orow = &mut out[r * k..(r + 1) * k];
                        for (o, &bv) in orow.iter_mut().zip(brow) {
                            *o += a_rl * bv;
                        }
                    }
                }
                Tensor::from_raw(vec![n, k], out)
            }
            Op::Add(a, b) => {
                let (ta, tb) = (self.val(*a), self.val(*b));
                let mut out = ta.data().to_vec();
                if ta.shape() == tb.shape() {
                    for (o, &bv) in out.iter_mut().zip(tb.data()) {
                        *o += bv;
                    }
                } else {
                    let k = tb.len();
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += tb.data()[j % k];
                    }
                }
                Tensor::from_raw(ta.shape().to_vec(), out)
            }
            Op::Relu(x) => {
                let t = self.val(*x);
                let out = t.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
                Tensor::from_raw(t.shape().to_vec(), out)
            }
            Op::Tanh(x) => {
                let t = self.val(*x);
                let out = t.data().iter().map(|v| v.tanh()).collect();
                Tensor::from_raw(t.shape().to_vec(), out)
            }
            Op::Scale(x, c) => {
                let t = self.val(*x);
                let out = t.data().iter().map(|v| v * c).collect();
                Tensor::from_raw(t.shape().to_vec(), out)
            }
            Op::Softmax(x) => {
                let t = self.val(*x);
                let (rows, cols) = (t.rows(), t.cols());
                let mut out = vec![0.0; rows * cols];
                for r in 0..rows {
                    softmax_row(t.row(r), &mut out[r * cols..(r + 1) * cols]);
                }
                Tensor::from_raw(t.shape().to_vec(), out)
            }
            Op::LogSumExp(x) => {
                let t = self.val(*x);
                let rows = t.rows();
                let out: Vec<f64> = (0..rows).map(|r| log_sum_exp_row(t.row(r))).collect();
                Tensor::from_raw(self.shapes[i].clone(), out)
            }
            Op::L2Norm(x) => {
                let t = self.val(*x);
                let norm = t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
                Tensor::from_raw(vec![], vec![norm])
            }
            Op::SoftmaxCrossEntropy(z, t) => {
                let (tz, tt) = (self.val(*z), self.val(*t));
                let (n, k) = (tz.shape()[0], tz.shape()[1]);
                let mut total = 0.0;
                for r in 0..n {
                    let zr = tz.row(r);
                    let tr = &tt.data()[r * k..(r + 1) * k];
                    let lse = log_sum_exp_row(zr);
                    let tmass: f64 = tr.iter().sum();
                    let dot: f64 = tr.iter().zip(zr).map(|(a, b)| a * b).sum();
                    total += lse * tmass - dot;
                }
                Tensor::from_raw(vec![], vec![total / n as f64])
            }
        };
        Ok(out)
    }

    /// Reverse pass seeded at the last node.
    pub fn backward(&mut self, seed: &Tensor) -> Result<()> {
        let last = self
            .output()
            .ok_or_else(|| Error::InvalidConfig("empty graph".into()))?;
        self.backward_from(last, seed)
    }

    /// Reverse pass seeded at an arbitrary evaluated node. Gradients reach
    /// every leaf the node depends on; each node is visited once.
    pub fn backward_from(&mut self, out: NodeId, seed: &Tensor) -> Result<()> {
        if !self.forwarded {
            return Err(Error::BackwardBeforeForward);
        }
        if seed.shape() != self.shapes[out.0] {
            return Err(Self::mismatch(
                "backward seed",
                format!("{:?}", self.shapes[out.0]),
                format!("{:?}", seed.shape()),
            ));
        }
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[out.0] = Some(seed.clone());
        for i in (0..=out.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, delta: Vec<f64>) {
        match &mut self.grads[id.0] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(delta) {
                    *e += d;
                }
            }
            None => {
                self.grads[id.0] = Some(Tensor::from_raw(self.shapes[id.0].clone(), delta));
            }
        }
    }

    fn propagate(&mut self, i: usize, g: &Tensor) {
        match self.ops[i].clone() {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.val(a).clone(), self.val(b).clone());
                let (n, m, k) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                let (da, db, dg) = (ta.data(), tb.data(), g.data());
                let mut ga = vec![0.0; n * m];
                for r in 0..n {
                    for l in 0..m {
                        let mut acc = 0.0;
                        for j in 0..k {
                            acc += dg[r * k + j] * db[l * k + j];
                        }
                        ga[r * m + l] = acc;
                    }
                }
                let mut gb = vec![0.0; m * k];
                for r in 0..n {
                    for l in 0..m {
                        let a_rl = da[r * m + l];
                        if a_rl == 0.0 {
                            continue;
                        }
                        for j in 0..k {
                            gb[l * k + j] += a_rl * dg[r * k + j];
                        }
                    }
                }
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.data().to_vec());
                if self.shapes[a.0] == self.shapes[b.0] {
                    self.accumulate(b, g.data().to_vec());
                } else {
                    let k = self.shapes[b.0][0];
                    let mut gb = vec![0.0; k];
                    for (j, &gv) in g.data().iter().enumerate() {
                        gb[j % k] += gv;
                    }
                    self.accumulate(b, gb);
                }
            }
            Op::Relu(x) => {
                let tx = self.val(x).clone();
                let gx = tx
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
                    .collect();
                self.accumulate(x, gx);
            }
            Op::Tanh(x) => {
                let ty = self.values[i].as_ref().expect("tanh output").clone();
                let gx = ty
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &gv)| gv * (1.0 - y * y))
                    .collect();
                self.accumulate(x, gx);
            }
            Op::Scale(x, c) => {
                let gx = g.data().iter().map(|&gv| gv * c).collect();
                self.accumulate(x, gx);
            }
            Op::Softmax(x) => {
                let ty = self.values[i].as_ref().expect("softmax output").clone();
                let (rows, cols) = (ty.rows(), ty.cols());
                let mut gx = vec![0.0; rows * cols];
                for r in 0..rows {
                    let yr = ty.row(r);
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..cols {
                        gx[r * cols + j] = yr[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(x, gx);
            }
            Op::LogSumExp(x) => {
                let tx = self.val(x).clone();
                let (rows, cols) = (tx.rows(), tx.cols());
                let mut gx = vec![0.0; rows * cols];
                let mut soft = vec![0.0; cols];
                for r in 0..rows {
                    softmax_row(tx.row(r), &mut soft);
                    let gv = g.data()[r];
                    for j in 0..cols {
                        gx[r * cols + j] = soft[j] * gv;
                    }
                }
                self.accumulate(x, gx);
            }
            Op::L2Norm(x) => {
                let tx = self.val(x).clone();
                let norm = self.values[i].as_ref().expect("norm output").data()[0];
                let gv = g.data()[0];
                // Subgradient 0 at the origin.
                let gx = if norm == 0.0 {
                    vec![0.0; tx.len()]
                } else {
                    tx.data().iter().map(|&v| gv * v / norm).collect()
                };
                self.accumulate(x, gx);
            }
            Op::SoftmaxCrossEntropy(z, t) => {
                let (tz, tt) = (self.val(z).clone(), self.val(t).clone());
                let (n, k) = (tz.shape()[0], tz.shape()[1]);
                let gv = g.data()[0];
                let scale = gv / n as f64;
                let mut gz = vec![0.0; n * k];
                let mut gt = vec![0.0; n * k];
                let mut soft = vec![0.0; k];
                for r in 0..n {
                    let zr = tz.row(r);
                    let tr = &tt.data()[r * k..(r + 1) * k];
                    let lse = log_sum_exp_row(zr);
                    softmax_row(zr, &mut soft);
                    let tmass: f64 = tr.iter().sum();
                    for j in 0..k {
                        gz[r * k + j] = scale * (soft[j] * tmass - tr[j]);
                        gt[r * k + j] = scale * (lse - zr[j]);
                    }
                }
                self.accumulate(z, gz);
                self.accumulate(t, gt);
            }
        }
    }
}

fn log_sum_exp_row(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn affine_evaluation() {
        // w.x + b with w=(1,0), b=0, x=(2,0) -> 2.0
        let mut g = Graph::new();
        let x = g.leaf(&[1, 2]);
        let w = g.leaf(&[2, 1]);
        let b = g.leaf(&[1]);
        let xw = g.matmul(x, w).unwrap();
        let _out = g.add(xw, b).unwrap();
        let tx = Tensor::matrix(1, 2, vec![2.0, 0.0]).unwrap();
        let tw = Tensor::matrix(2, 1, vec![1.0, 0.0]).unwrap();
        let tb = Tensor::vector(&[0.0]).unwrap();
        let out = g.forward(&[(x, &tx), (w, &tw), (b, &tb)]).unwrap();
        assert_eq!(out.data(), &[2.0]);
    }

    #[test]
    fn relu_definition() {
        let mut g = Graph::new();
        let x = g.leaf(&[2]);
        let _r = g.relu(x);
        let out = g
            .forward(&[(x, &Tensor::vector(&[-1.0, 3.0]).unwrap())])
            .unwrap();
        assert_eq!(out.data(), &[0.0, 3.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let mut g = Graph::new();
        let x = g.leaf(&[3]);
        let _s = g.softmax(x).unwrap();
        let out = g
            .forward(&[(x, &Tensor::vector(&[0.0, 0.0, 0.0]).unwrap())])
            .unwrap();
        let third = 1.0 / 3.0;
        assert!(vec_close(out.data(), &[third, third, third], 1e-15));
    }

    #[test]
    fn linear_gradient() {
        // d/dx of w.x with w=(3,-1) -> (3,-1)
        let mut g = Graph::new();
        let x = g.leaf(&[1, 2]);
        let w = g.leaf(&[2, 1]);
        let _y = g.matmul(x, w).unwrap();
        let tx = Tensor::matrix(1, 2, vec![0.7, -0.3]).unwrap();
        let tw = Tensor::matrix(2, 1, vec![3.0, -1.0]).unwrap();
        g.forward(&[(x, &tx), (w, &tw)]).unwrap();
        g.backward(&Tensor::matrix(1, 1, vec![1.0]).unwrap()).unwrap();
        assert!(vec_close(g.gradient(x).unwrap().data(), &[3.0, -1.0], 1e-15));
    }

    #[test]
    fn cross_entropy_gradient_matches_softmax_minus_onehot() {
        // logits (0,0), true class 0 -> gradient (-0.5, 0.5)
        let mut g = Graph::new();
        let z = g.leaf(&[1, 2]);
        let t = g.leaf(&[1, 2]);
        let _l = g.softmax_cross_entropy(z, t).unwrap();
        let tz = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        let tt = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
        g.forward(&[(z, &tz), (t, &tt)]).unwrap();
        g.backward(&Tensor::scalar(1.0).unwrap()).unwrap();
        assert!(vec_close(g.gradient(z).unwrap().data(), &[-0.5, 0.5], 1e-15));
    }

    #[test]
    fn backward_before_forward_errors() {
        let mut g = Graph::new();
        let x = g.leaf(&[2]);
        let _r = g.relu(x);
        let err = g.backward(&Tensor::vector(&[1.0, 1.0]).unwrap());
        assert!(matches!(err, Err(Error::BackwardBeforeForward)));
    }

    #[test]
    fn seed_shape_is_checked() {
        let mut g = Graph::new();
        let x = g.leaf(&[2]);
        let _r = g.relu(x);
        g.forward(&[(x, &Tensor::vector(&[1.0, 2.0]).unwrap())]).unwrap();
        let err = g.backward(&Tensor::vector(&[1.0]).unwrap());
        assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn unbound_leaf_errors() {
        let mut g = Graph::new();
        let x = g.leaf(&[2]);
        let y = g.leaf(&[2]);
        let _s = g.add(x, y).unwrap();
        let err = g.forward(&[(x, &Tensor::vector(&[1.0, 2.0]).unwrap())]);
        assert!(matches!(err, Err(Error::UnboundLeaf(_))));
    }

    #[test]
    fn non_finite_intermediate_is_reported() {
        let mut g = Graph::new();
        let x = g.leaf(&[1]);
        let big = g.scale(x, 1e308);
        let _sq = g.scale(big, 1e308);
        let err = g.forward(&[(x, &Tensor::vector(&[1.0]).unwrap())]);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let mut g = Graph::new();
        let x = g.leaf(&[2, 3]);
        let w = g.leaf(&[3, 2]);
        let mm = g.matmul(x, w).unwrap();
        let th = g.tanh(mm);
        let _n = g.l2_norm(th);
        let tx = Tensor::matrix(2, 3, vec![0.3, -1.2, 0.5, 2.0, 0.1, -0.7]).unwrap();
        let tw = Tensor::matrix(3, 2, vec![1.5, -0.2, 0.8, 0.4, -1.1, 0.9]).unwrap();
        let v1 = g.forward(&[(x, &tx), (w, &tw)]).unwrap();
        g.backward(&Tensor::scalar(1.0).unwrap()).unwrap();
        let g1 = g.gradient(x).unwrap().data().to_vec();
        let v2 = g.forward(&[(x, &tx), (w, &tw)]).unwrap();
        g.backward(&Tensor::scalar(1.0).unwrap()).unwrap();
        let g2 = g.gradient(x).unwrap().data().to_vec();
        assert_eq!(v1.data(), v2.data());
        assert_eq!(g1, g2);
    }

    #[test]
    fn backward_is_linear_in_the_seed() {
        // Gradient of a sum of outputs equals the sum of per-output gradients.
        let mut g = Graph::new();
        let x = g.leaf(&[1, 3]);
        let w = g.leaf(&[3, 2]);
        let _y = g.matmul(x, w).unwrap();
        let tx = Tensor::matrix(1, 3, vec![0.4, -0.9, 1.3]).unwrap();
        let tw = Tensor::matrix(3, 2, vec![0.2, 1.0, -0.5, 0.3, 0.7, -1.4]).unwrap();
        g.forward(&[(x, &tx), (w, &tw)]).unwrap();

        g.backward(&Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap()).unwrap();
        let g0 = g.gradient(x).unwrap().data().to_vec();
        g.backward(&Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap()).unwrap();
        let g1 = g.gradient(x).unwrap().data().to_vec();
        g.backward(&Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap()).unwrap();
        let gsum = g.gradient(x).unwrap().data().to_vec();

        let manual: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| a + b).collect();
        assert!(vec_close(&gsum, &manual, 1e-12));
    }
}
