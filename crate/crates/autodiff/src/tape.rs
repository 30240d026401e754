//! Operation tape for reverse-mode differentiation.
//!
//! Every op appends one node holding its output value. Nodes are appended in
//! evaluation order, so the tape is topologically sorted by construction and
//! the backward sweep is a single reverse pass.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Linear {
        x: usize,
        w: usize,
        b: usize,
        batch: usize,
        inp: usize,
        out: usize,
    },
    Conv1d {
        x: usize,
        w: usize,
        b: usize,
        geom: ConvGeom,
    },
    Relu(usize),
    Tanh(usize),
    MaxPool1d {
        x: usize,
        argmax: Vec<usize>,
    },
    Reshape(usize),
    Softmax {
        x: usize,
        cols: usize,
    },
    LogSoftmax {
        x: usize,
        cols: usize,
    },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Minimum(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Exp(usize),
    Square(usize),
    Sum(usize),
    Pick {
        x: usize,
        idx: Vec<usize>,
        cols: usize,
    },
    GaussianLogProb {
        mean: usize,
        log_std: usize,
        actions: Vec<f64>,
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    batch: usize,
    cin: usize,
    cout: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    lout: usize,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation so it can be differentiated once.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.idx).and_then(Option::as_ref)
    }

    /// Gradients for `vars` in order; a var the loss does not depend on gets zeros.
    pub fn for_vars(&self, vars: &[Var]) -> Result<Vec<Tensor>> {
        vars.iter()
            .map(|&v| {
                if v.tape != self.tape || v.idx >= self.shapes.len() {
                    return Err(AutodiffError::ForeignVar);
                }
                Ok(self
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.idx])))
            })
            .collect()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, detail: String) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Leaf, false)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.idx].value
    }

    fn push_unchecked(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(AutodiffError::ForeignVar);
        }
        Ok(v.idx)
    }

    fn val(&self, i: usize) -> &Tensor {
        &self.nodes[i].value
    }

    /// `y = x W + b` with `x: [B, in]`, `W: [in, out]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xi, wi, bi) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let (xs, ws, bs) = (self.val(xi).shape(), self.val(wi).shape(), self.val(bi).shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(mismatch(
                "linear",
                format!("x {xs:?}, w {ws:?}, b {bs:?}"),
            ));
        }
        let (batch, inp, out) = (xs[0], ws[0], ws[1]);
        let (xd, wd, bd) = (self.val(xi).data(), self.val(wi).data(), self.val(bi).data());
        let mut y = vec![0.0; batch * out];
        for r in 0..batch {
            let yr = &mut y[r * out..(r + 1) * out];
            yr.copy_from_slice(bd);
            for i in 0..inp {
                let xv = xd[r * inp + i];
                if xv == 0.0 {
                    continue;
                }
                let wr = &wd[i * out..(i + 1) * out];
                for (yo, &wv) in yr.iter_mut().zip(wr) {
                    *yo += xv * wv;
                }
            }
        }
        let value = Tensor::new(vec![batch, out], y)?;
        self.push(
            "linear",
            value,
            Op::Linear {
                x: xi,
                w: wi,
                b: bi,
                batch,
                inp,
                out,
            },
            &[xi, wi, bi],
        )
    }

    /// Valid 1-D cross-correlation. `x: [B, Cin, L]`, `w: [Cout, Cin, K]`, `b: [Cout]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let (xi, wi, bi) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let (xs, ws, bs) = (self.val(xi).shape(), self.val(wi).shape(), self.val(bi).shape());
        if stride == 0
            || xs.len() != 3
            || ws.len() != 3
            || xs[1] != ws[1]
            || bs != [ws[0]]
            || xs[2] < ws[2]
        {
            return Err(mismatch(
                "conv1d",
                format!("x {xs:?}, w {ws:?}, b {bs:?}, stride {stride}"),
            ));
        }
        let geom = ConvGeom {
            batch: xs[0],
            cin: xs[1],
            cout: ws[0],
            len: xs[2],
            kernel: ws[2],
            stride,
            lout: (xs[2] - ws[2]) / stride + 1,
        };
        let ConvGeom {
            batch,
            cin,
            cout,
            len,
            kernel,
            lout,
            ..
        } = geom;
        let (xd, wd, bd) = (self.val(xi).data(), self.val(wi).data(), self.val(bi).data());
        let mut y = vec![0.0; batch * cout * lout];
        for n in 0..batch {
            for co in 0..cout {
                let yrow = &mut y[(n * cout + co) * lout..(n * cout + co + 1) * lout];
                yrow.iter_mut().for_each(|v| *v = bd[co]);
                for ci in 0..cin {
                    let xrow = &xd[(n * cin + ci) * len..(n * cin + ci + 1) * len];
                    for k in 0..kernel {
                        let wv = wd[(co * cin + ci) * kernel + k];
                        for (t, yv) in yrow.iter_mut().enumerate() {
                            *yv += wv * xrow[t * stride + k];
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![batch, cout, lout], y)?;
        self.push(
            "conv1d",
            value,
            Op::Conv1d {
                x: xi,
                w: wi,
                b: bi,
                geom,
            },
            &[xi, wi, bi],
        )
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = self.val(xi).map(|v| v.max(0.0));
        self.push("relu", value, Op::Relu(xi), &[xi])
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = self.val(xi).map(f64::tanh);
        self.push("tanh", value, Op::Tanh(xi), &[xi])
    }

    /// Non-overlapping max pool over the last axis of `[B, C, L]`; a trailing
    /// partial window is dropped.
    pub fn max_pool1d(&mut self, x: Var, size: usize) -> Result<Var> {
        let xi = self.idx(x)?;
        let xs = self.val(xi).shape().to_vec();
        if xs.len() != 3 || size == 0 || xs[2] < size {
            return Err(mismatch("max_pool1d", format!("x {xs:?}, size {size}")));
        }
        let (rows, len) = (xs[0] * xs[1], xs[2]);
        let lout = len / size;
        let xd = self.val(xi).data();
        let mut y = Vec::with_capacity(rows * lout);
        let mut argmax = Vec::with_capacity(rows * lout);
        for r in 0..rows {
            for t in 0..lout {
                let start = r * len + t * size;
                let mut best = start;
                for j in start + 1..start + size {
                    if xd[j] > xd[best] {
                        best = j;
                    }
                }
                y.push(xd[best]);
                argmax.push(best);
            }
        }
        let value = Tensor::new(vec![xs[0], xs[1], lout], y)?;
        self.push("max_pool1d", value, Op::MaxPool1d { x: xi, argmax }, &[xi])
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = self.val(xi).clone().reshape(shape)?;
        self.push("reshape", value, Op::Reshape(xi), &[xi])
    }

    /// Collapses every axis after the first.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        let rest: usize = shape[1..].iter().product();
        self.reshape(x, vec![shape[0], rest.max(1)])
    }

    fn last_axis(&self, xi: usize, op: &'static str) -> Result<usize> {
        let shape = self.val(xi).shape();
        let cols = *shape.last().expect("non-empty shape");
        if cols == 0 {
            return Err(mismatch(op, format!("{shape:?}")));
        }
        Ok(cols)
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let cols = self.last_axis(xi, "softmax")?;
        let mut value = self.val(xi).clone();
        for row in value.data_mut().chunks_mut(cols) {
            softmax_in_place(row);
        }
        self.push("softmax", value, Op::Softmax { x: xi, cols }, &[xi])
    }

    /// Log-softmax along the last axis.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let cols = self.last_axis(xi, "log_softmax")?;
        let mut value = self.val(xi).clone();
        for row in value.data_mut().chunks_mut(cols) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push("log_softmax", value, Op::LogSoftmax { x: xi, cols }, &[xi])
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: fn(usize, usize) -> Op,
    ) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        let value = self
            .val(ai)
            .zip_map(self.val(bi), f)
            .map_err(|_| {
                mismatch(
                    name,
                    format!("{:?} vs {:?}", self.val(ai).shape(), self.val(bi).shape()),
                )
            })?;
        self.push(name, value, op(ai, bi), &[ai, bi])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// Elementwise minimum; on ties the gradient goes to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("minimum", a, b, |x, y| if x <= y { x } else { y }, Op::Minimum)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = self.val(xi).map(|v| v * c);
        self.push("scale", value, Op::Scale(xi, c), &[xi])
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = self.val(xi).map(|v| v + c);
        self.push("add_scalar", value, Op::AddScalar(xi), &[xi])
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = self.val(xi).map(f64::exp);
        self.push("exp", value, Op::Exp(xi), &[xi])
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = self.val(xi).map(|v| v * v);
        self.push("square", value, Op::Square(xi), &[xi])
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let value = Tensor::scalar(self.val(xi).sum());
        self.push("sum", value, Op::Sum(xi), &[xi])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len() as f64;
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n)
    }

    /// `out[r] = x[r, idx[r]]` for `x: [B, C]`.
    pub fn pick(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xi = self.idx(x)?;
        let xs = self.val(xi).shape();
        if xs.len() != 2 || xs[0] != idx.len() || idx.iter().any(|&c| c >= xs[1]) {
            return Err(mismatch("pick", format!("x {xs:?}, {} indices", idx.len())));
        }
        let cols = xs[1];
        let xd = self.val(xi).data();
        let picked: Vec<f64> = idx.iter().enumerate().map(|(r, &c)| xd[r * cols + c]).collect();
        let value = Tensor::new(vec![idx.len()], picked)?;
        self.push(
            "pick",
            value,
            Op::Pick {
                x: xi,
                idx: idx.to_vec(),
                cols,
            },
            &[xi],
        )
    }

    /// Log-density of `actions` under a diagonal Gaussian with per-row `mean: [B, D]`
    /// and shared `log_std: [D]`. Returns `[B]`.
    pub fn gaussian_log_prob(&mut self, mean: Var, log_std: Var, actions: &Tensor) -> Result<Var> {
        let (mi, si) = (self.idx(mean)?, self.idx(log_std)?);
        let (ms, ss) = (self.val(mi).shape(), self.val(si).shape());
        if ms.len() != 2 || ss != [ms[1]] || actions.shape() != ms {
            return Err(mismatch(
                "gaussian_log_prob",
                format!("mean {ms:?}, log_std {ss:?}, actions {:?}", actions.shape()),
            ));
        }
        let (batch, dim) = (ms[0], ms[1]);
        let (md, sd, ad) = (self.val(mi).data(), self.val(si).data(), actions.data());
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let out: Vec<f64> = (0..batch)
            .map(|r| {
                (0..dim)
                    .map(|d| {
                        let z = (ad[r * dim + d] - md[r * dim + d]) * (-sd[d]).exp();
                        -0.5 * z * z - sd[d] - half_log_2pi
                    })
                    .sum()
            })
            .collect();
        let value = Tensor::new(vec![batch], out)?;
        self.push(
            "gaussian_log_prob",
            value,
            Op::GaussianLogProb {
                mean: mi,
                log_std: si,
                actions: ad.to_vec(),
                dim,
            },
            &[mi, si],
        )
    }

    /// Reverse sweep from a scalar `loss`. A tape can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(AutodiffError::TapeConsumed);
        }
        let li = self.idx(loss)?;
        if !self.val(li).is_scalar() {
            return Err(AutodiffError::NotScalar(self.val(li).shape().to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[li] = Some(Tensor::full(self.val(li).shape(), 1.0));

        for i in (0..=li).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                *g = None;
            }
        }
        if let Some((k, _)) = grads
            .iter()
            .enumerate()
            .find(|(_, g)| g.as_ref().is_some_and(|t| !t.is_finite()))
        {
            return Err(AutodiffError::NonFiniteGradient(k));
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::Linear {
                x,
                w,
                b,
                batch,
                inp,
                out: o,
            } => {
                if self.wants(x) {
                    let wd = self.val(w).data();
                    let mut dx = vec![0.0; batch * inp];
                    for r in 0..batch {
                        let gr = &gd[r * o..(r + 1) * o];
                        for ii in 0..inp {
                            let wr = &wd[ii * o..(ii + 1) * o];
                            dx[r * inp + ii] = gr.iter().zip(wr).map(|(a, b)| a * b).sum();
                        }
                    }
                    accumulate(grads, x, self.val(x).shape(), &dx);
                }
                if self.wants(w) {
                    let xd = self.val(x).data();
                    let mut dw = vec![0.0; inp * o];
                    for r in 0..batch {
                        let gr = &gd[r * o..(r + 1) * o];
                        for ii in 0..inp {
                            let xv = xd[r * inp + ii];
                            if xv == 0.0 {
                                continue;
                            }
                            for (d, &gv) in dw[ii * o..(ii + 1) * o].iter_mut().zip(gr) {
                                *d += xv * gv;
                            }
                        }
                    }
                    accumulate(grads, w, self.val(w).shape(), &dw);
                }
                if self.wants(b) {
                    let mut db = vec![0.0; o];
                    for gr in gd.chunks(o) {
                        for (d, &gv) in db.iter_mut().zip(gr) {
                            *d += gv;
                        }
                    }
                    accumulate(grads, b, self.val(b).shape(), &db);
                }
            }
            &Op::Conv1d { x, w, b, geom } => self.conv1d_backward(gd, x, w, b, geom, grads),
            &Op::Relu(x) => {
                let xd = self.val(x).data();
                let dx: Vec<f64> = gd
                    .iter()
                    .zip(xd)
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            &Op::Tanh(x) => {
                let dx: Vec<f64> = gd
                    .iter()
                    .zip(out.data())
                    .map(|(&gv, &y)| gv * (1.0 - y * y))
                    .collect();
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            Op::MaxPool1d { x, argmax } => {
                let mut dx = vec![0.0; self.val(*x).len()];
                for (&src, &gv) in argmax.iter().zip(gd) {
                    dx[src] += gv;
                }
                accumulate(grads, *x, self.val(*x).shape(), &dx);
            }
            &Op::Reshape(x) => accumulate(grads, x, self.val(x).shape(), gd),
            &Op::Softmax { x, cols } => {
                let mut dx = vec![0.0; gd.len()];
                for ((dr, gr), yr) in dx
                    .chunks_mut(cols)
                    .zip(gd.chunks(cols))
                    .zip(out.data().chunks(cols))
                {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for ((d, &gv), &y) in dr.iter_mut().zip(gr).zip(yr) {
                        *d = y * (gv - dot);
                    }
                }
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            &Op::LogSoftmax { x, cols } => {
                let mut dx = vec![0.0; gd.len()];
                for ((dr, gr), yr) in dx
                    .chunks_mut(cols)
                    .zip(gd.chunks(cols))
                    .zip(out.data().chunks(cols))
                {
                    let total: f64 = gr.iter().sum();
                    for ((d, &gv), &y) in dr.iter_mut().zip(gr).zip(yr) {
                        *d = gv - y.exp() * total;
                    }
                }
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            &Op::Add(a, b) => {
                if self.wants(a) {
                    accumulate(grads, a, self.val(a).shape(), gd);
                }
                if self.wants(b) {
                    accumulate(grads, b, self.val(b).shape(), gd);
                }
            }
            &Op::Sub(a, b) => {
                if self.wants(a) {
                    accumulate(grads, a, self.val(a).shape(), gd);
                }
                if self.wants(b) {
                    let neg: Vec<f64> = gd.iter().map(|v| -v).collect();
                    accumulate(grads, b, self.val(b).shape(), &neg);
                }
            }
            &Op::Mul(a, b) => {
                if self.wants(a) {
                    let da: Vec<f64> = gd.iter().zip(self.val(b).data()).map(|(g, y)| g * y).collect();
                    accumulate(grads, a, self.val(a).shape(), &da);
                }
                if self.wants(b) {
                    let db: Vec<f64> = gd.iter().zip(self.val(a).data()).map(|(g, x)| g * x).collect();
                    accumulate(grads, b, self.val(b).shape(), &db);
                }
            }
            &Op::Minimum(a, b) => {
                let (ad, bd) = (self.val(a).data(), self.val(b).data());
                let mut da = vec![0.0; gd.len()];
                let mut db = vec![0.0; gd.len()];
                for j in 0..gd.len() {
                    if ad[j] <= bd[j] {
                        da[j] = gd[j];
                    } else {
                        db[j] = gd[j];
                    }
                }
                if self.wants(a) {
                    accumulate(grads, a, self.val(a).shape(), &da);
                }
                if self.wants(b) {
                    accumulate(grads, b, self.val(b).shape(), &db);
                }
            }
            &Op::Scale(x, c) => {
                let dx: Vec<f64> = gd.iter().map(|v| v * c).collect();
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            &Op::AddScalar(x) => accumulate(grads, x, self.val(x).shape(), gd),
            &Op::Exp(x) => {
                let dx: Vec<f64> = gd.iter().zip(out.data()).map(|(g, y)| g * y).collect();
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            &Op::Square(x) => {
                let dx: Vec<f64> = gd
                    .iter()
                    .zip(self.val(x).data())
                    .map(|(g, v)| 2.0 * g * v)
                    .collect();
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            &Op::Sum(x) => {
                let dx = vec![gd[0]; self.val(x).len()];
                accumulate(grads, x, self.val(x).shape(), &dx);
            }
            Op::Pick { x, idx, cols } => {
                let mut dx = vec![0.0; self.val(*x).len()];
                for (r, (&c, &gv)) in idx.iter().zip(gd).enumerate() {
                    dx[r * cols + c] += gv;
                }
                accumulate(grads, *x, self.val(*x).shape(), &dx);
            }
            Op::GaussianLogProb {
                mean,
                log_std,
                actions,
                dim,
            } => {
                let (md, sd) = (self.val(*mean).data(), self.val(*log_std).data());
                let dim = *dim;
                let mut dm = vec![0.0; md.len()];
                let mut ds = vec![0.0; dim];
                for (r, &gv) in gd.iter().enumerate() {
                    for d in 0..dim {
                        let inv_var = (-2.0 * sd[d]).exp();
                        let diff = actions[r * dim + d] - md[r * dim + d];
                        dm[r * dim + d] = gv * diff * inv_var;
                        ds[d] += gv * (diff * diff * inv_var - 1.0);
                    }
                }
                if self.wants(*mean) {
                    accumulate(grads, *mean, self.val(*mean).shape(), &dm);
                }
                if self.wants(*log_std) {
                    accumulate(grads, *log_std, self.val(*log_std).shape(), &ds);
                }
            }
        }
    }

    fn conv1d_backward(
        &self,
        gd: &[f64],
        x: usize,
        w: usize,
        b: usize,
        geom: ConvGeom,
        grads: &mut [Option<Tensor>],
    ) {
        let ConvGeom {
            batch,
            cin,
            cout,
            len,
            kernel,
            stride,
            lout,
        } = geom;
        let (xd, wd) = (self.val(x).data(), self.val(w).data());
        if self.wants(b) {
            let mut db = vec![0.0; cout];
            for n in 0..batch {
                for (co, d) in db.iter_mut().enumerate() {
                    *d += gd[(n * cout + co) * lout..(n * cout + co + 1) * lout]
                        .iter()
                        .sum::<f64>();
                }
            }
            accumulate(grads, b, self.val(b).shape(), &db);
        }
        if self.wants(w) {
            let mut dw = vec![0.0; cout * cin * kernel];
            for n in 0..batch {
                for co in 0..cout {
                    let grow = &gd[(n * cout + co) * lout..(n * cout + co + 1) * lout];
                    for ci in 0..cin {
                        let xrow = &xd[(n * cin + ci) * len..(n * cin + ci + 1) * len];
                        for k in 0..kernel {
                            let mut acc = 0.0;
                            for (t, &gv) in grow.iter().enumerate() {
                                acc += gv * xrow[t * stride + k];
                            }
                            dw[(co * cin + ci) * kernel + k] += acc;
                        }
                    }
                }
            }
            accumulate(grads, w, self.val(w).shape(), &dw);
        }
        if self.wants(x) {
            let mut dx = vec![0.0; batch * cin * len];
            for n in 0..batch {
                for co in 0..cout {
                    let grow = &gd[(n * cout + co) * lout..(n * cout + co + 1) * lout];
                    for ci in 0..cin {
                        let dxrow = &mut dx[(n * cin + ci) * len..(n * cin + ci + 1) * len];
                        for k in 0..kernel {
                            let wv = wd[(co * cin + ci) * kernel + k];
                            for (t, &gv) in grow.iter().enumerate() {
                                dxrow[t * stride + k] += wv * gv;
                            }
                        }
                    }
                }
            }
            accumulate(grads, x, self.val(x).shape(), &dx);
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], i: usize, shape: &[usize], delta: &[f64]) {
    match &mut grads[i] {
        Some(t) => {
            for (a, d) in t.data_mut().iter_mut().zip(delta) {
                *a += d;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(shape.to_vec(), delta.to_vec()).expect("gradient shape"));
        }
    }
}

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}
