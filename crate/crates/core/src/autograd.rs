//! Reverse-mode differentiation over a tape of dense matrix operations,
//! fully connected ReLU networks, and the GAN value
//!
//! ```text
//! V(θ, φ) = mean log σ(D(x; φ)) + mean log(1 − σ(D(G(z; θ); φ)))
//! ```
//!
//! where `D` outputs a logit. Nodes are whole matrices, so a batch of 256
//! samples through a layer is one `MatMul` node.
//!
//! ```
//! use centripetal::autograd::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(2.0), true);
//! let y = tape.leaf(Tensor::scalar(3.0), true);
//! let f = tape.mul(x, y).unwrap();
//! tape.backward(f).unwrap();
//! assert_eq!(tape.grad(x).unwrap().data(), &[3.0]);
//! assert_eq!(tape.grad(y).unwrap().data(), &[2.0]);
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix used for tape values and adjoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn row(v: &[f64]) -> Self {
        Tensor { rows: 1, cols: v.len(), data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `a (m×k) · b (k×n)`.
fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in out_row.iter_mut().zip(&b.data[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    Tensor { rows: m, cols: n, data: out }
}

/// `a (m×n) · bᵀ` for `b (k×n)`.
fn matmul_bt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, n, k) = (a.rows, a.cols, b.rows);
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let ar = &a.data[i * n..(i + 1) * n];
        for p in 0..k {
            let br = &b.data[p * n..(p + 1) * n];
            out[i * k + p] = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        }
    }
    Tensor { rows: m, cols: k, data: out }
}

/// `aᵀ · b` for `a (m×k)`, `b (m×n)`.
fn matmul_at(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let br = &b.data[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in out[p * n..(p + 1) * n].iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    Tensor { rows: k, cols: n, data: out }
}

/// `log(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `1 / (1 + e⁻ˣ)` without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub type NodeId = usize;

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// Adds a `1×n` row to every row of an `m×n` input.
    AddRow(NodeId, NodeId),
    Relu(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Mean over all entries of `log σ(x)`.
    MeanLogSigmoid(NodeId),
    /// Mean over all entries of `log(1 − σ(x))`.
    MeanLogOneMinusSigmoid(NodeId),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Append-only record of a computation. Inputs always precede their users,
/// so one reverse sweep fills every adjoint reachable from the output.
///
/// Nodes that depend on no leaf created with `requires_grad` are skipped by
/// the backward sweep, and so are the products feeding them.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    adjoints: Option<Vec<Option<Tensor>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.adjoints = None;
        self.nodes.push(Node { op, value, needs_grad });
        self.nodes.len() - 1
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::State(format!("node {id} is not on this tape")))
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.push(Op::Leaf, value, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, false)
    }

    pub fn value(&self, id: NodeId) -> Result<&Tensor> {
        Ok(&self.node(id)?.value)
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.node(a)?.value, &self.node(b)?.value);
        if av.cols != bv.rows {
            return Err(Error::Dimension(format!("matmul {:?} · {:?}", av.shape(), bv.shape())));
        }
        let v = matmul(av, bv);
        let ng = self.needs(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), v, ng))
    }

    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> Result<NodeId> {
        let (xv, rv) = (&self.node(x)?.value, &self.node(row)?.value);
        if rv.rows != 1 || rv.cols != xv.cols {
            return Err(Error::Dimension(format!("add row {:?} to {:?}", rv.shape(), xv.shape())));
        }
        let mut v = xv.clone();
        for r in v.data.chunks_mut(v.cols) {
            for (o, b) in r.iter_mut().zip(&rv.data) {
                *o += b;
            }
        }
        let ng = self.needs(&[x, row]);
        Ok(self.push(Op::AddRow(x, row), v, ng))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let mut v = self.node(x)?.value.clone();
        for o in &mut v.data {
            *o = o.max(0.0);
        }
        let ng = self.needs(&[x]);
        Ok(self.push(Op::Relu(x), v, ng))
    }

    fn same_shape(&self, a: NodeId, b: NodeId) -> Result<()> {
        let (av, bv) = (&self.node(a)?.value, &self.node(b)?.value);
        if av.shape() != bv.shape() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", av.shape(), bv.shape())));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b)?;
        let mut v = self.nodes[a].value.clone();
        v.add_assign(&self.nodes[b].value);
        let ng = self.needs(&[a, b]);
        Ok(self.push(Op::Add(a, b), v, ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b)?;
        let mut v = self.nodes[a].value.clone();
        for (o, y) in v.data.iter_mut().zip(&self.nodes[b].value.data) {
            *o *= y;
        }
        let ng = self.needs(&[a, b]);
        Ok(self.push(Op::Mul(a, b), v, ng))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let mut v = self.node(a)?.value.clone();
        for o in &mut v.data {
            *o *= c;
        }
        let ng = self.needs(&[a]);
        Ok(self.push(Op::Scale(a, c), v, ng))
    }

    fn mean_of(&mut self, x: NodeId, op: Op, f: impl Fn(f64) -> f64) -> Result<NodeId> {
        let xv = &self.node(x)?.value;
        if xv.data.is_empty() {
            return Err(Error::Dimension("mean over an empty tensor".into()));
        }
        let m = xv.data.iter().map(|&z| f(z)).sum::<f64>() / xv.data.len() as f64;
        let ng = self.needs(&[x]);
        Ok(self.push(op, Tensor::scalar(m), ng))
    }

    pub fn mean_log_sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.mean_of(x, Op::MeanLogSigmoid(x), |z| -softplus(-z))
    }

    pub fn mean_log_one_minus_sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.mean_of(x, Op::MeanLogOneMinusSigmoid(x), |z| -softplus(z))
    }

    /// Fills the adjoint of every node that `output` depends on through
    /// gradient-requiring leaves. `output` must be 1×1.
    pub fn backward(&mut self, output: NodeId) -> Result<()> {
        let out = self.node(output)?;
        if out.value.shape() != (1, 1) {
            return Err(Error::State(format!("backward from a {:?} node, expected a scalar", out.value.shape())));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[output] = Some(Tensor::scalar(1.0));
        for id in (0..=output).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[id].take() else { continue };
            let accumulate = |adj: &mut Vec<Option<Tensor>>, target: NodeId, t: Tensor| match &mut adj[target] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            };
            match node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj, a, matmul_bt(&g, &self.nodes[b].value));
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut adj, b, matmul_at(&self.nodes[a].value, &g));
                    }
                }
                Op::AddRow(x, row) => {
                    if self.nodes[row].needs_grad {
                        let mut s = Tensor::zeros(1, g.cols);
                        for r in g.data.chunks(g.cols) {
                            for (o, v) in s.data.iter_mut().zip(r) {
                                *o += v;
                            }
                        }
                        accumulate(&mut adj, row, s);
                    }
                    if self.nodes[x].needs_grad {
                        accumulate(&mut adj, x, g.clone());
                    }
                }
                Op::Relu(x) => {
                    let mut d = g.clone();
                    // Subgradient 0 at exactly 0.
                    for (o, y) in d.data.iter_mut().zip(&node.value.data) {
                        if *y <= 0.0 {
                            *o = 0.0;
                        }
                    }
                    accumulate(&mut adj, x, d);
                }
                Op::Add(a, b) => {
                    if self.nodes[a].needs_grad {
                        accumulate(&mut adj, a, g.clone());
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut adj, b, g.clone());
                    }
                }
                Op::Mul(a, b) => {
                    for (t, other) in [(a, b), (b, a)] {
                        if self.nodes[t].needs_grad {
                            let mut d = g.clone();
                            for (o, y) in d.data.iter_mut().zip(&self.nodes[other].value.data) {
                                *o *= y;
                            }
                            accumulate(&mut adj, t, d);
                        }
                    }
                }
                Op::Scale(a, c) => {
                    let mut d = g.clone();
                    d.data.iter_mut().for_each(|o| *o *= c);
                    accumulate(&mut adj, a, d);
                }
                Op::MeanLogSigmoid(x) | Op::MeanLogOneMinusSigmoid(x) => {
                    let xv = &self.nodes[x].value;
                    let w = g.data[0] / xv.data.len() as f64;
                    let real_term = matches!(node.op, Op::MeanLogSigmoid(_));
                    // d/dz log σ(z) = σ(−z); d/dz log(1 − σ(z)) = −σ(z).
                    let data = xv
                        .data
                        .iter()
                        .map(|&z| if real_term { w * sigmoid(-z) } else { -w * sigmoid(z) })
                        .collect();
                    accumulate(&mut adj, x, Tensor { rows: xv.rows, cols: xv.cols, data });
                }
            }
            // Leaves keep their adjoint for `grad`.
            if matches!(node.op, Op::Leaf) {
                adj[id] = Some(g);
            }
        }
        self.adjoints = Some(adj);
        Ok(())
    }

    /// Adjoint of a leaf after [`Tape::backward`]. Leaves that do not require
    /// gradients, or that the output does not depend on, give zeros.
    pub fn grad(&self, id: NodeId) -> Result<Tensor> {
        let adj = self
            .adjoints
            .as_ref()
            .ok_or_else(|| Error::State("backward has not run on this tape".into()))?;
        let node = self.node(id)?;
        Ok(adj[id].clone().unwrap_or_else(|| Tensor::zeros(node.value.rows, node.value.cols)))
    }
}

/// Fully connected network: ReLU on hidden layers, linear output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
}

/// Where one layer's weights (`fan_in × fan_out`, row-major) and biases sit
/// in a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSlices {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: Range<usize>,
    pub bias: Range<usize>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = MlpSpec { input_dim, hidden_widths, output_dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() {
            return Err(Error::Configuration("a network needs at least one hidden layer".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Configuration(format!("layer widths must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_widths);
        w.push(self.output_dim);
        w
    }

    pub fn layout(&self) -> Vec<LayerSlices> {
        let w = self.widths();
        let mut at = 0;
        w.windows(2)
            .map(|p| {
                let (fi, fo) = (p[0], p[1]);
                let weight = at..at + fi * fo;
                let bias = weight.end..weight.end + fo;
                at = bias.end;
                LayerSlices { fan_in: fi, fan_out: fo, weight, bias }
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layout().last().map_or(0, |l| l.bias.end)
    }
}

/// Flat network parameters checked against a spec's layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    spec: MlpSpec,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(spec: MlpSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        check_params(&spec, &values)?;
        Ok(ParamVector { spec, values })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_params(spec: &MlpSpec, values: &[f64]) -> Result<()> {
    if values.len() != spec.param_count() {
        return Err(Error::Dimension(format!(
            "{} parameters for a network with {}",
            values.len(),
            spec.param_count()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InputDomain("non-finite network parameter".into()));
    }
    Ok(())
}

/// He initialization: weights `N(0, 2/fan_in)`, biases 0.
pub fn init_params(spec: &MlpSpec, seed: u64) -> Result<ParamVector> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; spec.param_count()];
    for l in spec.layout() {
        let normal = Normal::new(0.0, (2.0 / l.fan_in as f64).sqrt()).expect("positive std");
        for v in &mut values[l.weight] {
            *v = normal.sample(&mut rng);
        }
    }
    ParamVector::new(spec.clone(), values)
}

/// Tape leaves holding one network's parameters.
#[derive(Clone, Debug)]
pub struct Binding {
    layers: Vec<(NodeId, NodeId)>,
    layout: Vec<LayerSlices>,
    len: usize,
}

/// Places `params` on the tape as per-layer weight and bias leaves.
pub fn bind(tape: &mut Tape, spec: &MlpSpec, params: &[f64], requires_grad: bool) -> Result<Binding> {
    check_params(spec, params)?;
    let layout = spec.layout();
    let layers = layout
        .iter()
        .map(|l| {
            let w = Tensor { rows: l.fan_in, cols: l.fan_out, data: params[l.weight.clone()].to_vec() };
            let b = Tensor::row(&params[l.bias.clone()]);
            (tape.leaf(w, requires_grad), tape.leaf(b, requires_grad))
        })
        .collect();
    Ok(Binding { layers, layout, len: params.len() })
}

/// Runs the network on `input` (one sample per row) and returns the output
/// node.
pub fn mlp_on_tape(tape: &mut Tape, binding: &Binding, input: NodeId) -> Result<NodeId> {
    let mut h = input;
    let last = binding.layers.len() - 1;
    for (i, &(w, b)) in binding.layers.iter().enumerate() {
        h = tape.matmul(h, w)?;
        h = tape.add_row(h, b)?;
        if i < last {
            h = tape.relu(h)?;
        }
    }
    Ok(h)
}

/// Gradient of the taped output with respect to a bound parameter set, in
/// the flat layout. Requires [`Tape::backward`] to have run.
pub fn backward(tape: &Tape, wrt: &Binding) -> Result<Vec<f64>> {
    let mut out = vec![0.0; wrt.len];
    for (&(w, b), l) in wrt.layers.iter().zip(&wrt.layout) {
        out[l.weight.clone()].copy_from_slice(tape.grad(w)?.data());
        out[l.bias.clone()].copy_from_slice(tape.grad(b)?.data());
    }
    Ok(out)
}

/// Network output for a single input vector, with the tape that computed it.
pub fn forward_mlp(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
    if input.len() != spec.input_dim {
        return Err(Error::Dimension(format!("input of length {} for input_dim {}", input.len(), spec.input_dim)));
    }
    let mut tape = Tape::new();
    let binding = bind(&mut tape, spec, params.values(), true)?;
    let x = tape.constant(Tensor::row(input));
    let y = mlp_on_tape(&mut tape, &binding, x)?;
    let out = tape.value(y)?.data().to_vec();
    Ok((out, tape))
}

/// A network spec with its current parameters.
#[derive(Clone, Copy, Debug)]
pub struct Net<'a> {
    pub spec: &'a MlpSpec,
    pub params: &'a [f64],
}

/// Which players' gradients an evaluation of the GAN value must produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradRequest {
    /// `∇θV` only. The real-data term is skipped: it does not depend on `θ`.
    Generator,
    /// `∇φV` only. The generator runs without gradient tracking.
    Discriminator,
    Both,
}

/// A taped evaluation of the GAN value.
#[derive(Clone, Debug)]
pub struct GanEval {
    /// `V` when both terms were computed; for [`GradRequest::Generator`]
    /// only the fake-sample term.
    pub value: f64,
    pub tape: Tape,
    pub generator: Binding,
    pub discriminator: Binding,
    output: NodeId,
}

impl GanEval {
    pub fn grad_theta(&mut self) -> Result<Vec<f64>> {
        self.ensure_backward()?;
        backward(&self.tape, &self.generator)
    }

    pub fn grad_phi(&mut self) -> Result<Vec<f64>> {
        self.ensure_backward()?;
        backward(&self.tape, &self.discriminator)
    }

    fn ensure_backward(&mut self) -> Result<()> {
        if self.tape.adjoints.is_none() {
            self.tape.backward(self.output)?;
        }
        Ok(())
    }
}

/// The GAN value on a batch, with both players tracked.
pub fn gan_value(gen: Net<'_>, disc: Net<'_>, real: &Tensor, noise: &Tensor) -> Result<GanEval> {
    gan_value_for(gen, disc, real, noise, GradRequest::Both)
}

pub fn gan_value_for(gen: Net<'_>, disc: Net<'_>, real: &Tensor, noise: &Tensor, req: GradRequest) -> Result<GanEval> {
    if real.rows == 0 || noise.rows == 0 {
        return Err(Error::Precondition("GAN batches must be non-empty".into()));
    }
    if disc.spec.output_dim != 1 || gen.spec.output_dim != disc.spec.input_dim {
        return Err(Error::Dimension(format!(
            "generator output {} must feed a discriminator with input {} and one output",
            gen.spec.output_dim, disc.spec.input_dim
        )));
    }
    if real.cols != disc.spec.input_dim || noise.cols != gen.spec.input_dim {
        return Err(Error::Dimension(format!(
            "real batch has {} columns, noise {}; networks expect {} and {}",
            real.cols, noise.cols, disc.spec.input_dim, gen.spec.input_dim
        )));
    }
    let mut tape = Tape::new();
    let track_g = req != GradRequest::Discriminator;
    let track_d = req != GradRequest::Generator;
    let gb = bind(&mut tape, gen.spec, gen.params, track_g)?;
    let db = bind(&mut tape, disc.spec, disc.params, track_d)?;

    let z = tape.constant(noise.clone());
    let fake = mlp_on_tape(&mut tape, &gb, z)?;
    let fake_logit = mlp_on_tape(&mut tape, &db, fake)?;
    let mut output = tape.mean_log_one_minus_sigmoid(fake_logit)?;
    let mut real_logit = None;
    if req != GradRequest::Generator {
        let x = tape.constant(real.clone());
        let rl = mlp_on_tape(&mut tape, &db, x)?;
        let real_term = tape.mean_log_sigmoid(rl)?;
        output = tape.add(real_term, output)?;
        real_logit = Some(rl);
    }

    for (what, id) in [("generator output", Some(fake)), ("fake logit", Some(fake_logit)), ("real logit", real_logit)] {
        let Some(id) = id else { continue };
        let v = tape.value(id)?;
        if let Some(pos) = v.data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite {what} at row {}, column {}: {}",
                pos / v.cols,
                pos % v.cols,
                v.data[pos]
            )));
        }
    }
    let value = tape.value(output)?.data[0];
    Ok(GanEval { value, tape, generator: gb, discriminator: db, output })
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    spec: MlpSpec,
    seed: u64,
    step: usize,
    len: usize,
}

/// Writes one JSON header line `{spec, seed, step, len}` followed by the
/// parameters as little-endian `f64`.
pub fn write_checkpoint(path: impl AsRef<Path>, params: &ParamVector, seed: u64, step: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = CheckpointHeader { spec: params.spec.clone(), seed, step, len: params.values.len() };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in &params.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_checkpoint`]; returns `(params, seed, step)`.
pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ParamVector, u64, usize)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: CheckpointHeader = serde_json::from_slice(&line)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.len * 8 {
        return Err(Error::InputDomain(format!(
            "checkpoint body has {} bytes, header promises {} values",
            bytes.len(),
            header.len
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((ParamVector::new(header.spec, values)?, header.seed, header.step))
}
