//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its output value; [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients into every node that
//! (transitively) depends on a leaf created with `requires_grad`.

use super::conv::{conv3d_backward, conv3d_forward, ConvGeom};
use super::real::{gemm_nn, gemm_nt, gemm_tn};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv3d {
        input: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeom,
    },
    LeakyRelu {
        input: Var,
        slope: f64,
    },
    Add(Var, Var),
    Square(Var),
    Sum(Var),
    TemporalCompress {
        input: Var,
        weight: Var,
        group: usize,
    },
    MaxPool2 {
        input: Var,
        argmax: Vec<u32>,
    },
    SpatialMax {
        input: Var,
        argmax: Vec<u32>,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
    },
    Triplet {
        embeddings: Var,
        subjects: Vec<usize>,
        margin: f64,
    },
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

#[derive(Default)]
pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bytes held by node values (the tape's activation footprint).
    pub fn value_bytes(&self) -> usize {
        self.nodes.iter().map(|n| n.value.numel()).sum::<usize>() * std::mem::size_of::<T>()
    }

    /// Adds an input or parameter. Gradients flow only into leaves with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Same-padded stride-1 3D convolution of a `C×T×H×W` input.
    ///
    /// `band_rows` splits the height into independently padded bands
    /// (`None` = whole height). A kernel with a leading band axis gives every
    /// band its own weights.
    pub fn conv3d(&mut self, input: Var, kernel: Var, bias: Var, band_rows: Option<usize>) -> Result<Var> {
        let ish = self.shape(input).to_vec();
        let ksh = self.shape(kernel).to_vec();
        if ish.len() != 4 {
            return Err(Error::shape("conv3d", format!("input must be C×T×H×W, got {ish:?}")));
        }
        let (c, t, h, w) = (ish[0], ish[1], ish[2], ish[3]);
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::shape("conv3d", "input extents must be >= 1"));
        }
        let band = band_rows.unwrap_or(h);
        if band == 0 || h % band != 0 {
            return Err(Error::shape(
                "conv3d",
                format!("band of {band} rows does not tile height {h}"),
            ));
        }
        let per_band = match ksh.len() {
            5 => false,
            6 if ksh[0] == h / band => true,
            _ => {
                return Err(Error::shape(
                    "conv3d",
                    format!("kernel shape {ksh:?} incompatible with {} bands", h / band),
                ))
            }
        };
        let k = if per_band { &ksh[1..] } else { &ksh[..] };
        let (co, kci, kt, ks, ks2) = (k[0], k[1], k[2], k[3], k[4]);
        if kci != c {
            return Err(Error::shape(
                "conv3d",
                format!("kernel expects {kci} input channels, input has {c}"),
            ));
        }
        if kt % 2 == 0 || ks % 2 == 0 || ks != ks2 {
            return Err(Error::shape(
                "conv3d",
                format!("kernel extents must be odd and square, got {ksh:?}"),
            ));
        }
        let geom = ConvGeom {
            in_channels: c,
            out_channels: co,
            frames: t,
            height: h,
            width: w,
            temporal_kernel: kt,
            spatial_kernel: ks,
            band_rows: band,
            per_band_weights: per_band,
        };
        if self.shape(bias) != geom.bias_shape().as_slice() {
            return Err(Error::shape(
                "conv3d",
                format!("bias shape {:?}, expected {:?}", self.shape(bias), geom.bias_shape()),
            ));
        }
        let out = conv3d_forward(
            &geom,
            self.value(input).data(),
            self.value(kernel).data(),
            self.value(bias).data(),
        );
        let value = Tensor::new(&[co, t, h, w], out)?;
        let rg = self.needs(&[input, kernel, bias]);
        Ok(self.push(
            value,
            Op::Conv3d {
                input,
                kernel,
                bias,
                geom,
            },
            rg,
        ))
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Var {
        let s = T::of_f64(slope);
        let x = self.value(input);
        let data = x
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { v * s })
            .collect();
        let value = Tensor::new(x.shape(), data).expect("same shape");
        let rg = self.needs(&[input]);
        self.push(value, Op::LeakyRelu { input, slope }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape("add", format!("{:?} vs {:?}", va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| *x + *y).collect();
        let value = Tensor::new(va.shape(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn square(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let value = Tensor::new(x.shape(), x.data().iter().map(|v| *v * *v).collect()).expect("same shape");
        let rg = self.needs(&[input]);
        self.push(value, Op::Square(input), rg)
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).data().iter().copied().sum();
        let rg = self.needs(&[input]);
        self.push(Tensor::scalar(total), Op::Sum(input), rg)
    }

    /// Grouped temporal compression: consecutive groups of `weight.len()`
    /// frames collapse to one frame via a dot product with the shared weight.
    pub fn temporal_compress(&mut self, input: Var, weight: Var) -> Result<Var> {
        let sh = self.shape(input).to_vec();
        if sh.len() != 4 {
            return Err(Error::shape(
                "temporal_compress",
                format!("input must be C×T×H×W, got {sh:?}"),
            ));
        }
        let wsh = self.shape(weight);
        if wsh.len() != 1 || wsh[0] == 0 {
            return Err(Error::shape(
                "temporal_compress",
                format!("weight must be a vector, got {wsh:?}"),
            ));
        }
        let g = wsh[0];
        let (c, t, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        if t % g != 0 {
            return Err(Error::shape(
                "temporal_compress",
                format!("group size {g} does not divide {t} frames"),
            ));
        }
        let groups = t / g;
        let plane = h * w;
        let x = self.value(input).data();
        let wt = self.value(weight).data();
        let mut out = vec![T::zero(); c * groups * plane];
        for ch in 0..c {
            for i in 0..groups {
                let dst = &mut out[(ch * groups + i) * plane..][..plane];
                for (j, &wj) in wt.iter().enumerate() {
                    let src = &x[(ch * t + i * g + j) * plane..][..plane];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += wj * *s;
                    }
                }
            }
        }
        let value = Tensor::new(&[c, groups, h, w], out)?;
        let rg = self.needs(&[input, weight]);
        Ok(self.push(
            value,
            Op::TemporalCompress {
                input,
                weight,
                group: g,
            },
            rg,
        ))
    }

    /// Per-frame 2×2 max pooling with stride 2; odd edges pool the partial window.
    pub fn max_pool2(&mut self, input: Var) -> Result<Var> {
        let sh = self.shape(input).to_vec();
        if sh.len() != 4 || sh.contains(&0) {
            return Err(Error::shape(
                "max_pool2",
                format!("input must be non-empty C×T×H×W, got {sh:?}"),
            ));
        }
        let (c, t, h, w) = (sh[0], sh[1], sh[2], sh[3]);
        let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(c * t * oh * ow);
        let mut argmax = Vec::with_capacity(c * t * oh * ow);
        for f in 0..c * t {
            let base = f * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for y in 2 * oy..(2 * oy + 2).min(h) {
                        for xx in 2 * ox..(2 * ox + 2).min(w) {
                            let idx = base + y * w + xx;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best as u32);
                }
            }
        }
        let value = Tensor::new(&[c, t, oh, ow], out)?;
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::MaxPool2 { input, argmax }, rg))
    }

    /// Max over `H×W` for every (channel, frame), flattened to a `C·T` vector.
    pub fn spatial_max(&mut self, input: Var) -> Result<Var> {
        let sh = self.shape(input).to_vec();
        if sh.len() != 4 || sh.contains(&0) {
            return Err(Error::shape(
                "spatial_max",
                format!("input must be non-empty C×T×H×W, got {sh:?}"),
            ));
        }
        let plane = sh[2] * sh[3];
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(sh[0] * sh[1]);
        let mut argmax = Vec::with_capacity(sh[0] * sh[1]);
        for (f, chunk) in x.chunks(plane).enumerate() {
            let mut best = 0;
            for (i, v) in chunk.iter().enumerate() {
                if *v > chunk[best] {
                    best = i;
                }
            }
            out.push(chunk[best]);
            argmax.push((f * plane + best) as u32);
        }
        let value = Tensor::new(&[sh[0] * sh[1]], out)?;
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::SpatialMax { input, argmax }, rg))
    }

    /// `y = x·Wᵀ + b` for `x` of shape `D` or `N×D`, `W` of shape `O×D`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(input).to_vec();
        let ws = self.shape(weight).to_vec();
        let bs = self.shape(bias).to_vec();
        let (n, d, batched) = match xs.len() {
            1 => (1, xs[0], false),
            2 => (xs[0], xs[1], true),
            _ => return Err(Error::shape("linear", format!("input must be D or N×D, got {xs:?}"))),
        };
        if ws.len() != 2 || ws[1] != d {
            return Err(Error::shape(
                "linear",
                format!("weight {ws:?} does not accept inner extent {d}"),
            ));
        }
        let o = ws[0];
        if bs != [o] {
            return Err(Error::shape("linear", format!("bias {bs:?}, expected [{o}]")));
        }
        let mut out = vec![T::zero(); n * o];
        for row in out.chunks_mut(o) {
            row.copy_from_slice(self.value(bias).data());
        }
        gemm_nt(
            n,
            d,
            o,
            self.value(input).data(),
            self.value(weight).data(),
            T::one(),
            &mut out,
        );
        let shape: Vec<usize> = if batched { vec![n, o] } else { vec![o] };
        let value = Tensor::new(&shape, out)?;
        let rg = self.needs(&[input, weight, bias]);
        Ok(self.push(value, Op::Linear { input, weight, bias }, rg))
    }

    /// Mean softmax cross-entropy over rows of `N×C` logits (or a single `C` vector).
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let sh = self.shape(logits).to_vec();
        let (n, c) = match sh.len() {
            1 => (1, sh[0]),
            2 => (sh[0], sh[1]),
            _ => return Err(Error::shape("cross_entropy", format!("logits {sh:?}"))),
        };
        if targets.len() != n || targets.iter().any(|&t| t >= c) || n == 0 {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} targets for {n} rows of {c} classes", targets.len()),
            ));
        }
        let y = self.value(logits).data();
        let mut total = 0.0f64;
        for (row, &t) in y.chunks(c).zip(targets) {
            total += -log_softmax(row)[t];
        }
        let value = Tensor::scalar(T::of_f64(total / n as f64));
        let rg = self.needs(&[logits]);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
            rg,
        ))
    }

    /// Batch-all triplet loss on `N×D` embeddings with Euclidean distance:
    /// mean of `max(d(a,p) - d(a,n) + margin, 0)` over the strictly positive
    /// terms of every (anchor, positive, negative) triple.
    pub fn triplet_batch_all(&mut self, embeddings: Var, subjects: &[usize], margin: f64) -> Result<Var> {
        let sh = self.shape(embeddings).to_vec();
        if sh.len() != 2 || sh[0] != subjects.len() {
            return Err(Error::shape(
                "triplet_batch_all",
                format!("embeddings {sh:?} vs {} subject ids", subjects.len()),
            ));
        }
        if !has_valid_triplet(subjects) {
            return Err(Error::InvalidArgument(
                "triplet batch needs at least two subjects and one subject with two samples".into(),
            ));
        }
        let dist = pairwise_distances(self.value(embeddings));
        let n = subjects.len();
        let (mut sum, mut count) = (0.0f64, 0usize);
        for_each_triplet(subjects, |a, p, q| {
            let l = dist[a * n + p] - dist[a * n + q] + margin;
            if l > 0.0 {
                sum += l;
                count += 1;
            }
        });
        let loss = if count > 0 { sum / count as f64 } else { 0.0 };
        let rg = self.needs(&[embeddings]);
        Ok(self.push(
            Tensor::scalar(T::of_f64(loss)),
            Op::Triplet {
                embeddings,
                subjects: subjects.to_vec(),
                margin,
            },
            rg,
        ))
    }

    /// Backward sweep from a scalar output (seed gradient 1).
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        if self.value(output).numel() != 1 {
            return Err(Error::shape("backward", "output must be a scalar; use backward_with"));
        }
        self.backward_with(output, Tensor::scalar(T::one()).reshape(self.shape(output))?)
    }

    /// Backward sweep with an explicit upstream gradient for `output`.
    pub fn backward_with(&self, output: Var, seed: Tensor<T>) -> Result<Gradients<T>> {
        if seed.shape() != self.shape(output) {
            return Err(Error::shape(
                "backward",
                format!("seed {:?} for output {:?}", seed.shape(), self.shape(output)),
            ));
        }
        if !seed.is_finite() {
            return Err(Error::NonFinite("backward seed".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "gradient of node {i} ({:?})",
                        op_name(&self.nodes[i].op)
                    )));
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv3d {
                input,
                kernel,
                bias,
                geom,
            } => {
                let need_input = self.nodes[input.0].requires_grad;
                let cg = conv3d_backward(
                    geom,
                    self.value(*input).data(),
                    self.value(*kernel).data(),
                    gd,
                    need_input,
                );
                if let Some(di) = cg.input {
                    accumulate(grads, self, *input, &di);
                }
                accumulate(grads, self, *kernel, &cg.kernel);
                accumulate(grads, self, *bias, &cg.bias);
            }
            Op::LeakyRelu { input, slope } => {
                let s = T::of_f64(*slope);
                let x = self.value(*input).data();
                let d: Vec<T> = x
                    .iter()
                    .zip(gd)
                    .map(|(&xv, &gv)| if xv > T::zero() { gv } else { gv * s })
                    .collect();
                accumulate(grads, self, *input, &d);
            }
            Op::Add(a, b) => {
                accumulate(grads, self, *a, gd);
                accumulate(grads, self, *b, gd);
            }
            Op::Square(input) => {
                let two = T::of_f64(2.0);
                let d: Vec<T> = self
                    .value(*input)
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(&x, &gv)| two * x * gv)
                    .collect();
                accumulate(grads, self, *input, &d);
            }
            Op::Sum(input) => {
                let d = vec![gd[0]; self.value(*input).numel()];
                accumulate(grads, self, *input, &d);
            }
            Op::TemporalCompress { input, weight, group } => {
                let sh = self.shape(*input);
                let (c, t, plane) = (sh[0], sh[1], sh[2] * sh[3]);
                let groups = t / group;
                let x = self.value(*input).data();
                let wt = self.value(*weight).data();
                if self.nodes[input.0].requires_grad {
                    let mut dx = vec![T::zero(); x.len()];
                    for ch in 0..c {
                        for i in 0..groups {
                            let src = &gd[(ch * groups + i) * plane..][..plane];
                            for (j, &wj) in wt.iter().enumerate() {
                                let dst = &mut dx[(ch * t + i * group + j) * plane..][..plane];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d = wj * *s;
                                }
                            }
                        }
                    }
                    accumulate(grads, self, *input, &dx);
                }
                let mut dw = vec![T::zero(); *group];
                for ch in 0..c {
                    for i in 0..groups {
                        let go = &gd[(ch * groups + i) * plane..][..plane];
                        for (j, dwj) in dw.iter_mut().enumerate() {
                            let src = &x[(ch * t + i * group + j) * plane..][..plane];
                            *dwj += go.iter().zip(src).map(|(a, b)| *a * *b).sum::<T>();
                        }
                    }
                }
                accumulate(grads, self, *weight, &dw);
            }
            Op::MaxPool2 { input, argmax } | Op::SpatialMax { input, argmax } => {
                let mut dx = vec![T::zero(); self.value(*input).numel()];
                for (&src, &gv) in argmax.iter().zip(gd) {
                    dx[src as usize] += gv;
                }
                accumulate(grads, self, *input, &dx);
            }
            Op::Linear { input, weight, bias } => {
                let xs = self.shape(*input);
                let (n, d) = if xs.len() == 1 { (1, xs[0]) } else { (xs[0], xs[1]) };
                let o = self.shape(*weight)[0];
                if self.nodes[input.0].requires_grad {
                    let mut dx = vec![T::zero(); n * d];
                    gemm_nn(n, o, d, gd, self.value(*weight).data(), T::zero(), &mut dx);
                    accumulate(grads, self, *input, &dx);
                }
                let mut dw = vec![T::zero(); o * d];
                gemm_tn(o, n, d, gd, self.value(*input).data(), T::zero(), &mut dw);
                accumulate(grads, self, *weight, &dw);
                let mut db = vec![T::zero(); o];
                for row in gd.chunks(o) {
                    for (acc, v) in db.iter_mut().zip(row) {
                        *acc += *v;
                    }
                }
                accumulate(grads, self, *bias, &db);
            }
            Op::CrossEntropy { logits, targets } => {
                let y = self.value(*logits).data();
                let c = y.len() / targets.len();
                let scale = gd[0].as_f64() / targets.len() as f64;
                let mut dy = Vec::with_capacity(y.len());
                for (row, &t) in y.chunks(c).zip(targets) {
                    let ls = log_softmax(row);
                    for (i, l) in ls.iter().enumerate() {
                        let onehot = if i == t { 1.0 } else { 0.0 };
                        dy.push(T::of_f64(scale * (l.exp() - onehot)));
                    }
                }
                accumulate(grads, self, *logits, &dy);
            }
            Op::Triplet {
                embeddings,
                subjects,
                margin,
            } => {
                let e = self.value(*embeddings);
                let d = e.shape()[1];
                let n = subjects.len();
                let x: Vec<f64> = e.data().iter().map(|v| v.as_f64()).collect();
                let dist = pairwise_distances(e);
                let mut active = Vec::new();
                for_each_triplet(subjects, |a, p, q| {
                    if dist[a * n + p] - dist[a * n + q] + margin > 0.0 {
                        active.push((a, p, q));
                    }
                });
                let mut de = vec![0.0f64; n * d];
                if !active.is_empty() {
                    let scale = gd[0].as_f64() / active.len() as f64;
                    for (a, p, q) in active {
                        add_distance_grad(&x, d, &dist, n, a, p, scale, &mut de);
                        add_distance_grad(&x, d, &dist, n, a, q, -scale, &mut de);
                    }
                }
                let de: Vec<T> = de.into_iter().map(T::of_f64).collect();
                accumulate(grads, self, *embeddings, &de);
            }
        }
        Ok(())
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], graph: &Graph<T>, var: Var, delta: &[T]) {
    let node = &graph.nodes[var.0];
    if !node.requires_grad {
        return;
    }
    match &mut grads[var.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(delta) {
                *a += *b;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(node.value.shape(), delta.to_vec()).expect("gradient shape"));
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Conv3d { .. } => "conv3d",
        Op::LeakyRelu { .. } => "leaky_relu",
        Op::Add(..) => "add",
        Op::Square(_) => "square",
        Op::Sum(_) => "sum",
        Op::TemporalCompress { .. } => "temporal_compress",
        Op::MaxPool2 { .. } => "max_pool2",
        Op::SpatialMax { .. } => "spatial_max",
        Op::Linear { .. } => "linear",
        Op::CrossEntropy { .. } => "cross_entropy",
        Op::Triplet { .. } => "triplet",
    }
}

/// Numerically stable log-softmax of one row, in double precision.
pub(crate) fn log_softmax<T: Real>(row: &[T]) -> Vec<f64> {
    let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v.as_f64() - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v.as_f64() - lse).collect()
}

fn pairwise_distances<T: Real>(e: &Tensor<T>) -> Vec<f64> {
    let (n, d) = (e.shape()[0], e.shape()[1]);
    let x = e.data();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = x[i * d..(i + 1) * d]
                .iter()
                .zip(&x[j * d..(j + 1) * d])
                .map(|(a, b)| {
                    let diff = a.as_f64() - b.as_f64();
                    diff * diff
                })
                .sum();
            dist[i * n + j] = s.sqrt();
            dist[j * n + i] = dist[i * n + j];
        }
    }
    dist
}

/// d/dx of `scale·‖x_a − x_b‖` added into `out`. Zero distance contributes nothing.
#[allow(clippy::too_many_arguments)]
fn add_distance_grad(x: &[f64], d: usize, dist: &[f64], n: usize, a: usize, b: usize, scale: f64, out: &mut [f64]) {
    let dab = dist[a * n + b];
    if dab <= 0.0 {
        return;
    }
    for k in 0..d {
        let u = scale * (x[a * d + k] - x[b * d + k]) / dab;
        out[a * d + k] += u;
        out[b * d + k] -= u;
    }
}

pub(crate) fn has_valid_triplet(subjects: &[usize]) -> bool {
    let mut any_pair = false;
    let mut distinct = std::collections::BTreeSet::new();
    for (i, s) in subjects.iter().enumerate() {
        distinct.insert(*s);
        if subjects[i + 1..].contains(s) {
            any_pair = true;
        }
    }
    any_pair && distinct.len() >= 2
}

/// Every (anchor, positive, negative) index triple: same subject for the
/// positive (distinct index), different subject for the negative.
pub(crate) fn for_each_triplet(subjects: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let n = subjects.len();
    for a in 0..n {
        for p in 0..n {
            if p == a || subjects[p] != subjects[a] {
                continue;
            }
            for q in 0..n {
                if subjects[q] != subjects[a] {
                    f(a, p, q);
                }
            }
        }
    }
}
