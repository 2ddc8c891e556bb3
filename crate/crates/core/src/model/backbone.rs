//! Forward graph of the backbone and recognition head.

use super::config::{ModelConfig, ShapeTrace};
use super::params::ModelParameters;
use crate::data::SilhouetteSequence;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Real, Tensor, Var};

/// Graph leaves for one block's parameters.
#[derive(Clone, Copy, Debug)]
pub struct BlockVars {
    pub local_kernel: Var,
    pub local_bias: Var,
    pub global_kernel: Var,
    pub global_bias: Var,
    pub tcl_weight: Option<Var>,
}

/// Graph leaves for every parameter array, in [`ModelParameters`] order.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub all: Vec<Var>,
    pub blocks: Vec<BlockVars>,
    pub head_weight: Var,
    pub head_bias: Var,
}

impl ParamVars {
    pub fn attach<T: Real>(
        g: &mut Graph<T>,
        cfg: &ModelConfig,
        params: &ModelParameters<T>,
        requires_grad: bool,
    ) -> Result<Self> {
        params.check_layout(cfg)?;
        let all: Vec<Var> = params
            .tensors()
            .iter()
            .map(|t| g.leaf(t.clone(), requires_grad))
            .collect();
        Ok(Self::from_vars(cfg, params.names(), all))
    }

    /// Binds already-created leaves (same order as `names`).
    pub fn from_vars(cfg: &ModelConfig, names: &[String], all: Vec<Var>) -> Self {
        let find = |name: &str| names.iter().position(|n| n == name).map(|i| all[i]);
        let blocks = (1..=cfg.blocks.len())
            .map(|n| BlockVars {
                local_kernel: find(&format!("block{n}.local.kernel")).expect("layout checked"),
                local_bias: find(&format!("block{n}.local.bias")).expect("layout checked"),
                global_kernel: find(&format!("block{n}.global.kernel")).expect("layout checked"),
                global_bias: find(&format!("block{n}.global.bias")).expect("layout checked"),
                tcl_weight: find(&format!("block{n}.tcl.weight")),
            })
            .collect();
        Self {
            head_weight: find("head.weight").expect("layout checked"),
            head_bias: find("head.bias").expect("layout checked"),
            blocks,
            all,
        }
    }

    /// Leaves belonging to the backbone (everything but the head).
    pub fn backbone(&self) -> Vec<Var> {
        self.all
            .iter()
            .copied()
            .filter(|v| *v != self.head_weight && *v != self.head_bias)
            .collect()
    }
}

/// Band-partitioned convolution: `parts` horizontal bands share one kernel
/// (or use their own, when the kernel carries a leading band axis), each padded
/// with zeros at its own borders, then concatenated back in order.
pub fn local_branch<T: Real>(
    g: &mut Graph<T>,
    x: Var,
    parts: usize,
    kernel: Var,
    bias: Var,
    slope: f64,
) -> Result<Var> {
    let h = g.shape(x).get(2).copied().unwrap_or(0);
    if parts == 0 || h % parts != 0 {
        return Err(Error::shape(
            "local_branch",
            format!("{parts} parts do not divide height {h}"),
        ));
    }
    let y = g.conv3d(x, kernel, bias, Some(h / parts))?;
    Ok(g.leaky_relu(y, slope))
}

pub fn global_branch<T: Real>(g: &mut Graph<T>, x: Var, kernel: Var, bias: Var, slope: f64) -> Result<Var> {
    let y = g.conv3d(x, kernel, bias, None)?;
    Ok(g.leaky_relu(y, slope))
}

/// Sum of the local and global branches; each branch is activated before the sum.
pub fn dfe_forward<T: Real>(g: &mut Graph<T>, x: Var, parts: usize, vars: &BlockVars, slope: f64) -> Result<Var> {
    let local = local_branch(g, x, parts, vars.local_kernel, vars.local_bias, slope)?;
    let global = global_branch(g, x, vars.global_kernel, vars.global_bias, slope)?;
    g.add(local, global)
}

/// Grouped temporal compression with one weight vector shared by every group.
pub fn tcl_forward<T: Real>(g: &mut Graph<T>, x: Var, weight: Var) -> Result<Var> {
    g.temporal_compress(x, weight)
}

pub fn scl_forward<T: Real>(g: &mut Graph<T>, x: Var) -> Result<Var> {
    g.max_pool2(x)
}

/// Block outputs recorded during a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub block_outputs: Vec<Var>,
    pub embedding: Var,
}

/// Clip `1×T×H×W` to the embedding `f`.
pub fn backbone_forward<T: Real>(
    g: &mut Graph<T>,
    cfg: &ModelConfig,
    vars: &ParamVars,
    clip: Var,
) -> Result<ForwardTrace> {
    let expected = [1, cfg.clip_len, cfg.height, cfg.width];
    if g.shape(clip) != expected {
        return Err(Error::shape(
            "backbone_forward",
            format!("clip {:?}, model expects {expected:?}", g.shape(clip)),
        ));
    }
    let mut x = clip;
    let mut outs = Vec::with_capacity(cfg.blocks.len());
    for (b, bv) in cfg.blocks.iter().zip(&vars.blocks) {
        x = dfe_forward(g, x, b.parts, bv, cfg.leaky_slope)?;
        if let Some(w) = bv.tcl_weight {
            x = tcl_forward(g, x, w)?;
        }
        if b.scl_enabled {
            x = scl_forward(g, x)?;
        }
        outs.push(x);
    }
    let embedding = g.spatial_max(x)?;
    Ok(ForwardTrace {
        block_outputs: outs,
        embedding,
    })
}

/// Affine map from embedding(s) to two logits.
pub fn head_forward<T: Real>(g: &mut Graph<T>, vars: &ParamVars, f: Var) -> Result<Var> {
    g.linear(f, vars.head_weight, vars.head_bias)
}

/// Softmax probability of the risk class (index 0).
pub fn risk_probability<T: Real>(logits: &[T]) -> f64 {
    let (a, b) = (logits[0].as_f64(), logits[1].as_f64());
    1.0 / (1.0 + (b - a).exp())
}

/// A clip as a `1×T×H×W` tensor of 0/1 values.
pub fn clip_tensor<T: Real>(seq: &SilhouetteSequence) -> Tensor<T> {
    let data = seq
        .pixels()
        .iter()
        .map(|&v| if v != 0 { T::one() } else { T::zero() })
        .collect();
    Tensor::new(&[1, seq.len(), seq.height(), seq.width()], data).expect("sequence geometry")
}

/// Configuration plus parameters.
#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    pub config: ModelConfig,
    pub params: ModelParameters<T>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, params: ModelParameters<T>) -> Result<Self> {
        config.validate()?;
        params.check_layout(&config)?;
        Ok(Self { config, params })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = ModelParameters::init(&config, seed)?;
        Self::new(config, params)
    }

    pub fn trace(&self) -> ShapeTrace {
        self.config.trace().expect("validated at construction")
    }

    /// Embedding of one clip without recording gradients.
    pub fn embed(&self, clip: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let vars = ParamVars::attach(&mut g, &self.config, &self.params, false)?;
        let x = g.leaf(clip.clone(), false);
        let out = backbone_forward(&mut g, &self.config, &vars, x)?;
        Ok(g.value(out.embedding).clone())
    }

    pub fn logits(&self, clip: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let vars = ParamVars::attach(&mut g, &self.config, &self.params, false)?;
        let x = g.leaf(clip.clone(), false);
        let out = backbone_forward(&mut g, &self.config, &vars, x)?;
        let y = head_forward(&mut g, &vars, out.embedding)?;
        Ok(g.value(y).clone())
    }

    /// Risk probability of a clip of exactly `clip_len` frames.
    pub fn clip_probability(&self, clip: &SilhouetteSequence) -> Result<f64> {
        let y = self.logits(&clip_tensor(clip))?;
        let p = risk_probability(y.data());
        if !p.is_finite() {
            return Err(Error::NonFinite("risk probability".into()));
        }
        Ok(p)
    }
}
