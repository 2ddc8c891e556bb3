use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

/// Every learnable array of backbone and head, in a stable named order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParameters<T: Real> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

/// Names and shapes of the parameter arrays implied by `cfg`.
pub fn parameter_layout(cfg: &ModelConfig) -> Result<Vec<(String, Vec<usize>)>> {
    let trace = cfg.trace()?;
    let mut layout = Vec::new();
    for (i, b) in cfg.blocks.iter().enumerate() {
        let n = i + 1;
        let k = [
            b.out_channels,
            b.in_channels,
            b.temporal_kernel,
            b.spatial_kernel,
            b.spatial_kernel,
        ];
        let (local_k, local_b) = if cfg.per_part_weights {
            let mut lk = vec![b.parts];
            lk.extend(k);
            (lk, vec![b.parts, b.out_channels])
        } else {
            (k.to_vec(), vec![b.out_channels])
        };
        layout.push((format!("block{n}.local.kernel"), local_k));
        layout.push((format!("block{n}.local.bias"), local_b));
        layout.push((format!("block{n}.global.kernel"), k.to_vec()));
        layout.push((format!("block{n}.global.bias"), vec![b.out_channels]));
        if let Some(g) = trace.tcl_group_sizes[i] {
            layout.push((format!("block{n}.tcl.weight"), vec![g]));
        }
    }
    layout.push(("head.weight".into(), vec![2, trace.embedding_dim]));
    layout.push(("head.bias".into(), vec![2]));
    Ok(layout)
}

impl<T: Real> ModelParameters<T> {
    /// Seeded initialization: uniform kernels with variance `1/fan_in` per
    /// branch, zero biases, averaging TCL weights, uniform `±1/sqrt(D)` head.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = parameter_layout(cfg)?;
        let mut names = Vec::with_capacity(layout.len());
        let mut tensors = Vec::with_capacity(layout.len());
        for (name, shape) in layout {
            let numel: usize = shape.iter().product();
            let mut uniform =
                |bound: f64| -> Vec<T> { (0..numel).map(|_| T::of_f64(rng.gen_range(-bound..=bound))).collect() };
            let data = if name.ends_with(".kernel") {
                let fan_in: usize = shape[shape.len() - 4..].iter().product();
                uniform((3.0 / fan_in as f64).sqrt())
            } else if name.ends_with(".tcl.weight") {
                vec![T::of_f64(1.0 / numel as f64); numel]
            } else if name == "head.weight" {
                uniform(1.0 / (shape[1] as f64).sqrt())
            } else {
                vec![T::zero(); numel]
            };
            names.push(name);
            tensors.push(Tensor::new(&shape, data)?);
        }
        Ok(Self { names, tensors })
    }

    pub fn from_parts(names: Vec<String>, tensors: Vec<Tensor<T>>) -> Result<Self> {
        if names.len() != tensors.len() {
            return Err(Error::InvalidArgument("names and tensors differ in length".into()));
        }
        Ok(Self { names, tensors })
    }

    /// Checks names and shapes against the layout of `cfg`.
    pub fn check_layout(&self, cfg: &ModelConfig) -> Result<()> {
        let layout = parameter_layout(cfg)?;
        if layout.len() != self.names.len() {
            return Err(Error::CheckpointMismatch(format!(
                "{} parameter arrays, model expects {}",
                self.names.len(),
                layout.len()
            )));
        }
        for ((name, shape), (n, t)) in layout.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != n || shape.as_slice() != t.shape() {
                return Err(Error::CheckpointMismatch(format!(
                    "`{n}` {:?}, model expects `{name}` {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParameters<U> {
        ModelParameters {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}
