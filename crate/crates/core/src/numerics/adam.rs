use serde::{Deserialize, Serialize};

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty folded into the raw gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First/second moment estimates for a fixed list of parameter arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Real> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    /// Zero moments mirroring `shapes`.
    pub fn new(config: AdamConfig, shapes: &[&[usize]]) -> Self {
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[&Tensor<T>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "{} params, {} grads, state for {}",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!(
                        "array {i}: param {:?}, grad {:?}, moment {:?}",
                        p.shape(),
                        g.shape(),
                        self.m[i].shape()
                    ),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter array {i}")));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::of_f64(c.beta1), T::of_f64(c.beta2));
        let (ob1, ob2) = (T::of_f64(1.0 - c.beta1), T::of_f64(1.0 - c.beta2));
        let wd = T::of_f64(c.weight_decay);
        let step_size = T::of_f64(lr / bc1);
        let inv_sqrt_bc2 = T::of_f64(1.0 / bc2.sqrt());
        let eps = T::of_f64(c.epsilon);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                let grad = gv + wd * *pv;
                *mv = b1 * *mv + ob1 * grad;
                *vv = b2 * *vv + ob2 * grad * grad;
                *pv -= step_size * *mv / ((*vv).sqrt() * inv_sqrt_bc2 + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Tensor::new(&[1], vec![1.0f64]).unwrap();
        let g = Tensor::new(&[1], vec![0.5f64]).unwrap();
        let mut st = AdamState::new(AdamConfig::default(), &[&[1]]);
        st.step(&mut [&mut p], &[&g], 1e-3).unwrap();
        // m̂ = 0.5, v̂ = 0.25 -> update = lr·0.5/(0.5+1e-8)
        let expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((p.data()[0] - 0.999).abs() < 1e-9);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut p = Tensor::new(&[3], vec![1.0f32, -2.0, 0.25]).unwrap();
        let g = Tensor::zeros(&[3]);
        let mut st = AdamState::new(AdamConfig::default(), &[&[3]]);
        st.step(&mut [&mut p], &[&g], 1e-3).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0, 0.25]);
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let mut p = Tensor::new(&[1], vec![2.0f64]).unwrap();
        let g = Tensor::zeros(&[1]);
        let cfg = AdamConfig {
            weight_decay: 5e-4,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(cfg, &[&[1]]);
        st.step(&mut [&mut p], &[&g], 1e-3).unwrap();
        assert!(p.data()[0] < 2.0);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = Tensor::new(&[2], vec![0.3f32, -0.7]).unwrap();
            let g = Tensor::new(&[2], vec![0.1f32, 0.2]).unwrap();
            let mut st = AdamState::new(AdamConfig::default(), &[&[2]]);
            for _ in 0..5 {
                st.step(&mut [&mut p], &[&g], 1e-2).unwrap();
            }
            (p, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = Tensor::new(&[1], vec![1.0f32]).unwrap();
        let g = Tensor::new(&[1], vec![f32::NAN]).unwrap();
        let mut st = AdamState::new(AdamConfig::default(), &[&[1]]);
        assert!(matches!(st.step(&mut [&mut p], &[&g], 1e-3), Err(Error::NonFinite(_))));
        assert_eq!(st.step, 0);
    }
}
