//! Finite-difference verification of reverse-mode gradients.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`
/// so that gradients indistinguishable from zero are compared absolutely.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

/// Compares the reverse-mode gradient of the scalar function built by `f`
/// against central differences `(f(x+eps) - f(x-eps)) / 2eps` at every
/// element of `input`, returning the worst relative error.
pub fn grad_check<F>(f: F, input: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, Var) -> Result<Var>,
{
    grad_check_many(|g, vars| f(g, vars[0]), std::slice::from_ref(input), eps, usize::MAX)
}

/// Multi-input variant. At most `max_probes` evenly spaced elements of each
/// input are perturbed.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor<f64>], eps: f64, max_probes: usize) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.leaf(t.clone(), false)).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out).item();
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check probe value".into()));
        }
        Ok(v)
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = f(&mut g, &vars)?;
    if !g.value(out).item().is_finite() {
        return Err(Error::NonFinite("grad_check function value".into()));
    }
    let grads = g.backward(out)?;

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (which, var) in vars.iter().enumerate() {
        let numel = inputs[which].numel();
        let analytic = grads
            .get(*var)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; numel]);
        let stride = if max_probes >= numel {
            1
        } else {
            numel.div_ceil(max_probes)
        };
        for idx in (0..numel).step_by(stride.max(1)) {
            let orig = inputs[which].data()[idx];
            probe[which].data_mut()[idx] = orig + eps;
            let plus = eval(&probe)?;
            probe[which].data_mut()[idx] = orig - eps;
            let minus = eval(&probe)?;
            probe[which].data_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[idx];
            let denom = a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
