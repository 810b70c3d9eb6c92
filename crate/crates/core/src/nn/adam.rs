use super::model::Checkpoint;
use super::Tensor;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter in `ckpt`.
pub fn adam_step<T: Scalar>(ckpt: &mut Checkpoint<T>, grads: &[Tensor<T>], cfg: &AdamConfig) -> Result<()> {
    if grads.len() != ckpt.params.len() {
        return Err(Error::shape(
            "adam",
            format!("{} gradients for {} parameters", grads.len(), ckpt.params.len()),
        ));
    }
    for (p, g) in ckpt.params.iter().zip(grads) {
        if p.tensor.shape() != g.shape() {
            return Err(Error::shape(
                "adam",
                format!("{}: gradient {:?} vs parameter {:?}", p.name, g.shape(), p.tensor.shape()),
            ));
        }
    }
    let state = &mut ckpt.optimizer;
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - cfg.beta1.powf(t);
    let c2 = 1.0 - cfg.beta2.powf(t);
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (o1, o2) = (T::of(1.0 - cfg.beta1), T::of(1.0 - cfg.beta2));
    let step = T::of(cfg.learning_rate / c1);
    let c2_sqrt = T::of(c2.sqrt());
    let eps = T::of(cfg.eps);
    for (((p, g), m), v) in ckpt
        .params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((w, &g), m), v) in p
            .tensor
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = b1 * *m + o1 * g;
            *v = b2 * *v + o2 * g * g;
            *w -= step * *m / (v.sqrt() / c2_sqrt + eps);
        }
    }
    Ok(())
}
