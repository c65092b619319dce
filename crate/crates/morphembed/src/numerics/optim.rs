//! RMSProp with per-parameter squared-gradient accumulators, plus global
//! gradient-norm clipping.

use crate::error::{Error, Result};
use crate::numerics::graph::{Gradients, ParamSet};
use crate::numerics::tensor::Tensor;

/// RMSProp state: acc <- rho*acc + (1-rho)*g^2, param <- param - lr*g/sqrt(acc+eps).
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    acc: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(params: &ParamSet, lr: f64, rho: f64, eps: f64) -> Self {
        assert!(lr > 0.0 && (0.0..1.0).contains(&rho) && eps > 0.0);
        let acc = params
            .ids()
            .map(|id| {
                let p = params.get(id);
                Tensor::zeros(p.rows(), p.cols())
            })
            .collect();
        RmsProp { lr, rho, eps, acc }
    }

    /// One update over every parameter. Parameters with no gradient still
    /// have their accumulator decayed.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient in rmsprop step".into()));
        }
        for id in params.ids() {
            let acc = &mut self.acc[id.0];
            match grads.get(id) {
                Some(g) => {
                    let p = params.get_mut(id);
                    for ((a, v), &gv) in acc.data_mut().iter_mut().zip(p.data_mut()).zip(g.data()) {
                        *a = self.rho * *a + (1.0 - self.rho) * gv * gv;
                        *v -= self.lr * gv / (*a + self.eps).sqrt();
                    }
                }
                None => {
                    for a in acc.data_mut() {
                        *a *= self.rho;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scale_lr(&mut self, factor: f64) {
        self.lr *= factor;
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.acc
    }

    pub fn restore(lr: f64, rho: f64, eps: f64, acc: Vec<Tensor>) -> Self {
        RmsProp { lr, rho, eps, acc }
    }
}

/// Clip the global gradient norm, normalized by minibatch size: when
/// ||g||/batch_size exceeds `threshold`, every gradient is scaled by
/// threshold*batch_size/||g||. Returns the pre-clip normalized norm.
pub fn clip_global_norm(grads: &mut Gradients, threshold: f64, batch_size: usize) -> f64 {
    assert!(threshold > 0.0 && batch_size > 0);
    let norm = grads.global_norm();
    let normalized = norm / batch_size as f64;
    if normalized > threshold {
        grads.scale(threshold * batch_size as f64 / norm);
    }
    normalized
}
