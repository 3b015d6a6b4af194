//! Adam and RAdam with bias correction, plus the reduce-on-plateau rule.

use super::tape::Params;
use super::tensor::{Scalar, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Radam,
}

/// First/second-moment state kept in f64 for reproducible updates.
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new<T: Scalar>(kind: OptimizerKind, params: &Params<T>) -> Self {
        Optimizer {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.tensors.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.tensors.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step<T: Scalar>(&mut self, params: &mut Params<T>, grads: &[Tensor<T>], lr: f64) {
        self.t += 1;
        let t = self.t as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);

        // RAdam variance rectification (Liu et al. 2019): fall back to an
        // un-adapted momentum update while the rectification is undefined.
        let rho_inf = 2.0 / (1.0 - self.beta2) - 1.0;
        let rho_t = rho_inf - 2.0 * t * self.beta2.powf(t) / bc2;
        let rect = if rho_t > 4.0 {
            Some(
                (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                    / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                    .sqrt(),
            )
        } else {
            None
        };

        for (i, g) in grads.iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = &mut params.tensors[i].data;
            for j in 0..g.data.len() {
                let gj = g.data[j].as_f64();
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let update = match self.kind {
                    OptimizerKind::Adam => lr * m_hat / ((v[j] / bc2).sqrt() + self.eps),
                    OptimizerKind::Radam => match rect {
                        Some(r) => lr * r * m_hat / ((v[j] / bc2).sqrt() + self.eps),
                        None => lr * m_hat,
                    },
                };
                p[j] = T::from_f64(p[j].as_f64() - update);
            }
        }
    }
}

/// Reduce-on-plateau state: lowest loss seen and epochs since improvement.
#[derive(Debug, Clone)]
pub struct PlateauState {
    pub best: f64,
    pub stale: usize,
}

impl Default for PlateauState {
    fn default() -> Self {
        PlateauState { best: f64::INFINITY, stale: 0 }
    }
}

/// Apply one epoch's loss; returns the (possibly reduced) learning rate.
/// The stale counter resets on strict improvement and on reduction.
pub fn plateau_step(
    state: &mut PlateauState,
    loss: f64,
    lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
) -> f64 {
    if loss < state.best {
        state.best = loss;
        state.stale = 0;
        return lr;
    }
    state.stale += 1;
    if state.stale >= patience {
        state.stale = 0;
        (lr * factor).max(min_lr)
    } else {
        lr
    }
}
