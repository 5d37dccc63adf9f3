use super::{ModelParams, Weights};
use crate::{Error, Result};

/// Parameters plus classical-momentum optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub momentum_buffers: Weights,
    pub step: u64,
    pub lr: f64,
    pub momentum: f64,
}

impl TrainState {
    pub fn new(params: ModelParams, lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) || !(0.0..1.0).contains(&momentum) {
            return Err(Error::arg(format!(
                "need lr > 0 and momentum in [0, 1), got lr={lr} momentum={momentum}"
            )));
        }
        Ok(Self {
            momentum_buffers: Weights::zeros(&params.config),
            params,
            step: 0,
            lr,
            momentum,
        })
    }

    /// `buf ← μ·buf + g; w ← w − lr·buf`.
    pub fn apply(&mut self, grads: &Weights) -> Result<()> {
        if !grads.same_shape(&self.momentum_buffers) {
            return Err(Error::arg("gradient shapes do not match parameters"));
        }
        if !grads.all_finite() {
            return Err(Error::Training(format!(
                "non-finite gradient at step {}",
                self.step
            )));
        }
        let (mu, lr) = (self.momentum, self.lr);
        let weights = self.params.weights_mut();
        for ((w, buf), g) in weights
            .tensors_mut()
            .into_iter()
            .zip(self.momentum_buffers.tensors_mut())
            .zip(grads.tensors())
        {
            for ((wv, bv), gv) in w.iter_mut().zip(buf.iter_mut()).zip(g) {
                *bv = mu * *bv + gv;
                *wv -= lr * *bv;
            }
        }
        self.step += 1;
        Ok(())
    }
}

pub fn sgd_step(mut state: TrainState, grads: &Weights) -> Result<TrainState> {
    state.apply(grads)?;
    Ok(state)
}
