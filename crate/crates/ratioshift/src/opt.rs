//! Adam updates and mini-batch index streams.

use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::rng::RngStream;

/// Adam hyperparameters.
///
/// Defaults are beta1=0.9, beta2=0.999, epsilon=1e-8; the learning rate is
/// per use site.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Result<Self> {
        let cfg = AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// First/second moment accumulators mirroring the parameter shapes, plus the
/// step counter used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(spec: &crate::nn::MlpSpec) -> AdamState {
        AdamState {
            m: MlpParams::zeros_like(spec),
            v: MlpParams::zeros_like(spec),
            step: 0,
        }
    }
}

/// One Adam update with bias correction. Increments the step counter.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpParams,
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);

    for li in 0..params.layers.len() {
        {
            let p = params.layers[li].weight.data_mut();
            let g = grads.layers[li].weight.data();
            let m = state.m.layers[li].weight.data_mut();
            let v = state.v.layers[li].weight.data_mut();
            update_block(p, g, m, v, cfg, bc1, bc2);
        }
        {
            let p = &mut params.layers[li].bias;
            let g = &grads.layers[li].bias;
            let m = &mut state.m.layers[li].bias;
            let v = &mut state.v.layers[li].bias;
            update_block(p, g, m, v, cfg, bc1, bc2);
        }
    }
}

fn update_block(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Cycles through sample indices in shuffled epochs without replacement.
///
/// Each epoch is one shuffle; consecutive batches are disjoint chunks, with
/// a final partial chunk when the batch size does not divide the sample
/// count. One optimizer step consumes one batch.
#[derive(Debug)]
pub struct BatchStream {
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
}

impl BatchStream {
    pub fn new(n: usize, batch_size: usize) -> BatchStream {
        assert!(n > 0 && batch_size > 0);
        BatchStream {
            order: (0..n).collect(),
            pos: usize::MAX, // force a shuffle on first use
            batch_size,
        }
    }

    /// Next batch of indices, reshuffling at epoch boundaries.
    pub fn next_batch(&mut self, rng: &mut RngStream) -> &[usize] {
        if self.pos >= self.order.len() {
            rng.shuffle(&mut self.order);
            self.pos = 0;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = &self.order[self.pos..end];
        self.pos = end;
        batch
    }
}
