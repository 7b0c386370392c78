use crate::tensor::Matrix;

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
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments for each trainable tensor, in trainable order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(shapes: impl IntoIterator<Item = usize>) -> Self {
        let first: Vec<Vec<f64>> = shapes.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            second: first.clone(),
            first,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. `params` and `grads` must be parallel.
pub fn adam_step(params: &mut [&mut Matrix], grads: &[&Matrix], state: &mut OptimizerState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient count");
    if state.first.is_empty() {
        *state = OptimizerState::new(params.iter().map(|p| p.data.len()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        assert_eq!(p.data.len(), g.data.len(), "shape mismatch");
        let m = &mut state.first[k];
        let v = &mut state.second[k];
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p.data[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}
