use ndarray::Zip;

use super::{ModelParams, TrainConfig};

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    /// Number of steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    config: &TrainConfig,
) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, lr, eps) = (config.beta1, config.beta2, config.learning_rate, config.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let mut p_all = params.tensors_mut();
    let g_all = grads.tensors();
    let mut m_all = state.m.tensors_mut();
    let mut v_all = state.v.tensors_mut();
    for (((p, g), m), v) in p_all
        .iter_mut()
        .zip(g_all.iter())
        .zip(m_all.iter_mut())
        .zip(v_all.iter_mut())
    {
        Zip::from(&mut p.1)
            .and(&g.1)
            .and(&mut m.1)
            .and(&mut v.1)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
}
