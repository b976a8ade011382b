//! Bias-corrected adaptive-moment optimizer and gradient-norm clipping.

use super::params::ParamSet;
use super::tensor::{NnError, Tensor};

/// Optimizer state aligned with one [`ParamSet`].
#[derive(Clone, Debug)]
pub struct OptimizerState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        OptimizerState {
            m: params.tensors().map(|t| Tensor::zeros(t.shape())).collect(),
            v: params.tensors().map(|t| Tensor::zeros(t.shape())).collect(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected moment update over every parameter.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[Tensor],
    state: &mut OptimizerState,
) -> Result<(), NnError> {
    if grads.len() != params.len() {
        return Err(NnError::Dimension(format!(
            "adam_step: {} gradients for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    for g in grads {
        g.check_finite("adam_step gradient")?;
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for (k, p) in params.tensors_mut().enumerate() {
        if grads[k].shape() != p.shape() {
            return Err(NnError::Dimension(format!(
                "adam_step: gradient {k} shape {:?} vs parameter {:?}",
                grads[k].shape(),
                p.shape()
            )));
        }
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        for i in 0..p.numel() {
            let g = grads[k].data()[i];
            let mi = state.beta1 * m.data()[i] + (1.0 - state.beta1) * g;
            let vi = state.beta2 * v.data()[i] + (1.0 - state.beta2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            p.data_mut()[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Scales gradients in place so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let sq: f64 = grads
        .iter()
        .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = ParamSet::new();
        let id = params.add("w", Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap());
        let before = params.tensor(id).clone();
        let mut state = OptimizerState::new(&params, 1e-3);
        adam_step(&mut params, &[Tensor::zeros(&[1, 2])], &mut state).unwrap();
        assert_eq!(params.tensor(id), &before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn constant_gradient_update_approaches_learning_rate() {
        let mut params = ParamSet::new();
        let id = params.add("w", Tensor::scalar(0.0));
        let mut state = OptimizerState::new(&params, 1e-3);
        let g = Tensor::scalar(0.37);
        let mut prev = 0.0;
        let mut last_delta = 0.0;
        for _ in 0..500 {
            adam_step(&mut params, &[g.clone()], &mut state).unwrap();
            let cur = params.tensor(id).data()[0];
            last_delta = (cur - prev).abs();
            prev = cur;
        }
        // with constant gradients m_hat/sqrt(v_hat) -> 1
        assert!((last_delta - 1e-3).abs() < 1e-5);
    }

    #[test]
    fn nonfinite_gradient_rejected() {
        let mut params = ParamSet::new();
        params.add("w", Tensor::scalar(0.0));
        let mut state = OptimizerState::new(&params, 1e-3);
        let g = Tensor::scalar(f64::INFINITY);
        assert!(matches!(
            adam_step(&mut params, &[g], &mut state),
            Err(NnError::NonFinite(_))
        ));
    }

    #[test]
    fn clip_rescales_large_gradients() {
        let mut grads = vec![Tensor::from_rows(&[vec![3.0, 4.0]]).unwrap()];
        let norm = clip_grad_norm(&mut grads, 1.0);
        assert!((norm - 5.0).abs() < 1e-12);
        assert!((grads[0].data()[0] - 0.6).abs() < 1e-12);
        assert!((grads[0].data()[1] - 0.8).abs() < 1e-12);
    }
}
