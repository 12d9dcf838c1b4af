//! Adaptive-moment parameter updates over flat parameter vectors.

use alloc::vec::Vec;

use crate::net::{c, Scalar};

/// First/second moment accumulators plus hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<F>,
    v: Vec<F>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(param_count: usize, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: alloc::vec![F::zero(); param_count],
            v: alloc::vec![F::zero(); param_count],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update. Zero gradients leave parameters unchanged.
    pub fn update(&mut self, params: &mut [F], grads: &[F]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let b1 = c::<F>(self.beta1);
        let b2 = c::<F>(self.beta2);
        let one = F::one();
        let bc1 = c::<F>(1.0 - self.beta1.powi(self.t as i32));
        let bc2 = c::<F>(1.0 - self.beta2.powi(self.t as i32));
        let lr = c::<F>(self.lr);
        let eps = c::<F>(self.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut state: AdamState<f64> = AdamState::new(3, 0.01);
        let mut params = alloc::vec![1.0, -2.0, 0.5];
        let before = params.clone();
        state.update(&mut params, &[0.0, 0.0, 0.0]);
        state.update(&mut params, &[0.0, 0.0, 0.0]);
        assert_eq!(params, before);
    }

    #[test]
    fn identical_calls_from_identical_state_match() {
        let grads = alloc::vec![0.3, -0.7];
        let mut s1: AdamState<f64> = AdamState::new(2, 0.01);
        let mut s2: AdamState<f64> = AdamState::new(2, 0.01);
        let mut p1 = alloc::vec![0.1, 0.2];
        let mut p2 = alloc::vec![0.1, 0.2];
        for _ in 0..5 {
            s1.update(&mut p1, &grads);
            s2.update(&mut p2, &grads);
        }
        assert_eq!(p1, p2);
    }

    #[test]
    fn quadratic_loss_decreases() {
        // f(x) = (x - 3)^2, df/dx = 2(x - 3).
        let mut state: AdamState<f64> = AdamState::new(1, 0.05);
        let mut x = alloc::vec![0.0f64];
        let mut last = (x[0] - 3.0f64).powi(2);
        for _ in 0..10 {
            let g = 2.0 * (x[0] - 3.0);
            state.update(&mut x, &[g]);
            let now = (x[0] - 3.0f64).powi(2);
            assert!(now < last, "loss must strictly decrease: {now} vs {last}");
            last = now;
        }
    }
}
