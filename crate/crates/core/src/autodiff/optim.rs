use super::{AdError, Tensor};

/// Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. Moment buffers are created on the first call.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), AdError> {
        if params.len() != grads.len() {
            return Err(AdError::ShapeMismatch {
                index: params.len().min(grads.len()),
                expected: (params.len(), 1),
                found: (grads.len(), 1),
            });
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.v = self.m.clone();
        }
        for (index, (p, g)) in params.iter().zip(grads).enumerate() {
            let expected = self.m.get(index).map(Tensor::shape).unwrap_or((0, 0));
            if p.shape() != g.shape() || p.shape() != expected {
                return Err(AdError::ShapeMismatch { index, expected, found: g.shape() });
            }
        }
        if self.m.len() != params.len() {
            return Err(AdError::ShapeMismatch {
                index: self.m.len(),
                expected: (self.m.len(), 1),
                found: (params.len(), 1),
            });
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let gi = g.data()[i];
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gi;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut params = vec![Tensor::row(&[1.5, -2.0]), Tensor::scalar(0.25)];
        let before = params.clone();
        let grads = vec![Tensor::zeros(1, 2), Tensor::zeros(1, 1)];
        let mut adam = Adam::default();
        for _ in 0..5 {
            adam.step(&mut params, &grads).unwrap();
        }
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = 1, v_hat = 1 after bias correction => delta = lr / (1 + eps).
        let mut params = vec![Tensor::scalar(0.0)];
        let mut adam = Adam::new(0.1);
        adam.step(&mut params, &[Tensor::scalar(1.0)]).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((params[0].item() - expected).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut params = vec![Tensor::scalar(0.0)];
        let mut adam = Adam::new(0.1);
        for _ in 0..200 {
            let w = params[0].item();
            adam.step(&mut params, &[Tensor::scalar(2.0 * (w - 3.0))]).unwrap();
        }
        assert!((params[0].item() - 3.0).abs() < 0.05, "w = {}", params[0].item());
        assert_eq!(adam.steps(), 200);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut params = vec![Tensor::zeros(2, 2)];
        let mut adam = Adam::default();
        let err = adam.step(&mut params, &[Tensor::zeros(1, 2)]).unwrap_err();
        assert!(matches!(err, AdError::ShapeMismatch { index: 0, .. }));
    }
}
