use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// A trainable matrix together with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
}

impl Parameter {
    pub fn new(value: DenseMatrix) -> Self {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }
}

/// Adam optimizer state for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<DenseMatrix>,
    second_moment: Vec<DenseMatrix>,
}

impl AdamState {
    pub const DEFAULT_LR: f64 = 0.01;

    /// Creates state with `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(lr: f64) -> Result<Self> {
        Self::with_hyperparameters(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0) {
            return Err(Error::Config(format!(
                "Adam betas must lie in (0, 1), got {beta1} and {beta2}"
            )));
        }
        if epsilon <= 0.0 {
            return Err(Error::Config(format!("Adam epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[DenseMatrix] {
        &self.first_moment
    }

    pub fn second_moments(&self) -> &[DenseMatrix] {
        &self.second_moment
    }

    /// Applies one bias-corrected Adam update to every parameter, then zeroes
    /// the gradients. Moment buffers are created on the first call.
    pub fn step(&mut self, params: &mut [Parameter]) -> Result<()> {
        if self.first_moment.is_empty() {
            self.first_moment = params
                .iter()
                .map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
                .collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len() {
            return Err(Error::dim(
                "adam_step",
                format!(
                    "state tracks {} parameters, got {}",
                    self.first_moment.len(),
                    params.len()
                ),
            ));
        }
        for (p, m) in params.iter().zip(&self.first_moment) {
            p.value.check_same_shape(m, "adam_step")?;
            p.grad.check_same_shape(m, "adam_step")?;
        }

        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);

        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let values = p.value.data_mut();
            let grads = p.grad.data();
            for (k, (mk, vk)) in m.data_mut().iter_mut().zip(v.data_mut()).enumerate() {
                let g = grads[k];
                *mk = b1 * *mk + (1.0 - b1) * g;
                *vk = b2 * *vk + (1.0 - b2) * g * g;
                let m_hat = *mk / bias1;
                let v_hat = *vk / bias2;
                values[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.grad.fill(0.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let init = DenseMatrix::from_rows(&[[1.0, -2.0]]).unwrap();
        let mut params = vec![Parameter::new(init.clone())];
        let mut adam = AdamState::new(0.01).unwrap();
        adam.step(&mut params).unwrap();
        assert_eq!(params[0].value, init);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        let mut params = vec![Parameter::new(DenseMatrix::scalar(0.5))];
        params[0].grad = DenseMatrix::scalar(1.0);
        let mut adam = AdamState::new(0.01).unwrap();
        adam.step(&mut params).unwrap();
        let expected = 0.5 - 0.01 * 1.0 / (1.0 + 1e-8);
        assert!((params[0].value[(0, 0)] - expected).abs() < 1e-15);
        assert_eq!(params[0].grad[(0, 0)], 0.0);
    }

    #[test]
    fn identical_parameters_keep_identical_moments() {
        let mut params = vec![
            Parameter::new(DenseMatrix::scalar(1.0)),
            Parameter::new(DenseMatrix::scalar(1.0)),
        ];
        let mut adam = AdamState::new(0.05).unwrap();
        for _ in 0..2 {
            for p in &mut params {
                p.grad = DenseMatrix::scalar(0.3);
            }
            adam.step(&mut params).unwrap();
        }
        assert_eq!(adam.first_moments()[0], adam.first_moments()[1]);
        assert_eq!(adam.second_moments()[0], adam.second_moments()[1]);
        assert_eq!(params[0].value, params[1].value);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        assert!(AdamState::with_hyperparameters(0.01, 1.0, 0.999, 1e-8).is_err());
        assert!(AdamState::with_hyperparameters(0.01, 0.9, 0.0, 1e-8).is_err());
        assert!(AdamState::with_hyperparameters(0.01, 0.9, 0.999, 0.0).is_err());
        assert!(AdamState::new(-1.0).is_err());
    }

    #[test]
    fn shape_mismatch_after_init() {
        let mut adam = AdamState::new(0.01).unwrap();
        let mut params = vec![Parameter::new(DenseMatrix::zeros(2, 2))];
        adam.step(&mut params).unwrap();
        let mut other = vec![Parameter::new(DenseMatrix::zeros(3, 2))];
        assert!(adam.step(&mut other).is_err());
    }
}
