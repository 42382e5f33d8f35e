use super::{check_instance, ModelError, OnlineClassifier};

const BASE_BYTES: usize = 48;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression trained by plain SGD on the log loss with an L2
/// penalty on the weights (not the bias).
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    weights: Vec<f64>,
    bias: f64,
    lr: f64,
    l2: f64,
    dim: Option<usize>,
}

impl LogisticModel {
    pub fn new(lr: f64, l2: f64) -> Self {
        Self {
            weights: Vec::new(),
            bias: 0.0,
            lr,
            l2,
            dim: None,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

impl OnlineClassifier for LogisticModel {
    fn learn_one(&mut self, x: &[f64], y: u8) -> Result<(), ModelError> {
        check_instance(x, y, self.dim)?;
        if self.dim.is_none() {
            self.dim = Some(x.len());
            self.weights = vec![0.0; x.len()];
        }
        let err = sigmoid(self.decision(x)) - f64::from(y);
        for (w, v) in self.weights.iter_mut().zip(x) {
            *w -= self.lr * (err * v + self.l2 * *w);
        }
        self.bias -= self.lr * err;
        Ok(())
    }

    fn predict_proba_one(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }

    /// `48 + 8 * d` for the weights plus 8 for the bias.
    fn memory_bytes(&self) -> usize {
        BASE_BYTES + 8 * self.dim.unwrap_or(0) + 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut m = LogisticModel::new(0.0, 0.3);
        m.learn_one(&[1.0, 2.0], 1).unwrap();
        m.learn_one(&[-1.0, 0.5], 0).unwrap();
        assert_eq!(m.weights(), &[0.0, 0.0]);
        assert_eq!(m.bias(), 0.0);
    }

    #[test]
    fn one_gradient_step_by_hand() {
        let mut m = LogisticModel::new(1.0, 0.0);
        m.learn_one(&[1.0], 1).unwrap();
        assert_eq!(m.weights(), &[0.5]);
        assert_eq!(m.bias(), 0.5);
    }

    #[test]
    fn converges_on_repeated_positive() {
        let mut m = LogisticModel::new(0.1, 0.0);
        for _ in 0..1000 {
            m.learn_one(&[1.0], 1).unwrap();
        }
        assert!(m.predict_proba_one(&[1.0]) > 0.95);
    }

    #[test]
    fn memory_formula() {
        let mut m = LogisticModel::new(0.1, 0.0);
        assert_eq!(m.memory_bytes(), 56);
        m.learn_one(&[0.0; 5], 0).unwrap();
        assert_eq!(m.memory_bytes(), 48 + 5 * 8 + 8);
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = LogisticModel::new(0.1, 0.0);
        assert!(matches!(
            m.learn_one(&[f64::NAN], 1),
            Err(ModelError::NonFinite { index: 0, .. })
        ));
        m.learn_one(&[1.0, 2.0], 1).unwrap();
        assert!(matches!(
            m.learn_one(&[1.0], 1),
            Err(ModelError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(m.learn_one(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn weights_stay_finite() {
        let mut m = LogisticModel::new(1.0, 0.01);
        for i in 0..10_000 {
            let x = [((i * 37) % 101) as f64 - 50.0, 1e3];
            m.learn_one(&x, (i % 3 == 0) as u8).unwrap();
        }
        assert!(m.weights().iter().all(|w| w.is_finite()));
    }
}
