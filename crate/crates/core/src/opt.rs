//! Adaptive-moment gradient steps over named parameter blocks.

/// Adam with bias correction. Moment buffers are sized lazily on the first
/// step and must see the same block layout afterwards.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update over the concatenation of the parameter blocks.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        let total: usize = params.iter().map(|p| p.len()).sum();
        if self.m.is_empty() {
            self.m = vec![0.0; total];
            self.v = vec![0.0; total];
        }
        assert_eq!(self.m.len(), total, "parameter layout changed mid-training");
        self.step += 1;
        let t = self.step as i32;
        let lr_t = self.learning_rate * (1.0 - self.beta2.powi(t)).sqrt()
            / (1.0 - self.beta1.powi(t));
        let mut offset = 0;
        for (block, grad) in params.iter_mut().zip(grads) {
            assert_eq!(block.len(), grad.len());
            for (i, (p, &g)) in block.iter_mut().zip(grad.iter()).enumerate() {
                let j = offset + i;
                self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * g;
                self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * g * g;
                *p -= lr_t * self.m[j] / (self.v[j].sqrt() + self.epsilon);
            }
            offset += block.len();
        }
    }
}
