use super::config::OptimizerConfig;
use crate::model::{ClassifierModel, Gradients, ParamStore};

/// Adam with bias correction. Tensors whose mask entry is false are left
/// untouched, including their moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, cfg: &OptimizerConfig, store: &ParamStore) -> Self {
        Adam {
            lr: learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            t: 0,
            m: store.iter().map(|p| vec![0.0; p.values.len()]).collect(),
            v: store.iter().map(|p| vec![0.0; p.values.len()]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates every trainable tensor of `model`; frozen groups are skipped.
    pub fn step_model(&mut self, model: &mut ClassifierModel, grads: &Gradients) {
        let mask = model.trainable_mask();
        self.step(model.params_mut(), grads, &mask);
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, trainable: &[bool]) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, param) in store.iter_mut().enumerate() {
            if !trainable[i] {
                continue;
            }
            let g = grads.by_index(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..param.values.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                param.values[j] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        store.push("w", "head", vec![3], vec![1.0, 1.0, 1.0]);
        store.push("frozen", "block1", vec![1], vec![5.0]);
        let mut grads = store.zero_gradients();
        grads.by_index_mut(0).copy_from_slice(&[2.0, -0.5, 0.0]);
        grads.by_index_mut(1)[0] = 1.0;
        let mut adam = Adam::new(0.1, &OptimizerConfig::default(), &store);
        adam.step(&mut store, &grads, &[true, false]);
        let w = &store.find("w").unwrap().values;
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] - 1.1).abs() < 1e-6);
        assert_eq!(w[2], 1.0);
        assert_eq!(store.find("frozen").unwrap().values[0].to_bits(), 5.0f64.to_bits());
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        store.push("x", "head", vec![2], vec![3.0, -4.0]);
        let mut adam = Adam::new(0.05, &OptimizerConfig::default(), &store);
        for _ in 0..2000 {
            let mut grads = store.zero_gradients();
            let x = store.find("x").unwrap().values.clone();
            grads.by_index_mut(0).copy_from_slice(&[2.0 * (x[0] - 1.0), 2.0 * (x[1] + 2.0)]);
            adam.step(&mut store, &grads, &[true]);
        }
        let x = &store.find("x").unwrap().values;
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 2.0).abs() < 1e-3, "{x:?}");
    }
}
