use rand::Rng;

use crate::config::SvmConfig;

/// One-vs-rest linear classifier trained with hinge-loss SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    /// `classes x (dim + 1)`, bias last.
    pub weights: Vec<Vec<f64>>,
    pub dim: usize,
}

impl LinearSvm {
    pub fn new(dim: usize, classes: usize) -> Self {
        Self {
            weights: vec![vec![0.0; dim + 1]; classes],
            dim,
        }
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w[self.dim] + w[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        bciqoe_env::argmax(&self.scores(x))
    }

    /// `steps` SGD updates on samples drawn uniformly from `data`,
    /// continuing from the current weights.
    pub fn sgd<R: Rng + ?Sized>(&mut self, data: &[(Vec<f64>, usize)], steps: usize, lr: f64, lambda: f64, rng: &mut R) {
        if data.is_empty() {
            return;
        }
        let dim = self.dim;
        for _ in 0..steps {
            let (x, label) = &data[rng.random_range(0..data.len())];
            for (c, w) in self.weights.iter_mut().enumerate() {
                let y = if c == *label { 1.0 } else { -1.0 };
                let score = w[dim] + w[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let shrink = 1.0 - lr * lambda;
                w[..dim].iter_mut().for_each(|v| *v *= shrink);
                if y * score < 1.0 {
                    for (v, xi) in w[..dim].iter_mut().zip(x) {
                        *v += lr * y * xi;
                    }
                    w[dim] += lr * y;
                }
            }
        }
    }

    pub fn accuracy(&self, data: &[(Vec<f64>, usize)]) -> f64 {
        let hits = data.iter().filter(|(x, l)| self.predict(x) == *l).count();
        hits as f64 / data.len().max(1) as f64
    }
}

/// Every sample seen so far, up to a capacity beyond which reservoir
/// sampling keeps a uniform subset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleStore {
    pub items: Vec<(Vec<f64>, usize)>,
    pub seen: usize,
    pub capacity: usize,
}

impl SampleStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: Vec::new(),
            seen: 0,
            capacity,
        }
    }

    pub fn push<R: Rng + ?Sized>(&mut self, x: Vec<f64>, label: usize, rng: &mut R) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push((x, label));
        } else {
            let j = rng.random_range(0..self.seen);
            if j < self.capacity {
                self.items[j] = (x, label);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// The SVM baseline's classifier: a cumulative store refitted each episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmClassifier {
    pub cfg: SvmConfig,
    pub model: LinearSvm,
    pub store: SampleStore,
}

impl SvmClassifier {
    pub fn new(cfg: SvmConfig, dim: usize, classes: usize) -> Self {
        Self {
            store: SampleStore::new(cfg.capacity),
            model: LinearSvm::new(dim, classes),
            cfg,
        }
    }

    pub fn fitted(&self) -> bool {
        !self.store.is_empty()
    }

    /// Predicted class, or `fallback` before any data was seen.
    pub fn predict(&self, x: &[f64], fallback: usize) -> usize {
        if self.fitted() {
            self.model.predict(x)
        } else {
            fallback
        }
    }

    pub fn refit<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let SvmConfig { lr, lambda, steps, .. } = self.cfg;
        self.model.sgd(&self.store.items, steps, lr, lambda, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reservoir_keeps_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = SampleStore::new(10);
        for i in 0..100 {
            s.push(vec![i as f64], 0, &mut rng);
        }
        assert_eq!(s.len(), 10);
        assert_eq!(s.seen, 100);
    }
}
