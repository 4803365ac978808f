//! Leakage probe: how well a freshly trained linear softmax classifier
//! recovers a label from a set of vectors.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::loss::log_softmax;

const MIN_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub train_fraction: f64,
    pub iterations: usize,
    pub l2: f64,
    pub momentum: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            iterations: 500,
            l2: 1e-4,
            momentum: 0.9,
        }
    }
}

/// Frequency of the most common label: the accuracy of always guessing it.
pub fn chance_accuracy(labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &y in labels {
        counts[y] += 1;
    }
    counts.into_iter().max().unwrap_or(0) as f64 / labels.len().max(1) as f64
}

/// Held-out accuracy of a linear softmax probe trained on a seeded 80/20 split
/// with the default budget.
pub fn adversary_probe(vectors: ArrayView2<f64>, labels: &[usize], seed: u64) -> Result<f64> {
    ProbeConfig::default().run(vectors, labels, seed)
}

impl ProbeConfig {
    pub fn run(&self, vectors: ArrayView2<f64>, labels: &[usize], seed: u64) -> Result<f64> {
        let n = labels.len();
        if vectors.nrows() != n {
            return Err(Error::Dimension(format!(
                "{} vectors for {n} labels",
                vectors.nrows()
            )));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![0usize; k];
        for &y in labels {
            counts[y] += 1;
        }
        let present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
        if present.len() < 2 {
            return Err(Error::Invalid("probe needs at least two classes".into()));
        }
        if let Some(c) = present.iter().find(|&&c| c < MIN_PER_CLASS) {
            return Err(Error::Invalid(format!(
                "probe needs {MIN_PER_CLASS} samples per class, one class has {c}"
            )));
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((n as f64) * self.train_fraction).round() as usize;
        let n_train = n_train.clamp(1, n - 1);
        let (train_rows, test_rows) = order.split_at(n_train);

        let x_train = vectors.select(Axis(0), train_rows);
        let x_test = vectors.select(Axis(0), test_rows);
        let mean = x_train.mean_axis(Axis(0)).unwrap();
        let std = x_train.std_axis(Axis(0), 0.0);
        let scale = std.mapv(|s| if s > 1e-12 { 1.0 / s } else { 0.0 });
        let prep = |x: &Array2<f64>| {
            let mut out = Array2::ones((x.nrows(), x.ncols() + 1));
            let mut body = out.slice_mut(s![.., ..x.ncols()]);
            body.assign(&((x - &mean) * &scale));
            out
        };
        let x_train = prep(&x_train);
        let x_test = prep(&x_test);
        let y_train: Vec<usize> = train_rows.iter().map(|&i| labels[i]).collect();

        let weights = self.fit(&x_train, &y_train, k);
        let logits = x_test.dot(&weights.t());
        let hits = logits
            .axis_iter(Axis(0))
            .zip(test_rows)
            .filter(|(row, &i)| argmax(row.as_slice().unwrap()) == labels[i])
            .count();
        Ok(hits as f64 / test_rows.len() as f64)
    }

    /// Full-batch heavy-ball descent with step `1 / L`, where `L` bounds the
    /// curvature of the mean cross-entropy plus the L2 term.
    fn fit(&self, x: &Array2<f64>, y: &[usize], k: usize) -> Array2<f64> {
        let n = x.nrows() as f64;
        let lipschitz = 0.5 * top_eigenvalue(x) / n + self.l2;
        let lr = 1.0 / lipschitz.max(1e-12);
        let mut w = Array2::<f64>::zeros((k, x.ncols()));
        let mut velocity = w.clone();
        for _ in 0..self.iterations {
            let mut g = x.dot(&w.t());
            for (mut row, &t) in g.axis_iter_mut(Axis(0)).zip(y) {
                let p = log_softmax(row.view()).mapv(f64::exp);
                row.assign(&p);
                row[t] -= 1.0;
            }
            let mut grad = g.t().dot(x) / n;
            grad.scaled_add(self.l2, &w);
            velocity = velocity * self.momentum + grad;
            w.scaled_add(-lr, &velocity);
        }
        w
    }
}

/// Largest eigenvalue of `x^T x` by power iteration.
fn top_eigenvalue(x: &Array2<f64>) -> f64 {
    let mut v = Array1::from_elem(x.ncols(), 1.0 / (x.ncols() as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = x.t().dot(&x.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w / norm;
    }
    lambda
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}
