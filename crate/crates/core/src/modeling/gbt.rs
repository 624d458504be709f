use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_regressor, Bins, BoostTreeParams, Tree};

pub const LAMBDA: f64 = 1.0;
pub const MIN_CHILD_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub trees: Vec<Tree>,
}

pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub colsample: f64,
    pub subsample: f64,
}

fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

/// Logistic-loss boosting; `row_weight` scales gradients and hessians.
pub fn fit(x: &[f64], dim: usize, y: &[bool], row_weight: &[f64], p: &GbtParams, seed: u64) -> GbtModel {
    let n = y.len();
    let bins = Bins::new(x, n, dim);
    let tp = BoostTreeParams {
        max_depth: p.max_depth,
        lambda: LAMBDA,
        min_child_weight: MIN_CHILD_WEIGHT,
        learning_rate: p.learning_rate,
    };
    let n_cols = ((dim as f64 * p.colsample).round() as usize).clamp(1, dim);
    let mut margin = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut trees = Vec::with_capacity(p.n_estimators);
    for t in 0..p.n_estimators {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        for i in 0..n {
            let pr = sigmoid(margin[i]);
            let target = if y[i] { 1.0 } else { 0.0 };
            g[i] = row_weight[i] * (pr - target);
            h[i] = (row_weight[i] * pr * (1.0 - pr)).max(1e-16);
        }
        let rows: Vec<u32> = if p.subsample < 1.0 {
            (0..n as u32).filter(|_| rng.gen_bool(p.subsample)).collect()
        } else {
            (0..n as u32).collect()
        };
        let mut features: Vec<usize> = if n_cols < dim {
            sample(&mut rng, dim, n_cols).into_vec()
        } else {
            (0..dim).collect()
        };
        features.sort_unstable();
        let tree = grow_regressor(&bins, &g, &h, rows, &features, &tp);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += tree.predict_binned(&bins, i);
        }
        trees.push(tree);
    }
    GbtModel { trees }
}

impl GbtModel {
    pub fn margin_prefix(&self, row: &[f64], k: usize) -> f64 {
        self.trees[..k.min(self.trees.len())].iter().map(|t| t.predict(row)).sum()
    }

    pub fn score_prefix(&self, row: &[f64], k: usize) -> f64 {
        sigmoid(self.margin_prefix(row, k))
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.score_prefix(row, self.trees.len())
    }

    pub fn truncate(&mut self, k: usize) {
        self.trees.truncate(k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize) -> GbtParams {
        GbtParams { n_estimators: n, learning_rate: 0.1, max_depth: 3, colsample: 1.0, subsample: 0.8 }
    }

    fn data() -> (Vec<f64>, Vec<bool>) {
        let x: Vec<f64> = (0..60).flat_map(|i| [i as f64, ((i * 13) % 7) as f64]).collect();
        let y: Vec<bool> = (0..60).map(|i| (20..45).contains(&i)).collect();
        (x, y)
    }

    #[test]
    fn learns_interval_concept() {
        let (x, y) = data();
        let m = fit(&x, 2, &y, &[1.0; 60], &params(200), 3);
        for (r, &p) in x.chunks_exact(2).zip(&y) {
            assert_eq!(m.score(r) > 0.5, p, "row {r:?}");
        }
    }

    #[test]
    fn prefix_equals_shorter_run() {
        let (x, y) = data();
        let a = fit(&x, 2, &y, &[1.0; 60], &params(40), 5);
        let b = fit(&x, 2, &y, &[1.0; 60], &params(15), 5);
        assert_eq!(&a.trees[..15], &b.trees[..]);
    }

    #[test]
    fn monotone_transform_keeps_predictions() {
        let (x, y) = data();
        let tx: Vec<f64> = x.iter().map(|v| v * v * v + 2.0).collect();
        let a = fit(&x, 2, &y, &[1.0; 60], &params(30), 5);
        let b = fit(&tx, 2, &y, &[1.0; 60], &params(30), 5);
        for (r, tr) in x.chunks_exact(2).zip(tx.chunks_exact(2)) {
            assert_eq!(a.score(r), b.score(tr));
        }
    }
}
