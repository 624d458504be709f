use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classifier, Bins, ClassTreeParams, Tree};
use super::Criterion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

pub struct ForestParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

/// `sqrt(d)` features per split, at least one.
pub fn max_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

/// Tree `t` draws from its own stream, so the first `k` trees of a larger
/// forest equal a forest grown with `n_estimators = k`.
pub fn fit(x: &[f64], dim: usize, y: &[bool], row_weight: &[f64], p: &ForestParams, seed: u64) -> Forest {
    let n = y.len();
    let bins = Bins::new(x, n, dim);
    let tp = ClassTreeParams {
        criterion: p.criterion,
        min_samples_split: p.min_samples_split,
        max_features: max_features(dim),
    };
    let trees = (0..p.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let weight = if p.bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1;
                }
                counts.iter().zip(row_weight).map(|(&c, w)| c as f64 * w).collect()
            } else {
                row_weight.to_vec()
            };
            grow_classifier(&bins, y, &weight, &tp, &mut rng)
        })
        .collect();
    Forest { trees }
}

impl Forest {
    /// Mean leaf probability over the first `k` trees.
    pub fn score_prefix(&self, row: &[f64], k: usize) -> f64 {
        let k = k.min(self.trees.len());
        self.trees[..k].iter().map(|t| t.predict(row)).sum::<f64>() / k as f64
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

    fn data() -> (Vec<f64>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            x.push(i as f64);
            x.push(((i * 7) % 11) as f64);
            y.push(i >= 20);
        }
        (x, y)
    }

    fn params(n: usize, bootstrap: bool) -> ForestParams {
        ForestParams { n_estimators: n, criterion: Criterion::Gini, min_samples_split: 2, bootstrap }
    }

    #[test]
    fn prefix_equals_smaller_forest() {
        let (x, y) = data();
        let big = fit(&x, 2, &y, &[1.0; 40], &params(30, true), 9);
        let small = fit(&x, 2, &y, &[1.0; 40], &params(10, true), 9);
        assert_eq!(&big.trees[..10], &small.trees[..]);
    }

    #[test]
    fn unanimous_forest_scores_one() {
        let (x, y) = data();
        let f = fit(&x, 2, &y, &[1.0; 40], &params(20, false), 1);
        assert_eq!(f.score(&[35.0, 3.0]), 1.0);
        assert_eq!(f.score(&[2.0, 3.0]), 0.0);
    }

    #[test]
    fn monotone_transform_keeps_predictions() {
        let (x, y) = data();
        let tx: Vec<f64> = x.iter().map(|v| (v * 0.3).exp() - 4.0).collect();
        let a = fit(&x, 2, &y, &[1.0; 40], &params(15, true), 4);
        let b = fit(&tx, 2, &y, &[1.0; 40], &params(15, true), 4);
        for (r, tr) in x.chunks_exact(2).zip(tx.chunks_exact(2)) {
            assert_eq!(a.score(r), b.score(tr));
        }
    }

    #[test]
    fn sqrt_features() {
        assert_eq!(max_features(3), 1);
        assert_eq!(max_features(88), 9);
        assert_eq!(max_features(1024), 32);
    }
}
