//! Soft-margin kernel classifier trained by sequential minimal optimization
//! with second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::{Gamma, Kernel};

pub const TOLERANCE: f64 = 1e-4;
pub const MAX_ITER: usize = 100_000;
const TAU: f64 = 1e-12;
/// Kernel rows kept in memory per fit (entries, not bytes).
const CACHE_ENTRIES: usize = 16_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub dim: usize,
    /// Support vectors, row-major.
    pub support: Vec<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Explicit weight vector for the linear kernel.
    pub weights: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

fn kernel_value(kernel: Kernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Kernel::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

/// `1 / (d * Var(X))` over all entries for `Scale`, `1 / d` for `Auto`.
pub fn resolve_gamma(gamma: Gamma, x: &[f64], dim: usize) -> f64 {
    match gamma {
        Gamma::Auto => 1.0 / dim as f64,
        Gamma::Scale => {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if var > 0.0 {
                1.0 / (dim as f64 * var)
            } else {
                1.0
            }
        }
    }
}

struct KernelRows<'a> {
    x: &'a [f64],
    dim: usize,
    n: usize,
    kernel: Kernel,
    gamma: f64,
    rows: Vec<Option<Box<[f64]>>>,
    cached: usize,
}

impl<'a> KernelRows<'a> {
    fn row(&mut self, i: usize) -> std::borrow::Cow<'_, [f64]> {
        if self.rows[i].is_none() {
            let xi = &self.x[i * self.dim..(i + 1) * self.dim];
            let r: Box<[f64]> = (0..self.n)
                .map(|t| kernel_value(self.kernel, self.gamma, xi, &self.x[t * self.dim..(t + 1) * self.dim]))
                .collect();
            if self.cached + self.n > CACHE_ENTRIES {
                return std::borrow::Cow::Owned(r.into_vec());
            }
            self.cached += self.n;
            self.rows[i] = Some(r);
        }
        std::borrow::Cow::Borrowed(self.rows[i].as_deref().expect("just filled"))
    }
}

/// Fits on `n = y.len()` rows of `x` (row-major, `dim` columns).
/// `c_row[i]` is the penalty of row i (C times its class weight).
pub fn fit(x: &[f64], dim: usize, y: &[bool], c_row: &[f64], kernel: Kernel, gamma: f64) -> SvmModel {
    let n = y.len();
    assert_eq!(x.len(), n * dim);
    assert_eq!(c_row.len(), n);
    let ys: Vec<f64> = y.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let mut kr = KernelRows { x, dim, n, kernel, gamma, rows: vec![None; n], cached: 0 };
    let qd: Vec<f64> = (0..n)
        .map(|i| {
            let xi = &x[i * dim..(i + 1) * dim];
            kernel_value(kernel, gamma, xi, xi)
        })
        .collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iter = 0;
    let mut converged = false;

    while iter < MAX_ITER {
        // i: maximal violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = if ys[t] > 0.0 {
                (alpha[t] < c_row[t]).then(|| -grad[t])
            } else {
                (alpha[t] > 0.0).then_some(grad[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let ki = kr.row(i).into_owned();
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            // Q_it = y_i y_t K_it
            let (in_low, g) = if ys[t] > 0.0 {
                (alpha[t] > 0.0, grad[t])
            } else {
                (alpha[t] < c_row[t], -grad[t])
            };
            if !in_low {
                continue;
            }
            gmax2 = gmax2.max(g);
            let diff = gmax + g;
            if diff > 0.0 {
                let quad = qd[i] + qd[t] - 2.0 * ki[t];
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| gmax + gmax2 >= TOLERANCE) else {
            converged = true;
            break;
        };
        iter += 1;
        let kj = kr.row(j).into_owned();
        let (ci, cj) = (c_row[i], c_row[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = ys[i] * ys[j] * ki[j];
        if ys[i] != ys[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += ys[t] * (ys[i] * ki[t] * di + ys[j] * kj[t] * dj);
        }
    }

    // Threshold from free vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c_row[t] {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else {
        0.0
    };

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support.extend_from_slice(&x[t * dim..(t + 1) * dim]);
            coef.push(alpha[t] * ys[t]);
        }
    }
    let weights = (kernel == Kernel::Linear).then(|| {
        let mut w = vec![0.0; dim];
        for (s, c) in support.chunks_exact(dim).zip(&coef) {
            for (wk, xk) in w.iter_mut().zip(s) {
                *wk += c * xk;
            }
        }
        w
    });
    SvmModel { kernel, gamma, dim, support, coef, rho, weights, iterations: iter, converged }
}

impl SvmModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        let s: f64 = match &self.weights {
            Some(w) => w.iter().zip(row).map(|(a, b)| a * b).sum(),
            None => self
                .support
                .chunks_exact(self.dim)
                .zip(&self.coef)
                .map(|(sv, c)| c * kernel_value(self.kernel, self.gamma, sv, row))
                .sum(),
        };
        s - self.rho
    }

    /// Logistic squashing of the decision value.
    pub fn score(&self, row: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.decision(row)).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(n: usize, sep: f64, seed: u64) -> (Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let p = i % 2 == 0;
            let c = if p { sep } else { -sep };
            x.push(c + rng.gen_range(-1.0..1.0));
            x.push(rng.gen_range(-1.0..1.0));
            y.push(p);
        }
        (x, y)
    }

    #[test]
    fn separable_data_is_classified() {
        let (x, y) = blobs(60, 2.0, 1);
        for kernel in [Kernel::Linear, Kernel::Rbf] {
            let g = resolve_gamma(Gamma::Scale, &x, 2);
            let m = fit(&x, 2, &y, &vec![10.0; 60], kernel, g);
            assert!(m.converged);
            for (row, &p) in x.chunks_exact(2).zip(&y) {
                assert_eq!(m.score(row) > 0.5, p, "{kernel:?}");
            }
        }
    }

    #[test]
    fn linear_solution_matches_hand_oracle() {
        // Two points at +-1 on a line: w = 1, b = 0, both support vectors.
        let m = fit(&[1.0, -1.0], 1, &[true, false], &[10.0, 10.0], Kernel::Linear, 1.0);
        assert!((m.weights.as_ref().unwrap()[0] - 1.0).abs() < 1e-6);
        assert!(m.rho.abs() < 1e-6);
        assert!((m.decision(&[0.5]) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn dual_constraints_hold() {
        let (x, y) = blobs(50, 0.3, 3);
        let c = 0.7;
        let m = fit(&x, 2, &y, &vec![c; 50], Kernel::Rbf, 1.0);
        let sum: f64 = m.coef.iter().sum();
        assert!(sum.abs() < 1e-9, "sum alpha_i y_i = {sum}");
        assert!(m.coef.iter().all(|a| a.abs() <= c + 1e-12));
    }

    #[test]
    fn gamma_modes() {
        assert_eq!(resolve_gamma(Gamma::Auto, &[0.0; 6], 3), 1.0 / 3.0);
        // entries 0,2 -> variance 1
        assert_eq!(resolve_gamma(Gamma::Scale, &[0.0, 2.0], 2), 0.5);
        assert_eq!(resolve_gamma(Gamma::Scale, &[4.0, 4.0], 2), 1.0);
    }
}
