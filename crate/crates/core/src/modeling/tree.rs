//! Histogram-binned decision trees shared by the forest and the boosted
//! ensemble. Split thresholds are actual training values and a row goes left
//! when `x <= threshold`, so predictions depend only on feature ranks.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Criterion;

pub const MAX_BINS: usize = 256;

/// Column-major bin codes of a training matrix.
#[derive(Debug, Clone)]
pub struct Bins {
    pub n_rows: usize,
    pub n_cols: usize,
    codes: Vec<u8>,
    /// Upper edge (inclusive) of every bin, per column.
    pub edges: Vec<Vec<f64>>,
}

impl Bins {
    pub fn new(x: &[f64], n_rows: usize, n_cols: usize) -> Bins {
        assert_eq!(x.len(), n_rows * n_cols);
        let mut codes = vec![0u8; n_rows * n_cols];
        let mut edges = Vec::with_capacity(n_cols);
        for j in 0..n_cols {
            let mut uniq: Vec<f64> = (0..n_rows).map(|i| x[i * n_cols + j]).collect();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let e: Vec<f64> = if uniq.len() <= MAX_BINS {
                uniq
            } else {
                let u = uniq.len();
                let mut e: Vec<f64> = (1..=MAX_BINS).map(|k| uniq[k * u / MAX_BINS - 1]).collect();
                e.dedup();
                e
            };
            for i in 0..n_rows {
                let v = x[i * n_cols + j];
                codes[j * n_rows + i] = e.partition_point(|&edge| edge < v).min(e.len() - 1) as u8;
            }
            edges.push(e);
        }
        Bins { n_rows, n_cols, codes, edges }
    }

    #[inline]
    pub fn code(&self, row: usize, col: usize) -> u8 {
        self.codes[col * self.n_rows + row]
    }

    fn column(&self, col: usize) -> &[u8] {
        &self.codes[col * self.n_rows..(col + 1) * self.n_rows]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: u32, bin: u8, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0usize;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    k = if row[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    /// Prediction for a training row through its bin codes.
    pub fn predict_binned(&self, bins: &Bins, row: usize) -> f64 {
        let mut k = 0usize;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split { feature, bin, left, right, .. } => {
                    k = if bins.code(row, feature as usize) <= bin { left } else { right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left as usize).max(go(t, right as usize)),
            }
        }
        go(self, 0)
    }
}

fn impurity(criterion: Criterion, pos: f64, neg: f64) -> f64 {
    let w = pos + neg;
    if w <= 0.0 {
        return 0.0;
    }
    let (p, q) = (pos / w, neg / w);
    match criterion {
        Criterion::Gini => 1.0 - p * p - q * q,
        Criterion::Entropy => {
            let h = |v: f64| if v > 0.0 { -v * v.log2() } else { 0.0 };
            h(p) + h(q)
        }
    }
}

/// Splits `rows` in place: rows with `code <= bin` first. Returns the
/// number of left rows.
fn partition(rows: &mut [u32], col: &[u8], bin: u8) -> usize {
    let mut l = 0;
    for k in 0..rows.len() {
        if col[rows[k] as usize] <= bin {
            rows.swap(l, k);
            l += 1;
        }
    }
    l
}

pub struct ClassTreeParams {
    pub criterion: Criterion,
    pub min_samples_split: usize,
    /// Features examined per split; at least this many non-constant ones.
    pub max_features: usize,
}

/// Grows a fully developed classification tree on the rows with positive
/// weight. Leaves hold the weighted fraction of positive rows.
pub fn grow_classifier<R: Rng>(
    bins: &Bins,
    y: &[bool],
    weight: &[f64],
    params: &ClassTreeParams,
    rng: &mut R,
) -> Tree {
    let mut rows: Vec<u32> = (0..bins.n_rows as u32).filter(|&i| weight[i as usize] > 0.0).collect();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, 0usize, rows.len())];
    let mut features: Vec<usize> = (0..bins.n_cols).collect();
    let mut hist_pos = [0.0f64; MAX_BINS];
    let mut hist_neg = [0.0f64; MAX_BINS];
    let mut hist_n = [0usize; MAX_BINS];

    while let Some((id, start, end)) = stack.pop() {
        let node_rows = &rows[start..end];
        let (mut wp, mut wn) = (0.0, 0.0);
        for &r in node_rows {
            if y[r as usize] {
                wp += weight[r as usize];
            } else {
                wn += weight[r as usize];
            }
        }
        let value = wp / (wp + wn);
        if end - start < params.min_samples_split || wp == 0.0 || wn == 0.0 {
            nodes[id] = Node::Leaf { value };
            continue;
        }
        let parent = (wp + wn) * impurity(params.criterion, wp, wn);
        features.shuffle(rng);
        let mut best: Option<(f64, usize, u8)> = None;
        let mut visited = 0;
        for &f in &features {
            if visited >= params.max_features {
                break;
            }
            let col = bins.column(f);
            let nb = bins.edges[f].len();
            hist_pos[..nb].fill(0.0);
            hist_neg[..nb].fill(0.0);
            hist_n[..nb].fill(0);
            for &r in node_rows {
                let c = col[r as usize] as usize;
                hist_n[c] += 1;
                if y[r as usize] {
                    hist_pos[c] += weight[r as usize];
                } else {
                    hist_neg[c] += weight[r as usize];
                }
            }
            if hist_n[..nb].iter().filter(|&&c| c > 0).count() < 2 {
                continue;
            }
            visited += 1;
            let (mut lp, mut ln, mut lc) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                lp += hist_pos[b];
                ln += hist_neg[b];
                lc += hist_n[b];
                if hist_n[b] == 0 || lc == 0 || lc == end - start {
                    continue;
                }
                let (rp, rn) = (wp - lp, wn - ln);
                let child = (lp + ln) * impurity(params.criterion, lp, ln) + (rp + rn) * impurity(params.criterion, rp, rn);
                let gain = parent - child;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, b as u8));
                }
            }
        }
        let Some((_, f, b)) = best else {
            nodes[id] = Node::Leaf { value };
            continue;
        };
        let nl = partition(&mut rows[start..end], bins.column(f), b);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            feature: f as u32,
            bin: b,
            threshold: bins.edges[f][b as usize],
            left: l as u32,
            right: r as u32,
        };
        stack.push((r, start + nl, end));
        stack.push((l, start, start + nl));
    }
    Tree { nodes }
}

pub struct BoostTreeParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub learning_rate: f64,
}

/// Minimum loss reduction for a boosting split.
const MIN_SPLIT_GAIN: f64 = 1e-6;

/// Second-order regression tree on gradients `g` and hessians `h` over the
/// given rows and feature subset. Leaves hold `-lr * G / (H + lambda)`.
pub fn grow_regressor(
    bins: &Bins,
    g: &[f64],
    h: &[f64],
    mut rows: Vec<u32>,
    features: &[usize],
    params: &BoostTreeParams,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
    let mut hg = [0.0f64; MAX_BINS];
    let mut hh = [0.0f64; MAX_BINS];
    let mut hn = [0usize; MAX_BINS];
    let lambda = params.lambda;
    while let Some((id, start, end, depth)) = stack.pop() {
        let node_rows = &rows[start..end];
        let (gs, hs) = node_rows
            .iter()
            .fold((0.0, 0.0), |(a, b), &r| (a + g[r as usize], b + h[r as usize]));
        let value = -params.learning_rate * gs / (hs + lambda);
        if depth >= params.max_depth || end - start < 2 {
            nodes[id] = Node::Leaf { value };
            continue;
        }
        let parent = gs * gs / (hs + lambda);
        let mut best: Option<(f64, usize, u8)> = None;
        for &f in features {
            let col = bins.column(f);
            let nb = bins.edges[f].len();
            if nb < 2 {
                continue;
            }
            hg[..nb].fill(0.0);
            hh[..nb].fill(0.0);
            hn[..nb].fill(0);
            for &r in node_rows {
                let c = col[r as usize] as usize;
                hg[c] += g[r as usize];
                hh[c] += h[r as usize];
                hn[c] += 1;
            }
            let (mut lg, mut lh, mut lc) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                lg += hg[b];
                lh += hh[b];
                lc += hn[b];
                if hn[b] == 0 || lc == 0 || lc == end - start {
                    continue;
                }
                let (rg, rh) = (gs - lg, hs - lh);
                if lh < params.min_child_weight || rh < params.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (lg * lg / (lh + lambda) + rg * rg / (rh + lambda) - parent);
                if gain > MIN_SPLIT_GAIN && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, f, b as u8));
                }
            }
        }
        let Some((_, f, b)) = best else {
            nodes[id] = Node::Leaf { value };
            continue;
        };
        let nl = partition(&mut rows[start..end], bins.column(f), b);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            feature: f as u32,
            bin: b,
            threshold: bins.edges[f][b as usize],
            left: l as u32,
            right: r as u32,
        };
        stack.push((r, start + nl, end, depth + 1));
        stack.push((l, start, start + nl, depth + 1));
    }
    Tree { nodes }
}
