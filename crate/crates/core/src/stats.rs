//! Rank statistics for exploratory feature analysis: Mann-Whitney U with an
//! exact null distribution for small samples, Cohen-r effect size, and
//! threshold-based feature selection.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Samples with at most this many pooled observations use the exact null
/// distribution.
pub const EXACT_MAX_N: usize = 20;
pub const P_THRESHOLD: f64 = 0.05;
pub const R_THRESHOLD: f64 = 0.30;

/// Quantile with linear interpolation between order statistics
/// (position `(n - 1) * q`). Sorts `values` in place.
pub fn quantile_linear(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    values.sort_by(f64::total_cmp);
    quantile_sorted(values, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 1-based ranks with ties sharing the average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the groups of tied values.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: rank sum of `a` minus `n_a (n_a + 1) / 2`.
    pub u: f64,
    /// Continuity-corrected, tie-corrected z; positive when `a` tends larger.
    pub z: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

struct RankSummary {
    n_a: usize,
    n_b: usize,
    u: f64,
    ranks: Vec<f64>,
    ties: Vec<usize>,
}

fn summarize(a: &[f64], b: &[f64]) -> Result<RankSummary> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation(
            "Mann-Whitney U needs two non-empty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("Mann-Whitney U on non-finite value".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let n_a = a.len();
    let r_a: f64 = ranks[..n_a].iter().sum();
    let u = r_a - (n_a * (n_a + 1)) as f64 / 2.0;
    Ok(RankSummary {
        n_a,
        n_b: b.len(),
        u,
        ranks,
        ties: tie_groups(&pooled),
    })
}

fn z_score(s: &RankSummary) -> f64 {
    let (na, nb) = (s.n_a as f64, s.n_b as f64);
    let n = na + nb;
    let mu = na * nb / 2.0;
    let tie_term: f64 = s.ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 0.0;
    }
    let diff = s.u - mu;
    let corrected = (diff.abs() - 0.5).max(0.0);
    diff.signum() * corrected / var.sqrt()
}

fn two_sided_normal_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0)
}

/// Normal approximation with tie and continuity correction, at any n.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    let s = summarize(a, b)?;
    let z = z_score(&s);
    Ok(MannWhitney {
        u: s.u,
        z,
        p_two_sided: two_sided_normal_p(z),
        exact: false,
    })
}

/// Exact two-sided p under the permutation null, conditional on the observed
/// (tied) ranks. Counts subsets of pooled positions by doubled rank sum.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    let s = summarize(a, b)?;
    let n = s.n_a + s.n_b;
    if n > 62 {
        return Err(Error::Validation(format!(
            "exact Mann-Whitney limited to 62 pooled observations, got {n}"
        )));
    }
    // Doubled midranks are integers.
    let doubled: Vec<usize> = s.ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let k = s.n_a;
    // ways[j][t]: subsets of size j with doubled rank sum t.
    let mut ways = vec![vec![0u128; max_sum + 1]; k + 1];
    ways[0][0] = 1;
    for &r in &doubled {
        for j in (1..=k).rev() {
            let (lower, upper) = ways.split_at_mut(j);
            let src = &lower[j - 1];
            let dst = &mut upper[0];
            for t in (r..=max_sum).rev() {
                dst[t] += src[t - r];
            }
        }
    }
    // 2U = 2R - n_a (n_a + 1); compare |2U - n_a n_b| in integers.
    let offset = (k * (k + 1)) as i64;
    let center = (s.n_a * s.n_b) as i64;
    let observed = ((s.u * 2.0).round() as i64 - center).abs();
    let mut extreme = 0u128;
    let mut total = 0u128;
    for (t, &w) in ways[k].iter().enumerate() {
        if w == 0 {
            continue;
        }
        total += w;
        if (t as i64 - offset - center).abs() >= observed {
            extreme += w;
        }
    }
    let p = (extreme as f64 / total as f64).min(1.0);
    Ok(MannWhitney {
        u: s.u,
        z: z_score(&s),
        p_two_sided: p,
        exact: true,
    })
}

/// Exact p for pooled n ≤ [`EXACT_MAX_N`], normal approximation otherwise.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.len() + b.len() <= EXACT_MAX_N {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

/// Effect size r = |z| / sqrt(N).
pub fn cohen_r(z: f64, n_total: usize) -> f64 {
    debug_assert!(n_total >= 2);
    z.abs() / (n_total as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTestResult {
    pub feature_name: String,
    pub u_statistic: f64,
    pub z_value: f64,
    pub p_value: f64,
    pub cohen_r: f64,
    pub selected: bool,
}

impl FeatureTestResult {
    pub fn new(feature_name: impl Into<String>, mw: MannWhitney, n_total: usize) -> Self {
        let r = cohen_r(mw.z, n_total);
        FeatureTestResult {
            feature_name: feature_name.into(),
            u_statistic: mw.u,
            z_value: mw.z,
            p_value: mw.p_two_sided,
            cohen_r: r,
            selected: is_selected(mw.p_two_sided, r),
        }
    }
}

pub fn is_selected(p: f64, r: f64) -> bool {
    p < P_THRESHOLD && r >= R_THRESHOLD
}

/// Tests every column of `m` (depression rows as the first sample), without
/// multiple-comparison correction. Results are sorted by feature name.
pub fn select_features(m: &FeatureMatrix) -> Result<Vec<FeatureTestResult>> {
    let pos: Vec<usize> = (0..m.n_rows()).filter(|&i| m.labels[i].is_positive()).collect();
    let neg: Vec<usize> = (0..m.n_rows()).filter(|&i| !m.labels[i].is_positive()).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Degenerate(
            "feature selection needs both classes present".into(),
        ));
    }
    let mut out = (0..m.n_cols())
        .into_par_iter()
        .map(|j| {
            let col = m.column(j);
            let a: Vec<f64> = pos.iter().map(|&i| col[i]).collect();
            let b: Vec<f64> = neg.iter().map(|&i| col[i]).collect();
            mann_whitney(&a, &b).map(|mw| FeatureTestResult::new(&m.names[j], mw, m.n_rows()))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| x.feature_name.cmp(&y.feature_name));
    Ok(out)
}

pub fn selected_names(results: &[FeatureTestResult]) -> Vec<String> {
    results
        .iter()
        .filter(|r| r.selected)
        .map(|r| r.feature_name.clone())
        .collect()
}

/// Tab-separated export: feature_name, u, z, p, r, selected.
pub fn write_results(path: &Path, results: &[FeatureTestResult]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("feature_name\tu\tz\tp\tr\tselected\n");
    for r in results {
        text.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6e}\t{:.6}\t{}\n",
            r.feature_name, r.u_statistic, r.z_value, r.p_value, r.cohen_r, r.selected
        ));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    #[test]
    fn percentile_of_one_to_hundred() {
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile_linear(&mut v, 0.5), 50.5);
        assert_eq!(quantile_linear(&mut v, 0.0), 1.0);
        assert_eq!(quantile_linear(&mut v, 1.0), 100.0);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn identical_samples_show_no_effect() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.p_two_sided >= 0.99);
        assert!(r.z.abs() < 1e-12);
    }

    #[test]
    fn fully_separated_three_vs_three() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!(r.exact);
        assert_eq!(r.u, 0.0);
        // 2 / C(6,3)
        assert!((r.p_two_sided - 0.1).abs() < 1e-15);
        assert!(r.z < 0.0);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(mann_whitney(&[], &[1.0]).is_err());
        assert!(mann_whitney(&[1.0], &[]).is_err());
    }

    #[test]
    fn swapping_samples_flips_z() {
        let a = [1.0, 5.0, 2.0, 8.0, 8.0];
        let b = [3.0, 9.0, 9.0, 10.0];
        let x = mann_whitney(&a, &b).unwrap();
        let y = mann_whitney(&b, &a).unwrap();
        assert_eq!(x.z, -y.z);
        assert_eq!(x.p_two_sided, y.p_two_sided);
        assert_eq!(x.u + y.u, 20.0);
    }

    #[test]
    fn cohen_r_arithmetic() {
        assert_eq!(cohen_r(0.0, 10), 0.0);
        assert_eq!(cohen_r(3.0, 9), 1.0);
        assert_eq!(cohen_r(-3.0, 9), 1.0);
    }

    #[test]
    fn selection_boundaries() {
        assert!(!is_selected(0.04, 0.29));
        assert!(!is_selected(0.06, 0.50));
        assert!(is_selected(0.04, 0.30));
    }

    #[test]
    fn constant_feature_is_never_selected() {
        let mut m = FeatureMatrix::new(vec!["c".into(), "s".into()]);
        for i in 0..30 {
            let label = Label::from_positive(i < 15);
            let shift = if i < 15 { 10.0 } else { 0.0 };
            m.push_row(format!("{i}"), format!("{i}"), label, &[1.0, shift + i as f64 * 0.01])
                .unwrap();
        }
        let res = select_features(&m).unwrap();
        assert_eq!(res[0].feature_name, "c");
        assert_eq!(res[0].p_value, 1.0);
        assert_eq!(res[0].cohen_r, 0.0);
        assert!(!res[0].selected);
        assert!(res[1].selected);
    }

    proptest::proptest! {
        #[test]
        fn u_statistics_sum_to_product(
            a in proptest::collection::vec(0i32..8, 1..15),
            b in proptest::collection::vec(0i32..8, 1..15),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let x = mann_whitney(&a, &b).unwrap();
            let y = mann_whitney(&b, &a).unwrap();
            proptest::prop_assert!((x.u + y.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        }

        #[test]
        fn rank_test_invariant_under_monotone_transform(
            a in proptest::collection::vec(-50.0f64..50.0, 1..25),
            b in proptest::collection::vec(-50.0f64..50.0, 1..25),
        ) {
            let f = |v: &f64| (v / 10.0).exp() * 3.0 + 1.0;
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            let x = mann_whitney(&a, &b).unwrap();
            let y = mann_whitney(&ta, &tb).unwrap();
            proptest::prop_assert_eq!(x.u, y.u);
            proptest::prop_assert_eq!(x.z, y.z);
            proptest::prop_assert_eq!(x.p_two_sided, y.p_two_sided);
        }
    }
}
