use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::stats::quantile_linear;

/// Per-feature median and interquartile range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScalerParams {
    pub corpus_id: String,
    pub names: Vec<String>,
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
}

pub fn fit_robust_scaler(m: &FeatureMatrix, corpus_id: &str) -> Result<RobustScalerParams> {
    if m.n_rows() < 2 {
        return Err(Error::Degenerate(format!(
            "robust scaler for {corpus_id} needs at least 2 rows, got {}",
            m.n_rows()
        )));
    }
    let (median, iqr) = (0..m.n_cols())
        .map(|j| {
            let mut col = m.column(j);
            let q1 = quantile_linear(&mut col, 0.25);
            let q2 = quantile_linear(&mut col, 0.5);
            let q3 = quantile_linear(&mut col, 0.75);
            (q2, (q3 - q1).max(0.0))
        })
        .unzip();
    Ok(RobustScalerParams {
        corpus_id: corpus_id.to_string(),
        names: m.names.clone(),
        median,
        iqr,
    })
}

impl RobustScalerParams {
    /// `(x - median) / iqr`; columns with zero IQR are only centered.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.names != self.names {
            return Err(Error::Integrity(format!(
                "scaler fitted on {} columns of corpus {} does not match the matrix",
                self.names.len(),
                self.corpus_id
            )));
        }
        let mut out = m.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let s = if self.iqr[j] > 0.0 { self.iqr[j] } else { 1.0 };
                *v = (*v - self.median[j]) / s;
            }
        }
        Ok(out)
    }

    pub fn select(&self, names: &[String]) -> Result<RobustScalerParams> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|x| x == n)
                    .ok_or_else(|| Error::Integrity(format!("scaler has no column {n}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(RobustScalerParams {
            corpus_id: self.corpus_id.clone(),
            names: names.to_vec(),
            median: idx.iter().map(|&j| self.median[j]).collect(),
            iqr: idx.iter().map(|&j| self.iqr[j]).collect(),
        })
    }
}

/// Fits on `m` and transforms it.
pub fn fit_transform(m: &FeatureMatrix, corpus_id: &str) -> Result<(RobustScalerParams, FeatureMatrix)> {
    let p = fit_robust_scaler(m, corpus_id)?;
    let t = p.apply(m)?;
    Ok((p, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use proptest::prelude::*;

    fn column(v: &[f64]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(vec!["x".into()]);
        for (i, &x) in v.iter().enumerate() {
            m.push_row(format!("k{i}"), format!("s{i}"), Label::NoDepression, &[x]).unwrap();
        }
        m
    }

    #[test]
    fn iqr_ignores_outlier_magnitude() {
        let a = fit_robust_scaler(&column(&[1.0, 2.0, 3.0, 4.0, 100.0]), "a").unwrap();
        let b = fit_robust_scaler(&column(&[1.0, 2.0, 3.0, 4.0, 1e6]), "a").unwrap();
        assert_eq!(a.iqr, [2.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn constant_column_only_centered() {
        let (p, t) = fit_transform(&column(&[5.0; 4]), "a").unwrap();
        assert_eq!(p.iqr, [0.0]);
        assert!(t.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_few_rows() {
        assert!(fit_robust_scaler(&column(&[1.0]), "a").is_err());
    }

    #[test]
    fn mismatched_columns_rejected() {
        let p = fit_robust_scaler(&column(&[1.0, 2.0]), "a").unwrap();
        let other = FeatureMatrix::new(vec!["y".into()]);
        assert!(p.apply(&other).is_err());
    }

    proptest! {
        #[test]
        fn transformed_median_zero_iqr_one(v in proptest::collection::vec(-1e3f64..1e3, 2..80)) {
            let (p, t) = fit_transform(&column(&v), "a").unwrap();
            let mut col = t.column(0);
            let med = quantile_linear(&mut col, 0.5);
            prop_assert!(med.abs() < 1e-9);
            if p.iqr[0] > 1e-9 {
                let iqr = quantile_linear(&mut col, 0.75) - quantile_linear(&mut col, 0.25);
                prop_assert!((iqr - 1.0).abs() < 1e-9);
            }
        }
    }
}
