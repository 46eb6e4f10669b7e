//! Residual stacking: encode where a regressor over- and under-predicts,
//! then fit a linear correction in log space.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureValues, InstanceId, ModelId};
use crate::divergence::DivergenceConfig;
use crate::encoders::{apply_encoders, encoders_for, FeatureEncoder};
use crate::error::{Error, Result};

/// Root mean squared logarithmic error. Values must exceed -1.
pub fn rmsle(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} predictions, {} observations",
            predicted.len(),
            observed.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("rmsle of an empty set".into()));
    }
    if let Some(v) = predicted.iter().chain(observed).find(|v| v.is_nan() || **v <= -1.0) {
        return Err(Error::InvalidArgument(format!("rmsle needs values > -1, got {v}")));
    }
    let sum: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p.ln_1p() - o.ln_1p()).powi(2))
        .sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// Ordinary least squares with an intercept, solved by SVD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    /// `rows[i]` holds the regressors of sample `i`.
    pub fn fit(rows: &[Vec<f64>], target: &[f64]) -> Result<Self> {
        if rows.is_empty() || rows.len() != target.len() {
            return Err(Error::InvalidArgument("least squares needs one target per row".into()));
        }
        let p = rows[0].len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("ragged regressor rows".into()));
        }
        let x = DMatrix::from_fn(rows.len(), p + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        let y = DVector::from_column_slice(target);
        let beta = x
            .svd(true, true)
            .solve(&y, 1e-10)
            .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
        Ok(Self {
            intercept: beta[0],
            coefficients: beta.iter().skip(1).copied().collect(),
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub encoders: Vec<FeatureEncoder>,
    pub model: LinearModel,
    pub base_rmsle: f64,
    pub refined_rmsle: f64,
    /// Corrected predictions for the evaluation instances, in id order.
    pub refined: Vec<f64>,
}

/// Split `train` by residual sign of `model`, encode the features that
/// separate the two halves, fit the log-residual on the encoded columns and
/// score base and corrected predictions on `eval`.
pub fn refine_regressor(
    d: &Dataset,
    model: ModelId,
    train: &BTreeSet<InstanceId>,
    eval: &BTreeSet<InstanceId>,
    threshold: f64,
    cfg: &DivergenceConfig,
) -> Result<RefineReport> {
    d.require_regression()?;
    if model.0 >= d.models.len() {
        return Err(Error::InvalidArgument(format!("unknown model id {}", model.0)));
    }
    if eval.is_empty() {
        return Err(Error::EmptySubset("evaluation set"));
    }
    let pred = |i: InstanceId| d.predicted_value(model, i).expect("regression prediction");
    let obs = |i: InstanceId| d.gt_value(i).expect("regression ground truth");

    let (over, under): (BTreeSet<InstanceId>, BTreeSet<InstanceId>) =
        train.iter().partition(|&&i| pred(i) >= obs(i));
    let encoders = encoders_for(d, &over, &under, threshold, cfg)?;
    let augmented = apply_encoders(d, &encoders)?;
    let columns: Vec<&[f64]> = encoders
        .iter()
        .map(|e| match &augmented.feature(&e.column_name()).expect("encoded column").values {
            FeatureValues::Numeric(v) => v.as_slice(),
            _ => unreachable!("encoded columns are numeric"),
        })
        .collect();
    let row = |i: InstanceId| columns.iter().map(|c| c[i.0]).collect::<Vec<f64>>();

    let rows: Vec<Vec<f64>> = train.iter().map(|&i| row(i)).collect();
    let target: Vec<f64> = train.iter().map(|&i| obs(i).ln_1p() - pred(i).ln_1p()).collect();
    let fitted = LinearModel::fit(&rows, &target)?;

    let base: Vec<f64> = eval.iter().map(|&i| pred(i)).collect();
    let truth: Vec<f64> = eval.iter().map(|&i| obs(i)).collect();
    let refined: Vec<f64> = eval
        .iter()
        .map(|&i| (pred(i).ln_1p() + fitted.predict(&row(i))).exp_m1())
        .collect();
    Ok(RefineReport {
        base_rmsle: rmsle(&base, &truth)?,
        refined_rmsle: rmsle(&refined, &truth)?,
        encoders,
        model: fitted,
        refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy_regression_dataset;

    #[test]
    fn rmsle_values() {
        assert_eq!(rmsle(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        // sqrt(mean([ln 2 ^ 2])) = ln 2
        let v = rmsle(&[1.0], &[0.0]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(rmsle(&[], &[]).is_err());
        assert!(rmsle(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmsle(&[-1.0], &[0.0]).is_err());
    }

    #[test]
    fn least_squares_recovers_plane() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let m = LinearModel::fit(&rows, &y).unwrap();
        assert!((m.intercept - 1.5).abs() < 1e-9);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.coefficients[1] + 0.5).abs() < 1e-9);
        // no regressors: intercept is the mean
        let m = LinearModel::fit(&[vec![], vec![]], &[1.0, 3.0]).unwrap();
        assert!((m.intercept - 2.0).abs() < 1e-12);
    }

    #[test]
    fn toy_regression_runs() {
        let d = toy_regression_dataset();
        let all: BTreeSet<_> = d.instances().collect();
        let r = refine_regressor(&d, ModelId(0), &all, &all, 0.0, &Default::default()).unwrap();
        assert!(r.refined_rmsle <= r.base_rmsle + 1e-12);
        assert_eq!(r.refined.len(), 6);
    }
}
