//! Cross-fitted estimation of identifiable moments: `E[phi(X)]`,
//! `E[phi(X) f(Y,X)]` (Y-arm) and `E[phi(X) g(Z,X)]` (Z-arm).
//!
//! These are the variance-free reductions of the bound estimator: the
//! augmented inverse-propensity form
//! `ind/p (t - m_t(x)) + m_t(x)` debiases the plug-in mean of the regression
//! `m_t`, and the lower and upper estimates coincide.

use std::sync::Arc;

use crate::dataset::FusedDataset;
use crate::exec::derive_seed;
use crate::nuisance::{
    estimate_propensity, kfold_split, FoldAssignment, NuisanceError, PropensityEstimates,
};

use super::{
    interval_from_parts, validate_alpha, Diagnostics, EstimatorError, Flags, InferConfig,
    IntervalResult,
};

type XFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ArmFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A point-identifiable moment of the fused data.
#[derive(Clone)]
pub enum IdentifiableTarget {
    /// `E[phi(X)]`: a plain mean over all rows.
    XMoment { phi: XFn },
    /// `E[phi(X) f(Y, X)]`, observable on the Y arm.
    YArm { phi: XFn, f: ArmFn },
    /// `E[phi(X) g(Z, X)]`, observable on the Z arm.
    ZArm { phi: XFn, g: ArmFn },
}

impl IdentifiableTarget {
    pub fn x_moment<P>(phi: P) -> Self
    where
        P: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        IdentifiableTarget::XMoment { phi: Arc::new(phi) }
    }

    pub fn y_arm<P, F>(phi: P, f: F) -> Self
    where
        P: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        IdentifiableTarget::YArm { phi: Arc::new(phi), f: Arc::new(f) }
    }

    pub fn z_arm<P, G>(phi: P, g: G) -> Self
    where
        P: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        IdentifiableTarget::ZArm { phi: Arc::new(phi), g: Arc::new(g) }
    }
}

fn check_value(row: usize, v: f64) -> Result<f64, EstimatorError> {
    if !v.is_finite() || v.abs() > super::ARM_VALUE_LIMIT {
        return Err(EstimatorError::ArmValueInvalid { row, value: v });
    }
    Ok(v)
}

/// Point result assembled from a single estimate and influence vector.
fn point_interval(theta: f64, influence: Vec<f64>, alpha: f64, diagnostics: Diagnostics) -> IntervalResult {
    let v = influence.iter().map(|p| p * p).sum::<f64>() / influence.len() as f64;
    interval_from_parts(theta, theta, v, v, alpha, influence.clone(), influence, diagnostics)
}

/// Cross-fitted estimate of an identifiable moment with `L = U`.
pub fn infer_identifiable(
    data: &FusedDataset,
    target: &IdentifiableTarget,
    config: &InferConfig,
) -> Result<IntervalResult, EstimatorError> {
    validate_alpha(config.alpha)?;
    match target {
        IdentifiableTarget::XMoment { .. } => infer_identifiable_with(data, target, config, None, None),
        _ => {
            let folds = kfold_split(data.n(), config.k_folds, config.seed)?;
            let propensity = estimate_propensity(
                data,
                &folds,
                &config.nuisance.propensity,
                config.nuisance.propensity_clip,
                derive_seed(config.seed, 0x65686174),
            )?;
            infer_identifiable_with(data, target, config, Some(&folds), Some(&propensity))
        }
    }
}

/// Internal variant that reuses externally built folds and propensity
/// estimates, so composite targets share one cross-fitting layout.
pub(crate) fn infer_identifiable_with(
    data: &FusedDataset,
    target: &IdentifiableTarget,
    config: &InferConfig,
    folds: Option<&FoldAssignment>,
    propensity: Option<&PropensityEstimates>,
) -> Result<IntervalResult, EstimatorError> {
    let n = data.n();
    let nf = n as f64;

    if let IdentifiableTarget::XMoment { phi } = target {
        let mut values = Vec::with_capacity(n);
        for (i, row) in data.rows().iter().enumerate() {
            values.push(check_value(i, phi(&row.x))?);
        }
        let theta = values.iter().sum::<f64>() / nf;
        let influence: Vec<f64> = values.iter().map(|v| v - theta).collect();
        return Ok(point_interval(theta, influence, config.alpha, Diagnostics::default()));
    }

    let folds = folds.ok_or(EstimatorError::EmptyRows)?;
    let propensity = propensity.ok_or(EstimatorError::EmptyRows)?;
    if folds.n() != n || propensity.e.len() != n {
        return Err(EstimatorError::LengthMismatch { left: folds.n(), right: n });
    }

    // Arm membership, per-row target values on the arm, learner for m_t.
    let (is_member, t_values, learner): (Vec<bool>, Vec<f64>, _) = match target {
        IdentifiableTarget::YArm { phi, f } => {
            let members: Vec<bool> = data.rows().iter().map(|r| r.r()).collect();
            let mut values = vec![0.0; n];
            for (i, row) in data.rows().iter().enumerate() {
                if let Some(y) = row.y() {
                    values[i] = check_value(i, phi(&row.x) * f(y, &row.x))?;
                }
            }
            (members, values, config.nuisance.y_learner.clone())
        }
        IdentifiableTarget::ZArm { phi, g } => {
            let members: Vec<bool> = data.rows().iter().map(|r| !r.r()).collect();
            let mut values = vec![0.0; n];
            for (i, row) in data.rows().iter().enumerate() {
                if let Some(z) = row.z() {
                    values[i] = check_value(i, phi(&row.x) * g(z, &row.x))?;
                }
            }
            (members, values, config.nuisance.z_learner.clone())
        }
        IdentifiableTarget::XMoment { .. } => unreachable!("handled above"),
    };

    // Fold-wise regression of t on x over training arm rows, then the
    // augmented estimate on the held-out rows.
    let mut influence = vec![0.0; n];
    let mut theta = 0.0;
    for k in 0..folds.k_folds() {
        let train = folds.training_of(k);
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        for &i in &train {
            if is_member[i] {
                xs.push(data.row(i).x.clone());
                ts.push(t_values[i]);
            }
        }
        if xs.is_empty() {
            let arm = if matches!(target, IdentifiableTarget::YArm { .. }) { "y" } else { "z" };
            return Err(NuisanceError::EmptyArm { fold: k, arm }.into());
        }
        let model = learner.fit(
            &xs,
            &ts,
            derive_seed(config.seed, 0x61697077 + k as u64),
        )?;

        let rows = folds.rows_of(k);
        let nk = rows.len() as f64;
        let mut plug = 0.0;
        for &i in &rows {
            plug += model.mean_at(&data.row(i).x);
        }
        plug /= nk;

        let mut sum_phi = 0.0;
        for &i in &rows {
            let m_t = model.mean_at(&data.row(i).x);
            let p = if matches!(target, IdentifiableTarget::YArm { .. }) {
                propensity.e[i]
            } else {
                1.0 - propensity.e[i]
            };
            let ind = if is_member[i] { 1.0 } else { 0.0 };
            influence[i] = ind / p * (t_values[i] - m_t) + m_t - plug;
            sum_phi += influence[i];
        }
        theta += nk / nf * (plug + sum_phi / nk);
    }

    let clip_count = propensity.clipped.iter().filter(|c| **c).count();
    let diagnostics = Diagnostics {
        flags: Flags {
            propensity_clipped: clip_count as f64 > 0.01 * nf,
            ..Flags::default()
        },
        ..Diagnostics::default()
    };
    Ok(point_interval(theta, influence, config.alpha, diagnostics))
}
