//! Pluggable per-arm learners producing conditional mean and variance
//! functions from training pairs `(x_i, t_i)`.

use super::ridge::{default_lambda_grid, fit_ridge_cv, RidgeModel};
use super::variance::{fit_conditional_variance, VarianceMode, VarianceModel};
use super::NuisanceError;
use crate::exec::derive_seed;

/// Training diagnostics surfaced in reports.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct FitDiagnostics {
    pub chosen_lambda: Option<f64>,
    pub cv_loss: Option<f64>,
}

/// A fitted conditional mean/variance pair for one arm.
pub trait ArmMomentModel: Send + Sync {
    fn mean_at(&self, x: &[f64]) -> f64;
    /// Raw conditional variance prediction, before flooring.
    fn variance_at(&self, x: &[f64]) -> f64;
    fn diagnostics(&self) -> FitDiagnostics;
}

/// Fits an [`ArmMomentModel`] on the training rows of one arm.
pub trait ArmLearner: Send + Sync {
    fn fit(
        &self,
        xs: &[Vec<f64>],
        targets: &[f64],
        seed: u64,
    ) -> Result<Box<dyn ArmMomentModel>, NuisanceError>;

    /// Short identifier used in configuration echoes.
    fn name(&self) -> &'static str;
}

/// Ridge mean model plus a variance model fit on its in-sample squared
/// residuals.
#[derive(Debug, Clone)]
pub struct RidgeLearner {
    pub lambda_grid: Option<Vec<f64>>,
    pub cv_folds: usize,
    pub variance_mode: VarianceMode,
}

impl Default for RidgeLearner {
    fn default() -> Self {
        Self { lambda_grid: None, cv_folds: 5, variance_mode: VarianceMode::Homoskedastic }
    }
}

struct RidgeMomentModel {
    mean: RidgeModel,
    variance: VarianceModel,
}

impl ArmMomentModel for RidgeMomentModel {
    fn mean_at(&self, x: &[f64]) -> f64 {
        self.mean.predict(x)
    }

    fn variance_at(&self, x: &[f64]) -> f64 {
        self.variance.predict_raw(x)
    }

    fn diagnostics(&self) -> FitDiagnostics {
        FitDiagnostics {
            chosen_lambda: Some(self.mean.chosen_lambda),
            cv_loss: self.mean.cv_loss,
        }
    }
}

impl ArmLearner for RidgeLearner {
    fn fit(
        &self,
        xs: &[Vec<f64>],
        targets: &[f64],
        seed: u64,
    ) -> Result<Box<dyn ArmMomentModel>, NuisanceError> {
        let p = xs.first().map(|r| r.len()).unwrap_or(0);
        let grid = self
            .lambda_grid
            .clone()
            .unwrap_or_else(|| default_lambda_grid(xs.len(), p));
        let mean = fit_ridge_cv(xs, targets, &grid, self.cv_folds, derive_seed(seed, 1))?;
        let residuals_sq: Vec<f64> = xs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let r = t - mean.predict(x);
                r * r
            })
            .collect();
        let variance = fit_conditional_variance(
            xs,
            &residuals_sq,
            self.variance_mode,
            &grid,
            self.cv_folds,
            derive_seed(seed, 2),
        )?;
        Ok(Box::new(RidgeMomentModel { mean, variance }))
    }

    fn name(&self) -> &'static str {
        "ridge-cv"
    }
}

/// Learner for strictly positive targets that are log-scale Gaussian with a
/// linear log-mean and constant log-variance: fits ridge on `ln t`, then maps
/// back with the lognormal moment formulas.
#[derive(Debug, Clone)]
pub struct LogGaussianLearner {
    pub lambda_grid: Option<Vec<f64>>,
    pub cv_folds: usize,
}

impl Default for LogGaussianLearner {
    fn default() -> Self {
        Self { lambda_grid: None, cv_folds: 5 }
    }
}

struct LogGaussianModel {
    log_mean: RidgeModel,
    sigma2: f64,
}

impl ArmMomentModel for LogGaussianModel {
    fn mean_at(&self, x: &[f64]) -> f64 {
        (self.log_mean.predict(x) + 0.5 * self.sigma2).exp()
    }

    fn variance_at(&self, x: &[f64]) -> f64 {
        (self.sigma2.exp() - 1.0) * (2.0 * self.log_mean.predict(x) + self.sigma2).exp()
    }

    fn diagnostics(&self) -> FitDiagnostics {
        FitDiagnostics {
            chosen_lambda: Some(self.log_mean.chosen_lambda),
            cv_loss: self.log_mean.cv_loss,
        }
    }
}

impl ArmLearner for LogGaussianLearner {
    fn fit(
        &self,
        xs: &[Vec<f64>],
        targets: &[f64],
        seed: u64,
    ) -> Result<Box<dyn ArmMomentModel>, NuisanceError> {
        if targets.iter().any(|t| *t <= 0.0) {
            return Err(NuisanceError::NonPositiveTarget);
        }
        let log_targets: Vec<f64> = targets.iter().map(|t| t.ln()).collect();
        let p = xs.first().map(|r| r.len()).unwrap_or(0);
        let grid = self
            .lambda_grid
            .clone()
            .unwrap_or_else(|| default_lambda_grid(xs.len(), p));
        let log_mean =
            fit_ridge_cv(xs, &log_targets, &grid, self.cv_folds, derive_seed(seed, 1))?;
        let sigma2 = xs
            .iter()
            .zip(&log_targets)
            .map(|(x, t)| {
                let r = t - log_mean.predict(x);
                r * r
            })
            .sum::<f64>()
            / xs.len() as f64;
        Ok(Box::new(LogGaussianModel { log_mean, sigma2 }))
    }

    fn name(&self) -> &'static str {
        "log-gaussian-ridge-cv"
    }
}
