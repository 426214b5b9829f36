//! Conditional variance models fit on squared residuals of the mean model.

use super::ridge::{fit_ridge_cv, RidgeModel};
use super::NuisanceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// A single constant: the mean of the squared residuals.
    Homoskedastic,
    /// Ridge regression of the squared residuals on the covariates.
    Regression,
}

#[derive(Debug, Clone)]
pub enum VarianceModel {
    Constant(f64),
    Ridge(RidgeModel),
}

impl VarianceModel {
    /// Raw model prediction; flooring is applied by the caller so the floor
    /// event can be flagged per observation.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        match self {
            VarianceModel::Constant(v) => *v,
            VarianceModel::Ridge(model) => model.predict(x),
        }
    }
}

pub fn fit_conditional_variance(
    xs: &[Vec<f64>],
    residuals_sq: &[f64],
    mode: VarianceMode,
    lambda_grid: &[f64],
    cv_folds: usize,
    seed: u64,
) -> Result<VarianceModel, NuisanceError> {
    if residuals_sq.is_empty() {
        return Err(NuisanceError::EmptyInput);
    }
    if residuals_sq.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(NuisanceError::NonFiniteTarget);
    }
    match mode {
        VarianceMode::Homoskedastic => {
            Ok(VarianceModel::Constant(
                residuals_sq.iter().sum::<f64>() / residuals_sq.len() as f64,
            ))
        }
        VarianceMode::Regression => Ok(VarianceModel::Ridge(fit_ridge_cv(
            xs,
            residuals_sq,
            lambda_grid,
            cv_folds,
            seed,
        )?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn homoskedastic_is_the_mean() {
        let model = fit_conditional_variance(
            &[vec![0.0], vec![1.0]],
            &[1.0, 3.0],
            VarianceMode::Homoskedastic,
            &[1.0],
            2,
            0,
        )
        .unwrap();
        assert_relative_eq!(model.predict_raw(&[5.0]), 2.0);
    }

    #[test]
    fn regression_mode_tracks_linear_variance() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![1.0 + i as f64 / 10.0]).collect();
        let resid_sq: Vec<f64> = xs.iter().map(|r| 2.0 * r[0]).collect();
        let model = fit_conditional_variance(
            &xs,
            &resid_sq,
            VarianceMode::Regression,
            &[1e-8, 1.0],
            5,
            1,
        )
        .unwrap();
        assert_relative_eq!(model.predict_raw(&[3.0]), 6.0, epsilon = 1e-3);
    }

    #[test]
    fn rejects_empty_and_negative_inputs() {
        assert!(matches!(
            fit_conditional_variance(&[], &[], VarianceMode::Homoskedastic, &[1.0], 2, 0),
            Err(NuisanceError::EmptyInput)
        ));
        assert!(matches!(
            fit_conditional_variance(
                &[vec![0.0]],
                &[-1.0],
                VarianceMode::Homoskedastic,
                &[1.0],
                2,
                0
            ),
            Err(NuisanceError::NonFiniteTarget)
        ));
    }
}
