//! The statistical core: cross-fitted debiased estimation of the moment
//! bounds with influence-function confidence intervals, identifiable-moment
//! estimation, and delta-method composition.

pub mod delta;
pub mod eif;
pub mod estimand;
pub mod identifiable;
pub mod ols;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::dataset::FusedDataset;
use crate::exec::derive_seed;
use crate::numerics::NumericsError;
use crate::nuisance::{
    estimate_nuisances, estimate_nuisances_with_propensity, kfold_split, positivity_report,
    FoldDiagnostics, NuisanceConfig, NuisanceError, PositivityReport,
};

pub use delta::{compose_delta, joint_influence_covariance, ComposedTarget, Component, GradMode};
pub use eif::{eif_lower, eif_upper, plugin_bounds, plugin_bounds_multivariate};
pub use estimand::DecomposableEstimand;
pub use identifiable::{infer_identifiable, IdentifiableTarget};
pub use ols::{ols_coefficient_bounds, OlsConfig, OlsGradKind};

/// Arm values with magnitude above this are rejected before estimation,
/// catching near-singular transforms such as `1/z` at `z -> 0`.
const ARM_VALUE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Nuisance(#[from] NuisanceError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("inference requires a scalar pair (p_f = 1), got p_f = {p_f}")]
    UnsupportedEstimand { p_f: usize },
    #[error("arm value at row {row} is {value:.3e}; not finite or above {ARM_VALUE_LIMIT:.0e}")]
    ArmValueInvalid { row: usize, value: f64 },
    #[error("alpha must lie in (0, 1], got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("influence vectors have mismatched lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("composition matrix is singular or ill-conditioned")]
    SingularComposition,
    #[error("no rows to estimate on")]
    EmptyRows,
    #[error("row {row}: OLS target requires scalar y and z")]
    NonScalarOutcome { row: usize },
    #[error("regression column {col} out of range for p_x = {p_x}")]
    ColumnOutOfRange { col: usize, p_x: usize },
}

/// Estimation settings for one run.
#[derive(Clone)]
pub struct InferConfig {
    pub k_folds: usize,
    pub alpha: f64,
    pub seed: u64,
    pub nuisance: NuisanceConfig,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self { k_folds: 2, alpha: 0.05, seed: 0, nuisance: NuisanceConfig::default() }
    }
}

/// Warning flags attached to a result.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Flags {
    /// The debiased lower estimate exceeded the upper one (possible in small
    /// samples); bounds are reported as-is.
    pub crossed_bounds: bool,
    /// Variance flooring touched more than 1% of rows.
    pub degenerate_variance: bool,
    /// Propensity clipping touched more than 1% of rows.
    pub propensity_clipped: bool,
    /// A composition gradient sat within tolerance of a rectifier kink.
    pub kink_warning: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub flags: Flags,
    pub positivity: Option<PositivityReport>,
    pub fold_fits: Vec<FoldDiagnostics>,
}

/// A two-sided interval for the partially identifiable region, with the
/// per-observation influence values retained for composition.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalResult {
    pub theta_l_hat: f64,
    pub theta_u_hat: f64,
    /// Estimated asymptotic variances `E[phi^2]` of the debiased estimators.
    pub v_l_hat: f64,
    pub v_u_hat: f64,
    pub lcb: f64,
    pub ucb: f64,
    pub alpha: f64,
    pub n: usize,
    #[serde(skip)]
    pub influence_l: Vec<f64>,
    #[serde(skip)]
    pub influence_u: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl IntervalResult {
    pub fn width(&self) -> f64 {
        self.ucb - self.lcb
    }
}

/// Standard normal quantile `q_p`.
pub(crate) fn normal_quantile(p: f64) -> f64 {
    if p <= 0.5 {
        // inverse_cdf(0.5) is exactly 0; alpha = 1 collapses the CI additions.
        return 0.0;
    }
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<(), EstimatorError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(EstimatorError::InvalidAlpha { alpha });
    }
    Ok(())
}

/// Evaluate the scalar arm values `f(y_i, x_i)` (Y-arm rows) and
/// `g(z_i, x_i)` (Z-arm rows), with a support check.
pub(crate) fn arm_values(
    data: &FusedDataset,
    estimand: &DecomposableEstimand,
) -> Result<Vec<f64>, EstimatorError> {
    if estimand.p_f() != 1 {
        return Err(EstimatorError::UnsupportedEstimand { p_f: estimand.p_f() });
    }
    let mut values = Vec::with_capacity(data.n());
    for (i, row) in data.rows().iter().enumerate() {
        let v = match row.y() {
            Some(y) => estimand.f_scalar(y, &row.x),
            None => estimand.g_scalar(row.z().expect("row has y or z"), &row.x),
        };
        if !v.is_finite() || v.abs() > ARM_VALUE_LIMIT {
            return Err(EstimatorError::ArmValueInvalid { row: i, value: v });
        }
        values.push(v);
    }
    Ok(values)
}

/// Assemble an interval from point estimates, influence vectors and
/// diagnostics; CI half-widths are `q_{1 - alpha/2} sqrt(V / n)`.
pub(crate) fn interval_from_parts(
    theta_l: f64,
    theta_u: f64,
    v_l: f64,
    v_u: f64,
    alpha: f64,
    influence_l: Vec<f64>,
    influence_u: Vec<f64>,
    mut diagnostics: Diagnostics,
) -> IntervalResult {
    let n = influence_l.len();
    let q = normal_quantile(1.0 - alpha / 2.0);
    let nf = n as f64;
    diagnostics.flags.crossed_bounds = theta_l > theta_u;
    IntervalResult {
        theta_l_hat: theta_l,
        theta_u_hat: theta_u,
        v_l_hat: v_l,
        v_u_hat: v_u,
        lcb: theta_l - q * (v_l / nf).sqrt(),
        ucb: theta_u + q * (v_u / nf).sqrt(),
        alpha,
        n,
        influence_l,
        influence_u,
        diagnostics,
    }
}

/// Cross-fitted debiased estimation of the moment bounds with a `1 - alpha`
/// confidence interval for the partially identifiable region.
///
/// Per fold: plug-in bounds on the held-out rows, influence values from the
/// out-of-fold nuisances, and the debiased fold estimate
/// `plug-in + fold mean of the influence values`. Folds are aggregated
/// weighted by their size; the variance estimates are the global means of the
/// squared influence values.
pub fn infer(
    data: &FusedDataset,
    estimand: &DecomposableEstimand,
    config: &InferConfig,
) -> Result<IntervalResult, EstimatorError> {
    let folds = kfold_split(data.n(), config.k_folds, config.seed)?;
    infer_with(data, estimand, config, &folds, None)
}

/// Internal variant sharing externally built folds and (optionally) an
/// already-estimated propensity, so composite targets reuse one layout.
pub(crate) fn infer_with(
    data: &FusedDataset,
    estimand: &DecomposableEstimand,
    config: &InferConfig,
    folds: &crate::nuisance::FoldAssignment,
    shared_propensity: Option<&crate::nuisance::PropensityEstimates>,
) -> Result<IntervalResult, EstimatorError> {
    validate_alpha(config.alpha)?;
    let n = data.n();
    let values = arm_values(data, estimand)?;
    let nuisance_seed = derive_seed(config.seed, 0x6e756973);
    let (fit, moments) = match shared_propensity {
        Some(prop) => estimate_nuisances_with_propensity(
            data,
            &values,
            folds,
            &config.nuisance,
            nuisance_seed,
            prop.clone(),
        )?,
        None => estimate_nuisances(data, &values, folds, &config.nuisance, nuisance_seed)?,
    };

    let nf = n as f64;
    let mut influence_l = vec![0.0; n];
    let mut influence_u = vec![0.0; n];
    let mut theta_l = 0.0;
    let mut theta_u = 0.0;
    for k in 0..folds.k_folds() {
        let rows = folds.rows_of(k);
        let nk = rows.len() as f64;
        let (plug_l, plug_u) = plugin_bounds(&moments, &rows);
        let mut sum_l = 0.0;
        let mut sum_u = 0.0;
        for &i in &rows {
            let row = data.row(i);
            let m = &moments.rows[i];
            influence_l[i] = eif_lower(row.r(), values[i], m, plug_l);
            influence_u[i] = eif_upper(row.r(), values[i], m, plug_u);
            sum_l += influence_l[i];
            sum_u += influence_u[i];
        }
        theta_l += nk / nf * (plug_l + sum_l / nk);
        theta_u += nk / nf * (plug_u + sum_u / nk);
    }

    let v_l = influence_l.iter().map(|p| p * p).sum::<f64>() / nf;
    let v_u = influence_u.iter().map(|p| p * p).sum::<f64>() / nf;

    let positivity = positivity_report(&moments);
    let diagnostics = Diagnostics {
        flags: Flags {
            degenerate_variance: positivity.floor_warning,
            propensity_clipped: positivity.clip_warning,
            ..Flags::default()
        },
        positivity: Some(positivity),
        fold_fits: fit.diagnostics(),
    };

    Ok(interval_from_parts(
        theta_l,
        theta_u,
        v_l,
        v_u,
        config.alpha,
        influence_l,
        influence_u,
        diagnostics,
    ))
}
