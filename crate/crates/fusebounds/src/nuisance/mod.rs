//! Cross-fitting fold management and the built-in estimators for the five
//! conditional functions: the arm means `m_Y, m_Z`, the arm variances
//! `v_Y, v_Z`, and the propensity `e`.
//!
//! Out-of-fold purity is the central contract: the models evaluated on fold
//! `k` were trained only on rows outside fold `k`, so an observation's moment
//! estimates never depend on responses inside its own fold.

pub mod learner;
pub mod logistic;
pub mod ridge;
pub mod variance;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::FusedDataset;
use crate::exec::derive_seed;
use learner::{ArmLearner, ArmMomentModel, FitDiagnostics};
use logistic::{fit_logistic_ridge_cv, LogisticModel};

#[derive(Debug, Error)]
pub enum NuisanceError {
    #[error("need 2 <= k_folds <= n, got k_folds={k_folds}, n={n}")]
    TooFewObservations { n: usize, k_folds: usize },
    #[error("degenerate design: {n} rows")]
    DegenerateDesign { n: usize },
    #[error("non-finite regression target")]
    NonFiniteTarget,
    #[error("lambda grid must be nonempty with finite nonnegative entries")]
    InvalidLambdaGrid,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("empty input")]
    EmptyInput,
    #[error("training set for fold {fold} has no rows in the {arm} arm")]
    EmptyArm { fold: usize, arm: &'static str },
    #[error("log-scale learner requires strictly positive targets")]
    NonPositiveTarget,
    #[error("linear solve failed")]
    SolveFailed,
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// A deterministic assignment of `n` observations to `k_folds` folds whose
/// sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    n: usize,
    k_folds: usize,
    assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_folds(&self) -> usize {
        self.k_folds
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Indices evaluated in fold `k` (ascending).
    pub fn rows_of(&self, k: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == k).collect()
    }

    /// Indices the fold-`k` models are trained on (ascending).
    pub fn training_of(&self, k: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != k).collect()
    }
}

/// Shuffle indices with a seeded PRNG (Fisher-Yates) and deal fold labels
/// round-robin, so fold sizes differ by at most one and the assignment is
/// reproducible from `(n, k_folds, seed)`.
pub fn kfold_split(n: usize, k_folds: usize, seed: u64) -> Result<FoldAssignment, NuisanceError> {
    if k_folds < 2 || k_folds > n {
        return Err(NuisanceError::TooFewObservations { n, k_folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % k_folds;
    }
    Ok(FoldAssignment { n, k_folds, assignment })
}

/// How the propensity `e(x) = P(R = 1 | X = x)` is obtained.
#[derive(Clone)]
pub enum PropensityConfig {
    /// Cross-validated ridge logistic regression on the training rows.
    EstimateLogisticCv {
        lambda_grid: Option<Vec<f64>>,
        cv_folds: usize,
        max_iter: usize,
        tol: f64,
    },
    /// Known propensity supplied analytically; estimation is bypassed.
    Known(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl PropensityConfig {
    pub fn default_estimated() -> Self {
        PropensityConfig::EstimateLogisticCv {
            lambda_grid: None,
            cv_folds: 5,
            max_iter: 100,
            tol: 1e-8,
        }
    }

    pub fn known_constant(e: f64) -> Self {
        PropensityConfig::Known(Arc::new(move |_: &[f64]| e))
    }

    pub fn describe(&self) -> String {
        match self {
            PropensityConfig::EstimateLogisticCv { .. } => "logistic-ridge-cv".to_string(),
            PropensityConfig::Known(_) => "known".to_string(),
        }
    }
}

/// Learner settings for the five conditional functions.
#[derive(Clone)]
pub struct NuisanceConfig {
    pub y_learner: Arc<dyn ArmLearner>,
    pub z_learner: Arc<dyn ArmLearner>,
    pub propensity: PropensityConfig,
    /// Clip the evaluated propensity to `[c, 1 - c]`; off by default.
    pub propensity_clip: Option<f64>,
    /// Absolute variance floor; when unset, each fold uses
    /// `1e-8 x` the sample variance of its training-arm targets.
    pub variance_floor: Option<f64>,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            y_learner: Arc::new(learner::RidgeLearner::default()),
            z_learner: Arc::new(learner::RidgeLearner::default()),
            propensity: PropensityConfig::default_estimated(),
            propensity_clip: None,
            variance_floor: None,
        }
    }
}

/// Relative factor of the default per-fold variance floor.
const DEFAULT_FLOOR_FACTOR: f64 = 1e-8;

/// Fitted propensity for one fold.
#[derive(Clone)]
pub enum PropensityFit {
    Known,
    Logistic(LogisticModel),
}

/// Out-of-fold propensity evaluations for every row, with per-fold fits.
#[derive(Clone)]
pub struct PropensityEstimates {
    pub e: Vec<f64>,
    pub clipped: Vec<bool>,
    pub fits: Vec<PropensityFit>,
}

/// Fit the propensity fold by fold (or evaluate the known function) and
/// return its out-of-fold value for every observation, clipped when
/// configured.
pub fn estimate_propensity(
    data: &FusedDataset,
    folds: &FoldAssignment,
    config: &PropensityConfig,
    clip: Option<f64>,
    seed: u64,
) -> Result<PropensityEstimates, NuisanceError> {
    let n = data.n();
    if folds.n() != n {
        return Err(NuisanceError::LengthMismatch { left: folds.n(), right: n });
    }
    let mut fits = Vec::with_capacity(folds.k_folds());
    for k in 0..folds.k_folds() {
        let fit = match config {
            PropensityConfig::Known(_) => PropensityFit::Known,
            PropensityConfig::EstimateLogisticCv { lambda_grid, cv_folds, max_iter, tol } => {
                let train = folds.training_of(k);
                let xs: Vec<Vec<f64>> = train.iter().map(|&i| data.row(i).x.clone()).collect();
                let labels: Vec<bool> = train.iter().map(|&i| data.row(i).r()).collect();
                let grid = lambda_grid.clone().unwrap_or_else(default_logistic_grid);
                PropensityFit::Logistic(fit_logistic_ridge_cv(
                    &xs,
                    &labels,
                    &grid,
                    *cv_folds,
                    derive_seed(seed, 0x70726f70 + k as u64),
                    *max_iter,
                    *tol,
                )?)
            }
        };
        fits.push(fit);
    }

    let mut e = Vec::with_capacity(n);
    let mut clipped = Vec::with_capacity(n);
    for i in 0..n {
        let x = &data.row(i).x;
        let raw = match (&fits[folds.fold_of(i)], config) {
            (PropensityFit::Known, PropensityConfig::Known(func)) => func(x),
            (PropensityFit::Logistic(model), _) => model.predict_proba(x),
            (PropensityFit::Known, _) => unreachable!("known fit without known config"),
        };
        match clip {
            Some(c) => {
                let v = raw.clamp(c, 1.0 - c);
                clipped.push(v != raw);
                e.push(v);
            }
            None => {
                clipped.push(false);
                e.push(raw);
            }
        }
    }
    Ok(PropensityEstimates { e, clipped, fits })
}

/// Out-of-fold arm models for one fold.
pub struct FoldFit {
    pub y_model: Box<dyn ArmMomentModel>,
    pub z_model: Box<dyn ArmMomentModel>,
    pub variance_floor_y: f64,
    pub variance_floor_z: f64,
}

/// Per-fold fitted models plus training diagnostics.
pub struct NuisanceFit {
    pub folds: Vec<FoldFit>,
    pub propensity: PropensityEstimates,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct FoldDiagnostics {
    pub y: FitDiagnostics,
    pub z: FitDiagnostics,
    pub propensity_lambda: Option<f64>,
    pub propensity_converged: Option<bool>,
    pub variance_floor_y: f64,
    pub variance_floor_z: f64,
}

impl NuisanceFit {
    pub fn diagnostics(&self) -> Vec<FoldDiagnostics> {
        self.folds
            .iter()
            .zip(&self.propensity.fits)
            .map(|(f, p)| FoldDiagnostics {
                y: f.y_model.diagnostics(),
                z: f.z_model.diagnostics(),
                propensity_lambda: match p {
                    PropensityFit::Logistic(m) => Some(m.chosen_lambda),
                    PropensityFit::Known => None,
                },
                propensity_converged: match p {
                    PropensityFit::Logistic(m) => Some(m.converged),
                    PropensityFit::Known => None,
                },
                variance_floor_y: f.variance_floor_y,
                variance_floor_z: f.variance_floor_z,
            })
            .collect()
    }
}

/// Out-of-fold moment estimates for one observation.
#[derive(Debug, Clone, Copy)]
pub struct MomentRow {
    pub m_y: f64,
    pub m_z: f64,
    pub v_y: f64,
    pub v_z: f64,
    pub e: f64,
    pub v_y_floored: bool,
    pub v_z_floored: bool,
    pub e_clipped: bool,
}

/// Out-of-fold moment estimates for every observation, aligned with the
/// dataset's row order.
#[derive(Debug, Clone)]
pub struct MomentEstimates {
    pub rows: Vec<MomentRow>,
}

impl MomentEstimates {
    pub fn n(&self) -> usize {
        self.rows.len()
    }
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Default grid for the propensity logistic CV (unscaled; the penalty acts on
/// raw covariates).
fn default_logistic_grid() -> Vec<f64> {
    (0..10)
        .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 9.0))
        .collect()
}

/// Fit all five conditional functions fold by fold and evaluate them
/// out-of-fold.
///
/// `arm_targets[i]` is `f(y_i, x_i)` for Y-arm rows and `g(z_i, x_i)` for
/// Z-arm rows. For each fold `k`, models are trained on rows outside `k`:
/// the propensity on all training rows, the Y-arm mean/variance on training
/// rows with `r = 1`, the Z-arm pair on training rows with `r = 0`; variance
/// models are trained on the squared in-sample residuals of the fold's own
/// mean model. Propensity clipping and variance flooring are applied at
/// evaluation and flagged per row.
pub fn estimate_nuisances(
    data: &FusedDataset,
    arm_targets: &[f64],
    folds: &FoldAssignment,
    config: &NuisanceConfig,
    seed: u64,
) -> Result<(NuisanceFit, MomentEstimates), NuisanceError> {
    let n = data.n();
    if arm_targets.len() != n {
        return Err(NuisanceError::LengthMismatch { left: arm_targets.len(), right: n });
    }
    if folds.n() != n {
        return Err(NuisanceError::LengthMismatch { left: folds.n(), right: n });
    }

    let propensity = estimate_propensity(
        data,
        folds,
        &config.propensity,
        config.propensity_clip,
        derive_seed(seed, 0x65686174),
    )?;
    estimate_nuisances_with_propensity(data, arm_targets, folds, config, seed, propensity)
}

/// Variant of [`estimate_nuisances`] reusing an already-estimated propensity
/// (composite targets share one propensity fit across components).
pub fn estimate_nuisances_with_propensity(
    data: &FusedDataset,
    arm_targets: &[f64],
    folds: &FoldAssignment,
    config: &NuisanceConfig,
    seed: u64,
    propensity: PropensityEstimates,
) -> Result<(NuisanceFit, MomentEstimates), NuisanceError> {
    let n = data.n();
    if arm_targets.len() != n {
        return Err(NuisanceError::LengthMismatch { left: arm_targets.len(), right: n });
    }
    if propensity.e.len() != n {
        return Err(NuisanceError::LengthMismatch { left: propensity.e.len(), right: n });
    }

    let mut fold_fits = Vec::with_capacity(folds.k_folds());
    for k in 0..folds.k_folds() {
        let train = folds.training_of(k);

        let mut y_xs = Vec::new();
        let mut y_ts = Vec::new();
        let mut z_xs = Vec::new();
        let mut z_ts = Vec::new();
        for &i in &train {
            let row = data.row(i);
            if row.r() {
                y_xs.push(row.x.clone());
                y_ts.push(arm_targets[i]);
            } else {
                z_xs.push(row.x.clone());
                z_ts.push(arm_targets[i]);
            }
        }
        if y_xs.is_empty() {
            return Err(NuisanceError::EmptyArm { fold: k, arm: "y" });
        }
        if z_xs.is_empty() {
            return Err(NuisanceError::EmptyArm { fold: k, arm: "z" });
        }

        let fold_seed = derive_seed(seed, 0x6f6c6473 + k as u64);
        let y_model = config.y_learner.fit(&y_xs, &y_ts, derive_seed(fold_seed, 1))?;
        let z_model = config.z_learner.fit(&z_xs, &z_ts, derive_seed(fold_seed, 2))?;

        let variance_floor_y = config
            .variance_floor
            .unwrap_or(DEFAULT_FLOOR_FACTOR * population_variance(&y_ts))
            .max(f64::MIN_POSITIVE);
        let variance_floor_z = config
            .variance_floor
            .unwrap_or(DEFAULT_FLOOR_FACTOR * population_variance(&z_ts))
            .max(f64::MIN_POSITIVE);

        fold_fits.push(FoldFit { y_model, z_model, variance_floor_y, variance_floor_z });
    }

    let fit = NuisanceFit { folds: fold_fits, propensity };

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let fold = &fit.folds[folds.fold_of(i)];
        let x = &data.row(i).x;

        let raw_vy = fold.y_model.variance_at(x);
        let raw_vz = fold.z_model.variance_at(x);
        let v_y = raw_vy.max(fold.variance_floor_y);
        let v_z = raw_vz.max(fold.variance_floor_z);

        rows.push(MomentRow {
            m_y: fold.y_model.mean_at(x),
            m_z: fold.z_model.mean_at(x),
            v_y,
            v_z,
            e: fit.propensity.e[i],
            v_y_floored: v_y != raw_vy,
            v_z_floored: v_z != raw_vz,
            e_clipped: fit.propensity.clipped[i],
        });
    }

    Ok((fit, MomentEstimates { rows }))
}

/// Five-number summary of one diagnostic quantity.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let at = |p: f64| sorted[(((n - 1) as f64) * p).round() as usize];
        Self { min: sorted[0], q05: at(0.05), median: at(0.5), q95: at(0.95), max: sorted[n - 1] }
    }
}

/// Fraction of clipped or floored rows above which a warning flag is raised.
const WARN_FRACTION: f64 = 0.01;

/// Positivity diagnostics: how close the estimated propensities and variances
/// come to the singularities the influence functions divide by.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PositivityReport {
    pub n: usize,
    pub e: Quantiles,
    pub one_minus_e: Quantiles,
    pub v_y: Quantiles,
    pub v_z: Quantiles,
    /// Sample mean of `e^{-4}`.
    pub inv_e4_mean: f64,
    /// Sample mean of `v_Y^{-8}`.
    pub inv_v_y8_mean: f64,
    /// Sample mean of `v_Z^{-8}`.
    pub inv_v_z8_mean: f64,
    pub clipped_count: usize,
    pub floored_y_count: usize,
    pub floored_z_count: usize,
    /// More than 1% of rows had their propensity clipped.
    pub clip_warning: bool,
    /// More than 1% of rows had a variance floored.
    pub floor_warning: bool,
}

pub fn positivity_report(moments: &MomentEstimates) -> PositivityReport {
    let n = moments.n();
    let nf = n as f64;
    let e: Vec<f64> = moments.rows.iter().map(|r| r.e).collect();
    let one_minus_e: Vec<f64> = e.iter().map(|v| 1.0 - v).collect();
    let v_y: Vec<f64> = moments.rows.iter().map(|r| r.v_y).collect();
    let v_z: Vec<f64> = moments.rows.iter().map(|r| r.v_z).collect();
    let clipped_count = moments.rows.iter().filter(|r| r.e_clipped).count();
    let floored_y_count = moments.rows.iter().filter(|r| r.v_y_floored).count();
    let floored_z_count = moments.rows.iter().filter(|r| r.v_z_floored).count();
    let floored_any = moments.rows.iter().filter(|r| r.v_y_floored || r.v_z_floored).count();
    PositivityReport {
        n,
        e: Quantiles::of(&e),
        one_minus_e: Quantiles::of(&one_minus_e),
        v_y: Quantiles::of(&v_y),
        v_z: Quantiles::of(&v_z),
        inv_e4_mean: e.iter().map(|v| v.powi(-4)).sum::<f64>() / nf,
        inv_v_y8_mean: v_y.iter().map(|v| v.powi(-8)).sum::<f64>() / nf,
        inv_v_z8_mean: v_z.iter().map(|v| v.powi(-8)).sum::<f64>() / nf,
        clipped_count,
        floored_y_count,
        floored_z_count,
        clip_warning: clipped_count as f64 > WARN_FRACTION * nf,
        floor_warning: floored_any as f64 > WARN_FRACTION * nf,
    }
}
