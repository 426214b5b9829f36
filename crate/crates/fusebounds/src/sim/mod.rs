//! Seeded data-generating processes and the Monte Carlo coverage harness.
//!
//! Each process draws the full `(x, y, z, r)` row, hands the estimator a
//! censored view, and keeps the hidden counterpart in a separate structure
//! that no estimation code can reach. Replications derive independent seed
//! streams from the master seed, so aggregates are identical for any degree
//! of parallelism.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{FusedDataset, FusedRow, Outcome};
use crate::estimator::{infer, DecomposableEstimand, EstimatorError, InferConfig};
use crate::exec::{derive_seed, map_indexed, Parallelism};
use crate::nuisance::learner::{LogGaussianLearner, RidgeLearner};
use crate::nuisance::{NuisanceConfig, PropensityConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("need at least {min} observations, got {n}")]
    TooSmall { n: usize, min: usize },
    #[error("need at least 2 replications, got {reps}")]
    TooFewReps { reps: usize },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// A simulation design from the experiment suite.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DgpSpec {
    /// Linear outcome models with cubed-Gaussian (heavy-tailed, unit
    /// variance) residuals; shared coefficient vector on the unit sphere,
    /// `R ~ Bern(0.5)`.
    HeavyTailLinear { p_x: usize, sigma_y: f64, sigma_z: f64, beta_seed: u64 },
    /// Same design with standard Gaussian residuals.
    GaussianLinear { p_x: usize, sigma_y: f64, sigma_z: f64, beta_seed: u64 },
    /// Bivariate lognormal outcomes with AR(0.3) covariates and a logistic
    /// sampling indicator; targets the relative effect `E[Y/Z]`.
    LogNormalRelative { p_x: usize, sigma: f64, rho: f64, beta_seed: u64 },
    /// Gold-standard pair `Z = (Z1, Z2)` with noisy proxy `X`, outcome
    /// linear in `Z`; targets the regression coefficient of `Z1`.
    ValidationStudy { tau: f64, sigma_eps: f64, beta1: f64, beta2: f64, rho: f64, sigma: f64 },
}

impl DgpSpec {
    pub fn heavy_tail(sigma_y: f64, sigma_z: f64, beta_seed: u64) -> Self {
        DgpSpec::HeavyTailLinear { p_x: 20, sigma_y, sigma_z, beta_seed }
    }

    pub fn gaussian(sigma_y: f64, sigma_z: f64, beta_seed: u64) -> Self {
        DgpSpec::GaussianLinear { p_x: 20, sigma_y, sigma_z, beta_seed }
    }

    pub fn lognormal(sigma: f64, rho: f64, beta_seed: u64) -> Self {
        DgpSpec::LogNormalRelative { p_x: 20, sigma, rho, beta_seed }
    }

    pub fn validation_study(rho: f64, sigma: f64) -> Self {
        DgpSpec::ValidationStudy { tau: 0.3, sigma_eps: 0.5, beta1: 1.0, beta2: 1.0, rho, sigma }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |reason: &str| Err(SimError::InvalidSpec { reason: reason.to_string() });
        match *self {
            DgpSpec::HeavyTailLinear { p_x, sigma_y, sigma_z, .. }
            | DgpSpec::GaussianLinear { p_x, sigma_y, sigma_z, .. } => {
                if p_x == 0 {
                    return bad("p_x must be positive");
                }
                if sigma_y <= 0.0 || sigma_z <= 0.0 {
                    return bad("noise scales must be positive");
                }
            }
            DgpSpec::LogNormalRelative { p_x, sigma, rho, .. } => {
                if p_x == 0 {
                    return bad("p_x must be positive");
                }
                if sigma <= 0.0 {
                    return bad("sigma must be positive");
                }
                if !(-1.0 < rho && rho < 1.0) {
                    return bad("rho must lie in (-1, 1)");
                }
            }
            DgpSpec::ValidationStudy { tau, sigma_eps, rho, sigma, .. } => {
                if sigma <= 0.0 || sigma_eps <= 0.0 {
                    return bad("scales must be positive");
                }
                if !(-1.0 < rho && rho < 1.0) || !(-1.0 < tau && tau < 1.0) {
                    return bad("correlations must lie in (-1, 1)");
                }
            }
        }
        Ok(())
    }

    /// The estimand each design targets.
    pub fn estimand(&self) -> DecomposableEstimand {
        match *self {
            DgpSpec::HeavyTailLinear { .. } | DgpSpec::GaussianLinear { .. } => {
                DecomposableEstimand::product()
            }
            DgpSpec::LogNormalRelative { .. } => DecomposableEstimand::ratio(),
            DgpSpec::ValidationStudy { rho, .. } => validation_beta1_estimand(rho),
        }
    }

    /// Default estimator settings for this design: known `e = 0.5` with
    /// homoskedastic ridge for the linear designs, the log-scale learner
    /// with estimated propensity for the lognormal design, and ridge with
    /// estimated propensity for the validation study.
    pub fn default_infer_config(&self, alpha: f64, seed: u64) -> InferConfig {
        let nuisance = match self {
            DgpSpec::HeavyTailLinear { .. } | DgpSpec::GaussianLinear { .. } => NuisanceConfig {
                propensity: PropensityConfig::known_constant(0.5),
                ..NuisanceConfig::default()
            },
            DgpSpec::LogNormalRelative { .. } => NuisanceConfig {
                y_learner: std::sync::Arc::new(LogGaussianLearner::default()),
                z_learner: std::sync::Arc::new(LogGaussianLearner::default()),
                propensity: PropensityConfig::default_estimated(),
                ..NuisanceConfig::default()
            },
            DgpSpec::ValidationStudy { .. } => NuisanceConfig {
                y_learner: std::sync::Arc::new(RidgeLearner::default()),
                z_learner: std::sync::Arc::new(RidgeLearner::default()),
                propensity: PropensityConfig::default_estimated(),
                ..NuisanceConfig::default()
            },
        };
        InferConfig { k_folds: 2, alpha, seed, nuisance }
    }
}

/// The estimand of the validation study: `E[Y (Z1 - rho Z2)] / (1 - rho^2)`,
/// the coefficient of `Z1` in the population regression of `Y` on `(Z1, Z2)`.
pub fn validation_beta1_estimand(rho: f64) -> DecomposableEstimand {
    DecomposableEstimand::from_fns(
        "validation-beta1",
        1,
        |y, _| vec![y[0]],
        move |z, _| vec![(z[0] - rho * z[1]) / (1.0 - rho * rho)],
    )
}

/// The outcome block the estimator never sees.
#[derive(Debug, Clone)]
pub struct HiddenRow {
    pub counterpart: Outcome,
}

/// A sampled replication: the censored estimator-facing view plus the hidden
/// counterparts retained for audits only.
#[derive(Debug, Clone)]
pub struct SampledData {
    pub dataset: FusedDataset,
    pub hidden: Vec<HiddenRow>,
}

fn unit_sphere_beta(p: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..p).map(|_| std_normal(rng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| v / norm).collect()
}

fn gaussian_beta(p: usize, sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..p).map(|_| sd * std_normal(rng)).collect()
}

/// Cholesky factor of the AR-style covariance `S_ij = base^{|i-j|}`.
fn ar_cov_cholesky(p: usize, base: f64) -> Cholesky<f64, nalgebra::Dyn> {
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            cov[(i, j)] = base.powi((i as i32 - j as i32).abs());
        }
    }
    Cholesky::new(cov).expect("AR covariance is positive definite")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Standard deviation of the cube root of the heavy-tailed residual: the
/// cube of a `N(0, 15^{-1/3})` draw has variance exactly one.
const HEAVY_TAIL_ROOT_SD: f64 = 0.636_821_401_630_016_1; // 15^{-1/6}

/// Draw one replication. The dataset view censors each row per `r`; the full
/// counterpart goes to [`SampledData::hidden`]. Deterministic in
/// `(spec, n, seed)`; the coefficient draw depends only on the spec's
/// `beta_seed`, so all replications of one experiment share it.
pub fn sample_dgp(spec: &DgpSpec, n: usize, seed: u64) -> Result<SampledData, SimError> {
    spec.validate()?;
    if n < 10 {
        return Err(SimError::TooSmall { n, min: 10 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut hidden = Vec::with_capacity(n);

    let mut push = |x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, r: bool| {
        let (outcome, counterpart) =
            if r { (Outcome::Y(y), Outcome::Z(z)) } else { (Outcome::Z(z), Outcome::Y(y)) };
        rows.push(FusedRow { x, outcome });
        hidden.push(HiddenRow { counterpart });
    };

    match *spec {
        DgpSpec::HeavyTailLinear { p_x, sigma_y, sigma_z, beta_seed }
        | DgpSpec::GaussianLinear { p_x, sigma_y, sigma_z, beta_seed } => {
            let heavy = matches!(spec, DgpSpec::HeavyTailLinear { .. });
            let beta = unit_sphere_beta(p_x, &mut ChaCha8Rng::seed_from_u64(beta_seed));
            let eps = |rng: &mut ChaCha8Rng| -> f64 {
                if heavy {
                    let w: f64 = std_normal(rng) * HEAVY_TAIL_ROOT_SD;
                    w * w * w
                } else {
                    StandardNormal.sample(rng)
                }
            };
            for _ in 0..n {
                let x: Vec<f64> = (0..p_x).map(|_| std_normal(&mut rng)).collect();
                let mean = dot(&beta, &x);
                let y = mean + sigma_y * eps(&mut rng);
                let z = mean + sigma_z * eps(&mut rng);
                let r = rng.random::<f64>() < 0.5;
                push(x, vec![y], vec![z], r);
            }
        }
        DgpSpec::LogNormalRelative { p_x, sigma, rho, beta_seed } => {
            let mut beta_rng = ChaCha8Rng::seed_from_u64(beta_seed);
            let sd = 0.5 / (p_x as f64).sqrt();
            let beta1 = gaussian_beta(p_x, sd, &mut beta_rng);
            let beta0 = gaussian_beta(p_x, sd, &mut beta_rng);
            let beta3 = gaussian_beta(p_x, sd, &mut beta_rng);
            let chol = ar_cov_cholesky(p_x, 0.3);
            for _ in 0..n {
                let u = DVector::from_iterator(
                    p_x,
                    (0..p_x).map(|_| std_normal(&mut rng)),
                );
                let x: Vec<f64> = (chol.l() * u).iter().copied().collect();
                let w1 = std_normal(&mut rng);
                let w2 = std_normal(&mut rng);
                let log_y = dot(&beta1, &x) + sigma * w1;
                let log_z = dot(&beta0, &x)
                    + sigma * (rho * w1 + (1.0 - rho * rho).sqrt() * w2);
                let r = rng.random::<f64>() < sigmoid(dot(&beta3, &x));
                push(x, vec![log_y.exp()], vec![log_z.exp()], r);
            }
        }
        DgpSpec::ValidationStudy { tau, sigma_eps, beta1, beta2, rho, sigma } => {
            for _ in 0..n {
                let w1 = std_normal(&mut rng);
                let w2 = std_normal(&mut rng);
                let z1 = w1;
                let z2 = rho * w1 + (1.0 - rho * rho).sqrt() * w2;
                let h1 = std_normal(&mut rng);
                let h2 = std_normal(&mut rng);
                let x1 = z1 + sigma * h1;
                let x2 = z2 + sigma * (tau * h1 + (1.0 - tau * tau).sqrt() * h2);
                let eps = std_normal(&mut rng);
                let y = beta1 * z1 + beta2 * z2 + sigma_eps * eps;
                let r = rng.random::<f64>() < 0.5;
                push(vec![x1, x2], vec![y], vec![z1, z2], r);
            }
        }
    }

    let p_x = match *spec {
        DgpSpec::HeavyTailLinear { p_x, .. }
        | DgpSpec::GaussianLinear { p_x, .. }
        | DgpSpec::LogNormalRelative { p_x, .. } => p_x,
        DgpSpec::ValidationStudy { .. } => 2,
    };
    let dataset = FusedDataset::new(p_x, rows).map_err(|e| SimError::InvalidSpec {
        reason: format!("sampled dataset invalid: {e}"),
    })?;
    Ok(SampledData { dataset, hidden })
}

/// The population bounds a replication's interval is judged against.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrueBounds {
    pub theta_l: f64,
    pub theta_u: f64,
    /// Monte Carlo standard error of the bound values when they come from
    /// the simulation oracle rather than a closed form.
    pub mc_se: Option<f64>,
    /// The point value of the estimand itself, when available in closed form.
    pub theta_point: Option<f64>,
}

/// Number of oracle draws behind the simulated true bounds.
pub const TRUE_BOUND_DRAWS: u64 = 10_000_000;

/// Population moment bounds for a design: closed form for the linear and
/// validation designs, a high-precision Monte Carlo oracle with the true
/// conditional moments for the lognormal design.
pub fn true_cs_bounds(spec: &DgpSpec) -> Result<TrueBounds, SimError> {
    true_cs_bounds_with_draws(spec, TRUE_BOUND_DRAWS)
}

pub fn true_cs_bounds_with_draws(spec: &DgpSpec, draws: u64) -> Result<TrueBounds, SimError> {
    spec.validate()?;
    match *spec {
        DgpSpec::HeavyTailLinear { sigma_y, sigma_z, .. }
        | DgpSpec::GaussianLinear { sigma_y, sigma_z, .. } => {
            // E[m_Y m_Z] = |beta|^2 = 1 by the unit-sphere draw; the
            // residual variances are homoskedastic by design.
            let spread = sigma_y * sigma_z;
            Ok(TrueBounds {
                theta_l: 1.0 - spread,
                theta_u: 1.0 + spread,
                mc_se: None,
                theta_point: Some(1.0),
            })
        }
        DgpSpec::ValidationStudy { tau, sigma_eps, beta1, beta2, rho, sigma } => {
            // Jointly Gaussian (Z, X): with C = Var(Z), M = Var(X) = C + s^2 T,
            // the conditional law of Z | X has mean C M^{-1} x and covariance
            // S = C - C M^{-1} C. The contrast w = (1, -rho)/(1 - rho^2)
            // turns g(Z) into the coefficient target.
            let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
            let t = DMatrix::from_row_slice(2, 2, &[1.0, tau, tau, 1.0]);
            let m = &c + &t * (sigma * sigma);
            let m_inv = m.try_inverse().expect("X covariance is invertible");
            let s = &c - &c * &m_inv * &c;
            let beta = DVector::from_row_slice(&[beta1, beta2]);
            let w = DVector::from_row_slice(&[1.0, -rho]) / (1.0 - rho * rho);
            let cross = (beta.transpose() * (&c - &s) * &w)[(0, 0)];
            let v_y = (beta.transpose() * &s * &beta)[(0, 0)] + sigma_eps * sigma_eps;
            let v_z = (w.transpose() * &s * &w)[(0, 0)];
            let spread = (v_y * v_z).sqrt();
            Ok(TrueBounds {
                theta_l: cross - spread,
                theta_u: cross + spread,
                mc_se: None,
                theta_point: Some(beta1),
            })
        }
        DgpSpec::LogNormalRelative { p_x, sigma, rho, beta_seed } => {
            // Conditional moments are exact lognormal formulas; only the
            // expectation over X is simulated. Per draw the integrand is
            // exp((b1 - b0)'x + s^2) * (1 -/+ (1 - e^{s^2})).
            let mut beta_rng = ChaCha8Rng::seed_from_u64(beta_seed);
            let sd = 0.5 / (p_x as f64).sqrt();
            let beta1 = gaussian_beta(p_x, sd, &mut beta_rng);
            let beta0 = gaussian_beta(p_x, sd, &mut beta_rng);
            let diff: Vec<f64> = beta1.iter().zip(&beta0).map(|(a, b)| a - b).collect();
            let s2 = sigma * sigma;

            let chol = ar_cov_cholesky(p_x, 0.3);
            let chunk = 10_000u64;
            let n_chunks = draws.div_ceil(chunk);
            let sums = map_indexed(n_chunks as usize, Parallelism::Auto, |c| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0x0bac1e, c as u64));
                let take = chunk.min(draws - c as u64 * chunk);
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                for _ in 0..take {
                    let u = DVector::from_iterator(
                        p_x,
                        (0..p_x).map(|_| std_normal(&mut rng)),
                    );
                    let x = chol.l() * u;
                    let t = (diff.iter().zip(x.iter()).map(|(d, xi)| d * xi).sum::<f64>()
                        + s2)
                        .exp();
                    sum += t;
                    sum_sq += t * t;
                }
                (sum, sum_sq)
            });
            let (sum, sum_sq) =
                sums.iter().fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
            let nf = draws as f64;
            let mean_t = sum / nf;
            let var_t = (sum_sq / nf - mean_t * mean_t).max(0.0);
            let se_t = (var_t / nf).sqrt();

            let spread_factor = s2.exp() - 1.0;
            // Point value of E[Y/Z]: exp(s^2 (1 - rho) + q/2) with
            // q = (b1 - b0)' Sigma (b1 - b0).
            let p = diff.len();
            let mut q = 0.0;
            for i in 0..p {
                for j in 0..p {
                    q += diff[i] * 0.3f64.powi((i as i32 - j as i32).abs()) * diff[j];
                }
            }
            Ok(TrueBounds {
                theta_l: mean_t * (1.0 - spread_factor),
                theta_u: mean_t * (1.0 + spread_factor),
                mc_se: Some(se_t * (1.0 + spread_factor)),
                theta_point: Some((s2 * (1.0 - rho) + 0.5 * q).exp()),
            })
        }
    }
}

/// One replication's interval and coverage outcome.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub theta_l_hat: f64,
    pub theta_u_hat: f64,
    pub v_l_hat: f64,
    pub v_u_hat: f64,
    pub lcb: f64,
    pub ucb: f64,
    pub width: f64,
    pub lcb_covered: bool,
    pub ucb_covered: bool,
}

/// Monte Carlo aggregate over replications.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub spec: DgpSpec,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub true_bounds: TrueBounds,
    /// Fraction of replications whose interval contains the whole region.
    pub coverage: f64,
    pub lcb_coverage: f64,
    pub ucb_coverage: f64,
    pub coverage_se: f64,
    pub mean_width: f64,
    pub width_se: f64,
    /// Fraction of intervals containing the point value of the estimand,
    /// when that value is known.
    pub point_coverage: Option<f64>,
    pub per_rep: Vec<RepRecord>,
}

/// Run `reps` seeded replications of the design, estimating on the censored
/// view and judging the intervals against the population bounds. The
/// aggregate is identical for any parallelism degree.
pub fn run_monte_carlo(
    spec: &DgpSpec,
    n: usize,
    reps: usize,
    estimator_config: &InferConfig,
    alpha: f64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<CoverageReport, SimError> {
    let true_bounds = true_cs_bounds(spec)?;
    run_monte_carlo_with_bounds(
        spec,
        n,
        reps,
        estimator_config,
        alpha,
        seed,
        parallelism,
        true_bounds,
    )
}

/// Variant taking precomputed population bounds (to reuse an oracle run
/// across sweeps or to substitute a cheaper desk-scale oracle).
#[allow(clippy::too_many_arguments)]
pub fn run_monte_carlo_with_bounds(
    spec: &DgpSpec,
    n: usize,
    reps: usize,
    estimator_config: &InferConfig,
    alpha: f64,
    seed: u64,
    parallelism: Parallelism,
    true_bounds: TrueBounds,
) -> Result<CoverageReport, SimError> {
    spec.validate()?;
    if reps < 2 {
        return Err(SimError::TooFewReps { reps });
    }
    let estimand = spec.estimand();

    let results: Vec<Result<RepRecord, SimError>> = map_indexed(reps, parallelism, |j| {
        let rep_seed = derive_seed(seed, j as u64);
        let sampled = sample_dgp(spec, n, rep_seed)?;
        let config = InferConfig {
            alpha,
            seed: derive_seed(rep_seed, 1),
            ..estimator_config.clone()
        };
        let interval = infer(&sampled.dataset, &estimand, &config)?;
        Ok(RepRecord {
            rep: j,
            theta_l_hat: interval.theta_l_hat,
            theta_u_hat: interval.theta_u_hat,
            v_l_hat: interval.v_l_hat,
            v_u_hat: interval.v_u_hat,
            lcb: interval.lcb,
            ucb: interval.ucb,
            width: interval.ucb - interval.lcb,
            lcb_covered: interval.lcb <= true_bounds.theta_l,
            ucb_covered: interval.ucb >= true_bounds.theta_u,
        })
    });
    let mut per_rep = Vec::with_capacity(reps);
    for r in results {
        per_rep.push(r?);
    }

    let nf = reps as f64;
    let covered = per_rep.iter().filter(|r| r.lcb_covered && r.ucb_covered).count() as f64;
    let coverage = covered / nf;
    let lcb_coverage = per_rep.iter().filter(|r| r.lcb_covered).count() as f64 / nf;
    let ucb_coverage = per_rep.iter().filter(|r| r.ucb_covered).count() as f64 / nf;
    let mean_width = per_rep.iter().map(|r| r.width).sum::<f64>() / nf;
    let width_var = per_rep.iter().map(|r| (r.width - mean_width).powi(2)).sum::<f64>()
        / (nf - 1.0);
    let point_coverage = true_bounds.theta_point.map(|theta| {
        per_rep.iter().filter(|r| r.lcb <= theta && theta <= r.ucb).count() as f64 / nf
    });

    Ok(CoverageReport {
        spec: spec.clone(),
        n,
        reps,
        alpha,
        seed,
        true_bounds,
        coverage,
        lcb_coverage,
        ucb_coverage,
        coverage_se: (coverage * (1.0 - coverage) / nf).sqrt(),
        mean_width,
        width_se: (width_var / nf).sqrt(),
        point_coverage,
        per_rep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn heavy_tail_residual_variance_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let w: f64 = std_normal(&mut rng) * HEAVY_TAIL_ROOT_SD;
            let eps = w * w * w;
            sum += eps;
            sum_sq += eps * eps;
        }
        let var = sum_sq / n as f64 - (sum / n as f64).powi(2);
        assert!((0.99..=1.01).contains(&var), "var = {var}");
    }

    #[test]
    fn heavy_tail_r_is_balanced() {
        let sampled = sample_dgp(&DgpSpec::heavy_tail(1.0, 0.2, 7), 100_000, 3).unwrap();
        let mean_r = sampled.dataset.n_y_arm() as f64 / 100_000.0;
        assert!((0.495..=0.505).contains(&mean_r), "mean r = {mean_r}");
    }

    #[test]
    fn sampling_is_deterministic_and_beta_is_shared() {
        let spec = DgpSpec::heavy_tail(0.5, 0.2, 11);
        let a = sample_dgp(&spec, 50, 9).unwrap();
        let b = sample_dgp(&spec, 50, 9).unwrap();
        for (ra, rb) in a.dataset.rows().iter().zip(b.dataset.rows()) {
            assert_eq!(ra, rb);
        }
        // Different data seeds, same beta seed: the conditional mean
        // structure is shared, which shows up in the true bounds only
        // through the spec, so just check the draws differ.
        let c = sample_dgp(&spec, 50, 10).unwrap();
        assert_ne!(a.dataset.rows()[0], c.dataset.rows()[0]);
    }

    #[test]
    fn lognormal_relative_effect_matches_closed_form() {
        let spec = DgpSpec::lognormal(0.5, 0.3, 21);
        let (beta1, beta0) = match spec {
            DgpSpec::LogNormalRelative { p_x, beta_seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(beta_seed);
                let sd = 0.5 / (p_x as f64).sqrt();
                (gaussian_beta(p_x, sd, &mut rng), gaussian_beta(p_x, sd, &mut rng))
            }
            _ => unreachable!(),
        };
        let diff: Vec<f64> = beta1.iter().zip(&beta0).map(|(a, b)| a - b).collect();
        let mut q = 0.0;
        for i in 0..20 {
            for j in 0..20 {
                q += diff[i] * 0.3f64.powi((i as i32 - j as i32).abs()) * diff[j];
            }
        }
        let expect = (0.25 * (1.0 - 0.3) + 0.5 * q).exp();

        let sampled = sample_dgp(&spec, 1_000_000, 5).unwrap();
        let mut sum = 0.0;
        for (row, hidden) in sampled.dataset.rows().iter().zip(&sampled.hidden) {
            let (y, z) = match (&row.outcome, &hidden.counterpart) {
                (Outcome::Y(y), Outcome::Z(z)) => (y[0], z[0]),
                (Outcome::Z(z), Outcome::Y(y)) => (y[0], z[0]),
                _ => unreachable!(),
            };
            sum += y / z;
        }
        let mean = sum / 1_000_000.0;
        assert_relative_eq!(mean, expect, max_relative = 0.01);
    }

    #[test]
    fn true_bounds_linear_width() {
        let spec = DgpSpec::heavy_tail(0.2, 0.2, 1);
        let bounds = true_cs_bounds(&spec).unwrap();
        assert_relative_eq!(bounds.theta_u - bounds.theta_l, 0.08, epsilon = 1e-12);
        assert_relative_eq!(bounds.theta_l, 0.96, epsilon = 1e-12);
    }

    #[test]
    fn true_bounds_validation_study_bracket_beta1() {
        for (rho, sigma) in [(0.3, 0.5), (0.6, 1.0), (-0.4, 0.8)] {
            let bounds = true_cs_bounds(&DgpSpec::validation_study(rho, sigma)).unwrap();
            assert!(bounds.theta_l <= 1.0 + 1e-12, "theta_l = {}", bounds.theta_l);
            assert!(bounds.theta_u >= 1.0 - 1e-12, "theta_u = {}", bounds.theta_u);
            assert!(bounds.theta_u > bounds.theta_l);
        }
    }

    #[test]
    fn true_bounds_lognormal_matches_analytic_form() {
        // The oracle only simulates E[exp((b1-b0)'X)], which has the closed
        // form exp(q/2); cross-check the full bound values against it.
        let spec = DgpSpec::lognormal(0.5, 0.3, 21);
        let bounds = true_cs_bounds_with_draws(&spec, 2_000_000).unwrap();
        let (beta1, beta0) = match spec {
            DgpSpec::LogNormalRelative { p_x, beta_seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(beta_seed);
                let sd = 0.5 / (p_x as f64).sqrt();
                (gaussian_beta(p_x, sd, &mut rng), gaussian_beta(p_x, sd, &mut rng))
            }
            _ => unreachable!(),
        };
        let diff: Vec<f64> = beta1.iter().zip(&beta0).map(|(a, b)| a - b).collect();
        let mut q = 0.0;
        for i in 0..20 {
            for j in 0..20 {
                q += diff[i] * 0.3f64.powi((i as i32 - j as i32).abs()) * diff[j];
            }
        }
        let s2 = 0.25;
        let mean_t = (0.5 * q + s2).exp();
        let expect_u = mean_t * s2.exp();
        let expect_l = mean_t * (2.0 - s2.exp());
        let se = bounds.mc_se.unwrap();
        assert!(
            (bounds.theta_u - expect_u).abs() < 5.0 * se,
            "upper {} vs {expect_u} (se {se})",
            bounds.theta_u
        );
        assert!(
            (bounds.theta_l - expect_l).abs() < 5.0 * se,
            "lower {} vs {expect_l}",
            bounds.theta_l
        );
        // Reported precision: the oracle SE should be well under 0.1% of the
        // interval width at the default draw count; scale from this run.
        let width = bounds.theta_u - bounds.theta_l;
        let se_at_default = se * (2_000_000.0f64 / TRUE_BOUND_DRAWS as f64).sqrt();
        assert!(se_at_default <= 0.001 * width, "se {se_at_default} vs width {width}");
    }

    #[test]
    fn degenerate_noise_rejected() {
        assert!(matches!(
            true_cs_bounds(&DgpSpec::heavy_tail(0.0, 0.2, 1)),
            Err(SimError::InvalidSpec { .. })
        ));
    }

    #[test]
    fn monte_carlo_is_deterministic_across_parallelism() {
        let spec = DgpSpec::validation_study(0.3, 0.5);
        let config = spec.default_infer_config(0.05, 0);
        let run = |par| {
            run_monte_carlo(&spec, 120, 6, &config, 0.05, 77, par).unwrap()
        };
        let seq = run(Parallelism::Sequential);
        let par = run(Parallelism::Threads(4));
        let auto = run(Parallelism::Auto);
        let to_json = |r: &CoverageReport| serde_json::to_string(r).unwrap();
        assert_eq!(to_json(&seq), to_json(&par));
        assert_eq!(to_json(&seq), to_json(&auto));
    }

    #[test]
    fn alpha_one_reduces_to_raw_interval_coverage() {
        let spec = DgpSpec::validation_study(0.3, 0.5);
        let config = spec.default_infer_config(1.0, 0);
        let report =
            run_monte_carlo(&spec, 150, 5, &config, 1.0, 5, Parallelism::Sequential).unwrap();
        for rep in &report.per_rep {
            assert_eq!(rep.lcb, rep.theta_l_hat);
            assert_eq!(rep.ucb, rep.theta_u_hat);
        }
    }
}
