//! Bounds for the OLS coefficient of `Z` in the population regression of `Y`
//! on `(X, Z)`.
//!
//! The target `e_last' E[XX']^{-1} E[XY]` (with the stacked regressor
//! `(x, z)`) is a function of identifiable second moments plus the partially
//! identified cross moment `E[YZ]`. The composition maps carry a rectified
//! correction that selects whichever endpoint of the `E[YZ]` interval
//! extremizes the coefficient, and the delta method propagates the joint
//! influence covariance of all components.

use nalgebra::DMatrix;

use crate::dataset::FusedDataset;
use crate::exec::derive_seed;
use crate::nuisance::{estimate_propensity, kfold_split};

use super::delta::{compose_delta, ComposedTarget, Component, GradMode, DEFAULT_REL_STEP};
use super::identifiable::{infer_identifiable_with, IdentifiableTarget};
use super::{infer_with, DecomposableEstimand, EstimatorError, InferConfig, IntervalResult};

/// Gradient mode for the OLS composition maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OlsGradKind {
    /// Central finite differences (the default).
    FiniteDifference { rel_step: f64 },
    /// Closed-form gradients of the rectified composition.
    Analytic,
}

impl Default for OlsGradKind {
    fn default() -> Self {
        OlsGradKind::FiniteDifference { rel_step: DEFAULT_REL_STEP }
    }
}

#[derive(Clone)]
pub struct OlsConfig {
    pub infer: InferConfig,
    /// Covariate columns entering the regression design; defaults to all.
    /// Nuisance models always see the full covariate vector.
    pub regression_cols: Option<Vec<usize>>,
    pub grad: OlsGradKind,
    /// A rectifier kink is flagged when `|v_j| < kink_tol_factor * scale`.
    pub kink_tol_factor: f64,
}

impl Default for OlsConfig {
    fn default() -> Self {
        Self {
            infer: InferConfig::default(),
            regression_cols: None,
            grad: OlsGradKind::default(),
            kink_tol_factor: 1e-6,
        }
    }
}

/// Index of `(a, b)`, `a <= b`, in the packed upper triangle of a `d x d`
/// symmetric matrix.
fn tri_index(a: usize, b: usize, d: usize) -> usize {
    a * (2 * d - a + 1) / 2 + (b - a)
}

fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Rebuild the symmetric design matrix and solve for
/// `v = A^{-1} e_last`; `None` when the matrix is not invertible.
fn design_inverse(theta: &[f64], d: usize) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let value = theta[tri_index(i, j, d)];
            a[(i, j)] = value;
            a[(j, i)] = value;
        }
    }
    let inv = a.try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let v: Vec<f64> = (0..d).map(|j| inv[(d - 1, j)]).collect();
    Some((inv, v))
}

fn relu(t: f64) -> f64 {
    t.max(0.0)
}

/// Evaluate the lower/upper composition maps at a stacked component vector.
/// Layout: packed upper triangle of `E[XX']`, then the `E[XY]` block, then
/// `(theta_L^{YZ}, theta_U^{YZ})`.
fn eval_maps(theta: &[f64], q: usize) -> (f64, f64) {
    let d = q + 1;
    let Some((_, v)) = design_inverse(theta, d) else {
        return (f64::NAN, f64::NAN);
    };
    let xy = &theta[tri_len(d)..tri_len(d) + q];
    let yz_l = theta[tri_len(d) + q];
    let yz_u = theta[tri_len(d) + q + 1];
    let width = yz_u - yz_l;
    let base: f64 =
        v[..q].iter().zip(xy).map(|(vj, t)| vj * t).sum::<f64>() + v[q] * yz_l;
    (base - relu(-v[q]) * width, base + relu(v[q]) * width)
}

/// Closed-form gradients of the two maps at `theta`.
///
/// With `B = A^{-1}`, `v = B e_last` and map value `sum_j v_j u_j + corr`,
/// the design-block derivative is `d s / d A_{ab} = -v_b (B gamma)_a` where
/// `gamma_j = d s / d v_j`; packed coordinates add the mirrored term.
/// Rectifier kinks take the one-sided derivative that is zero at the kink.
fn analytic_gradients(theta: &[f64], q: usize) -> Result<(Vec<f64>, Vec<f64>), EstimatorError> {
    let d = q + 1;
    let (inv, v) = design_inverse(theta, d).ok_or(EstimatorError::SingularComposition)?;
    let xy = &theta[tri_len(d)..tri_len(d) + q];
    let yz_l = theta[tri_len(d) + q];
    let yz_u = theta[tri_len(d) + q + 1];
    let width = yz_u - yz_l;

    let mut u = Vec::with_capacity(d);
    u.extend_from_slice(xy);
    u.push(yz_l);

    let grad_for = |upper: bool| -> Vec<f64> {
        let mut gamma = u.clone();
        if upper {
            gamma[q] += width * if v[q] > 0.0 { 1.0 } else { 0.0 };
        } else {
            gamma[q] += width * if v[q] < 0.0 { 1.0 } else { 0.0 };
        }
        let b_gamma: Vec<f64> =
            (0..d).map(|i| (0..d).map(|j| inv[(i, j)] * gamma[j]).sum()).collect();
        let mut grad = vec![0.0; theta.len()];
        for a in 0..d {
            for b in a..d {
                let mut g = -v[b] * b_gamma[a];
                if a != b {
                    g -= v[a] * b_gamma[b];
                }
                grad[tri_index(a, b, d)] = g;
            }
        }
        for j in 0..q {
            grad[tri_len(d) + j] = v[j];
        }
        if upper {
            grad[tri_len(d) + q] = -relu(-v[q]);
            grad[tri_len(d) + q + 1] = relu(v[q]);
        } else {
            grad[tri_len(d) + q] = relu(v[q]);
            grad[tri_len(d) + q + 1] = -relu(-v[q]);
        }
        grad
    };

    Ok((grad_for(false), grad_for(true)))
}

/// Interval for the OLS coefficient of `Z`, composed from identifiable
/// second moments and the `E[YZ]` bounds on one shared cross-fitting layout.
pub fn ols_coefficient_bounds(
    data: &FusedDataset,
    config: &OlsConfig,
) -> Result<IntervalResult, EstimatorError> {
    for (i, row) in data.rows().iter().enumerate() {
        let len = row.y().or(row.z()).map(|v| v.len()).unwrap_or(0);
        if len != 1 {
            return Err(EstimatorError::NonScalarOutcome { row: i });
        }
    }
    let cols: Vec<usize> = match &config.regression_cols {
        Some(c) => c.clone(),
        None => (0..data.p_x()).collect(),
    };
    for &c in &cols {
        if c >= data.p_x() {
            return Err(EstimatorError::ColumnOutOfRange { col: c, p_x: data.p_x() });
        }
    }
    let q = cols.len();
    let d = q + 1;

    let infer_config = &config.infer;
    let folds = kfold_split(data.n(), infer_config.k_folds, infer_config.seed)?;
    let propensity = estimate_propensity(
        data,
        &folds,
        &infer_config.nuisance.propensity,
        infer_config.nuisance.propensity_clip,
        derive_seed(infer_config.seed, 0x65686174),
    )?;

    let mut components = Vec::new();
    for a in 0..d {
        for b in a..d {
            let target = if b < q {
                let (ca, cb) = (cols[a], cols[b]);
                IdentifiableTarget::x_moment(move |x: &[f64]| x[ca] * x[cb])
            } else if a < q {
                let ca = cols[a];
                IdentifiableTarget::z_arm(move |x: &[f64]| x[ca], |z, _| z[0])
            } else {
                IdentifiableTarget::z_arm(|_| 1.0, |z, _| z[0] * z[0])
            };
            let result = infer_identifiable_with(
                data,
                &target,
                infer_config,
                Some(&folds),
                Some(&propensity),
            )?;
            components.push(Component::point(&result));
        }
    }
    for &ca in &cols {
        let target = IdentifiableTarget::y_arm(move |x: &[f64]| x[ca], |y, _| y[0]);
        let result =
            infer_identifiable_with(data, &target, infer_config, Some(&folds), Some(&propensity))?;
        components.push(Component::point(&result));
    }
    let yz = infer_with(
        data,
        &DecomposableEstimand::product(),
        infer_config,
        &folds,
        Some(&propensity),
    )?;
    components.push(Component::interval(&yz));

    let estimates: Vec<f64> =
        components.iter().flat_map(|c| c.estimates.iter().copied()).collect();
    let (_, v) = design_inverse(&estimates, d).ok_or(EstimatorError::SingularComposition)?;
    let scale = v.iter().fold(1.0_f64, |m, vj| m.max(vj.abs()));
    let kink_warning = v.iter().any(|vj| vj.abs() < config.kink_tol_factor * scale);

    let grad_mode = match config.grad {
        OlsGradKind::FiniteDifference { rel_step } => GradMode::FiniteDifference { rel_step },
        OlsGradKind::Analytic => {
            let (grad_l, grad_u) = analytic_gradients(&estimates, q)?;
            GradMode::Analytic { grad_l, grad_u }
        }
    };

    let mut target = ComposedTarget::new(
        &components,
        move |theta: &[f64]| eval_maps(theta, q).0,
        move |theta: &[f64]| eval_maps(theta, q).1,
        grad_mode,
    )?;
    target.kink_warning = kink_warning;

    let mut result = compose_delta(&target, infer_config.alpha)?;
    result.diagnostics.flags.degenerate_variance = yz.diagnostics.flags.degenerate_variance;
    result.diagnostics.flags.propensity_clipped = yz.diagnostics.flags.propensity_clipped;
    result.diagnostics.positivity = yz.diagnostics.positivity.clone();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::central_diff_gradient;
    use approx::assert_relative_eq;

    #[test]
    fn tri_indexing_roundtrip() {
        let d = 4;
        let mut seen = vec![false; tri_len(d)];
        for a in 0..d {
            for b in a..d {
                let idx = tri_index(a, b, d);
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn maps_pick_the_extremizing_endpoint() {
        // Identity design (q = 1): v = (0, 1), so the coefficient is just
        // the YZ moment and the maps return its endpoints.
        let theta = vec![1.0, 0.0, 1.0, 0.5, -0.3, 0.7];
        let (sl, su) = eval_maps(&theta, 1);
        assert_relative_eq!(sl, -0.3, epsilon = 1e-12);
        assert_relative_eq!(su, 0.7, epsilon = 1e-12);

        // Flip the sign of v_last by negating the design cross term with a
        // dominant diagonal; build A = [[1, -0.9], [-0.9, 1]]:
        // inverse has positive off-diagonals, v = (0.9, 1)/(1-0.81).
        let theta2 = vec![1.0, -0.9, 1.0, 0.5, -0.3, 0.7];
        let (sl2, su2) = eval_maps(&theta2, 1);
        let v = [0.9 / 0.19, 1.0 / 0.19];
        assert_relative_eq!(sl2, v[0] * 0.5 + v[1] * -0.3, epsilon = 1e-9);
        assert_relative_eq!(su2, v[0] * 0.5 + v[1] * 0.7, epsilon = 1e-9);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let q = 2;
        // A = [[2, .3, .1], [.3, 1.5, -.2], [.1, -.2, 1.2]], XY = (.4, -.6),
        // YZ = (-.2, .5).
        let theta = vec![2.0, 0.3, 0.1, 1.5, -0.2, 1.2, 0.4, -0.6, -0.2, 0.5];
        let (grad_l, grad_u) = analytic_gradients(&theta, q).unwrap();
        let fd_l = central_diff_gradient(|t| eval_maps(t, q).0, &theta, 1e-7).unwrap();
        let fd_u = central_diff_gradient(|t| eval_maps(t, q).1, &theta, 1e-7).unwrap();
        for i in 0..theta.len() {
            assert_relative_eq!(grad_l[i], fd_l[i], epsilon = 1e-5, max_relative = 1e-5);
            assert_relative_eq!(grad_u[i], fd_u[i], epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn singular_design_is_rejected() {
        let theta = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        assert!(design_inverse(&theta, 2).is_none());
        assert!(matches!(
            analytic_gradients(&theta, 1),
            Err(EstimatorError::SingularComposition)
        ));
    }
}
