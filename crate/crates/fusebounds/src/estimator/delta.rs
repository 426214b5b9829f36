//! Delta-method composition: intervals for functions of several estimated
//! components, with variances propagated through the joint influence
//! covariance.

use std::sync::Arc;

use crate::numerics::{central_diff_gradient, SymPsdMatrix};

use super::{
    interval_from_parts, validate_alpha, Diagnostics, EstimatorError, Flags, IntervalResult,
};

/// Default relative step of the finite-difference gradient.
pub const DEFAULT_REL_STEP: f64 = 1e-6;

type MapFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One estimated component: one or two coordinates of the stacked estimate
/// vector together with their per-observation influence vectors.
#[derive(Clone)]
pub struct Component {
    pub estimates: Vec<f64>,
    pub influences: Vec<Vec<f64>>,
}

impl Component {
    /// Both endpoints of an interval result, contributing two coordinates.
    pub fn interval(result: &IntervalResult) -> Self {
        Self {
            estimates: vec![result.theta_l_hat, result.theta_u_hat],
            influences: vec![result.influence_l.clone(), result.influence_u.clone()],
        }
    }

    /// A point-identified result, contributing one coordinate.
    pub fn point(result: &IntervalResult) -> Self {
        Self {
            estimates: vec![result.theta_l_hat],
            influences: vec![result.influence_l.clone()],
        }
    }
}

/// How gradients of the composition maps are obtained.
#[derive(Clone)]
pub enum GradMode {
    /// Central differences with the given relative step.
    FiniteDifference { rel_step: f64 },
    /// Caller-supplied gradients at the estimate vector.
    Analytic { grad_l: Vec<f64>, grad_u: Vec<f64> },
}

impl Default for GradMode {
    fn default() -> Self {
        GradMode::FiniteDifference { rel_step: DEFAULT_REL_STEP }
    }
}

/// A function of several estimands: the stacked component estimates with
/// their influence vectors and the lower/upper composition maps.
#[derive(Clone)]
pub struct ComposedTarget {
    pub estimates: Vec<f64>,
    pub influences: Vec<Vec<f64>>,
    pub s_l: MapFn,
    pub s_u: MapFn,
    pub grad_mode: GradMode,
    /// Set by target builders whose maps have rectifier kinks near the
    /// estimate; propagated to the result flags.
    pub kink_warning: bool,
}

impl ComposedTarget {
    pub fn new<SL, SU>(
        components: &[Component],
        s_l: SL,
        s_u: SU,
        grad_mode: GradMode,
    ) -> Result<Self, EstimatorError>
    where
        SL: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        SU: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let mut estimates = Vec::new();
        let mut influences = Vec::new();
        for c in components {
            estimates.extend_from_slice(&c.estimates);
            for v in &c.influences {
                influences.push(v.clone());
            }
        }
        if influences.is_empty() {
            return Err(EstimatorError::EmptyRows);
        }
        let n = influences[0].len();
        for v in &influences {
            if v.len() != n {
                return Err(EstimatorError::LengthMismatch { left: n, right: v.len() });
            }
        }
        Ok(Self {
            estimates,
            influences,
            s_l: Arc::new(s_l),
            s_u: Arc::new(s_u),
            grad_mode,
            kink_warning: false,
        })
    }
}

/// Empirical second-moment matrix of stacked influence vectors:
/// `(1/n) sum_i psi_i psi_i'` (influence values are mean-centered by
/// construction, so this estimates their covariance).
pub fn joint_influence_covariance(
    components: &[Vec<f64>],
) -> Result<SymPsdMatrix, EstimatorError> {
    let m = components.len();
    if m == 0 {
        return Err(EstimatorError::EmptyRows);
    }
    let n = components[0].len();
    for v in components {
        if v.len() != n {
            return Err(EstimatorError::LengthMismatch { left: n, right: v.len() });
        }
    }
    let nf = n as f64;
    let mut entries = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let dot: f64 =
                components[a].iter().zip(&components[b]).map(|(x, y)| x * y).sum::<f64>() / nf;
            entries[a * m + b] = dot;
            entries[b * m + a] = dot;
        }
    }
    SymPsdMatrix::new(m, entries).map_err(EstimatorError::from)
}

/// Interval for the composed target: point estimates `s_L`, `s_U` at the
/// stacked estimates, variances `grad' V grad`, and the usual CI additions.
/// The composed per-observation influence values `grad' psi_i` are retained.
pub fn compose_delta(
    target: &ComposedTarget,
    alpha: f64,
) -> Result<IntervalResult, EstimatorError> {
    validate_alpha(alpha)?;
    let est = &target.estimates;
    let vhat = joint_influence_covariance(&target.influences)?;

    let sl = (target.s_l)(est);
    let su = (target.s_u)(est);
    if !sl.is_finite() || !su.is_finite() {
        return Err(EstimatorError::SingularComposition);
    }

    let (grad_l, grad_u) = match &target.grad_mode {
        GradMode::Analytic { grad_l, grad_u } => (grad_l.clone(), grad_u.clone()),
        GradMode::FiniteDifference { rel_step } => {
            let s_l = target.s_l.clone();
            let s_u = target.s_u.clone();
            (
                central_diff_gradient(move |v| s_l(v), est, *rel_step)?,
                central_diff_gradient(move |v| s_u(v), est, *rel_step)?,
            )
        }
    };
    if grad_l.len() != est.len() || grad_u.len() != est.len() {
        return Err(EstimatorError::LengthMismatch { left: grad_l.len(), right: est.len() });
    }

    let quad = |g: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (a, ga) in g.iter().enumerate() {
            for (b, gb) in g.iter().enumerate() {
                acc += ga * vhat.get(a, b) * gb;
            }
        }
        acc.max(0.0)
    };
    let v_l = quad(&grad_l);
    let v_u = quad(&grad_u);

    let n = target.influences[0].len();
    let project = |g: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| g.iter().zip(&target.influences).map(|(gc, psi)| gc * psi[i]).sum())
            .collect()
    };

    let diagnostics = Diagnostics {
        flags: Flags { kink_warning: target.kink_warning, ..Flags::default() },
        ..Diagnostics::default()
    };
    Ok(interval_from_parts(
        sl,
        su,
        v_l,
        v_u,
        alpha,
        project(&grad_l),
        project(&grad_u),
        diagnostics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fake_interval(
        theta_l: f64,
        theta_u: f64,
        influence_l: Vec<f64>,
        influence_u: Vec<f64>,
        alpha: f64,
    ) -> IntervalResult {
        let n = influence_l.len() as f64;
        let v_l = influence_l.iter().map(|p| p * p).sum::<f64>() / n;
        let v_u = influence_u.iter().map(|p| p * p).sum::<f64>() / n;
        interval_from_parts(
            theta_l,
            theta_u,
            v_l,
            v_u,
            alpha,
            influence_l,
            influence_u,
            Diagnostics::default(),
        )
    }

    fn centered(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        v
    }

    #[test]
    fn covariance_of_single_component_matches_v_hat() {
        let phi = centered(1, 500);
        let v_direct = phi.iter().map(|p| p * p).sum::<f64>() / 500.0;
        let cov = joint_influence_covariance(&[phi]).unwrap();
        assert_eq!(cov.dim(), 1);
        assert_relative_eq!(cov.get(0, 0), v_direct, epsilon = 1e-14);
    }

    #[test]
    fn covariance_of_identical_components_is_rank_one() {
        let phi = centered(2, 100);
        let cov = joint_influence_covariance(&[phi.clone(), phi]).unwrap();
        assert_relative_eq!(cov.get(0, 0), cov.get(0, 1), epsilon = 1e-14);
        assert_relative_eq!(cov.get(1, 1), cov.get(1, 0), epsilon = 1e-14);
    }

    #[test]
    fn covariance_of_independent_components_has_small_cross_terms() {
        let n = 10_000;
        let a = centered(3, n);
        let b = centered(4, n);
        let cov = joint_influence_covariance(&[a, b]).unwrap();
        let rho = cov.get(0, 1) / (cov.get(0, 0) * cov.get(1, 1)).sqrt();
        assert!(rho.abs() <= 3.0 / (n as f64).sqrt(), "rho = {rho}");
    }

    #[test]
    fn covariance_rejects_length_mismatch() {
        let out = joint_influence_covariance(&[vec![1.0, 2.0], vec![1.0]]);
        assert!(matches!(out, Err(EstimatorError::LengthMismatch { .. })));
    }

    #[test]
    fn identity_composition_reproduces_the_interval() {
        let base = fake_interval(0.2, 0.9, centered(5, 400), centered(6, 400), 0.05);
        let target = ComposedTarget::new(
            &[Component::interval(&base)],
            |v| v[0],
            |v| v[1],
            GradMode::default(),
        )
        .unwrap();
        let composed = compose_delta(&target, 0.05).unwrap();
        assert_relative_eq!(composed.theta_l_hat, base.theta_l_hat, epsilon = 1e-10);
        assert_relative_eq!(composed.theta_u_hat, base.theta_u_hat, epsilon = 1e-10);
        assert_relative_eq!(composed.v_l_hat, base.v_l_hat, epsilon = 1e-10);
        assert_relative_eq!(composed.v_u_hat, base.v_u_hat, epsilon = 1e-10);
        assert_relative_eq!(composed.lcb, base.lcb, epsilon = 1e-10);
        assert_relative_eq!(composed.ucb, base.ucb, epsilon = 1e-10);
    }

    #[test]
    fn linear_map_variance_is_the_quadratic_form() {
        let a = [0.7, -1.3];
        let phi1 = centered(7, 800);
        let phi2 = centered(8, 800);
        let comp1 = Component { estimates: vec![0.4], influences: vec![phi1.clone()] };
        let comp2 = Component { estimates: vec![-0.2], influences: vec![phi2.clone()] };

        let lin = move |v: &[f64]| a[0] * v[0] + a[1] * v[1];
        let target = ComposedTarget::new(
            &[comp1, comp2],
            lin,
            lin,
            GradMode::Analytic { grad_l: a.to_vec(), grad_u: a.to_vec() },
        )
        .unwrap();
        let composed = compose_delta(&target, 0.05).unwrap();

        let cov = joint_influence_covariance(&[phi1, phi2]).unwrap();
        let want = a[0] * a[0] * cov.get(0, 0)
            + 2.0 * a[0] * a[1] * cov.get(0, 1)
            + a[1] * a[1] * cov.get(1, 1);
        assert_relative_eq!(composed.v_l_hat, want, epsilon = 1e-12);

        // Finite differences must agree with the analytic gradient.
        let fd_target = ComposedTarget { grad_mode: GradMode::default(), ..target };
        let fd = compose_delta(&fd_target, 0.05).unwrap();
        assert_relative_eq!(fd.v_l_hat, composed.v_l_hat, max_relative = 1e-5);
    }

    #[test]
    fn kink_flag_propagates() {
        let base = fake_interval(0.0, 1.0, centered(9, 50), centered(10, 50), 0.05);
        let mut target = ComposedTarget::new(
            &[Component::interval(&base)],
            |v| v[0],
            |v| v[1],
            GradMode::default(),
        )
        .unwrap();
        target.kink_warning = true;
        let composed = compose_delta(&target, 0.05).unwrap();
        assert!(composed.diagnostics.flags.kink_warning);
    }
}
