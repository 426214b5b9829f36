//! Ridge-penalized logistic regression fit by damped Newton iterations,
//! with a cross-validated wrapper selecting the penalty by held-out log-loss.

use nalgebra::{DMatrix, DVector};

use super::{kfold_split, NuisanceError};

/// Probability clamp used inside the log-loss to keep it finite.
const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// False when the Newton iterations hit `max_iter` before the penalized
    /// gradient dropped below tolerance; the best iterate is still returned.
    pub converged: bool,
    pub final_grad_norm: f64,
    pub chosen_lambda: f64,
    pub cv_loss: Option<f64>,
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let eta = self.intercept
            + x.iter().zip(&self.coefficients).map(|(xi, c)| xi * c).sum::<f64>();
        sigmoid(eta)
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Penalized log-likelihood; the intercept (index 0) is unpenalized.
fn penalized_loglik(xs: &[Vec<f64>], labels: &[bool], beta: &DVector<f64>, lambda: f64) -> f64 {
    let mut ll = 0.0;
    for (row, &label) in xs.iter().zip(labels) {
        let eta = beta[0] + row.iter().enumerate().map(|(j, x)| x * beta[j + 1]).sum::<f64>();
        // log p(y | eta) written to stay finite for large |eta|.
        ll += if label { -(1.0 + (-eta).exp()).ln() } else { -(1.0 + eta.exp()).ln() };
    }
    let penalty: f64 = (1..beta.len()).map(|j| beta[j] * beta[j]).sum();
    ll - 0.5 * lambda * penalty
}

/// Fit logistic regression maximizing the ridge-penalized log-likelihood.
///
/// Newton steps are damped by backtracking on the penalized objective and
/// iteration stops when the gradient infinity-norm falls below `tol`. On
/// separable data a positive `lambda` keeps the optimum finite.
pub fn fit_logistic_ridge(
    xs: &[Vec<f64>],
    labels: &[bool],
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticModel, NuisanceError> {
    let n = xs.len();
    if n != labels.len() {
        return Err(NuisanceError::LengthMismatch { left: n, right: labels.len() });
    }
    if n == 0 {
        return Err(NuisanceError::EmptyInput);
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    if n_pos == 0 || n_pos == n {
        return Err(NuisanceError::SingleClass);
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(NuisanceError::InvalidLambdaGrid);
    }

    let p = xs.first().map(|r| r.len()).unwrap_or(0);
    let dim = p + 1;
    let mut beta = DVector::zeros(dim);
    let mut objective = penalized_loglik(xs, labels, &beta, lambda);
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;

    for _ in 0..max_iter {
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for (row, &label) in xs.iter().zip(labels) {
            let eta =
                beta[0] + row.iter().enumerate().map(|(j, x)| x * beta[j + 1]).sum::<f64>();
            let prob = sigmoid(eta);
            let resid = (label as u8 as f64) - prob;
            let w = (prob * (1.0 - prob)).max(1e-12);
            grad[0] += resid;
            hess[(0, 0)] += w;
            for j in 0..p {
                grad[j + 1] += resid * row[j];
                hess[(0, j + 1)] += w * row[j];
                for k in j..p {
                    hess[(j + 1, k + 1)] += w * row[j] * row[k];
                }
            }
        }
        for j in 1..dim {
            grad[j] -= lambda * beta[j];
            hess[(j, j)] += lambda;
            hess[(j, 0)] = hess[(0, j)];
            for k in (j + 1)..dim {
                hess[(k, j)] = hess[(j, k)];
            }
        }

        grad_norm = grad.iter().fold(0.0_f64, |m, g: &f64| m.max(g.abs()));
        if grad_norm <= tol {
            converged = true;
            break;
        }

        let step = hess
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&grad))
            .or_else(|| hess.lu().solve(&grad))
            .ok_or(NuisanceError::SolveFailed)?;

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * scale;
            let cand_obj = penalized_loglik(xs, labels, &candidate, lambda);
            if cand_obj > objective {
                beta = candidate;
                objective = cand_obj;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    Ok(LogisticModel {
        intercept: beta[0],
        coefficients: (1..dim).map(|j| beta[j]).collect(),
        converged,
        final_grad_norm: grad_norm,
        chosen_lambda: lambda,
        cv_loss: None,
    })
}

fn log_loss(prob: f64, label: bool) -> f64 {
    let p = prob.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Select the penalty by k-fold held-out log-loss (ties toward the smallest
/// lambda), then refit on all rows.
pub fn fit_logistic_ridge_cv(
    xs: &[Vec<f64>],
    labels: &[bool],
    lambda_grid: &[f64],
    cv_folds: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticModel, NuisanceError> {
    if lambda_grid.is_empty() {
        return Err(NuisanceError::InvalidLambdaGrid);
    }
    let mut grid: Vec<f64> = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let n = xs.len();
    let (best_lambda, best_loss) = if grid.len() == 1 {
        (grid[0], None)
    } else {
        let folds = kfold_split(n, cv_folds, seed)?;
        let mut losses = vec![0.0; grid.len()];
        for k in 0..cv_folds {
            let train_rows = folds.training_of(k);
            let test_rows = folds.rows_of(k);
            let train_x: Vec<Vec<f64>> = train_rows.iter().map(|&i| xs[i].clone()).collect();
            let train_l: Vec<bool> = train_rows.iter().map(|&i| labels[i]).collect();
            for (gi, &lambda) in grid.iter().enumerate() {
                // A fold whose training slice is single-class contributes the
                // intercept-free worst case rather than failing the whole CV.
                match fit_logistic_ridge(&train_x, &train_l, lambda, max_iter, tol) {
                    Ok(model) => {
                        for &i in &test_rows {
                            losses[gi] += log_loss(model.predict_proba(&xs[i]), labels[i]);
                        }
                    }
                    Err(NuisanceError::SingleClass) => {
                        losses[gi] += test_rows.len() as f64 * log_loss(0.5, true);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let mut best = 0;
        for gi in 1..grid.len() {
            if losses[gi] < losses[best] {
                best = gi;
            }
        }
        (grid[best], Some(losses[best] / n as f64))
    };

    let mut model = fit_logistic_ridge(xs, labels, best_lambda, max_iter, tol)?;
    model.cv_loss = best_loss;
    Ok(model)
}
