//! Cross-validated ridge regression via the closed-form solve of the
//! penalized normal equations on standardized columns.

use nalgebra::{DMatrix, DVector};

use super::{kfold_split, NuisanceError};

/// Columns whose (population) standard deviation falls below this relative
/// threshold are treated as constant and receive coefficient zero.
const ZERO_SD_TOL: f64 = 1e-12;

/// A fitted linear model with an unpenalized intercept. Coefficients are kept
/// both on the original scale (for prediction) and on the standardized scale
/// (the scale the penalty acts on).
#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub std_coefficients: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub chosen_lambda: f64,
    pub cv_loss: Option<f64>,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + x.iter().zip(&self.coefficients).map(|(xi, c)| xi * c).sum::<f64>()
    }
}

/// Column means and population standard deviations of the training design,
/// plus the standardized Gram pieces the per-lambda solves reuse.
struct StandardizedDesign {
    p: usize,
    means: Vec<f64>,
    scales: Vec<f64>,
    active: Vec<bool>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    y_mean: f64,
}

impl StandardizedDesign {
    fn build(xs: &[Vec<f64>], targets: &[f64]) -> Self {
        let n = xs.len();
        let p = xs.first().map(|r| r.len()).unwrap_or(0);
        let nf = n as f64;
        let mut means = vec![0.0; p];
        for row in xs {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= nf);
        let mut vars = vec![0.0; p];
        for row in xs {
            for j in 0..p {
                let d = row[j] - means[j];
                vars[j] += d * d;
            }
        }
        let scales: Vec<f64> = vars.iter().map(|v| (v / nf).sqrt()).collect();
        let active: Vec<bool> = scales
            .iter()
            .zip(&means)
            .map(|(s, m)| *s > ZERO_SD_TOL * (1.0 + m.abs()))
            .collect();
        let active_idx: Vec<usize> = (0..p).filter(|j| active[*j]).collect();
        let q = active_idx.len();
        let y_mean = targets.iter().sum::<f64>() / nf;

        let mut xtx = DMatrix::zeros(q, q);
        let mut xty = DVector::zeros(q);
        for (row, y) in xs.iter().zip(targets) {
            let yc = y - y_mean;
            for (a, &ja) in active_idx.iter().enumerate() {
                let xa = (row[ja] - means[ja]) / scales[ja];
                xty[a] += xa * yc;
                for (b, &jb) in active_idx.iter().enumerate().skip(a) {
                    let xb = (row[jb] - means[jb]) / scales[jb];
                    xtx[(a, b)] += xa * xb;
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                xtx[(a, b)] = xtx[(b, a)];
            }
        }
        Self { p, means, scales, active, xtx, xty, y_mean }
    }

    /// Solve `(X'X + lambda I) beta = X'y` on the standardized active columns.
    fn solve(&self, lambda: f64) -> Result<Vec<f64>, NuisanceError> {
        let q = self.xty.len();
        let mut lhs = self.xtx.clone();
        for i in 0..q {
            lhs[(i, i)] += lambda;
        }
        let beta = lhs
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&self.xty))
            .or_else(|| lhs.lu().solve(&self.xty))
            .ok_or(NuisanceError::SolveFailed)?;
        let mut full = vec![0.0; self.p];
        let mut k = 0;
        for j in 0..self.p {
            if self.active[j] {
                full[j] = beta[k];
                k += 1;
            }
        }
        Ok(full)
    }

    fn model(&self, std_coefficients: Vec<f64>, lambda: f64, cv_loss: Option<f64>) -> RidgeModel {
        let mut coefficients = vec![0.0; self.p];
        let mut intercept = self.y_mean;
        for j in 0..self.p {
            if self.active[j] {
                coefficients[j] = std_coefficients[j] / self.scales[j];
                intercept -= std_coefficients[j] * self.means[j] / self.scales[j];
            }
        }
        RidgeModel {
            intercept,
            coefficients,
            std_coefficients,
            means: self.means.clone(),
            scales: self.scales.clone(),
            chosen_lambda: lambda,
            cv_loss,
        }
    }
}

fn gather(xs: &[Vec<f64>], targets: &[f64], rows: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    (
        rows.iter().map(|&i| xs[i].clone()).collect(),
        rows.iter().map(|&i| targets[i]).collect(),
    )
}

/// Fit ridge regression with lambda selected by k-fold cross-validated MSE.
///
/// Columns are standardized on each training set; the intercept is
/// unpenalized. Ties in the CV loss break toward the smallest lambda, and the
/// final model is refit on all rows at the selected lambda.
pub fn fit_ridge_cv(
    xs: &[Vec<f64>],
    targets: &[f64],
    lambda_grid: &[f64],
    cv_folds: usize,
    seed: u64,
) -> Result<RidgeModel, NuisanceError> {
    let n = xs.len();
    if n != targets.len() {
        return Err(NuisanceError::LengthMismatch { left: n, right: targets.len() });
    }
    if n < 2 {
        return Err(NuisanceError::DegenerateDesign { n });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(NuisanceError::NonFiniteTarget);
    }
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(NuisanceError::InvalidLambdaGrid);
    }

    let mut grid: Vec<f64> = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let chosen = if grid.len() == 1 {
        (grid[0], None)
    } else {
        let folds = kfold_split(n, cv_folds, seed)?;
        let mut sq_err = vec![0.0; grid.len()];
        for k in 0..cv_folds {
            let train_rows = folds.training_of(k);
            let test_rows = folds.rows_of(k);
            let (train_x, train_y) = gather(xs, targets, &train_rows);
            let design = StandardizedDesign::build(&train_x, &train_y);
            for (gi, &lambda) in grid.iter().enumerate() {
                let model = design.model(design.solve(lambda)?, lambda, None);
                for &i in &test_rows {
                    let resid = targets[i] - model.predict(&xs[i]);
                    sq_err[gi] += resid * resid;
                }
            }
        }
        let mut best = 0;
        for gi in 1..grid.len() {
            if sq_err[gi] < sq_err[best] {
                best = gi;
            }
        }
        (grid[best], Some(sq_err[best] / n as f64))
    };

    let design = StandardizedDesign::build(xs, targets);
    Ok(design.model(design.solve(chosen.0)?, chosen.0, chosen.1))
}

/// Default lambda grid: 20 log-spaced points spanning `[1e-4, 1e4]` scaled by
/// the design size `n * p`.
pub fn default_lambda_grid(n: usize, p: usize) -> Vec<f64> {
    let scale = ((n.max(1) * p.max(1)) as f64).max(1.0);
    let count = 20;
    (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            scale * 10f64.powf(-4.0 + 8.0 * t)
        })
        .collect()
}
