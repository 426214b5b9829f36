//! The fused two-sample data layout.
//!
//! Every observation carries covariates `x` and exactly one of the outcome
//! blocks: rows from the Y-observing sample (`r = 1`) carry `y`, rows from
//! the Z-observing sample (`r = 0`) carry `z`. The enum encoding makes the
//! "exactly one outcome per row" invariant unrepresentable to violate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("row {row}: covariate vector has length {got}, expected {expected}")]
    CovariateLength { row: usize, got: usize, expected: usize },
    #[error("row {row}: non-finite value in {field}")]
    NonFinite { row: usize, field: &'static str },
    #[error("row {row}: empty {field} vector")]
    EmptyOutcome { row: usize, field: &'static str },
    #[error("dataset has no rows in the {arm} arm")]
    EmptyArm { arm: &'static str },
}

/// The observed outcome block of one row.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Row from the Y-observing sample (`r = 1`).
    Y(Vec<f64>),
    /// Row from the Z-observing sample (`r = 0`).
    Z(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedRow {
    pub x: Vec<f64>,
    pub outcome: Outcome,
}

impl FusedRow {
    /// Sample-membership indicator: true for the Y-observing sample.
    pub fn r(&self) -> bool {
        matches!(self.outcome, Outcome::Y(_))
    }

    pub fn y(&self) -> Option<&[f64]> {
        match &self.outcome {
            Outcome::Y(v) => Some(v),
            Outcome::Z(_) => None,
        }
    }

    pub fn z(&self) -> Option<&[f64]> {
        match &self.outcome {
            Outcome::Z(v) => Some(v),
            Outcome::Y(_) => None,
        }
    }
}

/// A validated fused dataset: `n` rows, `p_x` covariates, both arms nonempty.
#[derive(Debug, Clone)]
pub struct FusedDataset {
    p_x: usize,
    rows: Vec<FusedRow>,
}

impl FusedDataset {
    pub fn new(p_x: usize, rows: Vec<FusedRow>) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut seen_y = false;
        let mut seen_z = false;
        for (i, row) in rows.iter().enumerate() {
            if row.x.len() != p_x {
                return Err(DatasetError::CovariateLength {
                    row: i,
                    got: row.x.len(),
                    expected: p_x,
                });
            }
            if row.x.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { row: i, field: "x" });
            }
            let (values, field) = match &row.outcome {
                Outcome::Y(v) => (v, "y"),
                Outcome::Z(v) => (v, "z"),
            };
            if values.is_empty() {
                return Err(DatasetError::EmptyOutcome { row: i, field });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { row: i, field });
            }
            match row.outcome {
                Outcome::Y(_) => seen_y = true,
                Outcome::Z(_) => seen_z = true,
            }
        }
        if !seen_y {
            return Err(DatasetError::EmptyArm { arm: "y" });
        }
        if !seen_z {
            return Err(DatasetError::EmptyArm { arm: "z" });
        }
        Ok(Self { p_x, rows })
    }

    /// Convenience constructor for scalar outcomes.
    pub fn from_scalar_rows(
        x: Vec<Vec<f64>>,
        r: Vec<bool>,
        y: Vec<Option<f64>>,
        z: Vec<Option<f64>>,
    ) -> Result<Self, DatasetError> {
        let p_x = x.first().map(|v| v.len()).unwrap_or(0);
        let rows = x
            .into_iter()
            .zip(r)
            .zip(y.into_iter().zip(z))
            .enumerate()
            .map(|(i, ((x, r), (y, z)))| {
                let outcome = if r {
                    Outcome::Y(vec![y.ok_or(DatasetError::NonFinite { row: i, field: "y" })?])
                } else {
                    Outcome::Z(vec![z.ok_or(DatasetError::NonFinite { row: i, field: "z" })?])
                };
                Ok(FusedRow { x, outcome })
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Self::new(p_x, rows)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p_x(&self) -> usize {
        self.p_x
    }

    pub fn rows(&self) -> &[FusedRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &FusedRow {
        &self.rows[i]
    }

    pub fn n_y_arm(&self) -> usize {
        self.rows.iter().filter(|r| r.r()).count()
    }

    pub fn n_z_arm(&self) -> usize {
        self.n() - self.n_y_arm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_y(x: Vec<f64>, y: f64) -> FusedRow {
        FusedRow { x, outcome: Outcome::Y(vec![y]) }
    }

    fn row_z(x: Vec<f64>, z: f64) -> FusedRow {
        FusedRow { x, outcome: Outcome::Z(vec![z]) }
    }

    #[test]
    fn builds_valid_dataset() {
        let data = FusedDataset::new(
            2,
            vec![row_y(vec![0.0, 1.0], 3.0), row_z(vec![1.0, -1.0], 2.0)],
        )
        .unwrap();
        assert_eq!(data.n(), 2);
        assert_eq!(data.n_y_arm(), 1);
        assert_eq!(data.n_z_arm(), 1);
        assert!(data.row(0).r());
        assert_eq!(data.row(0).y(), Some(&[3.0][..]));
        assert_eq!(data.row(1).z(), Some(&[2.0][..]));
    }

    #[test]
    fn rejects_single_arm() {
        let err = FusedDataset::new(1, vec![row_y(vec![0.0], 1.0), row_y(vec![1.0], 2.0)]);
        assert!(matches!(err, Err(DatasetError::EmptyArm { arm: "z" })));
    }

    #[test]
    fn rejects_non_finite_covariates() {
        let err = FusedDataset::new(
            1,
            vec![row_y(vec![f64::NAN], 1.0), row_z(vec![0.0], 2.0)],
        );
        assert!(matches!(err, Err(DatasetError::NonFinite { field: "x", .. })));
    }

    #[test]
    fn rejects_bad_covariate_length() {
        let err = FusedDataset::new(
            2,
            vec![row_y(vec![0.0, 1.0], 1.0), row_z(vec![0.0], 2.0)],
        );
        assert!(matches!(err, Err(DatasetError::CovariateLength { row: 1, .. })));
    }
}
