//! Plug-in bound evaluation and the efficient influence functions of the
//! upper and lower moment bounds.

use crate::numerics::{cs_variance_term, NumericsError, SymPsdMatrix};
use crate::nuisance::{MomentEstimates, MomentRow};

/// Plug-in bound estimates over the given rows:
/// mean of `m_Y m_Z -/+ sqrt(v_Y v_Z)`.
pub fn plugin_bounds(moments: &MomentEstimates, rows: &[usize]) -> (f64, f64) {
    let nf = rows.len() as f64;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for &i in rows {
        let m = &moments.rows[i];
        let cross = m.m_y * m.m_z;
        let spread = (m.v_y * m.v_z).max(0.0).sqrt();
        lower += cross - spread;
        upper += cross + spread;
    }
    (lower / nf, upper / nf)
}

/// Plug-in bounds for a vector-valued pair (`p_f > 1`): per row
/// `m_Y' m_Z -/+ tr sqrt( sqrt(v_Z) v_Y sqrt(v_Z) )`, averaged. Point values
/// only; no influence function accompanies the multivariate path.
pub fn plugin_bounds_multivariate(
    m_y: &[Vec<f64>],
    m_z: &[Vec<f64>],
    v_y: &[SymPsdMatrix],
    v_z: &[SymPsdMatrix],
) -> Result<(f64, f64), NumericsError> {
    let n = m_y.len();
    if m_z.len() != n || v_y.len() != n || v_z.len() != n {
        return Err(NumericsError::DimensionMismatch { left: n, right: m_z.len().min(v_y.len()) });
    }
    let nf = n as f64;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for i in 0..n {
        let cross: f64 = m_y[i].iter().zip(&m_z[i]).map(|(a, b)| a * b).sum();
        let spread = cs_variance_term(&v_y[i], &v_z[i])?;
        lower += cross - spread;
        upper += cross + spread;
    }
    Ok((lower / nf, upper / nf))
}

/// Efficient influence function of the upper bound at one observation.
///
/// `arm_value` is `f(y, x)` when `r = 1` and `g(z, x)` when `r = 0`; the
/// moment row supplies the out-of-fold nuisance values, whose floors
/// guarantee the variance ratios stay finite.
pub fn eif_upper(r: bool, arm_value: f64, m: &MomentRow, theta_u_plug: f64) -> f64 {
    let m_term = m.m_y * m.m_z + (m.v_y * m.v_z).sqrt();
    let arm_term = if r {
        let resid = arm_value - m.m_y;
        let phi_y = resid * m.m_z + 0.5 * (resid * resid - m.v_y) * (m.v_z / m.v_y).sqrt();
        phi_y / m.e
    } else {
        let resid = arm_value - m.m_z;
        let phi_z = resid * m.m_y + 0.5 * (resid * resid - m.v_z) * (m.v_y / m.v_z).sqrt();
        phi_z / (1.0 - m.e)
    };
    arm_term + m_term - theta_u_plug
}

/// Efficient influence function of the lower bound: every variance
/// contribution enters with the opposite sign, mean terms are unchanged.
pub fn eif_lower(r: bool, arm_value: f64, m: &MomentRow, theta_l_plug: f64) -> f64 {
    let m_term = m.m_y * m.m_z - (m.v_y * m.v_z).sqrt();
    let arm_term = if r {
        let resid = arm_value - m.m_y;
        let phi_y = resid * m.m_z - 0.5 * (resid * resid - m.v_y) * (m.v_z / m.v_y).sqrt();
        phi_y / m.e
    } else {
        let resid = arm_value - m.m_z;
        let phi_z = resid * m.m_y - 0.5 * (resid * resid - m.v_z) * (m.v_y / m.v_z).sqrt();
        phi_z / (1.0 - m.e)
    };
    arm_term + m_term - theta_l_plug
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(m_y: f64, m_z: f64, v_y: f64, v_z: f64, e: f64) -> MomentRow {
        MomentRow {
            m_y,
            m_z,
            v_y,
            v_z,
            e,
            v_y_floored: false,
            v_z_floored: false,
            e_clipped: false,
        }
    }

    #[test]
    fn plugin_single_row_hand_value() {
        let moments = MomentEstimates { rows: vec![row(1.0, 2.0, 1.0, 4.0, 0.5)] };
        let (l, u) = plugin_bounds(&moments, &[0]);
        assert_relative_eq!(l, 0.0, epsilon = 1e-14);
        assert_relative_eq!(u, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn plugin_degenerate_variance_collapses() {
        let moments = MomentEstimates {
            rows: vec![row(1.0, 2.0, 0.0, 3.0, 0.5), row(-1.0, 0.5, 0.0, 1.0, 0.5)],
        };
        let (l, u) = plugin_bounds(&moments, &[0, 1]);
        assert_relative_eq!(l, u, epsilon = 1e-14);
        assert_relative_eq!(u, (2.0 - 0.5) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn plugin_ordering_on_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<MomentRow> = (0..50)
            .map(|_| {
                row(
                    rng.random::<f64>() * 4.0 - 2.0,
                    rng.random::<f64>() * 4.0 - 2.0,
                    rng.random::<f64>() + 0.01,
                    rng.random::<f64>() + 0.01,
                    0.5,
                )
            })
            .collect();
        let moments = MomentEstimates { rows };
        let all: Vec<usize> = (0..50).collect();
        let (l, u) = plugin_bounds(&moments, &all);
        assert!(l <= u);
    }

    #[test]
    fn multivariate_plugin_matches_scalar_on_dim_one() {
        let m_y = vec![vec![1.0], vec![-0.5]];
        let m_z = vec![vec![2.0], vec![0.5]];
        let v_y = vec![SymPsdMatrix::scalar(1.0), SymPsdMatrix::scalar(0.25)];
        let v_z = vec![SymPsdMatrix::scalar(4.0), SymPsdMatrix::scalar(1.0)];
        let (l, u) = plugin_bounds_multivariate(&m_y, &m_z, &v_y, &v_z).unwrap();
        let scalar = MomentEstimates {
            rows: vec![row(1.0, 2.0, 1.0, 4.0, 0.5), row(-0.5, 0.5, 0.25, 1.0, 0.5)],
        };
        let (sl, su) = plugin_bounds(&scalar, &[0, 1]);
        assert_relative_eq!(l, sl, epsilon = 1e-14);
        assert_relative_eq!(u, su, epsilon = 1e-14);
    }

    #[test]
    fn multivariate_plugin_hand_value() {
        // Single row: m_y = (1, 0), m_z = (2, 1), v_y = I, v_z = diag(4, 9).
        // Cross term 2; trace term 2 + 3.
        let (l, u) = plugin_bounds_multivariate(
            &[vec![1.0, 0.0]],
            &[vec![2.0, 1.0]],
            &[SymPsdMatrix::identity(2)],
            &[SymPsdMatrix::diagonal(&[4.0, 9.0])],
        )
        .unwrap();
        assert_relative_eq!(l, -3.0, epsilon = 1e-9);
        assert_relative_eq!(u, 7.0, epsilon = 1e-9);
    }

    #[test]
    fn eif_upper_hand_value() {
        // r=1, e=0.5, f=1, m_Y=1, m_Z=2, v_Y=1, v_Z=4, plug=4:
        // (1/0.5)(0*2 + 0.5*(0-1)*2) + (2+2) - 4 = -2.
        let m = row(1.0, 2.0, 1.0, 4.0, 0.5);
        assert_relative_eq!(eif_upper(true, 1.0, &m, 4.0), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn eif_lower_hand_value() {
        // Same row, plug=0: (1/0.5)(0*2 - 0.5*(0-1)*2) + (2-2) - 0 = 2.
        let m = row(1.0, 2.0, 1.0, 4.0, 0.5);
        assert_relative_eq!(eif_lower(true, 1.0, &m, 0.0), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn eif_sum_identity_cancels_variance_terms() {
        // phi_L + phi_U = 2[ r/e (f-mY) mZ + (1-r)/(1-e) (g-mZ) mY + mY mZ ]
        //                 - (plug_L + plug_U); the variance pieces cancel.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let m = row(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() + 0.05,
                rng.random::<f64>() + 0.05,
                0.2 + 0.6 * rng.random::<f64>(),
            );
            let r = rng.random::<f64>() < 0.5;
            let value = rng.random::<f64>() * 4.0 - 2.0;
            let plug_l = rng.random::<f64>();
            let plug_u = rng.random::<f64>();
            let total = eif_lower(r, value, &m, plug_l) + eif_upper(r, value, &m, plug_u);
            let mean_part = if r {
                (value - m.m_y) * m.m_z / m.e
            } else {
                (value - m.m_z) * m.m_y / (1.0 - m.e)
            };
            let expect = 2.0 * (mean_part + m.m_y * m.m_z) - (plug_l + plug_u);
            assert_relative_eq!(total, expect, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn eif_zero_mean_under_true_nuisances() {
        // Finite-support law at a single x: f in {-1, 1} equally likely,
        // g in {0, 2} equally likely, e = 0.6. With true moments supplied,
        // the exact expectation of each influence function is zero.
        let (m_y, v_y) = (0.0, 1.0);
        let (m_z, v_z) = (1.0, 1.0);
        let e = 0.6;
        let m = row(m_y, m_z, v_y, v_z, e);
        let plug_u = m_y * m_z + (v_y * v_z).sqrt();
        let plug_l = m_y * m_z - (v_y * v_z).sqrt();
        let mut mean_u = 0.0;
        let mut mean_l = 0.0;
        for (f_val, p) in [(-1.0, 0.5), (1.0, 0.5)] {
            mean_u += e * p * eif_upper(true, f_val, &m, plug_u);
            mean_l += e * p * eif_lower(true, f_val, &m, plug_l);
        }
        for (g_val, p) in [(0.0, 0.5), (2.0, 0.5)] {
            mean_u += (1.0 - e) * p * eif_upper(false, g_val, &m, plug_u);
            mean_l += (1.0 - e) * p * eif_lower(false, g_val, &m, plug_l);
        }
        assert!(mean_u.abs() < 1e-14, "E[phi_U] = {mean_u:.3e}");
        assert!(mean_l.abs() < 1e-14, "E[phi_L] = {mean_l:.3e}");
    }
}
