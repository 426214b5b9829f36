//! Exact tight bounds on small discrete instances.
//!
//! For discrete conditional laws of scalar `f(Y,X)` and `g(Z,X)` given each
//! covariate atom, the supremum of `E[f g]` over all couplings is attained by
//! the comonotone (sorted-quantile) pairing and the infimum by the antitone
//! pairing; both are computed by cumulative-mass greedy matching. An
//! exhaustive enumeration over permutation couplings cross-validates the
//! greedy path on small equal-mass instances. These exact bounds serve as the
//! reference the moment outer bounds are checked against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const MASS_TOL: f64 = 1e-12;
/// Largest per-side atom count accepted by the enumeration path.
const MAX_ENUM_ATOMS: usize = 4;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("probability mass mismatch in {place}: sums to {sum}")]
    MassMismatch { place: &'static str, sum: f64 },
    #[error("negative probability {prob} in {place}")]
    NegativeProb { place: &'static str, prob: f64 },
    #[error("non-finite atom value in {place}")]
    NonFinite { place: &'static str },
    #[error("instance has no covariate atoms")]
    Empty,
    #[error("enumeration path unsupported: {reason}")]
    UnsupportedEnumeration { reason: String },
}

/// Weighted atom list: `(value, probability)` pairs.
pub type AtomLaw = Vec<(f64, f64)>;

/// Conditional laws of scalar `f` and `g` at one covariate atom.
#[derive(Debug, Clone)]
pub struct XAtom {
    pub weight: f64,
    pub f_atoms: AtomLaw,
    pub g_atoms: AtomLaw,
}

/// A discrete joint instance: covariate atoms with per-atom conditional laws.
#[derive(Debug, Clone)]
pub struct DiscreteConditional {
    x_atoms: Vec<XAtom>,
}

fn validate_law(law: &AtomLaw, place: &'static str) -> Result<(), OracleError> {
    let mut sum = 0.0;
    for &(value, prob) in law {
        if !value.is_finite() || !prob.is_finite() {
            return Err(OracleError::NonFinite { place });
        }
        if prob < 0.0 {
            return Err(OracleError::NegativeProb { place, prob });
        }
        sum += prob;
    }
    if (sum - 1.0).abs() > MASS_TOL {
        return Err(OracleError::MassMismatch { place, sum });
    }
    Ok(())
}

impl DiscreteConditional {
    pub fn new(x_atoms: Vec<XAtom>) -> Result<Self, OracleError> {
        if x_atoms.is_empty() {
            return Err(OracleError::Empty);
        }
        let mut weight_sum = 0.0;
        for atom in &x_atoms {
            if !atom.weight.is_finite() {
                return Err(OracleError::NonFinite { place: "x weights" });
            }
            if atom.weight < 0.0 {
                return Err(OracleError::NegativeProb { place: "x weights", prob: atom.weight });
            }
            weight_sum += atom.weight;
            validate_law(&atom.f_atoms, "f atoms")?;
            validate_law(&atom.g_atoms, "g atoms")?;
        }
        if (weight_sum - 1.0).abs() > MASS_TOL {
            return Err(OracleError::MassMismatch { place: "x weights", sum: weight_sum });
        }
        Ok(Self { x_atoms })
    }

    /// Single covariate atom with the given marginals.
    pub fn single(f_atoms: AtomLaw, g_atoms: AtomLaw) -> Result<Self, OracleError> {
        Self::new(vec![XAtom { weight: 1.0, f_atoms, g_atoms }])
    }

    pub fn x_atoms(&self) -> &[XAtom] {
        &self.x_atoms
    }

    /// The same instance with the roles of `f` and `g` swapped.
    pub fn swapped(&self) -> Self {
        Self {
            x_atoms: self
                .x_atoms
                .iter()
                .map(|a| XAtom {
                    weight: a.weight,
                    f_atoms: a.g_atoms.clone(),
                    g_atoms: a.f_atoms.clone(),
                })
                .collect(),
        }
    }
}

fn sorted_law(law: &AtomLaw, ascending: bool) -> AtomLaw {
    let mut out: AtomLaw = law.iter().copied().filter(|&(_, p)| p > 0.0).collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if !ascending {
        out.reverse();
    }
    out
}

/// Greedy cumulative-mass matching of two sorted marginals
/// (northwest-corner rule); returns `E[f g]` under that coupling.
fn matched_expectation(f_sorted: &AtomLaw, g_sorted: &AtomLaw) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    let mut j = 0;
    let mut mass_f = f_sorted.first().map(|a| a.1).unwrap_or(0.0);
    let mut mass_g = g_sorted.first().map(|a| a.1).unwrap_or(0.0);
    while i < f_sorted.len() && j < g_sorted.len() {
        let m = mass_f.min(mass_g);
        total += m * f_sorted[i].0 * g_sorted[j].0;
        mass_f -= m;
        mass_g -= m;
        if mass_f <= 0.0 {
            i += 1;
            if i < f_sorted.len() {
                mass_f = f_sorted[i].1;
            }
        }
        if mass_g <= 0.0 {
            j += 1;
            if j < g_sorted.len() {
                mass_g = g_sorted[j].1;
            }
        }
    }
    total
}

/// Tight bounds on `E[f g]`: infimum and supremum of the per-atom coupling
/// problem, weighted over covariate atoms. The supremum pairs sorted
/// quantiles monotonically, the infimum antitonically.
pub fn tight_bounds_discrete(dc: &DiscreteConditional) -> (f64, f64) {
    let mut lower = 0.0;
    let mut upper = 0.0;
    for atom in &dc.x_atoms {
        let f_asc = sorted_law(&atom.f_atoms, true);
        let g_asc = sorted_law(&atom.g_atoms, true);
        let g_desc = sorted_law(&atom.g_atoms, false);
        upper += atom.weight * matched_expectation(&f_asc, &g_asc);
        lower += atom.weight * matched_expectation(&f_asc, &g_desc);
    }
    (lower, upper)
}

fn law_moments(law: &AtomLaw) -> (f64, f64) {
    let mean: f64 = law.iter().map(|&(v, p)| p * v).sum();
    let second: f64 = law.iter().map(|&(v, p)| p * v * v).sum();
    (mean, (second - mean * mean).max(0.0))
}

/// Moment outer bounds computed exactly from the atoms:
/// per covariate atom `m_Y m_Z -/+ sqrt(v_Y v_Z)`, weighted.
pub fn cs_bounds_discrete(dc: &DiscreteConditional) -> (f64, f64) {
    let mut lower = 0.0;
    let mut upper = 0.0;
    for atom in &dc.x_atoms {
        let (my, vy) = law_moments(&atom.f_atoms);
        let (mz, vz) = law_moments(&atom.g_atoms);
        let spread = (vy * vz).sqrt();
        lower += atom.weight * (my * mz - spread);
        upper += atom.weight * (my * mz + spread);
    }
    (lower, upper)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..n {
            let mut next = perm.clone();
            next.insert(pos, n - 1);
            out.push(next);
        }
    }
    out
}

/// Exhaustive tight bounds for instances whose per-atom laws are equal-mass
/// with matching small counts: every extreme coupling of two uniform
/// marginals is a permutation pairing, so the sup/inf over couplings is the
/// max/min over permutations.
pub fn tight_bounds_enumerate(dc: &DiscreteConditional) -> Result<(f64, f64), OracleError> {
    let mut lower = 0.0;
    let mut upper = 0.0;
    for atom in &dc.x_atoms {
        let m = atom.f_atoms.len();
        if m != atom.g_atoms.len() {
            return Err(OracleError::UnsupportedEnumeration {
                reason: format!("atom counts differ: {} vs {}", m, atom.g_atoms.len()),
            });
        }
        if m == 0 || m > MAX_ENUM_ATOMS {
            return Err(OracleError::UnsupportedEnumeration {
                reason: format!("atom count {m} outside 1..={MAX_ENUM_ATOMS}"),
            });
        }
        let uniform = 1.0 / m as f64;
        for &(_, p) in atom.f_atoms.iter().chain(&atom.g_atoms) {
            if (p - uniform).abs() > MASS_TOL {
                return Err(OracleError::UnsupportedEnumeration {
                    reason: format!("atom mass {p} is not 1/{m}"),
                });
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for perm in permutations(m) {
            let value: f64 = (0..m)
                .map(|i| uniform * atom.f_atoms[i].0 * atom.g_atoms[perm[i]].0)
                .sum();
            lo = lo.min(value);
            hi = hi.max(value);
        }
        lower += atom.weight * lo;
        upper += atom.weight * hi;
    }
    Ok((lower, upper))
}

/// All four bounds of one instance, for property checks and reports.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BoundsSummary {
    pub theta_l_cs: f64,
    pub theta_l: f64,
    pub theta_u: f64,
    pub theta_u_cs: f64,
}

impl BoundsSummary {
    pub fn of(dc: &DiscreteConditional) -> Self {
        let (theta_l, theta_u) = tight_bounds_discrete(dc);
        let (theta_l_cs, theta_u_cs) = cs_bounds_discrete(dc);
        Self { theta_l_cs, theta_l, theta_u, theta_u_cs }
    }

    /// Largest violation of `theta_l_cs <= theta_l <= theta_u <= theta_u_cs`.
    pub fn sandwich_violation(&self) -> f64 {
        (self.theta_l - self.theta_u)
            .max(self.theta_l_cs - self.theta_l)
            .max(self.theta_u - self.theta_u_cs)
            .max(0.0)
    }

    /// Largest gap between the outer and tight endpoints.
    pub fn tightness_gap(&self) -> f64 {
        (self.theta_l - self.theta_l_cs).abs().max((self.theta_u_cs - self.theta_u).abs())
    }
}

fn random_law(rng: &mut ChaCha8Rng, max_atoms: usize) -> AtomLaw {
    let count = rng.random_range(1..=max_atoms);
    let mut raw: Vec<f64> = (0..count).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|p| *p /= total);
    raw.iter()
        .map(|&p| (rng.random::<f64>() * 6.0 - 3.0, p))
        .collect()
}

/// Seeded random instance: 1-3 covariate atoms, 1-5 atoms per side.
pub fn random_instance(seed: u64) -> DiscreteConditional {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_x = rng.random_range(1..=3);
    let mut raw_weights: Vec<f64> = (0..n_x).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw_weights.iter().sum();
    raw_weights.iter_mut().for_each(|w| *w /= total);
    let x_atoms = raw_weights
        .into_iter()
        .map(|weight| XAtom {
            weight,
            f_atoms: random_law(&mut rng, 5),
            g_atoms: random_law(&mut rng, 5),
        })
        .collect();
    DiscreteConditional::new(x_atoms).expect("generated instance is valid")
}

/// Symmetric law: atoms `c +/- d_k` with equal mass on both sides, plus an
/// optional atom at the center.
fn random_symmetric_law(rng: &mut ChaCha8Rng) -> AtomLaw {
    let pairs = rng.random_range(1..=2);
    let center_atom = rng.random::<f64>() < 0.5;
    let mut raw: Vec<f64> =
        (0..pairs + usize::from(center_atom)).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|p| *p /= total);
    let center = rng.random::<f64>() * 2.0 - 1.0;
    let mut law = Vec::new();
    for &mass in raw.iter().take(pairs) {
        let offset = 0.2 + 2.0 * rng.random::<f64>();
        law.push((center - offset, mass / 2.0));
        law.push((center + offset, mass / 2.0));
    }
    if center_atom {
        law.push((center, raw[pairs]));
    }
    law
}

/// Seeded instance where, per covariate atom, the `g` law is an affine
/// transform of the `f` law with positive scale: `g = (f - b) / a`, `a > 0`,
/// drawn from symmetric laws. Symmetry makes the standardized law equal to
/// its own reflection, so the location-scale representation holds with both
/// scale signs and the moment outer bounds coincide with the tight bounds at
/// both endpoints.
pub fn location_scale_instance(seed: u64) -> DiscreteConditional {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_x = rng.random_range(1..=3);
    let mut raw_weights: Vec<f64> = (0..n_x).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw_weights.iter().sum();
    raw_weights.iter_mut().for_each(|w| *w /= total);
    let x_atoms = raw_weights
        .into_iter()
        .map(|weight| {
            let f_atoms = random_symmetric_law(&mut rng);
            let a = 0.3 + 2.0 * rng.random::<f64>();
            let b = rng.random::<f64>() * 2.0 - 1.0;
            let g_atoms = f_atoms.iter().map(|&(v, p)| ((v - b) / a, p)).collect();
            XAtom { weight, f_atoms, g_atoms }
        })
        .collect();
    DiscreteConditional::new(x_atoms).expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform(values: &[f64]) -> AtomLaw {
        let p = 1.0 / values.len() as f64;
        values.iter().map(|&v| (v, p)).collect()
    }

    #[test]
    fn point_masses_couple_trivially() {
        let dc = DiscreteConditional::single(vec![(3.0, 1.0)], vec![(-2.0, 1.0)]).unwrap();
        let (l, u) = tight_bounds_discrete(&dc);
        assert_relative_eq!(l, -6.0, epsilon = 1e-14);
        assert_relative_eq!(u, -6.0, epsilon = 1e-14);
    }

    #[test]
    fn two_point_uniform_marginals() {
        // f uniform{1,3}, g uniform{0,1}: comonotone gives (1*0 + 3*1)/2 = 1.5,
        // antitone gives (1*1 + 3*0)/2 = 0.5.
        let dc = DiscreteConditional::single(uniform(&[1.0, 3.0]), uniform(&[0.0, 1.0])).unwrap();
        let (l, u) = tight_bounds_discrete(&dc);
        assert_relative_eq!(l, 0.5, epsilon = 1e-14);
        assert_relative_eq!(u, 1.5, epsilon = 1e-14);
        let (el, eu) = tight_bounds_enumerate(&dc).unwrap();
        assert_relative_eq!(l, el, epsilon = 1e-14);
        assert_relative_eq!(u, eu, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_signs() {
        let dc =
            DiscreteConditional::single(uniform(&[-1.0, 1.0]), uniform(&[-1.0, 1.0])).unwrap();
        let (l, u) = tight_bounds_discrete(&dc);
        assert_relative_eq!(l, -1.0, epsilon = 1e-14);
        assert_relative_eq!(u, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn cs_matches_tight_on_location_scale_pair() {
        // f uniform{1,3} has the law of 2g+1 when g is uniform{0,1}.
        let dc = DiscreteConditional::single(uniform(&[1.0, 3.0]), uniform(&[0.0, 1.0])).unwrap();
        let (l, u) = cs_bounds_discrete(&dc);
        assert_relative_eq!(l, 0.5, epsilon = 1e-14);
        assert_relative_eq!(u, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn cs_strictly_wider_off_location_scale() {
        let dc = DiscreteConditional::single(
            uniform(&[0.0, 1.0, 10.0]),
            uniform(&[0.0, 1.0, 2.0]),
        )
        .unwrap();
        let s = BoundsSummary::of(&dc);
        assert!(s.theta_l_cs < s.theta_l - 1e-10);
        assert!(s.theta_u_cs > s.theta_u + 1e-10);
    }

    #[test]
    fn zero_variance_collapses_cs_interval() {
        let dc = DiscreteConditional::new(vec![
            XAtom {
                weight: 0.4,
                f_atoms: vec![(2.0, 1.0)],
                g_atoms: uniform(&[0.0, 1.0]),
            },
            XAtom {
                weight: 0.6,
                f_atoms: vec![(-1.0, 1.0)],
                g_atoms: uniform(&[1.0, 3.0]),
            },
        ])
        .unwrap();
        let (l, u) = cs_bounds_discrete(&dc);
        let expect = 0.4 * 2.0 * 0.5 + 0.6 * (-1.0) * 2.0;
        assert_relative_eq!(l, expect, epsilon = 1e-12);
        assert_relative_eq!(u, expect, epsilon = 1e-12);
    }

    #[test]
    fn sandwich_holds_on_random_instances() {
        for seed in 0..200 {
            let s = BoundsSummary::of(&random_instance(seed));
            assert!(
                s.sandwich_violation() <= 1e-10,
                "seed {seed}: violation {:.3e}",
                s.sandwich_violation()
            );
        }
    }

    #[test]
    fn location_scale_instances_are_tight() {
        for seed in 0..50 {
            let s = BoundsSummary::of(&location_scale_instance(seed));
            assert!(
                s.tightness_gap() <= 1e-10,
                "seed {seed}: gap {:.3e}",
                s.tightness_gap()
            );
        }
    }

    #[test]
    fn greedy_matches_enumeration_on_equal_mass_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let m = rng.random_range(1..=4);
            let f: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let g: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let dc = DiscreteConditional::single(uniform(&f), uniform(&g)).unwrap();
            let (gl, gu) = tight_bounds_discrete(&dc);
            let (el, eu) = tight_bounds_enumerate(&dc).unwrap();
            assert_relative_eq!(gl, el, epsilon = 1e-12);
            assert_relative_eq!(gu, eu, epsilon = 1e-12);
        }
    }

    #[test]
    fn unequal_mass_greedy_matching() {
        // f: 0 w.p. 0.25, 1 w.p. 0.75; g: 0 w.p. 0.5, 1 w.p. 0.5.
        // Comonotone: mass 0.25 at (0,0), 0.25 at (1,0), 0.5 at (1,1) -> 0.5.
        // Antitone: f asc vs g desc: 0.25 at (0,1), 0.25 at (1,1), 0.5 at (1,0) -> 0.25.
        let dc = DiscreteConditional::single(
            vec![(0.0, 0.25), (1.0, 0.75)],
            vec![(0.0, 0.5), (1.0, 0.5)],
        )
        .unwrap();
        let (l, u) = tight_bounds_discrete(&dc);
        assert_relative_eq!(u, 0.5, epsilon = 1e-14);
        assert_relative_eq!(l, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn swapping_roles_leaves_bounds_unchanged() {
        for seed in 0..50 {
            let dc = random_instance(seed);
            let a = BoundsSummary::of(&dc);
            let b = BoundsSummary::of(&dc.swapped());
            assert_relative_eq!(a.theta_l, b.theta_l, epsilon = 1e-12);
            assert_relative_eq!(a.theta_u, b.theta_u, epsilon = 1e-12);
            assert_relative_eq!(a.theta_l_cs, b.theta_l_cs, epsilon = 1e-12);
            assert_relative_eq!(a.theta_u_cs, b.theta_u_cs, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_mass_mismatch() {
        let err = DiscreteConditional::single(vec![(1.0, 0.9)], vec![(0.0, 1.0)]);
        assert!(matches!(err, Err(OracleError::MassMismatch { .. })));
    }
}
