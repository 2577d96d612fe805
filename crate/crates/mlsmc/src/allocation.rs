//! Cost-optimal planning: turn a target error epsilon and the rate
//! triple (alpha, beta, zeta) into a max level L and non-increasing
//! particle counts N_0..N_{L-1}.
//!
//! The depth comes from driving the bias h_L^alpha below epsilon; the
//! counts balance per-level variance h_l^beta against per-level cost
//! h_l^{-zeta}, giving N_l proportional to h_l^{(beta+zeta)/2} times the
//! work-variance sum K_L. Absolute constants are not derivable from the
//! rates alone, so `scale` stays a tuning input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower-bound multiplier: every N_l must exceed c * L.
pub const DEFAULT_FLOOR_MULTIPLIER: f64 = 2.0;

/// Rate triple plus mesh geometry. `alpha` is the bias rate, `beta` the
/// potential-deviation (variance) rate, `zeta` the cost rate, all as
/// exponents of the mesh width h_l = m_refine^{-(l + k_offset)}.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateParameters {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub m_refine: u32,
    pub k_offset: u32,
}

impl RateParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.zeta > 0.0) {
            return Err(Error::InvalidRates(format!(
                "rates must be positive, got alpha={}, beta={}, zeta={}",
                self.alpha, self.beta, self.zeta
            )));
        }
        if 2.0 * self.alpha < self.beta.max(self.zeta) {
            return Err(Error::InvalidRates(format!(
                "need 2*alpha >= max(beta, zeta), got alpha={}, beta={}, zeta={}",
                self.alpha, self.beta, self.zeta
            )));
        }
        if self.m_refine < 2 {
            return Err(Error::InvalidRates(format!(
                "refinement factor must be >= 2, got {}",
                self.m_refine
            )));
        }
        if self.k_offset < 1 {
            return Err(Error::InvalidRates("k_offset must be >= 1".into()));
        }
        Ok(())
    }

    /// h_l = m_refine^{-(l + k_offset)}.
    pub fn mesh_width(&self, level: usize) -> f64 {
        (self.m_refine as f64).powi(-((level + self.k_offset as usize) as i32))
    }
}

/// A full schedule: target density level L (particle levels run 0..L-1,
/// so `sizes` and `resolutions` have length L).
#[derive(Clone, Debug, Serialize)]
pub struct AllocationPlan {
    pub epsilon: f64,
    pub max_level: usize,
    pub sizes: Vec<usize>,
    pub resolutions: Vec<f64>,
    pub predicted_cost: f64,
}

/// Smallest L >= 1 with h_L^alpha <= epsilon.
pub fn choose_max_level(rates: &RateParameters, epsilon: f64, level_cap: usize) -> Result<usize> {
    rates.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut level = 1usize;
    while rates.mesh_width(level).powf(rates.alpha) > epsilon {
        level += 1;
        if level > level_cap {
            return Err(Error::LevelCapExceeded { requested: level, cap: level_cap });
        }
    }
    Ok(level)
}

/// Work-variance sum K_L = sum_{l=1}^{L-1} h_l^{(beta-zeta)/2}, the
/// Lagrange constant of the optimal allocation (each term is
/// sqrt(variance_l * cost_l) up to the rate constants). The sum is only
/// meaningful for L >= 2; at L = 1 the single term h_1^{(beta-zeta)/2}
/// is used so plans stay continuous across the L = 1 -> 2 boundary.
pub fn work_variance_sum(rates: &RateParameters, max_level: usize) -> f64 {
    let exponent = 0.5 * (rates.beta - rates.zeta);
    if max_level <= 1 {
        return rates.mesh_width(1).powf(exponent);
    }
    (1..max_level)
        .map(|l| rates.mesh_width(l).powf(exponent))
        .sum()
}

/// N_l = max(ceil(scale * L * eps^{-2} * K_L * h_l^{(beta+zeta)/2}),
/// floor(c*L) + 1), clipped non-increasing.
pub fn choose_sample_sizes(
    rates: &RateParameters,
    max_level: usize,
    epsilon: f64,
    scale: f64,
    floor_c: f64,
) -> Result<Vec<usize>> {
    rates.validate()?;
    if max_level == 0 {
        return Err(Error::InvalidPlan("max level must be >= 1".into()));
    }
    if !(epsilon > 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidPlan(format!(
            "epsilon and scale must be positive, got {epsilon} and {scale}"
        )));
    }
    let k = work_variance_sum(rates, max_level);
    let base = scale * max_level as f64 * epsilon.powi(-2) * k;
    let floor = (floor_c * max_level as f64).floor() as usize + 1;
    let mut sizes = Vec::with_capacity(max_level);
    let mut prev = usize::MAX;
    for l in 0..max_level {
        let raw = base * rates.mesh_width(l).powf(0.5 * (rates.beta + rates.zeta));
        if !raw.is_finite() || raw > 2f64.powi(53) {
            return Err(Error::InvalidPlan(format!(
                "sample size overflow at level {l}: {raw}"
            )));
        }
        let n = (raw.ceil() as usize).max(floor).min(prev);
        sizes.push(n);
        prev = n;
    }
    Ok(sizes)
}

/// Analytic cost of a schedule: sum_l N_l h_l^{-zeta}.
pub fn predicted_cost(sizes: &[usize], rates: &RateParameters) -> f64 {
    sizes
        .iter()
        .enumerate()
        .map(|(l, &n)| n as f64 * rates.mesh_width(l).powf(-rates.zeta))
        .sum()
}

/// The multilevel schedule for a target epsilon.
pub fn build_plan(
    rates: &RateParameters,
    epsilon: f64,
    scale: f64,
    floor_c: f64,
    level_cap: usize,
) -> Result<AllocationPlan> {
    let max_level = choose_max_level(rates, epsilon, level_cap)?;
    let sizes = choose_sample_sizes(rates, max_level, epsilon, scale, floor_c)?;
    let resolutions = (0..max_level).map(|l| rates.mesh_width(l)).collect();
    let predicted_cost = predicted_cost(&sizes, rates);
    Ok(AllocationPlan { epsilon, max_level, sizes, resolutions, predicted_cost })
}

/// The flat comparator: same depth L as the multilevel schedule, but
/// N_l = ceil(scale * eps^{-2}) at every level, the classical
/// one-rate-fits-all allocation.
pub fn single_level_plan(
    rates: &RateParameters,
    epsilon: f64,
    scale: f64,
    level_cap: usize,
) -> Result<AllocationPlan> {
    let max_level = choose_max_level(rates, epsilon, level_cap)?;
    if !(scale > 0.0) {
        return Err(Error::InvalidPlan(format!("scale must be positive, got {scale}")));
    }
    let raw = scale * epsilon.powi(-2);
    if !raw.is_finite() || raw > 2f64.powi(53) {
        return Err(Error::InvalidPlan(format!("sample size overflow: {raw}")));
    }
    let n = (raw.ceil() as usize).max(1);
    let sizes = vec![n; max_level];
    let resolutions: Vec<f64> = (0..max_level).map(|l| rates.mesh_width(l)).collect();
    let predicted_cost = predicted_cost(&sizes, rates);
    Ok(AllocationPlan { epsilon, max_level, sizes, resolutions, predicted_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_rates() -> RateParameters {
        RateParameters { alpha: 2.0, beta: 2.0, zeta: 1.0, m_refine: 2, k_offset: 1 }
    }

    #[test]
    fn max_level_solves_bias_inequality() {
        let rates = reference_rates();
        assert_eq!(choose_max_level(&rates, 2f64.powi(-4), 64).unwrap(), 1);
        assert_eq!(choose_max_level(&rates, 2f64.powi(-10), 64).unwrap(), 4);
        // Large epsilon clamps to one level, never zero.
        assert_eq!(choose_max_level(&rates, 10.0, 64).unwrap(), 1);
    }

    #[test]
    fn max_level_respects_cap() {
        let rates = reference_rates();
        let err = choose_max_level(&rates, 1e-12, 5).unwrap_err();
        assert!(matches!(err, Error::LevelCapExceeded { cap: 5, .. }));
    }

    #[test]
    fn sample_sizes_match_hand_arithmetic() {
        // beta=2, zeta=1, M=2, k=1, L=3, eps=0.1, scale=1:
        // K_3 = h_1^{1/2} + h_2^{1/2} = 0.5 + 0.35355 = 0.85355,
        // N_l = ceil(300 * K_3 * h_l^{3/2}) = 91, 33, 12.
        let rates = reference_rates();
        let k = work_variance_sum(&rates, 3);
        assert!((k - (0.5 + 0.125f64.sqrt())).abs() < 1e-12);
        let sizes = choose_sample_sizes(&rates, 3, 0.1, 1.0, 2.0).unwrap();
        assert_eq!(sizes, vec![91, 33, 12]);
    }

    #[test]
    fn equal_rates_make_unit_terms() {
        // beta = zeta: every K term is 1, so K_L = L - 1 (and 1 at L = 1).
        let rates = RateParameters { alpha: 1.0, beta: 1.0, zeta: 1.0, m_refine: 2, k_offset: 1 };
        assert_eq!(work_variance_sum(&rates, 5), 4.0);
        assert_eq!(work_variance_sum(&rates, 1), 1.0);
    }

    #[test]
    fn predicted_cost_examples() {
        let rates = reference_rates();
        assert_eq!(predicted_cost(&[10], &rates), 20.0);
        // Free evaluations (zeta -> 0) reduce the cost to the head count.
        let zero_cost_rate =
            RateParameters { alpha: 1.0, beta: 1.0, zeta: 0.0, m_refine: 2, k_offset: 1 };
        assert_eq!(predicted_cost(&[3, 4, 5], &zero_cost_rate), 12.0);
    }

    #[test]
    fn flat_plan_follows_inverse_square_law() {
        let rates = reference_rates();
        let coarse = single_level_plan(&rates, 0.1, 1.0, 64).unwrap();
        assert!(coarse.sizes.iter().all(|&n| n == 100));
        let fine = single_level_plan(&rates, 0.05, 1.0, 64).unwrap();
        assert!(fine.sizes.iter().all(|&n| n == 400));
        assert!(fine.max_level >= coarse.max_level);
    }

    #[test]
    fn rejects_invalid_rates() {
        let mut rates = reference_rates();
        rates.alpha = 0.5;
        rates.beta = 2.0;
        assert!(matches!(rates.validate(), Err(Error::InvalidRates(_))));
        rates.alpha = -1.0;
        assert!(rates.validate().is_err());
        let mut rates = reference_rates();
        rates.m_refine = 1;
        assert!(rates.validate().is_err());
    }

    proptest! {
        #[test]
        fn plans_satisfy_preconditions(
            alpha in 0.5f64..3.0,
            ratio_b in 0.1f64..1.0,
            ratio_z in 0.1f64..1.0,
            eps_pow in 1u32..9,
            scale in 0.1f64..100.0,
        ) {
            // Sample beta, zeta below the 2*alpha ceiling so rates validate.
            let rates = RateParameters {
                alpha,
                beta: 2.0 * alpha * ratio_b,
                zeta: 2.0 * alpha * ratio_z,
                m_refine: 2,
                k_offset: 1,
            };
            let epsilon = 2f64.powi(-(eps_pow as i32));
            let plan = build_plan(&rates, epsilon, scale, 2.0, 64).unwrap();
            prop_assert!(plan.max_level >= 1);
            prop_assert_eq!(plan.sizes.len(), plan.max_level);
            for w in plan.sizes.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            for &n in &plan.sizes {
                prop_assert!(n as f64 > 2.0 * plan.max_level as f64);
            }
            prop_assert!(plan.predicted_cost > 0.0);
        }
    }
}
