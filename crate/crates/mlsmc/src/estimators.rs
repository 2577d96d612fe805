//! Normalizing-constant and expectation estimators assembled from the
//! per-level summaries of a [`RunRecord`].
//!
//! Two estimators target the ratio gamma_l(1) = Z_l / Z_0:
//!
//! * the product form, prod_{p<l} eta_p^N(G_p), and
//! * the telescoped form, eta_0^N(G_0) plus signed corrections
//!   gamma_{p-2}^N(G_{p-2}(G_{p-1} - 1)) for p = 2..=l,
//!
//! both unbiased when the mutation kernels are exactly invariant. The
//! telescoped form only consumes particle levels up to l-2, so a run
//! whose top level evaluated the next potential yields the l+1 estimate
//! for free.

use crate::engine::RunRecord;
use crate::error::{Error, Result};

/// All estimates derivable from one run.
#[derive(Clone, Copy, Debug)]
pub struct EstimateReport {
    /// Product estimator of Z_L / Z_0; positive by construction.
    pub standard_nc: f64,
    /// Telescoped estimator of Z_L / Z_0; unbiased but not sign-constrained.
    pub telescoped_nc: f64,
    /// Multilevel estimator of eta_L(g).
    pub ml_expectation: f64,
    pub level_reached: usize,
    /// Telescoped estimate of Z_{L+1} / Z_0 when the top level carried
    /// next-potential evaluations.
    pub telescoped_extra_level: Option<f64>,
    pub cost: f64,
}

/// Product estimator of gamma_l(1). Assembled in log space; every factor
/// is a positive mean, so the result is positive and overflow-safe.
pub fn standard_nc_estimate(record: &RunRecord, l: usize) -> Result<f64> {
    if l > record.num_levels() {
        return Err(Error::LevelOutOfRange { level: l, available: record.num_levels() });
    }
    let log_sum: f64 = record.levels[..l]
        .iter()
        .map(|s| s.mean_potential.ln())
        .sum();
    Ok(log_sum.exp())
}

/// Telescoped estimator of gamma_l(1). Needs particle levels 0..=l-2 with
/// the next-level potential evaluated on each of them (none for l = 1).
/// The positive prefix products are accumulated in log space; correction
/// terms are signed, so the outer sum stays linear.
pub fn telescoped_nc_estimate(record: &RunRecord, l: usize) -> Result<f64> {
    if l == 0 || record.num_levels() == 0 {
        return Err(Error::InvalidInput(
            "telescoped estimator starts at level 1 and needs a level-0 summary".into(),
        ));
    }
    if l >= 2 && l - 2 >= record.num_levels() {
        return Err(Error::LevelOutOfRange { level: l - 2, available: record.num_levels() });
    }
    let mut total = record.levels[0].mean_potential;
    let mut log_prefix = 0.0_f64;
    for p in 2..=l {
        let summary = &record.levels[p - 2];
        let gap = summary.mean_potential_next_gap.ok_or_else(|| {
            Error::InvalidInput(format!(
                "telescoped estimator at level {l} needs next-level potentials at level {}",
                p - 2
            ))
        })?;
        // log_prefix holds sum_{k <= p-3} ln mean_G_k at this point.
        total += log_prefix.exp() * gap;
        if p < l {
            log_prefix += summary.mean_potential.ln();
        }
    }
    Ok(total)
}

/// Multilevel estimator of eta_l(g): the level-0 mean plus one change-of-
/// measure increment per level, each computed on the particles one level
/// below it.
pub fn ml_expectation_estimate(record: &RunRecord, l: usize) -> Result<f64> {
    if l > record.num_levels() {
        return Err(Error::LevelOutOfRange { level: l, available: record.num_levels() });
    }
    let mut total = record.levels[0].mean_qoi;
    for j in 1..=l {
        let s = &record.levels[j - 1];
        total += s.mean_qoi_potential / s.mean_potential - s.mean_qoi;
    }
    Ok(total)
}

/// estimate / truth - 1.
pub fn relative_error(estimate: f64, truth: f64) -> f64 {
    estimate / truth - 1.0
}

/// Assemble the full report for a run, taking l = number of particle
/// levels and adding the free l+1 telescoped estimate when the top level
/// carried next-potential evaluations.
pub fn report(record: &RunRecord) -> Result<EstimateReport> {
    let l = record.num_levels();
    // The engine fills next potentials bottom-up, so a gap at the top
    // level implies gaps everywhere below it.
    let telescoped_extra_level = if l >= 1 && record.levels[l - 1].mean_potential_next_gap.is_some()
    {
        Some(telescoped_nc_estimate(record, l + 1)?)
    } else {
        None
    };
    Ok(EstimateReport {
        standard_nc: standard_nc_estimate(record, l)?,
        telescoped_nc: telescoped_nc_estimate(record, l)?,
        ml_expectation: ml_expectation_estimate(record, l)?,
        level_reached: l,
        telescoped_extra_level,
        cost: record.realized_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_mlsmc, LevelSummary, SmcConfig};
    use crate::oracle::FiniteFkModel;

    fn record_from_means(means: &[f64], gaps: &[Option<f64>]) -> RunRecord {
        let levels = means
            .iter()
            .zip(gaps)
            .map(|(&m, &gap)| LevelSummary {
                n: 100,
                mean_potential: m,
                mean_potential_next_gap: gap,
                mean_qoi: 0.0,
                mean_qoi_potential: 0.0,
            })
            .collect();
        RunRecord { levels, realized_cost: 1.0, seed: 0 }
    }

    #[test]
    fn single_level_collapses_to_mean_potential() {
        let record = record_from_means(&[1.5], &[Some(1.0)]);
        assert_eq!(standard_nc_estimate(&record, 1).unwrap(), 1.5);
        assert_eq!(telescoped_nc_estimate(&record, 1).unwrap(), 1.5);
    }

    #[test]
    fn unit_potentials_give_unit_estimates_exactly() {
        let record = record_from_means(&[1.0, 1.0, 1.0], &[Some(0.0), Some(0.0), Some(0.0)]);
        assert_eq!(standard_nc_estimate(&record, 3).unwrap(), 1.0);
        assert_eq!(telescoped_nc_estimate(&record, 3).unwrap(), 1.0);
        assert_eq!(telescoped_nc_estimate(&record, 4).unwrap(), 1.0);
    }

    #[test]
    fn telescoped_matches_hand_sum() {
        // l = 3: mean_G = (a0, a1), gaps = (b0, b1);
        // estimate = a0 + b0 + a0 * b1.
        let record = record_from_means(&[2.0, 3.0], &[Some(0.5), Some(0.25)]);
        let got = telescoped_nc_estimate(&record, 3).unwrap();
        assert!((got - (2.0 + 0.5 + 2.0 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn missing_gap_is_a_precondition_error() {
        let record = record_from_means(&[2.0, 3.0], &[None, None]);
        let err = telescoped_nc_estimate(&record, 3).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(err.to_string().contains("level 0"));
    }

    #[test]
    fn report_carries_free_extra_level() {
        // Five density levels, three particle levels: the top particle
        // level still has a next potential, so the report reaches l+1.
        let kappa = (0..5).map(|l| vec![1.0, 2f64.powi(l)]).collect();
        let model = FiniteFkModel::with_independence_kernels(kappa).unwrap();
        let record = run_mlsmc(&model, &[3000, 3000, 3000], |_, _| 0.0, &SmcConfig::default(), 3)
            .unwrap();
        let report = report(&record).unwrap();
        assert_eq!(report.level_reached, 3);
        let truth3 = model.exact_zratio(3);
        let truth4 = model.exact_zratio(4);
        assert!((report.standard_nc - truth3).abs() < 0.15 * truth3);
        assert!((report.telescoped_nc - truth3).abs() < 0.15 * truth3);
        let extra = report.telescoped_extra_level.unwrap();
        assert!((extra - truth4).abs() < 0.2 * truth4);
    }

    #[test]
    fn expectation_estimate_tracks_finest_level() {
        // QoI = state index; eta_3 weights (1, 8)/9 so eta_3(g) = 8/9.
        let kappa = (0..5).map(|l| vec![1.0, 2f64.powi(l)]).collect();
        let model = FiniteFkModel::with_independence_kernels(kappa).unwrap();
        let record = run_mlsmc(
            &model,
            &[4000, 4000, 4000],
            |_, &s| s as f64,
            &SmcConfig::default(),
            17,
        )
        .unwrap();
        let got = ml_expectation_estimate(&record, 3).unwrap();
        assert!((got - 8.0 / 9.0).abs() < 0.05, "got {got}");
    }
}
