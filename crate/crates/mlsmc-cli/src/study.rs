//! Study drivers: reference truth, the cost-vs-MSE table, the
//! variance-rate proxy, and the oracle self-check.
//!
//! Replicates run in parallel over a local worker pool, but every random
//! number comes from a stream derived only from (base seed, grid index,
//! replicate), and rows are assembled in a fixed order afterwards, so the
//! emitted CSV is byte-identical no matter how many workers run it.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use mlsmc::allocation::{build_plan, choose_sample_sizes, AllocationPlan};
use mlsmc::engine::RunRecord;
use mlsmc::estimators::{relative_error, standard_nc_estimate, telescoped_nc_estimate};
use mlsmc::oracle::{
    exact_gamma_measure, selection_mutation, telescoping_identity_residual, FiniteFkModel,
};
use mlsmc::rng::mix_seed;
use mlsmc::stats::{fit_loglog, mean, median, sample_variance};

use crate::config::{LoadedConfig, Method, ProblemKind};
use crate::problem::Problem;

/// Stream tags keeping the independent stages of one study on disjoint
/// seeds even though they share a base seed.
const TRUTH_TAG: u64 = 1;
const STUDY_TAG: u64 = 2;
const VARIANCE_TAG: u64 = 3;

/// Settings after command-line overrides are applied to the config file.
#[derive(Clone, Debug)]
pub struct EffectiveSettings {
    pub workers: usize,
    pub out_dir: PathBuf,
    pub base_seed: u64,
}

impl EffectiveSettings {
    pub fn resolve(
        loaded: &LoadedConfig,
        workers: Option<usize>,
        out: Option<PathBuf>,
        seed: Option<u64>,
    ) -> Self {
        let workers = workers
            .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
            .unwrap_or(1)
            .max(1);
        Self {
            workers,
            out_dir: out.unwrap_or_else(|| loaded.config.study.out_dir.clone()),
            base_seed: seed.unwrap_or(loaded.config.study.base_seed),
        }
    }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")
}

/// The reference value every estimate in a study is scored against.
#[derive(Clone, Debug, Serialize)]
pub struct TruthReport {
    pub value: f64,
    /// None when the value is exact (finite-state enumeration).
    pub standard_error: Option<f64>,
    pub level: usize,
    pub replicates: Option<usize>,
    pub exact: bool,
}

/// Deepest multilevel plan on the grid; the reference level and the
/// required model depth both hang off it.
fn deepest_plan(loaded: &LoadedConfig) -> Result<AllocationPlan> {
    let rates = loaded.config.rates.to_rates();
    let study = &loaded.config.study;
    let eps_min = *study.epsilons.last().expect("validated non-empty");
    Ok(build_plan(
        &rates,
        eps_min,
        study.sample_scale,
        study.floor_multiplier,
        loaded.config.problem.level_cap,
    )?)
}

/// Deepest particle level any plan on the grid reaches.
pub fn study_depth(loaded: &LoadedConfig) -> Result<usize> {
    Ok(deepest_plan(loaded)?.max_level)
}

/// Density levels the truth protocol alone needs.
pub fn truth_depth(loaded: &LoadedConfig, l_max: usize) -> usize {
    match loaded.config.problem.kind {
        ProblemKind::Elliptic => l_max + loaded.config.truth.level_offset + 1,
        ProblemKind::FiniteOracle => l_max + 1,
    }
}

/// Density levels the study problem must expose: one past the deepest
/// particle level for the top potential, one more for the free extra
/// telescoped level, and enough headroom for the reference runs.
fn required_levels(loaded: &LoadedConfig, l_max: usize) -> usize {
    match loaded.config.problem.kind {
        ProblemKind::Elliptic => {
            (l_max + 2).max(l_max + loaded.config.truth.level_offset + 1)
        }
        // Fixtures have fixed depth; ask only for the hard minimum and
        // treat the extra telescoped level as opportunistic.
        ProblemKind::FiniteOracle => l_max + 1,
    }
}

pub fn compute_truth(
    problem: &Problem,
    loaded: &LoadedConfig,
    settings: &EffectiveSettings,
    pool: &rayon::ThreadPool,
) -> Result<TruthReport> {
    let rates = loaded.config.rates.to_rates();
    let study = &loaded.config.study;
    let truth_cfg = &loaded.config.truth;
    let eps_min = *study.epsilons.last().expect("validated non-empty");
    let l_ref_nominal = deepest_plan(loaded)?.max_level + truth_cfg.level_offset;
    let l_ref = l_ref_nominal.min(problem.levels_available() - 1);

    if let Some(value) = problem.exact_truth(l_ref) {
        return Ok(TruthReport {
            value,
            standard_error: None,
            level: l_ref,
            replicates: None,
            exact: true,
        });
    }

    let sizes = choose_sample_sizes(
        &rates,
        l_ref,
        eps_min,
        study.sample_scale * truth_cfg.sample_multiplier,
        study.floor_multiplier,
    )?;
    let smc = loaded.config.engine.to_smc_config(false);
    let estimates: Vec<f64> = pool.install(|| {
        (0..truth_cfg.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let seed = mix_seed(&[settings.base_seed, TRUTH_TAG, r]);
                let record = problem.run(&sizes, &smc, seed)?;
                standard_nc_estimate(&record, l_ref)
            })
            .collect::<mlsmc::Result<Vec<f64>>>()
    })?;
    let value = mean(&estimates);
    let se = (sample_variance(&estimates) / estimates.len() as f64).sqrt();
    let bound = eps_min / 5.0;
    if !(se < bound) {
        bail!(
            "reference standard error {se:.3e} is not below eps_min/5 = {bound:.3e}; \
             raise [truth] replicates or sample-multiplier"
        );
    }
    Ok(TruthReport {
        value,
        standard_error: Some(se),
        level: l_ref,
        replicates: Some(truth_cfg.replicates),
        exact: false,
    })
}

/// One CSV line. wall_clock_s is part of the pinned schema but is left
/// empty: per-row timings would break byte-identical reruns across worker
/// counts, so timing lives in the JSON sidecar as aggregates instead.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub epsilon: f64,
    pub replicate: usize,
    pub seed: u64,
    pub estimate: f64,
    pub truth: f64,
    pub rel_error: f64,
    pub analytic_cost: f64,
    pub wall_clock_s: Option<f64>,
}

impl ResultRow {
    pub fn degenerate(&self) -> bool {
        !self.estimate.is_finite()
    }
}

/// Outcome of one engine pass inside a bundle.
struct RunOutcome {
    record: Option<RunRecord>,
    seconds: f64,
}

/// Everything one (epsilon, replicate) cell produces: at most one shared
/// multilevel run (read by both mlsmc methods) and one flat-allocation
/// run, all on the same seed so method comparisons are paired.
struct Bundle {
    seed: u64,
    ml: Option<RunOutcome>,
    sl: Option<RunOutcome>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub rows: usize,
    pub degenerate: usize,
    /// Mean squared deviation from truth over usable rows.
    pub mse: Option<f64>,
    pub median_cost: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FittedRate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub method: String,
    /// Least-squares slope of log(median cost) against log(MSE); the
    /// multilevel theory predicts about -1 when beta > zeta and steeper
    /// for the flat baseline.
    pub cost_rate: Option<FittedRate>,
    pub points: Vec<EpsilonPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtraLevelPoint {
    pub epsilon: f64,
    pub count: usize,
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonTiming {
    pub epsilon: f64,
    pub ml_run_mean_s: Option<f64>,
    pub sl_run_mean_s: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyTiming {
    pub study_seconds: f64,
    pub per_epsilon: Vec<EpsilonTiming>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudySummary {
    pub config_sha256: String,
    pub problem: String,
    pub epsilons: Vec<f64>,
    pub replicates: usize,
    pub truth: TruthReport,
    pub methods: Vec<MethodSummary>,
    /// Per-epsilon mean of the free one-past-the-top telescoped estimate,
    /// present when the hierarchy was deep enough to evaluate it.
    pub telescoped_extra_level: Vec<ExtraLevelPoint>,
    pub degenerate_rows: usize,
    pub total_rows: usize,
    pub timing: StudyTiming,
}

pub struct StudyArtifacts {
    pub csv_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub summary: StudySummary,
}

pub fn run_study(loaded: &LoadedConfig, settings: &EffectiveSettings) -> Result<StudyArtifacts> {
    let started = Instant::now();
    let config = &loaded.config;
    let study = &config.study;
    let rates = config.rates.to_rates();
    let pool = worker_pool(settings.workers)?;

    let ml_plans: Vec<AllocationPlan> = study
        .epsilons
        .iter()
        .map(|&eps| {
            build_plan(
                &rates,
                eps,
                study.sample_scale,
                study.floor_multiplier,
                config.problem.level_cap,
            )
        })
        .collect::<mlsmc::Result<_>>()?;
    let sl_plans: Vec<AllocationPlan> = study
        .epsilons
        .iter()
        .map(|&eps| {
            mlsmc::allocation::single_level_plan(
                &rates,
                eps,
                study.baseline_scale(),
                config.problem.level_cap,
            )
        })
        .collect::<mlsmc::Result<_>>()?;
    let l_max = ml_plans.iter().map(|p| p.max_level).max().expect("non-empty grid");
    let problem = Problem::from_config(loaded, required_levels(loaded, l_max))?;

    let truth = compute_truth(&problem, loaded, settings, &pool)?;

    let want_ml = study.methods.contains(&Method::MlsmcStandard)
        || study.methods.contains(&Method::MlsmcTelescoped);
    let want_sl = study.methods.contains(&Method::SingleLevelSmc);
    let ml_cfg = config.engine.to_smc_config(true);
    let sl_cfg = config.engine.to_smc_config(false);

    // All stochastic work, replicate-parallel per epsilon.
    let mut bundles: Vec<Vec<Bundle>> = Vec::with_capacity(study.epsilons.len());
    for (e, _) in study.epsilons.iter().enumerate() {
        let ml_sizes = &ml_plans[e].sizes;
        let sl_sizes = &sl_plans[e].sizes;
        let per_eps: Vec<Bundle> = pool.install(|| {
            (0..study.replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let seed = mix_seed(&[settings.base_seed, STUDY_TAG, e as u64, r]);
                    let timed = |sizes: &[usize], cfg| {
                        let t = Instant::now();
                        let record = problem.run(sizes, cfg, seed).ok();
                        RunOutcome { record, seconds: t.elapsed().as_secs_f64() }
                    };
                    Bundle {
                        seed,
                        ml: want_ml.then(|| timed(ml_sizes, &ml_cfg)),
                        sl: want_sl.then(|| timed(sl_sizes, &sl_cfg)),
                    }
                })
                .collect()
        });
        bundles.push(per_eps);
    }

    // Deterministic row assembly: methods in config order, then the
    // epsilon grid, then replicates.
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut extra_level: Vec<ExtraLevelPoint> = Vec::new();
    for &method in &study.methods {
        for (e, &epsilon) in study.epsilons.iter().enumerate() {
            let plan = match method {
                Method::SingleLevelSmc => &sl_plans[e],
                _ => &ml_plans[e],
            };
            let l = plan.max_level;
            let flat_cost: f64 = plan
                .sizes
                .iter()
                .enumerate()
                .map(|(lvl, &n)| n as f64 * problem.cost_weight(lvl))
                .sum();
            for (r, bundle) in bundles[e].iter().enumerate() {
                let outcome = match method {
                    Method::SingleLevelSmc => bundle.sl.as_ref(),
                    _ => bundle.ml.as_ref(),
                };
                let record = outcome.and_then(|o| o.record.as_ref());
                let (estimate, cost) = match (method, record) {
                    (_, None) => (f64::NAN, f64::NAN),
                    (Method::SingleLevelSmc, Some(rec)) => (
                        standard_nc_estimate(rec, l).unwrap_or(f64::NAN),
                        rec.realized_cost,
                    ),
                    (Method::MlsmcStandard, Some(rec)) => {
                        // The shared run bills its extra potential
                        // evaluations to the telescoped method; the
                        // product estimator alone would not have done
                        // them, so its cost is the plain schedule cost.
                        (standard_nc_estimate(rec, l).unwrap_or(f64::NAN), flat_cost)
                    }
                    (Method::MlsmcTelescoped, Some(rec)) => (
                        telescoped_nc_estimate(rec, l).unwrap_or(f64::NAN),
                        rec.realized_cost,
                    ),
                };
                let estimate = if estimate.is_finite() { estimate } else { f64::NAN };
                rows.push(ResultRow {
                    method: method.to_string(),
                    epsilon,
                    replicate: r,
                    seed: bundle.seed,
                    estimate,
                    truth: truth.value,
                    rel_error: relative_error(estimate, truth.value),
                    analytic_cost: cost,
                    wall_clock_s: None,
                });
            }
        }
    }

    // The free one-past-the-top ratio from the telescoped runs.
    if study.methods.contains(&Method::MlsmcTelescoped) {
        for (e, &epsilon) in study.epsilons.iter().enumerate() {
            let l = ml_plans[e].max_level;
            let values: Vec<f64> = bundles[e]
                .iter()
                .filter_map(|b| b.ml.as_ref().and_then(|o| o.record.as_ref()))
                .filter_map(|rec| {
                    rec.levels[l - 1]
                        .mean_potential_next_gap
                        .is_some()
                        .then(|| telescoped_nc_estimate(rec, l + 1).ok())
                        .flatten()
                })
                .filter(|v| v.is_finite())
                .collect();
            extra_level.push(ExtraLevelPoint {
                epsilon,
                count: values.len(),
                mean: (!values.is_empty()).then(|| mean(&values)),
            });
        }
    }

    let total_rows = rows.len();
    let degenerate_rows = rows.iter().filter(|r| r.degenerate()).count();

    let methods = summarize_methods(study, &rows);
    let timing = StudyTiming {
        study_seconds: started.elapsed().as_secs_f64(),
        per_epsilon: study
            .epsilons
            .iter()
            .enumerate()
            .map(|(e, &epsilon)| EpsilonTiming {
                epsilon,
                ml_run_mean_s: mean_seconds(&bundles[e], |b| b.ml.as_ref()),
                sl_run_mean_s: mean_seconds(&bundles[e], |b| b.sl.as_ref()),
            })
            .collect(),
    };

    let summary = StudySummary {
        config_sha256: loaded.sha256.clone(),
        problem: match config.problem.kind {
            ProblemKind::Elliptic => "elliptic".into(),
            ProblemKind::FiniteOracle => "finite-oracle".into(),
        },
        epsilons: study.epsilons.clone(),
        replicates: study.replicates,
        truth,
        methods,
        telescoped_extra_level: extra_level,
        degenerate_rows,
        total_rows,
        timing,
    };

    fs::create_dir_all(&settings.out_dir)
        .with_context(|| format!("creating {}", settings.out_dir.display()))?;
    let csv_path = settings.out_dir.join("study.csv");
    let sidecar_path = settings.out_dir.join("study.json");
    write_rows(&csv_path, &rows)?;
    fs::write(&sidecar_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", sidecar_path.display()))?;

    if degenerate_rows * 20 > total_rows {
        bail!(
            "{degenerate_rows} of {total_rows} rows are degenerate (> 5%); \
             results were written to {} but the study is not trustworthy",
            settings.out_dir.display()
        );
    }

    Ok(StudyArtifacts { csv_path, sidecar_path, summary })
}

fn mean_seconds<F>(bundles: &[Bundle], pick: F) -> Option<f64>
where
    F: Fn(&Bundle) -> Option<&RunOutcome>,
{
    let times: Vec<f64> = bundles.iter().filter_map(|b| pick(b).map(|o| o.seconds)).collect();
    (!times.is_empty()).then(|| mean(&times))
}

fn summarize_methods(
    study: &crate::config::StudySection,
    rows: &[ResultRow],
) -> Vec<MethodSummary> {
    study
        .methods
        .iter()
        .map(|&method| {
            let name = method.to_string();
            let points: Vec<EpsilonPoint> = study
                .epsilons
                .iter()
                .map(|&epsilon| {
                    let cell: Vec<&ResultRow> = rows
                        .iter()
                        .filter(|r| r.method == name && r.epsilon == epsilon)
                        .collect();
                    let usable: Vec<&&ResultRow> =
                        cell.iter().filter(|r| !r.degenerate()).collect();
                    let mse = (!usable.is_empty()).then(|| {
                        mean(
                            &usable
                                .iter()
                                .map(|r| (r.estimate - r.truth).powi(2))
                                .collect::<Vec<f64>>(),
                        )
                    });
                    let median_cost = (!usable.is_empty()).then(|| {
                        median(&usable.iter().map(|r| r.analytic_cost).collect::<Vec<f64>>())
                    });
                    EpsilonPoint {
                        epsilon,
                        rows: cell.len(),
                        degenerate: cell.len() - usable.len(),
                        mse,
                        median_cost,
                    }
                })
                .collect();
            // x = MSE, y = median cost: the fitted slope is the cost rate
            // the multilevel analysis bounds.
            let fit_points: Vec<(f64, f64)> = points
                .iter()
                .filter_map(|p| match (p.mse, p.median_cost) {
                    (Some(m), Some(c)) if m > 0.0 && c > 0.0 => Some((m, c)),
                    _ => None,
                })
                .collect();
            let cost_rate = (fit_points.len() >= 2)
                .then(|| fit_loglog(&fit_points).ok())
                .flatten()
                .map(|fit| FittedRate {
                    slope: fit.slope,
                    intercept: fit.intercept,
                    r_squared: fit.r_squared,
                });
            MethodSummary { method: name, cost_rate, points }
        })
        .collect()
}

fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-level variance proxy N Var(eta_l^N(G_l)) and its log-log rate in
/// the resolution.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceRateReport {
    pub config_sha256: String,
    pub beta_hat: f64,
    pub r_squared: f64,
    pub replicates: usize,
    pub particles: usize,
    pub levels: Vec<VarianceLevel>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceLevel {
    pub level: usize,
    pub resolution: f64,
    pub proxy: f64,
    pub usable: bool,
}

pub fn variance_rate(
    loaded: &LoadedConfig,
    settings: &EffectiveSettings,
) -> Result<VarianceRateReport> {
    let vr = &loaded.config.variance_rate;
    let pool = worker_pool(settings.workers)?;
    let problem = Problem::from_config(loaded, vr.max_level + 2)?;
    let sizes = vec![vr.particles; vr.max_level + 1];
    let smc = loaded.config.engine.to_smc_config(false);

    let records: Vec<RunRecord> = pool.install(|| {
        (0..vr.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let seed = mix_seed(&[settings.base_seed, VARIANCE_TAG, r]);
                problem.run(&sizes, &smc, seed)
            })
            .collect::<mlsmc::Result<Vec<RunRecord>>>()
    })?;

    let mut levels = Vec::new();
    for level in vr.min_level..=vr.max_level {
        let means: Vec<f64> = records
            .iter()
            .map(|rec| rec.levels[level].mean_potential)
            .collect();
        let proxy = vr.particles as f64 * sample_variance(&means);
        let usable = proxy.is_finite() && proxy > 0.0;
        levels.push(VarianceLevel {
            level,
            resolution: problem.resolution(level),
            proxy,
            usable,
        });
    }
    let points: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.usable)
        .map(|l| (l.resolution, l.proxy))
        .collect();
    if points.len() < 2 {
        bail!(
            "only {} of {} levels have a positive variance proxy; the rate \
             is degenerate (identical levels?)",
            points.len(),
            levels.len()
        );
    }
    let fit = fit_loglog(&points)?;
    Ok(VarianceRateReport {
        config_sha256: loaded.sha256.clone(),
        beta_hat: fit.slope,
        r_squared: fit.r_squared,
        replicates: vr.replicates,
        particles: vr.particles,
        levels,
    })
}

/// One line of the oracle self-check.
pub struct CheckLine {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Exact identities on finite fixtures, the same ones the test suite
/// pins, runnable from the shell as a smoke check of a build.
pub fn check_oracle() -> Vec<CheckLine> {
    use rand::Rng;
    use rand::SeedableRng;

    let mut lines = Vec::new();

    let fixture = FiniteFkModel::benchmark_fixture();
    let levels = 5;

    let mut worst_invariance = 0.0_f64;
    for level in 1..levels {
        let eta = fixture.eta(level);
        let kernel = fixture.kernel(level);
        let n = eta.len();
        for j in 0..n {
            let pushed: f64 = (0..n).map(|i| eta[i] * kernel[i][j]).sum();
            worst_invariance = worst_invariance.max((pushed - eta[j]).abs());
        }
    }
    lines.push(CheckLine {
        name: "kernel invariance",
        pass: worst_invariance <= 1e-12,
        detail: format!("max |eta M - eta| = {worst_invariance:.2e}"),
    });

    let mut worst_residual = 0.0_f64;
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let kappa: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..5).map(|_| rng.gen_range(0.5..2.0)).collect())
            .collect();
        let model = if seed % 2 == 0 {
            FiniteFkModel::with_independence_kernels(kappa)
        } else {
            FiniteFkModel::with_metropolis_kernels(kappa)
        }
        .expect("random densities are valid");
        for level in 2..6 {
            worst_residual = worst_residual.max(telescoping_identity_residual(&model, level));
        }
    }
    lines.push(CheckLine {
        name: "telescoping identity",
        pass: worst_residual <= 1e-12,
        detail: format!("max residual over 20 fixtures = {worst_residual:.2e}"),
    });

    // Kernels targeting the wrong level's law: the identity must fail.
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    let kappa: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..5).map(|_| rng.gen_range(0.5..2.0)).collect())
        .collect();
    let shifted: Vec<Vec<Vec<f64>>> = (1..kappa.len())
        .map(|l| {
            let target = &kappa[(l + 1).min(kappa.len() - 1)];
            let total: f64 = target.iter().sum();
            vec![target.iter().map(|&v| v / total).collect(); 5]
        })
        .collect();
    let broken = FiniteFkModel::with_kernels(kappa, shifted).expect("valid shapes");
    let broken_residual = telescoping_identity_residual(&broken, 3);
    lines.push(CheckLine {
        name: "non-invariant counterexample",
        pass: broken_residual > 1e-3,
        detail: format!("residual = {broken_residual:.2e}"),
    });

    let mut worst_mass = 0.0_f64;
    for level in 0..levels {
        let mass: f64 = exact_gamma_measure(&fixture, level).iter().sum();
        let truth = fixture.exact_zratio(level);
        worst_mass = worst_mass.max((mass - truth).abs() / truth);
    }
    lines.push(CheckLine {
        name: "measure mass vs density sums",
        pass: worst_mass <= 1e-12,
        detail: format!("max relative gap = {worst_mass:.2e}"),
    });

    let mut worst_recursion = 0.0_f64;
    let mut law = fixture.eta(0);
    for n in 1..levels {
        law = selection_mutation(&fixture, n, &law);
        for (a, b) in law.iter().zip(fixture.eta(n)) {
            worst_recursion = worst_recursion.max((a - b).abs());
        }
    }
    lines.push(CheckLine {
        name: "selection-mutation recursion",
        pass: worst_recursion <= 1e-12,
        detail: format!("max law gap = {worst_recursion:.2e}"),
    });

    lines
}
