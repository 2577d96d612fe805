//! The particle engine: one sequential Monte Carlo pass over the level
//! hierarchy. A run carries N_0 >= ... >= N_{L-1} particles from eta_0
//! up to eta_{L-1}, alternating multinomial selection by the potentials
//! G_p with invariant-kernel mutation, and records the per-level summary
//! statistics every estimator downstream is assembled from.
//!
//! A run is a pure function of (model, sizes, config, seed): it spawns no
//! threads, sums in a fixed order, and draws every random number from a
//! stream addressed by (seed, level, purpose), so records are bit-stable
//! across machines and schedulers.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::fk::LevelModel;
use crate::rng::{stream, Purpose};
use crate::stats;

/// Engine knobs. Defaults match the benchmark setup: 5 invariant sweeps
/// per level, 10x oversampled importance initialization with 10 burn-in
/// sweeps when eta_0 cannot be sampled exactly, next-level potentials on.
#[derive(Clone, Debug)]
pub struct SmcConfig {
    /// Invariant-kernel sweeps applied to each particle after resampling.
    pub mutation_sweeps: usize,
    /// Pool factor for level-0 importance initialization (used only when
    /// the model cannot sample eta_0 directly).
    pub init_oversample: usize,
    /// Burn-in sweeps at level 0 after the importance pool is resampled.
    pub init_sweeps: usize,
    /// Also evaluate G_{p+1} on level-p particles wherever the hierarchy
    /// is deep enough. Costs one extra density evaluation per particle
    /// and is what lets the telescoped estimator reach one level past L.
    pub evaluate_next_potential: bool,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            mutation_sweeps: 5,
            init_oversample: 10,
            init_sweeps: 10,
            evaluate_next_potential: true,
        }
    }
}

/// Empirical level summaries in estimator-ready form. All means are plain
/// averages over the N_p particles alive at level p.
#[derive(Clone, Copy, Debug)]
pub struct LevelSummary {
    pub n: usize,
    /// eta_p^N(G_p).
    pub mean_potential: f64,
    /// eta_p^N(G_p (G_{p+1} - 1)), present when the next-level potential
    /// was evaluated on this level's particles.
    pub mean_potential_next_gap: Option<f64>,
    /// eta_p^N(g).
    pub mean_qoi: f64,
    /// eta_p^N(g G_p).
    pub mean_qoi_potential: f64,
}

/// Everything one run produces. `realized_cost` is the analytic cost
/// sum_p N_p (C_p + C_{p+1} [next potential evaluated at p]) with
/// C_l = cost_weight(l); initialization overhead is deliberately not
/// billed so the number stays comparable across initialization schemes.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub levels: Vec<LevelSummary>,
    pub realized_cost: f64,
    pub seed: u64,
}

impl RunRecord {
    /// Number of particle levels L.
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }
}

/// The live cloud at one level. `log_kappa[i]` caches ln kappa_level at
/// `states[i]` so mutation never re-evaluates the incumbent density.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble<S> {
    pub level: usize,
    pub states: Vec<S>,
    pub log_kappa: Vec<f64>,
    /// ln G_level per particle, filled once the level has been weighted.
    pub log_potentials: Vec<f64>,
    /// ln G_{level+1} per particle, when evaluated.
    pub extra_log_potentials: Option<Vec<f64>>,
}

/// Multinomial selection: draws `target` indices proportional to
/// exp(log_weights). `level` is only for error context. Weights are
/// max-shifted before exponentiation; a pool whose weights all vanish
/// (or any NaN) is reported as degenerate rather than sampled.
pub fn resample_multinomial(
    level: usize,
    log_weights: &[f64],
    target: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<usize>> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if log_weights.is_empty() || !max.is_finite() {
        return Err(Error::DegenerateWeights { level });
    }
    let mut cumulative = Vec::with_capacity(log_weights.len());
    let mut acc = 0.0;
    for &lw in log_weights {
        acc += (lw - max).exp();
        cumulative.push(acc);
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(Error::DegenerateWeights { level });
    }
    let mut out = Vec::with_capacity(target);
    for _ in 0..target {
        let u: f64 = rng.gen::<f64>() * acc;
        let i = cumulative.partition_point(|&c| c <= u);
        out.push(i.min(log_weights.len() - 1));
    }
    Ok(out)
}

fn sweep_ensemble<M: LevelModel + ?Sized>(
    model: &M,
    level: usize,
    states: &mut [M::State],
    log_kappa: &mut [f64],
    sweeps: usize,
    rng: &mut dyn RngCore,
) -> Result<()> {
    for (u, lk) in states.iter_mut().zip(log_kappa.iter_mut()) {
        for _ in 0..sweeps {
            let (next, next_lk) = model.mutate(level, u.clone(), *lk, rng)?;
            *u = next;
            *lk = next_lk;
        }
    }
    Ok(())
}

/// Level-0 ensemble. Exact-init models are sampled directly; otherwise
/// draw a 10x pool from the initial proposal, importance-resample by the
/// level-0 density, and burn in with invariant sweeps.
pub fn initialize_level0<M: LevelModel + ?Sized>(
    model: &M,
    n0: usize,
    cfg: &SmcConfig,
    root: u64,
) -> Result<ParticleEnsemble<M::State>> {
    let mut draw_rng = stream(root, 0, Purpose::InitDraw);
    let pool_size = if model.exact_initial() {
        n0
    } else {
        cfg.init_oversample.max(1) * n0
    };
    let mut pool = Vec::with_capacity(pool_size);
    let mut pool_lk = Vec::with_capacity(pool_size);
    for _ in 0..pool_size {
        let u = model.sample_initial(&mut draw_rng);
        pool_lk.push(model.log_density(0, &u)?);
        pool.push(u);
    }
    let (mut states, mut log_kappa) = if model.exact_initial() {
        (pool, pool_lk)
    } else {
        // The initial proposal is the reference measure, so the level-0
        // density itself is the importance log-weight.
        let mut res_rng = stream(root, 0, Purpose::InitResample);
        let idx = resample_multinomial(0, &pool_lk, n0, &mut res_rng)?;
        let states: Vec<M::State> = idx.iter().map(|&i| pool[i].clone()).collect();
        let log_kappa: Vec<f64> = idx.iter().map(|&i| pool_lk[i]).collect();
        (states, log_kappa)
    };
    if !model.exact_initial() {
        let mut mut_rng = stream(root, 0, Purpose::InitMutate);
        sweep_ensemble(model, 0, &mut states, &mut log_kappa, cfg.init_sweeps, &mut mut_rng)?;
    }
    Ok(ParticleEnsemble {
        level: 0,
        states,
        log_kappa,
        log_potentials: Vec::new(),
        extra_log_potentials: None,
    })
}

/// Run the sampler with `sizes[p]` particles at level p and record the
/// per-level summaries of the quantity of interest `qoi(level, state)`.
///
/// `sizes` must be non-increasing and the hierarchy must expose density
/// level `sizes.len()` so the top potential G_{L-1} is computable.
pub fn run_mlsmc<M, G>(
    model: &M,
    sizes: &[usize],
    qoi: G,
    cfg: &SmcConfig,
    seed: u64,
) -> Result<RunRecord>
where
    M: LevelModel + ?Sized,
    G: Fn(usize, &M::State) -> f64,
{
    if sizes.is_empty() {
        return Err(Error::InvalidPlan("no particle levels requested".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidPlan("particle counts must be positive".into()));
    }
    if sizes.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidPlan(format!(
            "particle counts must be non-increasing, got {sizes:?}"
        )));
    }
    let available = model.num_levels_available();
    if sizes.len() + 1 > available {
        return Err(Error::LevelCapExceeded {
            requested: sizes.len(),
            cap: available.saturating_sub(1),
        });
    }

    let mut ensemble = initialize_level0(model, sizes[0], cfg, seed)?;
    let mut levels = Vec::with_capacity(sizes.len());
    let mut realized_cost = 0.0;

    for p in 0..sizes.len() {
        let n = ensemble.states.len();
        debug_assert_eq!(n, sizes[p]);

        // Weight the level: one density evaluation at p+1 per particle,
        // reusing the tracked ln kappa_p.
        let mut log_kappa_next = Vec::with_capacity(n);
        let mut log_pots = Vec::with_capacity(n);
        for (u, &lk) in ensemble.states.iter().zip(&ensemble.log_kappa) {
            let lk_next = model.log_density(p + 1, u)?;
            let lg = lk_next - lk;
            if lg.is_nan() {
                return Err(Error::NonFiniteLogDensity { level: p + 1 });
            }
            log_kappa_next.push(lk_next);
            log_pots.push(lg);
        }

        let want_extra = cfg.evaluate_next_potential && p + 2 < available;
        let extra_log_pots = if want_extra {
            let mut extras = Vec::with_capacity(n);
            for (u, &lk_next) in ensemble.states.iter().zip(&log_kappa_next) {
                let lg = model.log_density(p + 2, u)? - lk_next;
                if lg.is_nan() {
                    return Err(Error::NonFiniteLogDensity { level: p + 2 });
                }
                extras.push(lg);
            }
            Some(extras)
        } else {
            None
        };

        let pots: Vec<f64> = log_pots.iter().map(|&lg| lg.exp()).collect();
        let mean_potential = stats::mean(&pots);
        if !mean_potential.is_finite() || !(mean_potential > 0.0) {
            return Err(Error::DegenerateWeights { level: p });
        }
        let mean_potential_next_gap = extra_log_pots.as_ref().map(|extras| {
            let gaps: Vec<f64> = pots
                .iter()
                .zip(extras)
                .map(|(&g, &elg)| g * (elg.exp() - 1.0))
                .collect();
            stats::mean(&gaps)
        });
        let qois: Vec<f64> = ensemble
            .states
            .iter()
            .map(|u| qoi(p, u))
            .collect();
        let weighted_qois: Vec<f64> = qois.iter().zip(&pots).map(|(&q, &g)| q * g).collect();
        levels.push(LevelSummary {
            n,
            mean_potential,
            mean_potential_next_gap,
            mean_qoi: stats::mean(&qois),
            mean_qoi_potential: stats::mean(&weighted_qois),
        });

        realized_cost += n as f64
            * (model.cost_weight(p) + if want_extra { model.cost_weight(p + 1) } else { 0.0 });

        ensemble.log_potentials = log_pots;
        ensemble.extra_log_potentials = extra_log_pots;

        // Select-and-mutate into level p+1.
        if p + 1 < sizes.len() {
            let mut res_rng = stream(seed, p, Purpose::Resample);
            let idx =
                resample_multinomial(p, &ensemble.log_potentials, sizes[p + 1], &mut res_rng)?;
            let mut states: Vec<M::State> =
                idx.iter().map(|&i| ensemble.states[i].clone()).collect();
            let mut log_kappa: Vec<f64> = idx.iter().map(|&i| log_kappa_next[i]).collect();
            let mut mut_rng = stream(seed, p + 1, Purpose::Mutate);
            sweep_ensemble(
                model,
                p + 1,
                &mut states,
                &mut log_kappa,
                cfg.mutation_sweeps,
                &mut mut_rng,
            )?;
            ensemble = ParticleEnsemble {
                level: p + 1,
                states,
                log_kappa,
                log_potentials: Vec::new(),
                extra_log_potentials: None,
            };
        }
    }

    Ok(RunRecord { levels, realized_cost, seed })
}
