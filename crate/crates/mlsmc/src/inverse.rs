//! The built-in Bayesian inverse problem: uniform prior on [-1,1]^K over
//! the coefficient modes, Gaussian point observations of the solution at
//! x = 0.25 and 0.75, and the solution value at x = 0.5 as quantity of
//! interest. Level l observes through the FEM solve on 2^(l + k_offset)
//! elements, so the level densities are a genuine discretization
//! hierarchy of one posterior.
//!
//! All level densities drop the shared prior constant: only ratios and
//! potentials ever matter, and those are unaffected.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_and_solve, point_value, CoefficientField, FemSolution};
use crate::fk::LevelModel;
use crate::rng::{stream, Purpose};

/// Observation noise standard deviation used throughout the benchmark.
pub const NOISE_SD: f64 = 0.25;

/// Where the data lives: two observation points, their values, the noise
/// scale, and the point whose solution value is the quantity of interest.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ObservationSetup {
    pub y: [f64; 2],
    pub noise_sd: f64,
    pub obs_points: [f64; 2],
    pub qoi_point: f64,
}

impl ObservationSetup {
    /// The standard geometry: observations at 0.25 and 0.75, quantity of
    /// interest at 0.5, noise 0.25.
    pub fn standard(y: [f64; 2]) -> Self {
        Self { y, noise_sd: NOISE_SD, obs_points: [0.25, 0.75], qoi_point: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        for x in self.obs_points.iter().chain([&self.qoi_point]) {
            if !(0.0..=1.0).contains(x) {
                return Err(Error::InvalidInput(format!("point {x} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Random-scan Metropolis-within-Gibbs proposal mixture: each step picks
/// `coords_per_step` distinct coordinates and, with probability
/// `independence_weight`, redraws them from the prior; otherwise it
/// applies a Gaussian step of scale `step_sd` reflected into [-1, 1].
/// Both proposals are symmetric against the flat prior, so the accept
/// ratio is the plain density ratio and every level law is invariant.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MutationConfig {
    pub independence_weight: f64,
    pub step_sd: f64,
    pub coords_per_step: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self { independence_weight: 0.5, step_sd: 0.1, coords_per_step: 5 }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.independence_weight) {
            return Err(Error::InvalidInput(format!(
                "independence_weight must be in [0, 1], got {}",
                self.independence_weight
            )));
        }
        if !(self.step_sd > 0.0) || self.coords_per_step == 0 {
            return Err(Error::InvalidInput(
                "step_sd must be positive and coords_per_step at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The level hierarchy. Carries a degrees-of-freedom counter so studies
/// can report how much linear algebra actually ran; the counter is
/// telemetry only and never feeds back into results.
#[derive(Debug)]
pub struct EllipticInverseModel {
    field: CoefficientField,
    obs: ObservationSetup,
    mutation: MutationConfig,
    k_offset: u32,
    max_levels: usize,
    dofs: AtomicU64,
}

impl EllipticInverseModel {
    pub fn new(
        field: CoefficientField,
        obs: ObservationSetup,
        mutation: MutationConfig,
        k_offset: u32,
        max_levels: usize,
    ) -> Result<Self> {
        obs.validate()?;
        mutation.validate()?;
        if k_offset < 1 {
            return Err(Error::InvalidInput("k_offset must be >= 1".into()));
        }
        if max_levels < 2 {
            return Err(Error::InvalidInput("need at least 2 levels".into()));
        }
        Ok(Self { field, obs, mutation, k_offset, max_levels, dofs: AtomicU64::new(0) })
    }

    pub fn observation_setup(&self) -> &ObservationSetup {
        &self.obs
    }

    pub fn k_offset(&self) -> u32 {
        self.k_offset
    }

    /// Mesh size of level l.
    pub fn elements(&self, level: usize) -> usize {
        1usize << (level as u32 + self.k_offset)
    }

    /// Degrees of freedom processed so far (sum of mesh sizes over all
    /// solves done through this model).
    pub fn dofs_processed(&self) -> u64 {
        self.dofs.load(Ordering::Relaxed)
    }

    /// Level-l forward solve, billed to the counter.
    pub fn solve(&self, level: usize, u: &[f64]) -> Result<FemSolution> {
        let elements = self.elements(level);
        self.dofs.fetch_add(elements as u64, Ordering::Relaxed);
        assemble_and_solve(&self.field, u, elements)
    }

    /// ln kappa_l(u): the Gaussian data misfit through the level-l
    /// observation map (prior constant dropped).
    pub fn log_kappa(&self, level: usize, u: &[f64]) -> Result<f64> {
        if level >= self.max_levels {
            return Err(Error::LevelOutOfRange { level, available: self.max_levels });
        }
        let sol = self.solve(level, u)?;
        let mut misfit = 0.0;
        for (&x, &y) in self.obs.obs_points.iter().zip(&self.obs.y) {
            let r = y - point_value(&sol, x)?;
            misfit += r * r;
        }
        Ok(-misfit / (2.0 * self.obs.noise_sd * self.obs.noise_sd))
    }

    /// Quantity of interest at level l: the solution value at qoi_point.
    pub fn qoi(&self, level: usize, u: &[f64]) -> Result<f64> {
        let sol = self.solve(level, u)?;
        point_value(&sol, self.obs.qoi_point)
    }

    /// One invariant MCMC step at level l. Takes and returns the state's
    /// ln kappa_l so chains never re-solve for the incumbent.
    pub fn mcmc_step(
        &self,
        level: usize,
        mut u: Vec<f64>,
        log_kappa: f64,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, f64)> {
        let dim = u.len();
        let m = self.mutation.coords_per_step.min(dim);
        // Partial Fisher-Yates: the first m pool entries are a uniform
        // draw of m distinct coordinates.
        let mut pool: Vec<usize> = (0..dim).collect();
        for j in 0..m {
            let pick = j + rng.gen_range(0..dim - j);
            pool.swap(j, pick);
        }
        let fresh = rng.gen::<f64>() < self.mutation.independence_weight;
        let mut proposal = u.clone();
        for &c in &pool[..m] {
            proposal[c] = if fresh {
                rng.gen_range(-1.0..1.0)
            } else {
                let step: f64 = rng.sample::<f64, _>(StandardNormal) * self.mutation.step_sd;
                reflect_into_unit(proposal[c] + step)
            };
        }
        let proposal_lk = self.log_kappa(level, &proposal)?;
        let accept: f64 = rng.gen();
        if accept.ln() < proposal_lk - log_kappa {
            u = proposal;
            Ok((u, proposal_lk))
        } else {
            Ok((u, log_kappa))
        }
    }
}

/// Fold a real number into [-1, 1] by reflection at the walls; exact for
/// the Gaussian steps used here and keeps the walk kernel symmetric.
fn reflect_into_unit(mut v: f64) -> f64 {
    while !(-1.0..=1.0).contains(&v) {
        if v > 1.0 {
            v = 2.0 - v;
        } else {
            v = -2.0 - v;
        }
    }
    v
}

/// The reproducible synthetic truth: modes alternate -0.5, +0.5, ...
pub fn default_truth(dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| if i % 2 == 0 { -0.5 } else { 0.5 })
        .collect()
}

/// Observations from a chosen truth: solve at `data_level` (finer than
/// anything the samplers will see), read the observation points, add
/// seeded Gaussian noise.
pub fn synthesize_data(
    field: &CoefficientField,
    k_offset: u32,
    truth_u: &[f64],
    data_level: usize,
    noise_seed: u64,
) -> Result<ObservationSetup> {
    let elements = 1usize << (data_level as u32 + k_offset);
    let sol = assemble_and_solve(field, truth_u, elements)?;
    let mut rng = stream(noise_seed, data_level, Purpose::DataNoise);
    let mut y = [0.0; 2];
    let setup_points = [0.25, 0.75];
    for (slot, &x) in y.iter_mut().zip(&setup_points) {
        let noise: f64 = rng.sample(StandardNormal);
        *slot = point_value(&sol, x)? + NOISE_SD * noise;
    }
    Ok(ObservationSetup::standard(y))
}

impl LevelModel for EllipticInverseModel {
    type State = Vec<f64>;

    fn num_levels_available(&self) -> usize {
        self.max_levels
    }

    fn state_dim(&self) -> usize {
        self.field.dim()
    }

    fn log_density(&self, level: usize, state: &Vec<f64>) -> Result<f64> {
        self.log_kappa(level, state)
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.field.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn exact_initial(&self) -> bool {
        false
    }

    fn mutate(
        &self,
        level: usize,
        state: Vec<f64>,
        log_kappa: f64,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, f64)> {
        self.mcmc_step(level, state, log_kappa, rng)
    }

    fn resolution(&self, level: usize) -> f64 {
        2f64.powi(-(level as i32 + self.k_offset as i32))
    }

    fn cost_exponent(&self) -> f64 {
        1.0
    }
}
