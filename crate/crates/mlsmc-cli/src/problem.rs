//! One handle over the two benchmark problems so the study code never
//! branches on state types: the elliptic inverse problem and finite-state
//! fixtures loaded from disk.

use anyhow::{bail, Context, Result};

use mlsmc::engine::{run_mlsmc, RunRecord, SmcConfig};
use mlsmc::fem::CoefficientField;
use mlsmc::fk::LevelModel;
use mlsmc::inverse::{default_truth, synthesize_data, EllipticInverseModel, MutationConfig};
use mlsmc::oracle::FiniteFkModel;

use crate::config::{KernelKind, LoadedConfig, ProblemKind};

pub enum Problem {
    Elliptic(EllipticInverseModel),
    Finite(FiniteFkModel),
}

impl Problem {
    /// Build the problem with density levels 0..required_levels-1
    /// available. Finite fixtures have fixed depth; a request deeper than
    /// the fixture is an error so studies fail before sampling starts.
    pub fn from_config(loaded: &LoadedConfig, required_levels: usize) -> Result<Problem> {
        let problem = &loaded.config.problem;
        match problem.kind {
            ProblemKind::Elliptic => {
                let field = CoefficientField::benchmark();
                let truth = default_truth(field.dim());
                let obs = synthesize_data(
                    &field,
                    loaded.config.rates.k_offset,
                    &truth,
                    problem.data_level,
                    problem.noise_seed,
                )?;
                let model = EllipticInverseModel::new(
                    field,
                    obs,
                    MutationConfig::default(),
                    loaded.config.rates.k_offset,
                    required_levels,
                )?;
                Ok(Problem::Elliptic(model))
            }
            ProblemKind::FiniteOracle => {
                let rel = problem
                    .fixture
                    .as_ref()
                    .context("finite-oracle problem without fixture path")?;
                let path = loaded.dir.join(rel);
                let spec = crate::config::FixtureSpec::load(&path)?;
                let mut model = match spec.kernels {
                    KernelKind::Independence => {
                        FiniteFkModel::with_independence_kernels(spec.kappa)?
                    }
                    KernelKind::Metropolis => FiniteFkModel::with_metropolis_kernels(spec.kappa)?,
                };
                if let Some(widths) = spec.mesh_widths {
                    model.set_mesh_widths(widths)?;
                }
                if let Some(zeta) = spec.cost_zeta {
                    model.set_cost_zeta(zeta)?;
                }
                if model.num_levels_available() < required_levels {
                    bail!(
                        "fixture {} has {} density levels, the study needs {}",
                        path.display(),
                        model.num_levels_available(),
                        required_levels
                    );
                }
                Ok(Problem::Finite(model))
            }
        }
    }

    pub fn levels_available(&self) -> usize {
        match self {
            Problem::Elliptic(m) => m.num_levels_available(),
            Problem::Finite(m) => m.num_levels_available(),
        }
    }

    pub fn resolution(&self, level: usize) -> f64 {
        match self {
            Problem::Elliptic(m) => m.resolution(level),
            Problem::Finite(m) => m.resolution(level),
        }
    }

    pub fn cost_weight(&self, level: usize) -> f64 {
        match self {
            Problem::Elliptic(m) => m.cost_weight(level),
            Problem::Finite(m) => m.cost_weight(level),
        }
    }

    /// Exact target ratio when the problem admits enumeration.
    pub fn exact_truth(&self, level: usize) -> Option<f64> {
        match self {
            Problem::Elliptic(_) => None,
            Problem::Finite(m) => Some(m.exact_zratio(level)),
        }
    }

    /// One engine pass. The studies only consume normalizing-constant
    /// ratios, so the quantity of interest is a constant and costs no
    /// extra forward solves.
    pub fn run(&self, sizes: &[usize], cfg: &SmcConfig, seed: u64) -> mlsmc::Result<RunRecord> {
        match self {
            Problem::Elliptic(m) => run_mlsmc(m, sizes, |_, _: &Vec<f64>| 0.0, cfg, seed),
            Problem::Finite(m) => run_mlsmc(m, sizes, |_, _: &usize| 0.0, cfg, seed),
        }
    }
}
