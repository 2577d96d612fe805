//! Finite-state hierarchies with exactly computable distributions.
//!
//! On a state space of n points every quantity the particle machinery
//! targets (normalized laws, Z-ratios, unnormalized level measures,
//! semigroup actions) reduces to small dense linear algebra. That gives
//! closed-form ground truth for statistical tests of the engine and the
//! estimators, and an exact check of the telescoping identity behind the
//! alternative normalizing-constant estimator.

use rand::Rng;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::fk::LevelModel;

/// Hard cap on the state-space size; everything here is O(n^2) per level
/// and meant for test fixtures, not production inference.
pub const MAX_STATES: usize = 64;

/// A hierarchy of unnormalized densities on `{0, .., n-1}` with one
/// explicit mutation kernel per level >= 1. Kernel `kernels[l-1]` is used
/// when mutating at level l and must be a row-stochastic n x n matrix.
#[derive(Clone, Debug)]
pub struct FiniteFkModel {
    kappa: Vec<Vec<f64>>,
    kernels: Vec<Vec<Vec<f64>>>,
    mesh_widths: Vec<f64>,
    cost_zeta: f64,
}

impl FiniteFkModel {
    /// Build from raw densities and kernels. Validates shapes, positivity
    /// of the densities, and row-stochasticity of each kernel. Does not
    /// check invariance; the oracle tests do that explicitly.
    pub fn with_kernels(kappa: Vec<Vec<f64>>, kernels: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if kappa.len() < 2 {
            return Err(Error::InvalidInput("need at least two levels".into()));
        }
        let n = kappa[0].len();
        if n == 0 || n > MAX_STATES {
            return Err(Error::InvalidInput(format!(
                "state count {n} outside 1..={MAX_STATES}"
            )));
        }
        for (l, row) in kappa.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "density at level {l} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::NonFiniteLogDensity { level: l });
            }
        }
        if kernels.len() != kappa.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "{} kernels for {} levels; need one per level >= 1",
                kernels.len(),
                kappa.len()
            )));
        }
        for (l, kernel) in kernels.iter().enumerate() {
            validate_stochastic(kernel, n).map_err(|e| {
                Error::InvalidInput(format!("kernel for level {}: {e}", l + 1))
            })?;
        }
        let mesh_widths = (0..kappa.len()).map(|l| 0.5_f64.powi(l as i32 + 1)).collect();
        Ok(Self { kappa, kernels, mesh_widths, cost_zeta: 1.0 })
    }

    /// Kernels that draw fresh from the invariant law: every row of the
    /// level-l kernel is eta_l. Invariance is exact by construction and
    /// the chain mixes in one step, which makes fixture variance tiny.
    pub fn with_independence_kernels(kappa: Vec<Vec<f64>>) -> Result<Self> {
        let etas: Vec<Vec<f64>> = kappa.iter().map(|row| normalize(row)).collect();
        let kernels = etas[1..]
            .iter()
            .map(|eta| vec![eta.clone(); eta.len()])
            .collect();
        Self::with_kernels(kappa, kernels)
    }

    /// Metropolis kernels with a uniform proposal on the whole state
    /// space: off-diagonal M_l(u, v) = (1/n) min(1, kappa_l(v)/kappa_l(u)),
    /// diagonal takes the leftover mass. Exactly eta_l-reversible, so
    /// exactly invariant, but mixes slower than the independence version.
    pub fn with_metropolis_kernels(kappa: Vec<Vec<f64>>) -> Result<Self> {
        let n = kappa.first().map_or(0, |r| r.len());
        let kernels = kappa[1..]
            .iter()
            .map(|row| {
                let mut kernel = vec![vec![0.0; n]; n];
                for u in 0..n {
                    let mut stay = 0.0;
                    for v in 0..n {
                        if v == u {
                            continue;
                        }
                        let accept = (row[v] / row[u]).min(1.0);
                        kernel[u][v] = accept / n as f64;
                        stay += (1.0 - accept) / n as f64;
                    }
                    // Self-proposal always accepts; fold it into the diagonal.
                    kernel[u][u] = stay + 1.0 / n as f64;
                }
                kernel
            })
            .collect();
        Self::with_kernels(kappa, kernels)
    }

    /// The fixed 5-state, 5-density fixture used by the statistical
    /// regression tests: gently drifting densities with ratios inside
    /// [1/2, 2] and exactly invariant Metropolis kernels. Z_4 / Z_0 = 1.36.
    pub fn benchmark_fixture() -> Self {
        let kappa = vec![
            vec![1.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.8, 1.1, 1.3, 0.9, 1.2],
            vec![0.7, 1.3, 1.5, 0.8, 1.4],
            vec![0.6, 1.4, 1.8, 0.7, 1.6],
            vec![0.5, 1.6, 2.2, 0.6, 1.9],
        ];
        Self::with_metropolis_kernels(kappa).expect("fixture densities are valid")
    }

    /// Override the default dyadic resolutions h_l = 2^{-(l+1)}.
    pub fn set_mesh_widths(&mut self, widths: Vec<f64>) -> Result<()> {
        if widths.len() != self.kappa.len() {
            return Err(Error::InvalidInput("one mesh width per level".into()));
        }
        if widths.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidInput("mesh widths must be positive".into()));
        }
        self.mesh_widths = widths;
        Ok(())
    }

    /// Override the cost exponent zeta (cost per level is h_l^{-zeta}).
    pub fn set_cost_zeta(&mut self, zeta: f64) -> Result<()> {
        if !(zeta >= 0.0) || !zeta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "cost exponent must be finite and non-negative, got {zeta}"
            )));
        }
        self.cost_zeta = zeta;
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.kappa[0].len()
    }

    pub fn kernel(&self, level: usize) -> &[Vec<f64>] {
        &self.kernels[level - 1]
    }

    /// Normalized law eta_l.
    pub fn eta(&self, level: usize) -> Vec<f64> {
        normalize(&self.kappa[level])
    }

    /// G_l evaluated at every state.
    pub fn potential_vector(&self, level: usize) -> Vec<f64> {
        self.kappa[level + 1]
            .iter()
            .zip(&self.kappa[level])
            .map(|(&num, &den)| num / den)
            .collect()
    }

    /// Exact Z_l / Z_0 (ratio of density sums; the reference measure is
    /// counting measure, so sums are the normalizing constants).
    pub fn exact_zratio(&self, level: usize) -> f64 {
        let z0: f64 = self.kappa[0].iter().sum();
        let zl: f64 = self.kappa[level].iter().sum();
        zl / z0
    }
}

fn normalize(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter().map(|&v| v / total).collect()
}

fn validate_stochastic(kernel: &[Vec<f64>], n: usize) -> std::result::Result<(), String> {
    if kernel.len() != n {
        return Err(format!("{} rows, expected {n}", kernel.len()));
    }
    for (i, row) in kernel.iter().enumerate() {
        if row.len() != n {
            return Err(format!("row {i} has {} entries, expected {n}", row.len()));
        }
        if row.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(format!("row {i} has entries outside [0, 1]"));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("row {i} sums to {sum}, expected 1"));
        }
    }
    Ok(())
}

impl LevelModel for FiniteFkModel {
    type State = usize;

    fn num_levels_available(&self) -> usize {
        self.kappa.len()
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn log_density(&self, level: usize, state: &usize) -> Result<f64> {
        let row = self.kappa.get(level).ok_or(Error::LevelOutOfRange {
            level,
            available: self.kappa.len(),
        })?;
        Ok(row[*state].ln())
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> usize {
        sample_categorical(&self.eta(0), rng)
    }

    fn exact_initial(&self) -> bool {
        true
    }

    fn mutate(
        &self,
        level: usize,
        state: usize,
        _log_kappa: f64,
        rng: &mut dyn RngCore,
    ) -> Result<(usize, f64)> {
        let kernel = self.kernels.get(level - 1).ok_or(Error::LevelOutOfRange {
            level,
            available: self.kappa.len(),
        })?;
        let next = sample_categorical(&kernel[state], rng);
        Ok((next, self.kappa[level][next].ln()))
    }

    fn resolution(&self, level: usize) -> f64 {
        self.mesh_widths[level]
    }

    fn cost_exponent(&self) -> f64 {
        self.cost_zeta
    }
}

fn sample_categorical(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Unnormalized level-l measure gamma_l as a row vector:
/// gamma_0 = eta_0, then gamma_{p+1} = (gamma_p . G_p) K_{p+1}.
/// Its total mass is Z_l / Z_0.
pub fn exact_gamma_measure(model: &FiniteFkModel, level: usize) -> Vec<f64> {
    let mut gamma = model.eta(0);
    for p in 0..level {
        let g = model.potential_vector(p);
        let weighted: Vec<f64> = gamma.iter().zip(&g).map(|(&m, &w)| m * w).collect();
        gamma = row_times_matrix(&weighted, model.kernel(p + 1));
    }
    gamma
}

fn row_times_matrix(row: &[f64], matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = row.len();
    let mut out = vec![0.0; n];
    for (i, &r) in row.iter().enumerate() {
        for j in 0..n {
            out[j] += r * matrix[i][j];
        }
    }
    out
}

fn matrix_times_column(matrix: &[Vec<f64>], col: &[f64]) -> Vec<f64> {
    matrix
        .iter()
        .map(|row| row.iter().zip(col).map(|(&m, &c)| m * c).sum())
        .collect()
}

/// Semigroup action (Q_{p+1} .. Q_n f)(u) where Q_k f = G_{k-1} . (K_k f),
/// applied right to left. With n == p this is the identity.
pub fn semigroup_apply(model: &FiniteFkModel, p: usize, n: usize, f: &[f64]) -> Vec<f64> {
    let mut out = f.to_vec();
    for k in (p + 1..=n).rev() {
        let propagated = matrix_times_column(model.kernel(k), &out);
        let g = model.potential_vector(k - 1);
        out = g.iter().zip(&propagated).map(|(&gv, &pv)| gv * pv).collect();
    }
    out
}

/// One exact selection-mutation step on a normalized law:
/// Phi_{n}(mu) = (mu . G_{n-1}) K_n / mu(G_{n-1}).
pub fn selection_mutation(model: &FiniteFkModel, n: usize, mu: &[f64]) -> Vec<f64> {
    let g = model.potential_vector(n - 1);
    let mass: f64 = mu.iter().zip(&g).map(|(&m, &w)| m * w).sum();
    let weighted: Vec<f64> = mu.iter().zip(&g).map(|(&m, &w)| m * w / mass).collect();
    row_times_matrix(&weighted, model.kernel(n))
}

/// Expectation of G_l under an explicit law.
pub fn expect_potential(model: &FiniteFkModel, level: usize, law: &[f64]) -> f64 {
    law.iter()
        .zip(&model.potential_vector(level))
        .map(|(&m, &g)| m * g)
        .sum()
}

/// Relative residual of the telescoping decomposition of gamma_l(1),
/// computed entirely from exact laws:
///
///   gamma_l(1) = eta_0(G_0)
///              + sum_{p=2}^{l} gamma_{p-2}(G_{p-2} (G_{p-1} - 1))
///
/// where the p-th correction is evaluated against the exact unnormalized
/// measure gamma_{p-2}. Zero (to rounding) iff every kernel K_k with
/// k <= l - 1 preserves its level law, which is the structural condition
/// the alternative estimator needs.
pub fn telescoping_identity_residual(model: &FiniteFkModel, level: usize) -> f64 {
    let direct = exact_gamma_measure(model, level).iter().sum::<f64>();
    let mut tele = expect_potential(model, 0, &model.eta(0));
    for p in 2..=level {
        let gamma = exact_gamma_measure(model, p - 2);
        let g_prev = model.potential_vector(p - 2);
        let g_last = model.potential_vector(p - 1);
        let correction: f64 = gamma
            .iter()
            .zip(g_prev.iter().zip(&g_last))
            .map(|(&m, (&gp, &gl))| m * gp * (gl - 1.0))
            .sum();
        tele += correction;
    }
    (tele - direct).abs() / direct.abs()
}

/// Uniform minorization coefficient of a kernel: the largest epsilon with
/// K(u, .) >= epsilon nu(.) for some probability nu. Computed as the sum
/// over columns of the smallest entry in each column.
pub fn minorization_coefficient(kernel: &[Vec<f64>]) -> f64 {
    let n = kernel.len();
    (0..n)
        .map(|j| {
            kernel
                .iter()
                .map(|row| row[j])
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}
