//! The level-model abstraction: a hierarchy of unnormalized densities
//! kappa_0, kappa_1, ... over a common state space, together with the
//! MCMC mutation kernels that leave each normalized level invariant.
//!
//! Everything downstream (the particle engine, the estimators, the cost
//! accounting) talks to a hierarchy only through this trait.

use rand::RngCore;

use crate::error::Result;

/// A discretization hierarchy with one unnormalized density per level.
///
/// Level l's normalized law is eta_l = kappa_l / Z_l. The potential that
/// reweights level l particles toward level l+1 is the density ratio
/// G_l(u) = kappa_{l+1}(u) / kappa_l(u), evaluated through
/// [`log_potential`]. `mutate` must apply a kernel that is exactly
/// eta_level-invariant; the telescoped estimator's unbiasedness depends
/// on that, not just on asymptotics.
pub trait LevelModel {
    type State: Clone + Send + Sync;

    /// Number of levels with a usable density, i.e. `log_density` accepts
    /// levels `0..num_levels_available()`.
    fn num_levels_available(&self) -> usize;

    /// Dimension of the latent state (1 for a finite state space).
    fn state_dim(&self) -> usize;

    /// ln kappa_level(state).
    fn log_density(&self, level: usize, state: &Self::State) -> Result<f64>;

    /// Draw from the level-0 proposal. When `exact_initial` is true this
    /// is eta_0 itself and the engine skips the initialization burn-in.
    fn sample_initial(&self, rng: &mut dyn RngCore) -> Self::State;

    fn exact_initial(&self) -> bool;

    /// One eta_level-invariant MCMC sweep from `state`. Takes the current
    /// ln kappa_level(state) and returns the new state with its new
    /// ln kappa_level, so implementations can accept/reject without
    /// re-evaluating the density of the incumbent.
    fn mutate(
        &self,
        level: usize,
        state: Self::State,
        log_kappa: f64,
        rng: &mut dyn RngCore,
    ) -> Result<(Self::State, f64)>;

    /// Resolution parameter h_l of level l (mesh width for PDE hierarchies).
    fn resolution(&self, level: usize) -> f64;

    /// Cost exponent zeta: one density evaluation at level l is billed
    /// h_l^{-zeta} work units.
    fn cost_exponent(&self) -> f64;

    fn cost_weight(&self, level: usize) -> f64 {
        self.resolution(level).powf(-self.cost_exponent())
    }
}

/// ln G_l(state) = ln kappa_{l+1}(state) - ln kappa_l(state).
pub fn log_potential<M: LevelModel + ?Sized>(
    model: &M,
    level: usize,
    state: &M::State,
) -> Result<f64> {
    Ok(model.log_density(level + 1, state)? - model.log_density(level, state)?)
}

/// G_l(state) on the linear scale.
pub fn potential<M: LevelModel + ?Sized>(model: &M, level: usize, state: &M::State) -> Result<f64> {
    Ok(log_potential(model, level, state)?.exp())
}
