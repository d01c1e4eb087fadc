//! Particle approximation of the belief over unknown source parameters and
//! the standard-deviation cessation test.
//!
//! Particles only vary along the estimated dimensions; every other source
//! parameter is copied from the scenario. Weights are kept normalized after
//! every public operation, while the per-observation reweighting itself is
//! done in log space with max-subtraction so long histories never underflow.
//!
//! Every particle also caches the log-likelihood of the whole observation
//! history, which makes the Metropolis–Hastings move after resampling cost
//! one history pass per proposal rather than two.

mod resample;
mod summary;

pub use resample::systematic_indices;
pub use summary::BeliefSnapshot;
pub(crate) use summary::position_trace;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Observation, Param, Plume, Position, SourceTerm};
use crate::error::{config_err, Result};
use crate::scalar::{uniform_in, Scalar};

/// Log of the smallest total unnormalized mass accepted by an update
/// (`ln 1e-300`). Anything below is a degeneracy event.
const LN_MIN_MASS: f64 = -690.775_527_898_213_7;

/// Unknown parameter together with its uniform prior range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange<T> {
    pub param: Param,
    pub min: T,
    pub max: T,
}

impl<T: Scalar> ParamRange<T> {
    pub fn new(param: Param, min: T, max: T) -> Self {
        Self { param, min, max }
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefConfig<T> {
    pub n_particles: usize,
    /// Resampling fires when the effective sample size drops below
    /// `resample_fraction * n_particles`.
    pub resample_fraction: T,
    /// Cessation threshold ζ, meters.
    pub cessation_threshold: T,
    /// Estimated dimensions with their prior boxes, in reporting order.
    pub estimated: Vec<ParamRange<T>>,
    pub mcmc_move: bool,
    /// Random-walk proposal std as a fraction of the current posterior STD.
    pub mcmc_scale: T,
}

impl<T: Scalar> BeliefConfig<T> {
    /// Source position unknown and uniform over `bounds`; all defaults.
    pub fn position_only(bounds: &crate::env::Bounds<T>, n_particles: usize, cessation_threshold: T) -> Self {
        Self {
            n_particles,
            resample_fraction: T::lit(0.5),
            cessation_threshold,
            estimated: vec![
                ParamRange::new(Param::X, bounds.min.x, bounds.max.x),
                ParamRange::new(Param::Y, bounds.min.y, bounds.max.y),
            ],
            mcmc_move: true,
            mcmc_scale: T::lit(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return config_err("n_particles must be at least 2");
        }
        if !(self.resample_fraction > T::zero() && self.resample_fraction <= T::one()) {
            return config_err("resample_fraction must lie in (0, 1]");
        }
        if !(self.cessation_threshold > T::zero()) {
            return config_err("cessation_threshold must be positive");
        }
        if self.estimated.is_empty() {
            return config_err("at least one dimension must be estimated");
        }
        for (i, r) in self.estimated.iter().enumerate() {
            if !(r.min < r.max) || !r.min.is_finite() || !r.max.is_finite() {
                return config_err(format!("prior range for {:?} has zero volume", r.param));
            }
            if self.estimated[..i].iter().any(|o| o.param == r.param) {
                return config_err(format!("{:?} listed twice in estimated dimensions", r.param));
            }
        }
        if !(self.mcmc_scale >= T::zero()) {
            return config_err("mcmc_scale must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle<T> {
    pub theta: SourceTerm<T>,
    pub weight: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Belief<T> {
    particles: Vec<Particle<T>>,
    history: Vec<Observation<T>>,
    estimated: Vec<ParamRange<T>>,
    /// Σ over `history` of each particle's log-likelihood.
    history_loglik: Vec<T>,
    degeneracy_events: u64,
    resample_events: u64,
}

/// Gaussian log-density of `c` under mean `m` with the sensor noise model.
#[inline]
pub(crate) fn log_density<T: Scalar>(c: T, m: T, env: &EnvConfig<T>) -> T {
    let sigma = env.noise_std(m);
    let z = (c - m - env.noise_mean) / sigma;
    -T::lit(0.5) * z * z - sigma.ln() - T::lit(0.918_938_533_204_672_7)
}

/// Log of [`likelihood`].
#[inline]
pub fn log_likelihood<T: Scalar>(obs: &Observation<T>, theta: &SourceTerm<T>, env: &EnvConfig<T>) -> T {
    let m = Plume::new(theta).mean_at_guarded(&obs.position);
    log_density(obs.concentration, m, env)
}

/// Density of the observed concentration under hypothesis `theta`.
///
/// Evaluates an unclamped Gaussian even though readings are clamped at zero.
pub fn likelihood<T: Scalar>(obs: &Observation<T>, theta: &SourceTerm<T>, env: &EnvConfig<T>) -> T {
    log_likelihood(obs, theta, env).exp()
}

/// Σ of log-likelihoods of `history` under `plume`.
fn history_loglik<T: Scalar>(plume: &Plume<T>, history: &[Observation<T>], env: &EnvConfig<T>) -> T {
    history
        .iter()
        .map(|o| log_density(o.concentration, plume.mean_at_guarded(&o.position), env))
        .sum()
}

impl<T: Scalar> Belief<T> {
    /// Draws `n_particles` hypotheses uniformly from the prior box; all
    /// non-estimated parameters come from `known`.
    pub fn init_prior<R: Rng + ?Sized>(cfg: &BeliefConfig<T>, known: &SourceTerm<T>, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_particles;
        let w = T::from_usize_lossy(n).recip();
        let particles = (0..n)
            .map(|_| {
                let mut theta = *known;
                for r in &cfg.estimated {
                    theta.set(r.param, uniform_in(rng, r.min, r.max));
                }
                Particle { theta, weight: w }
            })
            .collect();
        Ok(Self {
            particles,
            history: Vec::new(),
            estimated: cfg.estimated.clone(),
            history_loglik: vec![T::zero(); n],
            degeneracy_events: 0,
            resample_events: 0,
        })
    }

    /// Belief over an explicit hypothesis set. Weights are normalized here.
    pub fn from_particles(particles: Vec<Particle<T>>, estimated: Vec<ParamRange<T>>) -> Result<Self> {
        if particles.is_empty() {
            return config_err("a belief needs at least one particle");
        }
        if particles.iter().any(|p| !(p.weight >= T::zero()) || !p.weight.is_finite()) {
            return config_err("particle weights must be finite and non-negative");
        }
        let total: T = particles.iter().map(|p| p.weight).sum();
        if !(total > T::zero()) {
            return config_err("particle weights sum to zero");
        }
        let n = particles.len();
        let mut belief = Self {
            particles,
            history: Vec::new(),
            estimated,
            history_loglik: vec![T::zero(); n],
            degeneracy_events: 0,
            resample_events: 0,
        };
        for p in &mut belief.particles {
            p.weight = p.weight / total;
        }
        Ok(belief)
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn history(&self) -> &[Observation<T>] {
        &self.history
    }

    pub fn estimated(&self) -> &[ParamRange<T>] {
        &self.estimated
    }

    pub fn degeneracy_events(&self) -> u64 {
        self.degeneracy_events
    }

    pub fn resample_events(&self) -> u64 {
        self.resample_events
    }

    pub fn weights(&self) -> impl Iterator<Item = T> + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    /// Bayes reweighting with `obs`, then resampling if the effective sample
    /// size fell below `resample_fraction * N`.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        obs: Observation<T>,
        cfg: &BeliefConfig<T>,
        env: &EnvConfig<T>,
        rng: &mut R,
    ) -> Result<()> {
        self.reweight(obs, env);
        let threshold = cfg.resample_fraction * T::from_usize_lossy(self.len());
        if self.effective_sample_size() < threshold {
            self.resample(cfg, env, rng)?;
        }
        Ok(())
    }

    /// Weight update and normalization only; never resamples.
    pub fn reweight(&mut self, obs: Observation<T>, env: &EnvConfig<T>) {
        let mut log_w: Vec<T> = Vec::with_capacity(self.len());
        for (p, cached) in self.particles.iter().zip(self.history_loglik.iter_mut()) {
            let ll = log_likelihood(&obs, &p.theta, env);
            *cached = *cached + ll;
            log_w.push(p.weight.ln() + ll);
        }
        self.history.push(obs);
        if !self.normalize_log_weights(&log_w) {
            self.degeneracy_events += 1;
            self.reset_uniform();
        }
    }

    /// Sets weights proportional to `exp(log_w)`. Returns false (leaving the
    /// weights untouched) when the total mass is below 1e-300 or undefined.
    fn normalize_log_weights(&mut self, log_w: &[T]) -> bool {
        let max = log_w.iter().copied().fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return false;
        }
        let scaled: Vec<T> = log_w.iter().map(|&l| (l - max).exp()).collect();
        let sum: T = scaled.iter().copied().sum();
        let log_total = max + sum.ln();
        if !(log_total >= T::lit(LN_MIN_MASS)) {
            return false;
        }
        for (p, s) in self.particles.iter_mut().zip(scaled) {
            p.weight = s / sum;
        }
        true
    }

    fn reset_uniform(&mut self) {
        let w = T::from_usize_lossy(self.len()).recip();
        for p in &mut self.particles {
            p.weight = w;
        }
    }

    /// `1 / Σ w²`.
    pub fn effective_sample_size(&self) -> T {
        let s: T = self.particles.iter().map(|p| p.weight * p.weight).sum();
        s.recip()
    }

    /// Observed history and cached likelihoods are needed by the move step;
    /// exposed for the resampling module.
    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut Vec<Particle<T>>, &mut Vec<T>, &[Observation<T>], &[ParamRange<T>]) {
        (&mut self.particles, &mut self.history_loglik, &self.history, &self.estimated)
    }

    /// Predicted mean concentration at `p` for every particle, in particle
    /// order.
    pub fn predicted_means(&self, p: &Position<T>) -> Vec<T> {
        self.particles
            .iter()
            .map(|part| Plume::new(&part.theta).mean_at_guarded(p))
            .collect()
    }

    /// Recomputes the cached history log-likelihood of a particle from
    /// scratch. Test hook for the incremental cache.
    pub fn recompute_history_loglik(&self, i: usize, env: &EnvConfig<T>) -> T {
        history_loglik(&Plume::new(&self.particles[i].theta), &self.history, env)
    }

    pub fn cached_history_loglik(&self, i: usize) -> T {
        self.history_loglik[i]
    }
}
