use rand::Rng;

use super::{history_loglik, Belief, BeliefConfig, Particle};
use crate::env::{EnvConfig, Plume};
use crate::error::Result;
use crate::scalar::Scalar;

/// Systematic resampling: one uniform offset `u ~ U[0, 1/N)` and the N
/// evenly spaced positions `u + j/N` mapped through the cumulative weights.
///
/// Consumes exactly one `unit_uniform` draw from `rng`.
pub fn systematic_indices<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let step = T::from_usize_lossy(n).recip();
    let offset = T::unit_uniform(rng) * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for j in 0..n {
        let target = offset + T::from_usize_lossy(j) * step;
        while target >= cumulative && i + 1 < n {
            i += 1;
            cumulative = cumulative + weights[i];
        }
        out.push(i);
    }
    out
}

impl<T: Scalar> Belief<T> {
    /// Systematic resampling to N equally weighted particles, followed (when
    /// enabled) by one full-history Metropolis–Hastings move per particle.
    pub fn resample<R: Rng + ?Sized>(&mut self, cfg: &BeliefConfig<T>, env: &EnvConfig<T>, rng: &mut R) -> Result<()> {
        let proposal_std: Vec<T> = self.posterior_std().into_iter().map(|s| s * cfg.mcmc_scale).collect();
        let weights: Vec<T> = self.weights().collect();
        let indices = systematic_indices(&weights, rng);
        let n = indices.len();
        let w = T::from_usize_lossy(n).recip();
        self.resample_events += 1;

        let (particles, cache, history, ranges) = self.parts_mut();
        let old_particles = std::mem::take(particles);
        let old_cache = std::mem::take(cache);
        *particles = indices
            .iter()
            .map(|&i| Particle {
                theta: old_particles[i].theta,
                weight: w,
            })
            .collect();
        *cache = indices.iter().map(|&i| old_cache[i]).collect();

        if !cfg.mcmc_move || history.is_empty() {
            return Ok(());
        }
        for (p, ll) in particles.iter_mut().zip(cache.iter_mut()) {
            let mut proposal = p.theta;
            let mut inside = true;
            for (r, s) in ranges.iter().zip(&proposal_std) {
                let v = p.theta.get(r.param) + *s * T::standard_normal(rng);
                inside &= r.contains(v);
                proposal.set(r.param, v);
            }
            let log_u = T::unit_uniform(rng).ln();
            if !inside || proposal == p.theta {
                continue;
            }
            let proposed_ll = history_loglik(&Plume::new(&proposal), history, env);
            if log_u < proposed_ll - *ll {
                p.theta = proposal;
                *ll = proposed_ll;
            }
        }
        Ok(())
    }
}
