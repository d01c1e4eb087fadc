use serde::{Deserialize, Serialize};

use super::{Belief, BeliefConfig, Particle};
use crate::env::{Param, Position, SourceTerm};
use crate::scalar::Scalar;

/// Serializable view of a belief for trajectory logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot<T> {
    pub dims: Vec<Param>,
    pub particles: Vec<Particle<T>>,
    pub estimate: SourceTerm<T>,
    pub std: Vec<T>,
    pub ess: T,
}

/// Weighted mean and population variance of `values`.
fn weighted_moments<T: Scalar>(values: impl Iterator<Item = (T, T)> + Clone) -> (T, T) {
    let mean: T = values.clone().map(|(v, w)| v * w).sum();
    let var: T = values.map(|(v, w)| w * (v - mean) * (v - mean)).sum();
    (mean, var.max(T::zero()))
}

/// Trace of the weighted covariance of the source position over `particles`
/// with the alternative weight vector `weights`. Axes the belief does not
/// estimate contribute zero.
pub(crate) fn position_trace<T: Scalar>(particles: &[Particle<T>], weights: &[T]) -> T {
    let xs = particles.iter().zip(weights).map(|(p, &w)| (p.theta.x, w));
    let ys = particles.iter().zip(weights).map(|(p, &w)| (p.theta.y, w));
    weighted_moments(xs).1 + weighted_moments(ys).1
}

impl<T: Scalar> Belief<T> {
    /// Weighted mean on the estimated dimensions; known ones pass through.
    pub fn point_estimate(&self) -> SourceTerm<T> {
        let mut est = self.particles[0].theta;
        for r in &self.estimated {
            let mean: T = self.particles.iter().map(|p| p.theta.get(r.param) * p.weight).sum();
            est.set(r.param, mean);
        }
        est
    }

    pub fn estimated_position(&self) -> Position<T> {
        self.point_estimate().position()
    }

    /// Weighted population standard deviation of each estimated dimension,
    /// in the order of [`Belief::estimated`].
    pub fn posterior_std(&self) -> Vec<T> {
        self.estimated
            .iter()
            .map(|r| {
                let it = self.particles.iter().map(|p| (p.theta.get(r.param), p.weight));
                weighted_moments(it).1.sqrt()
            })
            .collect()
    }

    /// Standard deviation of one parameter, zero if it is not estimated.
    pub fn std_of(&self, param: Param) -> T {
        self.estimated
            .iter()
            .zip(self.posterior_std())
            .find(|(r, _)| r.param == param)
            .map_or(T::zero(), |(_, s)| s)
    }

    /// Trace of the posterior covariance of the source position.
    pub fn position_variance_trace(&self) -> T {
        let w: Vec<T> = self.weights().collect();
        position_trace(&self.particles, &w)
    }

    /// True when every estimated dimension's STD is below `zeta`.
    pub fn is_converged(&self, zeta: T) -> bool {
        self.posterior_std().into_iter().fold(T::zero(), T::max) < zeta
    }

    /// Cessation test against the configured threshold.
    pub fn cessation_check(&self, cfg: &BeliefConfig<T>) -> bool {
        self.is_converged(cfg.cessation_threshold)
    }

    /// Shannon entropy (nats) of the weighted particle histogram over square
    /// cells of side `cell_size` tiling the position prior box.
    pub fn entropy(&self, cell_size: T) -> T {
        let axis = |param: Param| {
            self.estimated
                .iter()
                .find(|r| r.param == param)
                .map(|r| (r.min, ((r.max - r.min) / cell_size).ceil().to_usize().unwrap_or(1).max(1)))
        };
        let (x0, nx) = axis(Param::X).unwrap_or((T::zero(), 1));
        let (y0, ny) = axis(Param::Y).unwrap_or((T::zero(), 1));
        let bin = |v: T, lo: T, n: usize| {
            if n == 1 {
                return 0;
            }
            ((v - lo) / cell_size).floor().to_usize().unwrap_or(0).min(n - 1)
        };
        let mut mass = vec![T::zero(); nx * ny];
        for p in &self.particles {
            let i = bin(p.theta.x, x0, nx);
            let j = bin(p.theta.y, y0, ny);
            mass[j * nx + i] = mass[j * nx + i] + p.weight;
        }
        mass.into_iter()
            .filter(|&m| m > T::zero())
            .map(|m| -m * m.ln())
            .sum()
    }

    pub fn snapshot(&self) -> BeliefSnapshot<T> {
        BeliefSnapshot {
            dims: self.estimated.iter().map(|r| r.param).collect(),
            particles: self.particles.clone(),
            estimate: self.point_estimate(),
            std: self.posterior_std(),
            ess: self.effective_sample_size(),
        }
    }
}
