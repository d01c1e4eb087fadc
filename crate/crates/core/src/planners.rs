//! One-step lookahead search strategies over a particle belief.
//!
//! All three statistical planners share one Monte-Carlo engine: sample a
//! hypothesis in proportion to its weight, draw a reading at the candidate
//! position under it, then (for Infotaxis and DCEE) reweight a copy of the
//! belief with that hypothetical reading. Hypothetical updates never resample
//! and never touch the caller's belief.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{log_density, position_trace, Belief};
use crate::env::{sample_reading, EnvConfig, Move, Position};
use crate::error::{config_err, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Infotaxis,
    Entrotaxis,
    Dcee,
    Random,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [
        PlannerKind::Infotaxis,
        PlannerKind::Entrotaxis,
        PlannerKind::Dcee,
        PlannerKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Infotaxis => "infotaxis",
            PlannerKind::Entrotaxis => "entrotaxis",
            PlannerKind::Dcee => "dcee",
            PlannerKind::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LookaheadConfig<T> {
    /// Hypothetical readings sampled per candidate.
    pub n_hypothetical: usize,
    /// Histogram bins for the predictive-reading entropy.
    pub entropy_bins: usize,
    /// Cell side for belief-histogram entropy, meters.
    pub entropy_cell: T,
    /// Histogram span used when Entrotaxis compares candidates.
    pub entropy_range: EntropyRange,
}

/// How the predictive-reading histogram is spanned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyRange {
    /// Each candidate's own sample min..max.
    PerCandidate,
    /// One min..max over the samples of every candidate in the decision.
    #[default]
    Shared,
}

impl<T: Scalar> Default for LookaheadConfig<T> {
    fn default() -> Self {
        Self {
            n_hypothetical: 25,
            entropy_bins: 16,
            entropy_cell: T::one(),
            entropy_range: EntropyRange::default(),
        }
    }
}

impl<T: Scalar> LookaheadConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_hypothetical == 0 {
            return config_err("n_hypothetical must be at least 1");
        }
        if self.entropy_bins < 2 {
            return config_err("entropy_bins must be at least 2");
        }
        if !(self.entropy_cell > T::zero()) {
            return config_err("entropy_cell must be positive");
        }
        Ok(())
    }
}

/// Cumulative weights for inverse-CDF particle picks.
struct WeightSampler<T> {
    cumulative: Vec<T>,
}

impl<T: Scalar> WeightSampler<T> {
    fn new(belief: &Belief<T>) -> Self {
        let mut acc = T::zero();
        let cumulative = belief
            .weights()
            .map(|w| {
                acc = acc + w;
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty belief");
        let u = T::unit_uniform(rng) * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

fn draw_readings<T: Scalar, R: Rng + ?Sized>(
    sampler: &WeightSampler<T>,
    means: &[T],
    m: usize,
    env: &EnvConfig<T>,
    rng: &mut R,
) -> Vec<T> {
    (0..m)
        .map(|_| {
            let i = sampler.pick(rng);
            sample_reading(means[i], env, rng)
        })
        .collect()
}

/// `M` readings at `candidate` drawn from the belief's predictive
/// distribution.
pub fn predictive_samples<T: Scalar, R: Rng + ?Sized>(
    belief: &Belief<T>,
    candidate: &Position<T>,
    cfg: &LookaheadConfig<T>,
    env: &EnvConfig<T>,
    rng: &mut R,
) -> Vec<T> {
    let means = belief.predicted_means(candidate);
    draw_readings(&WeightSampler::new(belief), &means, cfg.n_hypothetical, env, rng)
}

/// Position-covariance trace after a hypothetical reading `c` at a candidate
/// whose per-particle predicted means are `means`.
fn trace_after<T: Scalar>(belief: &Belief<T>, means: &[T], c: T, env: &EnvConfig<T>, scratch: &mut Vec<T>) -> T {
    scratch.clear();
    let mut max = T::neg_infinity();
    for (p, &m) in belief.particles().iter().zip(means) {
        let l = p.weight.ln() + log_density(c, m, env);
        max = max.max(l);
        scratch.push(l);
    }
    if !max.is_finite() {
        return belief.position_variance_trace();
    }
    let mut sum = T::zero();
    for l in scratch.iter_mut() {
        *l = (*l - max).exp();
        sum = sum + *l;
    }
    for l in scratch.iter_mut() {
        *l = *l / sum;
    }
    position_trace(belief.particles(), scratch)
}

fn epv_with_means<T: Scalar, R: Rng + ?Sized>(
    belief: &Belief<T>,
    sampler: &WeightSampler<T>,
    means: &[T],
    cfg: &LookaheadConfig<T>,
    env: &EnvConfig<T>,
    rng: &mut R,
) -> T {
    let readings = draw_readings(sampler, means, cfg.n_hypothetical, env, rng);
    let mut scratch = Vec::with_capacity(means.len());
    let total: T = readings
        .into_iter()
        .map(|c| trace_after(belief, means, c, env, &mut scratch))
        .sum();
    total / T::from_usize_lossy(cfg.n_hypothetical)
}

/// Monte-Carlo estimate of the expected position-covariance trace after
/// measuring at `candidate`.
pub fn expected_posterior_variance<T: Scalar, R: Rng + ?Sized>(
    belief: &Belief<T>,
    candidate: &Position<T>,
    cfg: &LookaheadConfig<T>,
    env: &EnvConfig<T>,
    rng: &mut R,
) -> T {
    let means = belief.predicted_means(candidate);
    epv_with_means(belief, &WeightSampler::new(belief), &means, cfg, env, rng)
}

/// Shannon entropy (nats) of a `entropy_bins`-bin histogram spanning the
/// sample range.
pub fn predictive_entropy<T: Scalar>(samples: &[T], cfg: &LookaheadConfig<T>) -> T {
    let lo = samples.iter().copied().fold(T::infinity(), T::min);
    let hi = samples.iter().copied().fold(T::neg_infinity(), T::max);
    histogram_entropy(samples, lo, hi, cfg.entropy_bins)
}

/// Shannon entropy (nats) of a `bins`-bin histogram over `[lo, hi]`. Samples
/// outside the span land in the edge bins; an empty span gives 0.
pub fn histogram_entropy<T: Scalar>(samples: &[T], lo: T, hi: T, bins: usize) -> T {
    if samples.is_empty() || !(hi > lo) {
        return T::zero();
    }
    let width = (hi - lo) / T::from_usize_lossy(bins);
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let b = ((s - lo) / width).floor().max(T::zero()).to_usize().unwrap_or(0).min(bins - 1);
        counts[b] += 1;
    }
    let n = T::from_usize_lossy(samples.len());
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = T::from_usize_lossy(c) / n;
            -p * p.ln()
        })
        .sum()
}

/// Squared distance from `candidate` to the current estimate plus the
/// expected posterior variance at `candidate`.
pub fn dcee_cost<T: Scalar, R: Rng + ?Sized>(
    belief: &Belief<T>,
    candidate: &Position<T>,
    cfg: &LookaheadConfig<T>,
    env: &EnvConfig<T>,
    rng: &mut R,
) -> T {
    candidate.distance_sq(&belief.estimated_position()) + expected_posterior_variance(belief, candidate, cfg, env, rng)
}

/// Index of the smallest score; the first one wins ties.
fn argmin<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s < scores[best] {
            best = i;
        }
    }
    best
}

/// Picks the next move. Candidates are the post-clamp positions of every
/// move in the configured action set, scored in action order.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    kind: PlannerKind,
    belief: &Belief<T>,
    pos: Position<T>,
    cfg: &LookaheadConfig<T>,
    env: &EnvConfig<T>,
    rng: &mut R,
) -> Move {
    let moves = env.moves();
    if kind == PlannerKind::Random {
        return moves[rng.random_range(0..moves.len())];
    }
    let sampler = WeightSampler::new(belief);
    if kind == PlannerKind::Entrotaxis {
        let readings: Vec<Vec<T>> = moves
            .iter()
            .map(|&mv| {
                let means = belief.predicted_means(&env.displaced(pos, mv));
                draw_readings(&sampler, &means, cfg.n_hypothetical, env, rng)
            })
            .collect();
        let scores: Vec<T> = match cfg.entropy_range {
            EntropyRange::PerCandidate => readings.iter().map(|r| -predictive_entropy(r, cfg)).collect(),
            EntropyRange::Shared => {
                let all = readings.iter().flatten().copied();
                let lo = all.clone().fold(T::infinity(), T::min);
                let hi = all.fold(T::neg_infinity(), T::max);
                readings.iter().map(|r| -histogram_entropy(r, lo, hi, cfg.entropy_bins)).collect()
            }
        };
        return moves[argmin(&scores)];
    }
    let estimate = belief.estimated_position();
    let scores: Vec<T> = moves
        .iter()
        .map(|&mv| {
            let candidate = env.displaced(pos, mv);
            let means = belief.predicted_means(&candidate);
            let epv = epv_with_means(belief, &sampler, &means, cfg, env, rng);
            match kind {
                PlannerKind::Dcee => candidate.distance_sq(&estimate) + epv,
                _ => epv,
            }
        })
        .collect();
    moves[argmin(&scores)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{Particle, ParamRange};
    use crate::env::{Param, SourceTerm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn theta(x: f64, y: f64) -> SourceTerm<f64> {
        SourceTerm {
            x,
            y,
            release_rate: 50.0,
            wind_speed: 1.0,
            wind_direction: 0.3,
            diffusivity: 2.0,
            lifetime: 10.0,
        }
    }

    fn belief(points: &[(f64, f64, f64)]) -> Belief<f64> {
        let particles = points
            .iter()
            .map(|&(x, y, w)| Particle { theta: theta(x, y), weight: w })
            .collect();
        Belief::from_particles(
            particles,
            vec![ParamRange::new(Param::X, 0.0, 30.0), ParamRange::new(Param::Y, 0.0, 30.0)],
        )
        .unwrap()
    }

    #[test]
    fn entropy_of_degenerate_and_uniform_samples() {
        let cfg = LookaheadConfig::<f64>::default();
        assert_eq!(predictive_entropy(&[2.0; 10], &cfg), 0.0);
        let cfg8 = LookaheadConfig {
            entropy_bins: 8,
            ..cfg.clone()
        };
        let samples: Vec<f64> = (0..8).flat_map(|b| [b as f64 + 0.5, b as f64 + 0.5]).collect();
        let h = predictive_entropy(&samples, &cfg8);
        assert!((h - 8f64.ln()).abs() < 1e-12);
        assert!((h - 2.079442).abs() < 1e-6);
    }

    #[test]
    fn point_mass_has_zero_expected_variance() {
        let b = belief(&[(12.0, 12.0, 1.0)]);
        let cfg = LookaheadConfig::default();
        let env = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = expected_posterior_variance(&b, &Position::new(5.0, 5.0), &cfg, &env, &mut rng);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn dcee_cost_reduces_to_distance_for_point_mass() {
        let b = belief(&[(0.0, 0.0, 1.0)]);
        let cfg = LookaheadConfig::default();
        let env = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(dcee_cost(&b, &Position::new(3.0, 4.0), &cfg, &env, &mut rng), 25.0);
        assert_eq!(dcee_cost(&b, &Position::new(0.0, 0.0), &cfg, &env, &mut rng), 0.0);
    }

    #[test]
    fn dcee_walks_toward_point_mass_estimate() {
        let b = belief(&[(20.0, 8.0, 1.0)]);
        let cfg = LookaheadConfig::default();
        let env = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pos = Position::new(2.0, 2.0);
        for _ in 0..24 {
            let before = pos.distance(&Position::new(20.0, 8.0));
            let mv = select_action(PlannerKind::Dcee, &b, pos, &cfg, &env, &mut rng);
            pos = env.displaced(pos, mv);
            assert!(pos.distance(&Position::new(20.0, 8.0)) < before);
        }
        assert_eq!(pos, Position::new(20.0, 8.0));
    }

    #[test]
    fn planners_do_not_mutate_the_belief() {
        let b = belief(&[(10.0, 10.0, 0.3), (20.0, 12.0, 0.7)]);
        let copy = b.clone();
        let cfg = LookaheadConfig::default();
        let env = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in PlannerKind::ALL {
            select_action(kind, &b, Position::new(15.0, 11.0), &cfg, &env, &mut rng);
        }
        assert_eq!(b, copy);
    }

    #[test]
    fn planner_names_round_trip() {
        for k in PlannerKind::ALL {
            assert_eq!(PlannerKind::from_name(k.name()), Some(k));
        }
        assert_eq!(PlannerKind::from_name("greedy"), None);
    }
}
