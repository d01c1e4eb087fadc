//! Scenario sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use ste_core::{EnvConfig, Position, SourceTerm};

use crate::config::{Range, ScenarioDistributions};

/// Ground truth for one episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub source: SourceTerm,
    pub start: Position,
    pub alpha: f64,
    pub beta: f64,
}

fn draw<R: Rng + ?Sized>(r: &Range, rng: &mut R) -> f64 {
    if r.min == r.max {
        r.min
    } else {
        r.min + (r.max - r.min) * rng.random::<f64>()
    }
}

/// One draw per parameter, then a start position in the start region.
pub fn sample_scenario<R: Rng + ?Sized>(dist: &ScenarioDistributions, env: &EnvConfig, rng: &mut R) -> Scenario {
    let source = SourceTerm {
        x: draw(&dist.x, rng),
        y: draw(&dist.y, rng),
        release_rate: draw(&dist.release_rate, rng),
        wind_speed: draw(&dist.wind_speed, rng),
        wind_direction: draw(&dist.wind_direction_deg, rng).to_radians(),
        diffusivity: draw(&dist.diffusivity, rng),
        lifetime: draw(&dist.lifetime, rng),
    };
    let start = env.start_region.sample(rng);
    Scenario {
        source,
        start,
        alpha: env.alpha,
        beta: env.beta,
    }
}
