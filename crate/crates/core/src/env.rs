//! Plume concentration model, noisy sensor and agent motion over the search
//! domain.
//!
//! The mean concentration at sensor position `p` for a continuous point
//! release at `p_s` under a steady wind is
//!
//! ```text
//! m(p) = q / (4π d r) · exp(-r/λ + ψ)
//! r    = |p - p_s|
//! ψ    = -[(x - x_s) u cos φ + (y - y_s) u sin φ] / (2d)
//! λ    = sqrt(d τ / (1 + u² τ / (4d)))
//! ```
//!
//! A reading is `max(0, m + ν)` with `ν ~ N(noise_mean, (α m + β)²)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result, SteError};
use crate::scalar::Scalar;

/// Distances below this are treated as coincident with the source.
pub const SOURCE_CUTOFF: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub min: Position<T>,
    pub max: Position<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Self {
            min: Position::new(min_x, min_y),
            max: Position::new(max_x, max_y),
        }
    }

    pub fn square(lo: T, hi: T) -> Self {
        Self::new(lo, lo, hi, hi)
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: &Position<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_bounds(&self, other: &Self) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn clamp(&self, p: Position<T>) -> Position<T> {
        Position {
            x: p.x.max(self.min.x).min(self.max.x),
            y: p.y.max(self.min.y).min(self.max.y),
        }
    }

    pub fn is_proper(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x < self.max.x && self.min.y < self.max.y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Position<T> {
        Position {
            x: crate::scalar::uniform_in(rng, self.min.x, self.max.x),
            y: crate::scalar::uniform_in(rng, self.min.y, self.max.y),
        }
    }
}

/// Ground-truth (or hypothesised) release parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm<T> {
    /// Source position, meters.
    pub x: T,
    pub y: T,
    /// Release rate, g/s.
    pub release_rate: T,
    /// Mean wind speed, m/s.
    pub wind_speed: T,
    /// Wind direction, radians.
    pub wind_direction: T,
    /// Diffusivity, m²/s.
    pub diffusivity: T,
    /// Mean particle lifetime, s.
    pub lifetime: T,
}

impl<T: Scalar> SourceTerm<T> {
    pub fn position(&self) -> Position<T> {
        Position::new(self.x, self.y)
    }

    pub fn get(&self, param: Param) -> T {
        match param {
            Param::X => self.x,
            Param::Y => self.y,
            Param::ReleaseRate => self.release_rate,
            Param::WindSpeed => self.wind_speed,
            Param::WindDirection => self.wind_direction,
            Param::Diffusivity => self.diffusivity,
            Param::Lifetime => self.lifetime,
        }
    }

    pub fn set(&mut self, param: Param, value: T) {
        match param {
            Param::X => self.x = value,
            Param::Y => self.y = value,
            Param::ReleaseRate => self.release_rate = value,
            Param::WindSpeed => self.wind_speed = value,
            Param::WindDirection => self.wind_direction = value,
            Param::Diffusivity => self.diffusivity = value,
            Param::Lifetime => self.lifetime = value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.x,
            self.y,
            self.release_rate,
            self.wind_speed,
            self.wind_direction,
            self.diffusivity,
            self.lifetime,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return config_err("source term has non-finite parameters");
        }
        if self.release_rate <= T::zero() {
            return config_err("release rate must be positive");
        }
        if self.wind_speed < T::zero() {
            return config_err("wind speed must be non-negative");
        }
        if self.diffusivity <= T::zero() {
            return config_err("diffusivity must be positive");
        }
        if self.lifetime <= T::zero() {
            return config_err("particle lifetime must be positive");
        }
        Ok(())
    }

    /// Characteristic decay length λ of the plume.
    pub fn decay_length(&self) -> T {
        let four = T::lit(4.0);
        let d = self.diffusivity;
        let tau = self.lifetime;
        let u = self.wind_speed;
        (d * tau / (T::one() + u * u * tau / (four * d))).sqrt()
    }
}

/// One component of a [`SourceTerm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    X,
    Y,
    ReleaseRate,
    WindSpeed,
    WindDirection,
    Diffusivity,
    Lifetime,
}

impl Param {
    pub fn is_position(self) -> bool {
        matches!(self, Param::X | Param::Y)
    }
}

/// Source term with every position-independent factor of the concentration
/// formula evaluated once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plume<T> {
    source: Position<T>,
    amplitude: T,
    inv_decay: T,
    drift_x: T,
    drift_y: T,
}

impl<T: Scalar> Plume<T> {
    pub fn new(theta: &SourceTerm<T>) -> Self {
        let two_d = T::lit(2.0) * theta.diffusivity;
        let (sin_phi, cos_phi) = theta.wind_direction.sin_cos();
        Self {
            source: theta.position(),
            amplitude: theta.release_rate / (T::lit(4.0) * T::PI() * theta.diffusivity),
            inv_decay: theta.decay_length().recip(),
            drift_x: theta.wind_speed * cos_phi / two_d,
            drift_y: theta.wind_speed * sin_phi / two_d,
        }
    }

    #[inline]
    fn eval(&self, dx: T, dy: T, r: T) -> T {
        let exponent = -r * self.inv_decay - (dx * self.drift_x + dy * self.drift_y);
        self.amplitude / r * exponent.exp()
    }

    /// Mean concentration at `p`; errors on the source itself.
    #[inline]
    pub fn mean_at(&self, p: &Position<T>) -> Result<T> {
        let dx = p.x - self.source.x;
        let dy = p.y - self.source.y;
        let r = dx.hypot(dy);
        if !(r >= T::lit(SOURCE_CUTOFF)) {
            return Err(SteError::Singularity {
                distance: r.to_f64_lossy(),
            });
        }
        Ok(self.eval(dx, dy, r))
    }

    /// Mean concentration with the distance floored at [`SOURCE_CUTOFF`].
    #[inline]
    pub fn mean_at_guarded(&self, p: &Position<T>) -> T {
        let dx = p.x - self.source.x;
        let dy = p.y - self.source.y;
        let r = dx.hypot(dy).max(T::lit(SOURCE_CUTOFF));
        self.eval(dx, dy, r)
    }
}

/// Mean gas concentration at `p` produced by `theta`.
pub fn mean_concentration<T: Scalar>(p: &Position<T>, theta: &SourceTerm<T>) -> Result<T> {
    Plume::new(theta).mean_at(p)
}

/// Discrete unit move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    North,
    East,
    South,
    West,
    NorthEast,
    SouthEast,
    SouthWest,
    NorthWest,
}

impl Move {
    /// Unit direction vector (x east, y north).
    pub fn direction<T: Scalar>(self) -> (T, T) {
        let d = T::FRAC_1_SQRT_2();
        let (o, l) = (T::zero(), T::one());
        match self {
            Move::North => (o, l),
            Move::East => (l, o),
            Move::South => (o, -l),
            Move::West => (-l, o),
            Move::NorthEast => (d, d),
            Move::SouthEast => (d, -d),
            Move::SouthWest => (-d, -d),
            Move::NorthWest => (-d, d),
        }
    }
}

/// Which unit moves the agent may take. Order of the slice is the action
/// index order used by planners and learners.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSet {
    #[default]
    FourConnected,
    EightConnected,
}

impl ActionSet {
    pub fn moves(self) -> &'static [Move] {
        const FOUR: [Move; 4] = [Move::North, Move::East, Move::South, Move::West];
        const EIGHT: [Move; 8] = [
            Move::North,
            Move::East,
            Move::South,
            Move::West,
            Move::NorthEast,
            Move::SouthEast,
            Move::SouthWest,
            Move::NorthWest,
        ];
        match self {
            ActionSet::FourConnected => &FOUR,
            ActionSet::EightConnected => &EIGHT,
        }
    }

    pub fn len(self) -> usize {
        self.moves().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn index_of(self, mv: Move) -> Option<usize> {
        self.moves().iter().position(|m| *m == mv)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig<T> {
    pub domain: Bounds<T>,
    /// Meters per move.
    pub step_length: T,
    pub action_set: ActionSet,
    /// Signal-proportional sensor noise coefficient.
    pub alpha: T,
    /// Additive noise floor, concentration units.
    pub beta: T,
    pub noise_mean: T,
    pub max_steps: usize,
    pub start_region: Bounds<T>,
}

impl<T: Scalar> Default for EnvConfig<T> {
    fn default() -> Self {
        Self {
            domain: Bounds::square(T::zero(), T::lit(30.0)),
            step_length: T::one(),
            action_set: ActionSet::FourConnected,
            alpha: T::lit(0.3),
            beta: T::lit(0.2),
            noise_mean: T::zero(),
            max_steps: 300,
            start_region: Bounds::square(T::zero(), T::lit(5.0)),
        }
    }
}

impl<T: Scalar> EnvConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.domain.is_proper() {
            return config_err("domain bounds must satisfy min < max on both axes");
        }
        if !(self.step_length > T::zero()) {
            return config_err("step_length must be positive");
        }
        if !(self.alpha >= T::zero()) {
            return config_err("alpha must be non-negative");
        }
        if !(self.beta > T::zero()) {
            return config_err("beta must be positive");
        }
        if !self.noise_mean.is_finite() {
            return config_err("noise_mean must be finite");
        }
        if self.max_steps == 0 {
            return config_err("max_steps must be positive");
        }
        if !self.domain.contains_bounds(&self.start_region)
            || self.start_region.min.x > self.start_region.max.x
            || self.start_region.min.y > self.start_region.max.y
        {
            return config_err("start_region must be a box inside the domain");
        }
        Ok(())
    }

    /// Standard deviation of the additive sensor noise at mean concentration `m`.
    #[inline]
    pub fn noise_std(&self, m: T) -> T {
        self.alpha * m + self.beta
    }

    pub fn moves(&self) -> &'static [Move] {
        self.action_set.moves()
    }

    /// Position reached from `pos` by `mv`, clamped per axis to the domain.
    pub fn displaced(&self, pos: Position<T>, mv: Move) -> Position<T> {
        let (dx, dy) = mv.direction::<T>();
        self.domain.clamp(Position {
            x: pos.x + dx * self.step_length,
            y: pos.y + dy * self.step_length,
        })
    }
}

/// Position and (clamped, non-negative) concentration reading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub position: Position<T>,
    pub concentration: T,
}

/// Reading drawn from the noise model around a known mean concentration.
/// Consumes exactly one normal draw.
#[inline]
pub fn sample_reading<T: Scalar, R: Rng + ?Sized>(mean: T, cfg: &EnvConfig<T>, rng: &mut R) -> T {
    let sigma = cfg.noise_std(mean);
    let noise = cfg.noise_mean + sigma * T::standard_normal(rng);
    (mean + noise).max(T::zero())
}

/// Noisy sensor reading at `p`.
pub fn sample_measurement<T: Scalar, R: Rng + ?Sized>(
    p: &Position<T>,
    theta: &SourceTerm<T>,
    cfg: &EnvConfig<T>,
    rng: &mut R,
) -> Result<T> {
    let m = mean_concentration(p, theta)?;
    Ok(sample_reading(m, cfg, rng))
}

/// Moves the agent and takes a reading at the new position.
pub fn step<T: Scalar, R: Rng + ?Sized>(
    pos: Position<T>,
    mv: Move,
    cfg: &EnvConfig<T>,
    theta: &SourceTerm<T>,
    rng: &mut R,
) -> Result<(Position<T>, Observation<T>)> {
    let next = cfg.displaced(pos, mv);
    let concentration = sample_measurement(&next, theta, cfg, rng)?;
    Ok((
        next,
        Observation {
            position: next,
            concentration,
        },
    ))
}
