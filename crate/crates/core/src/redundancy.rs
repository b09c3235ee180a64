//! Terrain-disturbed velocity under temporal and spatial redundancy.
//!
//! With `T` periods and `N` serially connected modules, each period pools the
//! thrust of all modules, `sign(sum tau_u) * sum f_u / sum tau_u`, and the
//! velocity is the period average of the pooled thrust over `gamma`. A period
//! contributes nothing only when every module loses its bac.

use rand::Rng;
use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::model::{BacOutcome, OutcomeGrid, TransportModel};

/// Longest first-passage search, in periods, unless the caller overrides it.
pub const DEFAULT_MAX_PERIODS: usize = 10_000;

/// Spatial (`modules`, N) and temporal (`periods`, T) redundancy orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RedundancyConfig {
    modules: usize,
    periods: usize,
}

impl RedundancyConfig {
    pub fn new(modules: usize, periods: usize) -> Result<Self> {
        if modules == 0 {
            return Err(ModelError::invalid("N", "spatial redundancy must be >= 1"));
        }
        if periods == 0 {
            return Err(ModelError::invalid("T", "temporal redundancy must be >= 1"));
        }
        Ok(RedundancyConfig { modules, periods })
    }

    pub fn modules(&self) -> usize {
        self.modules
    }

    pub fn periods(&self) -> usize {
        self.periods
    }
}

/// Average velocity and realized destination over one run of `T` periods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportOutcome {
    pub v_hat: f64,
    /// `T * v_hat * period`.
    pub d_hat: f64,
    pub per_period_velocities: Vec<f64>,
    pub period: f64,
}

impl TransportOutcome {
    fn from_velocities(per_period_velocities: Vec<f64>, period: f64) -> Self {
        let t = per_period_velocities.len() as f64;
        let v_hat = per_period_velocities.iter().fold(0.0, |acc, v| acc + v) / t;
        TransportOutcome {
            v_hat,
            d_hat: t * v_hat * period,
            per_period_velocities,
            period,
        }
    }

    /// Cumulative displacement at the end of each period.
    pub fn trajectory(&self) -> Vec<f64> {
        self.per_period_velocities
            .iter()
            .scan(0.0, |pos, v| {
                *pos += v * self.period;
                Some(*pos)
            })
            .collect()
    }
}

/// Pooled thrust of the modules active in one period.
pub fn pooled_thrust(modules: &[BacOutcome]) -> f64 {
    let (f_sum, tau_sum) = modules
        .iter()
        .fold((0.0, 0.0), |(f, t), o| (f + o.f_u, t + o.tau_u));
    if tau_sum > 0.0 {
        f_sum / tau_sum
    } else {
        0.0
    }
}

/// Velocity of a single module averaged over `periods` independent bacs.
pub fn velocity_temporal<R: Rng + ?Sized>(
    model: &TransportModel,
    periods: usize,
    rng: &mut R,
) -> Result<TransportOutcome> {
    if periods == 0 {
        return Err(ModelError::invalid("T", "temporal redundancy must be >= 1"));
    }
    let velocities = (0..periods)
        .map(|_| model.drag.velocity(model.sample_bac(rng).f_hat))
        .collect();
    Ok(TransportOutcome::from_velocities(
        velocities,
        model.period(),
    ))
}

/// Velocity of `N` pooled modules over `T` periods.
pub fn velocity_spatial<R: Rng + ?Sized>(
    model: &TransportModel,
    cfg: RedundancyConfig,
    rng: &mut R,
) -> TransportOutcome {
    let grid = OutcomeGrid::sample(&model.profile, &model.noise, cfg.periods, cfg.modules, rng);
    velocity_from_grid(model, &grid)
}

/// Velocity for an already realized outcome grid.
pub fn velocity_from_grid(model: &TransportModel, grid: &OutcomeGrid) -> TransportOutcome {
    let velocities = (0..grid.periods())
        .map(|i| model.drag.velocity(pooled_thrust(grid.period(i))))
        .collect();
    TransportOutcome::from_velocities(velocities, model.period())
}

/// Cumulative displacement after each of the `T` periods.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    model: &TransportModel,
    cfg: RedundancyConfig,
    rng: &mut R,
) -> Vec<f64> {
    velocity_spatial(model, cfg, rng).trajectory()
}

/// Result of a first-passage search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Passage {
    Reached { periods: usize },
    Exhausted { max_periods: usize },
}

impl Passage {
    pub fn periods(&self) -> Option<usize> {
        match self {
            Passage::Reached { periods } => Some(*periods),
            Passage::Exhausted { .. } => None,
        }
    }
}

/// Number of periods until `modules` pooled modules first cover `distance`.
pub fn first_passage_time<R: Rng + ?Sized>(
    model: &TransportModel,
    modules: usize,
    distance: f64,
    max_periods: usize,
    rng: &mut R,
) -> Result<Passage> {
    if modules == 0 {
        return Err(ModelError::invalid("N", "spatial redundancy must be >= 1"));
    }
    if !(distance.is_finite() && distance > 0.0) {
        return Err(ModelError::invalid(
            "D",
            format!("must be > 0, got {distance}"),
        ));
    }
    if max_periods == 0 {
        return Err(ModelError::invalid("T_max", "must be >= 1"));
    }
    // absorbs rounding in repeated sums of the per-period step
    let target = distance * (1.0 - 1e-12);
    let mut position = 0.0;
    let mut bacs = Vec::with_capacity(modules);
    for period in 1..=max_periods {
        bacs.clear();
        bacs.extend((0..modules).map(|_| model.sample_bac(rng)));
        position += model.drag.velocity(pooled_thrust(&bacs)) * model.period();
        if position >= target {
            return Ok(Passage::Reached { periods: period });
        }
    }
    Ok(Passage::Exhausted { max_periods })
}
