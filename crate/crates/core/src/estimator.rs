//! Monte Carlo ensembles and the statistics drawn from them.
//!
//! Replicate `r` always draws from the stream `(seed, r)`, so every estimate
//! here is a pure function of its inputs regardless of how rayon schedules
//! the replicates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::{ProfileSpec, TransportModel};
use crate::redundancy::{velocity_spatial, RedundancyConfig};
use crate::rng::replicate_stream;

/// `N` and `T` used when estimating the asymptotic mean velocity `C_s`
/// of a non-constant profile.
pub const CS_REDUNDANCY: usize = 64;
pub const CS_REPLICATES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSpec {
    distance: f64,
    periods: usize,
    tolerance: f64,
    p0: f64,
    k: f64,
}

/// Reach `distance` within `tolerance` at the scheduled time `periods`,
/// with probability at least `p0`. `k` is the number of periods needed per
/// unit distance at nominal speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskSpec", into = "TaskSpec")]
pub struct TransportTask {
    distance: f64,
    periods: usize,
    tolerance: f64,
    p0: f64,
    k: f64,
}

impl TransportTask {
    pub fn new(distance: f64, periods: usize, tolerance: f64, p0: f64, k: f64) -> Result<Self> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(ModelError::invalid(
                "task.distance",
                format!("must be > 0, got {distance}"),
            ));
        }
        if periods == 0 {
            return Err(ModelError::invalid("task.periods", "must be >= 1"));
        }
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(ModelError::invalid(
                "task.tolerance",
                format!("must be > 0, got {tolerance}"),
            ));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(ModelError::invalid(
                "task.p0",
                format!("must lie in (0, 1), got {p0}"),
            ));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(ModelError::invalid(
                "task.k",
                format!("must be > 0, got {k}"),
            ));
        }
        Ok(TransportTask {
            distance,
            periods,
            tolerance,
            p0,
            k,
        })
    }

    /// Task whose destination is exactly the nominal displacement after `periods`.
    pub fn on_schedule(
        model: &TransportModel,
        periods: usize,
        tolerance: f64,
        p0: f64,
    ) -> Result<Self> {
        let step = model.nominal_step();
        if step.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(ModelError::invalid(
                "profile",
                "nominal velocity must be > 0",
            ));
        }
        Self::new(step * periods as f64, periods, tolerance, p0, 1.0 / step)
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kd(&self) -> f64 {
        self.k * self.distance
    }

    pub fn is_success(&self, d_hat: f64) -> bool {
        (d_hat - self.distance).abs() < self.tolerance
    }
}

impl TryFrom<TaskSpec> for TransportTask {
    type Error = ModelError;

    fn try_from(s: TaskSpec) -> Result<Self> {
        TransportTask::new(s.distance, s.periods, s.tolerance, s.p0, s.k)
    }
}

impl From<TransportTask> for TaskSpec {
    fn from(t: TransportTask) -> Self {
        TaskSpec {
            distance: t.distance,
            periods: t.periods,
            tolerance: t.tolerance,
            p0: t.p0,
            k: t.k,
        }
    }
}

/// A sample of replicate values with its order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(ModelError::invalid(
                "samples",
                "at least one sample is required",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::invalid("samples", "all samples must be finite"));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { values, sorted })
    }

    /// Values in replicate order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance (zero for a single sample).
    pub fn variance(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        (self.variance() / self.len() as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance, `sqrt((m4 - s^4) / n)`.
    pub fn variance_std_err(&self) -> f64 {
        let n = self.len() as f64;
        let m = self.mean();
        let m2 = self.sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let m4 = self.sorted.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        ((m4 - m2 * m2).max(0.0) / n).sqrt()
    }

    /// Quantile with linear interpolation between order statistics; order
    /// statistic `r` (1-based) sits at probability `(r - 1) / (n - 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        if n == 1 {
            return self.sorted[0];
        }
        let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = h - lo as f64;
        let (a, b) = (self.sorted[lo], self.sorted[hi]);
        if frac == 0.0 || a == b {
            a
        } else {
            a + frac * (b - a)
        }
    }

    /// Central interval holding `level` of the mass.
    pub fn interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(ModelError::invalid(
                "level",
                format!("must lie in (0, 1), got {level}"),
            ));
        }
        let tail = (1.0 - level) / 2.0;
        Ok((self.quantile(tail), self.quantile(1.0 - tail)))
    }

    /// Empirical CDF at each order statistic, `(x_(r), r / n)`.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, (i + 1) as f64 / n))
            .collect()
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// Kolmogorov-Smirnov distance to a reference CDF, evaluated on both
    /// sides of every jump. The reference may itself have atoms; its left
    /// limit is taken one ulp below each jump.
    pub fn ks_distance(&self, reference: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            let left = reference(x.next_down());
            d = d
                .max((left - i as f64 / n).abs())
                .max((reference(x) - j as f64 / n).abs());
            i = j;
        }
        d
    }
}

/// Replicate velocities and destinations for one `(N, T)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub cfg: RedundancyConfig,
    pub seed: u64,
    pub replicate_count: usize,
    pub velocities: EmpiricalDistribution,
    pub destinations: EmpiricalDistribution,
}

/// Runs `replicates` independent realizations of `velocity_spatial`.
pub fn ensemble(
    model: &TransportModel,
    cfg: RedundancyConfig,
    replicates: usize,
    seed: u64,
) -> Result<SimResult> {
    if replicates == 0 {
        return Err(ModelError::invalid("replicates", "must be >= 1"));
    }
    let pairs: Vec<(f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let out = velocity_spatial(model, cfg, &mut replicate_stream(seed, r));
            (out.v_hat, out.d_hat)
        })
        .collect();
    let (v, d): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(SimResult {
        cfg,
        seed,
        replicate_count: replicates,
        velocities: EmpiricalDistribution::new(v)?,
        destinations: EmpiricalDistribution::new(d)?,
    })
}

/// Central `level` interval of the realized destination.
pub fn destination_ci(result: &SimResult, level: f64) -> Result<(f64, f64)> {
    result.destinations.interval(level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessEstimate {
    pub probability: f64,
    /// Wald standard error `sqrt(p (1 - p) / n)`.
    pub std_err: f64,
    pub successes: usize,
    pub replicates: usize,
}

/// Fraction of replicates with `|D_hat - D| < epsilon` at `T = task.periods()`.
pub fn success_probability(
    model: &TransportModel,
    modules: usize,
    task: &TransportTask,
    replicates: usize,
    seed: u64,
) -> Result<SuccessEstimate> {
    if replicates == 0 {
        return Err(ModelError::invalid("replicates", "must be >= 1"));
    }
    let cfg = RedundancyConfig::new(modules, task.periods())?;
    let successes = (0..replicates as u64)
        .into_par_iter()
        .filter(|&r| {
            let out = velocity_spatial(model, cfg, &mut replicate_stream(seed, r));
            task.is_success(out.d_hat)
        })
        .count();
    let p = successes as f64 / replicates as f64;
    Ok(SuccessEstimate {
        probability: p,
        std_err: (p * (1.0 - p) / replicates as f64).sqrt(),
        successes,
        replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimalRedundancy {
    Found { modules: usize, probability: f64 },
    Exhausted { max_modules: usize },
}

impl MinimalRedundancy {
    pub fn modules(&self) -> Option<usize> {
        match self {
            MinimalRedundancy::Found { modules, .. } => Some(*modules),
            MinimalRedundancy::Exhausted { .. } => None,
        }
    }
}

/// Smallest `N <= max_modules` whose estimated success probability reaches `p0`.
///
/// Every `N` reuses the same replicate streams.
pub fn minimal_redundancy_empirical(
    model: &TransportModel,
    task: &TransportTask,
    replicates: usize,
    seed: u64,
    max_modules: usize,
) -> Result<MinimalRedundancy> {
    if max_modules == 0 {
        return Err(ModelError::invalid("N_max", "must be >= 1"));
    }
    for n in 1..=max_modules {
        let est = success_probability(model, n, task, replicates, seed)?;
        if est.probability >= task.p0() {
            return Ok(MinimalRedundancy::Found {
                modules: n,
                probability: est.probability,
            });
        }
    }
    Ok(MinimalRedundancy::Exhausted { max_modules })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum RedundancyBound {
    Finite(f64),
    Unbounded,
}

impl RedundancyBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            RedundancyBound::Finite(v) => Some(*v),
            RedundancyBound::Unbounded => None,
        }
    }

    /// Integer module count implied by the bound.
    /// Rounds up, treating values within 1e-9 of an integer as that integer
    /// so rounding noise in the logarithms cannot add a module.
    pub fn ceiled(&self) -> Option<usize> {
        self.value().map(|v| {
            let r = v.round();
            if (v - r).abs() <= 1e-9 * r.max(1.0) {
                r as usize
            } else {
                v.ceil() as usize
            }
        })
    }
}

/// Upper bound on the minimal spatial redundancy,
/// `log(1 - p0^(1/kD)) / log(b)`, floored at one module.
pub fn bound_minimal_redundancy(task: &TransportTask, b: f64) -> Result<RedundancyBound> {
    if !(0.0..=1.0).contains(&b) {
        return Err(ModelError::invalid(
            "b",
            format!("must lie in [0, 1], got {b}"),
        ));
    }
    let kd = task.kd();
    if kd < 1.0 - 1e-12 {
        return Err(ModelError::invalid(
            "task",
            format!("k*D must be >= 1, got {kd}"),
        ));
    }
    if b == 0.0 {
        return Ok(RedundancyBound::Finite(1.0));
    }
    if b == 1.0 {
        return Ok(RedundancyBound::Unbounded);
    }
    let per_period = task.p0().powf(1.0 / kd);
    let value = (-per_period).ln_1p() / b.ln();
    Ok(RedundancyBound::Finite(value.max(1.0)))
}

/// Approximate mean velocity with `N` modules, `(1 - b^N) C_s`.
pub fn mean_velocity_approx(cs: f64, b: f64, modules: usize) -> f64 {
    (1.0 - b.powi(modules as i32)) * cs
}

/// Asymptotic mean velocity `C_s`: exactly `v_open` for constant thrust,
/// otherwise the Monte Carlo mean at large `N` and `T`.
pub fn asymptotic_velocity(model: &TransportModel, seed: u64) -> Result<f64> {
    if matches!(model.profile.spec(), ProfileSpec::Constant { .. }) || !model.noise.enabled() {
        return Ok(model.v_open());
    }
    let cfg = RedundancyConfig::new(CS_REDUNDANCY, CS_REDUNDANCY)?;
    Ok(ensemble(model, cfg, CS_REPLICATES, seed)?.velocities.mean())
}

/// Closed-form companions of a simulated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticSummary {
    pub cs: f64,
    pub mean_approx: f64,
    pub bound_n: Option<RedundancyBound>,
}

impl AnalyticSummary {
    pub fn compute(
        model: &TransportModel,
        cs: f64,
        modules: usize,
        task: Option<&TransportTask>,
    ) -> Result<Self> {
        let b = if model.noise.enabled() {
            model.noise.b()
        } else {
            0.0
        };
        let bound_n = task.map(|t| bound_minimal_redundancy(t, b)).transpose()?;
        Ok(AnalyticSummary {
            cs,
            mean_approx: mean_velocity_approx(cs, b, modules),
            bound_n,
        })
    }
}
