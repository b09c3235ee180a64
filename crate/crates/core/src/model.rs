//! Thrust profiles, drag, and the contact-noise process for a single bac.
//!
//! A bac spans one period of duration `tau`. On rugose terrain its onset is
//! delayed by `c1 ~ U(0, tau)` and its duration shortened to `tau_u`, where
//! `tau_u` has the mixed law `G(tau_u) = (1 - b) tau_u / tau + b`: an atom of
//! mass `b` at zero (complete loss) and uniform density on `(0, tau]`.
//! Contact that runs past the end of the period carries over into the next
//! one; the thrust function is treated as strictly periodic, so the
//! disturbance integral simply wraps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Serialized form of a thrust profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `f(t) = value`.
    Constant { tau: f64, value: f64 },
    /// `f(t) = start + (end - start) t / tau` on `[0, tau)`, repeated each period.
    LinearRamp { tau: f64, start: f64, end: f64 },
    /// Piecewise-linear periodic interpolation through `(offset, thrust)` knots.
    Tabulated { tau: f64, points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    end: f64,
    f_start: f64,
    f_end: f64,
    /// Integral of f over [0, start).
    cum_before: f64,
}

impl Segment {
    fn value_at(&self, t: f64) -> f64 {
        let width = self.end - self.start;
        if width <= 0.0 {
            return self.f_start;
        }
        self.f_start + (self.f_end - self.f_start) * (t - self.start) / width
    }

    fn integral_to(&self, t: f64) -> f64 {
        self.cum_before + 0.5 * (t - self.start) * (self.f_start + self.value_at(t))
    }
}

/// The periodic instantaneous thrust `f(t)` over one bac of duration `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub struct ThrustProfile {
    spec: ProfileSpec,
    segments: Vec<Segment>,
    total: f64,
}

impl ThrustProfile {
    pub fn constant(tau: f64, value: f64) -> Result<Self> {
        Self::from_spec(ProfileSpec::Constant { tau, value })
    }

    pub fn linear_ramp(tau: f64, start: f64, end: f64) -> Result<Self> {
        Self::from_spec(ProfileSpec::LinearRamp { tau, start, end })
    }

    pub fn tabulated(tau: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        Self::from_spec(ProfileSpec::Tabulated {
            tau,
            points: points.into_iter().map(|(t, f)| [t, f]).collect(),
        })
    }

    pub fn from_spec(spec: ProfileSpec) -> Result<Self> {
        let segments = match &spec {
            ProfileSpec::Constant { tau, value } => {
                check_tau(*tau)?;
                check_finite("profile.value", *value)?;
                vec![(0.0, *tau, *value, *value)]
            }
            ProfileSpec::LinearRamp { tau, start, end } => {
                check_tau(*tau)?;
                check_finite("profile.start", *start)?;
                check_finite("profile.end", *end)?;
                vec![(0.0, *tau, *start, *end)]
            }
            ProfileSpec::Tabulated { tau, points } => {
                check_tau(*tau)?;
                tabulated_segments(*tau, points)?
            }
        };
        let mut cum = 0.0;
        let segments: Vec<Segment> = segments
            .into_iter()
            .map(|(start, end, f_start, f_end)| {
                let seg = Segment {
                    start,
                    end,
                    f_start,
                    f_end,
                    cum_before: cum,
                };
                cum += 0.5 * (end - start) * (f_start + f_end);
                seg
            })
            .collect();
        if !cum.is_finite() {
            return Err(ModelError::invalid(
                "profile",
                "thrust integral is not finite",
            ));
        }
        Ok(ThrustProfile {
            spec,
            segments,
            total: cum,
        })
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn tau(&self) -> f64 {
        match self.spec {
            ProfileSpec::Constant { tau, .. }
            | ProfileSpec::LinearRamp { tau, .. }
            | ProfileSpec::Tabulated { tau, .. } => tau,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.spec, ProfileSpec::Constant { .. })
    }

    /// `f(t)` with `t` taken modulo `tau`.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = t.rem_euclid(self.tau());
        self.segment_for(x).value_at(x)
    }

    /// Integral of `f` over one full period.
    pub fn period_integral(&self) -> f64 {
        self.total
    }

    /// `f_n = (1/tau) * integral of f over [0, tau)`.
    pub fn nominal(&self) -> f64 {
        self.total / self.tau()
    }

    /// Integral of the periodic extension of `f` over `[a, b]`, `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if let ProfileSpec::Constant { value, .. } = self.spec {
            return value * (b - a);
        }
        self.periodic_antiderivative(b) - self.periodic_antiderivative(a)
    }

    fn periodic_antiderivative(&self, x: f64) -> f64 {
        let tau = self.tau();
        let periods = (x / tau).floor();
        let mut local = x - periods * tau;
        if local >= tau {
            local = tau;
        } else if local < 0.0 {
            local = 0.0;
        }
        periods * self.total + self.segment_for(local).integral_to(local)
    }

    fn segment_for(&self, x: f64) -> &Segment {
        let idx = self.segments.partition_point(|s| s.end <= x);
        &self.segments[idx.min(self.segments.len() - 1)]
    }
}

impl TryFrom<ProfileSpec> for ThrustProfile {
    type Error = ModelError;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        ThrustProfile::from_spec(spec)
    }
}

impl From<ThrustProfile> for ProfileSpec {
    fn from(profile: ThrustProfile) -> Self {
        profile.spec
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(ModelError::invalid(
            "profile.tau",
            format!("must be finite and > 0, got {tau}"),
        ))
    }
}

fn check_finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::invalid(
            field,
            format!("must be finite, got {v}"),
        ))
    }
}

/// Breaks a periodic knot list into segments covering `[0, tau]`.
fn tabulated_segments(tau: f64, points: &[[f64; 2]]) -> Result<Vec<(f64, f64, f64, f64)>> {
    if points.is_empty() {
        return Err(ModelError::invalid(
            "profile.points",
            "at least one knot is required",
        ));
    }
    for (i, &[t, f]) in points.iter().enumerate() {
        if !(t.is_finite() && f.is_finite()) {
            return Err(ModelError::invalid(
                "profile.points",
                format!("knot {i} is not finite"),
            ));
        }
        if !(0.0..tau).contains(&t) {
            return Err(ModelError::invalid(
                "profile.points",
                format!("knot {i} offset {t} outside [0, {tau})"),
            ));
        }
        if i > 0 && t <= points[i - 1][0] {
            return Err(ModelError::invalid(
                "profile.points",
                format!("offsets must be strictly increasing (knot {i})"),
            ));
        }
    }
    let [t_first, f_first] = points[0];
    let [t_last, f_last] = points[points.len() - 1];
    // value at the period boundary, interpolated across the wrap
    let span = t_first + tau - t_last;
    let f_boundary = f_last + (f_first - f_last) * (tau - t_last) / span;

    let mut segs = Vec::with_capacity(points.len() + 1);
    if t_first > 0.0 {
        segs.push((0.0, t_first, f_boundary, f_first));
    }
    for w in points.windows(2) {
        segs.push((w[0][0], w[1][0], w[0][1], w[1][1]));
    }
    segs.push((t_last, tau, f_last, f_boundary));
    Ok(segs)
}

/// Nominal (flat-terrain) average thrust `f_n`.
pub fn nominal_thrust(profile: &ThrustProfile) -> f64 {
    profile.nominal()
}

/// Effective-viscous drag: cycle-averaged velocity is `f / gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DragModel {
    gamma: f64,
}

impl DragModel {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(DragModel { gamma })
        } else {
            Err(ModelError::invalid(
                "gamma",
                format!("must be finite and > 0, got {gamma}"),
            ))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn velocity(&self, thrust: f64) -> f64 {
        thrust / self.gamma
    }
}

impl TryFrom<f64> for DragModel {
    type Error = ModelError;

    fn try_from(gamma: f64) -> Result<Self> {
        DragModel::new(gamma)
    }
}

impl From<DragModel> for f64 {
    fn from(d: DragModel) -> f64 {
        d.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSpec {
    b: f64,
    #[serde(default = "enabled_default")]
    enabled: bool,
}

fn enabled_default() -> bool {
    true
}

/// Contact-noise level `b` (probability of complete bac loss).
///
/// A disabled model produces the nominal bac `(c1 = 0, tau_u = tau)` without
/// consuming randomness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseSpec", into = "NoiseSpec")]
pub struct NoiseModel {
    b: f64,
    enabled: bool,
}

impl NoiseModel {
    pub fn new(b: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&b) {
            Ok(NoiseModel { b, enabled: true })
        } else {
            Err(ModelError::invalid(
                "noise.b",
                format!("must lie in [0, 1], got {b}"),
            ))
        }
    }

    pub fn disabled() -> Self {
        NoiseModel {
            b: 0.0,
            enabled: false,
        }
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// CDF `G` of the realized duration.
    pub fn cdf(&self, tau_u: f64, tau: f64) -> f64 {
        if tau_u < 0.0 {
            0.0
        } else if tau_u >= tau {
            1.0
        } else {
            (1.0 - self.b) * tau_u / tau + self.b
        }
    }
}

impl TryFrom<NoiseSpec> for NoiseModel {
    type Error = ModelError;

    fn try_from(spec: NoiseSpec) -> Result<Self> {
        let mut model = NoiseModel::new(spec.b)?;
        model.enabled = spec.enabled;
        Ok(model)
    }
}

impl From<NoiseModel> for NoiseSpec {
    fn from(n: NoiseModel) -> Self {
        NoiseSpec {
            b: n.b,
            enabled: n.enabled,
        }
    }
}

/// Inverse of `G` for `u` in `[0, 1)`: zero inside the atom, linear above it.
pub fn quantile_tau_u(noise: &NoiseModel, u: f64, tau: f64) -> f64 {
    let b = noise.b();
    if u < b || b >= 1.0 {
        0.0
    } else {
        tau * (u - b) / (1.0 - b)
    }
}

/// One realized bac.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacOutcome {
    pub c1: f64,
    pub tau_u: f64,
    /// Thrust integrated over the realized contact window.
    pub f_u: f64,
    /// Disturbed average thrust `sign(tau_u) f_u / tau_u`.
    pub f_hat: f64,
}

impl BacOutcome {
    /// Outcome for a contact window `[c1, c1 + tau_u]`, wrapping past `tau`.
    pub fn from_window(profile: &ThrustProfile, c1: f64, tau_u: f64) -> Result<Self> {
        let tau = profile.tau();
        if !(0.0..tau).contains(&c1) {
            return Err(ModelError::invalid(
                "c1",
                format!("must lie in [0, {tau}), got {c1}"),
            ));
        }
        if !(0.0..=tau).contains(&tau_u) {
            return Err(ModelError::invalid(
                "tau_u",
                format!("must lie in [0, {tau}], got {tau_u}"),
            ));
        }
        Ok(Self::window_unchecked(profile, c1, tau_u))
    }

    fn window_unchecked(profile: &ThrustProfile, c1: f64, tau_u: f64) -> Self {
        if tau_u > 0.0 && profile.is_constant() {
            let value = profile.value_at(0.0);
            BacOutcome {
                c1,
                tau_u,
                f_u: value * tau_u,
                f_hat: value,
            }
        } else if tau_u > 0.0 {
            let f_u = profile.integral(c1, c1 + tau_u);
            BacOutcome {
                c1,
                tau_u,
                f_u,
                f_hat: f_u / tau_u,
            }
        } else {
            BacOutcome {
                c1,
                tau_u: 0.0,
                f_u: 0.0,
                f_hat: 0.0,
            }
        }
    }

    /// The undisturbed bac.
    pub fn nominal(profile: &ThrustProfile) -> Self {
        let tau = profile.tau();
        let f_n = profile.nominal();
        BacOutcome {
            c1: 0.0,
            tau_u: tau,
            f_u: f_n * tau,
            f_hat: f_n,
        }
    }

    pub fn is_lost(&self) -> bool {
        self.tau_u <= 0.0
    }

    /// Contact coefficient `c(t)` for `t` measured from the start of this
    /// bac, over `[0, 2 tau)` so the carried-over part is visible.
    pub fn coefficient(&self, t: f64, tau: f64) -> f64 {
        if self.tau_u > 0.0 && t >= self.c1 && t <= self.c1 + self.tau_u {
            tau / self.tau_u
        } else {
            0.0
        }
    }
}

/// Draws one bac: `c1` first, then `tau_u` by inverse CDF.
pub fn sample_bac<R: Rng + ?Sized>(
    profile: &ThrustProfile,
    noise: &NoiseModel,
    rng: &mut R,
) -> BacOutcome {
    if !noise.enabled() {
        return BacOutcome::nominal(profile);
    }
    let tau = profile.tau();
    let c1 = tau * rng.gen::<f64>();
    let tau_u = quantile_tau_u(noise, rng.gen::<f64>(), tau);
    // c1 can round up to tau when tau is not a power of two
    let c1 = if c1 >= tau { 0.0 } else { c1 };
    BacOutcome::window_unchecked(profile, c1, tau_u)
}

/// Thrust profile, drag and noise bundled: everything needed to sample transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportModel {
    pub profile: ThrustProfile,
    pub drag: DragModel,
    pub noise: NoiseModel,
}

impl TransportModel {
    pub fn new(profile: ThrustProfile, drag: DragModel, noise: NoiseModel) -> Self {
        TransportModel {
            profile,
            drag,
            noise,
        }
    }

    /// Nominal velocity `f_n / gamma`.
    pub fn v_open(&self) -> f64 {
        self.drag.velocity(self.profile.nominal())
    }

    /// Duration of one gait period (one bac per module per period).
    pub fn period(&self) -> f64 {
        self.profile.tau()
    }

    /// Nominal displacement per period.
    pub fn nominal_step(&self) -> f64 {
        self.v_open() * self.period()
    }

    pub fn with_noise(&self, noise: NoiseModel) -> Self {
        TransportModel {
            noise,
            ..self.clone()
        }
    }

    pub fn sample_bac<R: Rng + ?Sized>(&self, rng: &mut R) -> BacOutcome {
        sample_bac(&self.profile, &self.noise, rng)
    }
}

/// Bac outcomes over `periods x modules`, stored period-major (`i * modules + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeGrid {
    periods: usize,
    modules: usize,
    outcomes: Vec<BacOutcome>,
}

impl OutcomeGrid {
    pub fn new(periods: usize, modules: usize, outcomes: Vec<BacOutcome>) -> Result<Self> {
        if periods == 0 || modules == 0 {
            return Err(ModelError::invalid(
                "grid",
                "periods and modules must be >= 1",
            ));
        }
        if outcomes.len() != periods * modules {
            return Err(ModelError::invalid(
                "grid",
                format!(
                    "expected {} outcomes, got {}",
                    periods * modules,
                    outcomes.len()
                ),
            ));
        }
        Ok(OutcomeGrid {
            periods,
            modules,
            outcomes,
        })
    }

    /// Draws the grid in fixed (period, module) order.
    pub fn sample<R: Rng + ?Sized>(
        profile: &ThrustProfile,
        noise: &NoiseModel,
        periods: usize,
        modules: usize,
        rng: &mut R,
    ) -> Self {
        let outcomes = (0..periods * modules)
            .map(|_| sample_bac(profile, noise, rng))
            .collect();
        OutcomeGrid {
            periods,
            modules,
            outcomes,
        }
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn modules(&self) -> usize {
        self.modules
    }

    pub fn get(&self, period: usize, module: usize) -> &BacOutcome {
        &self.outcomes[period * self.modules + module]
    }

    /// All module outcomes of one period.
    pub fn period(&self, period: usize) -> &[BacOutcome] {
        &self.outcomes[period * self.modules..(period + 1) * self.modules]
    }

    pub fn outcomes(&self) -> &[BacOutcome] {
        &self.outcomes
    }
}

/// Binary contact pattern over a (module, time-slot) grid; 1 denotes contact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BacSequence {
    modules: usize,
    periods: usize,
    resolution: usize,
    bits: Vec<u8>,
}

impl BacSequence {
    /// The desired pattern: every bac spans its full period.
    pub fn desired(modules: usize, periods: usize, resolution: usize) -> Self {
        BacSequence {
            modules,
            periods,
            resolution,
            bits: vec![1; modules * periods * resolution],
        }
    }

    pub fn modules(&self) -> usize {
        self.modules
    }

    pub fn slots_per_module(&self) -> usize {
        self.periods * self.resolution
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Contact row for one module.
    pub fn row(&self, module: usize) -> &[u8] {
        let w = self.slots_per_module();
        &self.bits[module * w..(module + 1) * w]
    }

    /// Fraction of slots in contact.
    pub fn contact_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / self.bits.len() as f64
    }
}

/// Marks each slot whose interval overlaps the realized contact window.
///
/// Windows run on a per-module timeline of `periods * tau`; carried-over
/// contact lands in the next period, and the last period wraps to the first.
pub fn discretize(grid: &OutcomeGrid, tau: f64, resolution: usize) -> Result<BacSequence> {
    if resolution == 0 {
        return Err(ModelError::invalid("resolution", "must be >= 1"));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(ModelError::invalid(
            "tau",
            format!("must be > 0, got {tau}"),
        ));
    }
    const OVERLAP_EPS: f64 = 1e-9;
    let width = grid.periods * resolution;
    let mut bits = vec![0u8; grid.modules * width];
    let scale = resolution as f64 / tau;
    for i in 0..grid.periods {
        for j in 0..grid.modules {
            let o = grid.get(i, j);
            if o.is_lost() {
                continue;
            }
            let start = (i * resolution) as f64 + o.c1 * scale;
            let end = start + o.tau_u * scale;
            let first = start.floor() as usize;
            let last = end.ceil() as usize;
            for k in first..last.max(first + 1) {
                let overlap = end.min((k + 1) as f64) - start.max(k as f64);
                if overlap > OVERLAP_EPS {
                    bits[j * width + k % width] = 1;
                }
            }
        }
    }
    Ok(BacSequence {
        modules: grid.modules,
        periods: grid.periods,
        resolution,
        bits,
    })
}
