//! Closed drive-polarization loops on the Poincaré sphere and their time
//! schedules.
//!
//! A path is a list of `(θ, φ)` knots joined by legs that are linear in
//! `(θ, φ)`, each with its own duration. `φ` is stored unwrapped so that a
//! full turn of azimuth is representable; closure is judged on the sphere.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Polarization};

/// Largest endpoint mismatch (chord length) accepted as closed.
pub const CLOSURE_TOL: f64 = 1e-12;

/// Default split of the loop time over the descent, azimuthal sweep and return legs.
pub const DEFAULT_LEG_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.25];

/// Trapezoid panels per leg used by [`solid_angle`].
pub const QUADRATURE_PANELS: usize = 256;

/// Schedules with `max rate / λ` above this are flagged non-adiabatic.
pub const ADIABATIC_RATIO_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathKind {
    /// Pole → `θ₀` along `φ = 0`, full azimuthal turn at `θ₀`, back to the pole.
    Lasso { theta0: f64 },
    Piecewise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSpec {
    kind: PathKind,
    knots: Vec<Polarization>,
    durations: Vec<f64>,
}

/// Opening angle of the polar cap with area `gamma`: `θ₀ = arccos(1 − γ/2π)`.
pub fn cap_angle(gamma: f64) -> f64 {
    (1.0 - gamma / (2.0 * PI)).clamp(-1.0, 1.0).acos()
}

/// Lasso loop enclosing the polar cap of solid angle `gamma_target`.
pub fn lasso_path(gamma_target: f64, total_time: f64, leg_fractions: [f64; 3]) -> Result<PathSpec> {
    if !(0.0..4.0 * PI).contains(&gamma_target) {
        return Err(Error::range("gamma", alloc::format!("{gamma_target} outside [0, 4π)")));
    }
    if leg_fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::range("leg fractions", alloc::format!("{leg_fractions:?} must be positive")));
    }
    let sum: f64 = leg_fractions.iter().sum();
    let theta0 = cap_angle(gamma_target);
    let knots = alloc::vec![
        Polarization::new(0.0, 0.0),
        Polarization::new(theta0, 0.0),
        Polarization::new(theta0, 2.0 * PI),
        Polarization::new(0.0, 2.0 * PI),
    ];
    let durations = leg_fractions.iter().map(|f| total_time * f / sum).collect();
    PathSpec::build(PathKind::Lasso { theta0 }, knots, durations)
}

/// Closed polygon in `(θ, φ)`; `durations[i]` is the time spent from knot `i` to `i + 1`.
pub fn piecewise_path(knots: Vec<Polarization>, durations: Vec<f64>) -> Result<PathSpec> {
    PathSpec::build(PathKind::Piecewise, knots, durations)
}

impl PathSpec {
    fn build(kind: PathKind, knots: Vec<Polarization>, durations: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || durations.len() + 1 != knots.len() {
            return Err(Error::range(
                "path",
                alloc::format!("{} knots need {} leg durations, got {}", knots.len(), knots.len().saturating_sub(1), durations.len()),
            ));
        }
        if let Some(k) = knots.iter().find(|k| !(0.0..=PI).contains(&k.theta) || !k.phi.is_finite()) {
            return Err(Error::range("knot", alloc::format!("{k:?}")));
        }
        if durations.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::range("leg duration", alloc::format!("{durations:?} must be positive")));
        }
        let gap = knots[0].distance(knots.last().unwrap());
        if gap > CLOSURE_TOL {
            return Err(Error::OpenPath { gap });
        }
        Ok(PathSpec { kind, knots, durations })
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn knots(&self) -> &[Polarization] {
        &self.knots
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn total_time(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn start(&self) -> Polarization {
        self.knots[0]
    }

    /// Same geometry with every leg rescaled so the loop lasts `total_time`.
    pub fn with_total_time(&self, total_time: f64) -> Result<Self> {
        let scale = total_time / self.total_time();
        let durations = self.durations.iter().map(|d| d * scale).collect();
        Self::build(self.kind, self.knots.clone(), durations)
    }

    /// The loop traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut knots = self.knots.clone();
        knots.reverse();
        let mut durations = self.durations.clone();
        durations.reverse();
        PathSpec { kind: PathKind::Piecewise, knots, durations }
    }

    /// `self` followed by `next`; `next` must start where `self` ends. The
    /// azimuth of `next` is shifted by a multiple of 2π to stay continuous.
    pub fn then(&self, next: &PathSpec) -> Result<Self> {
        let end = *self.knots.last().unwrap();
        let gap = end.distance(&next.knots[0]);
        if gap > CLOSURE_TOL {
            return Err(Error::OpenPath { gap });
        }
        let turns = ((end.phi - next.knots[0].phi) / (2.0 * PI)).round();
        let shift = turns * 2.0 * PI;
        let mut knots = self.knots.clone();
        knots.extend(next.knots[1..].iter().map(|k| Polarization::new(k.theta, k.phi + shift)));
        let mut durations = self.durations.clone();
        durations.extend_from_slice(&next.durations);
        Self::build(PathKind::Piecewise, knots, durations)
    }
}

/// `∫ (1 − cos θ) dφ` along one linear leg by the composite trapezoid rule.
fn leg_area(a: Polarization, b: Polarization, panels: usize) -> f64 {
    let dphi = b.phi - a.phi;
    if dphi == 0.0 {
        return 0.0;
    }
    let f = |s: f64| 1.0 - (a.theta + s * (b.theta - a.theta)).cos();
    let h = 1.0 / panels as f64;
    let inner: f64 = (1..panels).map(|k| f(k as f64 * h)).sum();
    dphi * h * (0.5 * (f(0.0) + f(1.0)) + inner)
}

/// Enclosed solid angle `γ = ∮ (1 − cos θ) dφ`, positive for loops that
/// circle the `θ = 0` pole with increasing `φ`.
pub fn solid_angle(path: &PathSpec) -> f64 {
    solid_angle_with_panels(path, QUADRATURE_PANELS)
}

pub fn solid_angle_with_panels(path: &PathSpec, panels: usize) -> f64 {
    let panels = panels.max(1);
    path.knots.windows(2).map(|w| leg_area(w[0], w[1], panels)).sum()
}

/// Closed-form `2π(1 − cos θ₀)` of a lasso loop.
pub fn lasso_solid_angle(theta0: f64) -> f64 {
    2.0 * PI * (1.0 - theta0.cos())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleKnot {
    pub t: f64,
    pub theta: f64,
    pub phi: f64,
}

impl ScheduleKnot {
    pub fn polarization(&self) -> Polarization {
        Polarization::new(self.theta, self.phi)
    }
}

/// Time-sampled drive polarization, piecewise linear in `(θ, φ)` between knots.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    knots: Vec<ScheduleKnot>,
    max_rate: f64,
}

/// Samples each leg of `path` uniformly in time with `samples_per_leg` points
/// (endpoints included, shared between adjacent legs).
pub fn make_schedule(path: &PathSpec, samples_per_leg: usize) -> Result<Schedule> {
    if samples_per_leg < 2 {
        return Err(Error::range("samples_per_leg", alloc::format!("{samples_per_leg} < 2")));
    }
    let mut knots = Vec::with_capacity(path.durations.len() * (samples_per_leg - 1) + 1);
    let mut t0 = 0.0;
    for (leg, w) in path.knots.windows(2).enumerate() {
        let dur = path.durations[leg];
        let first = if leg == 0 { 0 } else { 1 };
        for k in first..samples_per_leg {
            let s = k as f64 / (samples_per_leg - 1) as f64;
            knots.push(ScheduleKnot {
                t: t0 + s * dur,
                theta: w[0].theta + s * (w[1].theta - w[0].theta),
                phi: w[0].phi + s * (w[1].phi - w[0].phi),
            });
        }
        t0 += dur;
    }
    Ok(Schedule::from_knots_unchecked(knots))
}

impl Schedule {
    /// Fixed polarization for `duration` ms (zero allowed).
    pub fn constant(pol: Polarization, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::range("duration", alloc::format!("{duration}")));
        }
        let k = |t| ScheduleKnot { t, theta: pol.theta, phi: pol.phi };
        let knots = if duration > 0.0 { alloc::vec![k(0.0), k(duration)] } else { alloc::vec![k(0.0)] };
        Ok(Self::from_knots_unchecked(knots))
    }

    /// Builds from explicit knots; times must start at 0 and increase strictly.
    pub fn from_knots(knots: Vec<ScheduleKnot>) -> Result<Self> {
        if knots.is_empty() || knots[0].t != 0.0 {
            return Err(Error::range("schedule", "must start at t = 0"));
        }
        if knots.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::range("schedule", "times must increase strictly"));
        }
        if knots.iter().any(|k| !(0.0..=PI).contains(&k.theta) || !k.phi.is_finite()) {
            return Err(Error::range("schedule", "θ outside [0, π] or non-finite φ"));
        }
        Ok(Self::from_knots_unchecked(knots))
    }

    fn from_knots_unchecked(knots: Vec<ScheduleKnot>) -> Self {
        let max_rate = knots
            .windows(2)
            .map(|w| {
                let dt = w[1].t - w[0].t;
                let dtheta = w[1].theta - w[0].theta;
                let sin_mid = ((w[0].theta + w[1].theta) / 2.0).sin();
                let dphi = (w[1].phi - w[0].phi) * sin_mid;
                (dtheta * dtheta + dphi * dphi).sqrt() / dt
            })
            .fold(0.0, f64::max);
        Schedule { knots, max_rate }
    }

    pub fn knots(&self) -> &[ScheduleKnot] {
        &self.knots
    }

    pub fn duration(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.t)
    }

    pub fn start(&self) -> Polarization {
        self.knots[0].polarization()
    }

    pub fn end(&self) -> Polarization {
        self.knots.last().unwrap().polarization()
    }

    pub fn is_closed(&self) -> bool {
        self.start().distance(&self.end()) <= CLOSURE_TOL
    }

    /// Largest angular speed on the sphere over the schedule, rad/ms.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    /// `max rate / λ`; small values justify adiabatic following.
    pub fn adiabaticity_ratio(&self, params: &ModelParams) -> f64 {
        self.max_rate / params.lambda()
    }

    pub fn is_adiabatic(&self, params: &ModelParams) -> bool {
        self.adiabaticity_ratio(params) <= ADIABATIC_RATIO_LIMIT
    }

    /// Polarization at time `t`, clamped to the schedule's time range.
    pub fn at(&self, t: f64) -> Polarization {
        let k = &self.knots;
        if t <= k[0].t || k.len() == 1 {
            return k[0].polarization();
        }
        if t >= k[k.len() - 1].t {
            return k[k.len() - 1].polarization();
        }
        let i = k.partition_point(|x| x.t <= t) - 1;
        let (a, b) = (k[i], k[i + 1]);
        let s = (t - a.t) / (b.t - a.t);
        Polarization::new(a.theta + s * (b.theta - a.theta), a.phi + s * (b.phi - a.phi))
    }

    /// Portion between `t0` and `t1`, re-based to start at zero.
    pub fn slice(&self, t0: f64, t1: f64) -> Result<Self> {
        if !(0.0 <= t0 && t0 <= t1 && t1 <= self.duration()) {
            return Err(Error::range("slice", alloc::format!("[{t0}, {t1}] outside [0, {}]", self.duration())));
        }
        let knot = |t: f64| {
            let p = self.at(t);
            ScheduleKnot { t: t - t0, theta: p.theta, phi: p.phi }
        };
        let mut knots = alloc::vec![knot(t0)];
        knots.extend(self.knots.iter().filter(|k| k.t > t0 && k.t < t1).map(|k| knot(k.t)));
        if t1 > t0 {
            knots.push(knot(t1));
        }
        Ok(Self::from_knots_unchecked(knots))
    }

    /// Trapezoid estimate of `∮ (1 − cos θ) dφ` over the sampled knots.
    pub fn solid_angle(&self) -> Result<f64> {
        if !self.is_closed() {
            return Err(Error::OpenPath { gap: self.start().distance(&self.end()) });
        }
        Ok(self
            .knots
            .windows(2)
            .map(|w| 0.5 * ((1.0 - w[0].theta.cos()) + (1.0 - w[1].theta.cos())) * (w[1].phi - w[0].phi))
            .sum())
    }
}
