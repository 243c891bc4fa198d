//! Ramsey interferometry on the cavity-traversing atom.
//!
//! The atom enters in `(|1⟩ + |2⟩)/√2` with a chosen field in mode `+` and
//! vacuum in mode `−`, interacts while the drive polarization runs around a
//! loop, then receives a second π/2 pulse with relative phase `ξ` before the
//! population of `|2⟩` is read out. Shifts are always quoted relative to the
//! caliber fringe, which skips the interaction entirely.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::dynamics::{default_dt, evolve, propagate_frozen, StepStats, TrajectorySample};
use crate::error::{Error, Result};
use crate::hilbert::{coherent_amplitudes, AtomLevel, BasisLabel, SpaceConfig, StateVector, C64, ONE, ZERO};
use crate::model::ModelParams;
use crate::phases::{ideal_phase_map, linear_regression, wrap_phase, Scheme, CYCLICITY_FLOOR};
use crate::poincare_path::{lasso_solid_angle, make_schedule, solid_angle, PathKind, PathSpec, Schedule};

/// Default number of Ramsey phases, spread uniformly over `[0, 2π)`.
pub const DEFAULT_XI_POINTS: usize = 16;

/// Default tolerance on the discarded Poisson tail of a coherent input.
pub const DEFAULT_TAIL_TOL: f64 = 1e-5;

/// RMS fit residual above which a fringe is flagged.
pub const FIT_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CavityInput {
    Fock(usize),
    Coherent(C64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RamseyMode {
    /// Schrödinger evolution along the loop, followed by a frozen-drive
    /// backward propagation that removes the dynamical phase.
    #[default]
    FullDynamics,
    /// Adiabatic-limit phases applied directly through [`ideal_phase_map`].
    IdealPhase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RamseyConfig {
    pub space: SpaceConfig,
    pub params: ModelParams,
    pub cavity: CavityInput,
    pub tail_tol: f64,
    pub path: PathSpec,
    /// Stretch the loop time to the nearest whole number (≥ 1) of vacuum Rabi cycles.
    pub round_to_rabi: bool,
    pub samples_per_leg: usize,
    pub xi_grid: Vec<f64>,
    pub mode: RamseyMode,
    pub scheme: Scheme,
    /// Integration step; `None` selects [`default_dt`].
    pub dt: Option<f64>,
    /// Keep every k-th integration step in [`RamseyResult::trajectory`].
    pub trajectory_stride: Option<usize>,
}

/// `n` phases `2πk/n`.
pub fn uniform_xi_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

impl RamseyConfig {
    pub fn new(space: SpaceConfig, params: ModelParams, cavity: CavityInput, path: PathSpec) -> Self {
        RamseyConfig {
            space,
            params,
            cavity,
            tail_tol: DEFAULT_TAIL_TOL,
            path,
            round_to_rabi: true,
            samples_per_leg: 64,
            xi_grid: uniform_xi_grid(DEFAULT_XI_POINTS),
            mode: RamseyMode::FullDynamics,
            scheme: Scheme::ReferenceArm,
            dt: None,
            trajectory_stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi_grid.len() < 3 || self.xi_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::range("xi grid", alloc::format!("need at least 3 finite phases, got {:?}", self.xi_grid)));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::range("tail_tol", alloc::format!("{} must be positive", self.tail_tol)));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::range("dt", alloc::format!("{dt} must be positive")));
            }
        }
        if self.trajectory_stride == Some(0) {
            return Err(Error::range("trajectory_stride", "must be at least 1"));
        }
        if self.samples_per_leg < 2 {
            return Err(Error::range("samples_per_leg", alloc::format!("{} < 2", self.samples_per_leg)));
        }
        if self.mode == RamseyMode::FullDynamics && self.scheme == Scheme::EnergyIntegral {
            return Err(Error::range("scheme", "energy-integral removal is ambiguous for superpositions; use the reference arm"));
        }
        Ok(())
    }

    /// The loop actually run, after optional Rabi-cycle rounding.
    pub fn effective_path(&self) -> Result<PathSpec> {
        if !self.round_to_rabi {
            return Ok(self.path.clone());
        }
        let period = self.params.rabi_period();
        let cycles = (self.path.total_time() / period).round().max(1.0);
        self.path.with_total_time(cycles * period)
    }

    /// Solid angle enclosed by the loop; exact for lassos.
    pub fn gamma(&self) -> f64 {
        match self.path.kind() {
            PathKind::Lasso { theta0 } => lasso_solid_angle(theta0),
            PathKind::Piecewise => solid_angle(&self.path),
        }
    }
}

/// `(|1⟩ + |2⟩)/√2 ⊗ |cavity⟩₊ ⊗ |0⟩₋`.
pub fn prepare(space: SpaceConfig, cavity: CavityInput, tail_tol: f64) -> Result<StateVector> {
    let plus = match cavity {
        CavityInput::Fock(n) => {
            if n > space.nmax_plus() {
                return Err(Error::range("Fock input", alloc::format!("n = {n} exceeds nmax = {}", space.nmax_plus())));
            }
            let mut v = vec![ZERO; n + 1];
            v[n] = ONE;
            v
        }
        CavityInput::Coherent(alpha) => coherent_amplitudes(alpha, space.nmax_plus(), tail_tol)?,
    };
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    StateVector::product(space, [h, h], &plus, &[ONE])
}

/// Second π/2 pulse, `|1⟩ → (|1⟩ + e^{iξ}|2⟩)/√2`, `|2⟩ → (−e^{−iξ}|1⟩ + |2⟩)/√2`,
/// followed by the probability of finding the atom in `|2⟩`.
pub fn close_and_detect(state: &StateVector, xi: f64) -> f64 {
    let space = state.space();
    let amps = state.amplitudes();
    let phase = C64::from_polar(1.0, xi);
    let mut p2 = 0.0;
    for n in 0..=space.nmax_plus() {
        for m in 0..=space.nmax_minus() {
            let a1 = amps[space.index_unchecked(BasisLabel::new(AtomLevel::Lower, n, m))];
            let a2 = amps[space.index_unchecked(BasisLabel::new(AtomLevel::Upper, n, m))];
            p2 += ((phase * a1 + a2) * FRAC_1_SQRT_2).norm_sqr();
        }
    }
    p2
}

/// `a + b·cos(ξ + Φ)` with `b ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Root-mean-square deviation of the samples from the fitted curve.
    pub residual: f64,
}

impl FringeFit {
    pub fn eval(&self, xi: f64) -> f64 {
        self.offset + self.amplitude * (xi + self.phase).cos()
    }
}

/// Linear least squares for `a + c₁cos ξ + c₂sin ξ`, reported as
/// `a + b·cos(ξ + Φ)` with `Φ = atan2(−c₂, c₁)`.
pub fn fit_fringe(xi: &[f64], p2: &[f64]) -> Result<FringeFit> {
    if xi.len() != p2.len() || xi.len() < 3 {
        return Err(Error::range("fringe", alloc::format!("{} phases vs {} samples", xi.len(), p2.len())));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for (&x, &y) in xi.iter().zip(p2) {
        let row = Vector3::new(1.0, x.cos(), x.sin());
        ata += row * row.transpose();
        atb += row * y;
    }
    let c = ata.lu().solve(&atb).ok_or_else(|| Error::range("fringe", "phases do not determine a sinusoid"))?;
    let fit = FringeFit { offset: c[0], amplitude: c[1].hypot(c[2]), phase: (-c[2]).atan2(c[1]), residual: 0.0 };
    let ss: f64 = xi.iter().zip(p2).map(|(&x, &y)| (y - fit.eval(x)).powi(2)).sum();
    Ok(FringeFit { residual: (ss / xi.len() as f64).sqrt(), ..fit })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RamseyFlags {
    pub non_adiabatic: bool,
    pub poor_fit: bool,
    /// Basis populations did not return: cyclicity below [`CYCLICITY_FLOOR`].
    pub non_cyclic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RamseyResult {
    pub xi: Vec<f64>,
    pub p2: Vec<f64>,
    pub caliber_p2: Vec<f64>,
    pub fit: FringeFit,
    pub caliber_fit: FringeFit,
    /// `wrap(Φ − Φ_caliber)`.
    pub fitted_shift: f64,
    pub gamma: f64,
    /// Loop time after rounding, ms.
    pub loop_time: f64,
    /// `λ T / 2π`.
    pub rabi_cycles: f64,
    pub adiabaticity_ratio: f64,
    /// `Σₖ |⟨k|ψ_prepared⟩| |⟨k|ψ_before closing⟩|` over bare basis states,
    /// 1 when every component comes back to itself whatever phase it picked up.
    pub cyclicity: f64,
    /// Integrator statistics; `None` in ideal-phase mode.
    pub stats: Option<StepStats>,
    pub flags: RamseyFlags,
    pub schedule: Schedule,
    /// Uncorrected states along the loop, when a stride was requested.
    pub trajectory: Vec<TrajectorySample>,
}

impl RamseyResult {
    /// The fitted fringe at `ξ = π`, where the caliber curve is dark.
    pub fn p2_dark(&self) -> f64 {
        self.fit.eval(PI)
    }
}

/// State just before the closing pulse.
struct Interaction {
    state: StateVector,
    stats: Option<StepStats>,
    trajectory: Vec<TrajectorySample>,
}

fn interact(cfg: &RamseyConfig, prepared: &StateVector, schedule: &Schedule) -> Result<Interaction> {
    match cfg.mode {
        RamseyMode::IdealPhase => Ok(Interaction { state: ideal_phase_map(prepared, cfg.gamma()), stats: None, trajectory: Vec::new() }),
        RamseyMode::FullDynamics => {
            let dt = cfg.dt.unwrap_or_else(|| default_dt(schedule));
            let tr = evolve(prepared, schedule, &cfg.params, dt, cfg.trajectory_stride.unwrap_or(usize::MAX))?;
            let state = propagate_frozen(tr.final_state(), &cfg.params, schedule.start(), -schedule.duration());
            let trajectory = if cfg.trajectory_stride.is_some() { tr.samples } else { Vec::new() };
            Ok(Interaction { state, stats: Some(tr.stats), trajectory })
        }
    }
}

pub fn run_experiment(cfg: &RamseyConfig) -> Result<RamseyResult> {
    cfg.validate()?;
    let path = cfg.effective_path()?;
    let schedule = make_schedule(&path, cfg.samples_per_leg)?;
    let prepared = prepare(cfg.space, cfg.cavity, cfg.tail_tol)?;
    let Interaction { state, stats, trajectory } = interact(cfg, &prepared, &schedule)?;

    let caliber_p2: Vec<f64> = cfg.xi_grid.iter().map(|&x| close_and_detect(&prepared, x)).collect();
    let p2: Vec<f64> = cfg.xi_grid.iter().map(|&x| close_and_detect(&state, x)).collect();
    let caliber_fit = fit_fringe(&cfg.xi_grid, &caliber_p2)?;
    let fit = fit_fringe(&cfg.xi_grid, &p2)?;
    let cyclicity: f64 = prepared.amplitudes().iter().zip(state.amplitudes()).map(|(a, b)| a.norm() * b.norm()).sum();
    let adiabaticity_ratio = schedule.adiabaticity_ratio(&cfg.params);

    Ok(RamseyResult {
        xi: cfg.xi_grid.clone(),
        fitted_shift: wrap_phase(fit.phase - caliber_fit.phase),
        gamma: cfg.gamma(),
        loop_time: path.total_time(),
        rabi_cycles: path.total_time() / cfg.params.rabi_period(),
        adiabaticity_ratio,
        cyclicity,
        stats,
        flags: RamseyFlags {
            non_adiabatic: cfg.mode == RamseyMode::FullDynamics && !schedule.is_adiabatic(&cfg.params),
            poor_fit: fit.residual > FIT_RESIDUAL_LIMIT,
            non_cyclic: cyclicity < CYCLICITY_FLOOR,
        },
        p2,
        caliber_p2,
        fit,
        caliber_fit,
        schedule,
        trajectory,
    })
}

/// `P₂ = (1 − cos(γ/4))/2` for a vacuum cavity, read at the caliber-dark phase.
pub fn p2_vacuum_formula(gamma: f64) -> f64 {
    0.5 * (1.0 - (gamma / 4.0).cos())
}

/// `P₂ = [(1 − e^{−|α|²})(1 − cos(γ/2)) + e^{−|α|²}(1 − cos(γ/4))]/2`.
pub fn p2_coherent_formula(alpha: C64, gamma: f64) -> f64 {
    let v = (-alpha.norm_sqr()).exp();
    0.5 * ((1.0 - v) * (1.0 - (gamma / 2.0).cos()) + v * (1.0 - (gamma / 4.0).cos()))
}

/// Full fringe implied by [`p2_vacuum_formula`]; equals it at `ξ = π`.
pub fn vacuum_fringe(gamma: f64, xi: f64) -> f64 {
    0.5 * (1.0 + (xi + gamma / 4.0).cos())
}

/// Full fringe implied by [`p2_coherent_formula`]; equals it at `ξ = π`.
pub fn coherent_fringe(alpha: C64, gamma: f64, xi: f64) -> f64 {
    let v = (-alpha.norm_sqr()).exp();
    (1.0 - v) * 0.5 * (1.0 + (xi + gamma / 2.0).cos()) + v * vacuum_fringe(gamma, xi)
}

/// Phase shift of [`coherent_fringe`] relative to the caliber fringe.
pub fn coherent_fringe_shift(alpha: C64, gamma: f64) -> f64 {
    let v = (-alpha.norm_sqr()).exp();
    (C64::from_polar(1.0 - v, gamma / 2.0) + C64::from_polar(v, gamma / 4.0)).arg()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaPoint {
    pub alpha: C64,
    pub shift: f64,
    pub formula_shift: f64,
    pub result: RamseyResult,
}

/// Fringe shift for each coherent amplitude in `alphas`, all other settings from `base`.
pub fn effective_shift_vs_alpha(base: &RamseyConfig, alphas: &[C64]) -> Result<Vec<AlphaPoint>> {
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = RamseyConfig { cavity: CavityInput::Coherent(alpha), ..base.clone() };
            let result = run_experiment(&cfg)?;
            Ok(AlphaPoint { alpha, shift: result.fitted_shift, formula_shift: coherent_fringe_shift(alpha, cfg.gamma()), result })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticityPoint {
    /// Requested loop time, ms.
    pub requested_time: f64,
    /// Loop time after rounding, ms.
    pub loop_time: f64,
    pub rabi_cycles: f64,
    pub adiabaticity_ratio: f64,
    /// `max_ξ |P₂(full dynamics) − P₂(ideal)|`.
    pub error: f64,
}

/// Compares full dynamics against the ideal phase map for each loop time.
pub fn adiabaticity_point(base: &RamseyConfig, loop_time: f64) -> Result<AdiabaticityPoint> {
    let path = base.path.with_total_time(loop_time)?;
    let full = run_experiment(&RamseyConfig { path: path.clone(), mode: RamseyMode::FullDynamics, ..base.clone() })?;
    let ideal = run_experiment(&RamseyConfig { path, mode: RamseyMode::IdealPhase, ..base.clone() })?;
    let error = full.p2.iter().zip(&ideal.p2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(AdiabaticityPoint {
        requested_time: loop_time,
        loop_time: full.loop_time,
        rabi_cycles: full.rabi_cycles,
        adiabaticity_ratio: full.adiabaticity_ratio,
        error,
    })
}

pub fn adiabaticity_study(base: &RamseyConfig, time_ladder: &[f64]) -> Result<Vec<AdiabaticityPoint>> {
    time_ladder.iter().map(|&t| adiabaticity_point(base, t)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderTrend {
    /// Errors strictly decrease as the loop time grows.
    pub monotone: bool,
    /// Slope of `ln error` against `ln T` over the three longest loops.
    pub tail_exponent: Option<f64>,
}

pub fn ladder_trend(points: &[AdiabaticityPoint]) -> LadderTrend {
    let mut sorted: Vec<&AdiabaticityPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.loop_time.total_cmp(&b.loop_time));
    let monotone = sorted.windows(2).all(|w| w[1].error < w[0].error);
    let tail_exponent = if sorted.len() >= 3 && sorted.iter().all(|p| p.error > 0.0) {
        let top = &sorted[sorted.len() - 3..];
        let x: Vec<f64> = top.iter().map(|p| p.loop_time.ln()).collect();
        let y: Vec<f64> = top.iter().map(|p| p.error.ln()).collect();
        linear_regression(&x, &y).ok().map(|f| f.slope)
    } else {
        None
    };
    LadderTrend { monotone, tail_exponent }
}
