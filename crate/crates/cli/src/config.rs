use std::f64::consts::PI;
use std::path::Path;

use cavity_berry::hilbert::{make_space, SpaceConfig, C64};
use cavity_berry::model::{ModelParams, Polarization};
use cavity_berry::poincare_path::{lasso_path, piecewise_path, PathSpec};
use cavity_berry::ramsey::{uniform_xi_grid, CavityInput, RamseyConfig, RamseyMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest cutoff accepted per mode; keeps the Hilbert space at desk scale.
pub const MAX_NMAX: usize = 64;
pub const MIN_XI_POINTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CavityKind {
    Fock,
    Coherent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    FullDynamics,
    IdealPhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopKind {
    Lasso,
    Piecewise,
}

/// Flat run configuration. Every key is optional in the file; missing keys
/// take the values of [`RunConfig::default`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `g/2π` in kHz.
    pub g_khz: f64,
    /// `Ω/2π` in kHz.
    pub omega_khz: f64,
    /// `δ / Ω`.
    pub delta_ratio: f64,
    pub nmax_plus: usize,
    pub nmax_minus: usize,
    pub tail_tol: f64,

    pub loop_kind: LoopKind,
    /// Lasso solid angle in units of π.
    pub gamma_over_pi: f64,
    /// Piecewise loop knots, θ and φ in units of π.
    pub knots_theta_over_pi: Vec<f64>,
    pub knots_phi_over_pi: Vec<f64>,
    /// Relative leg durations; three entries for a lasso, one per leg otherwise.
    pub leg_fractions: Vec<f64>,
    pub loop_time_ms: f64,
    pub round_to_rabi: bool,
    pub samples_per_leg: usize,

    pub cavity: CavityKind,
    pub fock_n: usize,
    pub alpha_re: f64,
    pub alpha_im: f64,

    pub xi_points: usize,
    pub mode: ModeName,
    /// Integration steps per loop, used when `dt_ms` is 0.
    pub steps: usize,
    /// Fixed integration step in ms; 0 derives it from `steps`.
    pub dt_ms: f64,
    /// Integration steps between trajectory samples.
    pub trajectory_stride: usize,

    /// Coherent amplitudes |α| for `alpha-sweep` (real, along the + mode).
    pub alphas: Vec<f64>,
    /// Requested loop times for `adiabaticity`.
    pub time_ladder_ms: Vec<f64>,
    /// `[n, m]` doublet labels for `dressed-phases`.
    pub dressed: Vec<[usize; 2]>,
    pub dressed_gammas_over_pi: Vec<f64>,
    /// Loop time for eigenstate transport, in vacuum Rabi periods.
    pub transport_rabi_cycles: f64,

    /// Reserved; every computation is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            g_khz: 50.0,
            omega_khz: 50.0,
            delta_ratio: 3.0,
            nmax_plus: 16,
            nmax_minus: 4,
            tail_tol: cavity_berry::ramsey::DEFAULT_TAIL_TOL,
            loop_kind: LoopKind::Lasso,
            gamma_over_pi: 1.0,
            knots_theta_over_pi: Vec::new(),
            knots_phi_over_pi: Vec::new(),
            leg_fractions: vec![0.25, 0.5, 0.25],
            loop_time_ms: 6.0,
            round_to_rabi: true,
            samples_per_leg: 64,
            cavity: CavityKind::Fock,
            fock_n: 0,
            alpha_re: 0.0,
            alpha_im: 0.0,
            xi_points: 16,
            mode: ModeName::FullDynamics,
            steps: cavity_berry::dynamics::DEFAULT_STEPS,
            dt_ms: 0.0,
            trajectory_stride: 100,
            alphas: vec![0.0, 0.5, 1.0, 2.0],
            time_ladder_ms: vec![0.6, 1.2, 2.4, 4.8],
            dressed: vec![[0, 0], [1, 0]],
            dressed_gammas_over_pi: vec![0.5, 1.0, 1.5],
            transport_rabi_cycles: 400.0,
            seed: 0,
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

fn check(ok: bool, field: &str, msg: impl std::fmt::Display) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, msg))
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn solid_angle_ok(v: f64) -> bool {
    (0.0..4.0).contains(&v)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().and_then(|s| text[..s.start].lines().count().checked_sub(1).map(|i| (i, s)));
            match line {
                Some((i, s)) if !text[s.clone()].starts_with('\n') => {
                    let src = text.lines().nth(i).unwrap_or("").trim();
                    CliError::Validation(format!("config line {}: `{src}`: {}", i + 1, e.message()))
                }
                _ => CliError::Validation(format!("config: {}", e.message())),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolved configuration as TOML, one key per line, in declaration order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check(positive(self.g_khz), "g_khz", format!("{} must be positive", self.g_khz))?;
        check(positive(self.omega_khz), "omega_khz", format!("{} must be positive", self.omega_khz))?;
        check(positive(self.delta_ratio), "delta_ratio", format!("{} must be positive", self.delta_ratio))?;
        check(self.nmax_plus <= MAX_NMAX, "nmax_plus", format!("{} exceeds {MAX_NMAX}", self.nmax_plus))?;
        check(self.nmax_minus <= MAX_NMAX, "nmax_minus", format!("{} exceeds {MAX_NMAX}", self.nmax_minus))?;
        check(self.tail_tol > 0.0 && self.tail_tol < 1.0, "tail_tol", format!("{} must lie in (0, 1)", self.tail_tol))?;
        check(solid_angle_ok(self.gamma_over_pi), "gamma_over_pi", format!("{} outside [0, 4)", self.gamma_over_pi))?;
        check(positive(self.loop_time_ms), "loop_time_ms", format!("{} must be positive", self.loop_time_ms))?;
        check(self.samples_per_leg >= 2, "samples_per_leg", format!("{} < 2", self.samples_per_leg))?;
        check(self.leg_fractions.iter().all(|f| positive(*f)), "leg_fractions", "entries must be positive")?;
        match self.loop_kind {
            LoopKind::Lasso => check(self.leg_fractions.len() == 3, "leg_fractions", "a lasso has exactly three legs")?,
            LoopKind::Piecewise => {
                let k = self.knots_theta_over_pi.len();
                check(k >= 2, "knots_theta_over_pi", "need at least two knots")?;
                check(self.knots_phi_over_pi.len() == k, "knots_phi_over_pi", format!("expected {k} entries"))?;
                check(self.leg_fractions.len() + 1 == k, "leg_fractions", format!("expected {} entries, one per leg", k - 1))?;
                check(
                    self.knots_theta_over_pi.iter().all(|t| (0.0..=1.0).contains(t)),
                    "knots_theta_over_pi",
                    "entries must lie in [0, 1]",
                )?;
                check(self.knots_phi_over_pi.iter().all(|p| p.is_finite()), "knots_phi_over_pi", "entries must be finite")?;
            }
        }
        if self.cavity == CavityKind::Fock {
            check(self.fock_n <= self.nmax_plus, "fock_n", format!("{} exceeds nmax_plus = {}", self.fock_n, self.nmax_plus))?;
        }
        check(self.alpha_re.is_finite() && self.alpha_im.is_finite(), "alpha_re/alpha_im", "must be finite")?;
        check(self.xi_points >= MIN_XI_POINTS, "xi_points", format!("{} < {MIN_XI_POINTS}", self.xi_points))?;
        check(self.steps >= 1, "steps", "must be at least 1")?;
        check(self.dt_ms == 0.0 || positive(self.dt_ms), "dt_ms", format!("{} must be 0 or positive", self.dt_ms))?;
        check(self.trajectory_stride >= 1, "trajectory_stride", "must be at least 1")?;
        check(!self.alphas.is_empty(), "alphas", "must not be empty")?;
        check(self.alphas.iter().all(|a| a.is_finite() && *a >= 0.0), "alphas", "entries must be finite and non-negative")?;
        check(!self.time_ladder_ms.is_empty(), "time_ladder_ms", "must not be empty")?;
        check(self.time_ladder_ms.iter().all(|t| positive(*t)), "time_ladder_ms", "entries must be positive")?;
        check(!self.dressed.is_empty(), "dressed", "must not be empty")?;
        for &[n, m] in &self.dressed {
            check(
                n < self.nmax_plus && m <= self.nmax_minus,
                "dressed",
                format!("doublet ({n}, {m}) needs nmax_plus > {n} and nmax_minus >= {m}"),
            )?;
        }
        check(!self.dressed_gammas_over_pi.is_empty(), "dressed_gammas_over_pi", "must not be empty")?;
        check(self.dressed_gammas_over_pi.iter().all(|g| solid_angle_ok(*g)), "dressed_gammas_over_pi", "entries outside [0, 4)")?;
        check(positive(self.transport_rabi_cycles), "transport_rabi_cycles", "must be positive")?;

        // Module preconditions: build everything once so failures surface
        // before any computation starts.
        let base = self.ramsey()?;
        base.validate().map_err(|e| core_error("ramsey", e))?;
        cavity_berry::ramsey::prepare(base.space, base.cavity, base.tail_tol).map_err(|e| core_error("cavity", e))?;
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::from_khz(self.g_khz, self.omega_khz, self.delta_ratio).map_err(|e| core_error("model", e))
    }

    pub fn space(&self) -> SpaceConfig {
        make_space(self.nmax_plus, self.nmax_minus)
    }

    pub fn alpha(&self) -> C64 {
        C64::new(self.alpha_re, self.alpha_im)
    }

    pub fn cavity_input(&self) -> CavityInput {
        match self.cavity {
            CavityKind::Fock => CavityInput::Fock(self.fock_n),
            CavityKind::Coherent => CavityInput::Coherent(self.alpha()),
        }
    }

    pub fn path(&self) -> Result<PathSpec, CliError> {
        self.path_with(self.gamma_over_pi * PI, self.loop_time_ms)
    }

    pub fn path_with(&self, gamma: f64, total_time: f64) -> Result<PathSpec, CliError> {
        let sum: f64 = self.leg_fractions.iter().sum();
        match self.loop_kind {
            LoopKind::Lasso => {
                let f = [self.leg_fractions[0], self.leg_fractions[1], self.leg_fractions[2]];
                lasso_path(gamma, total_time, f).map_err(|e| core_error("loop", e))
            }
            LoopKind::Piecewise => {
                let knots = self
                    .knots_theta_over_pi
                    .iter()
                    .zip(&self.knots_phi_over_pi)
                    .map(|(t, p)| Polarization::new(t * PI, p * PI))
                    .collect();
                let durations = self.leg_fractions.iter().map(|f| total_time * f / sum).collect();
                piecewise_path(knots, durations).map_err(|e| core_error("loop", e))
            }
        }
    }

    /// Ramsey run for the configured loop, with the integration step resolved.
    pub fn ramsey(&self) -> Result<RamseyConfig, CliError> {
        self.ramsey_with(self.path()?, self.cavity_input())
    }

    pub fn ramsey_with(&self, path: PathSpec, cavity: CavityInput) -> Result<RamseyConfig, CliError> {
        let mut cfg = RamseyConfig::new(self.space(), self.params()?, cavity, path);
        cfg.tail_tol = self.tail_tol;
        cfg.round_to_rabi = self.round_to_rabi;
        cfg.samples_per_leg = self.samples_per_leg;
        cfg.xi_grid = uniform_xi_grid(self.xi_points);
        cfg.mode = match self.mode {
            ModeName::FullDynamics => RamseyMode::FullDynamics,
            ModeName::IdealPhase => RamseyMode::IdealPhase,
        };
        cfg.trajectory_stride = Some(self.trajectory_stride);
        self.resolve_dt(&mut cfg)?;
        Ok(cfg)
    }

    /// Fixes `dt` from the loop actually run, so `steps` counts steps per loop.
    pub fn resolve_dt(&self, cfg: &mut RamseyConfig) -> Result<(), CliError> {
        cfg.dt = Some(if self.dt_ms > 0.0 {
            self.dt_ms
        } else {
            cfg.effective_path().map_err(|e| core_error("loop", e))?.total_time() / self.steps as f64
        });
        Ok(())
    }
}

/// Tags a core error with the stage that raised it.
pub fn core_error(context: &str, e: cavity_berry::Error) -> CliError {
    if e.is_numerical() {
        CliError::Numerical(format!("{context}: {e}"))
    } else {
        CliError::Validation(format!("{context}: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("gamma = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn failures_name_the_field() {
        for (text, field) in [
            ("gamma_over_pi = 4.0", "gamma_over_pi"),
            ("xi_points = 8", "xi_points"),
            ("delta_ratio = -1.0", "delta_ratio"),
            ("cavity = \"coherent\"\nalpha_re = 3.0\nnmax_plus = 4", "cavity"),
            ("dressed = [[16, 0]]", "dressed"),
            ("loop_kind = \"piecewise\"", "knots_theta_over_pi"),
            ("mode = \"sideways\"", "mode"),
        ] {
            let err = RunConfig::parse(text).unwrap_err();
            assert!(matches!(err, CliError::Validation(_)), "{text}");
            assert!(err.to_string().contains(field), "{text}: {err}");
        }
    }

    #[test]
    fn steps_count_per_rounded_loop() {
        let cfg = RunConfig::parse("steps = 1000\nloop_time_ms = 0.61").unwrap();
        let r = cfg.ramsey().unwrap();
        let t = r.effective_path().unwrap().total_time();
        assert!((r.dt.unwrap() * 1000.0 - t).abs() < 1e-12);
        assert!((t - 0.6).abs() < 1e-9);
    }

    #[test]
    fn piecewise_loop() {
        let cfg = RunConfig::parse(
            "loop_kind = \"piecewise\"\nknots_theta_over_pi = [0.0, 0.5, 0.5, 0.0]\nknots_phi_over_pi = [0.0, 0.0, 1.0, 1.0]\nleg_fractions = [1.0, 2.0, 1.0]",
        )
        .unwrap();
        let path = cfg.path().unwrap();
        assert_eq!(path.knots().len(), 4);
        assert!((cavity_berry::poincare_path::solid_angle(&path) - PI).abs() < 1e-12);
    }
}
