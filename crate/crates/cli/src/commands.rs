use std::f64::consts::PI;

use cavity_berry::hilbert::{expectation, number_operator, AtomLevel, Mode, C64};
use cavity_berry::model::{excitation_operator, ModelParams};
use cavity_berry::phases::{
    adiabatic_eigenstate_transport, analytic_dressed_phase, linear_regression, unwrap_phases, wrap_phase, Branch, Scheme,
    TrackedState, TransportReading,
};
use cavity_berry::poincare_path::{make_schedule, Schedule};
use cavity_berry::ramsey::{
    adiabaticity_point, coherent_fringe, effective_shift_vs_alpha, ladder_trend, p2_coherent_formula, prepare, run_experiment, CavityInput,
    RamseyResult,
};
use rayon::prelude::*;

use crate::config::{core_error, LoopKind, ModeName, RunConfig};
use crate::output::{num, Table};
use crate::CliError;

/// Files to write plus what to tell the user. Per-point numerical failures
/// that did not stop the run are listed in `failures`.
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

fn flag_warnings(r: &RamseyResult, label: &str) -> Vec<String> {
    let mut w = Vec::new();
    if r.flags.non_adiabatic {
        w.push(format!("{label}: loop is not adiabatic (sweep rate / λ = {:.3})", r.adiabaticity_ratio));
    }
    if r.flags.poor_fit {
        w.push(format!("{label}: fringe fit residual {:.3e}", r.fit.residual));
    }
    if r.flags.non_cyclic {
        w.push(format!("{label}: state did not return to its basis populations (cyclicity {:.4})", r.cyclicity));
    }
    w
}

fn bool_str(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

fn schedule_table(s: &Schedule) -> Table {
    let mut t = Table::new("schedule.csv", &["t_ms", "theta", "phi"]);
    for k in s.knots() {
        t.push(vec![num(k.t), num(k.theta), num(k.phi)]);
    }
    t
}

fn trajectory_table(r: &RamseyResult) -> Table {
    let mut t = Table::new("trajectory.csv", &["t_ms", "theta", "phi", "p_upper", "n_plus", "n_minus", "excitations", "norm"]);
    let Some(first) = r.trajectory.first() else { return t };
    let space = first.state.space();
    let (np, nm, nx) = (number_operator(space, Mode::Plus), number_operator(space, Mode::Minus), excitation_operator(space));
    for sample in &r.trajectory {
        let pol = r.schedule.at(sample.t);
        let ev = |op| expectation(op, &sample.state).map(|z| z.re).unwrap_or(f64::NAN);
        t.push(vec![
            num(sample.t),
            num(pol.theta),
            num(pol.phi),
            num(sample.state.level_population(AtomLevel::Upper)),
            num(ev(&np)),
            num(ev(&nm)),
            num(ev(&nx)),
            num(sample.state.norm()),
        ]);
    }
    t
}

pub fn fringe(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rc = cfg.ramsey()?;
    let r = run_experiment(&rc).map_err(|e| core_error("fringe", e))?;
    let alpha = match rc.cavity {
        CavityInput::Coherent(a) => Some(a),
        CavityInput::Fock(0) => Some(C64::new(0.0, 0.0)),
        CavityInput::Fock(_) => None,
    };

    let mut fringe = Table::new("fringe.csv", &["xi", "p2", "p2_caliber", "p2_fit", "p2_formula"]);
    for (i, &x) in r.xi.iter().enumerate() {
        let formula = alpha.map_or(f64::NAN, |a| coherent_fringe(a, r.gamma, x));
        fringe.push(vec![num(x), num(r.p2[i]), num(r.caliber_p2[i]), num(r.fit.eval(x)), num(formula)]);
    }

    let mut summary = Table::new(
        "summary.csv",
        &[
            "gamma",
            "loop_time_ms",
            "rabi_cycles",
            "fitted_shift",
            "p2_dark",
            "p2_dark_formula",
            "fit_offset",
            "fit_amplitude",
            "fit_residual",
            "adiabaticity_ratio",
            "cyclicity",
            "steps",
            "dt_ms",
            "norm_drift",
            "non_adiabatic",
            "poor_fit",
            "non_cyclic",
        ],
    );
    let dark_formula = alpha.map_or(f64::NAN, |a| p2_coherent_formula(a, r.gamma));
    let (steps, dt, drift) = match r.stats {
        Some(s) => (s.steps.to_string(), num(s.dt), num(s.total_drift)),
        None => ("0".into(), num(0.0), num(0.0)),
    };
    summary.push(vec![
        num(r.gamma),
        num(r.loop_time),
        num(r.rabi_cycles),
        num(r.fitted_shift),
        num(r.p2_dark()),
        num(dark_formula),
        num(r.fit.offset),
        num(r.fit.amplitude),
        num(r.fit.residual),
        num(r.adiabaticity_ratio),
        num(r.cyclicity),
        steps,
        dt,
        drift,
        bool_str(r.flags.non_adiabatic),
        bool_str(r.flags.poor_fit),
        bool_str(r.flags.non_cyclic),
    ]);

    let mut tables = vec![fringe, summary, schedule_table(&r.schedule)];
    if cfg.mode == ModeName::FullDynamics {
        tables.push(trajectory_table(&r));
    }
    Ok(Outcome {
        tables,
        summary: vec![format!(
            "fitted shift {:.6} rad (γ/4 = {:.6}), P2 at ξ=π {:.6}, adiabaticity ratio {:.4}, cyclicity {:.6}, {:.1} Rabi cycles",
            r.fitted_shift,
            r.gamma / 4.0,
            r.p2_dark(),
            r.adiabaticity_ratio,
            r.cyclicity,
            r.rabi_cycles
        )],
        warnings: flag_warnings(&r, "fringe"),
        failures: Vec::new(),
    })
}

pub fn alpha_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut base = cfg.ramsey_with(cfg.path()?, CavityInput::Fock(0))?;
    base.trajectory_stride = None;
    for &a in &cfg.alphas {
        prepare(base.space, CavityInput::Coherent(C64::new(a, 0.0)), base.tail_tol).map_err(|e| core_error(&format!("alphas: α = {a}"), e))?;
    }
    let points = cfg
        .alphas
        .par_iter()
        .map(|&a| {
            effective_shift_vs_alpha(&base, &[C64::new(a, 0.0)])
                .map(|mut v| v.remove(0))
                .map_err(|e| core_error(&format!("alpha = {a}"), e))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut t = Table::new(
        "alpha_sweep.csv",
        &["alpha", "shift", "shift_formula", "p2_dark", "p2_dark_formula", "fit_amplitude", "cyclicity", "non_adiabatic", "non_cyclic"],
    );
    let mut warnings = Vec::new();
    for p in &points {
        t.push(vec![
            num(p.alpha.re),
            num(p.shift),
            num(p.formula_shift),
            num(p.result.p2_dark()),
            num(p2_coherent_formula(p.alpha, p.result.gamma)),
            num(p.result.fit.amplitude),
            num(p.result.cyclicity),
            bool_str(p.result.flags.non_adiabatic),
            bool_str(p.result.flags.non_cyclic),
        ]);
        warnings.extend(flag_warnings(&p.result, &format!("alpha = {}", p.alpha.re)));
    }
    let summary = points.iter().map(|p| format!("α = {:<6} shift {:.6} rad (formula {:.6})", p.alpha.re, p.shift, p.formula_shift)).collect();
    let schedule = schedule_table(&points[0].result.schedule);
    Ok(Outcome { tables: vec![t, schedule], summary, warnings, failures: Vec::new() })
}

pub fn adiabaticity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let points = cfg
        .time_ladder_ms
        .par_iter()
        .map(|&t| {
            let mut base = cfg.ramsey_with(cfg.path_with(cfg.gamma_over_pi * PI, t)?, cfg.cavity_input())?;
            base.trajectory_stride = None;
            adiabaticity_point(&base, t).map_err(|e| core_error(&format!("T = {t} ms"), e))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let trend = ladder_trend(&points);

    let mut t = Table::new("adiabaticity.csv", &["requested_time_ms", "loop_time_ms", "rabi_cycles", "adiabaticity_ratio", "error"]);
    for p in &points {
        t.push(vec![num(p.requested_time), num(p.loop_time), num(p.rabi_cycles), num(p.adiabaticity_ratio), num(p.error)]);
    }
    let mut tr = Table::new("adiabaticity_trend.csv", &["monotone", "tail_exponent"]);
    tr.push(vec![bool_str(trend.monotone), num(trend.tail_exponent.unwrap_or(f64::NAN))]);

    let mut summary: Vec<String> =
        points.iter().map(|p| format!("T = {:.4} ms ({:.1} cycles): max fringe error {:.6}", p.loop_time, p.rabi_cycles, p.error)).collect();
    summary.push(match trend.tail_exponent {
        Some(k) => format!("monotone {}, tail exponent {k:.3}", trend.monotone),
        None => format!("monotone {}", trend.monotone),
    });
    Ok(Outcome { tables: vec![t, tr], summary, warnings: Vec::new(), failures: Vec::new() })
}

struct TransportJob {
    n: usize,
    m: usize,
    branch: Branch,
    gamma: f64,
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Upper => "upper",
        Branch::Lower => "lower",
    }
}

fn transport(cfg: &RunConfig, params: &ModelParams, job: &TransportJob) -> Result<TransportReading, CliError> {
    let total = cfg.transport_rabi_cycles * params.rabi_period();
    let path = cfg.path_with(job.gamma, total)?;
    let schedule = make_schedule(&path, cfg.samples_per_leg).map_err(|e| core_error("loop", e))?;
    let dt = if cfg.dt_ms > 0.0 { cfg.dt_ms } else { total / cfg.steps as f64 };
    let tracked = TrackedState::Dressed { n: job.n, m: job.m, branch: job.branch };
    adiabatic_eigenstate_transport(cfg.space(), params, &schedule, tracked, dt, Scheme::ReferenceArm)
        .map_err(|e| core_error(&format!("doublet ({}, {}) {} γ = {}", job.n, job.m, branch_name(job.branch), job.gamma), e))
}

pub fn dressed_phases(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.loop_kind != LoopKind::Lasso {
        return Err(CliError::Validation("loop_kind: dressed-phases sweeps lasso loops over dressed_gammas_over_pi".into()));
    }
    let params = cfg.params()?;
    let mut gammas: Vec<f64> = cfg.dressed_gammas_over_pi.iter().map(|g| g * PI).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let jobs: Vec<TransportJob> = cfg
        .dressed
        .iter()
        .flat_map(|&[n, m]| {
            let gammas = &gammas;
            [Branch::Upper, Branch::Lower].into_iter().flat_map(move |branch| gammas.iter().map(move |&gamma| TransportJob { n, m, branch, gamma }))
        })
        .collect();
    let results: Vec<Result<TransportReading, CliError>> = jobs.par_iter().map(|j| transport(cfg, &params, j)).collect();

    let mut t = Table::new(
        "dressed_phases.csv",
        &[
            "n",
            "m",
            "branch",
            "gamma",
            "geometric_phase",
            "phase_unwrapped",
            "analytic_phase",
            "berry_phase",
            "fidelity",
            "min_gap",
            "cyclicity",
            "status",
        ],
    );
    let mut fits = Table::new("dressed_fit.csv", &["n", "m", "branch", "slope", "intercept", "max_residual", "analytic_slope"]);
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    let mut warnings = Vec::new();
    for (chunk_jobs, chunk) in jobs.chunks(gammas.len()).zip(results.chunks(gammas.len())) {
        let first = &chunk_jobs[0];
        let (n, m, branch) = (first.n, first.m, first.branch);
        // continuity in γ from the trivial loop, where every phase vanishes
        let mut raw = vec![0.0];
        raw.extend(chunk.iter().map(|r| r.as_ref().map_or(f64::NAN, |r| r.reading.geometric_phase)));
        let ok = chunk.iter().all(|r| r.is_ok());
        let unwrapped = if ok { unwrap_phases(&raw) } else { vec![f64::NAN; raw.len()] };
        for (i, (job, res)) in chunk_jobs.iter().zip(chunk).enumerate() {
            let analytic = analytic_dressed_phase(n, m, job.gamma, branch);
            let mut row = vec![n.to_string(), m.to_string(), branch_name(branch).into(), num(job.gamma)];
            match res {
                Ok(r) => {
                    row.extend([
                        num(r.reading.geometric_phase),
                        num(unwrapped[i + 1]),
                        num(analytic),
                        num(r.berry_phase),
                        num(r.fidelity),
                        num(r.min_gap),
                        num(r.reading.cyclicity),
                        "ok".into(),
                    ]);
                    if r.reading.non_cyclic {
                        warnings.push(format!("doublet ({n}, {m}) {} γ = {:.4}: cyclicity {:.4}", branch_name(branch), job.gamma, r.reading.cyclicity));
                    }
                }
                Err(e) => {
                    let nan = num(f64::NAN);
                    row.extend([nan.clone(), nan.clone(), num(analytic), nan.clone(), nan.clone(), nan.clone(), nan, e.to_string()]);
                    failures.push(e.to_string());
                }
            }
            t.push(row);
        }
        let analytic_slope = analytic_dressed_phase(n, m, 1.0, branch);
        if ok && gammas.len() >= 2 {
            let fit = linear_regression(&gammas, &unwrapped[1..]).map_err(|e| core_error("fit", e))?;
            fits.push(vec![
                n.to_string(),
                m.to_string(),
                branch_name(branch).into(),
                num(fit.slope),
                num(fit.intercept),
                num(fit.max_residual),
                num(analytic_slope),
            ]);
            summary.push(format!("({n}, {m}) {:<5} slope {:+.5} (analytic {:+.5})", branch_name(branch), fit.slope, analytic_slope));
        } else if ok {
            let phase = wrap_phase(raw[1]);
            summary.push(format!("({n}, {m}) {:<5} phase {phase:+.5} (analytic {:+.5})", branch_name(branch), analytic_slope * gammas[0]));
        }
    }
    Ok(Outcome { tables: vec![t, fits], summary, warnings, failures })
}
