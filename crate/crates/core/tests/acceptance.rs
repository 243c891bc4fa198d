//! Acceptance criteria. Each test writes exactly one `PASS`/`FAIL` line to
//! stderr (bypassing the harness capture) and then asserts the verdict.

mod common;

use std::f64::consts::PI;
use std::io::Write;

use cavity_berry::dynamics::{evolve, evolve_with, Integrator};
use cavity_berry::hilbert::*;
use cavity_berry::model::*;
use cavity_berry::phases::*;
use cavity_berry::poincare_path::*;
use cavity_berry::ramsey::*;
use common::*;
use nalgebra::DVector;

const GAMMAS: [f64; 3] = [PI / 2.0, PI, 1.5 * PI];

const C1_CYCLES: f64 = 100.0;
const C1_NMAX: usize = 4;
const C1_SHIFT_TOL: f64 = 0.02;
const C2_P2_TOL: f64 = 0.02;
const C3_NMAX: usize = 16;
const C3_ALPHAS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
const C3_FRINGE_TOL: f64 = 1e-10;
const C3_CLASSICAL_TOL: f64 = 0.05;
const C4_CYCLES: f64 = 400.0;
const C4_STEPS_PER_CYCLE: f64 = 50.0;
const C4_REL_TOL: f64 = 0.02;
const C4_HIGHER: (usize, usize) = (1, 0);
const C5_LOOP_TIME: f64 = 0.6;
const C5_BAND: (f64, f64) = (0.01, 0.15);
const C6_HERMITIAN_TOL: f64 = 1e-12;
const C6_COMMUTATOR_TOL: f64 = 1e-12;
const C6_DRIFT_TOL: f64 = 1e-8;
const C6_SOLID_ANGLE_TOL: f64 = 1e-10;
const C6_REVERSAL_REL_TOL: f64 = 0.02;
const C6_DENSE_TOL: f64 = 1e-9;

fn report(id: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "{verdict} criterion {id}: {detail}").unwrap();
}

fn vacuum_run(gamma: f64) -> RamseyResult {
    let p = default_params();
    let path = lasso_path(gamma, C1_CYCLES * p.rabi_period(), DEFAULT_LEG_FRACTIONS).unwrap();
    run_experiment(&RamseyConfig::new(make_space(C1_NMAX, C1_NMAX), p, CavityInput::Fock(0), path)).unwrap()
}

#[test]
fn criterion_1_vacuum_quarter_shift() {
    let mut pass = true;
    let mut detail = Vec::new();
    for g in GAMMAS {
        let r = vacuum_run(g);
        let ok = (r.fitted_shift - g / 4.0).abs() <= C1_SHIFT_TOL && r.rabi_cycles >= C1_CYCLES;
        pass &= ok;
        detail.push(format!("γ={g:.4} shift={:.6} want={:.6}", r.fitted_shift, g / 4.0));
    }
    report("1 (vacuum γ/4 Ramsey shift, ±0.02 rad)", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_2_closed_form_fringe() {
    let mut pass = true;
    let mut detail = Vec::new();
    for g in GAMMAS {
        let r = vacuum_run(g);
        let want = p2_vacuum_formula(g);
        pass &= (r.p2_dark() - want).abs() <= C2_P2_TOL;
        detail.push(format!("γ={g:.4} P2={:.6} formula={want:.6}", r.p2_dark()));
    }
    report("2 (P2 vs (1−cos γ/4)/2, ±0.02)", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_3_coherent_crossover() {
    let p = default_params();
    let path = lasso_path(PI, C1_CYCLES * p.rabi_period(), DEFAULT_LEG_FRACTIONS).unwrap();
    let mut base = RamseyConfig::new(make_space(C3_NMAX, 1), p, CavityInput::Fock(0), path);
    base.mode = RamseyMode::IdealPhase;
    let alphas: Vec<C64> = C3_ALPHAS.iter().map(|&a| C64::new(a, 0.0)).collect();
    let pts = effective_shift_vs_alpha(&base, &alphas).unwrap();

    let mut fringe_ok = true;
    let mut worst = 0.0f64;
    for pt in &pts {
        let tail = poisson_tail(pt.alpha.norm_sqr(), C3_NMAX);
        for (x, p2) in pt.result.xi.iter().zip(&pt.result.p2) {
            let d = (p2 - coherent_fringe(pt.alpha, PI, *x)).abs();
            worst = worst.max(d);
            fringe_ok &= d <= C3_FRINGE_TOL + tail;
        }
        let dark = close_and_detect(&ideal_phase_map(&prepare(base.space, CavityInput::Coherent(pt.alpha), base.tail_tol).unwrap(), PI), PI);
        fringe_ok &= (dark - p2_coherent_formula(pt.alpha, PI)).abs() <= C3_FRINGE_TOL + tail;
    }
    let monotone = pts.windows(2).all(|w| w[1].shift >= w[0].shift);
    let vacuum_exact = (pts[0].shift - PI / 4.0).abs() <= C3_FRINGE_TOL;
    let last = pts.last().unwrap();
    let classical = (last.shift - PI / 2.0).abs() <= C3_CLASSICAL_TOL;
    let pass = fringe_ok && monotone && vacuum_exact && classical;
    let shifts: Vec<String> = pts.iter().map(|p| format!("{:.6}", p.shift)).collect();
    report(
        "3 (coherent crossover, ideal-phase mode)",
        pass,
        &format!("max fringe deviation {worst:.2e}; shifts at α={C3_ALPHAS:?}: [{}]", shifts.join(", ")),
    );
    assert!(pass);
}

fn transport(n: usize, m: usize, gamma: f64, branch: Branch) -> f64 {
    let p = default_params();
    let path = lasso_path(gamma, C4_CYCLES * p.rabi_period(), DEFAULT_LEG_FRACTIONS).unwrap();
    let sched = make_schedule(&path, 64).unwrap();
    let dt = path.total_time() / (C4_STEPS_PER_CYCLE * C4_CYCLES);
    let tracked = TrackedState::Dressed { n, m, branch };
    adiabatic_eigenstate_transport(make_space(n + 2, m + 2), &p, &sched, tracked, dt, Scheme::ReferenceArm)
        .unwrap()
        .reading
        .geometric_phase
}

struct DoubletLaw {
    upper: [f64; 3],
    lower: [f64; 3],
    upper_fit: LineFit,
    lower_fit: LineFit,
}

/// Phases on the γ ladder, unwrapped continuously from 0 at γ = 0.
fn phase_ladder(n: usize, m: usize, branch: Branch) -> [f64; 3] {
    let mut raw = vec![0.0];
    raw.extend(GAMMAS.map(|g| transport(n, m, g, branch)));
    let u = unwrap_phases(&raw);
    [u[1], u[2], u[3]]
}

fn doublet_law(n: usize, m: usize) -> DoubletLaw {
    let upper = phase_ladder(n, m, Branch::Upper);
    let lower = phase_ladder(n, m, Branch::Lower);
    DoubletLaw {
        upper_fit: linear_regression(&GAMMAS, &upper).unwrap(),
        lower_fit: linear_regression(&GAMMAS, &lower).unwrap(),
        upper,
        lower,
    }
}

fn linear_within(fit: &LineFit, values: &[f64]) -> bool {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    fit.max_residual <= C4_REL_TOL * scale && fit.intercept.abs() <= C4_REL_TOL * scale
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_4_dressed_phase_law() {
    let vac = doublet_law(0, 0);
    let quarter = |x: f64, g: f64| rel(x.abs(), g / 4.0) <= C4_REL_TOL;
    let vacuum_ok = GAMMAS.iter().enumerate().all(|(i, &g)| quarter(vac.upper[i], g) && quarter(vac.lower[i], g))
        && rel(vac.upper_fit.slope.abs(), 0.25) <= C4_REL_TOL
        && rel(vac.lower_fit.slope.abs(), 0.25) <= C4_REL_TOL
        && linear_within(&vac.upper_fit, &vac.upper)
        && linear_within(&vac.lower_fit, &vac.lower);

    let (n, m) = C4_HIGHER;
    let hi = doublet_law(n, m);
    let equal_magnitude = (0..3).all(|i| rel(hi.upper[i].abs(), hi.lower[i].abs()) <= C4_REL_TOL);
    let opposite_sign = (0..3).all(|i| hi.upper[i] * hi.lower[i] < 0.0);
    let linear = linear_within(&hi.upper_fit, &hi.upper) && linear_within(&hi.lower_fit, &hi.lower);
    let higher_ok = equal_magnitude && opposite_sign && linear;

    let pass = vacuum_ok && higher_ok;
    report(
        "4 (dressed-phase law, 2%)",
        pass,
        &format!(
            "vacuum doublet slopes upper {:.5} lower {:.5} (|·|=1/4: {}); doublet ({n},{m}) slopes upper {:.5} lower {:.5}, \
             equal magnitude {equal_magnitude}, opposite sign {opposite_sign}, linear {linear}",
            vac.upper_fit.slope, vac.lower_fit.slope, vacuum_ok, hi.upper_fit.slope, hi.lower_fit.slope
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_adiabaticity_budget() {
    let base = RamseyConfig::new(
        make_space(C1_NMAX, C1_NMAX),
        default_params(),
        CavityInput::Fock(0),
        lasso_path(PI, C5_LOOP_TIME, DEFAULT_LEG_FRACTIONS).unwrap(),
    );
    let short = adiabaticity_point(&base, C5_LOOP_TIME).unwrap();
    let long = adiabaticity_point(&base, 4.0 * C5_LOOP_TIME).unwrap();
    let in_band = (C5_BAND.0..=C5_BAND.1).contains(&short.error);
    let pass = in_band && long.error < short.error;
    report(
        "5 (adiabaticity budget in [1%, 15%], shrinking at 4T)",
        pass,
        &format!(
            "T={:.4} ms ({:.1} cycles) error {:.5}; T={:.4} ms error {:.5}",
            short.loop_time, short.rabi_cycles, short.error, long.loop_time, long.error
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_invariants() {
    let p = default_params();
    let mut failures = Vec::new();

    let s = make_space(3, 3);
    let mut herm = 0.0f64;
    let mut comm = 0.0f64;
    let n_exc = excitation_operator(s);
    for i in 0..32 {
        for j in 0..32 {
            let h = build_hamiltonian(s, &p, Polarization::new(PI * i as f64 / 31.0, 2.0 * PI * j as f64 / 32.0));
            herm = herm.max(h.hermiticity_deviation());
            comm = comm.max(OperatorMatrix::commutator(&h, &n_exc).unwrap().max_abs());
        }
    }
    if herm >= C6_HERMITIAN_TOL {
        failures.push("hermiticity");
    }
    if comm >= C6_COMMUTATOR_TOL {
        failures.push("excitation commutator");
    }

    let psi = prepare(make_space(6, 3), CavityInput::Coherent(C64::new(0.8, 0.3)), 1e-3).unwrap();
    let sched = make_schedule(&lasso_path(2.0, 0.4, DEFAULT_LEG_FRACTIONS).unwrap(), 16).unwrap();
    let drift = evolve(&psi, &sched, &p, 1e-4, usize::MAX).unwrap().stats.total_drift;
    if drift >= C6_DRIFT_TOL {
        failures.push("norm drift");
    }

    let mut area = 0.0f64;
    for k in 0..40 {
        let g = 4.0 * PI * k as f64 / 40.0;
        let path = lasso_path(g, 1.0, DEFAULT_LEG_FRACTIONS).unwrap();
        let PathKind::Lasso { theta0 } = path.kind() else { unreachable!() };
        area = area.max((solid_angle(&path) - 2.0 * PI * (1.0 - theta0.cos())).abs());
    }
    if area >= C6_SOLID_ANGLE_TOL {
        failures.push("solid angle");
    }

    let path = lasso_path(PI, C4_CYCLES * p.rabi_period(), DEFAULT_LEG_FRACTIONS).unwrap();
    let tracked = TrackedState::Dressed { n: 0, m: 0, branch: Branch::Upper };
    let phase = |path: &PathSpec| {
        let sched = make_schedule(path, 16).unwrap();
        let dt = path.total_time() / (C4_STEPS_PER_CYCLE * C4_CYCLES);
        adiabatic_eigenstate_transport(make_space(1, 1), &p, &sched, tracked, dt, Scheme::ReferenceArm).unwrap().reading.geometric_phase
    };
    let forward = phase(&path);
    let reversal = rel(-phase(&path.reversed()), forward);
    let doubling = rel(wrap_phase(phase(&path.then(&path).unwrap())), 2.0 * forward);
    if reversal > C6_REVERSAL_REL_TOL || doubling > C6_REVERSAL_REL_TOL {
        failures.push("reversal/doubling");
    }

    let mut dense = 0.0f64;
    for (np, nm) in [(1, 1), (3, 1), (1, 3), (7, 0)] {
        let s = make_space(np, nm);
        let psi = coherent_state(s, C64::new(0.2, 0.1), Mode::Plus, 1e-2).unwrap();
        let sched = make_schedule(&lasso_path(2.2, 0.08, [0.3, 0.4, 0.3]).unwrap(), 9).unwrap();
        let steps = 200;
        let want = dense_evolve(&DVector::from_column_slice(psi.amplitudes()), np, nm, &p, &sched, steps);
        let got = evolve_with(&psi, &sched, &p, sched.duration() / steps as f64, usize::MAX, Integrator::Magnus4).unwrap();
        for (a, b) in got.final_state().amplitudes().iter().zip(want.iter()) {
            dense = dense.max((a - b).norm());
        }
    }
    if dense >= C6_DENSE_TOL {
        failures.push("dense propagator");
    }

    let pass = failures.is_empty();
    report(
        "6 (invariant suite)",
        pass,
        &format!(
            "hermiticity {herm:.1e}, [H,N] {comm:.1e}, drift {drift:.1e}, solid angle {area:.1e}, \
             reversal {reversal:.2e}, doubling {doubling:.2e}, dense {dense:.1e}; failed: {failures:?}"
        ),
    );
    assert!(pass);
}
