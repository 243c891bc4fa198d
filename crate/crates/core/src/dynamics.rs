//! Unitary propagation under the time-dependent drive.
//!
//! The Hamiltonian conserves the excitation number, so only the blocks of
//! [`BlockHamiltonian`] that carry amplitude are evolved. Within a step the
//! Hamiltonian is frozen and exponentiated exactly through its
//! eigendecomposition, so every step is unitary to rounding.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, C64, ZERO};
use crate::model::{BlockHamiltonian, ModelParams, Polarization};
use crate::poincare_path::Schedule;

/// Steps per schedule used when no step size is given.
pub const DEFAULT_STEPS: usize = 20_000;

/// Largest state discrepancy between `dt` and `dt/2` runs accepted as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-8;

/// Time-stepping rule. Both rules are products of exact exponentials of
/// frozen Hamiltonians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Integrator {
    /// One exponential per step, Hamiltonian frozen at the step midpoint.
    /// Second order in `dt`.
    Midpoint,
    /// Fourth-order commutator-free Magnus step: two exponentials of linear
    /// combinations of the Hamiltonian at the Gauss–Legendre nodes.
    #[default]
    Magnus4,
}

/// `duration / DEFAULT_STEPS`, or 1 for zero-length schedules.
pub fn default_dt(schedule: &Schedule) -> f64 {
    let d = schedule.duration();
    if d > 0.0 {
        d / DEFAULT_STEPS as f64
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub steps: usize,
    /// Step actually used: the schedule duration divided by `steps`.
    pub dt: f64,
    pub integrator: Integrator,
    /// Largest `| ‖ψ_{k+1}‖ − ‖ψ_k‖ |` over all steps.
    pub max_step_drift: f64,
    /// `| ‖ψ(T)‖ − ‖ψ(0)‖ |`.
    pub total_drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: StateVector,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub schedule: Schedule,
    pub params: ModelParams,
    pub stats: StepStats,
    /// `∫ ⟨ψ|H|ψ⟩ dt` accumulated along the run.
    pub energy_integral: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &StateVector {
        &self.samples[0].state
    }

    pub fn final_state(&self) -> &StateVector {
        &self.samples.last().expect("trajectory has samples").state
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

/// Sectors that carry amplitude, with their current local amplitudes.
struct ActiveBlocks {
    sectors: Vec<usize>,
    local: Vec<DVector<C64>>,
}

impl ActiveBlocks {
    fn gather(blocks: &BlockHamiltonian, state: &StateVector) -> Self {
        let amps = state.amplitudes();
        let mut sectors = Vec::new();
        let mut local = Vec::new();
        for (k, sector) in blocks.sectors().iter().enumerate() {
            if sector.indices.iter().any(|&i| amps[i] != ZERO) {
                sectors.push(k);
                local.push(DVector::from_iterator(sector.dim(), sector.indices.iter().map(|&i| amps[i])));
            }
        }
        ActiveBlocks { sectors, local }
    }

    fn scatter(&self, blocks: &BlockHamiltonian, out: &mut [C64]) {
        out.fill(ZERO);
        for (&k, x) in self.sectors.iter().zip(&self.local) {
            for (&i, v) in blocks.sectors()[k].indices.iter().zip(x.iter()) {
                out[i] = *v;
            }
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.local.iter().map(|x| x.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    fn is_finite(&self) -> bool {
        self.local.iter().all(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// `x ← exp(−i h τ) x` via the eigendecomposition of the Hermitian block `h`.
fn apply_exp(h: DMatrix<C64>, tau: f64, x: &mut DVector<C64>) {
    let eig = h.symmetric_eigen();
    let mut y = eig.eigenvectors.adjoint() * &*x;
    for (yi, e) in y.iter_mut().zip(eig.eigenvalues.iter()) {
        *yi *= C64::from_polar(1.0, -e * tau);
    }
    *x = &eig.eigenvectors * y;
}

fn expectation_block(h: &DMatrix<C64>, x: &DVector<C64>) -> f64 {
    x.dotc(&(h * x)).re
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
const CF4_A1: f64 = 0.25 + GAUSS_OFFSET;
const CF4_A2: f64 = 0.25 - GAUSS_OFFSET;

/// Advances the active blocks from `t` to `t + dt`; returns `∫⟨H⟩dt` over the step.
fn step(
    blocks: &BlockHamiltonian,
    active: &mut ActiveBlocks,
    schedule: &Schedule,
    t: f64,
    dt: f64,
    integrator: Integrator,
) -> f64 {
    let mid = schedule.at(t + 0.5 * dt);
    let mut energy = 0.0;
    for (&k, x) in active.sectors.iter().zip(active.local.iter_mut()) {
        let h_mid = blocks.block(k, mid);
        let e0 = expectation_block(&h_mid, x);
        match integrator {
            Integrator::Midpoint => apply_exp(h_mid.clone(), dt, x),
            Integrator::Magnus4 => {
                let h1 = blocks.block(k, schedule.at(t + (0.5 - GAUSS_OFFSET) * dt));
                let h2 = blocks.block(k, schedule.at(t + (0.5 + GAUSS_OFFSET) * dt));
                apply_exp(&h1 * C64::from(CF4_A1) + &h2 * C64::from(CF4_A2), dt, x);
                apply_exp(&h1 * C64::from(CF4_A2) + &h2 * C64::from(CF4_A1), dt, x);
            }
        }
        energy += 0.5 * (e0 + expectation_block(&h_mid, x)) * dt;
    }
    energy
}

/// Integrates `i dψ/dt = H(θ(t), φ(t)) ψ` over the whole schedule with the
/// default integrator. The step is shrunk so an integer number of steps
/// ends exactly at the schedule end. A sample is stored at `t = 0`, every
/// `sample_stride` steps, and at the end.
pub fn evolve(
    initial: &StateVector,
    schedule: &Schedule,
    params: &ModelParams,
    dt: f64,
    sample_stride: usize,
) -> Result<Trajectory> {
    evolve_with(initial, schedule, params, dt, sample_stride, Integrator::default())
}

pub fn evolve_with(
    initial: &StateVector,
    schedule: &Schedule,
    params: &ModelParams,
    dt: f64,
    sample_stride: usize,
    integrator: Integrator,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::range("dt", alloc::format!("{dt} must be positive")));
    }
    let space = initial.space();
    let blocks = BlockHamiltonian::new(space, params);
    let duration = schedule.duration();
    let steps = if duration > 0.0 { (duration / dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
    let h = if steps > 0 { duration / steps as f64 } else { 0.0 };
    let stride = sample_stride.max(1);

    let mut active = ActiveBlocks::gather(&blocks, initial);
    let norm0 = active.norm_sqr().sqrt();
    let mut prev_norm = norm0;
    let mut max_step_drift: f64 = 0.0;
    let mut energy_integral = 0.0;
    let mut samples = vec![TrajectorySample { t: 0.0, state: initial.clone() }];
    let mut buf = vec![ZERO; space.dim()];

    for k in 0..steps {
        let t = k as f64 * h;
        energy_integral += step(&blocks, &mut active, schedule, t, h, integrator);
        if !active.is_finite() {
            return Err(Error::Integration { step: k, time: t, reason: "non-finite amplitude" });
        }
        let norm = active.norm_sqr().sqrt();
        max_step_drift = max_step_drift.max((norm - prev_norm).abs());
        prev_norm = norm;
        if (k + 1) % stride == 0 || k + 1 == steps {
            active.scatter(&blocks, &mut buf);
            let t_end = if k + 1 == steps { duration } else { (k + 1) as f64 * h };
            samples.push(TrajectorySample {
                t: t_end,
                state: StateVector::from_raw(space, buf.clone(), initial.is_normalized()),
            });
        }
    }

    Ok(Trajectory {
        samples,
        schedule: schedule.clone(),
        params: *params,
        stats: StepStats { steps, dt: h, integrator, max_step_drift, total_drift: (prev_norm - norm0).abs() },
        energy_integral,
    })
}

/// `exp(−i H(pol) time) ψ` for a frozen polarization; `time` may be negative.
pub fn propagate_frozen(state: &StateVector, params: &ModelParams, pol: Polarization, time: f64) -> StateVector {
    let blocks = BlockHamiltonian::new(state.space(), params);
    let mut active = ActiveBlocks::gather(&blocks, state);
    for (&k, x) in active.sectors.iter().zip(active.local.iter_mut()) {
        apply_exp(blocks.block(k, pol), time, x);
    }
    let mut out = vec![ZERO; state.dim()];
    active.scatter(&blocks, &mut out);
    StateVector::from_raw(state.space(), out, state.is_normalized())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub dt: f64,
    /// `max |ψ_dt(T) − ψ_{dt/2}(T)|` over amplitudes.
    pub discrepancy: f64,
    pub converged: bool,
}

/// Runs at `dt` and `dt/2` and compares the final states.
pub fn convergence_check(
    initial: &StateVector,
    schedule: &Schedule,
    params: &ModelParams,
    dt: f64,
) -> Result<ConvergenceReport> {
    let coarse = evolve(initial, schedule, params, dt, usize::MAX)?;
    let fine = evolve(initial, schedule, params, dt / 2.0, usize::MAX)?;
    let discrepancy = coarse.final_state().max_abs_diff(fine.final_state());
    Ok(ConvergenceReport { dt: coarse.stats.dt, discrepancy, converged: discrepancy < CONVERGENCE_THRESHOLD })
}
