//! Phase extraction from trajectories, and the closed-form dressed-state
//! phase law.
//!
//! The total (Pancharatnam) phase of a cyclic run is `arg⟨ψ(0)|ψ(T)⟩`. The
//! geometric part is what remains after removing a dynamical phase, which is
//! obtained either from a twin run with the polarization frozen at the loop
//! start ([`Scheme::ReferenceArm`]) or from `−∫⟨H⟩dt`
//! ([`Scheme::EnergyIntegral`]).

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DVector;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::{Euclid, Float};

use crate::dynamics::{evolve, propagate_frozen};
use crate::error::{Error, Result};
use crate::hilbert::{inner_product, AtomLevel, BasisLabel, SpaceConfig, StateVector, C64};
use crate::model::{BlockHamiltonian, ModelParams, Polarization};
use crate::poincare_path::Schedule;

/// Overlap magnitudes below this mark a run as non-cyclic.
pub const CYCLICITY_FLOOR: f64 = 0.99;

/// The tracked level must stay this many times the sweep rate away from its neighbours.
pub const GAP_FACTOR: f64 = 10.0;

/// Upper bound on the number of points used for eigenstate tracking.
pub const MAX_TRACKING_POINTS: usize = 4000;

/// Wraps to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = Euclid::rem_euclid(&x, &(2.0 * PI));
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Removes 2π jumps between consecutive entries.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let prev = phases[i - 1];
            offset -= 2.0 * PI * ((p - prev) / (2.0 * PI)).round();
        }
        out.push(p + offset);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ReferenceArm,
    EnergyIntegral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    /// `arg⟨initial|final⟩`, zero when the overlap vanishes.
    pub phase: f64,
    /// `|⟨initial|final⟩|`.
    pub cyclicity: f64,
    /// Set when `cyclicity` is below the floor; the phase is then unreliable.
    pub non_cyclic: bool,
}

pub fn pancharatnam_phase(initial: &StateVector, final_state: &StateVector) -> Result<Overlap> {
    pancharatnam_phase_with_floor(initial, final_state, CYCLICITY_FLOOR)
}

pub fn pancharatnam_phase_with_floor(initial: &StateVector, final_state: &StateVector, floor: f64) -> Result<Overlap> {
    let z = inner_product(initial, final_state)?;
    let cyclicity = z.norm();
    Ok(Overlap { phase: if cyclicity > 0.0 { z.arg() } else { 0.0 }, cyclicity, non_cyclic: cyclicity < floor })
}

/// Phase of the frozen-polarization twin run: `initial` evolved for the
/// schedule duration with `(θ, φ)` held at the schedule start.
pub fn dynamical_phase_reference(initial: &StateVector, schedule: &Schedule, params: &ModelParams) -> Result<Overlap> {
    let reference = propagate_frozen(initial, params, schedule.start(), schedule.duration());
    pancharatnam_phase(initial, &reference)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseReading {
    pub total_phase: f64,
    pub dynamical_phase: f64,
    /// `wrap(total − dynamical)`.
    pub geometric_phase: f64,
    pub cyclicity: f64,
    pub scheme: Scheme,
    /// The loop run or its reference run fell below [`CYCLICITY_FLOOR`].
    pub non_cyclic: bool,
}

/// Splits the total phase of a finished run into dynamical and geometric parts.
pub fn geometric_phase(trajectory: &crate::dynamics::Trajectory, scheme: Scheme) -> Result<PhaseReading> {
    let initial = trajectory.initial();
    let total = pancharatnam_phase(initial, trajectory.final_state())?;
    let (dynamical_phase, reference_non_cyclic) = match scheme {
        Scheme::ReferenceArm => {
            let r = dynamical_phase_reference(initial, &trajectory.schedule, &trajectory.params)?;
            (r.phase, r.non_cyclic)
        }
        Scheme::EnergyIntegral => {
            let n2 = initial.norm() * initial.norm();
            (-trajectory.energy_integral / n2, false)
        }
    };
    Ok(PhaseReading {
        total_phase: total.phase,
        dynamical_phase,
        geometric_phase: wrap_phase(total.phase - dynamical_phase),
        cyclicity: total.cyclicity,
        scheme,
        non_cyclic: total.non_cyclic || reference_non_cyclic,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

/// `±(γ/2)(n − m + 1/2)`, positive on the upper branch.
pub fn analytic_dressed_phase(n: usize, m: usize, gamma: f64, branch: Branch) -> f64 {
    branch.sign() * 0.5 * gamma * (n as f64 - m as f64 + 0.5)
}

/// Eigenstate to carry around the loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackedState {
    /// The uncoupled `|1,0,0⟩`.
    Ground,
    /// Member of the doublet spanned by `|2,n,m⟩` and `|1,n+1,m⟩`.
    Dressed { n: usize, m: usize, branch: Branch },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportReading {
    /// Phases of the full Schrödinger evolution started in the eigenstate.
    pub reading: PhaseReading,
    /// Discrete Berry phase `arg⟨v(0)|v(T)⟩` of the continuously gauged
    /// instantaneous eigenvector.
    pub berry_phase: f64,
    /// Eigenvalue at the loop start.
    pub energy: f64,
    /// `|⟨v(T)|ψ(T)⟩|`; 1 for perfectly adiabatic following.
    pub fidelity: f64,
    pub min_gap: f64,
    pub min_gap_time: f64,
    pub initial: StateVector,
}

/// Instantaneous eigen-decomposition of one excitation block.
fn block_eigen(blocks: &BlockHamiltonian, k: usize, pol: Polarization) -> (Vec<f64>, Vec<DVector<C64>>) {
    let eig = blocks.block(k, pol).symmetric_eigen();
    let vectors = (0..eig.eigenvalues.len()).map(|j| eig.eigenvectors.column(j).into_owned()).collect();
    (eig.eigenvalues.iter().copied().collect(), vectors)
}

fn gap_of(values: &[f64], j: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, e)| (e - values[j]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Picks the eigenvector of sector `k` at `pol` that realizes `tracked`.
fn select_eigenstate(
    space: SpaceConfig,
    blocks: &BlockHamiltonian,
    k: usize,
    pol: Polarization,
    tracked: TrackedState,
) -> Result<usize> {
    let (values, vectors) = block_eigen(blocks, k, pol);
    let TrackedState::Dressed { n, m, branch } = tracked else {
        return Ok(0);
    };
    let sector = &blocks.sectors()[k];
    let local = |label: BasisLabel| sector.indices.binary_search(&space.index_unchecked(label)).ok();
    let upper = local(BasisLabel::new(AtomLevel::Upper, n, m));
    let lower = local(BasisLabel::new(AtomLevel::Lower, n + 1, m));
    let (Some(u), Some(l)) = (upper, lower) else { unreachable!("labels checked by caller") };
    let weight = |j: usize| vectors[j][u].norm_sqr() + vectors[j][l].norm_sqr();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
    if order.len() < 2 {
        return Err(Error::range("tracked state", "doublet needs a two-dimensional sector"));
    }
    let (a, b) = (order[0], order[1]);
    let (hi, lo) = if values[a] >= values[b] { (a, b) } else { (b, a) };
    Ok(match branch {
        Branch::Upper => hi,
        Branch::Lower => lo,
    })
}

/// Prepares the chosen eigenstate of `H` at the schedule start, evolves it
/// around the loop, and tracks the instantaneous eigenvector by maximal
/// overlap with a phase-smooth gauge. Fails with [`Error::Degeneracy`] if the
/// tracked level comes closer than `GAP_FACTOR × max rate` to another level
/// of its excitation block.
pub fn adiabatic_eigenstate_transport(
    space: SpaceConfig,
    params: &ModelParams,
    schedule: &Schedule,
    tracked: TrackedState,
    dt: f64,
    scheme: Scheme,
) -> Result<TransportReading> {
    let excitations = match tracked {
        TrackedState::Ground => 0,
        TrackedState::Dressed { n, m, .. } => {
            for label in [BasisLabel::new(AtomLevel::Upper, n, m), BasisLabel::new(AtomLevel::Lower, n + 1, m)] {
                space.index(label)?;
            }
            n + m + 1
        }
    };
    let blocks = BlockHamiltonian::new(space, params);
    let k = blocks.sectors().iter().position(|s| s.excitations == excitations).expect("sector present");
    let indices = blocks.sectors()[k].indices.clone();

    let start = schedule.start();
    let j0 = select_eigenstate(space, &blocks, k, start, tracked)?;
    let (values0, vectors0) = block_eigen(&blocks, k, start);
    let energy = values0[j0];
    let v0 = vectors0[j0].clone();

    let mut amps = alloc::vec![C64::new(0.0, 0.0); space.dim()];
    for (&g, z) in indices.iter().zip(v0.iter()) {
        amps[g] = *z;
    }
    let initial = StateVector::from_amplitudes(space, amps)?;

    let steps = if schedule.duration() > 0.0 { (schedule.duration() / dt).ceil() as usize } else { 0 };
    let stride = (steps / MAX_TRACKING_POINTS).max(1);
    let trajectory = evolve(&initial, schedule, params, dt, stride)?;

    let required = GAP_FACTOR * schedule.max_rate();
    let mut min_gap = gap_of(&values0, j0);
    let mut min_gap_time = 0.0;
    let mut v = v0.clone();
    for sample in &trajectory.samples[1..] {
        let (values, vectors) = block_eigen(&blocks, k, schedule.at(sample.t));
        let (j, overlap) = vectors
            .iter()
            .map(|u| v.dotc(u))
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("non-empty block");
        let gap = gap_of(&values, j);
        if gap < min_gap {
            min_gap = gap;
            min_gap_time = sample.t;
        }
        v = &vectors[j] * C64::from_polar(1.0, -overlap.arg());
    }
    if min_gap < required {
        return Err(Error::Degeneracy { gap: min_gap, time: min_gap_time, required });
    }

    let berry_phase = v0.dotc(&v).arg();
    let final_amps = trajectory.final_state().amplitudes();
    let fidelity = indices.iter().zip(v.iter()).map(|(&g, z)| z.conj() * final_amps[g]).sum::<C64>().norm();
    let reading = geometric_phase(&trajectory, scheme)?;
    Ok(TransportReading { reading, berry_phase, energy, fidelity, min_gap, min_gap_time, initial })
}

/// Applies the adiabatic-limit loop phases with dynamical phases removed:
/// both members of the doublet `{|2,n,m⟩, |1,n+1,m⟩}` acquire
/// `e^{−iγ/2 (n − m + 1/2)}`, the uncoupled `|1,0,m⟩` acquires `e^{+iγm/2}`.
pub fn ideal_phase_map(state: &StateVector, gamma: f64) -> StateVector {
    let space = state.space();
    let amps = space
        .labels()
        .zip(state.amplitudes())
        .map(|(l, a)| {
            let phase = match (l.level, l.n) {
                (AtomLevel::Upper, n) => -0.5 * gamma * (n as f64 - l.m as f64 + 0.5),
                (AtomLevel::Lower, 0) => 0.5 * gamma * l.m as f64,
                (AtomLevel::Lower, n) => -0.5 * gamma * (n as f64 - 1.0 - l.m as f64 + 0.5),
            };
            a * C64::from_polar(1.0, phase)
        })
        .collect();
    StateVector::from_raw(space, amps, state.is_normalized())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Ordinary least-squares line through `(x, y)`; needs two distinct `x`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::range("regression", alloc::format!("{} x vs {} y values", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::range("regression", "x values are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).abs()).fold(0.0, f64::max);
    Ok(LineFit { slope, intercept, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fock_state, make_space};
    use crate::model::default_params;
    use crate::poincare_path::{lasso_path, make_schedule, DEFAULT_LEG_FRACTIONS};

    #[test]
    fn wrapping() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_phase(0.25), 0.25);
        let u = unwrap_phases(&[3.0, -3.0, -0.5, 2.9]);
        assert!((u[1] - (2.0 * PI - 3.0)).abs() < 1e-15);
        assert!((u[2] - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert_eq!(u[3], 2.9);
    }

    #[test]
    fn overlap_phases() {
        let s = make_space(1, 1);
        let a = fock_state(s, 2, 0, 0).unwrap();
        let same = pancharatnam_phase(&a, &a).unwrap();
        assert_eq!((same.phase, same.cyclicity, same.non_cyclic), (0.0, 1.0, false));
        let turned = pancharatnam_phase(&a, &a.clone().with_global_phase(PI / 4.0)).unwrap();
        assert!((turned.phase - PI / 4.0).abs() < 1e-15);
        let orth = pancharatnam_phase(&a, &fock_state(s, 1, 0, 0).unwrap()).unwrap();
        assert_eq!(orth.cyclicity, 0.0);
        assert!(orth.non_cyclic);
        assert!(pancharatnam_phase(&a, &fock_state(make_space(1, 0), 1, 0, 0).unwrap()).is_err());
    }

    #[test]
    fn reference_arm_phases() {
        let s = make_space(2, 2);
        let p = default_params();
        let t = 3.0 * p.rabi_period();
        let sched = Schedule::constant(Polarization::plus(), t).unwrap();
        let ground = dynamical_phase_reference(&fock_state(s, 1, 0, 0).unwrap(), &sched, &p).unwrap();
        assert_eq!(ground.phase, 0.0);
        let upper = dynamical_phase_reference(&fock_state(s, 2, 0, 0).unwrap(), &sched, &p).unwrap();
        assert!((upper.phase - wrap_phase(-p.upper_shift() * t)).abs() < 1e-9);
        assert!((upper.cyclicity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_law() {
        assert!((analytic_dressed_phase(0, 0, PI, Branch::Upper) - PI / 4.0).abs() < 1e-15);
        assert!((analytic_dressed_phase(1, 0, PI, Branch::Upper) - 3.0 * PI / 4.0).abs() < 1e-15);
        assert_eq!(analytic_dressed_phase(3, 1, 0.0, Branch::Lower), 0.0);
        assert_eq!(analytic_dressed_phase(2, 5, 1.1, Branch::Lower), -analytic_dressed_phase(2, 5, 1.1, Branch::Upper));
    }

    #[test]
    fn ideal_map_examples() {
        let s = make_space(3, 2);
        let g = fock_state(s, 1, 0, 0).unwrap();
        assert_eq!(ideal_phase_map(&g, PI), g);
        let e = fock_state(s, 2, 0, 0).unwrap();
        let mapped = ideal_phase_map(&e, PI);
        assert!(mapped.max_abs_diff(&e.clone().with_global_phase(-PI / 4.0)) < 1e-15);
        // doublet partners share a phase
        let a = ideal_phase_map(&fock_state(s, 2, 1, 1).unwrap(), 0.7);
        let b = ideal_phase_map(&fock_state(s, 1, 2, 1).unwrap(), 0.7);
        let pa = a.amplitude(BasisLabel::new(AtomLevel::Upper, 1, 1)).unwrap().arg();
        let pb = b.amplitude(BasisLabel::new(AtomLevel::Lower, 2, 1)).unwrap().arg();
        assert!((pa - pb).abs() < 1e-15 && (pa + 0.35 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn regression() {
        let f = linear_regression(&[1.0, 2.0, 3.0], &[2.5, 4.5, 6.5]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 0.5).abs() < 1e-14);
        assert!(linear_regression(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ground_state_transport_is_trivial() {
        let s = make_space(2, 2);
        let p = default_params();
        let sched = make_schedule(&lasso_path(PI, 0.6, DEFAULT_LEG_FRACTIONS).unwrap(), 32).unwrap();
        let r = adiabatic_eigenstate_transport(s, &p, &sched, TrackedState::Ground, 1e-4, Scheme::ReferenceArm).unwrap();
        assert_eq!(r.reading.geometric_phase, 0.0);
        assert_eq!(r.berry_phase, 0.0);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn vanishing_drive_is_degenerate() {
        let s = make_space(1, 1);
        let p = ModelParams::new(2.0 * PI * 50.0, 1e-9, 2.0 * PI * 150.0).unwrap();
        let sched = make_schedule(&lasso_path(PI, 0.6, DEFAULT_LEG_FRACTIONS).unwrap(), 32).unwrap();
        let tracked = TrackedState::Dressed { n: 0, m: 0, branch: Branch::Upper };
        let err = adiabatic_eigenstate_transport(s, &p, &sched, tracked, 1e-3, Scheme::ReferenceArm).unwrap_err();
        assert!(matches!(err, Error::Degeneracy { .. }), "{err:?}");
    }

    #[test]
    fn doublet_outside_space_rejected() {
        let s = make_space(1, 1);
        let sched = Schedule::constant(Polarization::plus(), 0.1).unwrap();
        let tracked = TrackedState::Dressed { n: 1, m: 0, branch: Branch::Lower };
        assert!(adiabatic_eigenstate_transport(s, &default_params(), &sched, tracked, 1e-3, Scheme::ReferenceArm).is_err());
    }
}
