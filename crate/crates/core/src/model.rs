//! Effective atom / two-mode Hamiltonian with ħ = 1, frequencies in rad/ms:
//!
//! ```text
//! H = (Ω²/δ) σ₂₂ + (g²/δ)(a₊†a₊ + a₋†a₋) σ₁₁
//!     + λ [ (c₊ a₊ + c₋ a₋) σ₂₁ + h.c. ],      λ = gΩ/δ
//! ```
//!
//! where `(c₊, c₋)` is the drive polarization on the Poincaré sphere.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, atomic_projector, atomic_raise, number_operator, AtomLevel, BasisLabel, Mode, OperatorMatrix,
    SpaceConfig, C64, ZERO,
};

/// Converts a frequency in kHz to an angular frequency in rad/ms.
pub fn khz_to_rad_per_ms(f_khz: f64) -> f64 {
    2.0 * PI * f_khz
}

/// Physical couplings in rad/ms. `λ = gΩ/δ` is always derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    g: f64,
    omega_drive: f64,
    delta: f64,
}

impl ModelParams {
    pub fn new(g: f64, omega_drive: f64, delta: f64) -> Result<Self> {
        for (what, v) in [("g", g), ("omega_drive", omega_drive)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::range(what, alloc::format!("{v} must be finite and non-negative")));
            }
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::range("delta", alloc::format!("{delta} must be positive")));
        }
        Ok(ModelParams { g, omega_drive, delta })
    }

    /// Builds from `g/2π` and `Ω/2π` in kHz with `δ = delta_ratio · Ω`.
    pub fn from_khz(g_khz: f64, omega_khz: f64, delta_ratio: f64) -> Result<Self> {
        let omega = khz_to_rad_per_ms(omega_khz);
        Self::new(khz_to_rad_per_ms(g_khz), omega, delta_ratio * omega)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn omega_drive(&self) -> f64 {
        self.omega_drive
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lambda(&self) -> f64 {
        self.g * self.omega_drive / self.delta
    }

    /// Light shift of level `|2⟩`, `Ω²/δ`.
    pub fn upper_shift(&self) -> f64 {
        self.omega_drive * self.omega_drive / self.delta
    }

    /// Per-photon shift of level `|1⟩`, `g²/δ`.
    pub fn photon_shift(&self) -> f64 {
        self.g * self.g / self.delta
    }

    /// Period of a full vacuum Rabi cycle, `2π/λ`, in ms.
    pub fn rabi_period(&self) -> f64 {
        2.0 * PI / self.lambda()
    }

    /// Advisory: the adiabatic elimination behind the effective model wants
    /// `δ ≫ g, Ω`. Set when `δ < 5·max(g, Ω)`.
    pub fn dispersive_warning(&self) -> bool {
        self.delta < 5.0 * self.g.max(self.omega_drive)
    }

    /// Same couplings with `g`, `Ω` and `δ` all multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.g * c, self.omega_drive * c, self.delta * c)
    }
}

/// `g/2π = Ω/2π = 50 kHz`, `δ = 3Ω`, giving `λ/2π = 50/3 kHz`.
pub fn default_params() -> ModelParams {
    ModelParams::from_khz(50.0, 50.0, 3.0).expect("valid defaults")
}

/// Drive polarization as a point on the Poincaré sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Polarization {
    pub theta: f64,
    pub phi: f64,
}

impl Polarization {
    /// `theta` is clamped to `[0, π]`; `phi` is kept unwrapped.
    pub fn new(theta: f64, phi: f64) -> Self {
        Polarization { theta: theta.clamp(0.0, PI), phi }
    }

    /// Pure `+` polarization; only `a₊` couples to the atom.
    pub fn plus() -> Self {
        Polarization { theta: 0.0, phi: 0.0 }
    }

    /// Field amplitudes `(cos(θ/2)e^{iφ/2}, sin(θ/2)e^{-iφ/2})` of the drive.
    /// These carry the drive's own phase and change sign under `φ → φ + 2π`.
    pub fn jones(&self) -> (C64, C64) {
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        (C64::from_polar(c, self.phi / 2.0), C64::from_polar(s, -self.phi / 2.0))
    }

    /// Coupling weights `(cos(θ/2), sin(θ/2)e^{-iφ})` entering the Hamiltonian.
    ///
    /// This is [`Polarization::jones`] times `e^{-iφ/2}`. The drive's overall
    /// phase is removed, so the Hamiltonian is a single-valued function of the
    /// point on the sphere (regular at the `θ = 0` pole where loops start).
    pub fn coupling(&self) -> (C64, C64) {
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        (C64::new(c, 0.0), C64::from_polar(s, -self.phi))
    }

    /// Unit vector on the sphere.
    pub fn cartesian(&self) -> [f64; 3] {
        let st = self.theta.sin();
        [st * self.phi.cos(), st * self.phi.sin(), self.theta.cos()]
    }

    /// Chord distance between two points on the sphere.
    pub fn distance(&self, other: &Polarization) -> f64 {
        let (a, b) = (self.cartesian(), other.cartesian());
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

/// Assembles the Hamiltonian from the ladder and atomic operators.
pub fn build_hamiltonian(space: SpaceConfig, params: &ModelParams, pol: Polarization) -> OperatorMatrix {
    let (cp, cm) = pol.coupling();
    let ap = annihilation(space, Mode::Plus);
    let am = annihilation(space, Mode::Minus);
    let raise = atomic_raise(space);
    let s11 = atomic_projector(space, AtomLevel::Lower);
    let s22 = atomic_projector(space, AtomLevel::Upper);
    let photons = number_operator(space, Mode::Plus).add(&number_operator(space, Mode::Minus)).unwrap();

    let field = ap.scale(cp).add(&am.scale(cm)).unwrap();
    let jump = field.mul(&raise).unwrap().scale(C64::new(params.lambda(), 0.0));
    let coupling = jump.add(&jump.adjoint()).unwrap();

    let h = s22
        .scale(C64::new(params.upper_shift(), 0.0))
        .add(&photons.mul(&s11).unwrap().scale(C64::new(params.photon_shift(), 0.0)))
        .unwrap()
        .add(&coupling)
        .unwrap();
    // products of Hermitian factors lose the flag; restore it with a check
    OperatorMatrix::from_triplets(space, h.entries(), true).expect("effective Hamiltonian is Hermitian")
}

/// `N_exc = a₊†a₊ + a₋†a₋ + σ₂₂`, conserved by every [`build_hamiltonian`] output.
pub fn excitation_operator(space: SpaceConfig) -> OperatorMatrix {
    OperatorMatrix::diagonal(space, |l| l.excitations() as f64)
}

#[derive(Clone, Copy, Debug)]
struct Link {
    upper: usize,
    lower: usize,
    weight: f64,
    mode: Mode,
}

/// One excitation-number block of the Hamiltonian.
#[derive(Clone, Debug)]
pub struct Sector {
    pub excitations: usize,
    /// Global basis indices, ascending.
    pub indices: Vec<usize>,
    diag: Vec<f64>,
    links: Vec<Link>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }
}

/// The Hamiltonian split into dense excitation-number blocks. Blocks are
/// assembled directly from matrix elements, independent of the operator
/// algebra in [`build_hamiltonian`].
#[derive(Clone, Debug)]
pub struct BlockHamiltonian {
    space: SpaceConfig,
    lambda: f64,
    sectors: Vec<Sector>,
}

impl BlockHamiltonian {
    pub fn new(space: SpaceConfig, params: &ModelParams) -> Self {
        let mut sectors = Vec::new();
        for (excitations, indices) in space.excitation_sectors().into_iter().enumerate() {
            if indices.is_empty() {
                continue;
            }
            let local = |label: BasisLabel| -> Option<usize> {
                if !space.contains(label) {
                    return None;
                }
                let g = space.index_unchecked(label);
                indices.binary_search(&g).ok()
            };
            let mut diag = Vec::with_capacity(indices.len());
            let mut links = Vec::new();
            for &g in &indices {
                let l = space.label(g);
                match l.level {
                    AtomLevel::Upper => {
                        diag.push(params.upper_shift());
                        let here = local(l).unwrap();
                        // ⟨2,n,m| a₊σ₂₁ |1,n+1,m⟩ = √(n+1), likewise for a₋
                        if let Some(lower) = local(BasisLabel::new(AtomLevel::Lower, l.n + 1, l.m)) {
                            links.push(Link { upper: here, lower, weight: ((l.n + 1) as f64).sqrt(), mode: Mode::Plus });
                        }
                        if let Some(lower) = local(BasisLabel::new(AtomLevel::Lower, l.n, l.m + 1)) {
                            links.push(Link { upper: here, lower, weight: ((l.m + 1) as f64).sqrt(), mode: Mode::Minus });
                        }
                    }
                    AtomLevel::Lower => diag.push(params.photon_shift() * (l.n + l.m) as f64),
                }
            }
            sectors.push(Sector { excitations, indices, diag, links });
        }
        BlockHamiltonian { space, lambda: params.lambda(), sectors }
    }

    pub fn space(&self) -> SpaceConfig {
        self.space
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    /// Dense Hermitian block of sector `k` at the given polarization.
    pub fn block(&self, k: usize, pol: Polarization) -> DMatrix<C64> {
        let sector = &self.sectors[k];
        let (cp, cm) = pol.coupling();
        let d = sector.dim();
        let mut h = DMatrix::from_element(d, d, ZERO);
        for (i, v) in sector.diag.iter().enumerate() {
            h[(i, i)] = C64::new(*v, 0.0);
        }
        for link in &sector.links {
            let c = match link.mode {
                Mode::Plus => cp,
                Mode::Minus => cm,
            };
            let v = c * (self.lambda * link.weight);
            h[(link.upper, link.lower)] += v;
            h[(link.lower, link.upper)] += v.conj();
        }
        h
    }
}
