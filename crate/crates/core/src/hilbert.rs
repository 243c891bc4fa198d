//! Truncated Hilbert space of the atom and the two circularly polarized
//! cavity modes: `atom ⊗ mode₊ ⊗ mode₋`.
//!
//! The flat basis index is atom-major, then the photon number `n` of mode
//! `a₊`, then the photon number `m` of mode `a₋`:
//!
//! ```text
//! index(s, n, m) = ((s - 1) * (nmax_plus + 1) + n) * (nmax_minus + 1) + m
//! ```
//!
//! CSV outputs list amplitudes in this order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Norm tolerance for states that claim to be normalized.
pub const NORM_TOL: f64 = 1e-10;

/// Tolerance on `max|A - A†|` for operators flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Atomic level. `Lower` is `|1⟩`, `Upper` is `|2⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomLevel {
    Lower,
    Upper,
}

impl AtomLevel {
    pub fn from_number(s: u8) -> Result<Self> {
        match s {
            1 => Ok(AtomLevel::Lower),
            2 => Ok(AtomLevel::Upper),
            _ => Err(Error::range("atom level", alloc::format!("{s} (expected 1 or 2)"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            AtomLevel::Lower => 1,
            AtomLevel::Upper => 2,
        }
    }

    fn offset(self) -> usize {
        match self {
            AtomLevel::Lower => 0,
            AtomLevel::Upper => 1,
        }
    }
}

/// Cavity mode: `Plus` is right circular (`a₊`), `Minus` is left circular (`a₋`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Plus,
    Minus,
}

/// Product-basis label `|s⟩|n⟩₊|m⟩₋`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisLabel {
    pub level: AtomLevel,
    pub n: usize,
    pub m: usize,
}

impl BasisLabel {
    pub const fn new(level: AtomLevel, n: usize, m: usize) -> Self {
        BasisLabel { level, n, m }
    }

    /// Eigenvalue of `a₊†a₊ + a₋†a₋ + σ₂₂`.
    pub fn excitations(&self) -> usize {
        self.n + self.m + self.level.offset()
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}>", self.level.number(), self.n, self.m)
    }
}

/// Photon-number truncation of the two cavity modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceConfig {
    nmax_plus: usize,
    nmax_minus: usize,
}

impl SpaceConfig {
    pub const ATOM_DIM: usize = 2;

    pub fn new(nmax_plus: usize, nmax_minus: usize) -> Self {
        SpaceConfig { nmax_plus, nmax_minus }
    }

    pub fn nmax_plus(&self) -> usize {
        self.nmax_plus
    }

    pub fn nmax_minus(&self) -> usize {
        self.nmax_minus
    }

    pub fn nmax(&self, mode: Mode) -> usize {
        match mode {
            Mode::Plus => self.nmax_plus,
            Mode::Minus => self.nmax_minus,
        }
    }

    pub fn dim(&self) -> usize {
        Self::ATOM_DIM * (self.nmax_plus + 1) * (self.nmax_minus + 1)
    }

    pub fn contains(&self, label: BasisLabel) -> bool {
        label.n <= self.nmax_plus && label.m <= self.nmax_minus
    }

    pub fn index(&self, label: BasisLabel) -> Result<usize> {
        if !self.contains(label) {
            return Err(Error::range(
                "basis label",
                alloc::format!("{label} outside nmax = ({}, {})", self.nmax_plus, self.nmax_minus),
            ));
        }
        Ok(self.index_unchecked(label))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, label: BasisLabel) -> usize {
        (label.level.offset() * (self.nmax_plus + 1) + label.n) * (self.nmax_minus + 1) + label.m
    }

    /// Inverse of [`SpaceConfig::index`]. Panics if `index >= dim()`.
    pub fn label(&self, index: usize) -> BasisLabel {
        assert!(index < self.dim(), "basis index {index} out of range");
        let m = index % (self.nmax_minus + 1);
        let rest = index / (self.nmax_minus + 1);
        let n = rest % (self.nmax_plus + 1);
        let level = if rest / (self.nmax_plus + 1) == 0 { AtomLevel::Lower } else { AtomLevel::Upper };
        BasisLabel { level, n, m }
    }

    pub fn labels(&self) -> impl Iterator<Item = BasisLabel> + '_ {
        (0..self.dim()).map(move |i| self.label(i))
    }

    /// Basis indices grouped by excitation number, ascending. Every operator
    /// built by [`crate::model`] is block diagonal in this partition.
    pub fn excitation_sectors(&self) -> Vec<Vec<usize>> {
        let max = self.nmax_plus + self.nmax_minus + 1;
        let mut sectors = vec![Vec::new(); max + 1];
        for (i, label) in self.labels().enumerate() {
            sectors[label.excitations()].push(i);
        }
        sectors
    }

    fn check_same(&self, other: &SpaceConfig) -> Result<()> {
        if self != other {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

/// Convenience constructor mirroring [`SpaceConfig::new`].
pub fn make_space(nmax_plus: usize, nmax_minus: usize) -> SpaceConfig {
    SpaceConfig::new(nmax_plus, nmax_minus)
}

/// Pure state on a [`SpaceConfig`].
///
/// Vectors produced by constructors and by unitary evolution are normalized.
/// Results of applying a general operator are flagged unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: SpaceConfig,
    amplitudes: Vec<C64>,
    normalized: bool,
}

impl StateVector {
    /// Wraps amplitudes that must already be normalized within [`NORM_TOL`].
    pub fn from_amplitudes(space: SpaceConfig, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Dimension { expected: space.dim(), found: amplitudes.len() });
        }
        let norm = norm_of(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL || !norm.is_finite() {
            return Err(Error::range("state norm", alloc::format!("{norm} is not 1")));
        }
        Ok(StateVector { space, amplitudes, normalized: true })
    }

    /// Wraps amplitudes without any normalization requirement.
    pub fn unnormalized(space: SpaceConfig, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Dimension { expected: space.dim(), found: amplitudes.len() });
        }
        Ok(StateVector { space, amplitudes, normalized: false })
    }

    pub(crate) fn from_raw(space: SpaceConfig, amplitudes: Vec<C64>, normalized: bool) -> Self {
        debug_assert_eq!(amplitudes.len(), space.dim());
        StateVector { space, amplitudes, normalized }
    }

    pub fn zeros(space: SpaceConfig) -> Self {
        StateVector { space, amplitudes: vec![ZERO; space.dim()], normalized: false }
    }

    /// Product state `atom ⊗ plus ⊗ minus` from single-factor amplitudes.
    /// Factors shorter than the truncation are zero padded; longer ones are
    /// rejected. The result is renormalized.
    pub fn product(space: SpaceConfig, atom: [C64; 2], plus: &[C64], minus: &[C64]) -> Result<Self> {
        if plus.len() > space.nmax_plus + 1 {
            return Err(Error::range("mode + factor", alloc::format!("{} levels > nmax + 1", plus.len())));
        }
        if minus.len() > space.nmax_minus + 1 {
            return Err(Error::range("mode - factor", alloc::format!("{} levels > nmax + 1", minus.len())));
        }
        let mut amps = vec![ZERO; space.dim()];
        for (s, a) in [AtomLevel::Lower, AtomLevel::Upper].into_iter().zip(atom) {
            for (n, p) in plus.iter().enumerate() {
                for (m, q) in minus.iter().enumerate() {
                    amps[space.index_unchecked(BasisLabel::new(s, n, m))] = a * p * q;
                }
            }
        }
        let mut state = StateVector { space, amplitudes: amps, normalized: false };
        state.normalize()?;
        Ok(state)
    }

    pub fn space(&self) -> SpaceConfig {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: BasisLabel) -> Result<C64> {
        Ok(self.amplitudes[self.space.index(label)?])
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amplitudes)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::range("state norm", alloc::format!("cannot normalize norm {norm}")));
        }
        for a in &mut self.amplitudes {
            *a /= norm;
        }
        self.normalized = true;
        Ok(())
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(mut self, theta: f64) -> Self {
        let z = C64::from_polar(1.0, theta);
        for a in &mut self.amplitudes {
            *a *= z;
        }
        self
    }

    /// Total probability of the given atomic level, summed over photon sectors.
    pub fn level_population(&self, level: AtomLevel) -> f64 {
        self.space
            .labels()
            .zip(&self.amplitudes)
            .filter(|(l, _)| l.level == level)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn norm_of(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|s⟩|n⟩₊|m⟩₋` with `s ∈ {1, 2}`.
pub fn fock_state(space: SpaceConfig, s: u8, n: usize, m: usize) -> Result<StateVector> {
    let label = BasisLabel::new(AtomLevel::from_number(s)?, n, m);
    let idx = space.index(label)?;
    let mut amps = vec![ZERO; space.dim()];
    amps[idx] = ONE;
    Ok(StateVector::from_raw(space, amps, true))
}

/// Probability mass of a Poisson distribution with mean `mean` beyond `nmax`.
pub fn poisson_tail(mean: f64, nmax: usize) -> f64 {
    let mut term = (-mean).exp();
    let mut kept = 0.0;
    for n in 0..=nmax {
        if n > 0 {
            term *= mean / n as f64;
        }
        kept += term;
    }
    (1.0 - kept).max(0.0)
}

/// Single-mode coherent amplitudes `e^{-|α|²/2} αⁿ/√n!` for `n = 0..=nmax`,
/// renormalized after truncation.
pub fn coherent_amplitudes(alpha: C64, nmax: usize, tail_tol: f64) -> Result<Vec<C64>> {
    if !(tail_tol > 0.0) {
        return Err(Error::range("tail_tol", alloc::format!("{tail_tol} must be positive")));
    }
    let tail = poisson_tail(alpha.norm_sqr(), nmax);
    if tail >= tail_tol {
        return Err(Error::Truncation { tail, tol: tail_tol, nmax });
    }
    let mut amps = Vec::with_capacity(nmax + 1);
    let mut term = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..=nmax {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        amps.push(term);
    }
    let norm = norm_of(&amps);
    for a in &mut amps {
        *a /= norm;
    }
    Ok(amps)
}

/// Atom in `|1⟩`, coherent state `|α⟩` on `mode`, vacuum on the other mode.
pub fn coherent_state(space: SpaceConfig, alpha: C64, mode: Mode, tail_tol: f64) -> Result<StateVector> {
    let field = coherent_amplitudes(alpha, space.nmax(mode), tail_tol)?;
    let vacuum = [ONE];
    match mode {
        Mode::Plus => StateVector::product(space, [ONE, ZERO], &field, &vacuum),
        Mode::Minus => StateVector::product(space, [ONE, ZERO], &vacuum, &field),
    }
}

/// `⟨u|v⟩`, conjugate-linear in `u`.
pub fn inner_product(u: &StateVector, v: &StateVector) -> Result<C64> {
    u.space.check_same(&v.space)?;
    Ok(u.amplitudes.iter().zip(&v.amplitudes).map(|(a, b)| a.conj() * b).sum())
}

/// `⟨v|A|v⟩`.
pub fn expectation(op: &OperatorMatrix, v: &StateVector) -> Result<C64> {
    let av = op.apply(v)?;
    inner_product(v, &av)
}

/// Sparse complex operator in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: SpaceConfig,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and exact
    /// zeros dropped. When `hermitian` is set the result is checked against
    /// [`HERMITIAN_TOL`].
    pub fn from_triplets(
        space: SpaceConfig,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
        hermitian: bool,
    ) -> Result<Self> {
        let dim = space.dim();
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &t {
            if r >= dim || c >= dim {
                return Err(Error::Dimension { expected: dim, found: r.max(c) + 1 });
            }
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != ZERO);
        let mut row_ptr = vec![0usize; dim + 1];
        let rows: Vec<usize> = merged.iter().map(|e| e.0).collect();
        let cols: Vec<usize> = merged.iter().map(|e| e.1).collect();
        let vals: Vec<C64> = merged.iter().map(|e| e.2).collect();
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let op = OperatorMatrix { space, row_ptr, cols, vals, hermitian };
        if hermitian {
            let deviation = op.hermiticity_deviation();
            if deviation >= HERMITIAN_TOL {
                return Err(Error::NotHermitian { deviation });
            }
        }
        Ok(op)
    }

    pub fn identity(space: SpaceConfig) -> Self {
        Self::diagonal(space, |_| 1.0)
    }

    /// Real diagonal operator with entries `f(label)`.
    pub fn diagonal(space: SpaceConfig, f: impl Fn(BasisLabel) -> f64) -> Self {
        let t = space.labels().enumerate().map(|(i, l)| (i, i, C64::new(f(l), 0.0)));
        Self::from_triplets(space, t, true).expect("real diagonal is Hermitian")
    }

    pub fn space(&self) -> SpaceConfig {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Iterates stored `(row, col, value)` entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub(crate) fn apply_slice(&self, v: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `A|v⟩`, flagged unnormalized.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.space.check_same(&v.space)?;
        let mut out = vec![ZERO; self.dim()];
        self.apply_slice(&v.amplitudes, &mut out);
        Ok(StateVector::from_raw(self.space, out, false))
    }

    pub fn adjoint(&self) -> Self {
        let t = self.entries().map(|(r, c, v)| (c, r, v.conj()));
        let mut op = Self::from_triplets(self.space, t, false).expect("same space");
        op.hermitian = self.hermitian;
        op
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut op = self.clone();
        for v in &mut op.vals {
            *v *= z;
        }
        op.hermitian = self.hermitian && z.im == 0.0;
        op
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space)?;
        let t = self.entries().chain(other.entries());
        let mut op = Self::from_triplets(self.space, t, false)?;
        op.hermitian = self.hermitian && other.hermitian;
        Ok(op)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space)?;
        let mut t = Vec::new();
        for (r, k, a) in self.entries() {
            for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                t.push((r, other.cols[j], a * other.vals[j]));
            }
        }
        Self::from_triplets(self.space, t, false)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(a: &Self, b: &Self) -> Result<Self> {
        a.mul(b)?.sub(&b.mul(a)?)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max|A - A†|` over all entries.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.entries().map(|(r, c, v)| (v - self.get(c, r).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }
}

/// Annihilation operator of the chosen mode: `⟨n-1|a|n⟩ = √n`.
pub fn annihilation(space: SpaceConfig, mode: Mode) -> OperatorMatrix {
    let t = space.labels().enumerate().filter_map(|(i, l)| {
        let (k, lowered) = match mode {
            Mode::Plus if l.n > 0 => (l.n, BasisLabel::new(l.level, l.n - 1, l.m)),
            Mode::Minus if l.m > 0 => (l.m, BasisLabel::new(l.level, l.n, l.m - 1)),
            _ => return None,
        };
        Some((space.index_unchecked(lowered), i, C64::new((k as f64).sqrt(), 0.0)))
    });
    OperatorMatrix::from_triplets(space, t, false).expect("labels in range")
}

/// `a†a` of the chosen mode.
pub fn number_operator(space: SpaceConfig, mode: Mode) -> OperatorMatrix {
    OperatorMatrix::diagonal(space, |l| match mode {
        Mode::Plus => l.n as f64,
        Mode::Minus => l.m as f64,
    })
}

/// `σ_ss = |s⟩⟨s| ⊗ 1`.
pub fn atomic_projector(space: SpaceConfig, level: AtomLevel) -> OperatorMatrix {
    OperatorMatrix::diagonal(space, |l| if l.level == level { 1.0 } else { 0.0 })
}

/// `σ₂₁ = |2⟩⟨1| ⊗ 1`.
pub fn atomic_raise(space: SpaceConfig) -> OperatorMatrix {
    let t = space.labels().enumerate().filter(|(_, l)| l.level == AtomLevel::Lower).map(|(i, l)| {
        let up = BasisLabel::new(AtomLevel::Upper, l.n, l.m);
        (space.index_unchecked(up), i, ONE)
    });
    OperatorMatrix::from_triplets(space, t, false).expect("labels in range")
}
