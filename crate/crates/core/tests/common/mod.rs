//! Dense brute-force reference constructions shared by the integration tests.
//! Everything here is built from Kronecker products of single-factor
//! matrices, without touching the library's sparse operator code.

#![allow(dead_code)]

use cavity_berry::model::ModelParams;
use cavity_berry::poincare_path::Schedule;
use nalgebra::{DMatrix, DVector};
use cavity_berry::hilbert::C64;

pub fn kron3(a: &DMatrix<C64>, b: &DMatrix<C64>, c: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(&b.kronecker(c))
}

fn eye(n: usize) -> DMatrix<C64> {
    DMatrix::identity(n, n)
}

/// Single-mode annihilator on `0..=nmax`.
pub fn ladder(nmax: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(nmax + 1, nmax + 1);
    for n in 1..=nmax {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Atom matrices in the ordered basis `(|1⟩, |2⟩)`.
fn atom(r: usize, c: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(2, 2);
    m[(r, c)] = C64::new(1.0, 0.0);
    m
}

pub struct DenseOps {
    pub a_plus: DMatrix<C64>,
    pub a_minus: DMatrix<C64>,
    pub sigma21: DMatrix<C64>,
    pub p11: DMatrix<C64>,
    pub p22: DMatrix<C64>,
}

pub fn dense_ops(np: usize, nm: usize) -> DenseOps {
    let (ip, im) = (eye(np + 1), eye(nm + 1));
    DenseOps {
        a_plus: kron3(&eye(2), &ladder(np), &im),
        a_minus: kron3(&eye(2), &ip, &ladder(nm)),
        sigma21: kron3(&atom(1, 0), &ip, &im),
        p11: kron3(&atom(0, 0), &ip, &im),
        p22: kron3(&atom(1, 1), &ip, &im),
    }
}

/// Effective Hamiltonian with the drive couplings `cos(θ/2)e^{iφ/2}`,
/// `sin(θ/2)e^{−iφ/2}` multiplied by the common factor `e^{−iφ/2}`.
pub fn dense_hamiltonian(np: usize, nm: usize, p: &ModelParams, theta: f64, phi: f64) -> DMatrix<C64> {
    let o = dense_ops(np, nm);
    let gauge = C64::from_polar(1.0, -phi / 2.0);
    let cp = C64::from_polar((theta / 2.0).cos(), phi / 2.0) * gauge;
    let cm = C64::from_polar((theta / 2.0).sin(), -phi / 2.0) * gauge;
    let w = (&o.a_plus * cp + &o.a_minus * cm) * &o.sigma21;
    let num = o.a_plus.adjoint() * &o.a_plus + o.a_minus.adjoint() * &o.a_minus;
    let r = |x: f64| C64::new(x, 0.0);
    &o.p22 * r(p.omega_drive().powi(2) / p.delta())
        + num * &o.p11 * r(p.g().powi(2) / p.delta())
        + (&w + w.adjoint()) * r(p.lambda())
}

pub fn dense_excitation(np: usize, nm: usize) -> DMatrix<C64> {
    let o = dense_ops(np, nm);
    o.a_plus.adjoint() * &o.a_plus + o.a_minus.adjoint() * &o.a_minus + o.p22
}

/// `exp(−i h τ)` from a full dense eigendecomposition.
pub fn dense_unitary(h: &DMatrix<C64>, tau: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * tau)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Fourth-order commutator-free Magnus propagation on the full dense space.
pub fn dense_evolve(psi: &DVector<C64>, np: usize, nm: usize, p: &ModelParams, s: &Schedule, steps: usize) -> DVector<C64> {
    let h = s.duration() / steps as f64;
    let c = 3f64.sqrt() / 6.0;
    let (a1, a2) = (C64::new(0.25 + c, 0.0), C64::new(0.25 - c, 0.0));
    let mut v = psi.clone();
    for k in 0..steps {
        let t = k as f64 * h;
        let at = |x: f64| {
            let q = s.at(x);
            dense_hamiltonian(np, nm, p, q.theta, q.phi)
        };
        let h1 = at(t + (0.5 - c) * h);
        let h2 = at(t + (0.5 + c) * h);
        v = dense_unitary(&(&h1 * a1 + &h2 * a2), h) * v;
        v = dense_unitary(&(&h1 * a2 + &h2 * a1), h) * v;
    }
    v
}

/// Midpoint-frozen propagation on the full dense space.
pub fn dense_evolve_midpoint(psi: &DVector<C64>, np: usize, nm: usize, p: &ModelParams, s: &Schedule, steps: usize) -> DVector<C64> {
    let h = s.duration() / steps as f64;
    let mut v = psi.clone();
    for k in 0..steps {
        let q = s.at((k as f64 + 0.5) * h);
        v = dense_unitary(&dense_hamiltonian(np, nm, p, q.theta, q.phi), h) * v;
    }
    v
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
