//! Lanczos approximation of `exp(−i 2π H t) ψ` for large sparse Hamiltonians.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::{Operator, StateVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Maximum Krylov subspace dimension per step.
    pub max_dim: usize,
    /// Error bound per accepted step (2-norm of the state error).
    pub step_tol: f64,
    /// Cap on accepted plus rejected steps.
    pub max_steps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { max_dim: 30, step_tol: 1e-9, max_steps: 200_000 }
    }
}

struct Lanczos {
    basis: Vec<DVector<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// β of the vector that would extend the basis; zero on exact breakdown.
    residual: f64,
}

fn lanczos(h: &Operator, v0: &DVector<C64>, max_dim: usize) -> Lanczos {
    let dim = v0.len();
    let m = max_dim.min(dim).max(1);
    let mut basis: Vec<DVector<C64>> = vec![v0.clone()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = DVector::zeros(dim);
    let mut residual = 0.0;
    for j in 0..m {
        h.matvec_into(basis[j].as_slice(), w.as_mut_slice());
        let a = basis[j].dotc(&w).re;
        alpha.push(a);
        // full reorthogonalization (twice is enough)
        for _ in 0..2 {
            for v in &basis {
                let proj = v.dotc(&w);
                w.axpy(-proj, v, C64::new(1.0, 0.0));
            }
        }
        let b = w.norm();
        residual = b;
        if j + 1 == m || b < 1e-12 * (1.0 + a.abs()) {
            if b < 1e-12 * (1.0 + a.abs()) {
                residual = 0.0;
            }
            break;
        }
        beta.push(b);
        basis.push(&w / C64::new(b, 0.0));
    }
    Lanczos { basis, alpha, beta, residual }
}

/// Evolve with the Lanczos propagator; `t` in μs, `h` in MHz.
pub fn evolve_krylov(psi: &StateVector, h: &Operator, t: f64, opts: KrylovOptions) -> Result<StateVector> {
    if psi.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi.dim() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("time must be finite and non-negative, got {t}")));
    }
    let mut v = psi.amplitudes().clone();
    let mut remaining = t;
    let mut step = t;
    let mut steps = 0usize;
    while remaining > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::ToleranceNotReached(format!(
                "Krylov propagation stopped after {steps} steps with {remaining} μs left"
            )));
        }
        let norm = v.norm();
        let lz = lanczos(h, &(&v / C64::new(norm, 0.0)), opts.max_dim);
        let m = lz.alpha.len();
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            tri[(i, i)] = lz.alpha[i];
            if i + 1 < m {
                tri[(i, i + 1)] = lz.beta[i];
                tri[(i + 1, i)] = lz.beta[i];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let coeffs = |tau: f64| -> DVector<C64> {
            let mut c = DVector::<C64>::zeros(m);
            for k in 0..m {
                let weight = eig.eigenvectors[(0, k)];
                let phase = C64::from_polar(weight, -std::f64::consts::TAU * eig.eigenvalues[k] * tau);
                for i in 0..m {
                    c[i] += phase * eig.eigenvectors[(i, k)];
                }
            }
            c
        };
        step = step.min(remaining);
        let mut attempt = step;
        let c = loop {
            steps += 1;
            let c = coeffs(attempt);
            let err = lz.residual * std::f64::consts::TAU * attempt * c[m - 1].norm() * norm;
            if err <= opts.step_tol || lz.residual == 0.0 {
                break c;
            }
            if steps >= opts.max_steps {
                return Err(Error::ToleranceNotReached(format!(
                    "Krylov step size collapsed to {attempt} μs (error estimate {err:.3e})"
                )));
            }
            attempt *= 0.5;
        };
        let mut next = DVector::<C64>::zeros(v.len());
        for (ci, bi) in c.iter().zip(&lz.basis) {
            next.axpy(*ci * norm, bi, C64::new(1.0, 0.0));
        }
        v = next;
        remaining -= attempt;
        if remaining < 1e-15 * t.max(1.0) {
            remaining = 0.0;
        }
        // let the next step grow again after a successful one
        step = attempt * 2.0;
    }
    let out = StateVector::from_raw(v);
    if (out.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::ToleranceNotReached(format!("norm drifted to {}", out.norm())));
    }
    Ok(out)
}
