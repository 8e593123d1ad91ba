//! Operator algebra and the time-evolution kernel.
//!
//! Spin-1 matrices use the basis order `|+1⟩, |0⟩, |−1⟩`; spin-1/2 uses
//! `|↑⟩, |↓⟩`. Hamiltonians are in MHz and times in μs, so every propagator is
//! `exp(−i 2π H t)`.

mod krylov;
mod operator;
mod spectral;
mod state;

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use krylov::{evolve_krylov, KrylovOptions};
pub use operator::{CsrMatrix, Operator, DENSE_DIM_LIMIT};
pub use spectral::{Spectral, SpectralBlock, HERMITIAN_TOL, MAX_BLOCK_DIM};
pub use state::StateVector;

use crate::error::{Error, Result};

/// Supported spin quantum numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Half,
    One,
}

impl Spin {
    pub fn dim(self) -> usize {
        match self {
            Spin::Half => 2,
            Spin::One => 3,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Spin::Half => 0.5,
            Spin::One => 1.0,
        }
    }
}

impl TryFrom<f64> for Spin {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        if s == 0.5 {
            Ok(Spin::Half)
        } else if s == 1.0 {
            Ok(Spin::One)
        } else {
            Err(Error::UnsupportedSpin(s))
        }
    }
}

/// Cartesian spin operators.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub x: Operator,
    pub y: Operator,
    pub z: Operator,
}

impl SpinOperators {
    pub fn component(&self, axis: usize) -> &Operator {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis index {axis} out of range"),
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense spin-1 matrices `(J^x, J^y, J^z)`.
pub fn spin_one_matrices() -> [DMatrix<C64>; 3] {
    let s = FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let x = DMatrix::from_row_slice(3, 3, &[z, c(s, 0.0), z, c(s, 0.0), z, c(s, 0.0), z, c(s, 0.0), z]);
    let y = DMatrix::from_row_slice(3, 3, &[z, c(0.0, -s), z, c(0.0, s), z, c(0.0, -s), z, c(0.0, s), z]);
    let zz = DMatrix::from_row_slice(3, 3, &[c(1.0, 0.0), z, z, z, z, z, z, z, c(-1.0, 0.0)]);
    [x, y, zz]
}

/// Dense spin-1/2 matrices `(s^x, s^y, s^z)`.
pub fn spin_half_matrices() -> [DMatrix<C64>; 3] {
    let z = c(0.0, 0.0);
    let h = 0.5;
    [
        DMatrix::from_row_slice(2, 2, &[z, c(h, 0.0), c(h, 0.0), z]),
        DMatrix::from_row_slice(2, 2, &[z, c(0.0, -h), c(0.0, h), z]),
        DMatrix::from_row_slice(2, 2, &[c(h, 0.0), z, z, c(-h, 0.0)]),
    ]
}

pub fn spin_operators(spin: Spin) -> SpinOperators {
    let [x, y, z] = match spin {
        Spin::Half => spin_half_matrices(),
        Spin::One => spin_one_matrices(),
    };
    SpinOperators { x: Operator::from_dense(x), y: Operator::from_dense(y), z: Operator::from_dense(z) }
}

/// Embed a single-site operator into a product space; `dims[0]` is the most
/// significant factor.
pub fn embed(local: &Operator, site: usize, dims: &[usize]) -> Result<Operator> {
    if site >= dims.len() {
        return Err(Error::invalid("site", format!("site {site} out of range for {} sites", dims.len())));
    }
    if local.dim() != dims[site] {
        return Err(Error::DimensionMismatch { expected: dims[site], found: local.dim() });
    }
    let total: usize = dims.iter().product();
    let stride: usize = dims[site + 1..].iter().product();
    let outer = total / (stride * dims[site]);
    let local_entries = local.entries();
    let mut trip = Vec::with_capacity(local_entries.len() * outer * stride);
    for hi in 0..outer {
        for lo in 0..stride {
            let base = hi * dims[site] * stride + lo;
            for &(a, b, v) in &local_entries {
                trip.push((base + a * stride, base + b * stride, v));
            }
        }
    }
    Ok(Operator::from_triplets(total, trip))
}

fn check_evolution_inputs(psi: &StateVector, h: &Operator, t: f64) -> Result<()> {
    if psi.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi.dim() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("time must be finite and non-negative, got {t}")));
    }
    h.ensure_hermitian(HERMITIAN_TOL)
}

/// Exact propagation by dense diagonalization.
pub fn evolve_dense(psi: &StateVector, h: &Operator, t: f64) -> Result<StateVector> {
    check_evolution_inputs(psi, h, t)?;
    Ok(Spectral::dense(h)?.evolve(psi, t))
}

/// `exp(−i 2π H t) ψ`: dense diagonalization up to [`DENSE_DIM_LIMIT`],
/// Lanczos above.
pub fn evolve(psi: &StateVector, h: &Operator, t: f64) -> Result<StateVector> {
    check_evolution_inputs(psi, h, t)?;
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let out = if h.dim() <= DENSE_DIM_LIMIT {
        Spectral::dense(h)?.evolve(psi, t)
    } else {
        evolve_krylov(psi, h, t, KrylovOptions::default())?
    };
    if (out.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::ToleranceNotReached(format!("norm drifted to {}", out.norm())));
    }
    Ok(out)
}

/// `⟨ψ|O|ψ⟩` for Hermitian `O`.
pub fn expectation(psi: &StateVector, op: &Operator) -> Result<f64> {
    if psi.dim() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), found: psi.dim() });
    }
    op.ensure_hermitian(HERMITIAN_TOL)?;
    let value = psi.amplitudes().dotc(&op.apply(psi.amplitudes()));
    if value.im.abs() > 1e-10 * value.re.abs().max(1.0) {
        return Err(Error::NonHermitian(value.im.abs()));
    }
    Ok(value.re)
}
