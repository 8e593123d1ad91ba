//! Exact many-body dynamics of dressed-qubit ensembles.
//!
//! States live on `N` spin-½ sites, site 0 being the most significant bit of
//! the basis index and bit value 0 meaning spin up.

mod correlator;
mod protocol;
mod pulsed;
mod single;
mod timeseries;

pub use correlator::{autocorrelator_direct, global_decay, CorrelatorMethod, DirectCorrelator, FULL_TRACE_MAX_SPINS};
pub use protocol::{
    default_tau_wind, disorder_order_protocol, global_decay_protocol, t2_star, ProtocolKind, ProtocolSpec, WindowDynamics,
    WIND_BIAS_THRESHOLD,
};
pub use pulsed::{evolve_periods, evolve_sequence};
pub use single::{
    ac_magnetometry, contrast_period, encoding_moment, rabi_simulation, ContrastCurve, Encoding, MagnetometrySpec,
    RabiResult, RabiSpec,
};
pub use timeseries::TimeSeries;

use nalgebra::{DVector, Vector3};
use num_complex::Complex64 as C64;

use crate::ensemble::CouplingMatrix;
use crate::error::{Error, Result};
use crate::spin::Operator;

/// Default ceiling on the number of simulated spins.
pub const DEFAULT_SPIN_CAP: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }
}

#[inline]
fn bit(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

/// `2 s^z` eigenvalue of `site` in basis state `b`.
#[inline]
fn sign(n: usize, site: usize, b: usize) -> f64 {
    if b & bit(n, site) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn check_spin_count(n: usize, cap: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("spins", "at least one spin is required"));
    }
    if n > cap {
        return Err(Error::SpinCapExceeded { requested: n, cap });
    }
    Ok(())
}

/// `Σ_{i<j} J_ij Σ_a g_a s_i^a s_j^a + Σ_i h_i s_i^z + f · Σ_i s_i`.
pub fn build_hamiltonian(
    couplings: &CouplingMatrix,
    disorder: Option<&[f64]>,
    field: Option<Vector3<f64>>,
) -> Result<Operator> {
    build_hamiltonian_capped(couplings, disorder, field, DEFAULT_SPIN_CAP)
}

pub fn build_hamiltonian_capped(
    couplings: &CouplingMatrix,
    disorder: Option<&[f64]>,
    field: Option<Vector3<f64>>,
    cap: usize,
) -> Result<Operator> {
    let n = couplings.len();
    check_spin_count(n, cap)?;
    if let Some(h) = disorder {
        if h.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: h.len() });
        }
    }
    let [gx, gy, gz] = couplings.g;
    let dim = 1usize << n;
    let mut triplets = Vec::new();
    for b in 0..dim {
        let mut diag = 0.0;
        for i in 0..n {
            let si = sign(n, i, b);
            for j in (i + 1)..n {
                let jij = couplings.j[(i, j)];
                if jij == 0.0 {
                    continue;
                }
                let sj = sign(n, j, b);
                diag += jij * gz * si * sj / 4.0;
                // s^x s^x + s^y s^y flip both spins
                let amp = if si != sj { (gx + gy) / 4.0 } else { (gx - gy) / 4.0 };
                if amp != 0.0 {
                    triplets.push((b ^ bit(n, i) ^ bit(n, j), b, C64::new(jij * amp, 0.0)));
                }
            }
            if let Some(h) = disorder {
                diag += h[i] * si / 2.0;
            }
            if let Some(f) = field {
                diag += f.z * si / 2.0;
                let flipped = b ^ bit(n, i);
                // ⟨flipped|s^x + ... |b⟩; σ^y|↑⟩ = i|↓⟩, σ^y|↓⟩ = −i|↑⟩
                let v = C64::new(f.x / 2.0, f.y * si / 2.0);
                if v != C64::new(0.0, 0.0) {
                    triplets.push((flipped, b, v));
                }
            }
        }
        if diag != 0.0 {
            triplets.push((b, b, C64::new(diag, 0.0)));
        }
    }
    Ok(Operator::from_triplets(dim, triplets))
}

/// `Σ_i h_i s_i^z` as a diagonal vector.
pub fn field_diagonal(n: usize, h: &[f64]) -> Vec<f64> {
    (0..1usize << n).map(|b| (0..n).map(|i| h[i] * sign(n, i, b) / 2.0).sum()).collect()
}

/// Multiply amplitudes by `exp(−i 2π d_b t)`.
pub fn apply_diagonal_phase(psi: &mut DVector<C64>, diag: &[f64], t: f64) {
    for (a, &d) in psi.iter_mut().zip(diag) {
        *a *= C64::from_polar(1.0, -std::f64::consts::TAU * d * t);
    }
}

/// `exp(−iθ n̂·s)` on every site.
pub fn apply_global_rotation(psi: &mut DVector<C64>, n: usize, axis: &Vector3<f64>, theta: f64) {
    let u = rotation_unitary(axis, theta);
    for site in 0..n {
        apply_site_unitary(psi, n, site, &u);
    }
}

/// 2×2 matrix of `exp(−iθ n̂·σ/2)` in the `|↑⟩, |↓⟩` basis.
pub fn rotation_unitary(axis: &Vector3<f64>, theta: f64) -> [[C64; 2]; 2] {
    let a = axis.normalize();
    let (s, c) = (theta / 2.0).sin_cos();
    let i = C64::new(0.0, 1.0);
    [
        [C64::new(c, 0.0) - i * s * a.z, -i * s * C64::new(a.x, -a.y)],
        [-i * s * C64::new(a.x, a.y), C64::new(c, 0.0) + i * s * a.z],
    ]
}

pub fn apply_site_unitary(psi: &mut DVector<C64>, n: usize, site: usize, u: &[[C64; 2]; 2]) {
    let m = bit(n, site);
    for b in 0..psi.len() {
        if b & m == 0 {
            let (up, down) = (psi[b], psi[b | m]);
            psi[b] = u[0][0] * up + u[0][1] * down;
            psi[b | m] = u[1][0] * up + u[1][1] * down;
        }
    }
}

/// `⟨ψ| Σ_i s_i^a |ψ⟩`
pub fn total_spin_expectation(psi: &DVector<C64>, n: usize, axis: Axis) -> f64 {
    (0..n).map(|i| site_expectation(psi, n, i, axis)).sum()
}

/// `⟨ψ| s_i^a |ψ⟩`
pub fn site_expectation(psi: &DVector<C64>, n: usize, site: usize, axis: Axis) -> f64 {
    let m = bit(n, site);
    let mut acc = 0.0;
    for b in 0..psi.len() {
        match axis {
            Axis::Z => acc += psi[b].norm_sqr() * sign(n, site, b) / 2.0,
            Axis::X | Axis::Y => {
                if b & m == 0 {
                    // ⟨↓ component| ... 2 Re/Im of conj(up)·down
                    let z = psi[b].conj() * psi[b | m];
                    acc += if axis == Axis::X { z.re } else { z.im };
                }
            }
        }
    }
    acc
}

/// `s_i^a` as a sparse operator.
pub fn site_operator(n: usize, site: usize, axis: Axis) -> Operator {
    let dim = 1usize << n;
    let m = bit(n, site);
    let triplets = (0..dim).map(|b| {
        let s = sign(n, site, b);
        match axis {
            Axis::Z => (b, b, C64::new(s / 2.0, 0.0)),
            Axis::X => (b ^ m, b, C64::new(0.5, 0.0)),
            Axis::Y => (b ^ m, b, C64::new(0.0, s / 2.0)),
        }
    });
    Operator::from_triplets(dim, triplets)
}

/// `Σ_i s_i^a`
pub fn total_spin_operator(n: usize, axis: Axis) -> Operator {
    let dim = 1usize << n;
    let mut triplets = Vec::new();
    for i in 0..n {
        triplets.extend(site_operator(n, i, axis).entries());
    }
    Operator::from_triplets(dim, triplets)
}

/// Product state with every spin along `dir`.
pub fn polarized_state(n: usize, dir: &Vector3<f64>) -> DVector<C64> {
    let d = dir.normalize();
    let theta = d.z.clamp(-1.0, 1.0).acos();
    let phi = d.y.atan2(d.x);
    let up = C64::new((theta / 2.0).cos(), 0.0);
    let down = C64::from_polar((theta / 2.0).sin(), phi);
    DVector::from_iterator(
        1 << n,
        (0..1usize << n).map(|b| {
            let mut a = C64::new(1.0, 0.0);
            for i in 0..n {
                a *= if b & bit(n, i) == 0 { up } else { down };
            }
            a
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{embed, spin_half_matrices, Operator};
    use nalgebra::DMatrix;

    fn pair(j: f64, g: [f64; 3]) -> CouplingMatrix {
        CouplingMatrix { j: DMatrix::from_row_slice(2, 2, &[0.0, j, j, 0.0]), g }
    }

    /// Reference built from Kronecker products of the spin-½ matrices.
    fn kron_reference(c: &CouplingMatrix, h: &[f64], f: Vector3<f64>) -> DMatrix<C64> {
        let n = c.len();
        let dims = vec![2; n];
        let s = spin_half_matrices();
        let site = |i: usize, a: usize| embed(&Operator::from_dense(s[a].clone()), i, &dims).unwrap().to_dense();
        let mut out = DMatrix::zeros(1 << n, 1 << n);
        for i in 0..n {
            for j in (i + 1)..n {
                for a in 0..3 {
                    out += site(i, a) * site(j, a) * C64::new(c.j[(i, j)] * c.g[a], 0.0);
                }
            }
            out += site(i, 2) * C64::new(h[i], 0.0);
            for a in 0..3 {
                out += site(i, a) * C64::new(f[a], 0.0);
            }
        }
        out
    }

    #[test]
    fn two_spin_flip_flop_element() {
        let g = 8.0 / 3.0;
        let h = build_hamiltonian(&pair(0.3, [g, g, g]), None, None).unwrap().to_dense();
        assert!((h[(1, 2)].re - 0.3 * g / 2.0).abs() < 1e-15);
        assert!((h[(0, 0)].re - 0.3 * g / 4.0).abs() < 1e-15);
        assert!((h[(1, 1)].re + 0.3 * g / 4.0).abs() < 1e-15);
        assert_eq!(h[(0, 3)].norm(), 0.0);
    }

    #[test]
    fn matches_kronecker_reference() {
        let j = DMatrix::from_row_slice(3, 3, &[0.0, 0.4, -0.2, 0.4, 0.0, 0.7, -0.2, 0.7, 0.0]);
        let c = CouplingMatrix { j, g: [1.3, -0.4, 2.0] };
        let h = [0.5, -1.0, 0.25];
        let f = Vector3::new(0.3, -0.6, 0.9);
        let built = build_hamiltonian(&c, Some(&h), Some(f)).unwrap().to_dense();
        assert!((built - kron_reference(&c, &h, f)).norm() < 1e-13);
    }

    #[test]
    fn disorder_only_is_diagonal() {
        let c = CouplingMatrix { j: DMatrix::zeros(3, 3), g: [1.0, 1.0, 1.0] };
        let h = build_hamiltonian(&c, Some(&[1.0, 2.0, -0.5]), None).unwrap();
        assert!(h.entries().iter().all(|(r, c, _)| r == c));
        let d = field_diagonal(3, &[1.0, 2.0, -0.5]);
        for (k, v) in d.iter().enumerate() {
            assert!((h.to_dense()[(k, k)].re - v).abs() < 1e-15);
        }
    }

    #[test]
    fn heisenberg_conserves_total_spin() {
        let j = DMatrix::from_fn(5, 5, |r, c| if r == c { 0.0 } else { 1.0 / (1.0 + (r + c) as f64) });
        let g = 8.0 / 3.0;
        let h = build_hamiltonian(&CouplingMatrix { j, g: [g, g, g] }, None, None).unwrap();
        for a in [Axis::X, Axis::Y, Axis::Z] {
            let comm = h.commutator(&total_spin_operator(5, a)).unwrap();
            assert!(comm.max_abs_entry() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn cap_enforced() {
        let c = CouplingMatrix { j: DMatrix::zeros(15, 15), g: [1.0; 3] };
        assert!(matches!(build_hamiltonian(&c, None, None), Err(Error::SpinCapExceeded { .. })));
        let small = pair(1.0, [1.0; 3]);
        assert!(build_hamiltonian(&small, Some(&[1.0]), None).is_err());
    }

    #[test]
    fn rotations_and_expectations() {
        let n = 3;
        let mut psi = polarized_state(n, &Vector3::z());
        apply_global_rotation(&mut psi, n, &Vector3::y(), std::f64::consts::FRAC_PI_2);
        assert!((total_spin_expectation(&psi, n, Axis::X) - 1.5).abs() < 1e-14);
        let x = polarized_state(n, &Vector3::x());
        assert!((psi.dotc(&x).norm() - 1.0).abs() < 1e-14);
        apply_global_rotation(&mut psi, n, &Vector3::x(), -std::f64::consts::FRAC_PI_2);
        assert!((total_spin_expectation(&psi, n, Axis::X) - 1.5).abs() < 1e-14);
        let mut p = polarized_state(2, &Vector3::x());
        apply_global_rotation(&mut p, 2, &Vector3::z(), std::f64::consts::FRAC_PI_2);
        assert!((total_spin_expectation(&p, 2, Axis::Y) - 1.0).abs() < 1e-14);
        let yy = polarized_state(2, &Vector3::y());
        let op = total_spin_operator(2, Axis::Y);
        assert!((yy.dotc(&op.apply(&yy)).re - 1.0).abs() < 1e-14);
        let zop = site_operator(2, 0, Axis::Z);
        let s = crate::spin::StateVector::from_amplitudes(polarized_state(2, &-Vector3::z())).unwrap();
        assert!((crate::spin::expectation(&s, &zop).unwrap() + 0.5).abs() < 1e-15);
    }
}
