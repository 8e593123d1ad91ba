//! Single-NV physics under a perpendicular bias field.
//!
//! The spin-1 ground state `D (J^z)² + γ B⊥ J^x` splits into a dark state
//! `|D⟩ = (|+1⟩ − |−1⟩)/√2` at energy `D` and a two-level system spanned by
//! `|0⟩` and the bright state `|B⟩ = (|+1⟩ + |−1⟩)/√2`. The qubit lives on the
//! dressed pair `|0̃⟩, |B̃⟩`, mixed by the angle `α = atan(2γB⊥/D)`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix3x2, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{spin_one_matrices, Operator};

/// Device constants, all in linear-frequency units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvConstants {
    /// Zero-field splitting, MHz.
    pub d_mhz: f64,
    /// Gyromagnetic ratio, MHz/G.
    pub gamma_mhz_per_gauss: f64,
    /// Dipolar constant, MHz·nm³.
    pub j_dipole_mhz_nm3: f64,
}

impl Default for NvConstants {
    fn default() -> Self {
        NvConstants { d_mhz: 2870.0, gamma_mhz_per_gauss: 2.8, j_dipole_mhz_nm3: 52.0 }
    }
}

impl NvConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_mhz", self.d_mhz),
            ("gamma_mhz_per_gauss", self.gamma_mhz_per_gauss),
            ("j_dipole_mhz_nm3", self.j_dipole_mhz_nm3),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be strictly positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_field(b_perp: f64) -> Result<()> {
    if !(b_perp.is_finite() && b_perp >= 0.0) {
        return Err(Error::invalid("b_perp", format!("field must be finite and non-negative, got {b_perp}")));
    }
    Ok(())
}

/// `α = atan(2γB⊥/D)`
pub fn mixing_angle(b_perp: f64, c: &NvConstants) -> f64 {
    (2.0 * c.gamma_mhz_per_gauss * b_perp / c.d_mhz).atan()
}

/// `√(D² + 4γ²B⊥²)`, MHz.
pub fn qubit_splitting(b_perp: f64, c: &NvConstants) -> f64 {
    let g = c.gamma_mhz_per_gauss * b_perp;
    (c.d_mhz * c.d_mhz + 4.0 * g * g).sqrt()
}

/// `D (J^z)² + γ B⊥ J^x` in the basis `|+1⟩, |0⟩, |−1⟩`.
pub fn nv_hamiltonian(b_perp: f64, c: &NvConstants) -> Result<Operator> {
    check_field(b_perp)?;
    c.validate()?;
    Ok(Operator::from_dense(nv_matrix(b_perp, c)))
}

fn nv_matrix(b_perp: f64, c: &NvConstants) -> DMatrix<C64> {
    let [jx, _, jz] = spin_one_matrices();
    &jz * &jz * C64::new(c.d_mhz, 0.0) + jx * C64::new(c.gamma_mhz_per_gauss * b_perp, 0.0)
}

fn ket(a: f64, b: f64, c: f64) -> Vector3<C64> {
    Vector3::new(C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0))
}

/// `|0⟩`
pub fn ket_zero() -> Vector3<C64> {
    ket(0.0, 1.0, 0.0)
}

/// `|B⟩ = (|+1⟩ + |−1⟩)/√2`
pub fn ket_bright() -> Vector3<C64> {
    ket(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2)
}

/// `|D⟩ = (|+1⟩ − |−1⟩)/√2`
pub fn ket_dark() -> Vector3<C64> {
    ket(FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedEnergies {
    pub ground: f64,
    pub bright: f64,
    pub dark: f64,
}

/// Dressed eigenbasis of [`nv_hamiltonian`].
#[derive(Clone, Debug)]
pub struct DressedBasis {
    pub b_perp: f64,
    pub alpha: f64,
    pub ket0t: Vector3<C64>,
    pub ket_bt: Vector3<C64>,
    pub ket_d: Vector3<C64>,
    pub energies: DressedEnergies,
}

impl DressedBasis {
    pub fn splitting(&self) -> f64 {
        self.energies.bright - self.energies.ground
    }

    /// The 3×2 isometry with columns `|0̃⟩, |B̃⟩`.
    pub fn isometry(&self) -> Matrix3x2<C64> {
        Matrix3x2::from_columns(&[self.ket0t, self.ket_bt])
    }

    /// Largest deviation of the three kets from orthonormality.
    pub fn orthonormality_error(&self) -> f64 {
        let kets = [self.ket0t, self.ket_bt, self.ket_d];
        let mut worst = 0.0f64;
        for (i, a) in kets.iter().enumerate() {
            for (j, b) in kets.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dotc(b) - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Diagonalize [`nv_hamiltonian`] and label its eigenvectors.
///
/// The Hamiltonian is rotated into the parity basis `|0⟩, |B⟩, |D⟩`, where it
/// is block diagonal; the even 2×2 block is diagonalized numerically, which
/// keeps the `B⊥ = 0` degeneracy between `|B⟩` and `|D⟩` harmless. Phases are
/// fixed so each ket has a real positive overlap with its closed form.
pub fn dressed_basis(b_perp: f64, c: &NvConstants) -> Result<DressedBasis> {
    check_field(b_perp)?;
    c.validate()?;
    let h = nv_matrix(b_perp, c);
    let parity = Matrix3::from_columns(&[ket_zero(), ket_bright(), ket_dark()]);
    let parity_d = DMatrix::from_column_slice(3, 3, parity.as_slice());
    let hp = parity_d.adjoint() * &h * &parity_d;
    let scale = c.d_mhz.max(c.gamma_mhz_per_gauss * b_perp);
    let leak = hp[(0, 2)].norm().max(hp[(1, 2)].norm());
    if leak > 1e-12 * scale {
        return Err(Error::EigenSolver(format!("parity blocks coupled by {leak:.3e} MHz")));
    }
    let even = Matrix2::new(hp[(0, 0)], hp[(0, 1)], hp[(1, 0)], hp[(1, 1)]);
    let eig = SymmetricEigen::try_new(even, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenSolver("2×2 even block did not converge".into()))?;
    let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let lift = |col: usize| -> Vector3<C64> {
        ket_zero() * eig.eigenvectors[(0, col)] + ket_bright() * eig.eigenvectors[(1, col)]
    };

    let alpha = mixing_angle(b_perp, c);
    let (ch, sh) = ((alpha / 2.0).cos(), (alpha / 2.0).sin());
    let analytic0 = ket_zero() * C64::new(ch, 0.0) - ket_bright() * C64::new(sh, 0.0);
    let analytic_b = ket_bright() * C64::new(ch, 0.0) + ket_zero() * C64::new(sh, 0.0);
    let fix_phase = |v: Vector3<C64>, reference: &Vector3<C64>| -> Result<Vector3<C64>> {
        let overlap = reference.dotc(&v);
        if overlap.norm() < 0.5 {
            return Err(Error::EigenSolver(format!("eigenvector overlap {:.3} with closed form", overlap.norm())));
        }
        Ok(v * (overlap.conj() / overlap.norm()))
    };
    let ket0t = fix_phase(lift(lo), &analytic0)?;
    let ket_bt = fix_phase(lift(hi), &analytic_b)?;
    Ok(DressedBasis {
        b_perp,
        alpha,
        ket0t,
        ket_bt,
        ket_d: ket_dark(),
        energies: DressedEnergies {
            ground: eig.eigenvalues[lo],
            bright: eig.eigenvalues[hi],
            dark: hp[(2, 2)].re,
        },
    })
}

/// Spin-1 operators projected onto the dressed qubit, `Q† J^a Q`.
#[derive(Clone, Debug)]
pub struct ProjectedSpin {
    pub x: Matrix2<C64>,
    pub y: Matrix2<C64>,
    pub z: Matrix2<C64>,
}

pub fn project_spin_ops(basis: &DressedBasis) -> ProjectedSpin {
    let q = basis.isometry();
    let project = |m: &DMatrix<C64>| -> Matrix2<C64> {
        let j = Matrix3::from_column_slice(m.as_slice());
        q.adjoint() * j * q
    };
    let [jx, jy, jz] = spin_one_matrices();
    ProjectedSpin { x: project(&jx), y: project(&jy), z: project(&jz) }
}

/// Exchange and Ising coefficients of the effective XXZ interaction together
/// with their reparametrization into anisotropy and strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    pub g_xy: f64,
    pub g_zz: f64,
    pub lambda: f64,
    /// MHz·nm³
    pub j0: f64,
    pub trace: f64,
}

impl EffectiveCouplings {
    pub fn from_coefficients(g_xy: f64, g_zz: f64, j_dipole: f64) -> Self {
        let trace = 2.0 * g_xy + g_zz;
        EffectiveCouplings { g_xy, g_zz, lambda: (g_xy - g_zz) / trace, j0: j_dipole * trace / 3.0, trace }
    }

    /// `(g_xy, g_xy, g_zz)`
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.g_xy, self.g_xy, self.g_zz)
    }
}

/// `g_xy = 4 cos²α`, `g_zz = 8 sin²α`.
pub fn effective_couplings(b_perp: f64, c: &NvConstants) -> Result<EffectiveCouplings> {
    check_field(b_perp)?;
    c.validate()?;
    let alpha = mixing_angle(b_perp, c);
    let (s, co) = alpha.sin_cos();
    Ok(EffectiveCouplings::from_coefficients(4.0 * co * co, 8.0 * s * s, c.j_dipole_mhz_nm3))
}

/// `(3 (b̂·r̂)² − 1)/2`
pub fn anisotropy_factor(axis: &Vector3<f64>, r_hat: &Vector3<f64>) -> f64 {
    let d = axis.dot(r_hat);
    (3.0 * d * d - 1.0) / 2.0
}

/// Orientation of one spin's internal axes in lab coordinates: columns are the
/// lab-frame directions of the local `x, y, z` axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinFrame {
    pub axes: Matrix3<f64>,
}

impl SpinFrame {
    pub fn identity() -> Self {
        SpinFrame { axes: Matrix3::identity() }
    }

    /// Local `z` along `quantization`, local `x` along `transverse`.
    pub fn new(transverse: Vector3<f64>, quantization: Vector3<f64>) -> Result<Self> {
        let z = quantization.normalize();
        let x = transverse.normalize();
        if x.dot(&z).abs() > 1e-9 {
            return Err(Error::invalid("frame", "local x and z axes are not orthogonal"));
        }
        Ok(SpinFrame { axes: Matrix3::from_columns(&[x, z.cross(&x), z]) })
    }

    /// 3×3 matrix of `J · u` for a lab-frame unit vector `u`.
    fn component(&self, u: &Vector3<f64>, j: &[DMatrix<C64>; 3]) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(3, 3);
        for a in 0..3 {
            let w = self.axes.column(a).dot(u);
            out += &j[a] * C64::new(w, 0.0);
        }
        out
    }
}

/// Two-body decomposition of a projected, secular pair Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDecomposition {
    /// Coefficient of `s^x s^x + s^y s^y`.
    pub exchange: f64,
    /// Coefficient of `s^z s^z`.
    pub ising: f64,
    /// Coefficients of `s^z ⊗ 1` and `1 ⊗ s^z`.
    pub single_body: [f64; 2],
    pub identity: f64,
    /// Frobenius norm of what the basis above does not capture.
    pub residual: f64,
}

fn kron3(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Project `−[3 (J_i·r̂)(J_j·r̂) − J_i·J_j]` (unit prefactor `J/r³`) onto the
/// product of two qubit subspaces, keep the secular part (terms that conserve
/// the total qubit `σ^z`) and decompose it.
///
/// `q_i`, `q_j` are 3×2 isometries whose first column is the lower qubit
/// level.
pub fn project_pair(
    frame_i: &SpinFrame,
    q_i: &Matrix3x2<C64>,
    frame_j: &SpinFrame,
    q_j: &Matrix3x2<C64>,
    r_hat: &Vector3<f64>,
) -> PairDecomposition {
    let j = spin_one_matrices();
    let ri = frame_i.component(r_hat, &j);
    let rj = frame_j.component(r_hat, &j);
    let mut h = kron3(&ri, &rj) * C64::new(-3.0, 0.0);
    for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
        h += kron3(&frame_i.component(&e, &j), &frame_j.component(&e, &j));
    }
    let qi = DMatrix::from_column_slice(3, 2, q_i.as_slice());
    let qj = DMatrix::from_column_slice(3, 2, q_j.as_slice());
    let q = kron3(&qi, &qj);
    let mut p = q.adjoint() * h * q;
    // secular filter: basis index bits count the upper level on each spin
    for r in 0..4usize {
        for col in 0..4usize {
            if r.count_ones() != col.count_ones() {
                p[(r, col)] = C64::new(0.0, 0.0);
            }
        }
    }
    decompose_pair(&p)
}

fn decompose_pair(p: &DMatrix<C64>) -> PairDecomposition {
    let c = |v: f64| C64::new(v, 0.0);
    // lower level first, so s^z = diag(−1/2, +1/2)
    let sz = DMatrix::from_row_slice(2, 2, &[c(-0.5), c(0.0), c(0.0), c(0.5)]);
    let sx = DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.5), c(0.5), c(0.0)]);
    let sy = DMatrix::from_row_slice(2, 2, &[c(0.0), C64::new(0.0, -0.5), C64::new(0.0, 0.5), c(0.0)]);
    let id = DMatrix::<C64>::identity(2, 2);
    let basis = [
        sx.kronecker(&sx) + sy.kronecker(&sy),
        sz.kronecker(&sz),
        sz.kronecker(&id),
        id.kronecker(&sz),
        id.kronecker(&id),
    ];
    // the basis is orthogonal under the Hilbert–Schmidt product
    let coeffs: Vec<f64> = basis.iter().map(|b| (b.dotc(p) / b.dotc(b)).re).collect();
    let mut fit = DMatrix::<C64>::zeros(4, 4);
    for (b, &k) in basis.iter().zip(&coeffs) {
        fit += b * c(k);
    }
    PairDecomposition {
        exchange: coeffs[0],
        ising: coeffs[1],
        single_body: [coeffs[2], coeffs[3]],
        identity: coeffs[4],
        residual: (p - fit).norm(),
    }
}

/// Output of the projection oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceCouplings {
    pub couplings: EffectiveCouplings,
    pub decomposition: PairDecomposition,
    /// Dipolar anisotropy of the probe direction relative to the field.
    pub anisotropy: f64,
}

pub const DECOMPOSITION_TOL: f64 = 1e-9;

/// Effective couplings from the full two-spin dipolar Hamiltonian, projected
/// with `Q ⊗ Q` and normalized by `−A(r̂)`.
///
/// Both spins share the frame in which the field lies along local `x`; `r_hat`
/// is the pair direction in that frame.
pub fn effective_couplings_bruteforce(
    b_perp: f64,
    c: &NvConstants,
    r_hat: &Vector3<f64>,
) -> Result<BruteForceCouplings> {
    let basis = dressed_basis(b_perp, c)?;
    let q = basis.isometry();
    let frame = SpinFrame::identity();
    pair_couplings(&frame, &q, &frame, &q, r_hat, &Vector3::x(), c)
}

/// Shared normalization step for [`effective_couplings_bruteforce`] and the
/// inter-group variant: decompose and divide by `−A_axis(r̂)`.
pub fn pair_couplings(
    frame_i: &SpinFrame,
    q_i: &Matrix3x2<C64>,
    frame_j: &SpinFrame,
    q_j: &Matrix3x2<C64>,
    r_hat: &Vector3<f64>,
    anisotropy_axis: &Vector3<f64>,
    c: &NvConstants,
) -> Result<BruteForceCouplings> {
    let norm = r_hat.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::invalid("r_hat", "pair direction must be nonzero"));
    }
    let r_hat = r_hat / norm;
    let a = anisotropy_factor(&anisotropy_axis.normalize(), &r_hat);
    if a.abs() < 1e-6 {
        return Err(Error::invalid("r_hat", format!("anisotropy {a:.2e} too close to zero to normalize")));
    }
    let dec = project_pair(frame_i, q_i, frame_j, q_j, &r_hat);
    if dec.residual > DECOMPOSITION_TOL {
        return Err(Error::DecompositionResidual { residual: dec.residual, tolerance: DECOMPOSITION_TOL });
    }
    let g_xy = dec.exchange / -a;
    let g_zz = dec.ising / -a;
    Ok(BruteForceCouplings {
        couplings: EffectiveCouplings::from_coefficients(g_xy, g_zz, c.j_dipole_mhz_nm3),
        decomposition: dec,
        anisotropy: a,
    })
}

/// Couplings of the conventional `{|0⟩, |−1⟩}` encoding under an on-axis
/// field, reported as magnitudes and a relative sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnAxisCouplings {
    pub g_xy_magnitude: f64,
    pub g_zz_magnitude: f64,
    /// True when exchange and Ising parts carry opposite signs.
    pub opposite_sign: bool,
    pub trace_magnitude: f64,
    /// Signed coefficients in the same `−J A/r³` normalization as the
    /// perpendicular case; only their relative sign is physical.
    pub signed: [f64; 2],
    pub single_body: [f64; 2],
}

impl OnAxisCouplings {
    /// Trace of the perpendicular encoding over the on-axis trace.
    pub fn enhancement(&self, perpendicular: &EffectiveCouplings) -> f64 {
        perpendicular.trace.abs() / self.trace_magnitude
    }

    /// Native coupling vector `(g_xy, g_xy, g_zz)` with the computed signs.
    pub fn native_vector(&self) -> Vector3<f64> {
        Vector3::new(self.signed[0], self.signed[0], self.signed[1])
    }
}

/// On-axis baseline from the same projection machinery: quantization along the
/// NV axis, qubit `{|0⟩, |−1⟩}` with `|0⟩` as the lower level.
pub fn onaxis_couplings() -> Result<OnAxisCouplings> {
    let q = Matrix3x2::from_columns(&[ket_zero(), ket(0.0, 0.0, 1.0)]);
    let frame = SpinFrame::identity();
    // any direction off the magic angle; the result is direction independent
    let r_hat = Vector3::new(0.3, -0.2, 0.9).normalize();
    let bf = pair_couplings(&frame, &q, &frame, &q, &r_hat, &Vector3::z(), &NvConstants::default())?;
    let (gxy, gzz) = (bf.couplings.g_xy, bf.couplings.g_zz);
    let a = bf.anisotropy;
    Ok(OnAxisCouplings {
        g_xy_magnitude: gxy.abs(),
        g_zz_magnitude: gzz.abs(),
        opposite_sign: gxy * gzz < 0.0,
        trace_magnitude: (2.0 * gxy + gzz).abs(),
        signed: [gxy, gzz],
        single_body: [bf.decomposition.single_body[0] / -a, bf.decomposition.single_body[1] / -a],
    })
}

/// Field at which `g_xy = g_zz`: `D / (2√2 γ)`.
pub fn su2_field(c: &NvConstants) -> f64 {
    c.d_mhz / (2.0 * SQRT_2 * c.gamma_mhz_per_gauss)
}

/// Root of `g_xy(B) − g_zz(B)` by bisection on the closed forms.
pub fn su2_field_by_bisection(c: &NvConstants, tol_gauss: f64) -> Result<f64> {
    let diff = |b: f64| -> f64 {
        let a = mixing_angle(b, c);
        4.0 * a.cos().powi(2) - 8.0 * a.sin().powi(2)
    };
    let (mut lo, mut hi) = (0.0, c.d_mhz / c.gamma_mhz_per_gauss);
    if diff(lo) <= 0.0 || diff(hi) >= 0.0 {
        return Err(Error::ToleranceNotReached("SU(2) root not bracketed".into()));
    }
    while hi - lo > tol_gauss {
        let mid = 0.5 * (lo + hi);
        if diff(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `⟨B̃|J^x|B̃⟩ − ⟨0̃|J^x|0̃⟩` in units of the single-spin moment; equals
/// `2 sin α`.
pub fn moment_difference(b_perp: f64, c: &NvConstants) -> Result<f64> {
    let basis = dressed_basis(b_perp, c)?;
    let jx = Matrix3::from_column_slice(spin_one_matrices()[0].as_slice());
    let mu = |k: &Vector3<C64>| k.dotc(&(jx * k)).re;
    Ok(mu(&basis.ket_bt) - mu(&basis.ket0t))
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: NvConstants = NvConstants { d_mhz: 2870.0, gamma_mhz_per_gauss: 2.8, j_dipole_mhz_nm3: 52.0 };

    #[test]
    fn zero_field_hamiltonian_is_diagonal() {
        let h = nv_hamiltonian(0.0, &C).unwrap().to_dense();
        for (i, d) in [2870.0, 0.0, 2870.0].iter().enumerate() {
            assert_eq!(h[(i, i)].re, *d);
        }
        assert_eq!(h.iter().filter(|v| v.norm() > 0.0).count(), 2);
    }

    #[test]
    fn off_diagonal_elements_at_finite_field() {
        let b = 362.4;
        let h = nv_hamiltonian(b, &C).unwrap().to_dense();
        let expected = 2.8 * b / 2f64.sqrt();
        for (r, c) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((h[(r, c)].re - expected).abs() < 1e-12);
        }
        assert_eq!(h[(0, 2)].norm(), 0.0);
    }

    #[test]
    fn dark_eigenvalue_survives_any_field() {
        for b in [0.0, 10.0, 362.4, 5000.0] {
            let h = nv_hamiltonian(b, &C).unwrap().to_dense();
            let eig = h.symmetric_eigen();
            assert!(eig.eigenvalues.iter().any(|e| (e - 2870.0).abs() < 1e-9), "B = {b}");
        }
    }

    #[test]
    fn negative_field_rejected() {
        assert!(nv_hamiltonian(-1.0, &C).is_err());
        assert!(effective_couplings(f64::NAN, &C).is_err());
        let bad = NvConstants { d_mhz: 0.0, ..C };
        assert!(nv_hamiltonian(1.0, &bad).is_err());
    }

    #[test]
    fn zero_field_basis() {
        let basis = dressed_basis(0.0, &C).unwrap();
        assert_eq!(basis.alpha, 0.0);
        assert!((basis.ket0t - ket_zero()).norm() < 1e-14);
        assert!((basis.splitting() - 2870.0).abs() < 1e-9);
        assert!(basis.orthonormality_error() < 1e-12);
    }

    #[test]
    fn su2_point_basis() {
        let basis = dressed_basis(362.4, &C).unwrap();
        assert!((basis.alpha - 0.6155).abs() < 1e-3);
        let splitting = (2870f64.powi(2) + (2.0 * 2.8 * 362.4f64).powi(2)).sqrt();
        assert!((basis.splitting() - splitting).abs() < 1e-9 * splitting);
        assert!((splitting - 3515.04).abs() < 0.01);
        assert!((basis.energies.dark - 2870.0).abs() < 1e-9);
        assert!(basis.orthonormality_error() < 1e-12);
    }

    #[test]
    fn projected_px_closed_form() {
        for b in [0.0, 120.0, 362.4, 1500.0] {
            let basis = dressed_basis(b, &C).unwrap();
            let p = project_spin_ops(&basis);
            let (s, co) = basis.alpha.sin_cos();
            // cos α σx + sin α σz with σz = diag(−1, +1)
            let expected = Matrix2::new(C64::new(-s, 0.0), C64::new(co, 0.0), C64::new(co, 0.0), C64::new(s, 0.0));
            assert!((p.x - expected).norm() < 1e-12, "B = {b}");
            assert!(p.y.norm() < 1e-12 && p.z.norm() < 1e-12);
        }
    }

    #[test]
    fn px_diagonal_at_su2_point() {
        let p = project_spin_ops(&dressed_basis(su2_field(&C), &C).unwrap());
        let inv = 1.0 / 3f64.sqrt();
        assert!((p.x[(0, 0)].re + inv).abs() < 1e-12);
        assert!((p.x[(1, 1)].re - inv).abs() < 1e-12);
    }

    #[test]
    fn coupling_endpoints() {
        let zero = effective_couplings(0.0, &C).unwrap();
        assert_eq!((zero.g_xy, zero.g_zz, zero.lambda), (4.0, 0.0, 0.5));
        let su2 = effective_couplings(su2_field(&C), &C).unwrap();
        assert!((su2.g_xy - 8.0 / 3.0).abs() < 1e-12 && (su2.g_zz - 8.0 / 3.0).abs() < 1e-12);
        assert!(su2.lambda.abs() < 1e-12);
        let big = effective_couplings(1e9, &C).unwrap();
        assert!(big.g_xy < 1e-9 && (big.g_zz - 8.0).abs() < 1e-9 && (big.lambda + 1.0).abs() < 1e-9);
        assert!((su2.j0 - 52.0 * 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_small_at_quoted_field() {
        let c = effective_couplings(362.4, &C).unwrap();
        assert!(c.lambda.abs() < 1e-3);
    }

    #[test]
    fn bruteforce_matches_closed_form_at_endpoints() {
        let bf = effective_couplings_bruteforce(0.0, &C, &Vector3::x()).unwrap();
        assert!((bf.couplings.g_xy - 4.0).abs() < 1e-9 && bf.couplings.g_zz.abs() < 1e-9);
        let bf = effective_couplings_bruteforce(362.4, &C, &Vector3::new(0.2, 0.5, 0.7)).unwrap();
        let cf = effective_couplings(362.4, &C).unwrap();
        assert!((bf.couplings.g_xy - cf.g_xy).abs() < 1e-9);
        assert!((bf.couplings.g_zz - cf.g_zz).abs() < 1e-9);
        assert!(bf.decomposition.single_body.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bruteforce_rejects_magic_angle() {
        let magic = Vector3::new(1.0 / 3f64.sqrt(), (2.0f64 / 3.0).sqrt(), 0.0);
        assert!(effective_couplings_bruteforce(100.0, &C, &magic).is_err());
    }

    #[test]
    fn onaxis_baseline() {
        let on = onaxis_couplings().unwrap();
        assert!((on.g_xy_magnitude - 2.0).abs() < 1e-9);
        assert!((on.g_zz_magnitude - 2.0).abs() < 1e-9);
        assert!(on.opposite_sign);
        assert!((on.trace_magnitude - 2.0).abs() < 1e-9);
        let perp = effective_couplings(250.0, &C).unwrap();
        assert!((on.enhancement(&perp) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn su2_field_value_and_scaling() {
        let b = su2_field(&C);
        assert!((b - 362.39).abs() < 0.005);
        let doubled = NvConstants { d_mhz: 2.0 * C.d_mhz, ..C };
        assert!((su2_field(&doubled) - 2.0 * b).abs() < 1e-9);
        assert!((su2_field_by_bisection(&C, 1e-9).unwrap() - b).abs() < 1e-6);
    }

    #[test]
    fn moment_difference_values() {
        assert!(moment_difference(0.0, &C).unwrap().abs() < 1e-14);
        let su2 = moment_difference(su2_field(&C), &C).unwrap();
        assert!((su2 - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(format!("{su2:.2}"), "1.15");
        assert!((moment_difference(1e9, &C).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn projection_identity_sweep() {
        for k in 0..100 {
            let b = 2000.0 * k as f64 / 99.0;
            let p = project_spin_ops(&dressed_basis(b, &C).unwrap());
            assert!(p.y.norm() < 1e-12 && p.z.norm() < 1e-12, "B = {b}");
        }
    }

    #[test]
    fn bruteforce_sweep_agrees() {
        let r_hat = Vector3::new(0.8, 0.1, -0.3);
        let mut worst = 0.0f64;
        for k in 0..50 {
            let b = 1000.0 * k as f64 / 49.0;
            let bf = effective_couplings_bruteforce(b, &C, &r_hat).unwrap();
            let cf = effective_couplings(b, &C).unwrap();
            worst = worst.max((bf.couplings.g_xy - cf.g_xy).abs()).max((bf.couplings.g_zz - cf.g_zz).abs());
            assert!((bf.couplings.trace - 8.0).abs() < 1e-9);
        }
        assert!(worst < 1e-9, "worst deviation {worst:e}");
    }

    #[test]
    fn lambda_monotone() {
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let l = effective_couplings(10.0 * k as f64, &C).unwrap().lambda;
            assert!(l < prev);
            assert!((-1.0..=0.5).contains(&l));
            prev = l;
        }
    }
}
