use nalgebra::DVector;
use num_complex::Complex64 as C64;

use super::apply_global_rotation;
use crate::sequence::{Element, PulseSequence};
use crate::spin::Spectral;

/// Run one period of `seq` with ideal global pulses. `wait(psi, duration,
/// parity)` performs each free period; `parity` counts π pulses so far modulo
/// 2, starting from `parity`. Returns the parity after the period.
pub(crate) fn run_sequence<F>(psi: &mut DVector<C64>, n: usize, seq: &PulseSequence, mut parity: usize, wait: &mut F) -> usize
where
    F: FnMut(&mut DVector<C64>, f64, usize),
{
    for e in &seq.elements {
        match *e {
            Element::Pulse { axis, angle_deg } => {
                apply_global_rotation(psi, n, &axis.vector(), angle_deg.to_radians());
                if e.is_pi_pulse() {
                    parity ^= 1;
                }
            }
            Element::Wait { duration } => {
                if duration > 0.0 {
                    wait(psi, duration, parity);
                }
            }
        }
    }
    parity
}

/// One period of `seq` with free evolution under the Hamiltonian behind
/// `spectral`.
pub fn evolve_sequence(psi: &DVector<C64>, n: usize, spectral: &Spectral, seq: &PulseSequence) -> DVector<C64> {
    evolve_periods(psi, n, spectral, seq, 1)
}

/// `periods` repetitions of `seq`.
pub fn evolve_periods(
    psi: &DVector<C64>,
    n: usize,
    spectral: &Spectral,
    seq: &PulseSequence,
    periods: usize,
) -> DVector<C64> {
    let mut out = psi.clone();
    let mut wait = |p: &mut DVector<C64>, d: f64, _: usize| {
        let c = spectral.to_eigenbasis(p);
        *p = spectral.from_eigenbasis(&c, d);
    };
    for _ in 0..periods {
        run_sequence(&mut out, n, seq, 0, &mut wait);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::CouplingMatrix;
    use crate::manybody::{build_hamiltonian, polarized_state, total_spin_expectation, Axis};
    use crate::sequence::{builtin_sequence, Builtin};
    use nalgebra::{DMatrix, Vector3};

    #[test]
    fn xy8_refocuses_static_fields() {
        let n = 3;
        let c = CouplingMatrix { j: DMatrix::zeros(n, n), g: [0.0; 3] };
        let h = build_hamiltonian(&c, Some(&[0.8, -1.3, 2.1]), None).unwrap();
        let spectral = Spectral::new(&h).unwrap();
        let seq = builtin_sequence(Builtin::Xy8, 0.13).unwrap();
        let psi = polarized_state(n, &Vector3::x());
        let out = evolve_periods(&psi, n, &spectral, &seq, 3);
        assert!((total_spin_expectation(&out, n, Axis::X) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn pulses_alone_return_to_start() {
        let n = 2;
        let c = CouplingMatrix { j: DMatrix::zeros(n, n), g: [0.0; 3] };
        let spectral = Spectral::new(&build_hamiltonian(&c, None, None).unwrap()).unwrap();
        for b in Builtin::ALL {
            let seq = builtin_sequence(b, 0.2).unwrap();
            let psi = polarized_state(n, &Vector3::new(0.3, -0.5, 0.8));
            let out = evolve_sequence(&psi, n, &spectral, &seq);
            assert!((psi.dotc(&out).norm() - 1.0).abs() < 1e-12, "{}", b.name());
        }
    }
}
