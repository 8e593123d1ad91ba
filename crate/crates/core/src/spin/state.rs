use nalgebra::{DVector, Vector3};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Normalize arbitrary amplitudes. Fails on a zero or non-finite vector.
    pub fn from_amplitudes(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("amplitudes", format!("cannot normalize vector of norm {norm}")));
        }
        Ok(StateVector { amps: amps / C64::new(norm, 0.0) })
    }

    /// Wrap amplitudes that are already normalized (checked to 1e-10).
    pub fn from_normalized(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("amplitudes", format!("norm {norm} differs from 1")));
        }
        Ok(StateVector { amps })
    }

    pub(crate) fn from_raw(amps: DVector<C64>) -> Self {
        StateVector { amps }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        StateVector { amps }
    }

    /// Product of spin-1/2 coherent states, site 0 the most significant factor.
    /// Each direction is normalized; a zero vector is rejected.
    pub fn spin_half_product(directions: &[Vector3<f64>]) -> Result<Self> {
        let mut amps = DVector::from_element(1, C64::new(1.0, 0.0));
        for d in directions {
            let local = spin_half_coherent(d)?;
            let mut next = DVector::zeros(amps.len() * 2);
            for (i, a) in amps.iter().enumerate() {
                next[2 * i] = a * local[0];
                next[2 * i + 1] = a * local[1];
            }
            amps = next;
        }
        Ok(StateVector { amps })
    }

    /// Haar-random state from i.i.d. complex gaussians.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let amps = DVector::from_fn(dim, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        let norm = amps.norm();
        StateVector { amps: amps / C64::new(norm, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amps
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.amps - &other.amps).norm()
    }
}

/// `|n⟩` for a spin-1/2 pointing along `d`, in the `|↑⟩, |↓⟩` basis.
fn spin_half_coherent(d: &Vector3<f64>) -> Result<[C64; 2]> {
    let norm = d.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::invalid("direction", "zero or non-finite spin direction"));
    }
    let n = d / norm;
    let theta = n.z.clamp(-1.0, 1.0).acos();
    let phi = n.y.atan2(n.x);
    Ok([
        C64::new((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), phi),
    ])
}
