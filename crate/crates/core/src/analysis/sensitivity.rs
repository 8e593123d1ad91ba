use serde::{Deserialize, Serialize};

use crate::dressed::{su2_field, NvConstants};
use crate::ensemble::Cylinder;
use crate::error::{Error, Result};
use crate::manybody::{encoding_moment, ContrastCurve, Encoding};
use crate::sequence::{builtin_sequence, effective_field_ratio, Builtin};

/// Optical readout model: shot-noise-limited with a fixed number of detected
/// photons per cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutParams {
    /// Fractional fluorescence contrast between the qubit states.
    #[serde(default = "default_contrast")]
    pub contrast_amplitude: f64,
    /// Detected photons per readout.
    #[serde(default = "default_photons")]
    pub photons_per_readout: f64,
    /// Initialization and readout time added to each cycle, μs.
    #[serde(default)]
    pub overhead_us: f64,
    /// Detection volume, μm³.
    #[serde(default = "default_volume")]
    pub volume_um3: f64,
}

fn default_contrast() -> f64 {
    0.1
}

fn default_photons() -> f64 {
    1e4
}

fn default_volume() -> f64 {
    Cylinder::default().volume_um3()
}

impl Default for ReadoutParams {
    fn default() -> Self {
        ReadoutParams {
            contrast_amplitude: default_contrast(),
            photons_per_readout: default_photons(),
            overhead_us: 0.0,
            volume_um3: default_volume(),
        }
    }
}

impl ReadoutParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast_amplitude > 0.0 && self.contrast_amplitude <= 1.0) {
            return Err(Error::invalid("contrast_amplitude", "must lie in (0, 1]"));
        }
        if !(self.photons_per_readout > 0.0 && self.photons_per_readout.is_finite()) {
            return Err(Error::invalid("photons_per_readout", "must be positive"));
        }
        if !(self.overhead_us >= 0.0 && self.overhead_us.is_finite()) {
            return Err(Error::invalid("overhead_us", "must be non-negative"));
        }
        if !(self.volume_um3 > 0.0 && self.volume_um3.is_finite()) {
            return Err(Error::invalid("volume_um3", "must be positive"));
        }
        Ok(())
    }
}

/// Factors separating the dressed two-group encoding from the Floquet
/// on-axis one. Only `field_ratio` and `moment_ratio` follow from the
/// model; the other two are inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// Native-field sensitivity over Floquet-reduced sensitivity.
    pub field_ratio: f64,
    /// Dressed-qubit moment over the on-axis moment.
    pub moment_ratio: f64,
    pub contrast_ratio: f64,
    pub overhead_ratio: f64,
    /// `field_ratio · moment_ratio`
    pub analytic_core: f64,
    /// Product of all four factors.
    pub total: f64,
}

impl Breakdown {
    pub fn compute(c: &NvConstants, contrast_ratio: f64, overhead_ratio: f64) -> Result<Self> {
        let field_ratio =
            effective_field_ratio(&builtin_sequence(Builtin::Xy8, 1.0)?)? / effective_field_ratio(&builtin_sequence(Builtin::Su2Echo, 1.0)?)?;
        let b = su2_field(c);
        let moment_ratio = encoding_moment(Encoding::PerpendicularTwoGroup, b, c)? / encoding_moment(Encoding::Onaxis, b, c)?;
        Ok(Self::from_parts(field_ratio, moment_ratio, contrast_ratio, overhead_ratio))
    }

    pub fn from_parts(field_ratio: f64, moment_ratio: f64, contrast_ratio: f64, overhead_ratio: f64) -> Self {
        let analytic_core = field_ratio * moment_ratio;
        Breakdown {
            field_ratio,
            moment_ratio,
            contrast_ratio,
            overhead_ratio,
            analytic_core,
            total: analytic_core * contrast_ratio * overhead_ratio,
        }
    }

    pub fn total_db(&self) -> f64 {
        10.0 * self.total.log10()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub encoding: Encoding,
    /// nT/√Hz
    pub eta: f64,
    /// nT·μm^{3/2}/√Hz
    pub eta_volume: f64,
    pub volume_um3: f64,
    /// μs
    pub t_phase: f64,
    pub t_cycle: f64,
    /// Steepest `|∂contrast/∂B|`, 1/G, and where it occurs.
    pub slope_per_gauss: f64,
    pub operating_point_gauss: f64,
    pub breakdown: Breakdown,
}

/// Largest `|∂contrast/∂B|` on the curve, from finite differences between
/// neighbouring grid points, with the midpoint where it occurs.
pub fn max_slope(curve: &ContrastCurve) -> Result<(f64, f64)> {
    let (b, c) = (&curve.b_ac_gauss, &curve.contrast);
    if b.len() < 2 || c.len() != b.len() {
        return Err(Error::InsufficientData("contrast curve needs at least two points".into()));
    }
    let mut best = (0.0, b[0]);
    for k in 0..b.len() - 1 {
        let db = b[k + 1] - b[k];
        if db <= 0.0 {
            return Err(Error::invalid("b_ac_gauss", "must be strictly increasing"));
        }
        let s = ((c[k + 1] - c[k]) / db).abs();
        if s > best.0 {
            best = (s, 0.5 * (b[k] + b[k + 1]));
        }
    }
    if !(best.0 > 0.0) {
        return Err(Error::ZeroSlope);
    }
    Ok(best)
}

/// Shot-noise-limited sensitivity from the steepest point of a contrast
/// curve. The per-cycle field uncertainty is `1/(√n · C · |∂contrast/∂B|)`,
/// scaled by the square root of the cycle time.
pub fn sensitivity_report(
    curve: &ContrastCurve,
    encoding: Encoding,
    t_phase: f64,
    readout: &ReadoutParams,
    breakdown: Breakdown,
) -> Result<SensitivityReport> {
    readout.validate()?;
    if !(t_phase > 0.0) {
        return Err(Error::invalid("t_phase", "must be positive"));
    }
    let (slope, at) = max_slope(curve)?;
    let sigma_b = 1.0 / (readout.photons_per_readout.sqrt() * readout.contrast_amplitude * slope);
    let t_cycle = t_phase + readout.overhead_us;
    // G·√μs → nT·√s: 1e5 nT/G × 1e-3 √s/√μs
    let eta = 100.0 * sigma_b * t_cycle.sqrt();
    Ok(SensitivityReport {
        encoding,
        eta,
        eta_volume: eta * readout.volume_um3.sqrt(),
        volume_um3: readout.volume_um3,
        t_phase,
        t_cycle,
        slope_per_gauss: slope,
        operating_point_gauss: at,
        breakdown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_core_is_two() {
        let b = Breakdown::compute(&NvConstants::default(), 1.0, 1.0).unwrap();
        assert!((b.field_ratio - 3f64.sqrt()).abs() < 1e-12);
        assert!((b.moment_ratio - 2.0 / 3f64.sqrt()).abs() < 1e-3);
        assert!((b.analytic_core - 2.0).abs() < 2e-3);
        let with_extras = Breakdown::from_parts(b.field_ratio, b.moment_ratio, 1.3, 1.0);
        assert!((with_extras.total - 1.3 * b.analytic_core).abs() < 1e-12);
    }

    #[test]
    fn default_volume() {
        assert!((ReadoutParams::default().volume_um3 - 0.0363).abs() < 1e-4);
    }

    #[test]
    fn cosine_curve_sensitivity() {
        // contrast cos(2π B/P): steepest slope 2π/P
        let p = 0.05;
        let b: Vec<f64> = (0..2001).map(|k| k as f64 * p / 2000.0).collect();
        let c = b.iter().map(|x| (std::f64::consts::TAU * x / p).cos()).collect();
        let curve = ContrastCurve { b_ac_gauss: b, contrast: c };
        let r = ReadoutParams { contrast_amplitude: 0.1, photons_per_readout: 100.0, overhead_us: 2.8, volume_um3: 0.04 };
        let rep = sensitivity_report(&curve, Encoding::Onaxis, 7.2, &r, Breakdown::from_parts(1.0, 1.0, 1.0, 1.0)).unwrap();
        let slope = std::f64::consts::TAU / p;
        let expected = 100.0 / (10.0 * 0.1 * slope) * 10f64.sqrt();
        assert!((rep.eta / expected - 1.0).abs() < 1e-5);
        assert!((rep.eta_volume - rep.eta * 0.2).abs() < 1e-12);
        assert!((rep.operating_point_gauss - p / 4.0).abs() < 1e-4);
    }

    #[test]
    fn flat_curve_has_no_slope() {
        let curve = ContrastCurve { b_ac_gauss: vec![0.0, 0.1, 0.2], contrast: vec![1.0; 3] };
        assert!(matches!(max_slope(&curve), Err(Error::ZeroSlope)));
    }
}
