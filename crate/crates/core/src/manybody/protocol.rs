use nalgebra::{DVector, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::correlator::mean_and_stderr;
use super::pulsed::run_sequence;
use super::timeseries::check_grid;
use super::{apply_diagonal_phase, apply_global_rotation, build_hamiltonian, field_diagonal, polarized_state};
use super::{total_spin_expectation, Axis, TimeSeries};
use crate::ensemble::{sample_disorder, CouplingMatrix, DisorderDistribution, EnsembleGeometry};
use crate::error::{Error, Result};
use crate::par;
use crate::rng;
use crate::sequence::PulseSequence;
use crate::spin::Spectral;

/// `W τ_wind` below this leaves residual phase coherence that biases the
/// protocol.
pub const WIND_BIAS_THRESHOLD: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    DisorderOrderXx,
    DisorderOrderZz,
    GlobalDecay,
    Rabi,
    AcMagnetometry,
}

/// Dynamics during the interaction window of the disorder-order protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowDynamics {
    /// Interactions only.
    #[default]
    Interaction,
    /// Interactions and on-site disorder.
    Free,
    /// Interactions and disorder under the pulse sequence, sampled
    /// stroboscopically.
    Decoupled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// μs; defaults to `3.5 T₂*`.
    #[serde(default)]
    pub tau_wind: Option<f64>,
    /// μs; defaults to `3 τ_wind`.
    #[serde(default)]
    pub tau_prime: Option<f64>,
    /// Disorder width `W`, MHz.
    #[serde(default)]
    pub disorder_width: Option<f64>,
    #[serde(default)]
    pub disorder_distribution: DisorderDistribution,
    #[serde(default)]
    pub window: WindowDynamics,
    #[serde(default)]
    pub sequence: Option<PulseSequence>,
    pub time_grid: Vec<f64>,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "default_typicality")]
    pub n_typicality_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Extrinsic `T₂` applied as `exp(−t/T)`, μs.
    #[serde(default)]
    pub extrinsic_t2: Option<f64>,
}

fn default_realizations() -> usize {
    200
}

fn default_typicality() -> usize {
    20
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind, time_grid: Vec<f64>) -> Self {
        ProtocolSpec {
            kind,
            tau_wind: None,
            tau_prime: None,
            disorder_width: None,
            disorder_distribution: DisorderDistribution::Gaussian,
            window: WindowDynamics::Interaction,
            sequence: None,
            time_grid,
            n_realizations: default_realizations(),
            n_typicality_samples: default_typicality(),
            seed: 0,
            extrinsic_t2: None,
        }
    }

    pub fn width(&self) -> Result<f64> {
        match self.disorder_width {
            Some(w) if w.is_finite() && w > 0.0 => Ok(w),
            Some(w) => Err(Error::invalid("disorder_width", format!("must be positive, got {w}"))),
            None => Err(Error::invalid("disorder_width", "not set")),
        }
    }

    pub fn resolved_tau_wind(&self) -> Result<f64> {
        Ok(self.tau_wind.unwrap_or(default_tau_wind(self.width()?)))
    }

    pub fn resolved_tau_prime(&self) -> Result<f64> {
        Ok(self.tau_prime.unwrap_or(3.0 * self.resolved_tau_wind()?))
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(&self.time_grid)?;
        if self.n_realizations == 0 {
            return Err(Error::invalid("n_realizations", "must be at least 1"));
        }
        for (name, v) in [("tau_wind", self.tau_wind), ("tau_prime", self.tau_prime), ("extrinsic_t2", self.extrinsic_t2)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(name, format!("must be non-negative, got {v}")));
                }
            }
        }
        if self.window == WindowDynamics::Decoupled && self.sequence.is_none() {
            return Err(Error::invalid("sequence", "decoupled window needs a pulse sequence"));
        }
        if let Some(s) = &self.sequence {
            s.validate()?;
        }
        Ok(())
    }
}

/// `√2 / (2πW)`: the `1/e` time of the gaussian free-induction decay
/// `exp(−(2πWt)²/2)`.
pub fn t2_star(w: f64) -> f64 {
    2f64.sqrt() / (std::f64::consts::TAU * w)
}

pub fn default_tau_wind(w: f64) -> f64 {
    3.5 * t2_star(w)
}

/// Stroboscopic period counts for each grid time.
fn period_counts(t_grid: &[f64], period: f64) -> Result<Vec<usize>> {
    t_grid
        .iter()
        .map(|&t| {
            let k = (t / period).round();
            if (k * period - t).abs() > 1e-9 * t.max(1.0) {
                Err(Error::invalid("time_grid", format!("{t} μs is not a multiple of the {period} μs period")))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Disorder-order protocol, averaged over disorder realizations.
///
/// Gate list per realization, starting from all spins up:
/// `R_y(π/2)`, wind `exp(−i2πΣh s^z τ_wind)`, [ZZ: `R_x(π/2)`, dephase under
/// the disorder for `τ′`], window evolution for `t`, [ZZ: `R_x(−π/2)`],
/// unwind `exp(+i2πΣh s^z τ_wind)`, measure `Σs^x`. The XX signal is
/// normalized by `N/2` and tends to `(C^XX + C^YY)/2`; the ZZ signal is
/// normalized by `N/4` and tends to `C^ZZ`.
pub fn disorder_order_protocol(spec: &ProtocolSpec, geom: &EnsembleGeometry, couplings: &CouplingMatrix) -> Result<TimeSeries> {
    spec.validate()?;
    let zz = match spec.kind {
        ProtocolKind::DisorderOrderXx => false,
        ProtocolKind::DisorderOrderZz => true,
        other => return Err(Error::invalid("kind", format!("{other:?} is not a disorder-order protocol"))),
    };
    let n = couplings.len();
    if geom.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: geom.len() });
    }
    let w = spec.width()?;
    let tau_w = spec.resolved_tau_wind()?;
    let tau_p = spec.resolved_tau_prime()?;
    if w * tau_w < WIND_BIAS_THRESHOLD {
        log::warn!("W·τ_wind = {:.2} is below {WIND_BIAS_THRESHOLD}; unwinding leaves a protocol bias", w * tau_w);
    }
    let counts = match (spec.window, &spec.sequence) {
        (WindowDynamics::Decoupled, Some(seq)) => Some(period_counts(&spec.time_grid, seq.period())?),
        _ => None,
    };
    let shared = match spec.window {
        WindowDynamics::Interaction => Some(Spectral::new(&build_hamiltonian(couplings, None, None)?)?),
        _ => None,
    };
    let norm = if zz { n as f64 / 4.0 } else { n as f64 / 2.0 };
    let half_pi = std::f64::consts::FRAC_PI_2;

    let rows: Vec<Result<Vec<f64>>> = par::map_indexed(spec.n_realizations, |k| {
        let mut rng = rng::stream(spec.seed, rng::purpose::REALIZATION_BASE + k as u64);
        let h = sample_disorder(n, w, spec.disorder_distribution, &mut rng)?;
        let diag = field_diagonal(n, &h);
        let mut psi = polarized_state(n, &Vector3::z());
        apply_global_rotation(&mut psi, n, &Vector3::y(), half_pi);
        apply_diagonal_phase(&mut psi, &diag, tau_w);
        if zz {
            apply_global_rotation(&mut psi, n, &Vector3::x(), half_pi);
            apply_diagonal_phase(&mut psi, &diag, tau_p);
        }
        let readout = |mut phi: DVector<C64>| -> f64 {
            if zz {
                apply_global_rotation(&mut phi, n, &Vector3::x(), -half_pi);
            }
            apply_diagonal_phase(&mut phi, &diag, -tau_w);
            total_spin_expectation(&phi, n, Axis::X) / norm
        };
        let own;
        let spectral = match &shared {
            Some(s) => s,
            None => {
                own = Spectral::new(&build_hamiltonian(couplings, Some(&h), None)?)?;
                &own
            }
        };
        Ok(window_series(psi, n, spectral, spec, counts.as_deref(), readout))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (mean, stderr) = mean_and_stderr(&rows, spec.time_grid.len());
    let mut ts = TimeSeries::new(spec.time_grid.clone(), mean, stderr)?
        .with_meta("kind", spec.kind)
        .with_meta("n_spins", n)
        .with_meta("seed", spec.seed)
        .with_meta("n_realizations", spec.n_realizations)
        .with_meta("disorder_width_mhz", w)
        .with_meta("tau_wind_us", tau_w)
        .with_meta("tau_prime_us", tau_p)
        .with_meta("window", spec.window);
    if let Some(t_ext) = spec.extrinsic_t2 {
        ts = ts.with_extrinsic_decay(t_ext);
    }
    Ok(ts)
}

/// Evolve `psi` through the window and read it out at every grid time, either
/// continuously or stroboscopically after whole sequence periods.
fn window_series(
    mut psi: DVector<C64>,
    n: usize,
    spectral: &Spectral,
    spec: &ProtocolSpec,
    counts: Option<&[usize]>,
    readout: impl Fn(DVector<C64>) -> f64,
) -> Vec<f64> {
    match (counts, &spec.sequence) {
        (Some(counts), Some(seq)) => {
            let mut wait = |p: &mut DVector<C64>, d: f64, _: usize| {
                let c = spectral.to_eigenbasis(p);
                *p = spectral.from_eigenbasis(&c, d);
            };
            let mut done = 0;
            counts
                .iter()
                .map(|&target| {
                    while done < target {
                        run_sequence(&mut psi, n, seq, 0, &mut wait);
                        done += 1;
                    }
                    readout(psi.clone())
                })
                .collect()
        }
        _ => {
            let c = spectral.to_eigenbasis(&psi);
            spec.time_grid.iter().map(|&t| readout(spectral.from_eigenbasis(&c, t))).collect()
        }
    }
}

/// Decay of `⟨Σs^x⟩/(N/2)` from the fully x-polarized state.
///
/// Without a disorder width this is a single exact evolution under the
/// interactions. With one, each realization adds on-site fields during the
/// window (unless the window is `Interaction`), and a `Decoupled` window
/// interleaves the pulse sequence.
pub fn global_decay_protocol(spec: &ProtocolSpec, geom: &EnsembleGeometry, couplings: &CouplingMatrix) -> Result<TimeSeries> {
    spec.validate()?;
    if spec.kind != ProtocolKind::GlobalDecay {
        return Err(Error::invalid("kind", format!("{:?} is not a global-decay protocol", spec.kind)));
    }
    let n = couplings.len();
    if geom.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: geom.len() });
    }
    let counts = match (spec.window, &spec.sequence) {
        (WindowDynamics::Decoupled, Some(seq)) => Some(period_counts(&spec.time_grid, seq.period())?),
        _ => None,
    };
    let disordered = spec.disorder_width.is_some() && spec.window != WindowDynamics::Interaction;
    let realizations = if disordered { spec.n_realizations } else { 1 };
    let w = if disordered { spec.width()? } else { 0.0 };
    let shared = if disordered { None } else { Some(Spectral::new(&build_hamiltonian(couplings, None, None)?)?) };
    let norm = n as f64 / 2.0;
    let rows: Vec<Result<Vec<f64>>> = par::map_indexed(realizations, |k| {
        let own;
        let spectral = match &shared {
            Some(s) => s,
            None => {
                let mut rng = rng::stream(spec.seed, rng::purpose::REALIZATION_BASE + k as u64);
                let h = sample_disorder(n, w, spec.disorder_distribution, &mut rng)?;
                own = Spectral::new(&build_hamiltonian(couplings, Some(&h), None)?)?;
                &own
            }
        };
        let psi = polarized_state(n, &Vector3::x());
        Ok(window_series(psi, n, spectral, spec, counts.as_deref(), |phi| {
            total_spin_expectation(&phi, n, Axis::X) / norm
        }))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (mean, stderr) = mean_and_stderr(&rows, spec.time_grid.len());
    let mut ts = TimeSeries::new(spec.time_grid.clone(), mean, stderr)?
        .with_meta("kind", spec.kind)
        .with_meta("n_spins", n)
        .with_meta("seed", spec.seed)
        .with_meta("n_realizations", realizations)
        .with_meta("disorder_width_mhz", w)
        .with_meta("window", spec.window);
    if let Some(t_ext) = spec.extrinsic_t2 {
        ts = ts.with_extrinsic_decay(t_ext);
    }
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::NvConstants;
    use crate::ensemble::{coupling_matrix, sample_geometry, FieldConfig, PositionSampling};
    use crate::manybody::{autocorrelator_direct, CorrelatorMethod};
    use crate::sequence::{builtin_sequence, Builtin};

    fn setup(n: usize, seed: u64) -> (EnsembleGeometry, CouplingMatrix) {
        let field = FieldConfig::PerpTwoGroup { b_gauss: 362.4, groups: [0, 1] };
        let geom = sample_geometry(&field, &PositionSampling::fixed(n, 2e-3), seed).unwrap();
        let c = coupling_matrix(&geom, &NvConstants::default()).unwrap();
        (geom, c)
    }

    fn spec(kind: ProtocolKind, grid: Vec<f64>, w: f64) -> ProtocolSpec {
        ProtocolSpec { disorder_width: Some(w), n_realizations: 64, seed: 5, ..ProtocolSpec::new(kind, grid) }
    }

    #[test]
    fn t2_star_definition() {
        let w = 3.0;
        let t = t2_star(w);
        assert!(((-(std::f64::consts::TAU * w * t).powi(2) / 2.0).exp() - (-1f64).exp()).abs() < 1e-15);
        assert!((default_tau_wind(w) - 3.5 * t).abs() < 1e-15);
    }

    #[test]
    fn refocused_at_zero() {
        let (geom, c) = setup(4, 1);
        let ts = disorder_order_protocol(&spec(ProtocolKind::DisorderOrderXx, vec![0.0, 1.0], 20.0), &geom, &c).unwrap();
        assert!((ts.value[0] - 1.0).abs() < 1e-12);
        assert!(ts.stderr[0] < 1e-12);
    }

    #[test]
    fn tracks_oracle_at_four_spins() {
        let (geom, c) = setup(4, 2);
        let scale = c.typical_coupling() * 8.0 / 3.0;
        let grid: Vec<f64> = (0..8).map(|k| k as f64 * 0.25 / scale).collect();
        let h = build_hamiltonian(&c, None, None).unwrap();
        let zz = disorder_order_protocol(&spec(ProtocolKind::DisorderOrderZz, grid.clone(), 50.0 * scale), &geom, &c).unwrap();
        let oracle = autocorrelator_direct(&h, 4, Axis::Z, &grid, CorrelatorMethod::FullTrace).unwrap();
        for k in 0..grid.len() {
            assert!((zz.value[k] - oracle.value[k]).abs() <= 3.0 * zz.stderr[k] + 1e-9, "k = {k}");
        }
    }

    #[test]
    fn frozen_by_strong_disorder() {
        let (geom, c) = setup(4, 3);
        let scale = c.typical_coupling() * 8.0 / 3.0;
        let grid: Vec<f64> = (0..6).map(|k| k as f64 * 0.5 / scale).collect();
        let s = ProtocolSpec {
            window: WindowDynamics::Free,
            n_realizations: 1500,
            ..spec(ProtocolKind::DisorderOrderZz, grid, 200.0 * scale)
        };
        let ts = disorder_order_protocol(&s, &geom, &c).unwrap();
        assert!(ts.value.iter().all(|v| *v >= 0.95), "{:?}", ts.value);
    }

    #[test]
    fn decoupled_window_requires_commensurate_grid() {
        let (geom, c) = setup(3, 4);
        let seq = builtin_sequence(Builtin::Xy8, 0.01).unwrap();
        let mut s = spec(ProtocolKind::DisorderOrderXx, vec![0.0, 0.08, 0.16], 10.0);
        s.window = WindowDynamics::Decoupled;
        s.sequence = Some(seq.clone());
        s.n_realizations = 4;
        assert!(disorder_order_protocol(&s, &geom, &c).is_ok());
        s.time_grid = vec![0.0, 0.05];
        assert!(disorder_order_protocol(&s, &geom, &c).is_err());
        s.sequence = None;
        assert!(s.validate().is_err());
    }

    #[test]
    fn global_decay_flat_at_su2_point() {
        let b = crate::dressed::su2_field(&NvConstants::default());
        let field = FieldConfig::PerpTwoGroup { b_gauss: b, groups: [0, 1] };
        let geom = sample_geometry(&field, &PositionSampling::fixed(6, 2e-3), 6).unwrap();
        let c = coupling_matrix(&geom, &NvConstants::default()).unwrap();
        let grid: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let ts = global_decay_protocol(&ProtocolSpec::new(ProtocolKind::GlobalDecay, grid), &geom, &c).unwrap();
        assert!(ts.value.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn xy8_slows_disordered_global_decay() {
        let (geom, c) = setup(4, 7);
        let seq = builtin_sequence(Builtin::Xy8, 0.002).unwrap();
        let p = seq.period();
        let grid: Vec<f64> = (0..10).map(|k| k as f64 * 20.0 * p).collect();
        let base = ProtocolSpec {
            disorder_width: Some(20.0),
            n_realizations: 16,
            ..ProtocolSpec::new(ProtocolKind::GlobalDecay, grid)
        };
        let free = global_decay_protocol(&ProtocolSpec { window: WindowDynamics::Free, ..base.clone() }, &geom, &c).unwrap();
        let dd = global_decay_protocol(
            &ProtocolSpec { window: WindowDynamics::Decoupled, sequence: Some(seq), ..base },
            &geom,
            &c,
        )
        .unwrap();
        assert!(free.value[9] < 0.5, "{:?}", free.value);
        assert!(dd.value[9] > 0.99, "{:?}", dd.value);
    }

    #[test]
    fn rejects_wrong_kind() {
        let (geom, c) = setup(3, 4);
        assert!(disorder_order_protocol(&spec(ProtocolKind::Rabi, vec![0.0], 1.0), &geom, &c).is_err());
    }
}
