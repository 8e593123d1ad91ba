use std::io::Write;

use nalgebra::{DVector, Matrix2, Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::pulsed::run_sequence;
use super::timeseries::check_grid;
use super::{apply_global_rotation, build_hamiltonian, polarized_state, total_spin_expectation, Axis, TimeSeries};
use crate::dressed::{dressed_basis, ket_zero, project_spin_ops, su2_field, NvConstants, SpinFrame};
use crate::ensemble::{orientation_axis, CouplingMatrix, FieldConfig, PERPENDICULAR_TOL};
use crate::error::{Error, Result};
use crate::sequence::{builtin_sequence, Builtin, PulseSequence};
use crate::spin::{spin_one_matrices, Operator, Spectral};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiSpec {
    pub field: FieldConfig,
    /// Drive amplitude `γ B_mw`, MHz.
    pub drive_mhz: f64,
    /// Lab-frame drive polarization.
    pub drive_direction: [f64; 3],
    pub time_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RabiResult {
    /// Mean `|B̃⟩` population over the driven groups.
    pub series: TimeSeries,
    pub per_group: Vec<TimeSeries>,
    /// Rabi frequency of each group, MHz.
    pub frequencies: Vec<f64>,
}

/// Resonant Rabi driving of one spin per orientation group, in the rotating
/// frame of the dressed transition.
///
/// Each group sees the drive through its own projected spin operators; only
/// the component along the perpendicular field survives the projection.
pub fn rabi_simulation(spec: &RabiSpec, c: &NvConstants) -> Result<RabiResult> {
    check_grid(&spec.time_grid)?;
    if !spec.field.is_perpendicular() {
        return Err(Error::invalid("field", "Rabi simulation needs a perpendicular configuration"));
    }
    spec.field.validate()?;
    if !(spec.drive_mhz.is_finite() && spec.drive_mhz >= 0.0) {
        return Err(Error::invalid("drive_mhz", "must be non-negative"));
    }
    let d = Vector3::from(spec.drive_direction);
    if d.norm() == 0.0 {
        return Err(Error::invalid("drive_direction", "zero vector"));
    }
    let d = d.normalize();
    let b_dir = spec.field.direction()?;
    let basis = dressed_basis(spec.field.b_gauss(), c)?;
    let q = basis.isometry();
    let j = spin_one_matrices();
    let mut per_group = Vec::new();
    let mut frequencies = Vec::new();
    for g in spec.field.groups() {
        let axis = orientation_axis(g)?;
        let dev = axis.dot(&b_dir).abs();
        if dev > PERPENDICULAR_TOL {
            return Err(Error::NotPerpendicular { group: g, deviation: dev });
        }
        let frame = SpinFrame::new(b_dir, axis)?;
        let local = frame.axes.transpose() * d;
        let mut m = Matrix3::<C64>::zeros();
        for a in 0..3 {
            m += Matrix3::from_column_slice(j[a].as_slice()) * C64::new(local[a], 0.0);
        }
        let p: Matrix2<C64> = q.adjoint() * m * q;
        let half = spec.drive_mhz / 2.0;
        let h = nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), p[(0, 1)] * half, p[(1, 0)] * half, C64::new(0.0, 0.0)],
        );
        let spectral = Spectral::dense(&Operator::from_dense(h))?;
        let start = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let coeffs = spectral.to_eigenbasis(&start);
        let pop: Vec<f64> = spec.time_grid.iter().map(|&t| spectral.from_eigenbasis(&coeffs, t)[1].norm_sqr()).collect();
        frequencies.push(spec.drive_mhz * p[(1, 0)].norm());
        per_group.push(TimeSeries::exact(spec.time_grid.clone(), pop)?.with_meta("group", g));
    }
    let k = per_group.len() as f64;
    let mean: Vec<f64> =
        (0..spec.time_grid.len()).map(|i| per_group.iter().map(|s| s.value[i]).sum::<f64>() / k).collect();
    let series = TimeSeries::exact(spec.time_grid.clone(), mean)?.with_meta("rabi_frequencies_mhz", &frequencies);
    Ok(RabiResult { series, per_group, frequencies })
}

/// Qubit encodings compared in AC magnetometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// `{|0⟩, |−1⟩}` under an on-axis field, XY8 decoupling.
    Onaxis,
    /// On-axis qubit under a Heisenberg-engineering Floquet sequence.
    OnaxisDroidLike,
    /// Dressed qubit in the two-group perpendicular configuration.
    PerpendicularTwoGroup,
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [Encoding::Onaxis, Encoding::OnaxisDroidLike, Encoding::PerpendicularTwoGroup];

    pub fn default_builtin(self) -> Builtin {
        match self {
            Encoding::OnaxisDroidLike => Builtin::Su2Echo,
            _ => Builtin::Xy8,
        }
    }
}

/// Magnetic-moment difference between the qubit levels along the sensed
/// direction, in units of the single-spin moment.
pub fn encoding_moment(encoding: Encoding, b_perp: f64, c: &NvConstants) -> Result<f64> {
    match encoding {
        Encoding::Onaxis | Encoding::OnaxisDroidLike => {
            let jz = Matrix3::from_column_slice(spin_one_matrices()[2].as_slice());
            let minus = Vector3::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0));
            let mu = |k: &Vector3<C64>| k.dotc(&(jz * k)).re;
            Ok((mu(&minus) - mu(&ket_zero())).abs())
        }
        Encoding::PerpendicularTwoGroup => {
            let p = project_spin_ops(&dressed_basis(b_perp, c)?);
            Ok((p.x[(1, 1)] - p.x[(0, 0)]).re.abs())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetometrySpec {
    pub encoding: Encoding,
    /// Phase accumulation time, μs.
    #[serde(default = "default_t_phase")]
    pub t_phase: f64,
    /// Sequence periods within `t_phase`.
    #[serde(default = "default_periods")]
    pub periods: usize,
    /// Overrides the encoding's default sequence; its period is rescaled to
    /// `t_phase / periods`.
    #[serde(default)]
    pub sequence: Option<PulseSequence>,
    /// Perpendicular field for the dressed encoding; defaults to the SU(2)
    /// point.
    #[serde(default)]
    pub b_perp: Option<f64>,
    /// AC amplitudes, G.
    #[serde(default)]
    pub b_ac_grid: Vec<f64>,
}

fn default_t_phase() -> f64 {
    7.2
}

fn default_periods() -> usize {
    6
}

impl MagnetometrySpec {
    pub fn new(encoding: Encoding) -> Self {
        MagnetometrySpec {
            encoding,
            t_phase: default_t_phase(),
            periods: default_periods(),
            sequence: None,
            b_perp: None,
            b_ac_grid: Vec::new(),
        }
    }

    pub fn resolved_sequence(&self) -> Result<PulseSequence> {
        if !(self.t_phase.is_finite() && self.t_phase > 0.0) || self.periods == 0 {
            return Err(Error::invalid("t_phase", "phase time and period count must be positive"));
        }
        let period = self.t_phase / self.periods as f64;
        match &self.sequence {
            Some(s) => s.with_period(period),
            None => builtin_sequence(self.encoding.default_builtin(), 1.0)?.with_period(period),
        }
    }

    pub fn resolved_b_perp(&self, c: &NvConstants) -> f64 {
        self.b_perp.unwrap_or_else(|| su2_field(c))
    }
}

/// Contrast versus AC amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastCurve {
    pub b_ac_gauss: Vec<f64>,
    pub contrast: Vec<f64>,
}

impl ContrastCurve {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["b_ac_gauss", "contrast"])?;
        for (b, v) in self.b_ac_gauss.iter().zip(&self.contrast) {
            w.write_record([b.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Magnetometer {
    n: usize,
    seq: PulseSequence,
    periods: usize,
    /// `Δμ γ`, MHz/G
    coupling: f64,
    interactions: Option<Operator>,
}

impl Magnetometer {
    fn new(spec: &MagnetometrySpec, c: &NvConstants, couplings: Option<&CouplingMatrix>) -> Result<Self> {
        let seq = spec.resolved_sequence()?;
        let dmu = encoding_moment(spec.encoding, spec.resolved_b_perp(c), c)?;
        let (n, interactions) = match couplings {
            Some(cm) => (cm.len(), Some(build_hamiltonian(cm, None, None)?)),
            None => (1, None),
        };
        Ok(Magnetometer { n, seq, periods: spec.periods, coupling: dmu * c.gamma_mhz_per_gauss, interactions })
    }

    /// `⟨Σs^x⟩/(N/2)` after the full phase accumulation; the target field
    /// flips sign with every π pulse.
    fn contrast(&self, b_ac: f64) -> Result<f64> {
        let n = self.n;
        let fz = self.coupling * b_ac;
        let mut psi = polarized_state(n, &Vector3::z());
        apply_global_rotation(&mut psi, n, &Vector3::y(), std::f64::consts::FRAC_PI_2);
        let zero = CouplingMatrix { j: nalgebra::DMatrix::zeros(n, n), g: [0.0; 3] };
        let field_op = |sign: f64| build_hamiltonian(&zero, None, Some(Vector3::new(0.0, 0.0, sign * fz)));
        let spectra = match &self.interactions {
            Some(h) => [Spectral::new(&h.add(&field_op(1.0)?)?)?, Spectral::new(&h.add(&field_op(-1.0)?)?)?],
            None => [Spectral::new(&field_op(1.0)?)?, Spectral::new(&field_op(-1.0)?)?],
        };
        let mut wait = |p: &mut DVector<C64>, d: f64, parity: usize| {
            let s = &spectra[parity];
            let coeffs = s.to_eigenbasis(p);
            *p = s.from_eigenbasis(&coeffs, d);
        };
        let mut parity = 0;
        for _ in 0..self.periods {
            parity = run_sequence(&mut psi, n, &self.seq, parity, &mut wait);
        }
        Ok(total_spin_expectation(&psi, n, Axis::X) / (n as f64 / 2.0))
    }
}

/// Contrast over `spec.b_ac_grid` from exact evolution through the pulse
/// train. `couplings` adds interactions between the sensing spins.
pub fn ac_magnetometry(spec: &MagnetometrySpec, c: &NvConstants, couplings: Option<&CouplingMatrix>) -> Result<ContrastCurve> {
    if spec.b_ac_grid.is_empty() {
        return Err(Error::invalid("b_ac_grid", "empty"));
    }
    let m = Magnetometer::new(spec, c, couplings)?;
    let contrast = spec.b_ac_grid.iter().map(|&b| m.contrast(b)).collect::<Result<Vec<_>>>()?;
    Ok(ContrastCurve { b_ac_gauss: spec.b_ac_grid.clone(), contrast })
}

/// Oscillation period of the contrast in the AC amplitude, G: twice the
/// position of the first contrast minimum, located by a coarse scan and
/// golden-section refinement of the simulated curve.
pub fn contrast_period(spec: &MagnetometrySpec, c: &NvConstants) -> Result<f64> {
    let m = Magnetometer::new(spec, c, None)?;
    // scan range wide enough for field-reduction factors down to 0.1
    let b_max = 10.0 / (m.coupling * spec.t_phase);
    let steps = 2000;
    let db = b_max / steps as f64;
    let mut prev = m.contrast(0.0)?;
    let mut cur = m.contrast(db)?;
    let mut k = 1;
    while k < steps {
        let next = m.contrast((k + 1) as f64 * db)?;
        if cur < prev && cur <= next {
            break;
        }
        prev = cur;
        cur = next;
        k += 1;
    }
    if k == steps {
        return Err(Error::ToleranceNotReached("no contrast minimum within the scan range".into()));
    }
    let (mut a, mut b) = ((k - 1) as f64 * db, (k + 1) as f64 * db);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (m.contrast(x1)?, m.contrast(x2)?);
    while b - a > 1e-12 * b {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = m.contrast(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = m.contrast(x2)?;
        }
    }
    Ok(a + b)
}
