//! Pulse sequences, toggling frames and zeroth-order average Hamiltonians.
//!
//! Pulses are ideal global rotations `exp(−iθ n̂·s)`. A rotation acts on spin
//! operators as `U† s^a U = Σ_b R_ab s^b`, with `R` the active rotation matrix
//! about `n̂`. The frame of a free period is the product `R = R_k ⋯ R_1` of the
//! pulses before it; a coupling vector `g` is carried to the tensor
//! `Rᵀ diag(g) R` and a field `f` to `Rᵀ f`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the net-rotation and orthogonality checks.
pub const ROTATION_TOL: f64 = 1e-10;

/// Off-diagonal residual allowed when an XXZ-form average is requested.
pub const OFF_DIAGONAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseAxis {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "-x")]
    MinusX,
    #[serde(rename = "-y")]
    MinusY,
}

impl PulseAxis {
    pub fn vector(self) -> Vector3<f64> {
        match self {
            PulseAxis::X => Vector3::x(),
            PulseAxis::Y => Vector3::y(),
            PulseAxis::MinusX => -Vector3::x(),
            PulseAxis::MinusY => -Vector3::y(),
        }
    }

    fn token(self) -> &'static str {
        match self {
            PulseAxis::X => "x",
            PulseAxis::Y => "y",
            PulseAxis::MinusX => "-x",
            PulseAxis::MinusY => "-y",
        }
    }
}

impl fmt::Display for PulseAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PulseAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "+x" => Ok(PulseAxis::X),
            "y" | "+y" => Ok(PulseAxis::Y),
            "-x" => Ok(PulseAxis::MinusX),
            "-y" => Ok(PulseAxis::MinusY),
            _ => Err(format!("unknown pulse axis `{s}` (expected x, y, -x or -y)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    Pulse { axis: PulseAxis, angle_deg: f64 },
    /// μs
    Wait { duration: f64 },
}

impl Element {
    pub fn pulse(axis: PulseAxis, angle_deg: f64) -> Self {
        Element::Pulse { axis, angle_deg }
    }

    pub fn wait(duration: f64) -> Self {
        Element::Wait { duration }
    }

    pub fn is_pi_pulse(&self) -> bool {
        matches!(self, Element::Pulse { angle_deg, .. } if ((angle_deg.abs() % 360.0) - 180.0).abs() < 1e-9)
    }
}

/// Active rotation about unit vector `n` by `theta` radians.
pub fn rotation_matrix(n: &Vector3<f64>, theta: f64) -> Matrix3<f64> {
    let n = n.normalize();
    let k = Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
    let (s, c) = theta.sin_cos();
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub name: String,
    pub elements: Vec<Element>,
}

impl PulseSequence {
    pub fn new(name: impl Into<String>, elements: Vec<Element>) -> Result<Self> {
        let seq = PulseSequence { name: name.into(), elements };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.elements.iter().any(|e| matches!(e, Element::Wait { .. })) {
            return Err(Error::MalformedSequence(format!("`{}` has no free-evolution period", self.name)));
        }
        for (k, e) in self.elements.iter().enumerate() {
            match *e {
                Element::Wait { duration } if !(duration.is_finite() && duration >= 0.0) => {
                    return Err(Error::MalformedSequence(format!("element {k}: wait {duration} μs")));
                }
                Element::Pulse { angle_deg, .. } if !angle_deg.is_finite() => {
                    return Err(Error::MalformedSequence(format!("element {k}: pulse angle {angle_deg}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Total free-evolution time per period, μs.
    pub fn period(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Wait { duration } => *duration,
                _ => 0.0,
            })
            .sum()
    }

    pub fn pulse_count(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::Pulse { .. })).count()
    }

    pub fn pi_pulse_count(&self) -> usize {
        self.elements.iter().filter(|e| e.is_pi_pulse()).count()
    }

    /// Product of all pulse rotations over one period.
    pub fn net_rotation(&self) -> Matrix3<f64> {
        let mut r = Matrix3::identity();
        for e in &self.elements {
            if let Element::Pulse { axis, angle_deg } = e {
                r = rotation_matrix(&axis.vector(), angle_deg.to_radians()) * r;
            }
        }
        r
    }

    pub fn is_cyclic(&self) -> bool {
        (self.net_rotation() - Matrix3::identity()).abs().max() < ROTATION_TOL
    }

    /// Same pulses with every wait multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> PulseSequence {
        let elements = self
            .elements
            .iter()
            .map(|e| match *e {
                Element::Wait { duration } => Element::wait(duration * factor),
                p => p,
            })
            .collect();
        PulseSequence { name: self.name.clone(), elements }
    }

    /// Same pulses with the period set to `period` μs.
    pub fn with_period(&self, period: f64) -> Result<PulseSequence> {
        let p = self.period();
        if p <= 0.0 {
            return Err(Error::MalformedSequence(format!("`{}` has zero free-evolution time", self.name)));
        }
        Ok(self.scaled(period / p))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.name);
        for e in &self.elements {
            match e {
                Element::Pulse { axis, angle_deg } => out.push_str(&format!("PULSE {axis} {angle_deg}\n")),
                Element::Wait { duration } => out.push_str(&format!("WAIT {duration}\n")),
            }
        }
        out
    }

    pub fn parse(name: &str, text: &str, path: &Path) -> Result<PulseSequence> {
        let err = |line: usize, message: String| Error::SequenceParse { path: path.to_path_buf(), line, message };
        let mut elements = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens.as_slice() {
                ["PULSE", axis, angle] => {
                    let axis: PulseAxis = axis.parse().map_err(|m| err(line, m))?;
                    let angle: f64 = angle.parse().map_err(|_| err(line, format!("bad angle `{angle}`")))?;
                    if !angle.is_finite() {
                        return Err(err(line, format!("bad angle `{angle}`")));
                    }
                    elements.push(Element::pulse(axis, angle));
                }
                ["WAIT", d] => {
                    let d: f64 = d.parse().map_err(|_| err(line, format!("bad duration `{d}`")))?;
                    if !(d.is_finite() && d >= 0.0) {
                        return Err(err(line, format!("duration must be non-negative, got {d}")));
                    }
                    elements.push(Element::wait(d));
                }
                _ => return Err(err(line, format!("expected `PULSE <axis> <angle_deg>` or `WAIT <us>`, got `{content}`"))),
            }
        }
        if !elements.iter().any(|e| matches!(e, Element::Wait { .. })) {
            return Err(err(text.lines().count().max(1), "sequence has no WAIT".into()));
        }
        Ok(PulseSequence { name: name.to_string(), elements })
    }
}

pub fn parse_sequence_file(path: &Path) -> Result<PulseSequence> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sequence");
    PulseSequence::parse(name, &text, path)
}

pub fn write_sequence_file(seq: &PulseSequence, path: &Path) -> Result<()> {
    std::fs::write(path, seq.to_text())?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub rotation: Matrix3<f64>,
    /// μs
    pub duration: f64,
    /// π pulses applied before this period.
    pub pi_pulses_before: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSchedule {
    pub frames: Vec<Frame>,
}

impl FrameSchedule {
    /// Schedule from explicit rotations and weights.
    pub fn from_weights(entries: &[(Matrix3<f64>, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("frames", "schedule is empty"));
        }
        let frames = entries
            .iter()
            .map(|&(rotation, duration)| {
                if (rotation.transpose() * rotation - Matrix3::identity()).abs().max() > 1e-12 {
                    return Err(Error::invalid("frames", "rotation is not orthogonal"));
                }
                if !(duration.is_finite() && duration >= 0.0) {
                    return Err(Error::invalid("frames", format!("negative weight {duration}")));
                }
                Ok(Frame { rotation, duration, pi_pulses_before: 0 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameSchedule { frames })
    }

    pub fn total_duration(&self) -> f64 {
        self.frames.iter().map(|f| f.duration).sum()
    }

    fn weights(&self) -> Result<Vec<f64>> {
        let total = self.total_duration();
        if self.frames.is_empty() || total <= 0.0 {
            return Err(Error::invalid("frames", "schedule has no weight"));
        }
        Ok(self.frames.iter().map(|f| f.duration / total).collect())
    }
}

pub fn toggling_frames(seq: &PulseSequence) -> Result<FrameSchedule> {
    seq.validate()?;
    let mut r = Matrix3::identity();
    let mut pis = 0;
    let mut frames = Vec::new();
    for e in &seq.elements {
        match *e {
            Element::Pulse { axis, angle_deg } => {
                r = rotation_matrix(&axis.vector(), angle_deg.to_radians()) * r;
                if e.is_pi_pulse() {
                    pis += 1;
                }
            }
            Element::Wait { duration } => frames.push(Frame { rotation: r, duration, pi_pulses_before: pis }),
        }
    }
    Ok(FrameSchedule { frames })
}

/// Two-body coupling coefficients `(g_x, g_y, g_z)` with an optional
/// on-site field (MHz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector {
    pub g: [f64; 3],
    pub field: Option<[f64; 3]>,
}

impl CouplingVector {
    pub fn new(g: [f64; 3]) -> Self {
        CouplingVector { g, field: None }
    }

    pub fn with_field(g: [f64; 3], field: [f64; 3]) -> Self {
        CouplingVector { g, field: Some(field) }
    }

    pub fn trace(&self) -> f64 {
        self.g.iter().sum()
    }
}

/// Duration-weighted mean of `Rᵀ diag(g) R`.
pub fn average_tensor(g: [f64; 3], frames: &FrameSchedule) -> Result<Matrix3<f64>> {
    let w = frames.weights()?;
    let d = Matrix3::from_diagonal(&Vector3::from(g));
    Ok(frames.frames.iter().zip(&w).map(|(f, &wk)| f.rotation.transpose() * d * f.rotation * wk).sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AverageHamiltonian {
    pub coupling: CouplingVector,
    pub off_diagonal_residual: f64,
}

/// Zeroth-order average of `native` over `frames`; the result must be
/// diagonal.
pub fn average_hamiltonian(native: &CouplingVector, frames: &FrameSchedule) -> Result<AverageHamiltonian> {
    let t = average_tensor(native.g, frames)?;
    let mut off = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                off = off.max(t[(a, b)].abs());
            }
        }
    }
    if off > OFF_DIAGONAL_TOL {
        return Err(Error::OffDiagonalResidual(off));
    }
    let field = match native.field {
        Some(f) => {
            let v = effective_field(&Vector3::from(f), frames, &vec![1.0; frames.frames.len()])?;
            Some([v.x, v.y, v.z])
        }
        None => None,
    };
    Ok(AverageHamiltonian {
        coupling: CouplingVector { g: [t[(0, 0)], t[(1, 1)], t[(2, 2)]], field },
        off_diagonal_residual: off,
    })
}

/// Duration-weighted mean of `m_k Rᵀ f`.
pub fn effective_field(field: &Vector3<f64>, frames: &FrameSchedule, modulation: &[f64]) -> Result<Vector3<f64>> {
    if modulation.len() != frames.frames.len() {
        return Err(Error::DimensionMismatch { expected: frames.frames.len(), found: modulation.len() });
    }
    let w = frames.weights()?;
    Ok(frames
        .frames
        .iter()
        .zip(&w)
        .zip(modulation)
        .map(|((f, &wk), &m)| f.rotation.transpose() * field * (wk * m))
        .sum())
}

/// Sign of a target field that flips with every π pulse.
pub fn square_wave_modulation(frames: &FrameSchedule) -> Vec<f64> {
    frames.frames.iter().map(|f| if f.pi_pulses_before % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// `|B_eff| / |B|` for a `z` target field under square-wave modulation.
pub fn effective_field_ratio(seq: &PulseSequence) -> Result<f64> {
    let frames = toggling_frames(seq)?;
    Ok(effective_field(&Vector3::z(), &frames, &square_wave_modulation(&frames))?.norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Xy8,
    Cxy8,
    BalancedSu2,
    Su2Echo,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [Builtin::Xy8, Builtin::Cxy8, Builtin::BalancedSu2, Builtin::Su2Echo];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Xy8 => "xy8",
            Builtin::Cxy8 => "cxy8",
            Builtin::BalancedSu2 => "balanced_su2",
            Builtin::Su2Echo => "su2_echo",
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid("sequence", format!("unknown builtin `{s}`")))
    }
}

const XY8_AXES: [PulseAxis; 8] =
    [PulseAxis::X, PulseAxis::Y, PulseAxis::X, PulseAxis::Y, PulseAxis::Y, PulseAxis::X, PulseAxis::Y, PulseAxis::X];

fn xy8_elements(tau: f64) -> Vec<Element> {
    let mut e = vec![Element::wait(tau / 2.0)];
    for (k, axis) in XY8_AXES.iter().enumerate() {
        e.push(Element::pulse(*axis, 180.0));
        e.push(Element::wait(if k == 7 { tau / 2.0 } else { tau }));
    }
    e
}

fn balanced_su2_elements(tau: f64, y: PulseAxis, minus_y: PulseAxis) -> Vec<Element> {
    vec![
        Element::wait(tau),
        Element::pulse(y, 90.0),
        Element::wait(tau),
        Element::pulse(minus_y, 90.0),
        Element::pulse(PulseAxis::MinusX, 90.0),
        Element::wait(tau),
        Element::pulse(PulseAxis::X, 90.0),
    ]
}

/// Builtin sequence with free-evolution spacing `tau` μs.
///
/// - `xy8`: `τ/2 X τ Y τ X τ Y τ Y τ X τ Y τ X τ/2`.
/// - `cxy8`: every free period of the XY8 block replaced by a full XY8 block.
/// - `balanced_su2`: equal time in frames with `z` carried to `z`, `x`, `y`.
/// - `su2_echo`: a `balanced_su2` block and its `y`-inverted copy, each
///   followed by an `x` π pulse, so a target field flipping with the π pulses
///   keeps accumulating in every frame.
pub fn builtin_sequence(which: Builtin, tau: f64) -> Result<PulseSequence> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
    }
    let elements = match which {
        Builtin::Xy8 => xy8_elements(tau),
        Builtin::Cxy8 => {
            let mut e = Vec::new();
            for axis in XY8_AXES {
                e.extend(xy8_elements(tau));
                e.push(Element::pulse(axis, 180.0));
            }
            e
        }
        Builtin::BalancedSu2 => balanced_su2_elements(tau, PulseAxis::Y, PulseAxis::MinusY),
        Builtin::Su2Echo => {
            let mut e = balanced_su2_elements(tau, PulseAxis::Y, PulseAxis::MinusY);
            e.push(Element::pulse(PulseAxis::X, 180.0));
            e.extend(balanced_su2_elements(tau, PulseAxis::MinusY, PulseAxis::Y));
            e.push(Element::pulse(PulseAxis::X, 180.0));
            e
        }
    };
    PulseSequence::new(which.name(), elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn rotation_conventions() {
        let ry = rotation_matrix(&Vector3::y(), std::f64::consts::FRAC_PI_2);
        assert!(close(&(ry * Vector3::z()), &Vector3::x(), 1e-15));
        let rx = rotation_matrix(&Vector3::x(), -std::f64::consts::FRAC_PI_2);
        assert!(close(&(rx * Vector3::z()), &Vector3::y(), 1e-15));
    }

    #[test]
    fn single_wait_is_identity_frame() {
        let seq = PulseSequence::new("w", vec![Element::wait(1.0)]).unwrap();
        let f = toggling_frames(&seq).unwrap();
        assert_eq!(f.frames.len(), 1);
        assert_eq!(f.frames[0].rotation, Matrix3::identity());
    }

    #[test]
    fn y90_frame_maps_z_to_x() {
        let seq = PulseSequence::new(
            "y90",
            vec![Element::wait(1.0), Element::pulse(PulseAxis::Y, 90.0), Element::wait(1.0)],
        )
        .unwrap();
        let f = toggling_frames(&seq).unwrap();
        assert!(close(&(f.frames[1].rotation * Vector3::z()), &Vector3::x(), 1e-15));
    }

    #[test]
    fn xy8_frames() {
        let seq = builtin_sequence(Builtin::Xy8, 0.5).unwrap();
        assert_eq!(seq.pi_pulse_count(), 8);
        assert!((seq.period() - 4.0).abs() < 1e-15);
        assert!(seq.is_cyclic());
        let f = toggling_frames(&seq).unwrap();
        for (k, fr) in f.frames.iter().enumerate() {
            let z = fr.rotation * Vector3::z();
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!(close(&z, &(Vector3::z() * expected), 1e-12), "frame {k}");
        }
        assert!((effective_field_ratio(&seq).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cxy8_decouples_static_field() {
        let seq = builtin_sequence(Builtin::Cxy8, 0.1).unwrap();
        assert!(seq.is_cyclic());
        assert_eq!(seq.pi_pulse_count(), 72);
        let f = toggling_frames(&seq).unwrap();
        let avg = average_hamiltonian(&CouplingVector::with_field([1.0, 1.0, -2.0], [0.0, 0.0, 3.0]), &f).unwrap();
        let field = avg.coupling.field.unwrap();
        assert!(field.iter().all(|v| v.abs() < 1e-12));
        assert!((avg.coupling.g[2] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_su2_averages_to_heisenberg() {
        let seq = builtin_sequence(Builtin::BalancedSu2, 1.0).unwrap();
        assert!(seq.is_cyclic());
        let f = toggling_frames(&seq).unwrap();
        let avg = average_hamiltonian(&CouplingVector::new([1.0, 1.0, -1.0]), &f).unwrap();
        for g in avg.coupling.g {
            assert!((g - 1.0 / 3.0).abs() < 1e-12);
        }
        let field = effective_field(&Vector3::z(), &f, &[1.0, 1.0, 1.0]).unwrap();
        assert!((field.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((field.abs() - Vector3::repeat(1.0 / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn su2_echo_keeps_floquet_field() {
        let seq = builtin_sequence(Builtin::Su2Echo, 1.0).unwrap();
        assert!(seq.is_cyclic());
        let f = toggling_frames(&seq).unwrap();
        let avg = average_hamiltonian(&CouplingVector::new([-2.0, -2.0, 2.0]), &f).unwrap();
        for g in avg.coupling.g {
            assert!((g + 2.0 / 3.0).abs() < 1e-12);
        }
        assert!((effective_field_ratio(&seq).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn frame_weight_examples() {
        let id = Matrix3::identity();
        let flip = rotation_matrix(&Vector3::x(), std::f64::consts::PI);
        let only_flip = FrameSchedule::from_weights(&[(flip, 1.0)]).unwrap();
        let echo = effective_field(&Vector3::z(), &only_flip, &[-1.0]).unwrap();
        assert!((echo.norm() - 1.0).abs() < 1e-15);
        let ident = FrameSchedule::from_weights(&[(id, 2.0)]).unwrap();
        let avg = average_hamiltonian(&CouplingVector::new([0.3, 0.3, 1.7]), &ident).unwrap();
        assert_eq!(avg.coupling.g, [0.3, 0.3, 1.7]);
        assert!(effective_field(&Vector3::z(), &ident, &[]).is_err());
        assert!(FrameSchedule::from_weights(&[]).is_err());
        assert!(FrameSchedule::from_weights(&[(id * 2.0, 1.0)]).is_err());
    }

    #[test]
    fn off_diagonal_average_rejected() {
        let r = rotation_matrix(&Vector3::y(), 0.4);
        let f = FrameSchedule::from_weights(&[(r, 1.0)]).unwrap();
        assert!(matches!(average_hamiltonian(&CouplingVector::new([1.0, 1.0, -2.0]), &f), Err(Error::OffDiagonalResidual(_))));
        let t = average_tensor([1.0, 1.0, -2.0], &f).unwrap();
        assert!((t.trace() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        for b in Builtin::ALL {
            let seq = builtin_sequence(b, 0.37).unwrap();
            let back = PulseSequence::parse(b.name(), &seq.to_text(), Path::new("mem")).unwrap();
            assert_eq!(back, seq);
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "# demo\nWAIT 1.0\nPULSE z 90\n";
        match PulseSequence::parse("d", text, Path::new("demo.seq")) {
            Err(Error::SequenceParse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("z"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(PulseSequence::parse("d", "PULSE x 90\n", Path::new("d")).is_err());
        assert!(PulseSequence::parse("d", "WAIT -1\n", Path::new("d")).is_err());
        let one = PulseSequence::parse("d", "WAIT 1.0  # only\n", Path::new("d")).unwrap();
        assert_eq!(toggling_frames(&one).unwrap().frames.len(), 1);
    }

    #[test]
    fn unknown_builtin() {
        assert!("droid60".parse::<Builtin>().is_err());
        assert_eq!("cxy8".parse::<Builtin>().unwrap(), Builtin::Cxy8);
        assert!(builtin_sequence(Builtin::Xy8, 0.0).is_err());
    }
}
