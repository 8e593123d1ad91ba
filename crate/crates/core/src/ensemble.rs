//! Ensemble geometry: orientation groups, field direction, positions, pair
//! couplings and on-site disorder.

use std::io::{Read, Write};

use nalgebra::{DMatrix, Vector3};
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dressed::{effective_couplings, onaxis_couplings, EffectiveCouplings, NvConstants};
use crate::error::{Error, Result};
use crate::rng;

/// Carbon atoms per nm³ in diamond.
pub const CARBON_DENSITY_NM3: f64 = 176.0;

/// Tolerance on `|B̂·axis|` for a configuration to count as perpendicular.
pub const PERPENDICULAR_TOL: f64 = 1e-9;

/// Unit vectors of the four ⟨111⟩ orientations.
pub fn orientation_axes() -> [Vector3<f64>; 4] {
    let s = 1.0 / 3f64.sqrt();
    [
        Vector3::new(s, s, s),
        Vector3::new(s, -s, -s),
        Vector3::new(-s, s, -s),
        Vector3::new(-s, -s, s),
    ]
}

pub fn orientation_axis(group: usize) -> Result<Vector3<f64>> {
    orientation_axes()
        .get(group)
        .copied()
        .ok_or_else(|| Error::invalid("group", format!("orientation index {group} out of range 0..4")))
}

pub fn ppm_to_density(ppm: f64) -> f64 {
    ppm * 1e-6 * CARBON_DENSITY_NM3
}

pub fn density_to_ppm(density: f64) -> f64 {
    density / (1e-6 * CARBON_DENSITY_NM3)
}

/// Field direction perpendicular to one or two orientation groups.
///
/// Two groups give the normalized cross product of their axes. A single group
/// gets the projection of `x̂` onto the plane normal to its axis.
pub fn perpendicular_direction(groups: &[usize]) -> Result<Vector3<f64>> {
    match groups {
        [g] => {
            let axis = orientation_axis(*g)?;
            let reference = Vector3::x();
            let v = reference - axis * axis.dot(&reference);
            Ok(v.normalize())
        }
        [a, b] => {
            if a == b {
                return Err(Error::invalid("groups", "the two orientation groups must differ"));
            }
            Ok(orientation_axis(*a)?.cross(&orientation_axis(*b)?).normalize())
        }
        _ => Err(Error::invalid("groups", format!("expected one or two groups, got {}", groups.len()))),
    }
}

/// `(3 (B̂·r̂)² − 1)/2`, in `[−1/2, 1]`.
pub fn anisotropy(b_dir: &Vector3<f64>, r_vec: &Vector3<f64>) -> Result<f64> {
    let r = r_vec.norm();
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r_vec", "zero or non-finite separation"));
    }
    let c = b_dir.normalize().dot(&(r_vec / r));
    Ok((3.0 * c * c - 1.0) / 2.0)
}

/// The three bias-field arrangements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    /// Field along the axis of group 0, conventional `{|0⟩, |−1⟩}` qubit.
    Onaxis { b_gauss: f64 },
    PerpOneGroup { b_gauss: f64, #[serde(default)] group: usize },
    PerpTwoGroup {
        b_gauss: f64,
        #[serde(default = "default_two_groups")]
        groups: [usize; 2],
    },
}

fn default_two_groups() -> [usize; 2] {
    [0, 1]
}

impl FieldConfig {
    pub fn b_gauss(&self) -> f64 {
        match *self {
            FieldConfig::Onaxis { b_gauss }
            | FieldConfig::PerpOneGroup { b_gauss, .. }
            | FieldConfig::PerpTwoGroup { b_gauss, .. } => b_gauss,
        }
    }

    pub fn groups(&self) -> Vec<usize> {
        match self {
            FieldConfig::Onaxis { .. } => vec![0],
            FieldConfig::PerpOneGroup { group, .. } => vec![*group],
            FieldConfig::PerpTwoGroup { groups, .. } => groups.to_vec(),
        }
    }

    pub fn direction(&self) -> Result<Vector3<f64>> {
        match self {
            FieldConfig::Onaxis { .. } => orientation_axis(0),
            _ => perpendicular_direction(&self.groups()),
        }
    }

    pub fn is_perpendicular(&self) -> bool {
        !matches!(self, FieldConfig::Onaxis { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.b_gauss();
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::invalid("b_gauss", format!("must be finite and non-negative, got {b}")));
        }
        self.direction().map(|_| ())
    }
}

/// Cylinder with its axis along `z`, centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub diameter_nm: f64,
    pub thickness_nm: f64,
}

impl Default for Cylinder {
    fn default() -> Self {
        Cylinder { diameter_nm: 500.0, thickness_nm: 185.0 }
    }
}

impl Cylinder {
    pub fn volume_nm3(&self) -> f64 {
        std::f64::consts::PI * (self.diameter_nm / 2.0).powi(2) * self.thickness_nm
    }

    pub fn volume_um3(&self) -> f64 {
        self.volume_nm3() * 1e-9
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let r = self.diameter_nm / 2.0;
        p.x * p.x + p.y * p.y <= r * r * (1.0 + 1e-12) && p.z.abs() <= self.thickness_nm / 2.0 * (1.0 + 1e-12)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        let r = self.diameter_nm / 2.0 * rng.random::<f64>().sqrt();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        let z = self.thickness_nm * (rng.random::<f64>() - 0.5);
        Vector3::new(r * phi.cos(), r * phi.sin(), z)
    }
}

/// Parameters of the positional point process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PositionSampling {
    /// nm⁻³
    pub density: f64,
    pub cylinder: Cylinder,
    pub exclusion_nm: f64,
    /// Place exactly this many spins instead of a Poisson count.
    pub fixed_count: Option<usize>,
    /// Counts above this are refused.
    pub max_spins: usize,
}

impl Default for PositionSampling {
    fn default() -> Self {
        PositionSampling {
            density: ppm_to_density(1.0),
            cylinder: Cylinder::default(),
            exclusion_nm: 2.0,
            fixed_count: None,
            max_spins: 14,
        }
    }
}

impl PositionSampling {
    /// Fixed-count sampling of `n` spins at `density` in a cylinder whose
    /// diameter equals its thickness.
    pub fn fixed(n: usize, density: f64) -> Self {
        let volume = n as f64 / density;
        let d = (4.0 * volume / std::f64::consts::PI).cbrt();
        PositionSampling {
            density,
            cylinder: Cylinder { diameter_nm: d, thickness_nm: d },
            fixed_count: Some(n),
            ..Default::default()
        }
    }

    pub fn mean_count(&self) -> f64 {
        self.density * self.cylinder.volume_nm3()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::invalid("density", "must be strictly positive"));
        }
        if !(self.cylinder.diameter_nm > 0.0 && self.cylinder.thickness_nm >= 0.0) {
            return Err(Error::invalid("cylinder", "diameter must be positive and thickness non-negative"));
        }
        if !(self.exclusion_nm >= 0.0 && self.exclusion_nm.is_finite()) {
            return Err(Error::invalid("exclusion_nm", "must be non-negative"));
        }
        if self.fixed_count.is_none() && self.mean_count() > self.max_spins as f64 {
            log::warn!(
                "mean spin count {:.1} exceeds the exact-simulation cap {}",
                self.mean_count(),
                self.max_spins
            );
        }
        Ok(())
    }
}

const ATTEMPTS_PER_SPIN: usize = 10_000;

/// Uniform positions in the cylinder with hard-sphere rejection.
pub fn sample_positions<R: Rng + ?Sized>(p: &PositionSampling, rng: &mut R) -> Result<Vec<Vector3<f64>>> {
    p.validate()?;
    let n = match p.fixed_count {
        Some(n) => n,
        None => {
            let mean = p.mean_count();
            if mean == 0.0 {
                0
            } else {
                let poisson = Poisson::new(mean).map_err(|e| Error::invalid("density", e.to_string()))?;
                poisson.sample(rng) as usize
            }
        }
    };
    if n > p.max_spins {
        return Err(Error::SpinCapExceeded { requested: n, cap: p.max_spins });
    }
    let min_sq = p.exclusion_nm * p.exclusion_nm;
    let mut placed: Vec<Vector3<f64>> = Vec::with_capacity(n);
    let cap = ATTEMPTS_PER_SPIN * n.max(1);
    let mut attempts = 0;
    while placed.len() < n {
        if attempts == cap {
            return Err(Error::RejectionFailure { attempts, placed: placed.len(), requested: n });
        }
        attempts += 1;
        let q = p.cylinder.sample(rng);
        if placed.iter().all(|x| (x - q).norm_squared() >= min_sq) {
            placed.push(q);
        }
    }
    Ok(placed)
}

/// Shape of the on-site disorder distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderDistribution {
    #[default]
    Gaussian,
    Lorentzian,
}

/// `W = 100 · J₀ρ`, MHz.
pub fn default_disorder_width(j0_mhz_nm3: f64, density: f64) -> f64 {
    100.0 * j0_mhz_nm3 * density
}

/// `n` i.i.d. fields of width `w` (standard deviation, or half width for the
/// lorentzian).
pub fn sample_disorder<R: Rng + ?Sized>(
    n: usize,
    w: f64,
    distribution: DisorderDistribution,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::invalid("width", format!("disorder width must be positive, got {w}")));
    }
    Ok(match distribution {
        DisorderDistribution::Gaussian => {
            let d = Normal::new(0.0, w).map_err(|e| Error::invalid("width", e.to_string()))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        DisorderDistribution::Lorentzian => {
            let d = Cauchy::new(0.0, w).map_err(|e| Error::invalid("width", e.to_string()))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
    })
}

/// A sampled ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleGeometry {
    pub positions: Vec<Vector3<f64>>,
    pub groups: Vec<usize>,
    pub b_dir: Vector3<f64>,
    pub b_mag: f64,
    /// MHz
    pub h: Vec<f64>,
    pub seed: u64,
}

impl EnsembleGeometry {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_distance(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.len() {
            for j in 0..i {
                m = m.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        m
    }

    /// Keep only the spins for which `keep` is true.
    pub fn subset(&self, keep: impl Fn(usize) -> bool) -> EnsembleGeometry {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        EnsembleGeometry {
            positions: idx.iter().map(|&i| self.positions[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            h: if self.h.is_empty() { Vec::new() } else { idx.iter().map(|&i| self.h[i]).collect() },
            ..self.clone()
        }
    }

    /// Largest `|B̂·axis|` over the groups present.
    pub fn perpendicular_deviation(&self) -> Result<(usize, f64)> {
        let mut worst = (0, 0.0f64);
        for &g in &self.groups {
            let d = self.b_dir.dot(&orientation_axis(g)?).abs();
            if d > worst.1 {
                worst = (g, d);
            }
        }
        Ok(worst)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x_nm", "y_nm", "z_nm", "group", "h_mhz"])?;
        for i in 0..self.len() {
            let p = self.positions[i];
            let h = self.h.get(i).copied().unwrap_or(0.0);
            w.write_record([
                format!("{:.17e}", p.x),
                format!("{:.17e}", p.y),
                format!("{:.17e}", p.z),
                self.groups[i].to_string(),
                format!("{h:.17e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read per-spin rows; the field and seed are supplied by the caller.
    pub fn read_csv<R: Read>(reader: R, b_dir: Vector3<f64>, b_mag: f64, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let (cx, cy, cz, cg, ch) = (col("x_nm")?, col("y_nm")?, col("z_nm")?, col("group")?, col("h_mhz")?);
        let mut geom = EnsembleGeometry { positions: vec![], groups: vec![], b_dir, b_mag, h: vec![], seed };
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::invalid("geometry csv", format!("row {}: bad number in column {c}", line + 2)))
            };
            geom.positions.push(Vector3::new(num(cx)?, num(cy)?, num(cz)?));
            let g: usize = rec
                .get(cg)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::invalid("geometry csv", format!("row {}: bad group", line + 2)))?;
            orientation_axis(g)?;
            geom.groups.push(g);
            geom.h.push(num(ch)?);
        }
        Ok(geom)
    }
}

/// How spins are labelled in the two-group configuration.
fn assign_groups(field: &FieldConfig, n: usize) -> Vec<usize> {
    let groups = field.groups();
    (0..n).map(|i| groups[i % groups.len()]).collect()
}

/// Sample positions and labels; disorder is left empty.
pub fn sample_geometry(field: &FieldConfig, sampling: &PositionSampling, seed: u64) -> Result<EnsembleGeometry> {
    field.validate()?;
    let positions = sample_positions(sampling, &mut rng::stream(seed, rng::purpose::POSITIONS))?;
    let groups = assign_groups(field, positions.len());
    Ok(EnsembleGeometry { positions, groups, b_dir: field.direction()?, b_mag: field.b_gauss(), h: vec![], seed })
}

/// Pair couplings `J_ij` (MHz) multiplying `Σ_a g_a s_i^a s_j^a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub j: DMatrix<f64>,
    /// `(g_x, g_y, g_z)`
    pub g: [f64; 3],
}

impl CouplingMatrix {
    pub fn len(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.j.nrows() == 0
    }

    /// Same pair matrix with a different coupling vector.
    pub fn with_g(&self, g: [f64; 3]) -> CouplingMatrix {
        CouplingMatrix { j: self.j.clone(), g }
    }

    pub fn trace(&self) -> f64 {
        self.g.iter().sum()
    }

    /// Root-mean-square `Σ_j J_ij²` over sites, square-rooted: a typical
    /// single-site interaction scale in MHz.
    pub fn typical_coupling(&self) -> f64 {
        let n = self.len().max(1) as f64;
        (self.j.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
    }
}

/// `J_ij = −J_dip A_B̂(r̂_ij)/r_ij³`.
pub fn pair_matrix(positions: &[Vector3<f64>], b_dir: &Vector3<f64>, j_dipole: f64) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..a {
            let r = positions[a] - positions[b];
            let v = -j_dipole * anisotropy(b_dir, &r)? / r.norm().powi(3);
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(j)
}

/// Couplings of a perpendicular configuration; group labels do not enter.
pub fn coupling_matrix(geom: &EnsembleGeometry, c: &NvConstants) -> Result<CouplingMatrix> {
    let (group, deviation) = geom.perpendicular_deviation()?;
    if deviation > PERPENDICULAR_TOL {
        return Err(Error::NotPerpendicular { group, deviation });
    }
    let eff: EffectiveCouplings = effective_couplings(geom.b_mag, c)?;
    Ok(CouplingMatrix { j: pair_matrix(&geom.positions, &geom.b_dir, c.j_dipole_mhz_nm3)?, g: [eff.g_xy, eff.g_xy, eff.g_zz] })
}

/// Couplings of the on-axis `{|0⟩, |−1⟩}` encoding, with the anisotropy taken
/// about the NV axis.
pub fn coupling_matrix_onaxis(geom: &EnsembleGeometry, c: &NvConstants) -> Result<CouplingMatrix> {
    let g0 = geom.groups.first().copied().unwrap_or(0);
    if geom.groups.iter().any(|&g| g != g0) {
        return Err(Error::invalid("groups", "on-axis encoding takes a single orientation group"));
    }
    let axis = orientation_axis(g0)?;
    let on = onaxis_couplings()?;
    let g = on.native_vector();
    Ok(CouplingMatrix { j: pair_matrix(&geom.positions, &axis, c.j_dipole_mhz_nm3)?, g: [g.x, g.y, g.z] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orientation_dot_products() {
        let axes = orientation_axes();
        for i in 0..4 {
            assert!((axes[i].norm() - 1.0).abs() < 1e-15);
            for j in 0..i {
                assert!((axes[i].dot(&axes[j]) + 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_group_direction() {
        let d = perpendicular_direction(&[0, 1]).unwrap();
        let expected = Vector3::new(0.0, 1.0, -1.0) / 2f64.sqrt();
        assert!((d - expected).norm() < 1e-15 || (d + expected).norm() < 1e-15);
        for a in 0..4 {
            for b in 0..4 {
                if a == b {
                    assert!(perpendicular_direction(&[a, b]).is_err());
                    continue;
                }
                let d = perpendicular_direction(&[a, b]).unwrap();
                assert!(d.dot(&orientation_axes()[a]).abs() < 1e-12);
                assert!(d.dot(&orientation_axes()[b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_group_direction() {
        for g in 0..4 {
            let d = perpendicular_direction(&[g]).unwrap();
            assert!(d.dot(&orientation_axes()[g]).abs() < 1e-12);
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
        assert!(perpendicular_direction(&[]).is_err());
        assert!(perpendicular_direction(&[5]).is_err());
    }

    #[test]
    fn anisotropy_values() {
        let b = Vector3::z();
        assert_eq!(anisotropy(&b, &Vector3::new(0.0, 0.0, 3.0)).unwrap(), 1.0);
        assert_eq!(anisotropy(&b, &Vector3::new(2.0, 0.0, 0.0)).unwrap(), -0.5);
        let magic = Vector3::new((2.0f64 / 3.0).sqrt(), 0.0, (1.0f64 / 3.0).sqrt());
        assert!(anisotropy(&b, &magic).unwrap().abs() < 1e-15);
        assert!(anisotropy(&b, &Vector3::zeros()).is_err());
    }

    #[test]
    fn pair_coupling_value_and_scaling() {
        let b = perpendicular_direction(&[0, 1]).unwrap();
        let geom = EnsembleGeometry {
            positions: vec![Vector3::zeros(), b * 10.0],
            groups: vec![0, 1],
            b_dir: b,
            b_mag: 362.4,
            h: vec![],
            seed: 0,
        };
        let m = coupling_matrix(&geom, &NvConstants::default()).unwrap();
        assert!((m.j[(0, 1)] + 0.052).abs() < 1e-15);
        assert_eq!(m.j[(0, 0)], 0.0);
        let far = EnsembleGeometry { positions: vec![Vector3::zeros(), b * 20.0], ..geom.clone() };
        let m2 = coupling_matrix(&far, &NvConstants::default()).unwrap();
        assert!((m2.j[(0, 1)] * 8.0 - m.j[(0, 1)]).abs() < 1e-15);
        let swapped = EnsembleGeometry { groups: vec![1, 0], ..geom };
        assert_eq!(coupling_matrix(&swapped, &NvConstants::default()).unwrap(), m);
    }

    #[test]
    fn non_perpendicular_rejected() {
        let geom = EnsembleGeometry {
            positions: vec![Vector3::zeros(), Vector3::new(5.0, 1.0, 0.0)],
            groups: vec![0, 2],
            b_dir: perpendicular_direction(&[0, 1]).unwrap(),
            b_mag: 100.0,
            h: vec![],
            seed: 0,
        };
        assert!(matches!(coupling_matrix(&geom, &NvConstants::default()), Err(Error::NotPerpendicular { .. })));
    }

    #[test]
    fn onaxis_matrix_uses_baseline_vector() {
        let geom = EnsembleGeometry {
            positions: vec![Vector3::zeros(), Vector3::new(5.0, 1.0, 0.0)],
            groups: vec![0, 0],
            b_dir: orientation_axis(0).unwrap(),
            b_mag: 100.0,
            h: vec![],
            seed: 0,
        };
        let m = coupling_matrix_onaxis(&geom, &NvConstants::default()).unwrap();
        assert!((m.trace().abs() - 2.0).abs() < 1e-9);
        assert!(m.g[0] * m.g[2] < 0.0);
    }

    #[test]
    fn poisson_count_mean() {
        let p = PositionSampling {
            density: 10.0 / Cylinder::default().volume_nm3(),
            exclusion_nm: 0.0,
            max_spins: 100,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 10_000;
        let total: usize = (0..draws).map(|_| sample_positions(&p, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 10.0).abs() < 3.0 * (10.0f64 / draws as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn flat_cylinder_is_a_disc() {
        let p = PositionSampling {
            cylinder: Cylinder { diameter_nm: 50.0, thickness_nm: 0.0 },
            exclusion_nm: 0.0,
            fixed_count: Some(12),
            ..Default::default()
        };
        let pts = sample_positions(&p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(pts.iter().all(|q| q.z.abs() < 1e-12 && p.cylinder.contains(q)));
    }

    #[test]
    fn exclusion_and_rejection_failure() {
        let p = PositionSampling::fixed(10, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pts = sample_positions(&p, &mut rng).unwrap();
            for i in 0..pts.len() {
                assert!(p.cylinder.contains(&pts[i]));
                for j in 0..i {
                    assert!((pts[i] - pts[j]).norm() >= p.exclusion_nm);
                }
            }
        }
        let crowded = PositionSampling {
            cylinder: Cylinder { diameter_nm: 3.0, thickness_nm: 3.0 },
            fixed_count: Some(12),
            ..Default::default()
        };
        assert!(matches!(sample_positions(&crowded, &mut rng), Err(Error::RejectionFailure { .. })));
        let over = PositionSampling { fixed_count: Some(20), ..Default::default() };
        assert!(matches!(sample_positions(&over, &mut rng), Err(Error::SpinCapExceeded { .. })));
    }

    #[test]
    fn disorder_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = sample_disorder(100_000, 1.0, DisorderDistribution::Gaussian, &mut rng).unwrap();
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        let std = (h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (h.len() - 1) as f64).sqrt();
        assert!((std - 1.0).abs() < 0.02);
        let tiny = sample_disorder(1000, 1e-9, DisorderDistribution::Gaussian, &mut rng).unwrap();
        assert!(tiny.iter().all(|v| v.abs() < 1e-7));
        assert!(sample_disorder(3, 0.0, DisorderDistribution::Gaussian, &mut rng).is_err());
        let l = sample_disorder(100_001, 2.0, DisorderDistribution::Lorentzian, &mut rng).unwrap();
        let mut sorted = l.clone();
        sorted.sort_by(f64::total_cmp);
        let q3 = sorted[75_000];
        assert!((q3 - 2.0).abs() < 0.1, "upper quartile {q3}");
        assert_eq!(default_disorder_width(10.0, 0.01), 10.0);
    }

    #[test]
    fn csv_round_trip() {
        let field = FieldConfig::PerpTwoGroup { b_gauss: 362.4, groups: [0, 1] };
        let mut geom = sample_geometry(&field, &PositionSampling::fixed(6, 1e-3), 11).unwrap();
        geom.h = vec![0.5, -1.0, 2.0, 0.0, 1e-3, 7.0];
        let mut buf = Vec::new();
        geom.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_nm,y_nm,z_nm,group,h_mhz\n"));
        let back = EnsembleGeometry::read_csv(buf.as_slice(), geom.b_dir, geom.b_mag, geom.seed).unwrap();
        assert_eq!(back, geom);
        let missing = "x_nm,y_nm,group,h_mhz\n0,0,0,0\n";
        assert!(matches!(
            EnsembleGeometry::read_csv(missing.as_bytes(), geom.b_dir, 0.0, 0),
            Err(Error::MissingColumn(c)) if c == "z_nm"
        ));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let field = FieldConfig::PerpOneGroup { b_gauss: 362.4, group: 0 };
        let p = PositionSampling::fixed(8, 5e-4);
        assert_eq!(sample_geometry(&field, &p, 4).unwrap(), sample_geometry(&field, &p, 4).unwrap());
        assert_ne!(sample_geometry(&field, &p, 4).unwrap(), sample_geometry(&field, &p, 5).unwrap());
    }

    #[test]
    fn ppm_conversion() {
        assert!((ppm_to_density(1.0) - 1.76e-4).abs() < 1e-18);
        assert!((density_to_ppm(ppm_to_density(3.3)) - 3.3).abs() < 1e-12);
    }
}
