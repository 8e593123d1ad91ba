use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::timeseries::check_grid;
use super::{polarized_state, site_operator, total_spin_expectation, Axis, TimeSeries};
use crate::error::{Error, Result};
use crate::par;
use crate::rng;
use crate::spin::{Operator, Spectral, StateVector};

/// Largest system for which the full trace is attempted.
pub const FULL_TRACE_MAX_SPINS: usize = 10;

/// Size up to which `Auto` uses the full trace.
const AUTO_FULL_TRACE_SPINS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CorrelatorMethod {
    FullTrace,
    Typicality { samples: usize, seed: u64 },
    /// Full trace up to 8 spins, typicality above.
    Auto { samples: usize, seed: u64 },
}

/// Infinite-temperature autocorrelators of a fixed Hamiltonian.
pub struct DirectCorrelator {
    n: usize,
    spectral: Spectral,
    block_of: Vec<usize>,
    pos: Vec<usize>,
}

impl DirectCorrelator {
    pub fn new(h: &Operator, n: usize) -> Result<Self> {
        if h.dim() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, found: h.dim() });
        }
        let spectral = Spectral::new(h)?;
        let mut block_of = vec![0; h.dim()];
        let mut pos = vec![0; h.dim()];
        for (b, blk) in spectral.blocks().iter().enumerate() {
            for (p, &i) in blk.indices.iter().enumerate() {
                block_of[i] = b;
                pos[i] = p;
            }
        }
        Ok(DirectCorrelator { n, spectral, block_of, pos })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// `Σ_{i∈sites} Tr[s_i^a(t) s_i^a] / (|sites| 2^N / 4)`, exact.
    pub fn full_trace(&self, sites: &[usize], axis: Axis, t_grid: &[f64]) -> Result<TimeSeries> {
        if self.n > FULL_TRACE_MAX_SPINS {
            return Err(Error::invalid(
                "method",
                format!("full trace is limited to {FULL_TRACE_MAX_SPINS} spins, got {}", self.n),
            ));
        }
        check_grid(t_grid)?;
        self.check_sites(sites)?;
        let blocks = self.spectral.blocks();
        let nb = blocks.len();
        // summed |Ã_mn|² per block pair
        let mut weights: Vec<Option<DMatrix<f64>>> = vec![None; nb * nb];
        for &site in sites {
            let op = site_operator(self.n, site, axis);
            let mut subs: Vec<Option<DMatrix<C64>>> = vec![None; nb * nb];
            for (r, c, v) in op.entries() {
                let (br, bc) = (self.block_of[r], self.block_of[c]);
                let m = subs[br * nb + bc]
                    .get_or_insert_with(|| DMatrix::zeros(blocks[br].indices.len(), blocks[bc].indices.len()));
                m[(self.pos[r], self.pos[c])] += v;
            }
            for (k, sub) in subs.into_iter().enumerate() {
                if let Some(a) = sub {
                    let (br, bc) = (k / nb, k % nb);
                    let rotated = blocks[br].vectors.adjoint() * a * &blocks[bc].vectors;
                    let w = rotated.map(|z| z.norm_sqr());
                    match &mut weights[k] {
                        Some(acc) => *acc += w,
                        slot => *slot = Some(w),
                    }
                }
            }
        }
        let norm = sites.len() as f64 * (1u64 << self.n) as f64 / 4.0;
        let mut terms: Vec<(f64, f64)> = Vec::new();
        for (k, w) in weights.iter().enumerate() {
            if let Some(w) = w {
                let (br, bc) = (k / nb, k % nb);
                for m in 0..w.nrows() {
                    for n in 0..w.ncols() {
                        let wt = w[(m, n)];
                        if wt > 1e-300 {
                            terms.push((blocks[br].energies[m] - blocks[bc].energies[n], wt));
                        }
                    }
                }
            }
        }
        let values: Vec<f64> = par::map_indexed(t_grid.len(), |k| {
            let t = t_grid[k];
            terms.iter().map(|&(w, a)| a * (std::f64::consts::TAU * w * t).cos()).sum::<f64>() / norm
        });
        Ok(TimeSeries::exact(t_grid.to_vec(), values)?
            .with_meta("method", "full_trace")
            .with_meta("n_spins", self.n)
            .with_meta("axis", axis))
    }

    /// Quantum-typicality estimate from `samples` random states.
    pub fn typicality(&self, sites: &[usize], axis: Axis, t_grid: &[f64], samples: usize, seed: u64) -> Result<TimeSeries> {
        check_grid(t_grid)?;
        self.check_sites(sites)?;
        if samples < 2 {
            return Err(Error::invalid("samples", "typicality needs at least two samples"));
        }
        let ops: Vec<Operator> = sites.iter().map(|&s| site_operator(self.n, s, axis)).collect();
        let dim = 1usize << self.n;
        let per_sample: Vec<Vec<f64>> = par::map_indexed(samples, |k| {
            let mut rng = rng::stream(seed, rng::purpose::TYPICALITY_BASE + k as u64);
            let r = StateVector::random(dim, &mut rng).into_amplitudes();
            let cr = self.spectral.to_eigenbasis(&r);
            let cphi: Vec<Vec<DVector<C64>>> =
                ops.iter().map(|op| self.spectral.to_eigenbasis(&op.apply(&r))).collect();
            t_grid
                .iter()
                .map(|&t| {
                    let rt = self.spectral.from_eigenbasis(&cr, t);
                    let mut acc = 0.0;
                    for (op, c) in ops.iter().zip(&cphi) {
                        let phit = self.spectral.from_eigenbasis(c, t);
                        acc += rt.dotc(&op.apply(&phit)).re;
                    }
                    acc / (0.25 * ops.len() as f64)
                })
                .collect()
        });
        let (mean, stderr) = mean_and_stderr(&per_sample, t_grid.len());
        Ok(TimeSeries::new(t_grid.to_vec(), mean, stderr)?
            .with_meta("method", "typicality")
            .with_meta("samples", samples)
            .with_meta("seed", seed)
            .with_meta("n_spins", self.n)
            .with_meta("axis", axis))
    }

    pub fn compute(&self, sites: &[usize], axis: Axis, t_grid: &[f64], method: CorrelatorMethod) -> Result<TimeSeries> {
        match method {
            CorrelatorMethod::FullTrace => self.full_trace(sites, axis, t_grid),
            CorrelatorMethod::Typicality { samples, seed } => self.typicality(sites, axis, t_grid, samples, seed),
            CorrelatorMethod::Auto { samples, seed } => {
                if self.n <= AUTO_FULL_TRACE_SPINS {
                    self.full_trace(sites, axis, t_grid)
                } else {
                    self.typicality(sites, axis, t_grid, samples.max(20), seed)
                }
            }
        }
    }

    fn check_sites(&self, sites: &[usize]) -> Result<()> {
        if sites.is_empty() {
            return Err(Error::invalid("sites", "no sites selected"));
        }
        if let Some(&s) = sites.iter().find(|&&s| s >= self.n) {
            return Err(Error::invalid("sites", format!("site {s} out of range for {} spins", self.n)));
        }
        Ok(())
    }
}

pub(crate) fn mean_and_stderr(rows: &[Vec<f64>], len: usize) -> (Vec<f64>, Vec<f64>) {
    let m = rows.len() as f64;
    let mut mean = vec![0.0; len];
    for r in rows {
        for (a, v) in mean.iter_mut().zip(r) {
            *a += v / m;
        }
    }
    let mut stderr = vec![0.0; len];
    if rows.len() > 1 {
        for r in rows {
            for k in 0..len {
                stderr[k] += (r[k] - mean[k]).powi(2);
            }
        }
        for s in &mut stderr {
            *s = (*s / (m - 1.0) / m).sqrt();
        }
    }
    (mean, stderr)
}

/// Site-averaged `⟨s_i^a(t) s_i^a(0)⟩` at infinite temperature, normalized to 1
/// at `t = 0`.
pub fn autocorrelator_direct(
    h: &Operator,
    n: usize,
    axis: Axis,
    t_grid: &[f64],
    method: CorrelatorMethod,
) -> Result<TimeSeries> {
    let sites: Vec<usize> = (0..n).collect();
    DirectCorrelator::new(h, n)?.compute(&sites, axis, t_grid, method)
}

/// `⟨Σ s^a⟩(t) / ⟨Σ s^a⟩(0)` from the state fully polarized along `axis`.
pub fn global_decay(h: &Operator, n: usize, axis: Axis, t_grid: &[f64]) -> Result<TimeSeries> {
    check_grid(t_grid)?;
    if h.dim() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: h.dim() });
    }
    let spectral = Spectral::new(h)?;
    let psi0 = polarized_state(n, &axis.unit());
    let c = spectral.to_eigenbasis(&psi0);
    let values = t_grid
        .iter()
        .map(|&t| total_spin_expectation(&spectral.from_eigenbasis(&c, t), n, axis) / (n as f64 / 2.0))
        .collect();
    Ok(TimeSeries::exact(t_grid.to_vec(), values)?.with_meta("n_spins", n).with_meta("axis", axis))
}
