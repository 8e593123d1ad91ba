//! Curve fitting, extrinsic normalization and sensitivity estimates.

mod fit;
mod sensitivity;

pub use fit::{
    fit_stretched_exponential, fit_t2, levenberg_marquardt, linear_regression, loglog_slope, loglog_transform,
    powerlaw_tail, stretched_value, FitParam, FitResult, LinearFit, LmSolution, LogLogSeries, PowerLawFit, T2Result,
    BETA_STARTS, DEFAULT_FLOOR,
};
pub use sensitivity::{
    max_slope, sensitivity_report, Breakdown, ReadoutParams, SensitivityReport,
};

use crate::error::{Error, Result};
use crate::manybody::TimeSeries;

/// References below this are refused by [`normalize_extrinsic`].
pub const MIN_REFERENCE: f64 = 0.05;

/// Divide `signal` by `reference`, the latter interpolated linearly onto the
/// signal grid. Relative errors add in quadrature.
pub fn normalize_extrinsic(signal: &TimeSeries, reference: &TimeSeries) -> Result<TimeSeries> {
    if signal.is_empty() || reference.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let (lo, hi) = (reference.t[0], reference.t[reference.len() - 1]);
    let tol = 1e-9 * hi.abs().max(1.0);
    if signal.t[0] < lo - tol || signal.t[signal.len() - 1] > hi + tol {
        return Err(Error::invalid("reference", format!("grid [{lo}, {hi}] does not cover the signal")));
    }
    let mut value = Vec::with_capacity(signal.len());
    let mut stderr = Vec::with_capacity(signal.len());
    for k in 0..signal.len() {
        let (r, sr) = reference.interpolate(signal.t[k]);
        if !(r > MIN_REFERENCE) {
            return Err(Error::ReferenceTooSmall { value: r, time: signal.t[k] });
        }
        let s = signal.value[k];
        value.push(s / r);
        stderr.push(((signal.stderr[k] / r).powi(2) + (s * sr / (r * r)).powi(2)).sqrt());
    }
    let mut out = TimeSeries::new(signal.t.clone(), value, stderr)?;
    out.metadata = signal.metadata.clone();
    Ok(out.with_meta("normalized", true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> Vec<f64> {
        (0..50).map(|k| 0.1 * k as f64).collect()
    }

    #[test]
    fn unit_reference_is_identity() {
        let t = grid();
        let s = TimeSeries::new(t.clone(), t.iter().map(|x| (-x).exp()).collect(), vec![0.01; 50]).unwrap();
        let r = TimeSeries::exact(t, vec![1.0; 50]).unwrap();
        let n = normalize_extrinsic(&s, &r).unwrap();
        assert_eq!(n.value, s.value);
        assert_eq!(n.stderr, s.stderr);
    }

    #[test]
    fn factorized_decay() {
        let t = grid();
        let s = TimeSeries::exact(t.clone(), t.iter().map(|x| (-x / 2.0 - x / 3.0).exp()).collect()).unwrap();
        let r = TimeSeries::exact(t.clone(), t.iter().map(|x| (-x / 3.0).exp()).collect()).unwrap();
        let n = normalize_extrinsic(&s, &r).unwrap();
        for (k, x) in t.iter().enumerate() {
            assert!((n.value[k] - (-x / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_on_other_grid_is_interpolated() {
        let t = grid();
        let s = TimeSeries::exact(t.clone(), vec![0.5; 50]).unwrap();
        let r = TimeSeries::exact(vec![0.0, 10.0], vec![1.0, 0.5]).unwrap();
        let n = normalize_extrinsic(&s, &r).unwrap();
        assert!((n.value[10] - 0.5 / (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn small_reference_rejected() {
        let t = grid();
        let s = TimeSeries::exact(t.clone(), vec![0.5; 50]).unwrap();
        let r = TimeSeries::exact(t.clone(), t.iter().map(|x| (-x).exp()).collect()).unwrap();
        assert!(matches!(normalize_extrinsic(&s, &r), Err(Error::ReferenceTooSmall { .. })));
        let short = TimeSeries::exact(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(normalize_extrinsic(&s, &short).is_err());
    }

    #[test]
    fn stderr_matches_monte_carlo() {
        let (s0, ss, r0, sr) = (0.6, 0.02, 0.8, 0.03);
        let sig = TimeSeries::new(vec![0.0, 1.0], vec![s0; 2], vec![ss; 2]).unwrap();
        let rf = TimeSeries::new(vec![0.0, 1.0], vec![r0; 2], vec![sr; 2]).unwrap();
        let predicted = normalize_extrinsic(&sig, &rf).unwrap().stderr[0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (ns, nr) = (Normal::new(s0, ss).unwrap(), Normal::new(r0, sr).unwrap());
        let m = 200_000;
        let draws: Vec<f64> = (0..m).map(|_| ns.sample(&mut rng) / nr.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
        assert!((sd / predicted - 1.0).abs() < 0.03, "{sd} vs {predicted}");
    }
}
