use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manybody::TimeSeries;

/// One fitted parameter with its 1σ uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    /// Time range of the points that entered the fit, μs.
    pub range: (f64, f64),
    pub n_points: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map_or(f64::NAN, |p| p.value)
    }
}

/// Output of [`levenberg_marquardt`].
#[derive(Clone, Debug)]
pub struct LmSolution {
    pub params: DVector<f64>,
    /// `s² (JᵀJ)⁻¹` at the solution.
    pub covariance: DMatrix<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub evaluations: usize,
}

struct CurveProblem<'a, F> {
    model: F,
    x: &'a [f64],
    y: &'a [f64],
    p: DVector<f64>,
}

impl<F: Fn(&[f64], f64) -> f64> CurveProblem<'_, F> {
    fn residuals_at(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.x.len(), self.x.iter().zip(self.y).map(|(&xi, &yi)| (self.model)(p.as_slice(), xi) - yi))
    }

    /// Central differences.
    fn jacobian_at(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.x.len(), p.len());
        for k in 0..p.len() {
            let h = 1e-6 * p[k].abs().max(1e-3);
            let (mut lo, mut hi) = (p.clone(), p.clone());
            lo[k] -= h;
            hi[k] += h;
            j.set_column(k, &((self.residuals_at(&hi) - self.residuals_at(&lo)) / (2.0 * h)));
        }
        j
    }
}

impl<F: Fn(&[f64], f64) -> f64> LeastSquaresProblem<f64, Dyn, Dyn> for CurveProblem<'_, F> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, p: &DVector<f64>) {
        self.p.copy_from(p);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = self.residuals_at(&self.p);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let j = self.jacobian_at(&self.p);
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

/// Least-squares fit of `model(p, x)` to `y` starting from `p0`.
pub fn levenberg_marquardt<F>(model: F, x: &[f64], y: &[f64], p0: &[f64]) -> Result<LmSolution>
where
    F: Fn(&[f64], f64) -> f64,
{
    let (m, np) = (x.len(), p0.len());
    if m <= np {
        return Err(Error::InsufficientData(format!("{m} points for {np} parameters")));
    }
    let problem = CurveProblem { model, x, y, p: DVector::from_column_slice(p0) };
    if problem.residuals().is_none() {
        return Err(Error::FitFailed("model is not finite at the starting point".into()));
    }
    let (problem, report) = LevenbergMarquardt::new().with_patience(500).minimize(problem);
    let r = problem.residuals().ok_or_else(|| Error::FitFailed("model diverged".into()))?;
    let j = problem.jacobian_at(&problem.p);
    let cost = r.norm_squared();
    let s2 = cost / (m - np) as f64;
    let covariance = (j.transpose() * &j)
        .try_inverse()
        .map(|inv| inv * s2)
        .unwrap_or_else(|| DMatrix::from_element(np, np, f64::NAN));
    Ok(LmSolution {
        params: problem.p,
        covariance,
        residual_norm: cost.sqrt(),
        converged: report.termination.was_successful(),
        evaluations: report.number_of_evaluations,
    })
}

/// Starting points for `β` in the stretched-exponential fit.
pub const BETA_STARTS: [f64; 4] = [0.3, 0.5, 0.8, 1.0];

/// Default lower cut on the data entering decay fits.
pub const DEFAULT_FLOOR: f64 = 0.25;

/// `C₀ exp(−(t/τ)^β)` fitted to the points with value `≥ floor`.
pub fn fit_stretched_exponential(ts: &TimeSeries, floor: f64) -> Result<FitResult> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        ts.t.iter().zip(&ts.value).filter(|(_, &v)| v >= floor).map(|(&t, &v)| (t, v)).unzip();
    if x.len() < 5 {
        return Err(Error::InsufficientData(format!("{} points at or above the floor {floor}", x.len())));
    }
    // log-parametrized τ and β stay positive
    let model = |p: &[f64], t: f64| p[0] * (-(t / p[1].exp()).powf(p[2].exp())).exp();
    let c0 = y[0].max(floor);
    let target = c0 / std::f64::consts::E;
    let tau0 = x
        .iter()
        .zip(&y)
        .find(|(_, &v)| v <= target)
        .map(|(&t, _)| t)
        .unwrap_or_else(|| x[x.len() - 1] * 2.0)
        .max(1e-12);
    let mut best: Option<LmSolution> = None;
    for beta in BETA_STARTS {
        let Ok(sol) = levenberg_marquardt(model, &x, &y, &[c0, tau0.ln(), beta.ln()]) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| sol.residual_norm < b.residual_norm) {
            best = Some(sol);
        }
    }
    let sol = best.ok_or_else(|| Error::FitFailed("no start converged".into()))?;
    let (tau, beta) = (sol.params[1].exp(), sol.params[2].exp());
    let sd = |k: usize| sol.covariance[(k, k)].max(0.0).sqrt();
    Ok(FitResult {
        model: "stretched_exponential".into(),
        params: vec![
            FitParam { name: "c0".into(), value: sol.params[0], stderr: sd(0) },
            FitParam { name: "tau".into(), value: tau, stderr: tau * sd(1) },
            FitParam { name: "beta".into(), value: beta, stderr: beta * sd(2) },
        ],
        range: (x[0], x[x.len() - 1]),
        n_points: x.len(),
        residual_norm: sol.residual_norm,
        converged: sol.converged,
    })
}

/// Evaluate a stretched-exponential fit.
pub fn stretched_value(fit: &FitResult, t: f64) -> f64 {
    fit.value("c0") * (-(t / fit.value("tau")).powf(fit.value("beta"))).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub n_points: usize,
}

/// Ordinary least squares `y = a + b x`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::InsufficientData(format!("{n} points for a line")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, slope_stderr, intercept, n_points: n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    pub prefactor: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Slope of `log(value)` against `log(t)` over `window`.
pub fn powerlaw_tail(ts: &TimeSeries, window: (f64, f64)) -> Result<PowerLawFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = ts
        .t
        .iter()
        .zip(&ts.value)
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &v)| (t, v))
        .unzip();
    if x.len() < 4 {
        return Err(Error::InsufficientData(format!("{} points in window {:?}", x.len(), window)));
    }
    if x.iter().zip(&y).any(|(&t, &v)| t <= 0.0 || v <= 0.0) {
        return Err(Error::invalid("window", "power-law fit needs positive times and values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = linear_regression(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: fit.slope,
        stderr: fit.slope_stderr,
        prefactor: fit.intercept.exp(),
        window,
        n_points: x.len(),
    })
}

/// Points `(log t, log(−log value))` for `t > 0` and `0 < value < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Indices of the source points kept.
    pub kept: Vec<usize>,
}

pub fn loglog_transform(ts: &TimeSeries) -> LogLogSeries {
    let mut out = LogLogSeries { x: vec![], y: vec![], kept: vec![] };
    for (k, (&t, &v)) in ts.t.iter().zip(&ts.value).enumerate() {
        if t > 0.0 && v > 0.0 && v < 1.0 {
            out.x.push(t.ln());
            out.y.push((-v.ln()).ln());
            out.kept.push(k);
        }
    }
    out
}

/// Slope of the loglog-log transform over `window`: the stretch exponent.
pub fn loglog_slope(ts: &TimeSeries, window: (f64, f64)) -> Result<LinearFit> {
    let tr = loglog_transform(ts);
    let (x, y): (Vec<f64>, Vec<f64>) = tr
        .x
        .iter()
        .zip(&tr.y)
        .zip(&tr.kept)
        .filter(|(_, &k)| ts.t[k] >= window.0 && ts.t[k] <= window.1)
        .map(|((&a, &b), _)| (a, b))
        .unzip();
    linear_regression(&x, &y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Result {
    /// μs
    pub t2: f64,
    pub t2_stderr: f64,
    /// `(J₀ρ)·T₂` when `J₀ρ` (MHz) is supplied.
    pub jt2: Option<f64>,
    pub fit: FitResult,
}

/// Time at which the fitted stretched exponential reaches `1/e`.
pub fn fit_t2(ts: &TimeSeries, floor: f64, j0_rho: Option<f64>) -> Result<T2Result> {
    let fit = fit_stretched_exponential(ts, floor)?;
    let (c0, tau, beta) = (fit.value("c0"), fit.value("tau"), fit.value("beta"));
    let arg = 1.0 + c0.ln();
    if arg <= 0.0 {
        return Err(Error::FitFailed(format!("fitted amplitude {c0:.3} never crosses 1/e")));
    }
    let t2 = tau * arg.powf(1.0 / beta);
    let t2_stderr = if fit.param("tau").unwrap().stderr.is_finite() {
        t2 * fit.param("tau").unwrap().stderr / tau
    } else {
        f64::NAN
    };
    Ok(T2Result { t2, t2_stderr, jt2: j0_rho.map(|j| j * t2), fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(f: impl Fn(f64) -> f64, t: Vec<f64>) -> TimeSeries {
        let v = t.iter().map(|&x| f(x)).collect();
        TimeSeries::exact(t, v).unwrap()
    }

    fn noisy(f: impl Fn(f64) -> f64, t: Vec<f64>, sigma: f64, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, sigma).unwrap();
        let v = t.iter().map(|&x| f(x) + n.sample(&mut rng)).collect();
        TimeSeries::exact(t, v).unwrap()
    }

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| dt * k as f64).collect()
    }

    #[test]
    fn lm_recovers_line_and_exponential() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * (-v / 0.7).exp() + 0.1).collect();
        let sol = levenberg_marquardt(|p, t| p[0] * (-t / p[1]).exp() + p[2], &x, &y, &[1.0, 1.0, 0.0]).unwrap();
        assert!(sol.converged);
        assert!((sol.params[0] - 2.0).abs() < 1e-6 && (sol.params[1] - 0.7).abs() < 1e-6);
        assert!(levenberg_marquardt(|p, t| p[0] * t, &[1.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn stretched_recovery() {
        let ts = noisy(|t| (-(t / 2.0f64).powf(0.6)).exp(), grid(80, 0.1), 0.01, 1);
        let fit = fit_stretched_exponential(&ts, DEFAULT_FLOOR).unwrap();
        assert!((fit.value("beta") - 0.6).abs() < 0.05, "{fit:?}");
        assert!((fit.value("tau") - 2.0).abs() < 0.1, "{fit:?}");
        assert!(fit.params.iter().all(|p| p.stderr >= 0.0));
    }

    #[test]
    fn pure_exponential_gives_unit_beta() {
        let ts = noisy(|t| (-t / 1.5).exp(), grid(60, 0.05), 0.005, 2);
        let fit = fit_stretched_exponential(&ts, DEFAULT_FLOOR).unwrap();
        let b = fit.param("beta").unwrap();
        assert!((b.value - 1.0).abs() < 3.0 * b.stderr.max(0.01));
    }

    #[test]
    fn floor_excludes_points() {
        let mut ts = series(|t| (-t).exp(), grid(40, 0.1));
        let fit = fit_stretched_exponential(&ts, 0.25).unwrap();
        let above = ts.value.iter().filter(|v| **v >= 0.25).count();
        assert_eq!(fit.n_points, above);
        // corrupt everything below the floor; the fit must not move
        for v in ts.value.iter_mut().filter(|v| **v < 0.25) {
            *v = -5.0;
        }
        let again = fit_stretched_exponential(&ts, 0.25).unwrap();
        assert!((again.value("tau") - fit.value("tau")).abs() < 1e-12);
        assert!(fit_stretched_exponential(&ts, 0.99).is_err());
    }

    #[test]
    fn powerlaw_examples() {
        let t: Vec<f64> = (1..60).map(|k| k as f64 * 0.5).collect();
        let ts = series(|t| 3.0 * t.powf(-1.5), t.clone());
        let p = powerlaw_tail(&ts, (1.0, 30.0)).unwrap();
        assert!((p.exponent + 1.5).abs() < 0.02);
        let flat = series(|_| 0.4, t.clone());
        assert!(powerlaw_tail(&flat, (1.0, 30.0)).unwrap().exponent.abs() < 1e-12);
        assert!(powerlaw_tail(&ts, (1.0, 2.0)).is_err());
        // the log-log slope of exp(−(t/τ)^β) is −β(t/τ)^β: it drifts with the window
        let s = series(|t| (-(t / 2.0f64).powf(0.5)).exp(), t);
        let a = powerlaw_tail(&s, (5.0, 10.0)).unwrap().exponent;
        let b = powerlaw_tail(&s, (15.0, 29.5)).unwrap().exponent;
        assert!(b < a - 0.5, "{a} {b}");
        assert!(b < -1.5);
    }

    #[test]
    fn powerlaw_scale_invariant() {
        let t: Vec<f64> = (1..40).map(|k| k as f64).collect();
        let ts = series(|t| t.powf(-0.8) * (1.0 + 0.1 * t.sin()), t);
        let mut scaled = ts.clone();
        scaled.value.iter_mut().for_each(|v| *v *= 7.5);
        let a = powerlaw_tail(&ts, (1.0, 39.0)).unwrap().exponent;
        let b = powerlaw_tail(&scaled, (1.0, 39.0)).unwrap().exponent;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn loglog_is_straight_for_stretched_exponential() {
        let ts = series(|t| (-(t / 1.7f64).powf(0.5)).exp(), (1..50).map(|k| 0.2 * k as f64).collect());
        let tr = loglog_transform(&ts);
        for k in 1..tr.x.len() - 1 {
            let d1 = (tr.y[k] - tr.y[k - 1]) / (tr.x[k] - tr.x[k - 1]);
            let d2 = (tr.y[k + 1] - tr.y[k]) / (tr.x[k + 1] - tr.x[k]);
            assert!((d2 - d1).abs() < 1e-10);
        }
        assert!((loglog_slope(&ts, (0.0, 100.0)).unwrap().slope - 0.5).abs() < 1e-10);
        let with_one = series(|t| if t < 0.5 { 1.0 } else { 0.5 }, vec![0.0, 0.2, 1.0, 2.0]);
        assert_eq!(loglog_transform(&with_one).kept, vec![2, 3]);
    }

    #[test]
    fn loglog_slope_on_noisy_data() {
        let ts = noisy(|t| (-(t / 2.0f64).powf(0.5)).exp(), (1..100).map(|k| 0.05 * k as f64).collect(), 0.002, 3);
        assert!((loglog_slope(&ts, (0.0, 5.0)).unwrap().slope - 0.5).abs() < 0.02);
    }

    #[test]
    fn t2_of_exponential() {
        let ts = series(|t| (-t / 5.0).exp(), grid(100, 0.1));
        let r = fit_t2(&ts, 0.25, Some(0.2)).unwrap();
        assert!((r.t2 - 5.0).abs() < 0.1);
        assert!((r.jt2.unwrap() - 0.2 * r.t2).abs() < 1e-15);
    }

    #[test]
    fn recovery_coverage() {
        let mut hits = 0;
        let trials = 200;
        for seed in 0..trials {
            let ts = noisy(|t| (-(t / 2.0f64).powf(0.6)).exp(), grid(60, 0.12), 0.01, 100 + seed);
            let fit = fit_stretched_exponential(&ts, DEFAULT_FLOOR).unwrap();
            let b = fit.param("beta").unwrap();
            let tau = fit.param("tau").unwrap();
            if (b.value - 0.6).abs() <= 3.0 * b.stderr && (tau.value - 2.0).abs() <= 3.0 * tau.stderr {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.95 * trials as f64, "{hits}/{trials}");
    }
}
