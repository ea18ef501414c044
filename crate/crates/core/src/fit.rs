//! Oscillating-Gaussian surface fits to step distributions.
//!
//! The model is a normal density in the site coordinate whose centre moves
//! as `mu0 + A cos(omega t + phi)`. It is evaluated at integer sites with no
//! renormalization over the fit window.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, Bounds, LeastSquaresProblem, LmConfig, LmReport};
use crate::noise::StepDataset;

/// Fewest steps and points a surface fit accepts.
pub const MIN_FIT_STEPS: usize = 5;
pub const MIN_FIT_POINTS: usize = 55;

/// Lower bound on the fitted width.
pub const MIN_SIGMA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationParams {
    pub mu0: f64,
    pub amplitude: f64,
    /// Radians per step.
    pub omega: f64,
    pub phase: f64,
    pub sigma: f64,
}

impl OscillationParams {
    pub const NAMES: [&'static str; 5] = ["mu0", "amplitude", "omega", "phase", "sigma"];

    pub fn to_array(self) -> [f64; 5] {
        [self.mu0, self.amplitude, self.omega, self.phase, self.sigma]
    }

    pub fn from_array(p: [f64; 5]) -> Self {
        Self {
            mu0: p[0],
            amplitude: p[1],
            omega: p[2],
            phase: p[3],
            sigma: p[4],
        }
    }

    /// Flip to `A >= 0` and wrap the phase into `(-pi, pi]`.
    pub fn canonical(mut self) -> Self {
        if self.amplitude < 0.0 {
            self.amplitude = -self.amplitude;
            self.phase += PI;
        }
        self.phase = wrap_phase(self.phase);
        self
    }

    /// Centre of the packet at time `t`.
    pub fn centre(&self, t: f64) -> f64 {
        self.mu0 + self.amplitude * (self.omega * t + self.phase).cos()
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn oscillating_gaussian(t: f64, y: f64, params: &OscillationParams) -> Result<f64> {
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {}",
            params.sigma
        )));
    }
    Ok(density(t, y, &params.to_array()))
}

fn density(t: f64, y: f64, p: &[f64]) -> f64 {
    let u = (y - p[0] - p[1] * (p[2] * t + p[3]).cos()) / p[4];
    (-0.5 * u * u).exp() / (p[4] * (2.0 * PI).sqrt())
}

/// Gradient of the density with respect to `(mu0, A, omega, phi, sigma)`.
fn density_gradient(t: f64, y: f64, p: &[f64]) -> [f64; 5] {
    let theta = p[2] * t + p[3];
    let (sin, cos) = theta.sin_cos();
    let sigma = p[4];
    let u = (y - p[0] - p[1] * cos) / sigma;
    let f = (-0.5 * u * u).exp() / (sigma * (2.0 * PI).sqrt());
    let g = f * u / sigma;
    [g, g * cos, -g * p[1] * t * sin, -g * p[1] * sin, f * (u * u - 1.0) / sigma]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Unweighted,
    /// Residuals divided by the per-point standard errors.
    InverseVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub weighting: Weighting,
    /// Restart from several phases and keep the best optimum.
    pub multistart: bool,
    pub solver: LmConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weighting: Weighting::Unweighted,
            multistart: true,
            solver: LmConfig::default(),
        }
    }
}

/// Site and step ranges used by a fit, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub sites: (i64, i64),
    pub steps: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationFit {
    pub params: OscillationParams,
    pub standard_errors: OscillationParams,
    /// 5x5 covariance, row-major in the order of [`OscillationParams::NAMES`].
    pub covariance: Vec<f64>,
    pub residual_sum: f64,
    pub points: usize,
    pub window: FitWindow,
    pub weighting: Weighting,
    pub iterations: usize,
    pub converged: bool,
    /// Set when `J^T J` is numerically singular and a pseudo-inverse was used.
    pub covariance_degenerate: bool,
}

impl OscillationFit {
    pub fn covariance_entry(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * 5 + j]
    }
}

struct SurfaceProblem {
    t: Vec<f64>,
    y: Vec<f64>,
    p: Vec<f64>,
    weight: Vec<f64>,
}

impl LeastSquaresProblem for SurfaceProblem {
    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        (0..self.t.len())
            .map(|i| (density(self.t[i], self.y[i], params) - self.p[i]) * self.weight[i])
            .collect()
    }

    fn jacobian(&self, params: &[f64]) -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.t.len(), 5);
        for i in 0..self.t.len() {
            let g = density_gradient(self.t[i], self.y[i], params);
            for (j, v) in g.iter().enumerate() {
                jac[(i, j)] = v * self.weight[i];
            }
        }
        Some(jac)
    }
}

fn surface_bounds() -> Bounds {
    Bounds {
        lower: vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, MIN_SIGMA],
        upper: vec![f64::INFINITY, f64::INFINITY, PI, f64::INFINITY, f64::INFINITY],
    }
}

fn surface_problem(
    dataset: &StepDataset,
    window: FitWindow,
    weighting: Weighting,
) -> Result<SurfaceProblem> {
    let (a, b) = window.steps;
    let (xmin, xmax) = window.sites;
    if a > b || b >= dataset.len() {
        return Err(Error::InvalidParameter(format!(
            "step range {a}..={b} outside dataset of {} steps",
            dataset.len()
        )));
    }
    let steps = b - a + 1;
    if steps < MIN_FIT_STEPS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_STEPS,
            got: steps,
        });
    }
    let mut problem = SurfaceProblem {
        t: Vec::new(),
        y: Vec::new(),
        p: Vec::new(),
        weight: Vec::new(),
    };
    let mut errors = Vec::new();
    for t in a..=b {
        let dist = &dataset.steps[t];
        for (i, &x) in dist.sites.iter().enumerate() {
            if (xmin..=xmax).contains(&x) {
                problem.t.push(t as f64);
                problem.y.push(x as f64);
                problem.p.push(dist.probabilities[i]);
                errors.push(dist.stderr.as_ref().map(|e| e[i]));
            }
        }
    }
    if problem.t.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: problem.t.len(),
        });
    }
    problem.weight = match weighting {
        Weighting::Unweighted => vec![1.0; errors.len()],
        Weighting::InverseVariance => {
            let errors: Vec<f64> = errors
                .into_iter()
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| {
                    Error::InvalidParameter("inverse-variance weighting needs stderr".into())
                })?;
            // Empty bins report zero error; give them the smallest observed one.
            let floor = errors
                .iter()
                .cloned()
                .filter(|e| *e > 0.0)
                .fold(f64::INFINITY, f64::min);
            if !floor.is_finite() {
                return Err(Error::ZeroWeight);
            }
            errors.iter().map(|e| 1.0 / e.max(floor)).collect()
        }
    };
    Ok(problem)
}

/// Least-squares fit of the oscillating Gaussian jointly over all steps and
/// sites in `window`. Without a guess, [`initial_guess`] seeds the search.
pub fn fit_surface(
    dataset: &StepDataset,
    window: FitWindow,
    guess: Option<OscillationParams>,
    options: &FitOptions,
) -> Result<OscillationFit> {
    let problem = surface_problem(dataset, window, options.weighting)?;
    let guess = match guess {
        Some(g) => g,
        None => initial_guess(&dataset.restrict(window.sites.0, window.sites.1)?),
    };
    let bounds = surface_bounds();
    let phases: &[f64] = if options.multistart {
        &[0.0, PI / 2.0, PI, 3.0 * PI / 2.0]
    } else {
        &[0.0]
    };
    let mut best: Option<LmReport> = None;
    for &shift in phases {
        let mut start = guess.to_array();
        start[3] += shift;
        let report = lsq::minimize(&problem, &start, Some(&bounds), &options.solver);
        if best.as_ref().is_none_or(|b| report.cost < b.cost) {
            best = Some(report);
        }
    }
    let best = best.expect("at least one start");
    let raw = OscillationParams::from_array([
        best.params[0],
        best.params[1],
        best.params[2],
        best.params[3],
        best.params[4],
    ]);
    let params = raw.canonical();
    // The sign flip of A only negates its column of J.
    let mut jac = problem.jacobian(&best.params).expect("analytic jacobian");
    if raw.amplitude < 0.0 {
        let col = -jac.column(1);
        jac.set_column(1, &col);
    }
    let m = problem.t.len();
    let dof = (m - 5).max(1) as f64;
    let jtj = jac.tr_mul(&jac);
    let svd = jtj.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let degenerate = !(smin > 1e-12 * smax);
    let inverse = svd
        .pseudo_inverse(1e-12 * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let covariance = inverse * (best.cost / dof);
    let se: Vec<f64> = (0..5).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    Ok(OscillationFit {
        params,
        standard_errors: OscillationParams::from_array([se[0], se[1], se[2], se[3], se[4]]),
        covariance: (0..25).map(|k| covariance[(k / 5, k % 5)]).collect(),
        residual_sum: best.cost,
        points: m,
        window,
        weighting: options.weighting,
        iterations: best.iterations,
        converged: best.converged(),
        covariance_degenerate: degenerate,
    })
}

/// Sum of squared residuals of a fixed parameter set on the fit window.
pub fn surface_residual(
    dataset: &StepDataset,
    window: FitWindow,
    params: &OscillationParams,
) -> Result<f64> {
    let problem = surface_problem(dataset, window, Weighting::Unweighted)?;
    Ok(problem.residuals(&params.to_array()).iter().map(|r| r * r).sum())
}

/// Best static Gaussian (`A = 0`) on the same window, for comparison.
pub fn fit_static(dataset: &StepDataset, window: FitWindow) -> Result<OscillationFit> {
    struct Static(SurfaceProblem);
    impl LeastSquaresProblem for Static {
        fn residuals(&self, p: &[f64]) -> Vec<f64> {
            self.0.residuals(&[p[0], 0.0, 0.0, 0.0, p[1]])
        }
    }
    let problem = Static(surface_problem(dataset, window, Weighting::Unweighted)?);
    let guess = initial_guess(&dataset.restrict(window.sites.0, window.sites.1)?);
    let bounds = Bounds {
        lower: vec![f64::NEG_INFINITY, MIN_SIGMA],
        upper: vec![f64::INFINITY, f64::INFINITY],
    };
    let report = lsq::minimize(&problem, &[guess.mu0, guess.sigma], Some(&bounds), &LmConfig::default());
    Ok(OscillationFit {
        params: OscillationParams::from_array([report.params[0], 0.0, 0.0, 0.0, report.params[1]]),
        standard_errors: OscillationParams::from_array([f64::NAN; 5]),
        covariance: vec![f64::NAN; 25],
        residual_sum: report.cost,
        points: problem.0.t.len(),
        window,
        weighting: Weighting::Unweighted,
        iterations: report.iterations,
        converged: report.converged(),
        covariance_degenerate: true,
    })
}

/// Frequency in `[2 pi / len, pi]` maximizing `|sum (s_t - mean) e^{-i w t}|`,
/// scanned on a grid `oversample` times finer than the DFT bins.
pub fn dominant_frequency(series: &[f64], oversample: usize) -> Option<f64> {
    let len = series.len();
    if len < 2 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / len as f64;
    let oversample = oversample.max(1);
    let spacing = 2.0 * PI / (len * oversample) as f64;
    let power = |w: f64| {
        let (re, im) = series.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, s)| {
            let (sin, cos) = (w * t as f64).sin_cos();
            (re + (s - mean) * cos, im - (s - mean) * sin)
        });
        re * re + im * im
    };
    (oversample..)
        .map(|j| j as f64 * spacing)
        .take_while(|w| *w <= PI + 1e-12)
        .map(|w| (w, power(w)))
        .fold(None, |best: Option<(f64, f64)>, (w, p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((w, p)),
        })
        .map(|(w, _)| w)
}

/// Starting point for [`fit_surface`] from the step means and variances.
pub fn initial_guess(dataset: &StepDataset) -> OscillationParams {
    let means = dataset.mean_series();
    let n = means.len().max(1) as f64;
    let mu0 = means.iter().sum::<f64>() / n;
    let pooled = dataset.steps.iter().map(|d| d.variance()).sum::<f64>() / n;
    let (lo, hi) = means
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(*m), hi.max(*m)));
    let amplitude = if means.is_empty() { 0.0 } else { (hi - lo) / 2.0 };
    let omega = if means.len() < 4 {
        PI / 2.0
    } else {
        dominant_frequency(&means, 1).unwrap_or(PI / 2.0)
    };
    OscillationParams {
        mu0,
        amplitude,
        omega,
        phase: 0.0,
        sigma: pooled.sqrt().max(MIN_SIGMA),
    }
}

/// `a + b t + A cos(w t + phi)` fitted to a time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendedOscillation {
    pub offset: f64,
    pub drift: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub residual_sum: f64,
}

pub fn fit_trended_oscillation(series: &[f64]) -> Result<TrendedOscillation> {
    if series.len() < 6 {
        return Err(Error::InsufficientData {
            needed: 6,
            got: series.len(),
        });
    }
    struct Trend<'a>(&'a [f64]);
    impl LeastSquaresProblem for Trend<'_> {
        fn residuals(&self, p: &[f64]) -> Vec<f64> {
            self.0
                .iter()
                .enumerate()
                .map(|(t, s)| {
                    let t = t as f64;
                    p[0] + p[1] * t + p[2] * (p[3] * t + p[4]).cos() - s
                })
                .collect()
        }
    }
    let n = series.len() as f64;
    let drift = (series[series.len() - 1] - series[0]) / (n - 1.0);
    let detrended: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(t, s)| s - series[0] - drift * t as f64)
        .collect();
    let omega = dominant_frequency(&detrended, 8).unwrap_or(PI / 2.0);
    let spread = detrended.iter().cloned().fold(0.0, |a: f64, b| a.max(b.abs()));
    let bounds = Bounds {
        lower: vec![f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY],
        upper: vec![f64::INFINITY, f64::INFINITY, f64::INFINITY, PI, f64::INFINITY],
    };
    let problem = Trend(series);
    let mut best: Option<LmReport> = None;
    for phase in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0] {
        let start = [series[0], drift, spread, omega, phase];
        let report = lsq::minimize(&problem, &start, Some(&bounds), &LmConfig::default());
        if best.as_ref().is_none_or(|b| report.cost < b.cost) {
            best = Some(report);
        }
    }
    let p = best.expect("at least one start");
    let (mut amplitude, mut phase) = (p.params[2], p.params[4]);
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += PI;
    }
    Ok(TrendedOscillation {
        offset: p.params[0],
        drift: p.params[1],
        amplitude,
        omega: p.params[3],
        phase: wrap_phase(phase),
        residual_sum: p.cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SiteDistribution;
    use crate::noise::Provenance;

    fn params(mu0: f64, a: f64, w: f64, phi: f64, sigma: f64) -> OscillationParams {
        OscillationParams {
            mu0,
            amplitude: a,
            omega: w,
            phase: phi,
            sigma,
        }
    }

    fn synthetic(p: &OscillationParams, steps: usize) -> StepDataset {
        let sites: Vec<i64> = (-5..=5).collect();
        let dists = (0..=steps)
            .map(|t| {
                let probs = sites
                    .iter()
                    .map(|&x| oscillating_gaussian(t as f64, x as f64, p).unwrap())
                    .collect();
                SiteDistribution::new(sites.clone(), probs, None).unwrap()
            })
            .collect();
        StepDataset::new(dists, Provenance::Synthetic).unwrap()
    }

    fn full_window(steps: usize) -> FitWindow {
        FitWindow {
            sites: (-5, 5),
            steps: (0, steps),
        }
    }

    #[test]
    fn static_gaussian_is_time_independent() {
        let p = params(0.3, 0.0, 1.1, 0.4, 2.0);
        for y in [-2.0, 0.0, 1.5] {
            let a = oscillating_gaussian(0.0, y, &p).unwrap();
            let b = oscillating_gaussian(7.3, y, &p).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn centre_follows_cosine() {
        let p = params(0.0, 0.5, PI / 2.0, 0.0, 1.0);
        assert!((p.centre(0.0) - 0.5).abs() < 1e-15);
        assert!((p.centre(2.0) + 0.5).abs() < 1e-15);
        let at = |t: f64, y: f64| oscillating_gaussian(t, y, &p).unwrap();
        assert!(at(0.0, 0.5) > at(0.0, 0.4) && at(0.0, 0.5) > at(0.0, 0.6));
        assert!(at(2.0, -0.5) > at(2.0, -0.4) && at(2.0, -0.5) > at(2.0, -0.6));
    }

    #[test]
    fn density_integrates_to_one() {
        let p = params(0.2, 0.5, 1.3, 0.7, 3.0);
        for t in [0.0, 1.0, 2.5] {
            let h = 0.01;
            let total: f64 = (-6000..=6000)
                .map(|i| oscillating_gaussian(t, i as f64 * h, &p).unwrap() * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-9, "{total}");
        }
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(oscillating_gaussian(0.0, 0.0, &params(0.0, 0.0, 0.0, 0.0, 0.0)).is_err());
        assert!(oscillating_gaussian(0.0, 0.0, &params(0.0, 0.0, 0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = [0.2, 0.6, 1.4, -0.3, 2.2];
        for (t, y) in [(0.0, 1.0), (3.0, -2.0), (7.0, 4.0)] {
            let g = density_gradient(t, y, &p);
            for j in 0..5 {
                let h = 1e-6;
                let mut up = p;
                let mut down = p;
                up[j] += h;
                down[j] -= h;
                let fd = (density(t, y, &up) - density(t, y, &down)) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-8, "param {j}");
            }
        }
    }

    #[test]
    fn recovers_noiseless_model() {
        let truth = params(0.0, 0.5, PI / 2.0, 0.0, 3.0);
        let data = synthetic(&truth, 8);
        let fit = fit_surface(&data, full_window(8), None, &FitOptions::default()).unwrap();
        for (a, b) in fit.params.to_array().iter().zip(truth.to_array()) {
            assert!((a - b).abs() < 1e-6, "{:?}", fit.params);
        }
        assert!(fit.residual_sum < 1e-20);
    }

    #[test]
    fn canonical_form_absorbs_sign() {
        let p = params(0.0, -0.4, 1.0, 0.2, 1.0).canonical();
        assert!(p.amplitude > 0.0);
        assert!((p.phase - (0.2 + PI - 2.0 * PI)).abs() < 1e-12);
        let q = params(0.0, -0.4, 1.0, 0.2, 1.0);
        for t in [0.0, 1.0, 3.0] {
            assert!((p.centre(t) - q.centre(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn requires_enough_data() {
        let data = synthetic(&params(0.0, 0.5, 1.0, 0.0, 2.0), 8);
        let short = FitWindow {
            sites: (-5, 5),
            steps: (0, 3),
        };
        assert!(matches!(
            fit_surface(&data, short, None, &FitOptions::default()),
            Err(Error::InsufficientData { .. })
        ));
        let narrow = FitWindow {
            sites: (-2, 2),
            steps: (0, 8),
        };
        assert!(matches!(
            fit_surface(&data, narrow, None, &FitOptions::default()),
            Err(Error::InsufficientData { .. })
        ));
        let single = StepDataset::new(vec![data.steps[0].clone()], Provenance::Synthetic).unwrap();
        let guess = initial_guess(&single);
        assert_eq!(guess.omega, PI / 2.0);
        assert!(fit_surface(&single, full_window(0), None, &FitOptions::default()).is_err());
    }

    #[test]
    fn static_data_has_no_amplitude_guess() {
        let data = synthetic(&params(0.5, 0.0, 0.0, 0.0, 2.0), 8);
        let guess = initial_guess(&data);
        assert!(guess.amplitude.abs() < 1e-12);
        assert!((guess.mu0 - data.steps[0].mean()).abs() < 1e-12);
    }

    #[test]
    fn guess_finds_model_frequency() {
        let data = synthetic(&params(0.0, 1.0, 1.2, 0.3, 2.0), 16);
        let guess = initial_guess(&data);
        assert!((guess.omega - 1.2).abs() < 2.0 * PI / 17.0);
    }

    #[test]
    fn inverse_variance_weighting_needs_errors() {
        let data = synthetic(&params(0.0, 0.5, 1.0, 0.0, 2.0), 8);
        let options = FitOptions {
            weighting: Weighting::InverseVariance,
            ..FitOptions::default()
        };
        assert!(fit_surface(&data, full_window(8), None, &options).is_err());
    }

    #[test]
    fn covariance_is_symmetric() {
        let truth = params(0.1, 0.5, 1.3, 0.4, 2.5);
        let mut data = synthetic(&truth, 8);
        for (t, d) in data.steps.iter_mut().enumerate() {
            for (i, p) in d.probabilities.iter_mut().enumerate() {
                *p += 1e-3 * (((t * 11 + i) as f64) * 1.7).sin();
            }
        }
        let fit = fit_surface(&data, full_window(8), None, &FitOptions::default()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((fit.covariance_entry(i, j) - fit.covariance_entry(j, i)).abs() < 1e-12);
            }
            assert!((fit.standard_errors.to_array()[i].powi(2) - fit.covariance_entry(i, i)).abs() < 1e-15);
        }
        assert!(!fit.covariance_degenerate);
    }

    #[test]
    fn dominant_frequency_of_pure_tone() {
        let series: Vec<f64> = (0..64).map(|t| (PI / 2.0 * t as f64 + 0.3).cos()).collect();
        assert!((dominant_frequency(&series, 1).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!(dominant_frequency(&[1.0], 1).is_none());
    }

    #[test]
    fn trended_oscillation_recovery() {
        let series: Vec<f64> = (0..17)
            .map(|t| {
                let t = t as f64;
                0.4 - 0.1 * t + 0.5 * (1.57 * t + 0.8).cos()
            })
            .collect();
        let fit = fit_trended_oscillation(&series).unwrap();
        assert!((fit.amplitude - 0.5).abs() < 1e-8);
        assert!((fit.omega - 1.57).abs() < 1e-8);
        assert!((fit.drift + 0.1).abs() < 1e-8);
        assert!((fit.phase - 0.8).abs() < 1e-8);
    }
}
