//! Damped least squares (Levenberg-Marquardt) with box constraints.
//!
//! Minimizes `sum_i r_i(x)^2` subject to `lower <= x <= upper`. Bounds are
//! handled by an active set: components sitting on a bound whose gradient
//! points outward are frozen for the step, and every trial point is
//! projected back into the box.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquaresProblem {
    /// Residual vector at `params`.
    fn residuals(&self, params: &[f64]) -> Vec<f64>;

    /// Analytic Jacobian `d r_i / d x_j`, if available.
    fn jacobian(&self, _params: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, lo), hi)| (*lo..=*hi).contains(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step reduces the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop when the step is this small relative to the parameters.
    pub step_tolerance: f64,
    pub initial_damping: f64,
    /// Relative step of the finite-difference Jacobian.
    pub difference_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-10,
            cost_tolerance: 1e-15,
            step_tolerance: 1e-15,
            initial_damping: 1e-3,
            difference_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    CostTolerance,
    StepTolerance,
    ZeroResidual,
    /// Damping grew without finding a descent step.
    Stalled,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations | Termination::Stalled)
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    /// Cost after the initial point and after every accepted iteration.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Jacobian at `params`.
    pub jacobian: DMatrix<f64>,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central differences, one-sided next to a bound.
pub fn numerical_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    params: &[f64],
    bounds: &Bounds,
    relative_step: f64,
) -> DMatrix<f64> {
    let base = problem.residuals(params);
    let mut jac = DMatrix::zeros(base.len(), params.len());
    let mut x = params.to_vec();
    for j in 0..params.len() {
        let h = relative_step * params[j].abs().max(1.0);
        let can_up = params[j] + h <= bounds.upper[j];
        let can_down = params[j] - h >= bounds.lower[j];
        let (hi, lo, width) = match (can_up, can_down) {
            (true, true) => (params[j] + h, params[j] - h, 2.0 * h),
            (true, false) => (params[j] + h, params[j], h),
            (false, true) => (params[j], params[j] - h, h),
            (false, false) => continue,
        };
        x[j] = hi;
        let r_hi = if hi == params[j] { base.clone() } else { problem.residuals(&x) };
        x[j] = lo;
        let r_lo = if lo == params[j] { base.clone() } else { problem.residuals(&x) };
        x[j] = params[j];
        for i in 0..base.len() {
            jac[(i, j)] = (r_hi[i] - r_lo[i]) / width;
        }
    }
    jac
}

pub fn minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: &[f64],
    bounds: Option<&Bounds>,
    config: &LmConfig,
) -> LmReport {
    let n = initial.len();
    let unbounded;
    let bounds = match bounds {
        Some(b) => b,
        None => {
            unbounded = Bounds::unbounded(n);
            &unbounded
        }
    };
    let mut x = initial.to_vec();
    bounds.project(&mut x);
    let mut r = problem.residuals(&x);
    let mut cost = sum_sq(&r);
    let mut history = vec![cost];
    let mut damping = config.initial_damping;
    let jacobian_at = |x: &[f64]| {
        problem
            .jacobian(x)
            .unwrap_or_else(|| numerical_jacobian(problem, x, bounds, config.difference_step))
    };
    let mut jac = jacobian_at(&x);
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        if cost == 0.0 {
            termination = Termination::ZeroResidual;
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let gradient = jac.tr_mul(&rv);
        let free: Vec<usize> = (0..n)
            .filter(|&j| {
                let at_lower = x[j] <= bounds.lower[j] && gradient[j] > 0.0;
                let at_upper = x[j] >= bounds.upper[j] && gradient[j] < 0.0;
                !(at_lower || at_upper)
            })
            .collect();
        let projected_gradient = free.iter().map(|&j| gradient[j].abs()).fold(0.0, f64::max);
        if free.is_empty() || projected_gradient < config.gradient_tolerance {
            termination = Termination::Gradient;
            break;
        }
        iterations += 1;

        let jtj = jac.tr_mul(&jac);
        let max_diag = free.iter().map(|&j| jtj[(j, j)]).fold(0.0, f64::max);
        let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
        let m = free.len();
        let mut accepted = false;
        let mut stop = None;
        for _ in 0..60 {
            let mut a = DMatrix::zeros(m, m);
            let mut b = DVector::zeros(m);
            for (p, &jp) in free.iter().enumerate() {
                b[p] = -gradient[jp];
                for (q, &jq) in free.iter().enumerate() {
                    a[(p, q)] = jtj[(jp, jq)];
                }
                a[(p, p)] += damping * (jtj[(jp, jp)].max(floor));
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&b)) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = x.clone();
            for (p, &jp) in free.iter().enumerate() {
                trial[jp] += step[p];
            }
            bounds.project(&mut trial);
            let moved: f64 = trial.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if moved <= config.step_tolerance * (scale + config.step_tolerance) {
                stop = Some(Termination::StepTolerance);
                break;
            }
            let trial_r = problem.residuals(&trial);
            let trial_cost = sum_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let reduction = (cost - trial_cost) / cost;
                x = trial;
                r = trial_r;
                cost = trial_cost;
                history.push(cost);
                damping = (damping / 3.0).max(1e-15);
                accepted = true;
                if reduction < config.cost_tolerance {
                    stop = Some(Termination::CostTolerance);
                }
                break;
            }
            damping *= 4.0;
            if damping > 1e20 {
                break;
            }
        }
        if accepted {
            jac = jacobian_at(&x);
        }
        if let Some(reason) = stop {
            termination = reason;
            break;
        }
        if !accepted {
            termination = Termination::Stalled;
            break;
        }
    }

    LmReport {
        params: x,
        residuals: r,
        cost,
        cost_history: history,
        iterations,
        termination,
        jacobian: jac,
    }
}
