//! Imperfect hardware: detuned q-plates, waveplate and axis offsets, mode
//! dependent preparation and detection efficiencies, and finite counts.
//!
//! The walk stays coherent; each step just uses perturbed settings. Mode
//! efficiencies act as classical filters on the measured distributions.

use rand::SeedableRng;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{Representation, SiteDistribution, SpinorField};
use crate::lsq::{self, Bounds, LeastSquaresProblem, LmConfig, Termination};
use crate::walk::{self, HardwareParams, WalkStepParams};
use crate::C64;

/// Lowest and highest encoded mode.
pub const MODE_MIN: i64 = -5;
pub const MODE_MAX: i64 = 5;
pub const MODE_COUNT: usize = (MODE_MAX - MODE_MIN + 1) as usize;

/// Counts per step when none are given.
pub const DEFAULT_COUNTS: u64 = 10_000;

/// Smallest efficiency the calibration may reach.
pub const MIN_EFFICIENCY: f64 = 1e-3;

/// Calibration box for waveplate and axis offsets, radians.
pub const MAX_OFFSET: f64 = 0.5;

fn mode_index(x: i64) -> Option<usize> {
    (MODE_MIN..=MODE_MAX).contains(&x).then(|| (x - MODE_MIN) as usize)
}

/// Per-step hardware deviations and per-mode efficiencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// q-plate tuning per step; conversion efficiency is `sin^2(delta/2)`.
    pub qplate_tuning: Vec<f64>,
    /// Quarter-waveplate angle offset per step.
    pub waveplate_offset_alpha: Vec<f64>,
    /// Half-waveplate angle offset per step.
    pub waveplate_offset_beta: Vec<f64>,
    pub qplate_axis_offset: Vec<f64>,
    /// Preparation efficiency of modes -5..=5.
    pub generation_efficiency: Vec<f64>,
    /// Detection efficiency of modes -5..=5.
    pub detection_efficiency: Vec<f64>,
    pub counts_per_step: u64,
}

impl NoiseModel {
    /// Perfect devices for `steps` steps.
    pub fn ideal(steps: usize) -> Self {
        Self {
            qplate_tuning: vec![PI; steps],
            waveplate_offset_alpha: vec![0.0; steps],
            waveplate_offset_beta: vec![0.0; steps],
            qplate_axis_offset: vec![0.0; steps],
            generation_efficiency: vec![1.0; MODE_COUNT],
            detection_efficiency: vec![1.0; MODE_COUNT],
            counts_per_step: DEFAULT_COUNTS,
        }
    }

    pub fn steps(&self) -> usize {
        self.qplate_tuning.len()
    }

    pub fn validate(&self) -> Result<()> {
        let steps = self.steps();
        for (name, v) in [
            ("waveplate_offset_alpha", &self.waveplate_offset_alpha),
            ("waveplate_offset_beta", &self.waveplate_offset_beta),
            ("qplate_axis_offset", &self.qplate_axis_offset),
        ] {
            if v.len() != steps {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries, qplate_tuning has {steps}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if let Some(d) = self.qplate_tuning.iter().find(|d| !(0.0..=PI).contains(*d)) {
            return Err(Error::InvalidParameter(format!(
                "q-plate tuning {d} outside [0, pi]"
            )));
        }
        for (name, v) in [
            ("generation_efficiency", &self.generation_efficiency),
            ("detection_efficiency", &self.detection_efficiency),
        ] {
            if v.len() != MODE_COUNT {
                return Err(Error::InvalidParameter(format!(
                    "{name} needs {MODE_COUNT} entries, got {}",
                    v.len()
                )));
            }
            if let Some(e) = v.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} entry {e} outside (0, 1]"
                )));
            }
        }
        if self.counts_per_step == 0 {
            return Err(Error::InvalidParameter("counts_per_step must be positive".into()));
        }
        Ok(())
    }

    /// Conversion efficiency `sin^2(delta/2)` of each q-plate.
    pub fn qplate_efficiency(&self) -> Vec<f64> {
        self.qplate_tuning.iter().map(|d| (d / 2.0).sin().powi(2)).collect()
    }

    /// Settings of step `i` (zero based) around the nominal ones.
    pub fn step_params(&self, nominal: &HardwareParams, i: usize) -> HardwareParams {
        HardwareParams {
            qplate_tuning: self.qplate_tuning[i],
            qplate_axis: nominal.qplate_axis + self.qplate_axis_offset[i],
            qwp_angle: nominal.qwp_angle + self.waveplate_offset_alpha[i],
            hwp_angle: nominal.hwp_angle + self.waveplate_offset_beta[i],
            charge: nominal.charge,
        }
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    External,
}

/// Measured distributions, entry `t` at step `t`, all on one support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDataset {
    pub steps: Vec<SiteDistribution>,
    pub provenance: Provenance,
}

impl StepDataset {
    pub fn new(steps: Vec<SiteDistribution>, provenance: Provenance) -> Result<Self> {
        let first = steps.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        if first.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if steps.iter().any(|d| d.sites != first.sites) {
            return Err(Error::SupportMismatch);
        }
        Ok(Self { steps, provenance })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn sites(&self) -> &[i64] {
        &self.steps[0].sites
    }

    /// Restrict every step to `[xmin, xmax]` without renormalizing.
    pub fn restrict(&self, xmin: i64, xmax: i64) -> Result<Self> {
        Self::new(
            self.steps.iter().map(|d| d.restrict(xmin, xmax)).collect(),
            self.provenance,
        )
    }

    pub fn mean_series(&self) -> Vec<f64> {
        self.steps.iter().map(SiteDistribution::mean).collect()
    }
}

fn window_distribution(state: &SpinorField) -> Result<SiteDistribution> {
    Ok(state.site_distribution()?.restrict(MODE_MIN, MODE_MAX))
}

/// Reweight by `eta(x)` and renormalize. `eta` is indexed by mode `-5..=5`.
pub fn apply_detection_efficiency(dist: &SiteDistribution, eta: &[f64]) -> Result<SiteDistribution> {
    if eta.len() != MODE_COUNT {
        return Err(Error::InvalidParameter(format!(
            "efficiency needs {MODE_COUNT} entries, got {}",
            eta.len()
        )));
    }
    let weights = dist
        .sites
        .iter()
        .map(|&x| {
            mode_index(x).map(|i| eta[i]).ok_or_else(|| {
                Error::InvalidParameter(format!("site {x} outside the encoded modes"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let filtered = SiteDistribution {
        sites: dist.sites.clone(),
        probabilities: dist.probabilities.iter().zip(&weights).map(|(p, w)| p * w).collect(),
        stderr: dist
            .stderr
            .as_ref()
            .map(|e| e.iter().zip(&weights).map(|(s, w)| s * w).collect()),
    };
    filtered.normalized()
}

/// Filter the input amplitudes by `sqrt(eta_gen(x))` and renormalize.
fn prepare_input(input: &SpinorField, eta_gen: &[f64]) -> Result<SpinorField> {
    input.expect_representation(Representation::Position)?;
    let geometry = input.geometry();
    let mut state = input.clone();
    for i in 0..geometry.size() {
        if let Some(m) = mode_index(geometry.site(i)) {
            let spinor = state.spinor(i) * C64::new(eta_gen[m].sqrt(), 0.0);
            state.set_spinor(i, spinor);
        }
    }
    state.normalized()
}

/// Window distributions at steps `0..=steps` of the perturbed walk.
pub fn noisy_evolution(
    input: &SpinorField,
    nominal: &HardwareParams,
    noise: &NoiseModel,
    steps: usize,
) -> Result<Vec<SiteDistribution>> {
    noise.validate()?;
    nominal.validate()?;
    if steps > noise.steps() {
        return Err(Error::InvalidParameter(format!(
            "{steps} steps requested, noise model covers {}",
            noise.steps()
        )));
    }
    evolve_unchecked(input, nominal, noise, steps)
}

fn evolve_unchecked(
    input: &SpinorField,
    nominal: &HardwareParams,
    noise: &NoiseModel,
    steps: usize,
) -> Result<Vec<SiteDistribution>> {
    let mut state = prepare_input(input, &noise.generation_efficiency)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(apply_detection_efficiency(
        &window_distribution(&state)?,
        &noise.detection_efficiency,
    )?);
    for i in 0..steps {
        let params = WalkStepParams::Hardware(noise.step_params(nominal, i));
        let symbol = walk::StepSymbol::from_params_unchecked(params);
        state = walk::apply_taps_position(&state, symbol.taps())?;
        out.push(apply_detection_efficiency(
            &window_distribution(&state)?,
            &noise.detection_efficiency,
        )?);
    }
    Ok(out)
}

/// Multinomial draw of `total` events; probabilities are `counts/total`
/// with Poisson errors `sqrt(counts)/total`.
pub fn sample_counts(dist: &SiteDistribution, total: u64, seed: u64) -> Result<SiteDistribution> {
    if total == 0 {
        return Err(Error::InvalidParameter("total counts must be positive".into()));
    }
    let weights = dist.normalized()?.probabilities;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = total;
    let mut mass = 1.0;
    let mut counts = vec![0u64; weights.len()];
    for (i, &p) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == weights.len() || mass <= p {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(&mut rng);
        counts[i] = draw;
        remaining -= draw;
        mass -= p;
    }
    let n = total as f64;
    SiteDistribution::new(
        dist.sites.clone(),
        counts.iter().map(|&c| c as f64 / n).collect(),
        Some(counts.iter().map(|&c| (c as f64).sqrt() / n).collect()),
    )
}

/// Sample every step with its own seed, drawn from a stream seeded by `seed`.
pub fn sample_steps(
    steps: &[SiteDistribution],
    total: u64,
    seed: u64,
) -> Result<Vec<SiteDistribution>> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    steps
        .iter()
        .map(|d| sample_counts(d, total, master.next_u64()))
        .collect()
}

/// Simulate the noisy walk and sample `counts_per_step` events per step.
pub fn synthesize(
    input: &SpinorField,
    nominal: &HardwareParams,
    noise: &NoiseModel,
    steps: usize,
    seed: u64,
) -> Result<StepDataset> {
    let exact = noisy_evolution(input, nominal, noise, steps)?;
    StepDataset::new(
        sample_steps(&exact, noise.counts_per_step, seed)?,
        Provenance::Synthetic,
    )
}

/// Plain Bhattacharyya overlap `sum sqrt(p q)`.
pub fn bhattacharyya(p: &SiteDistribution, q: &SiteDistribution) -> Result<f64> {
    if p.sites != q.sites {
        return Err(Error::SupportMismatch);
    }
    Ok(p.probabilities
        .iter()
        .zip(&q.probabilities)
        .map(|(a, b)| (a * b).sqrt())
        .sum())
}

/// Classical fidelity `(sum sqrt(p q))^2`, clamped to `[0, 1]`.
pub fn fidelity(p: &SiteDistribution, q: &SiteDistribution) -> Result<f64> {
    Ok(bhattacharyya(p, q)?.powi(2).clamp(0.0, 1.0))
}

/// Which parameter families the calibration varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterGroups {
    pub qplate_tuning: bool,
    pub waveplate_offsets: bool,
    pub qplate_axis_offsets: bool,
    pub generation_efficiency: bool,
    pub detection_efficiency: bool,
}

impl Default for ParameterGroups {
    fn default() -> Self {
        Self {
            qplate_tuning: true,
            waveplate_offsets: false,
            qplate_axis_offsets: false,
            generation_efficiency: false,
            detection_efficiency: true,
        }
    }
}

impl ParameterGroups {
    pub fn all() -> Self {
        Self {
            qplate_tuning: true,
            waveplate_offsets: true,
            qplate_axis_offsets: true,
            generation_efficiency: true,
            detection_efficiency: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationOptions {
    pub groups: ParameterGroups,
    /// Divide residuals by the measured standard errors when present.
    pub poisson_weights: bool,
    pub solver: LmConfig,
}

/// Outcome of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub model: NoiseModel,
    /// `sum_t sum_x (model - measured)^2` at the returned model.
    pub objective: f64,
    pub initial_objective: f64,
    pub step_residuals: Vec<f64>,
    pub fidelities: Vec<f64>,
    pub bhattacharyya: Vec<f64>,
    /// Standard errors of the fitted q-plate tunings from the Jacobian at
    /// the optimum; empty when the tunings were held fixed.
    pub qplate_tuning_stderr: Vec<f64>,
    /// Objective after every accepted optimizer iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: String,
}

struct Calibration<'a> {
    measured: &'a StepDataset,
    input: &'a SpinorField,
    nominal: &'a HardwareParams,
    template: NoiseModel,
    groups: ParameterGroups,
    weights: Vec<f64>,
}

impl Calibration<'_> {
    fn horizon(&self) -> usize {
        self.measured.len() - 1
    }

    fn pack(&self, model: &NoiseModel) -> (Vec<f64>, Bounds) {
        let n = self.horizon();
        let mut x = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut push = |values: &[f64], lo: f64, hi: f64| {
            for v in values {
                x.push(v.clamp(lo, hi));
                lower.push(lo);
                upper.push(hi);
            }
        };
        let g = self.groups;
        if g.qplate_tuning {
            push(&model.qplate_tuning[..n], 0.0, PI);
        }
        if g.waveplate_offsets {
            push(&model.waveplate_offset_alpha[..n], -MAX_OFFSET, MAX_OFFSET);
            push(&model.waveplate_offset_beta[..n], -MAX_OFFSET, MAX_OFFSET);
        }
        if g.qplate_axis_offsets {
            push(&model.qplate_axis_offset[..n], -MAX_OFFSET, MAX_OFFSET);
        }
        if g.generation_efficiency {
            push(&model.generation_efficiency, MIN_EFFICIENCY, 1.0);
        }
        if g.detection_efficiency {
            push(&model.detection_efficiency, MIN_EFFICIENCY, 1.0);
        }
        (x, Bounds { lower, upper })
    }

    fn unpack(&self, x: &[f64]) -> NoiseModel {
        let n = self.horizon();
        let mut model = self.template.clone();
        let mut rest = x;
        let mut take = |target: &mut [f64]| {
            let (head, tail) = rest.split_at(target.len());
            target.copy_from_slice(head);
            rest = tail;
        };
        let g = self.groups;
        if g.qplate_tuning {
            take(&mut model.qplate_tuning[..n]);
        }
        if g.waveplate_offsets {
            take(&mut model.waveplate_offset_alpha[..n]);
            take(&mut model.waveplate_offset_beta[..n]);
        }
        if g.qplate_axis_offsets {
            take(&mut model.qplate_axis_offset[..n]);
        }
        if g.generation_efficiency {
            take(&mut model.generation_efficiency);
        }
        if g.detection_efficiency {
            take(&mut model.detection_efficiency);
        }
        model
    }

    fn model_output(&self, model: &NoiseModel) -> Result<Vec<SiteDistribution>> {
        evolve_unchecked(self.input, self.nominal, model, self.horizon())
    }
}

impl LeastSquaresProblem for Calibration<'_> {
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let total: usize = self.measured.steps.iter().map(SiteDistribution::len).sum();
        match self.model_output(&self.unpack(x)) {
            Ok(model) => model
                .iter()
                .zip(&self.measured.steps)
                .flat_map(|(m, d)| residual_row(m, d))
                .zip(&self.weights)
                .map(|(r, w)| r * w)
                .collect(),
            Err(_) => vec![f64::INFINITY; total],
        }
    }
}

/// Model minus measurement on the measurement's sites.
fn residual_row(model: &SiteDistribution, measured: &SiteDistribution) -> Vec<f64> {
    measured
        .sites
        .iter()
        .zip(&measured.probabilities)
        .map(|(&x, p)| model.probability_at(x).unwrap_or(0.0) - p)
        .collect()
}

/// `1/stderr` per point, floored at the smallest positive error; unit
/// weights when disabled or when errors are missing.
fn residual_weights(measured: &StepDataset, poisson: bool) -> Vec<f64> {
    let total: usize = measured.steps.iter().map(SiteDistribution::len).sum();
    let errors: Option<Vec<f64>> = measured
        .steps
        .iter()
        .map(|d| d.stderr.clone())
        .collect::<Option<Vec<_>>>()
        .map(|e| e.concat());
    let Some(errors) = errors.filter(|_| poisson) else {
        return vec![1.0; total];
    };
    let floor = errors.iter().cloned().filter(|e| *e > 0.0).fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return vec![1.0; total];
    }
    errors.iter().map(|e| 1.0 / e.max(floor)).collect()
}

fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::Gradient => "gradient",
        Termination::CostTolerance => "cost_tolerance",
        Termination::StepTolerance => "step_tolerance",
        Termination::ZeroResidual => "zero_residual",
        Termination::Stalled => "stalled",
        Termination::MaxIterations => "max_iterations",
    }
}

/// Fit the noise model to measured step distributions by bounded least
/// squares. Non-convergence is reported through `converged`, not as an error.
pub fn calibrate(
    measured: &StepDataset,
    guess: &NoiseModel,
    nominal: &HardwareParams,
    input: &SpinorField,
    options: &CalibrationOptions,
) -> Result<CalibrationReport> {
    if measured.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: measured.len(),
        });
    }
    guess.validate()?;
    nominal.validate()?;
    if let Some(&x) = measured.sites().iter().find(|&&x| mode_index(x).is_none()) {
        return Err(Error::InvalidParameter(format!(
            "measured site {x} outside the encoded modes"
        )));
    }
    if guess.steps() < measured.len() - 1 {
        return Err(Error::InvalidParameter(format!(
            "guess covers {} steps, data has {}",
            guess.steps(),
            measured.len() - 1
        )));
    }
    let problem = Calibration {
        measured,
        input,
        nominal,
        template: guess.clone(),
        groups: options.groups,
        weights: residual_weights(measured, options.poisson_weights),
    };
    let (x0, bounds) = problem.pack(guess);
    let report = lsq::minimize(&problem, &x0, Some(&bounds), &options.solver);
    let mut model = problem.unpack(&report.params);
    // A common factor in the detection efficiencies cancels on renormalization.
    if options.groups.detection_efficiency {
        let top = model.detection_efficiency.iter().cloned().fold(0.0, f64::max);
        for e in model.detection_efficiency.iter_mut() {
            *e = (*e / top).clamp(MIN_EFFICIENCY, 1.0);
        }
    }
    let predicted = problem.model_output(&model)?;
    let mut step_residuals = Vec::with_capacity(measured.len());
    let mut fidelities = Vec::with_capacity(measured.len());
    let mut overlaps = Vec::with_capacity(measured.len());
    for (m, d) in predicted.iter().zip(&measured.steps) {
        step_residuals.push(residual_row(m, d).iter().map(|r| r * r).sum());
        let m = m.restrict(d.sites[0], *d.sites.last().unwrap_or(&d.sites[0]));
        let d = d.normalized()?;
        fidelities.push(fidelity(&m, &d)?);
        overlaps.push(bhattacharyya(&m, &d)?);
    }
    let qplate_tuning_stderr = if options.groups.qplate_tuning {
        let jac = &report.jacobian;
        let dof = (jac.nrows().saturating_sub(jac.ncols())).max(1) as f64;
        let jtj = jac.tr_mul(jac);
        let eps = 1e-12 * jtj.norm().max(f64::MIN_POSITIVE);
        let inverse = jtj
            .pseudo_inverse(eps)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        (0..problem.horizon())
            .map(|i| (inverse[(i, i)] * report.cost / dof).max(0.0).sqrt())
            .collect()
    } else {
        Vec::new()
    };
    Ok(CalibrationReport {
        qplate_tuning_stderr,
        model,
        objective: step_residuals.iter().sum(),
        initial_objective: report.cost_history[0],
        step_residuals,
        fidelities,
        bhattacharyya: overlaps,
        objective_history: report.cost_history,
        iterations: report.iterations,
        converged: report.termination.converged(),
        termination: termination_label(report.termination).to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_input_state, truncated_gaussian_profile, LatticeGeometry};
    use rand::Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn reference_input(size: usize) -> SpinorField {
        let geometry = LatticeGeometry::new(size).unwrap();
        let g = truncated_gaussian_profile(0, 3.0, -5, 5, geometry).unwrap();
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        make_input_state([s, s], &g, geometry).unwrap()
    }

    fn uniform() -> SiteDistribution {
        SiteDistribution::new((MODE_MIN..=MODE_MAX).collect(), vec![1.0 / 11.0; 11], None).unwrap()
    }

    fn delta_at(x: i64) -> SiteDistribution {
        let probs = (MODE_MIN..=MODE_MAX).map(|s| if s == x { 1.0 } else { 0.0 }).collect();
        SiteDistribution::new((MODE_MIN..=MODE_MAX).collect(), probs, None).unwrap()
    }

    #[test]
    fn ideal_noise_reproduces_ideal_walk() {
        let input = reference_input(64);
        let nominal = HardwareParams::dirac_setup();
        let noisy = noisy_evolution(&input, &nominal, &NoiseModel::ideal(8), 8).unwrap();
        let mut state = input.clone();
        for (t, dist) in noisy.iter().enumerate() {
            if t > 0 {
                state = walk::apply_step_position(&state, &WalkStepParams::Hardware(nominal)).unwrap();
            }
            let ideal = state.site_distribution().unwrap().restrict(-5, 5).normalized().unwrap();
            for (a, b) in ideal.probabilities.iter().zip(&dist.probabilities) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn switched_off_qplates_keep_the_input_support() {
        let input = reference_input(64);
        let mut noise = NoiseModel::ideal(8);
        noise.qplate_tuning = vec![0.0; 8];
        let noisy = noisy_evolution(&input, &HardwareParams::dirac_setup(), &noise, 8).unwrap();
        for dist in &noisy {
            assert!(dist.total_variation(&noisy[0]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn small_offsets_drift_away_from_ideal() {
        let input = reference_input(64);
        let nominal = HardwareParams::dirac_setup();
        let ideal = noisy_evolution(&input, &nominal, &NoiseModel::ideal(8), 8).unwrap();
        let seeds = 8;
        let mut first = 0.0;
        let mut last = 0.0;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut noise = NoiseModel::ideal(8);
            for i in 0..8 {
                let mut sign = || if rng.random::<bool>() { 0.02 } else { -0.02 };
                noise.waveplate_offset_alpha[i] = sign();
                noise.waveplate_offset_beta[i] = sign();
                noise.qplate_axis_offset[i] = sign();
            }
            let noisy = noisy_evolution(&input, &nominal, &noise, 8).unwrap();
            first += noisy[1].total_variation(&ideal[1]).unwrap();
            last += noisy[8].total_variation(&ideal[8]).unwrap();
        }
        assert!(last > first, "{first} {last}");
    }

    #[test]
    fn rejects_bad_models() {
        let input = reference_input(64);
        let nominal = HardwareParams::dirac_setup();
        let mut noise = NoiseModel::ideal(4);
        assert!(noisy_evolution(&input, &nominal, &noise, 5).is_err());
        noise.qplate_tuning[0] = 3.2;
        assert!(noise.validate().is_err());
        let mut noise = NoiseModel::ideal(4);
        noise.detection_efficiency[3] = 0.0;
        assert!(noise.validate().is_err());
        let mut noise = NoiseModel::ideal(4);
        noise.waveplate_offset_beta.pop();
        assert!(noise.validate().is_err());
    }

    #[test]
    fn qplate_efficiency_is_sin_squared() {
        let mut noise = NoiseModel::ideal(2);
        noise.qplate_tuning[1] = PI / 2.0;
        let eff = noise.qplate_efficiency();
        assert!((eff[0] - 1.0).abs() < 1e-15);
        assert!((eff[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn detection_efficiency_examples() {
        let p = uniform();
        let same = apply_detection_efficiency(&p, &[1.0; 11]).unwrap();
        assert!(same.total_variation(&p).unwrap() < 1e-15);
        let half = apply_detection_efficiency(&p, &[0.5; 11]).unwrap();
        for (a, b) in half.probabilities.iter().zip(&p.probabilities) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut eta = [1.0; 11];
        eta[0] = 0.5;
        eta[10] = 0.5;
        let edge = apply_detection_efficiency(&p, &eta).unwrap();
        assert!((edge.probabilities[0] / edge.probabilities[5] - 0.5).abs() < 1e-12);
        assert!((edge.total() - 1.0).abs() < 1e-12);
        assert!(matches!(
            apply_detection_efficiency(&delta_at(2), &{
                let mut e = [1.0; 11];
                e[7] = 0.0;
                e
            }),
            Err(Error::ZeroWeight)
        ));
    }

    #[test]
    fn detection_efficiency_scales_stderr() {
        let p = sample_counts(&uniform(), 1000, 3).unwrap();
        let mut eta = [1.0; 11];
        eta[4] = 0.25;
        let q = apply_detection_efficiency(&p, &eta).unwrap();
        let ratio = |d: &SiteDistribution, i: usize| d.stderr.as_ref().unwrap()[i] / d.probabilities[i];
        assert!((ratio(&p, 4) - ratio(&q, 4)).abs() < 1e-12);
    }

    #[test]
    fn sampling_examples() {
        let exact = noisy_evolution(
            &reference_input(64),
            &HardwareParams::dirac_setup(),
            &NoiseModel::ideal(0),
            0,
        )
        .unwrap()
        .remove(0);
        let sampled = sample_counts(&exact, 1_000_000, 11).unwrap();
        let worst = sampled
            .probabilities
            .iter()
            .zip(&exact.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 5e-3, "{worst}");
        assert!((sampled.total() - 1.0).abs() < 1e-12);

        let one = sample_counts(&exact, 1, 5).unwrap();
        assert_eq!(one.probabilities.iter().filter(|p| **p == 1.0).count(), 1);
        assert_eq!(one.probabilities.iter().filter(|p| **p == 0.0).count(), 10);

        assert_eq!(sample_counts(&exact, 500, 9).unwrap(), sample_counts(&exact, 500, 9).unwrap());
        assert!(sample_counts(&exact, 0, 9).is_err());
    }

    #[test]
    fn sampling_stderr_is_poisson() {
        let s = sample_counts(&uniform(), 400, 1).unwrap();
        for (p, e) in s.probabilities.iter().zip(s.stderr.as_ref().unwrap()) {
            assert!((e - (p * 400.0).sqrt() / 400.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fidelity_examples() {
        let p = uniform();
        assert!((fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fidelity(&delta_at(-5), &delta_at(5)).unwrap(), 0.0);
        assert!((fidelity(&p, &delta_at(0)).unwrap() - 1.0 / 11.0).abs() < 1e-12);
        assert!((bhattacharyya(&p, &delta_at(0)).unwrap() - (1.0f64 / 11.0).sqrt()).abs() < 1e-12);
        let short = p.restrict(-3, 3);
        assert!(matches!(fidelity(&p, &short), Err(Error::SupportMismatch)));
    }

    #[test]
    fn noise_model_json_round_trip() {
        let mut noise = NoiseModel::ideal(8);
        noise.waveplate_offset_alpha[2] = 0.03;
        let text = serde_json::to_string(&noise).unwrap();
        assert!(text.contains("\"qplate_tuning\""));
        assert!(text.contains("\"counts_per_step\""));
        let back: NoiseModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, noise);
        let typo = text.replace("counts_per_step", "count_per_step");
        assert!(serde_json::from_str::<NoiseModel>(&typo).is_err());
    }

    #[test]
    fn dataset_requires_common_support() {
        let a = uniform();
        let b = a.restrict(-4, 4);
        assert!(matches!(
            StepDataset::new(vec![a.clone(), b], Provenance::External),
            Err(Error::SupportMismatch)
        ));
        assert!(StepDataset::new(vec![], Provenance::External).is_err());
        let ds = StepDataset::new(vec![a.clone(), a], Provenance::Synthetic).unwrap();
        assert_eq!(ds.restrict(-2, 2).unwrap().sites(), &[-2, -1, 0, 1, 2]);
    }

    #[test]
    fn calibrating_ideal_data_is_a_fixed_point() {
        let input = reference_input(32);
        let nominal = HardwareParams::dirac_setup();
        let ideal = NoiseModel::ideal(8);
        let exact = noisy_evolution(&input, &nominal, &ideal, 8).unwrap();
        let measured = StepDataset::new(exact, Provenance::Synthetic).unwrap();
        let report = calibrate(&measured, &ideal, &nominal, &input, &CalibrationOptions::default()).unwrap();
        assert!(report.objective < 1e-16, "{}", report.objective);
        for f in &report.fidelities {
            assert!((f - 1.0).abs() < 1e-9);
        }
        for d in &report.model.qplate_tuning {
            assert!((d - PI).abs() < 1e-6);
        }
    }

    #[test]
    fn calibration_needs_two_steps() {
        let input = reference_input(32);
        let measured = StepDataset::new(vec![uniform()], Provenance::External).unwrap();
        assert!(matches!(
            calibrate(
                &measured,
                &NoiseModel::ideal(8),
                &HardwareParams::dirac_setup(),
                &input,
                &CalibrationOptions::default()
            ),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn calibration_history_decreases_on_noisy_data() {
        let input = reference_input(32);
        let nominal = HardwareParams::dirac_setup();
        let mut planted = NoiseModel::ideal(8);
        planted.counts_per_step = 10_000;
        planted.qplate_tuning[3] = PI - 0.08;
        let measured = synthesize(&input, &nominal, &planted, 8, 17).unwrap();
        let mut options = CalibrationOptions::default();
        options.groups = ParameterGroups::all();
        let report = calibrate(&measured, &NoiseModel::ideal(8), &nominal, &input, &options).unwrap();
        assert!(report.objective_history.windows(2).all(|w| w[1] < w[0]));
        assert!(report.objective <= report.initial_objective);
        let (x, bounds) = Calibration {
            measured: &measured,
            input: &input,
            nominal: &nominal,
            template: report.model.clone(),
            groups: ParameterGroups::all(),
            weights: vec![],
        }
        .pack(&report.model);
        assert!(bounds.contains(&x));
        report.model.validate().unwrap();
    }
}
