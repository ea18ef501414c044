//! The five subcommands, callable as library functions.

use std::fs;
use std::path::{Path, PathBuf};

use qwalk_core::analytics::{self, energy_projectors, Sector, SpectralData, ZbDecomposition, ZbPrediction};
use qwalk_core::fit::{self, FitOptions, FitWindow, Weighting};
use qwalk_core::lattice::Representation;
use qwalk_core::noise::{self, CalibrationOptions, CalibrationReport, ParameterGroups};
use qwalk_core::walk::{self, StepSymbol};
use qwalk_core::{
    NoiseModel, OscillationFit, Provenance, SiteDistribution, SpinorField, StepDataset,
    WalkStepParams, C64,
};
use serde::{Deserialize, Serialize};

use crate::config::{LoadedConfig, RunConfig, SamplingConfig, SectorChoice};
use crate::error::CliError;
use crate::formats::{self, MeanPoint};

pub const TOOL_NAME: &str = "qwalk";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to rerun a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub config: RunConfig,
    /// Noise model contents, embedded so the manifest stands alone.
    pub noise: Option<NoiseModel>,
    pub sampling: Option<SamplingConfig>,
    pub provenance: Provenance,
    pub files: Vec<String>,
}

impl Manifest {
    /// Configuration that reproduces this run, with outputs sent to `output_dir`.
    pub fn reproduce(&self, output_dir: PathBuf) -> Result<LoadedConfig, CliError> {
        let mut config = self.config.clone();
        config.noise_model = None;
        config.sampling = self.sampling;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            noise: self.noise.clone(),
            output_dir,
        })
    }
}

/// Write `files` into `dir`; on failure remove whatever was written.
fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(CliError::Data(format!("cannot write {}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(())
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(CliError::data)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub counts: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub output_dir: PathBuf,
    pub distributions: Vec<SiteDistribution>,
    pub means: Vec<MeanPoint>,
    pub provenance: Provenance,
}

/// Ideal runs report the whole lattice; noisy runs the encoded window.
pub fn run_simulation(loaded: &LoadedConfig) -> Result<(Vec<SiteDistribution>, Provenance), CliError> {
    let config = &loaded.config;
    let input = config.input_state()?;
    let input = match config.input.project {
        Some(choice) => project_sector(&input, &config.walk, choice)?,
        None => input,
    };
    let exact = match (&loaded.noise, config.walk) {
        (Some(noise), WalkStepParams::Hardware(nominal)) => {
            noise::noisy_evolution(&input, &nominal, noise, config.steps).map_err(CliError::data)?
        }
        (Some(_), _) => return Err(CliError::Config("a noise model needs the hardware walk".into())),
        (None, params) => {
            let mut state = input;
            let mut out = vec![state.site_distribution().map_err(CliError::data)?];
            for _ in 0..config.steps {
                state = walk::apply_step_position(&state, &params).map_err(CliError::data)?;
                out.push(state.site_distribution().map_err(CliError::data)?);
            }
            state.check_boundary().map_err(|e| {
                CliError::Data(format!("{e}; use a larger lattice_size"))
            })?;
            out
        }
    };
    match config.sampling {
        Some(s) => Ok((
            noise::sample_steps(&exact, s.counts, s.seed).map_err(CliError::data)?,
            Provenance::Synthetic,
        )),
        None => Ok((exact, Provenance::Synthetic)),
    }
}

fn project_sector(
    input: &SpinorField,
    params: &WalkStepParams,
    choice: SectorChoice,
) -> Result<SpinorField, CliError> {
    let symbol = walk::step_symbol(*params).map_err(CliError::config)?;
    let spectral = SpectralData::new(&symbol, input.geometry()).map_err(CliError::config)?;
    let sector = match choice {
        SectorChoice::Positive => Sector::Positive,
        SectorChoice::Negative => Sector::Negative,
    };
    energy_projectors(&spectral)
        .apply(sector, &input.to_momentum().map_err(CliError::data)?)
        .and_then(|s| s.normalized())
        .and_then(|s| s.to_position())
        .map_err(CliError::data)
}

fn apply_overrides(loaded: &mut LoadedConfig, opts: &SimulateOptions) {
    if let Some(out) = &opts.out {
        loaded.output_dir = out.clone();
    }
    if opts.seed.is_some() || opts.counts.is_some() {
        let base = loaded.config.sampling;
        let counts = opts
            .counts
            .or(base.map(|s| s.counts))
            .or(loaded.noise.as_ref().map(|n| n.counts_per_step))
            .unwrap_or(noise::DEFAULT_COUNTS);
        let seed = opts.seed.or(base.map(|s| s.seed)).unwrap_or(0);
        loaded.config.sampling = Some(SamplingConfig { counts, seed });
    }
}

pub fn simulate(config_path: &Path, opts: &SimulateOptions) -> Result<SimulateOutcome, CliError> {
    let mut loaded = RunConfig::load(config_path)?;
    apply_overrides(&mut loaded, opts);
    if loaded.config.sampling.is_some_and(|s| s.counts == 0) {
        return Err(CliError::Config("counts must be positive".into()));
    }
    simulate_loaded(&loaded)
}

pub fn simulate_loaded(loaded: &LoadedConfig) -> Result<SimulateOutcome, CliError> {
    let (distributions, provenance) = run_simulation(loaded)?;
    let means = formats::mean_series(&distributions);
    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        core_version: qwalk_core::VERSION.into(),
        command: "simulate".into(),
        config: loaded.config.clone(),
        noise: loaded.noise.clone(),
        sampling: loaded.config.sampling,
        provenance,
        files: vec![
            formats::DISTRIBUTIONS_FILE.into(),
            formats::MEAN_POSITION_FILE.into(),
        ],
    };
    write_outputs(
        &loaded.output_dir,
        &[
            (
                formats::DISTRIBUTIONS_FILE,
                csv_text(|b| formats::write_distributions(b, &distributions))?,
            ),
            (
                formats::MEAN_POSITION_FILE,
                csv_text(|b| formats::write_mean_series(b, &means))?,
            ),
            (formats::MANIFEST_FILE, formats::to_json(&manifest)?),
        ],
    )?;
    Ok(SimulateOutcome {
        output_dir: loaded.output_dir.clone(),
        distributions,
        means,
        provenance,
    })
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>, CliError> {
    let path = dir.join(formats::MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(CliError::data)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Data(format!("invalid manifest {}: {e}", path.display())))
}

/// Load `distributions.csv` from a run directory.
pub fn read_dataset(dir: &Path) -> Result<StepDataset, CliError> {
    let path = dir.join(formats::DISTRIBUTIONS_FILE);
    let file = fs::File::open(&path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let steps = formats::read_distributions(file)?;
    if steps.is_empty() {
        return Err(CliError::Data(format!("{} has no rows", path.display())));
    }
    let provenance = read_manifest(dir)?
        .map(|m| m.provenance)
        .unwrap_or(Provenance::External);
    StepDataset::new(steps, provenance).map_err(CliError::data)
}

#[derive(Debug, Clone, Default)]
pub struct FitArgs {
    pub input: PathBuf,
    pub window: Option<(i64, i64)>,
    pub steps: Option<(usize, usize)>,
    pub weighted: bool,
    pub out: Option<PathBuf>,
}

/// Fit the surface to a run directory and write `fit_report.json`.
pub fn fit(args: &FitArgs) -> Result<OscillationFit, CliError> {
    let dataset = read_dataset(&args.input)?;
    let window = FitWindow {
        sites: args.window.unwrap_or((-5, 5)),
        steps: args.steps.unwrap_or((0, dataset.len() - 1)),
    };
    if window.sites.0 > window.sites.1 {
        return Err(CliError::Config(format!("empty site window {:?}", window.sites)));
    }
    let options = FitOptions {
        weighting: if args.weighted {
            Weighting::InverseVariance
        } else {
            Weighting::Unweighted
        },
        ..FitOptions::default()
    };
    let result = fit::fit_surface(&dataset, window, None, &options).map_err(CliError::data)?;
    let out = args.out.clone().unwrap_or_else(|| args.input.clone());
    write_outputs(&out, &[(formats::FIT_REPORT_FILE, formats::to_json(&result)?)])?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub k: f64,
    pub omega: f64,
    pub group_velocity: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub walk: WalkStepParams,
    pub lattice_size: usize,
    pub steps: usize,
    /// Momentum at which the prediction was evaluated.
    pub k0: f64,
    pub dispersion: Vec<DispersionRow>,
    /// `|c+|^2` and `|c-|^2` of the coin state at `k0`.
    pub coin_sector_weights: [f64; 2],
    /// Sector weights of the full prepared state.
    pub state_sector_weights: [f64; 2],
    pub prediction: ZbPrediction,
    /// Absent when a sector component leaks to the lattice edge.
    pub decomposition: Option<ZbDecomposition>,
    /// Direct simulation of the mean position.
    pub trajectory: Vec<f64>,
    pub warnings: Vec<String>,
}

fn symbol_for(config: &RunConfig) -> Result<StepSymbol, CliError> {
    walk::step_symbol(config.walk).map_err(CliError::config)
}

pub fn analytics(config_path: &Path, out: Option<&Path>) -> Result<AnalyticsReport, CliError> {
    let mut loaded = RunConfig::load(config_path)?;
    if let Some(out) = out {
        loaded.output_dir = out.to_path_buf();
    }
    let report = analytics_report(&loaded.config)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_outputs(
        &loaded.output_dir,
        &[(formats::ANALYTICS_FILE, formats::to_json(&report)?)],
    )?;
    Ok(report)
}

pub fn analytics_report(config: &RunConfig) -> Result<AnalyticsReport, CliError> {
    let symbol = symbol_for(config)?;
    let geometry = config.geometry()?;
    let spectral = SpectralData::new(&symbol, geometry).map_err(CliError::config)?;
    let mut warnings = Vec::new();
    let degenerate = spectral.degenerate_momenta();
    if !degenerate.is_empty() {
        warnings.push(format!(
            "spectrum degenerate at k = {degenerate:?}; those momenta are left out of the decomposition"
        ));
    }
    let mut k0 = config.input.momentum;
    if symbol.dispersion_at(k0).map_err(CliError::config)?.degenerate {
        let shifted = k0 + geometry.momentum_spacing() / 2.0;
        warnings.push(format!(
            "spectrum degenerate at k0 = {k0}; prediction evaluated at {shifted}"
        ));
        k0 = shifted;
    }
    let (mut c_plus, mut c_minus) =
        analytics::sector_amplitudes(config.input.coin_amplitudes(), k0, &symbol)
            .map_err(CliError::data)?;
    match config.input.project {
        Some(SectorChoice::Positive) => {
            c_plus = C64::new(1.0, 0.0);
            c_minus = C64::new(0.0, 0.0);
        }
        Some(SectorChoice::Negative) => {
            c_plus = C64::new(0.0, 0.0);
            c_minus = C64::new(1.0, 0.0);
        }
        None => {}
    }
    let prediction = analytics::zb_predict(c_plus, c_minus, k0, &spectral).map_err(CliError::data)?;

    let input = config.input_state()?;
    let input = match config.input.project {
        Some(choice) => project_sector(&input, &config.walk, choice)?,
        None => input,
    };
    input
        .expect_representation(Representation::Position)
        .map_err(CliError::data)?;
    input.check_boundary().map_err(CliError::data)?;
    let momentum = input.to_momentum().map_err(CliError::data)?;
    let projectors = energy_projectors(&spectral);
    let mut state_sector_weights = [0.0; 2];
    for (w, sector) in state_sector_weights.iter_mut().zip([Sector::Positive, Sector::Negative]) {
        *w = projectors.apply(sector, &momentum).map_err(CliError::data)?.norm_sqr();
    }
    let decomposition = match analytics::zb_decompose(&input, &spectral, config.steps) {
        Ok(d) => Some(d),
        Err(e @ qwalk_core::Error::BoundaryContamination { .. }) => {
            warnings.push(format!(
                "sector components reach the lattice edge ({e}); decomposition omitted"
            ));
            None
        }
        Err(e) => return Err(CliError::data(e)),
    };
    let trajectory =
        analytics::position_trajectory(&input, &symbol, config.steps).map_err(CliError::data)?;
    let dispersion = spectral
        .points()
        .iter()
        .map(|p| DispersionRow {
            k: p.k,
            omega: p.omega,
            group_velocity: p.omega_prime,
            degenerate: p.degenerate,
        })
        .collect();
    Ok(AnalyticsReport {
        walk: config.walk,
        lattice_size: config.lattice_size,
        steps: config.steps,
        k0,
        dispersion,
        coin_sector_weights: [c_plus.norm_sqr(), c_minus.norm_sqr()],
        state_sector_weights,
        prediction,
        decomposition,
        trajectory,
        warnings,
    })
}

#[derive(Debug, Clone, Default)]
pub struct CalibrateArgs {
    pub measured: PathBuf,
    /// Initial noise model; ideal devices when absent.
    pub guess: Option<PathBuf>,
    /// Run configuration describing the input state and nominal settings.
    pub config: Option<PathBuf>,
    pub all_groups: bool,
    pub out: Option<PathBuf>,
}

/// Calibrate against measured window distributions and write the fitted
/// model and a residual report. Non-convergence is flagged, not an error.
pub fn calibrate(args: &CalibrateArgs) -> Result<CalibrationReport, CliError> {
    let config = match &args.config {
        Some(path) => RunConfig::load(path)?.config,
        None => RunConfig::default(),
    };
    let WalkStepParams::Hardware(nominal) = config.walk else {
        return Err(CliError::Config("calibration needs the hardware walk".into()));
    };
    let dataset = read_dataset(&args.measured)?;
    let windowed = dataset
        .steps
        .iter()
        .map(|d| d.restrict(noise::MODE_MIN, noise::MODE_MAX).normalized())
        .collect::<qwalk_core::Result<Vec<_>>>()
        .map_err(CliError::data)?;
    let measured = StepDataset::new(windowed, dataset.provenance).map_err(CliError::data)?;
    let guess = match &args.guess {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let model: NoiseModel = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid noise model: {e}")))?;
            model.validate().map_err(CliError::config)?;
            model
        }
        None => NoiseModel::ideal(measured.len().saturating_sub(1)),
    };
    let options = CalibrationOptions {
        groups: if args.all_groups {
            ParameterGroups::all()
        } else {
            ParameterGroups::default()
        },
        ..CalibrationOptions::default()
    };
    let input = config.input_state()?;
    let report = noise::calibrate(&measured, &guess, &nominal, &input, &options).map_err(|e| match e {
        qwalk_core::Error::InvalidParameter(_) => CliError::config(e),
        other => CliError::data(other),
    })?;
    let out = args.out.clone().unwrap_or_else(|| args.measured.clone());
    write_outputs(
        &out,
        &[
            (formats::NOISE_MODEL_FILE, formats::to_json(&report.model)?),
            (formats::CALIBRATION_REPORT_FILE, formats::to_json(&report)?),
        ],
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct SampleArgs {
    pub input: PathBuf,
    pub counts: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Draw counts from the distributions of a run directory.
pub fn sample(args: &SampleArgs) -> Result<Vec<SiteDistribution>, CliError> {
    let dataset = read_dataset(&args.input)?;
    let counts = args.counts.unwrap_or(noise::DEFAULT_COUNTS);
    if counts == 0 {
        return Err(CliError::Config("counts must be positive".into()));
    }
    let seed = args.seed.unwrap_or(0);
    let sampled = noise::sample_steps(&dataset.steps, counts, seed).map_err(CliError::data)?;
    let means = formats::mean_series(&sampled);
    let out = args.out.clone().unwrap_or_else(|| args.input.join("sampled"));
    let mut manifest = read_manifest(&args.input)?.unwrap_or_else(|| Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        core_version: qwalk_core::VERSION.into(),
        command: "sample".into(),
        config: RunConfig::default(),
        noise: None,
        sampling: None,
        provenance: dataset.provenance,
        files: Vec::new(),
    });
    manifest.command = "sample".into();
    manifest.sampling = Some(SamplingConfig { counts, seed });
    manifest.files = vec![
        formats::DISTRIBUTIONS_FILE.into(),
        formats::MEAN_POSITION_FILE.into(),
    ];
    write_outputs(
        &out,
        &[
            (
                formats::DISTRIBUTIONS_FILE,
                csv_text(|b| formats::write_distributions(b, &sampled))?,
            ),
            (
                formats::MEAN_POSITION_FILE,
                csv_text(|b| formats::write_mean_series(b, &means))?,
            ),
            (formats::MANIFEST_FILE, formats::to_json(&manifest)?),
        ],
    )?;
    Ok(sampled)
}
