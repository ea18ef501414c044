//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Matrix2;
use qwalk_cli::commands::{self, FitArgs, SimulateOptions};
use qwalk_core::analytics::{self, energy_projectors, max_abs, Sector, SpectralData};
use qwalk_core::fit::{self, oscillating_gaussian, FitOptions, FitWindow};
use qwalk_core::lattice::{make_input_state, truncated_gaussian_profile};
use qwalk_core::noise::{self, CalibrationOptions};
use qwalk_core::walk;
use qwalk_core::{
    DiracParams, HardwareParams, LatticeGeometry, NoiseModel, OscillationParams, Provenance,
    Representation, SiteDistribution, SpinorField, StepDataset, WalkStepParams, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../cli/configs"))
}

fn abstract_walk() -> WalkStepParams {
    WalkStepParams::Abstract(DiracParams {
        n: FRAC_1_SQRT_2,
        m: FRAC_1_SQRT_2,
    })
}

fn hardware_walk() -> WalkStepParams {
    WalkStepParams::Hardware(HardwareParams::dirac_setup())
}

fn packet(size: usize, sigma: f64, window: Option<(i64, i64)>, coin: [C64; 2]) -> SpinorField {
    let geometry = LatticeGeometry::new(size).unwrap();
    let (lo, hi) = window.unwrap_or((geometry.min_site(), geometry.max_site()));
    let profile = truncated_gaussian_profile(0, sigma, lo, hi, geometry).unwrap();
    make_input_state(coin, &profile, geometry).unwrap()
}

fn reference_input(size: usize) -> SpinorField {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    packet(size, 3.0, Some((-5, 5)), [s, s])
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ideal_fit() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("run");
    let opts = SimulateOptions {
        out: Some(out.clone()),
        ..Default::default()
    };
    commands::simulate(&configs().join("reference_setup.json"), &opts).map_err(|e| e.to_string())?;
    let result = commands::fit(&FitArgs {
        input: out,
        window: Some((-5, 5)),
        steps: Some((0, 8)),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let (w, a) = (result.params.omega, result.params.amplitude);
    check(
        (1.664..=1.764).contains(&w) && (0.645..=0.745).contains(&a),
        format!("omega = {w:.4}, A = {a:.4}"),
    )
}

fn infinite_lattice_limit() -> Outcome {
    let input = packet(1024, 10.0, None, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let symbol = walk::step_symbol(abstract_walk()).map_err(|e| e.to_string())?;
    let series = analytics::position_trajectory(&input, &symbol, 16).map_err(|e| e.to_string())?;
    let osc = fit::fit_trended_oscillation(&series).map_err(|e| e.to_string())?;
    let dw = (osc.omega - PI / 2.0).abs() / (PI / 2.0);
    let da = (osc.amplitude - 0.5).abs() / 0.5;
    check(
        dw <= 0.01 && da <= 0.05,
        format!(
            "Omega = {:.5} ({:.3}% off), amplitude = {:.5} ({:.3}% off)",
            osc.omega,
            100.0 * dw,
            osc.amplitude,
            100.0 * da
        ),
    )
}

fn random_walk_params(rng: &mut ChaCha8Rng) -> WalkStepParams {
    if rng.random::<bool>() {
        WalkStepParams::Hardware(HardwareParams {
            qplate_tuning: rng.random_range(0.0..PI),
            qplate_axis: rng.random_range(-PI..PI),
            qwp_angle: rng.random_range(-PI..PI),
            hwp_angle: rng.random_range(-PI..PI),
            charge: 0.5,
        })
    } else {
        let theta: f64 = rng.random_range(0.0..PI / 2.0);
        WalkStepParams::Abstract(DiracParams {
            n: theta.cos(),
            m: theta.sin(),
        })
    }
}

fn backend_equivalence() -> Outcome {
    let geometry = LatticeGeometry::new(64).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_walk_params(&mut rng);
        let mut row = || -> Vec<C64> {
            (0..64)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        };
        let components = [row(), row()];
        let state = SpinorField::new(geometry, components, Representation::Position)
            .and_then(|s| s.normalized())
            .map_err(|e| e.to_string())?;
        let symbol = walk::step_symbol(params).map_err(|e| e.to_string())?;
        let mut position = state.clone();
        let mut momentum = state.to_momentum().map_err(|e| e.to_string())?;
        for _ in 0..8 {
            position = walk::apply_step_position(&position, &params).map_err(|e| e.to_string())?;
            momentum = walk::apply_step_momentum(&momentum, &symbol).map_err(|e| e.to_string())?;
        }
        let back = momentum.to_position().map_err(|e| e.to_string())?;
        worst = worst.max(position.max_deviation(&back).map_err(|e| e.to_string())?);
    }
    check(worst <= 1e-10, format!("max deviation {worst:.2e} over 100 seeds"))
}

fn oracle_exp(h: &qwalk_core::Mat2) -> qwalk_core::Mat2 {
    let m: Matrix2<C64> = h * C64::new(0.0, -1.0);
    m.exp()
}

fn spectral_identities() -> Outcome {
    let geometry = LatticeGeometry::new(64).unwrap();
    let identity = qwalk_core::Mat2::identity();
    let (mut exp_err, mut algebra_err, mut pfp_err) = (0.0f64, 0.0f64, 0.0f64);
    for params in [abstract_walk(), hardware_walk()] {
        let symbol = walk::step_symbol(params).map_err(|e| e.to_string())?;
        let spectral = SpectralData::new(&symbol, geometry).map_err(|e| e.to_string())?;
        for p in spectral.points().iter().filter(|p| !p.degenerate) {
            exp_err = exp_err.max(max_abs(&(oracle_exp(&p.hamiltonian) - symbol.at(p.k))));
            let (pp, pm) = (p.projector_plus(), p.projector_minus());
            for e in [
                pp * pp - pp,
                pm * pm - pm,
                pp * pm,
                pm * pp,
                pp + pm - identity,
            ] {
                algebra_err = algebra_err.max(max_abs(&e));
            }
            pfp_err = pfp_err.max(max_abs(&(pp * p.zb * pp))).max(max_abs(&(pm * p.zb * pm)));
        }
    }
    let symbol = walk::step_symbol(abstract_walk()).map_err(|e| e.to_string())?;
    let spectral = SpectralData::new(&symbol, geometry).map_err(|e| e.to_string())?;
    let f0 = spectral
        .evaluate(0.0)
        .and_then(|p| p.zb_amplitude_factor())
        .map_err(|e| e.to_string())?
        .norm();
    check(
        exp_err <= 1e-10 && algebra_err <= 1e-12 && pfp_err <= 1e-9 && (f0 - 1.0).abs() <= 1e-6,
        format!(
            "exp {exp_err:.1e}, projectors {algebra_err:.1e}, PFP {pfp_err:.1e}, |f(0)| = {f0:.9}"
        ),
    )
}

fn decomposition_deviation(size: usize) -> Result<f64, String> {
    let input = reference_input(size);
    let symbol = walk::step_symbol(hardware_walk()).map_err(|e| e.to_string())?;
    let spectral = SpectralData::new(&symbol, input.geometry()).map_err(|e| e.to_string())?;
    let dec = analytics::zb_decompose(&input, &spectral, 8).map_err(|e| e.to_string())?;
    let direct = analytics::position_trajectory(&input, &symbol, 8).map_err(|e| e.to_string())?;
    Ok(dec
        .total
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn decomposition_consistency() -> Outcome {
    let coarse = decomposition_deviation(128)?;
    let fine = decomposition_deviation(256)?;
    check(
        coarse <= 2e-2 && fine < coarse,
        format!("max deviation {coarse:.2e} at N=128, {fine:.2e} at N=256"),
    )
}

fn single_sector_motion() -> Outcome {
    let k0 = PI / 4.0;
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let input = packet(1024, 30.0, None, [s, s]).boosted(k0).map_err(|e| e.to_string())?;
    let symbol = walk::step_symbol(hardware_walk()).map_err(|e| e.to_string())?;
    let spectral = SpectralData::new(&symbol, input.geometry()).map_err(|e| e.to_string())?;
    let projected = energy_projectors(&spectral)
        .apply(Sector::Positive, &input.to_momentum().map_err(|e| e.to_string())?)
        .and_then(|s| s.normalized())
        .and_then(|s| s.to_position())
        .map_err(|e| e.to_string())?;
    let steps = 8;
    let dec = analytics::zb_decompose(&projected, &spectral, steps).map_err(|e| e.to_string())?;
    let z_max = dec.z.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    let x = analytics::position_trajectory(&projected, &symbol, steps).map_err(|e| e.to_string())?;
    let curvature = x
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0, f64::max);
    let slope = (x[steps] - x[0]) / steps as f64;
    let h = 1e-5;
    let omega = |k: f64| symbol.dispersion_at(k).map(|d| d.omega);
    let group_velocity =
        (omega(k0 + h).map_err(|e| e.to_string())? - omega(k0 - h).map_err(|e| e.to_string())?) / (2.0 * h);
    check(
        z_max < 1e-3 && curvature < 1e-3 && (slope - group_velocity).abs() <= 1e-3,
        format!(
            "|z| <= {z_max:.1e}, max second difference {curvature:.1e}, slope {slope:.6} vs omega' {group_velocity:.6}"
        ),
    )
}

fn planted_model(seed: u64) -> NoiseModel {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let mut model = NoiseModel::ideal(8);
    for delta in model.qplate_tuning.iter_mut() {
        *delta = PI - rng.random_range(0.0..0.1);
    }
    for eta in model.detection_efficiency.iter_mut() {
        if rng.random_bool(0.4) {
            *eta = 0.9;
        }
    }
    model.counts_per_step = 100_000;
    model
}

fn noise_round_trip() -> Outcome {
    let input = reference_input(32);
    let nominal = HardwareParams::dirac_setup();
    let mut passed = 0;
    let mut errors = Vec::new();
    for seed in 0..10u64 {
        let planted = planted_model(seed);
        let data = noise::synthesize(&input, &nominal, &planted, 8, seed).map_err(|e| e.to_string())?;
        let mut guess = NoiseModel::ideal(8);
        guess.counts_per_step = planted.counts_per_step;
        let report = noise::calibrate(&data, &guess, &nominal, &input, &CalibrationOptions::default())
            .map_err(|e| e.to_string())?;
        let worst = report
            .model
            .qplate_tuning
            .iter()
            .zip(&planted.qplate_tuning)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let min_fidelity = report.fidelities.iter().cloned().fold(1.0, f64::min);
        if worst <= 0.05 && min_fidelity >= 0.99 {
            passed += 1;
        }
        errors.push(format!("{worst:.3}"));
    }
    check(
        passed >= 9,
        format!(
            "{passed}/10 seeds within 0.05 rad (max delta error per seed: {})",
            errors.join(", ")
        ),
    )
}

fn noise_moves_observables() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("run");
    let opts = SimulateOptions {
        out: Some(out.clone()),
        ..Default::default()
    };
    commands::simulate(&configs().join("waveplate_offsets.json"), &opts).map_err(|e| e.to_string())?;
    let result = commands::fit(&FitArgs {
        input: out,
        window: Some((-5, 5)),
        steps: Some((0, 8)),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let (w, a) = (result.params.omega, result.params.amplitude);
    check(
        w > 1.655 && w < 1.714 && a > 0.615 && a < 0.695,
        format!("omega = {w:.4}, A = {a:.4} with configs/noise/waveplate_offsets.json"),
    )
}

fn surface_data(p: &OscillationParams, steps: usize) -> StepDataset {
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

fn fit_self_consistency() -> Outcome {
    let mut cases = vec![OscillationParams {
        mu0: 0.0,
        amplitude: 0.5,
        omega: PI / 2.0,
        phase: 0.0,
        sigma: 3.0,
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..4 {
        cases.push(OscillationParams {
            mu0: rng.random_range(-1.0..1.0),
            amplitude: rng.random_range(0.2..1.0),
            omega: rng.random_range(0.8..2.5),
            phase: rng.random_range(-3.0..3.0),
            sigma: rng.random_range(1.5..3.5),
        });
    }
    let mut worst = 0.0f64;
    for p in &cases {
        let data = surface_data(p, 8);
        let window = FitWindow {
            sites: (-5, 5),
            steps: (0, 8),
        };
        let result = fit::fit_surface(&data, window, None, &FitOptions::default()).map_err(|e| e.to_string())?;
        let got = result.params.canonical().to_array();
        let want = p.canonical().to_array();
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    check(worst <= 1e-6, format!("max parameter error {worst:.1e} over {} surfaces", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome, u64); 9] = [
        (1, "ideal-evolution fit", ideal_fit, 10),
        (2, "infinite-lattice limit", infinite_lattice_limit, 30),
        (3, "backend equivalence", backend_equivalence, 30),
        (4, "spectral identities", spectral_identities, 5),
        (5, "decomposition consistency", decomposition_consistency, 10),
        (6, "single-sector ballistic motion", single_sector_motion, 10),
        (7, "noise-model round trip", noise_round_trip, 120),
        (8, "noise moves the fitted observables", noise_moves_observables, 60),
        (9, "fit self-consistency", fit_self_consistency, 5),
    ];
    let mut failures = 0;
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; runtime over the {limit} s limit")),
            Err(d) => (false, d),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} criterion {id} ({name}): {detail} [{:.2} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
