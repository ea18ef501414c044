//! Effective Hamiltonian, energy sectors and the Zitterbewegung decomposition.
//!
//! For a walk `U = exp(-iH)` the Heisenberg position operator evolves as
//!
//! ```text
//! X(t) = X(0) + V t + (2iH)^{-1} (exp(2iHt) - 1) F
//! ```
//!
//! where, per momentum, `V(k) = omega'(k) (P+(k) - P-(k))` is the sector-diagonal
//! part of `H'(k)` and `F(k) = H'(k) - V(k)` its sector-off-diagonal part.
//! Splitting `psi = psi+ + psi-` gives
//!
//! ```text
//! <X(t)> = x+(t) + x-(t) + x0 + z(t)
//! ```
//!
//! All momentum integrals are sums over the lattice grid. `X(0)` is applied
//! exactly, as multiplication by the site label in the position basis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Representation, SpinorField};
use crate::walk::{self, DiracParams, Dispersion, StepSymbol, WalkStepParams};
use crate::{Mat2, Spinor, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pauli_x() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

fn pauli_z() -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// Spectral norm of a 2x2 matrix.
pub fn spectral_norm(m: &Mat2) -> f64 {
    let frob = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let det = m.determinant().norm_sqr();
    ((frob + (frob * frob - 4.0 * det).max(0.0).sqrt()) / 2.0).sqrt()
}

/// Largest entry modulus, used for matrix identity checks.
pub fn max_abs(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hamiltonian_of(d: &Dispersion) -> Mat2 {
    (d.projector_plus() - d.projector_minus()) * c(d.omega, 0.0)
}

/// `H(k)` with `U(k) = exp(-i H(k))`, eigenvalues `+-omega(k)`.
pub fn effective_hamiltonian(symbol: &StepSymbol, k: f64) -> Result<Mat2> {
    let d = symbol.dispersion_at(k)?;
    if d.degenerate {
        return Err(Error::Degenerate { k, omega: d.omega });
    }
    Ok(hamiltonian_of(&d))
}

/// Closed form `(omega / sin omega) [[n sin k, m], [m, -n sin k]]` of the
/// abstract Dirac walk.
pub fn dirac_hamiltonian(params: DiracParams, k: f64) -> Mat2 {
    let (omega, ratio) = dirac_ratio(params, k);
    let _ = omega;
    let ns = params.n * k.sin();
    Mat2::new(c(ns, 0.0), c(params.m, 0.0), c(params.m, 0.0), c(-ns, 0.0)) * c(ratio, 0.0)
}

/// `(omega, omega / sin omega)` with the removable singularity at `omega = 0`.
fn dirac_ratio(params: DiracParams, k: f64) -> (f64, f64) {
    let omega = (params.n * k.cos()).clamp(-1.0, 1.0).acos();
    let sin = omega.sin();
    let ratio = if sin.abs() < 1e-8 { 1.0 + omega * omega / 6.0 } else { omega / sin };
    (omega, ratio)
}

fn dirac_hamiltonian_derivative(params: DiracParams, k: f64) -> Mat2 {
    let DiracParams { n, m } = params;
    let (omega, ratio) = dirac_ratio(params, k);
    let sin = omega.sin();
    let omega_prime = n * k.sin() / sin;
    let ratio_prime = (sin - omega * omega.cos()) / (sin * sin);
    let body = Mat2::new(c(n * k.sin(), 0.0), c(m, 0.0), c(m, 0.0), c(-n * k.sin(), 0.0));
    body * c(ratio_prime * omega_prime, 0.0) + pauli_z() * c(ratio * n * k.cos(), 0.0)
}

/// Largest `||H(k) - (k sigma_z + m sigma_x)||` over `|k| <= kmax`.
pub fn small_k_dirac_limit_check(n: f64, m: f64, kmax: f64) -> Result<f64> {
    let params = DiracParams::new(n, m)?;
    let symbol = walk::step_symbol(WalkStepParams::Abstract(params))?;
    let samples = 401;
    let mut worst = 0.0f64;
    for i in 0..samples {
        let k = -kmax + 2.0 * kmax * i as f64 / (samples - 1) as f64;
        let h = hamiltonian_of(&symbol.dispersion_at(k)?);
        let dirac = pauli_z() * c(k, 0.0) + pauli_x() * c(m, 0.0);
        worst = worst.max(spectral_norm(&(h - dirac)));
    }
    Ok(worst)
}

/// Per-momentum spectral quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub k: f64,
    pub omega: f64,
    /// Group velocity `d omega / dk`.
    pub omega_prime: f64,
    pub plus: Spinor,
    pub minus: Spinor,
    pub hamiltonian: Mat2,
    pub hamiltonian_prime: Mat2,
    /// Velocity `omega'/omega H(k)`.
    pub velocity: Mat2,
    /// Zitterbewegung operator `F(k) = H'(k) - V(k)`.
    pub zb: Mat2,
    pub degenerate: bool,
}

impl SpectralPoint {
    pub fn projector_plus(&self) -> Mat2 {
        self.plus * self.plus.adjoint()
    }

    pub fn projector_minus(&self) -> Mat2 {
        self.minus * self.minus.adjoint()
    }

    /// `g(H)` for a scalar function `g`, i.e. `g(omega) P+ + g(-omega) P-`.
    pub fn function_of_h(&self, g: impl Fn(f64) -> C64) -> Mat2 {
        self.projector_plus() * g(self.omega) + self.projector_minus() * g(-self.omega)
    }

    /// `f(k) = <+|F|->/(i omega)`, normalized so that the small-time
    /// oscillation reads `|c+||c-||f| cos(2 omega t + phi0)`.
    pub fn zb_amplitude_factor(&self) -> Result<C64> {
        if self.degenerate {
            return Err(Error::Degenerate {
                k: self.k,
                omega: self.omega,
            });
        }
        Ok(self.plus.dotc(&(self.zb * self.minus)) / c(0.0, self.omega))
    }
}

/// How `H'(k)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeRule {
    /// Differentiated closed form (abstract Dirac walk).
    Analytic(DiracParams),
    /// Central differences of the eigen-decomposed `H(k)` with this step.
    CentralDifference(f64),
}

/// Spectral data of a walk on the momentum grid of a lattice.
#[derive(Debug, Clone)]
pub struct SpectralData {
    geometry: LatticeGeometry,
    symbol: StepSymbol,
    rule: DerivativeRule,
    points: Vec<SpectralPoint>,
}

impl SpectralData {
    /// Analytic derivatives for the abstract walk, grid-spacing central
    /// differences for hardware symbols.
    pub fn new(symbol: &StepSymbol, geometry: LatticeGeometry) -> Result<Self> {
        let rule = match symbol.params() {
            WalkStepParams::Abstract(p) => DerivativeRule::Analytic(p),
            WalkStepParams::Hardware(_) => {
                DerivativeRule::CentralDifference(geometry.momentum_spacing())
            }
        };
        Self::with_rule(symbol, geometry, rule)
    }

    pub fn with_rule(
        symbol: &StepSymbol,
        geometry: LatticeGeometry,
        rule: DerivativeRule,
    ) -> Result<Self> {
        let mut data = Self {
            geometry,
            symbol: *symbol,
            rule,
            points: Vec::with_capacity(geometry.size()),
        };
        for i in 0..geometry.size() {
            let point = data.evaluate(geometry.momentum(i))?;
            data.points.push(point);
        }
        Ok(data)
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn symbol(&self) -> &StepSymbol {
        &self.symbol
    }

    pub fn rule(&self) -> DerivativeRule {
        self.rule
    }

    pub fn points(&self) -> &[SpectralPoint] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &SpectralPoint {
        &self.points[index]
    }

    pub fn degenerate_momenta(&self) -> Vec<f64> {
        self.points.iter().filter(|p| p.degenerate).map(|p| p.k).collect()
    }

    /// Spectral quantities at an arbitrary momentum, same derivative rule.
    pub fn evaluate(&self, k: f64) -> Result<SpectralPoint> {
        let d = self.symbol.dispersion_at(k)?;
        let hamiltonian = hamiltonian_of(&d);
        let hamiltonian_prime = match self.rule {
            DerivativeRule::Analytic(p) if !d.degenerate => dirac_hamiltonian_derivative(p, k),
            DerivativeRule::Analytic(_) => Mat2::zeros(),
            DerivativeRule::CentralDifference(h) => {
                let up = hamiltonian_of(&self.symbol.dispersion_at(k + h)?);
                let down = hamiltonian_of(&self.symbol.dispersion_at(k - h)?);
                (up - down) / c(2.0 * h, 0.0)
            }
        };
        if d.degenerate {
            return Ok(SpectralPoint {
                k,
                omega: d.omega,
                omega_prime: 0.0,
                plus: d.plus,
                minus: d.minus,
                hamiltonian,
                hamiltonian_prime,
                velocity: Mat2::zeros(),
                zb: Mat2::zeros(),
                degenerate: true,
            });
        }
        let omega_prime = d.plus.dotc(&(hamiltonian_prime * d.plus)).re;
        let velocity = (d.projector_plus() - d.projector_minus()) * c(omega_prime, 0.0);
        Ok(SpectralPoint {
            k,
            omega: d.omega,
            omega_prime,
            plus: d.plus,
            minus: d.minus,
            hamiltonian,
            hamiltonian_prime,
            velocity,
            zb: hamiltonian_prime - velocity,
            degenerate: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Positive,
    Negative,
}

/// Momentum-diagonal projectors onto the positive and negative energy sectors.
#[derive(Debug, Clone)]
pub struct SectorProjectors {
    pub plus: Vec<Mat2>,
    pub minus: Vec<Mat2>,
    /// Grid momenta where the spectrum is degenerate; the projectors there come
    /// from an arbitrary orthonormal basis.
    pub degenerate: Vec<f64>,
}

pub fn energy_projectors(spectral: &SpectralData) -> SectorProjectors {
    SectorProjectors {
        plus: spectral.points.iter().map(|p| p.projector_plus()).collect(),
        minus: spectral.points.iter().map(|p| p.projector_minus()).collect(),
        degenerate: spectral.degenerate_momenta(),
    }
}

impl SectorProjectors {
    /// Apply `P+` or `P-` to a momentum-representation state.
    pub fn apply(&self, sector: Sector, state: &SpinorField) -> Result<SpinorField> {
        state.expect_representation(Representation::Momentum)?;
        let ops = match sector {
            Sector::Positive => &self.plus,
            Sector::Negative => &self.minus,
        };
        if ops.len() != state.geometry().size() {
            return Err(Error::GeometryMismatch(ops.len(), state.geometry().size()));
        }
        let mut out = state.clone();
        for (i, p) in ops.iter().enumerate() {
            out.set_spinor(i, p * state.spinor(i));
        }
        Ok(out)
    }
}

/// `F(k)` at an arbitrary momentum.
pub fn zb_operator(spectral: &SpectralData, k: f64) -> Result<Mat2> {
    let point = spectral.evaluate(k)?;
    if point.degenerate {
        return Err(Error::Degenerate {
            k,
            omega: point.omega,
        });
    }
    Ok(point.zb)
}

/// `sum_x x p(x)` for a position state clear of the periodic boundary.
pub fn mean_position(state: &SpinorField) -> Result<f64> {
    state.check_boundary()?;
    let dist = state.site_distribution()?;
    Ok(dist
        .sites
        .iter()
        .zip(&dist.probabilities)
        .map(|(&x, p)| x as f64 * p)
        .sum())
}

/// `<X(t)>` for `t = 0..=steps` by direct evolution in momentum space.
pub fn position_trajectory(
    initial: &SpinorField,
    symbol: &StepSymbol,
    steps: usize,
) -> Result<Vec<f64>> {
    initial.expect_representation(Representation::Position)?;
    let mut series = Vec::with_capacity(steps + 1);
    series.push(mean_position(initial)?);
    let mut state = initial.to_momentum()?;
    for _ in 0..steps {
        state = walk::apply_step_momentum(&state, symbol)?;
        series.push(mean_position(&state.to_position()?)?);
    }
    Ok(series)
}

/// Time series of the four contributions to `<X(t)>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZbDecomposition {
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    pub x0: f64,
    pub z: Vec<f64>,
    pub total: Vec<f64>,
    /// `||P+ psi||^2` and `||P- psi||^2`.
    pub sector_weights: [f64; 2],
    /// Weight on degenerate momenta, excluded from every sum.
    pub dropped_weight: f64,
}

fn position_moment(a: &SpinorField, b: &SpinorField) -> C64 {
    let geometry = a.geometry();
    (0..geometry.size())
        .map(|i| a.spinor(i).dotc(&b.spinor(i)) * geometry.site(i) as f64)
        .sum()
}

fn momentum_sum(
    spectral: &SpectralData,
    bra: &SpinorField,
    ket: &SpinorField,
    op: impl Fn(&SpectralPoint) -> Mat2,
) -> C64 {
    spectral
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.degenerate)
        .map(|(i, p)| bra.spinor(i).dotc(&(op(p) * ket.spinor(i))))
        .sum()
}

pub fn zb_decompose(
    initial: &SpinorField,
    spectral: &SpectralData,
    steps: usize,
) -> Result<ZbDecomposition> {
    initial.expect_representation(Representation::Position)?;
    if initial.geometry() != spectral.geometry {
        return Err(Error::GeometryMismatch(
            initial.geometry().size(),
            spectral.geometry.size(),
        ));
    }
    initial.check_boundary()?;
    let psi = initial.to_momentum()?;
    let mut plus = SpinorField::zeros(psi.geometry(), Representation::Momentum);
    let mut minus = plus.clone();
    let mut dropped_weight = 0.0;
    for (i, p) in spectral.points.iter().enumerate() {
        let v = psi.spinor(i);
        if p.degenerate {
            dropped_weight += v.norm_squared();
            continue;
        }
        plus.set_spinor(i, p.plus * p.plus.dotc(&v));
        minus.set_spinor(i, p.minus * p.minus.dotc(&v));
    }
    let plus_x = plus.to_position()?;
    let minus_x = minus.to_position()?;
    plus_x.check_boundary()?;
    minus_x.check_boundary()?;

    let inverse_2ih = |p: &SpectralPoint| p.function_of_h(|w| c(0.0, 2.0 * w).inv()) * p.zb;
    let x_plus0 = position_moment(&plus_x, &plus_x).re;
    let x_minus0 = position_moment(&minus_x, &minus_x).re;
    let v_plus = momentum_sum(spectral, &plus, &plus, |p| p.velocity).re;
    let v_minus = momentum_sum(spectral, &minus, &minus, |p| p.velocity).re;
    let x0 = 2.0
        * (position_moment(&plus_x, &minus_x) - momentum_sum(spectral, &plus, &minus, inverse_2ih))
            .re;

    let mut decomposition = ZbDecomposition {
        x_plus: Vec::with_capacity(steps + 1),
        x_minus: Vec::with_capacity(steps + 1),
        x0,
        z: Vec::with_capacity(steps + 1),
        total: Vec::with_capacity(steps + 1),
        sector_weights: [plus.norm_sqr(), minus.norm_sqr()],
        dropped_weight,
    };
    for t in 0..=steps {
        let t = t as f64;
        let z = 2.0
            * momentum_sum(spectral, &plus, &minus, |p| {
                p.function_of_h(|w| C64::from_polar(1.0, 2.0 * w * t) / c(0.0, 2.0 * w)) * p.zb
            })
            .re;
        let xp = x_plus0 + v_plus * t;
        let xm = x_minus0 + v_minus * t;
        decomposition.x_plus.push(xp);
        decomposition.x_minus.push(xm);
        decomposition.z.push(z);
        decomposition.total.push(xp + xm + x0 + z);
    }
    Ok(decomposition)
}

/// Small-time Zitterbewegung prediction for a packet peaked at `k0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZbPrediction {
    pub k0: f64,
    /// `|c+||c-||f(k0)|`, in sites.
    pub amplitude: f64,
    /// `2 omega(k0)`, radians per step.
    pub angular_frequency: f64,
    /// Eigenvector-gauge dependent phase `phi0`.
    pub phase: f64,
    pub f_magnitude: f64,
}

impl ZbPrediction {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.angular_frequency
    }

    /// `A cos(2 omega t + phi0)`.
    pub fn oscillation(&self, t: f64) -> f64 {
        self.amplitude * (self.angular_frequency * t + self.phase).cos()
    }
}

pub fn zb_predict(
    c_plus: C64,
    c_minus: C64,
    k0: f64,
    spectral: &SpectralData,
) -> Result<ZbPrediction> {
    let point = spectral.evaluate(k0)?;
    let f = point.zb_amplitude_factor()?;
    let prefactor = c_plus.conj() * c_minus * f;
    Ok(ZbPrediction {
        k0,
        amplitude: prefactor.norm(),
        angular_frequency: 2.0 * point.omega,
        phase: prefactor.arg(),
        f_magnitude: f.norm(),
    })
}

/// Sector amplitudes `c+- = <+-_{k0}|coin>` of a coin state.
pub fn sector_amplitudes(coin: [C64; 2], k0: f64, symbol: &StepSymbol) -> Result<(C64, C64)> {
    let d = symbol.dispersion_at(k0)?;
    if d.degenerate {
        return Err(Error::Degenerate { k: k0, omega: d.omega });
    }
    let v = Spinor::new(coin[0], coin[1]);
    Ok((d.plus.dotc(&v), d.minus.dotc(&v)))
}
