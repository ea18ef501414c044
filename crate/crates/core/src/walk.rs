//! Step unitaries of the coin-walker quantum walk.
//!
//! A step symbol is a trigonometric polynomial in `k` of degree one,
//!
//! ```text
//! U(k) = A_0 + A_+ exp(ik) + A_- exp(-ik)
//! ```
//!
//! which is evaluated pointwise by the momentum backend and applied as a
//! three-tap stencil by the position backend (`exp(ik)` reads from `x + 1`,
//! `exp(-ik)` from `x - 1`).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Representation, SpinorField};
use crate::{Mat2, Spinor, C64};

/// Accepted distance from 1 of `n^2 + m^2` for the abstract walk.
pub const DIRAC_NORM_TOLERANCE: f64 = 1e-12;
/// Accepted `|det U - 1|` before a symbol counts as special unitary.
pub const DET_TOLERANCE: f64 = 1e-10;
/// Accepted excursion of `Re tr U / 2` outside `[-1, 1]` before clamping fails.
pub const TRACE_CLAMP_TOLERANCE: f64 = 1e-12;
/// `sin(omega)` below this marks a degenerate momentum.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Waveplate and q-plate settings of one physical step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareParams {
    /// q-plate tuning `delta` in `[0, pi]`; `pi` is fully on.
    pub qplate_tuning: f64,
    /// q-plate axis offset `alpha_0`.
    pub qplate_axis: f64,
    /// Quarter-waveplate fast-axis angle `alpha`.
    pub qwp_angle: f64,
    /// Half-waveplate fast-axis angle `beta`.
    pub hwp_angle: f64,
    /// Topological charge; recorded only, the lattice shift is always one site.
    #[serde(default = "default_charge")]
    pub charge: f64,
}

fn default_charge() -> f64 {
    0.5
}

impl HardwareParams {
    /// Settings realising the Dirac step `(1/sqrt 2)[[e^{ik}, e^{ik}], [-e^{-ik}, e^{-ik}]]`.
    pub fn dirac_setup() -> Self {
        Self {
            qplate_tuning: PI,
            qplate_axis: PI / 4.0,
            qwp_angle: -PI / 4.0,
            hwp_angle: PI / 4.0,
            charge: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_tuning(self.qplate_tuning)?;
        for (name, v) in [
            ("qplate_axis", self.qplate_axis),
            ("qwp_angle", self.qwp_angle),
            ("hwp_angle", self.hwp_angle),
            ("charge", self.charge),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        Ok(())
    }
}

/// The abstract Dirac walk `[[n e^{-ik}, -im], [-im, n e^{ik}]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracParams {
    pub n: f64,
    pub m: f64,
}

impl DiracParams {
    pub fn new(n: f64, m: f64) -> Result<Self> {
        let p = Self { n, m };
        p.validate()?;
        Ok(p)
    }

    /// Mass parameter `m`, with `n = sqrt(1 - m^2)`.
    pub fn with_mass(m: f64) -> Result<Self> {
        Self::new((1.0 - m * m).max(0.0).sqrt(), m)
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.n * self.n + self.m * self.m;
        if !norm.is_finite() || (norm - 1.0).abs() >= DIRAC_NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "n^2 + m^2 = {norm}, expected 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WalkStepParams {
    Hardware(HardwareParams),
    Abstract(DiracParams),
}

impl WalkStepParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            WalkStepParams::Hardware(p) => p.validate(),
            WalkStepParams::Abstract(p) => p.validate(),
        }
    }
}

fn check_tuning(delta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "q-plate tuning {delta} outside [0, pi]"
        )));
    }
    Ok(())
}

/// Quarter-waveplate followed by half-waveplate, in the `{|R>, |L>}` basis.
pub fn coin_matrix(alpha: f64, beta: f64) -> Mat2 {
    let s = FRAC_1_SQRT_2;
    Mat2::new(
        cis(2.0 * (alpha - beta)) * s,
        c(0.0, 1.0) * cis(2.0 * alpha) * s,
        c(0.0, 1.0) * cis(-2.0 * alpha) * s,
        cis(-2.0 * (alpha - beta)) * s,
    )
}

/// q-plate in the momentum representation.
pub fn qplate_symbol(delta: f64, alpha0: f64, k: f64) -> Result<Mat2> {
    check_tuning(delta)?;
    Ok(qplate_taps(delta, alpha0).evaluate(k))
}

/// Fourier components `(A_0, A_+, A_-)` of a degree-one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolTaps {
    pub stay: Mat2,
    /// Coefficient of `exp(ik)`.
    pub plus: Mat2,
    /// Coefficient of `exp(-ik)`.
    pub minus: Mat2,
}

impl SymbolTaps {
    pub fn evaluate(&self, k: f64) -> Mat2 {
        self.stay + self.plus * cis(k) + self.minus * cis(-k)
    }

    pub fn derivative(&self, k: f64) -> Mat2 {
        (self.plus * cis(k) - self.minus * cis(-k)) * c(0.0, 1.0)
    }

    fn then_after(&self, coin: &Mat2) -> SymbolTaps {
        SymbolTaps {
            stay: self.stay * coin,
            plus: self.plus * coin,
            minus: self.minus * coin,
        }
    }
}

fn qplate_taps(delta: f64, alpha0: f64) -> SymbolTaps {
    let (sin, cos) = (delta / 2.0).sin_cos();
    let zero = c(0.0, 0.0);
    SymbolTaps {
        stay: Mat2::new(c(cos, 0.0), zero, zero, c(cos, 0.0)),
        plus: Mat2::new(zero, c(0.0, sin) * cis(2.0 * alpha0), zero, zero),
        minus: Mat2::new(zero, zero, c(0.0, sin) * cis(-2.0 * alpha0), zero),
    }
}

/// The map `k -> U(k)` of one homogeneous walk step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSymbol {
    params: WalkStepParams,
    taps: SymbolTaps,
}

/// Build the symbol `U(k) = Q(k) C` (hardware) or the abstract Dirac symbol.
pub fn step_symbol(params: WalkStepParams) -> Result<StepSymbol> {
    params.validate()?;
    Ok(StepSymbol::from_params_unchecked(params))
}

impl StepSymbol {
    /// Builds the symbol without range checks; used by optimizers that probe
    /// slightly outside the physical box for finite differences.
    pub fn from_params_unchecked(params: WalkStepParams) -> Self {
        let taps = match params {
            WalkStepParams::Hardware(p) => qplate_taps(p.qplate_tuning, p.qplate_axis)
                .then_after(&coin_matrix(p.qwp_angle, p.hwp_angle)),
            WalkStepParams::Abstract(DiracParams { n, m }) => {
                let zero = c(0.0, 0.0);
                let mass = c(0.0, -m);
                SymbolTaps {
                    stay: Mat2::new(zero, mass, mass, zero),
                    plus: Mat2::new(zero, zero, zero, c(n, 0.0)),
                    minus: Mat2::new(c(n, 0.0), zero, zero, zero),
                }
            }
        };
        Self { params, taps }
    }

    pub fn params(&self) -> WalkStepParams {
        self.params
    }

    pub fn taps(&self) -> &SymbolTaps {
        &self.taps
    }

    pub fn at(&self, k: f64) -> Mat2 {
        self.taps.evaluate(k)
    }

    /// `U(k)` divided by a square root of its determinant, so it lies in SU(2).
    pub fn special_at(&self, k: f64) -> Mat2 {
        let u = self.at(k);
        let det = u.determinant();
        if (det - c(1.0, 0.0)).norm() <= DET_TOLERANCE {
            return u;
        }
        u * cis(-det.arg() / 2.0)
    }

    /// Dispersion at `k` after factoring out the global phase of `U(k)`.
    pub fn dispersion_at(&self, k: f64) -> Result<Dispersion> {
        dispersion_of(&self.special_at(k), k)
    }
}

/// Eigen-decomposition `U(k)|+-> = exp(-+ i omega)|+->`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub omega: f64,
    pub plus: Spinor,
    pub minus: Spinor,
    pub degenerate: bool,
}

impl Dispersion {
    pub fn projector_plus(&self) -> Mat2 {
        self.plus * self.plus.adjoint()
    }

    pub fn projector_minus(&self) -> Mat2 {
        self.minus * self.minus.adjoint()
    }
}

/// Dispersion of `symbol` at `k`; the symbol must be special unitary there.
pub fn dispersion(symbol: &StepSymbol, k: f64) -> Result<Dispersion> {
    dispersion_of(&symbol.at(k), k)
}

fn dispersion_of(u: &Mat2, k: f64) -> Result<Dispersion> {
    let det = u.determinant();
    if (det - c(1.0, 0.0)).norm() > DET_TOLERANCE {
        return Err(Error::NotSpecialUnitary {
            k,
            det_re: det.re,
            det_im: det.im,
        });
    }
    let half_trace = u.trace().re / 2.0;
    if half_trace.abs() > 1.0 + TRACE_CLAMP_TOLERANCE {
        return Err(Error::NotSpecialUnitary {
            k,
            det_re: det.re,
            det_im: det.im,
        });
    }
    let cos_omega = half_trace.clamp(-1.0, 1.0);
    let omega = cos_omega.acos();
    let sin_omega = omega.sin();
    if sin_omega < DEGENERACY_TOLERANCE {
        return Ok(Dispersion {
            omega,
            plus: Spinor::new(c(1.0, 0.0), c(0.0, 0.0)),
            minus: Spinor::new(c(0.0, 0.0), c(1.0, 0.0)),
            degenerate: true,
        });
    }
    // U = cos(w) I - i sin(w) (n . sigma); the +1 eigenvector of n . sigma
    // carries the eigenvalue exp(-i w).
    let identity = Mat2::identity();
    let generator = (u - identity * c(cos_omega, 0.0)) * c(0.0, 1.0 / sin_omega);
    let generator = (generator + generator.adjoint()) * c(0.5, 0.0);
    let plus = gauge_fixed(&((identity + generator) * c(0.5, 0.0)));
    let minus = gauge_fixed(&((identity - generator) * c(0.5, 0.0)));
    Ok(Dispersion {
        omega,
        plus,
        minus,
        degenerate: false,
    })
}

/// Normalized dominant column of a rank-one projector, first component real
/// and nonnegative (second component real positive if the first vanishes).
fn gauge_fixed(projector: &Mat2) -> Spinor {
    let col0 = projector.column(0).into_owned();
    let col1 = projector.column(1).into_owned();
    let v = if col0.norm() >= col1.norm() { col0 } else { col1 };
    let v = v / c(v.norm(), 0.0);
    let anchor = if v[0].norm() > 1e-14 { v[0] } else { v[1] };
    v * cis(-anchor.arg())
}

/// One step in the momentum representation: `psi(k) -> U(k) psi(k)`.
pub fn apply_step_momentum(state: &SpinorField, symbol: &StepSymbol) -> Result<SpinorField> {
    state.expect_representation(Representation::Momentum)?;
    let geometry = state.geometry();
    let mut out = state.clone();
    for i in 0..geometry.size() {
        let u = symbol.at(geometry.momentum(i));
        out.set_spinor(i, u * state.spinor(i));
    }
    Ok(out)
}

/// One step in the position representation: coin mixing then the
/// coin-conditioned nearest-neighbour shift, periodic boundary.
pub fn apply_step_position(state: &SpinorField, params: &WalkStepParams) -> Result<SpinorField> {
    params.validate()?;
    apply_taps_position(state, StepSymbol::from_params_unchecked(*params).taps())
}

pub(crate) fn apply_taps_position(state: &SpinorField, taps: &SymbolTaps) -> Result<SpinorField> {
    state.expect_representation(Representation::Position)?;
    let n = state.geometry().size();
    let mut out = state.clone();
    for i in 0..n {
        let right = (i + 1) % n;
        let left = (i + n - 1) % n;
        let value =
            taps.stay * state.spinor(i) + taps.plus * state.spinor(right) + taps.minus * state.spinor(left);
        out.set_spinor(i, value);
    }
    Ok(out)
}
