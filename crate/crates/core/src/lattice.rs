//! Finite periodic lattice, coin-position states and site distributions.
//!
//! Sites are labelled `-N/2 ..= N/2 - 1` and stored at index `x + N/2`.
//! The momentum grid is `k_j = 2 pi j / N` for the same label range, and the
//! unitary transform is
//!
//! ```text
//! psi_hat(k_j) = N^{-1/2} sum_x psi(x) exp(-i k_j x)
//! ```
//!
//! With this convention the momentum-diagonal symbol `exp(ik)` translates a
//! packet from `x` to `x - 1`.

use std::f64::consts::PI;
use std::fmt;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Norm tolerance accepted for inputs that claim to be normalized.
pub const INPUT_NORM_TOLERANCE: f64 = 1e-8;

/// Edge band (in units of `N/8` sites per side) probed for wrap-around.
const EDGE_BAND_DIVISOR: usize = 8;

/// Probability allowed in the edge band before a state is considered to have
/// reached the periodic boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeGeometry {
    size: usize,
}

impl LatticeGeometry {
    pub const MIN_SIZE: usize = 16;

    pub fn new(size: usize) -> Result<Self> {
        if size < Self::MIN_SIZE || !size.is_multiple_of(2) {
            return Err(Error::InvalidLatticeSize(size));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half(&self) -> i64 {
        (self.size / 2) as i64
    }

    pub fn min_site(&self) -> i64 {
        -self.half()
    }

    pub fn max_site(&self) -> i64 {
        self.half() - 1
    }

    /// Site label stored at `index`.
    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.half()
    }

    /// Storage index of site `x`, if it lies on the lattice.
    pub fn index_of(&self, x: i64) -> Option<usize> {
        (self.min_site()..=self.max_site())
            .contains(&x)
            .then(|| (x + self.half()) as usize)
    }

    pub fn sites(&self) -> impl ExactSizeIterator<Item = i64> + '_ {
        (0..self.size).map(|i| self.site(i))
    }

    pub fn momentum_spacing(&self) -> f64 {
        2.0 * PI / self.size as f64
    }

    /// Momentum stored at `index`, in `[-pi, pi)`.
    pub fn momentum(&self, index: usize) -> f64 {
        self.momentum_spacing() * self.site(index) as f64
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.momentum(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Position,
    Momentum,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representation::Position => f.write_str("position"),
            Representation::Momentum => f.write_str("momentum"),
        }
    }
}

/// Walker wavefunction: two coin rows (`|R>`, `|L>`) over the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    geometry: LatticeGeometry,
    amplitudes: [Vec<C64>; 2],
    representation: Representation,
}

impl SpinorField {
    pub fn new(
        geometry: LatticeGeometry,
        amplitudes: [Vec<C64>; 2],
        representation: Representation,
    ) -> Result<Self> {
        for row in &amplitudes {
            if row.len() != geometry.size() {
                return Err(Error::GeometryMismatch(row.len(), geometry.size()));
            }
        }
        Ok(Self {
            geometry,
            amplitudes,
            representation,
        })
    }

    pub fn zeros(geometry: LatticeGeometry, representation: Representation) -> Self {
        let row = vec![C64::new(0.0, 0.0); geometry.size()];
        Self {
            geometry,
            amplitudes: [row.clone(), row],
            representation,
        }
    }

    /// Coin state `coin` localized on site `x`.
    pub fn delta(geometry: LatticeGeometry, coin: [C64; 2], x: i64) -> Result<Self> {
        let index = geometry
            .index_of(x)
            .ok_or_else(|| Error::InvalidParameter(format!("site {x} is off the lattice")))?;
        let mut state = Self::zeros(geometry, Representation::Position);
        state.amplitudes[0][index] = coin[0];
        state.amplitudes[1][index] = coin[1];
        Ok(state)
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn component(&self, coin: usize) -> &[C64] {
        &self.amplitudes[coin]
    }

    pub fn components(&self) -> &[Vec<C64>; 2] {
        &self.amplitudes
    }

    pub fn components_mut(&mut self) -> &mut [Vec<C64>; 2] {
        &mut self.amplitudes
    }

    pub fn into_components(self) -> [Vec<C64>; 2] {
        self.amplitudes
    }

    /// Amplitude pair stored at index `i`.
    pub fn spinor(&self, i: usize) -> crate::Spinor {
        crate::Spinor::new(self.amplitudes[0][i], self.amplitudes[1][i])
    }

    pub fn set_spinor(&mut self, i: usize, value: crate::Spinor) {
        self.amplitudes[0][i] = value[0];
        self.amplitudes[1][i] = value[1];
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes
            .iter()
            .flat_map(|row| row.iter())
            .map(|a| a.norm_sqr())
            .sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroWeight);
        }
        self.scale(C64::new(1.0 / norm, 0.0));
        Ok(self)
    }

    pub fn scale(&mut self, factor: C64) {
        for a in self.amplitudes.iter_mut().flat_map(|r| r.iter_mut()) {
            *a *= factor;
        }
    }

    /// `<self|other>`, both in the same representation.
    pub fn inner(&self, other: &SpinorField) -> Result<C64> {
        self.check_compatible(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn add(&self, other: &SpinorField) -> Result<SpinorField> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (row, other_row) in out.amplitudes.iter_mut().zip(other.amplitudes.iter()) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
        Ok(out)
    }

    /// Largest amplitude difference `max |a_i - b_i|`.
    pub fn max_deviation(&self, other: &SpinorField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    fn check_compatible(&self, other: &SpinorField) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch(
                self.geometry.size(),
                other.geometry.size(),
            ));
        }
        if self.representation != other.representation {
            return Err(Error::RepresentationMismatch {
                expected: self.representation,
                found: other.representation,
            });
        }
        Ok(())
    }

    pub fn expect_representation(&self, expected: Representation) -> Result<()> {
        if self.representation != expected {
            return Err(Error::RepresentationMismatch {
                expected,
                found: self.representation,
            });
        }
        Ok(())
    }

    /// Multiply by the plane wave `exp(i k0 x)`, moving the momentum peak to `k0`.
    pub fn boosted(mut self, k0: f64) -> Result<Self> {
        self.expect_representation(Representation::Position)?;
        let geometry = self.geometry;
        for row in self.amplitudes.iter_mut() {
            for (i, a) in row.iter_mut().enumerate() {
                *a *= C64::from_polar(1.0, k0 * geometry.site(i) as f64);
            }
        }
        Ok(self)
    }

    pub fn to_momentum(&self) -> Result<SpinorField> {
        self.expect_representation(Representation::Position)?;
        let mut out = self.clone();
        for row in out.amplitudes.iter_mut() {
            centered_dft(row, Direction::Forward);
        }
        out.representation = Representation::Momentum;
        Ok(out)
    }

    pub fn to_position(&self) -> Result<SpinorField> {
        self.expect_representation(Representation::Momentum)?;
        let mut out = self.clone();
        for row in out.amplitudes.iter_mut() {
            centered_dft(row, Direction::Inverse);
        }
        out.representation = Representation::Position;
        Ok(out)
    }

    /// Probability per site with the coin traced out.
    pub fn site_distribution(&self) -> Result<SiteDistribution> {
        self.expect_representation(Representation::Position)?;
        let probabilities = (0..self.geometry.size())
            .map(|i| self.amplitudes[0][i].norm_sqr() + self.amplitudes[1][i].norm_sqr())
            .collect();
        Ok(SiteDistribution {
            sites: self.geometry.sites().collect(),
            probabilities,
            stderr: None,
        })
    }

    /// Probability carried by the outer `N/8` sites at each end of the lattice.
    pub fn edge_weight(&self) -> Result<f64> {
        self.expect_representation(Representation::Position)?;
        let n = self.geometry.size();
        let band = (n / EDGE_BAND_DIVISOR).max(1);
        Ok((0..band)
            .chain(n - band..n)
            .map(|i| self.amplitudes[0][i].norm_sqr() + self.amplitudes[1][i].norm_sqr())
            .sum())
    }

    /// Errors when the state has reached the periodic boundary.
    pub fn check_boundary(&self) -> Result<()> {
        let weight = self.edge_weight()?;
        if weight > BOUNDARY_TOLERANCE {
            return Err(Error::BoundaryContamination { weight });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

/// Unitary DFT on the centred index range, in place.
fn centered_dft(data: &mut [C64], direction: Direction) {
    let n = data.len();
    let half = n / 2;
    let parity = |i: usize| if i.is_multiple_of(2) { 1.0 } else { -1.0 };
    for (i, a) in data.iter_mut().enumerate() {
        *a *= parity(i);
    }
    let mut planner = FftPlanner::new();
    let fft = match direction {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    fft.process(data);
    let global = parity(half) / (n as f64).sqrt();
    for (i, a) in data.iter_mut().enumerate() {
        *a *= parity(i) * global;
    }
}

/// Real amplitude profile `g(x)` proportional to a Gaussian on `[xmin, xmax]`,
/// zero elsewhere, normalized so that `sum g(x)^2 = 1`.
pub fn truncated_gaussian_profile(
    x0: i64,
    sigma: f64,
    xmin: i64,
    xmax: i64,
    geometry: LatticeGeometry,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if xmin >= xmax || geometry.index_of(xmin).is_none() || geometry.index_of(xmax).is_none() {
        return Err(Error::InvalidParameter(format!(
            "window [{xmin}, {xmax}] is empty or leaves the lattice"
        )));
    }
    let mut profile: Vec<f64> = geometry
        .sites()
        .map(|x| {
            if (xmin..=xmax).contains(&x) {
                let d = (x - x0) as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let norm = profile.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroWeight);
    }
    for g in profile.iter_mut() {
        *g /= norm;
    }
    Ok(profile)
}

/// Factorized input `coin (x) sum_x g(x)|x>` in the position representation.
pub fn make_input_state(
    coin: [C64; 2],
    profile: &[f64],
    geometry: LatticeGeometry,
) -> Result<SpinorField> {
    if profile.len() != geometry.size() {
        return Err(Error::GeometryMismatch(profile.len(), geometry.size()));
    }
    let coin_norm = coin[0].norm_sqr() + coin[1].norm_sqr();
    if (coin_norm - 1.0).abs() > INPUT_NORM_TOLERANCE {
        return Err(Error::NotNormalized {
            what: "coin",
            norm_sqr: coin_norm,
        });
    }
    let profile_norm: f64 = profile.iter().map(|g| g * g).sum();
    if (profile_norm - 1.0).abs() > INPUT_NORM_TOLERANCE {
        return Err(Error::NotNormalized {
            what: "profile",
            norm_sqr: profile_norm,
        });
    }
    let row = |c: C64| profile.iter().map(|&g| c * g).collect::<Vec<_>>();
    SpinorField::new(geometry, [row(coin[0]), row(coin[1])], Representation::Position)
}

/// Occupation probability per site, optionally with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDistribution {
    pub sites: Vec<i64>,
    pub probabilities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
}

impl SiteDistribution {
    pub fn new(sites: Vec<i64>, probabilities: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        if sites.len() != probabilities.len() {
            return Err(Error::InvalidParameter(format!(
                "{} sites but {} probabilities",
                sites.len(),
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        if let Some(err) = &stderr {
            if err.len() != sites.len() || err.iter().any(|e| !e.is_finite() || *e < 0.0) {
                return Err(Error::InvalidParameter(
                    "stderr must be nonnegative with one entry per site".into(),
                ));
            }
        }
        Ok(Self {
            sites,
            probabilities,
            stderr,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn probability_at(&self, x: i64) -> Option<f64> {
        self.sites
            .iter()
            .position(|&s| s == x)
            .map(|i| self.probabilities[i])
    }

    /// Mean site under the (possibly unnormalized) weights.
    pub fn mean(&self) -> f64 {
        let total = self.total();
        self.sites
            .iter()
            .zip(&self.probabilities)
            .map(|(&x, p)| x as f64 * p)
            .sum::<f64>()
            / total
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let total = self.total();
        self.sites
            .iter()
            .zip(&self.probabilities)
            .map(|(&x, p)| (x as f64 - mean).powi(2) * p)
            .sum::<f64>()
            / total
    }

    /// Standard error of the mean site from the per-site errors, if present.
    pub fn mean_stderr(&self) -> Option<f64> {
        let err = self.stderr.as_ref()?;
        let total = self.total();
        let mean = self.mean();
        let var: f64 = self
            .sites
            .iter()
            .zip(err)
            .map(|(&x, e)| ((x as f64 - mean) * e / total).powi(2))
            .sum();
        Some(var.sqrt())
    }

    /// Sites inside `[xmin, xmax]`, without renormalization.
    pub fn restrict(&self, xmin: i64, xmax: i64) -> SiteDistribution {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| (xmin..=xmax).contains(&self.sites[i]))
            .collect();
        SiteDistribution {
            sites: keep.iter().map(|&i| self.sites[i]).collect(),
            probabilities: keep.iter().map(|&i| self.probabilities[i]).collect(),
            stderr: self
                .stderr
                .as_ref()
                .map(|e| keep.iter().map(|&i| e[i]).collect()),
        }
    }

    pub fn normalized(&self) -> Result<SiteDistribution> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ZeroWeight);
        }
        Ok(SiteDistribution {
            sites: self.sites.clone(),
            probabilities: self.probabilities.iter().map(|p| p / total).collect(),
            stderr: self
                .stderr
                .as_ref()
                .map(|e| e.iter().map(|s| s / total).collect()),
        })
    }

    /// Total-variation distance on a common support.
    pub fn total_variation(&self, other: &SiteDistribution) -> Result<f64> {
        if self.sites != other.sites {
            return Err(Error::SupportMismatch);
        }
        Ok(0.5
            * self
                .probabilities
                .iter()
                .zip(&other.probabilities)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>())
    }
}
