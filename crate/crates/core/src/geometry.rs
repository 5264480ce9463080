//! Channel walls and the built-in case matrices.
//!
//! The channel spans `x ∈ [-1.5, 1.5]` between a lower wall near `y = 0` and
//! an upper wall near `y = 0.8`. Each wall carries one bump whose family and
//! parameters are described by a [`WallProfile`].

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const X_MIN: f64 = -1.5;
pub const X_MAX: f64 = 1.5;
pub const CHANNEL_HEIGHT: f64 = 0.8;

/// Default bump amplitude for the Gaussian families.
pub const GAUSSIAN_AMPLITUDE: f64 = 0.0625;
/// Exponent coefficient of the fixed Gaussian bump.
pub const GAUSSIAN_DECAY: f64 = 25.0;
pub const WEDGE_HEIGHT: f64 = 0.1;
pub const BASE_MACH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpFamily {
    GaussianTranslated,
    GaussianVariance,
    TriangularWedge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallSide {
    Lower,
    Upper,
}

/// One wall of the channel: a flat line carrying a single bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallProfile {
    pub family: BumpFamily,
    pub side: WallSide,
    /// Bump centre (translation along x).
    #[serde(default)]
    pub delta_x: f64,
    /// Gaussian decay coefficient; ignored by the wedge.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Wedge footprint length.
    #[serde(default)]
    pub wedge_length: f64,
    #[serde(default = "default_wedge_height")]
    pub wedge_height: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_lambda() -> f64 {
    GAUSSIAN_DECAY
}

fn default_wedge_height() -> f64 {
    WEDGE_HEIGHT
}

fn default_amplitude() -> f64 {
    GAUSSIAN_AMPLITUDE
}

impl WallProfile {
    pub fn gaussian(side: WallSide, delta_x: f64) -> Self {
        WallProfile {
            family: BumpFamily::GaussianTranslated,
            side,
            delta_x,
            lambda: GAUSSIAN_DECAY,
            wedge_length: 0.0,
            wedge_height: WEDGE_HEIGHT,
            amplitude: GAUSSIAN_AMPLITUDE,
        }
    }

    pub fn gaussian_variance(side: WallSide, lambda: f64) -> Self {
        WallProfile {
            family: BumpFamily::GaussianVariance,
            lambda,
            ..Self::gaussian(side, 0.0)
        }
    }

    pub fn wedge(side: WallSide, length: f64) -> Self {
        WallProfile {
            family: BumpFamily::TriangularWedge,
            wedge_length: length,
            ..Self::gaussian(side, 0.0)
        }
    }

    /// A flat wall (zero-amplitude Gaussian).
    pub fn flat(side: WallSide) -> Self {
        WallProfile {
            amplitude: 0.0,
            ..Self::gaussian(side, 0.0)
        }
    }

    /// Height of the bump above (lower) or below (upper) the flat wall.
    fn bump(&self, x: f64) -> f64 {
        let s = x - self.delta_x;
        match self.family {
            BumpFamily::GaussianTranslated => self.amplitude * (-GAUSSIAN_DECAY * s * s).exp(),
            BumpFamily::GaussianVariance => self.amplitude * (-self.lambda * s * s).exp(),
            BumpFamily::TriangularWedge => {
                let half = 0.5 * self.wedge_length;
                if half <= 0.0 {
                    0.0
                } else {
                    self.wedge_height * (1.0 - s.abs() / half).max(0.0)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.family {
            BumpFamily::GaussianTranslated => self.amplitude.is_finite(),
            BumpFamily::GaussianVariance => self.lambda > 0.0 && self.amplitude.is_finite(),
            BumpFamily::TriangularWedge => self.wedge_length > 0.0 && self.wedge_height >= 0.0,
        };
        if ok && self.delta_x.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid wall profile {self:?}")))
        }
    }
}

/// Wall y-coordinate of `profile` at `x`.
pub fn wall_height(profile: &WallProfile, x: f64) -> Result<f64> {
    // Tolerate roundoff from vertex arithmetic at the end planes.
    const SLACK: f64 = 1e-12;
    if !(X_MIN - SLACK..=X_MAX + SLACK).contains(&x) {
        return Err(Error::Domain { x });
    }
    let bump = profile.bump(x);
    Ok(match profile.side {
        WallSide::Lower => bump,
        WallSide::Upper => CHANNEL_HEIGHT - bump,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseRole {
    Training,
    Testing,
}

/// A channel configuration: both walls and the inflow Mach number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub profile_lower: WallProfile,
    pub profile_upper: WallProfile,
    #[serde(default = "default_mach")]
    pub mach_infinity: f64,
    /// Relative Mach perturbation, e.g. `0.05` for +5 %.
    #[serde(default)]
    pub mach_perturbation: f64,
    pub role: CaseRole,
}

fn default_mach() -> f64 {
    BASE_MACH
}

impl CaseSpec {
    /// Fixed lower Gaussian bump with the upper bump translated by `delta_x`.
    pub fn translated(delta_x: f64, mach_perturbation: f64, role: CaseRole) -> Self {
        CaseSpec {
            profile_lower: WallProfile::gaussian(WallSide::Lower, 0.0),
            profile_upper: WallProfile::gaussian(WallSide::Upper, delta_x),
            mach_infinity: BASE_MACH,
            mach_perturbation,
            role,
        }
    }

    /// Lower Gaussian bump of decay `lambda`; the upper bump stays at x = 0.
    pub fn gaussian_variance(lambda: f64, mach_perturbation: f64, role: CaseRole) -> Self {
        CaseSpec {
            profile_lower: WallProfile::gaussian_variance(WallSide::Lower, lambda),
            profile_upper: WallProfile::gaussian(WallSide::Upper, 0.0),
            mach_infinity: BASE_MACH,
            mach_perturbation,
            role,
        }
    }

    /// Lower triangular wedge of footprint `length` in place of the fixed
    /// bump; the upper bump stays at x = 0.
    pub fn wedge(length: f64, mach_perturbation: f64, role: CaseRole) -> Self {
        CaseSpec {
            profile_lower: WallProfile::wedge(WallSide::Lower, length),
            profile_upper: WallProfile::gaussian(WallSide::Upper, 0.0),
            mach_infinity: BASE_MACH,
            mach_perturbation,
            role,
        }
    }

    pub fn flat(role: CaseRole) -> Self {
        CaseSpec {
            profile_lower: WallProfile::flat(WallSide::Lower),
            profile_upper: WallProfile::flat(WallSide::Upper),
            mach_infinity: BASE_MACH,
            mach_perturbation: 0.0,
            role,
        }
    }

    /// Inflow Mach number after applying the perturbation.
    pub fn mach(&self) -> f64 {
        self.mach_infinity * (1.0 + self.mach_perturbation)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile_lower.validate()?;
        self.profile_upper.validate()?;
        if self.profile_lower.side != WallSide::Lower || self.profile_upper.side != WallSide::Upper {
            return Err(Error::Config("wall sides are swapped".into()));
        }
        if !(self.mach() > 1.0) {
            return Err(Error::Config(format!(
                "inflow Mach {} must be supersonic",
                self.mach()
            )));
        }
        Ok(())
    }

    /// Filesystem-safe identifier derived from the parameters.
    pub fn id(&self) -> String {
        let upper = &self.profile_upper;
        let lower = &self.profile_lower;
        let base_upper = *upper == WallProfile::gaussian(WallSide::Upper, 0.0);
        let geometry = match (lower.family, upper.family) {
            (BumpFamily::GaussianTranslated, BumpFamily::GaussianTranslated)
                if lower.delta_x == 0.0 && lower.amplitude == upper.amplitude =>
            {
                if upper.amplitude == 0.0 {
                    "flat".to_string()
                } else {
                    format!("dx{:+.3}", upper.delta_x)
                }
            }
            (BumpFamily::GaussianVariance, BumpFamily::GaussianTranslated)
                if base_upper && lower.delta_x == 0.0 =>
            {
                format!("lambda{:.2}", lower.lambda)
            }
            (BumpFamily::TriangularWedge, BumpFamily::GaussianTranslated)
                if base_upper && lower.delta_x == 0.0 =>
            {
                format!("wedge{:.3}", lower.wedge_length)
            }
            _ => format!(
                "{}-{}",
                profile_tag(lower),
                profile_tag(upper)
            ),
        };
        format!("{geometry}_m{:+.3}", self.mach_perturbation)
    }
}

fn profile_tag(p: &WallProfile) -> String {
    match p.family {
        BumpFamily::GaussianTranslated => format!("g{:.3}a{:.4}", p.delta_x, p.amplitude),
        BumpFamily::GaussianVariance => format!("v{:.3}l{:.2}", p.delta_x, p.lambda),
        BumpFamily::TriangularWedge => format!("w{:.3}L{:.3}", p.delta_x, p.wedge_length),
    }
}

impl fmt::Display for CaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Upper-bump translations of the training set.
pub const TRAINING_SHIFTS: [f64; 9] = [0.0, 0.15, -0.15, 0.30, -0.30, 0.45, -0.45, 0.60, -0.60];
/// Upper-bump translations of the held-out set.
pub const TESTING_SHIFTS: [f64; 4] = [0.12, -0.19, -0.35, 0.44];
pub const MACH_PERTURBATIONS: [f64; 3] = [0.0, 0.05, -0.05];
pub const TRAINING_LAMBDAS: [f64; 3] = [10.0, 25.0, 40.0];
pub const TRAINING_WEDGE_LENGTHS: [f64; 4] = [0.3, 0.4, 0.5, 0.6];
pub const TESTING_LAMBDA: f64 = 28.0;
pub const TESTING_WEDGE_LENGTH: f64 = 0.38;

/// Bump-translation training cases, every geometry at every Mach perturbation.
pub fn translation_training_cases() -> Vec<CaseSpec> {
    TRAINING_SHIFTS
        .iter()
        .flat_map(|&dx| {
            MACH_PERTURBATIONS
                .iter()
                .map(move |&m| CaseSpec::translated(dx, m, CaseRole::Training))
        })
        .collect()
}

pub fn translation_testing_cases() -> Vec<CaseSpec> {
    TESTING_SHIFTS
        .iter()
        .map(|&dx| CaseSpec::translated(dx, 0.0, CaseRole::Testing))
        .collect()
}

/// Gaussian-variance and wedge training cases.
pub fn shape_training_cases() -> Vec<CaseSpec> {
    let gaussians = TRAINING_LAMBDAS.iter().flat_map(|&l| {
        MACH_PERTURBATIONS
            .iter()
            .map(move |&m| CaseSpec::gaussian_variance(l, m, CaseRole::Training))
    });
    let wedges = TRAINING_WEDGE_LENGTHS.iter().flat_map(|&len| {
        MACH_PERTURBATIONS
            .iter()
            .map(move |&m| CaseSpec::wedge(len, m, CaseRole::Training))
    });
    gaussians.chain(wedges).collect()
}

pub fn shape_testing_cases() -> Vec<CaseSpec> {
    vec![
        CaseSpec::gaussian_variance(TESTING_LAMBDA, 0.0, CaseRole::Testing),
        CaseSpec::wedge(TESTING_WEDGE_LENGTH, 0.0, CaseRole::Testing),
    ]
}
