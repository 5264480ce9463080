//! Conserved and primitive gas states for a calorically perfect gas.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::geometry::Point;

pub const GAMMA: f64 = 1.4;

/// Names of the conserved variables in storage order.
pub const VARIABLE_NAMES: [&str; 4] = ["rho", "rho_u", "rho_v", "rho_E"];

/// `[ρ, ρu, ρv, ρE]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedState(pub [f64; 4]);

impl ConservedState {
    pub const ZERO: ConservedState = ConservedState([0.0; 4]);

    pub const fn new(rho: f64, rho_u: f64, rho_v: f64, rho_e: f64) -> Self {
        ConservedState([rho, rho_u, rho_v, rho_e])
    }

    pub fn rho(&self) -> f64 {
        self.0[0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Pressure from the perfect-gas equation of state.
    pub fn pressure(&self, gamma: f64) -> f64 {
        let [rho, mu, mv, e] = self.0;
        (gamma - 1.0) * (e - 0.5 * (mu * mu + mv * mv) / rho)
    }

    /// True when density and pressure are both positive and finite.
    pub fn is_physical(&self, gamma: f64) -> bool {
        let p = self.pressure(gamma);
        self.0[0] > 0.0 && p > 0.0 && p.is_finite() && self.is_finite()
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Euler flux through a face with (not necessarily unit) normal `n`.
    pub fn normal_flux(&self, n: Point, gamma: f64) -> ConservedState {
        let [rho, mu, mv, e] = self.0;
        let u = mu / rho;
        let v = mv / rho;
        let p = (gamma - 1.0) * (e - 0.5 * (mu * u + mv * v));
        let vn = u * n.x + v * n.y;
        ConservedState([
            rho * vn,
            mu * vn + p * n.x,
            mv * vn + p * n.y,
            (e + p) * vn,
        ])
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> ConservedState {
        ConservedState(self.0.map(f))
    }
}

impl Index<usize> for ConservedState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ConservedState {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for ConservedState {
    type Output = ConservedState;
    fn add(self, rhs: ConservedState) -> ConservedState {
        ConservedState(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl AddAssign for ConservedState {
    fn add_assign(&mut self, rhs: ConservedState) {
        for i in 0..4 {
            self.0[i] += rhs.0[i];
        }
    }
}

impl Sub for ConservedState {
    type Output = ConservedState;
    fn sub(self, rhs: ConservedState) -> ConservedState {
        ConservedState(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Mul<f64> for ConservedState {
    type Output = ConservedState;
    fn mul(self, rhs: f64) -> ConservedState {
        self.map(|v| v * rhs)
    }
}

impl Neg for ConservedState {
    type Output = ConservedState;
    fn neg(self) -> ConservedState {
        self.map(|v| -v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveState {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
    /// Speed of sound.
    pub a: f64,
    pub mach: f64,
    /// Total enthalpy per unit mass.
    pub h: f64,
}

impl PrimitiveState {
    pub fn from_rho_u_v_p(rho: f64, u: f64, v: f64, p: f64, gamma: f64) -> Self {
        let a = (gamma * p / rho).sqrt();
        let e = p / ((gamma - 1.0) * rho) + 0.5 * (u * u + v * v);
        PrimitiveState {
            rho,
            u,
            v,
            p,
            a,
            mach: u.hypot(v) / a,
            h: e + p / rho,
        }
    }

    pub fn to_conserved(&self, gamma: f64) -> ConservedState {
        let e = self.p / (gamma - 1.0) + 0.5 * self.rho * (self.u * self.u + self.v * self.v);
        ConservedState([self.rho, self.rho * self.u, self.rho * self.v, e])
    }
}

/// Decodes a conserved state; `cell` only labels the error.
pub fn primitive_from_conserved(
    u: &ConservedState,
    gamma: f64,
    cell: usize,
) -> Result<PrimitiveState> {
    let [rho, mu, mv, _] = u.0;
    if !(rho > 0.0) || !u.is_finite() {
        return Err(Error::State {
            cell,
            reason: format!("density {rho}"),
        });
    }
    let p = u.pressure(gamma);
    if !(p > 0.0) {
        return Err(Error::State {
            cell,
            reason: format!("pressure {p}"),
        });
    }
    Ok(PrimitiveState::from_rho_u_v_p(rho, mu / rho, mv / rho, p, gamma))
}

/// Stagnation-to-static ratios for an isentropic inflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalConditions {
    /// `T_t / T_∞`.
    pub temperature_ratio: f64,
    /// `p_t / p_∞`.
    pub pressure_ratio: f64,
}

pub fn total_conditions(mach: f64, gamma: f64) -> TotalConditions {
    let temperature_ratio = 1.0 + 0.5 * (gamma - 1.0) * mach * mach;
    TotalConditions {
        temperature_ratio,
        pressure_ratio: temperature_ratio.powf(gamma / (gamma - 1.0)),
    }
}

/// Free-stream reference: unit density and unit sound speed.
pub fn reference_static(gamma: f64) -> (f64, f64) {
    (1.0, 1.0 / gamma)
}

/// Inflow state recovered from the total temperature and pressure at `mach`,
/// flowing along +x.
///
/// Temperatures are carried in units of `a²`, so `T = γ p / ρ`.
pub fn inflow_state(mach: f64, gamma: f64) -> PrimitiveState {
    let (rho_ref, p_ref) = reference_static(gamma);
    let t_ref = gamma * p_ref / rho_ref;
    let totals = total_conditions(mach, gamma);
    let t_total = t_ref * totals.temperature_ratio;
    let p_total = p_ref * totals.pressure_ratio;

    let t = t_total / (1.0 + 0.5 * (gamma - 1.0) * mach * mach);
    let p = p_total / (t_total / t).powf(gamma / (gamma - 1.0));
    let rho = gamma * p / t;
    PrimitiveState::from_rho_u_v_p(rho, mach * t.sqrt(), 0.0, p, gamma)
}
