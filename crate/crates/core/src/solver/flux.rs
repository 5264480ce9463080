use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::state::ConservedState;

fn wave_speed(u: &ConservedState, n: Point, gamma: f64) -> Option<f64> {
    let [rho, mu, mv, _] = u.0;
    let p = u.pressure(gamma);
    if !(rho > 0.0 && p > 0.0) {
        return None;
    }
    let vn = (mu * n.x + mv * n.y) / rho;
    Some(vn.abs() + (gamma * p / rho).sqrt())
}

/// Local Lax-Friedrichs flux through a face with unit normal `n` pointing
/// from the left state to the right state.
pub fn rusanov_flux(
    left: &ConservedState,
    right: &ConservedState,
    n: Point,
    gamma: f64,
) -> Result<ConservedState> {
    let bad = |which: &str| Error::State {
        cell: usize::MAX,
        reason: format!("{which} face state is not physical"),
    };
    let sl = wave_speed(left, n, gamma).ok_or_else(|| bad("left"))?;
    let sr = wave_speed(right, n, gamma).ok_or_else(|| bad("right"))?;
    Ok(rusanov_unchecked(left, right, n, gamma, sl.max(sr)))
}

#[inline]
pub(crate) fn rusanov_unchecked(
    left: &ConservedState,
    right: &ConservedState,
    n: Point,
    gamma: f64,
    s_max: f64,
) -> ConservedState {
    let fl = left.normal_flux(n, gamma);
    let fr = right.normal_flux(n, gamma);
    ConservedState(std::array::from_fn(|i| {
        0.5 * (fl[i] + fr[i]) - 0.5 * s_max * (right[i] - left[i])
    }))
}

/// Rusanov flux that reports `None` instead of an error for unphysical input.
#[inline]
pub(crate) fn rusanov_checked(
    left: &ConservedState,
    right: &ConservedState,
    n: Point,
    gamma: f64,
) -> Option<ConservedState> {
    let s = wave_speed(left, n, gamma)?.max(wave_speed(right, n, gamma)?);
    Some(rusanov_unchecked(left, right, n, gamma, s))
}
