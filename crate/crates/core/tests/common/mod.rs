//! Reference relations and measurements shared by the integration and
//! acceptance tests. Nothing here calls into the solver's own formulas.
#![allow(dead_code)]

use nnlci::geometry::Point;
use nnlci::interpolation::LinearField;
use nnlci::mesh::Mesh;
use nnlci::spatial::CentroidTree;
use nnlci::state::ConservedState;

/// Flow deflection produced by an oblique shock of angle `beta` at `mach`.
pub fn deflection(beta: f64, mach: f64, gamma: f64) -> f64 {
    let m2s = (mach * beta.sin()).powi(2);
    (2.0 / beta.tan() * (m2s - 1.0) / (mach * mach * (gamma + (2.0 * beta).cos()) + 2.0)).atan()
}

/// Weak-shock root of the θ–β–M relation, by bisection between the Mach
/// angle and the angle of maximum deflection.
pub fn weak_shock_angle(theta: f64, mach: f64, gamma: f64) -> Option<f64> {
    let mu = (1.0 / mach).asin();
    let (mut lo, mut hi) = (mu, std::f64::consts::FRAC_PI_2);
    // golden-section search for the maximum deflection
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if deflection(a, mach, gamma) < deflection(b, mach, gamma) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let beta_max = 0.5 * (lo + hi);
    if deflection(beta_max, mach, gamma) < theta {
        return None;
    }
    let (mut lo, mut hi) = (mu, beta_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deflection(mid, mach, gamma) < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Static pressure ratio across a shock with normal Mach number `mn`.
pub fn normal_shock_pressure_ratio(mn: f64, gamma: f64) -> f64 {
    1.0 + 2.0 * gamma / (gamma + 1.0) * (mn * mn - 1.0)
}

pub fn pressure(u: &ConservedState, gamma: f64) -> f64 {
    let [rho, mu, mv, e] = u.0;
    (gamma - 1.0) * (e - 0.5 * (mu * mu + mv * mv) / rho)
}

/// Shock angle (radians) fitted to the leading shock rising from the wall
/// at `(x_foot, 0)`.
///
/// On each horizontal line `y = y_k`, the first `x` where pressure crosses
/// `p_threshold` is located by a fine scan; `x = a + y·cot β` is then fitted
/// by least squares.
pub fn measure_shock_angle(
    mesh: &Mesh,
    states: &[ConservedState],
    gamma: f64,
    x_foot: f64,
    p_threshold: f64,
    ys: &[f64],
) -> Option<f64> {
    let tree = CentroidTree::build(mesh);
    let field = LinearField::new(mesh, &tree, states);
    let p_at = |x: f64, y: f64| field.value_at(Point::new(x, y)).ok().map(|u| pressure(&u, gamma));
    let mut pts = Vec::new();
    for &y in ys {
        let dx = 1e-3;
        let mut x = x_foot - 0.2;
        let mut prev = p_at(x, y)?;
        while x < x_foot + 1.0 {
            let xn = x + dx;
            let p = p_at(xn, y)?;
            if prev < p_threshold && p >= p_threshold {
                pts.push((y, x + dx * (p_threshold - prev) / (p - prev)));
                break;
            }
            prev = p;
            x = xn;
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (sy, sx) = pts.iter().fold((0.0, 0.0), |(a, b), &(y, x)| (a + y, b + x));
    let (my, mx) = (sy / n, sx / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(y, x)| (a + (y - my) * (x - mx), b + (y - my) * (y - my)));
    let cot_beta = num / den;
    Some((1.0 / cot_beta).atan())
}
