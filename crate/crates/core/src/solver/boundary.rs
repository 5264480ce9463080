use crate::geometry::Point;
use crate::mesh::BoundaryTag;
use crate::state::ConservedState;

/// Ghost state across a boundary face with unit outward normal `n`.
///
/// Walls reflect the normal velocity; the supersonic inflow imposes the
/// free stream; the supersonic outflow copies the interior.
pub fn apply_boundary(
    interior: &ConservedState,
    tag: BoundaryTag,
    n: Point,
    freestream: &ConservedState,
) -> ConservedState {
    match tag {
        BoundaryTag::WallLower | BoundaryTag::WallUpper => {
            let [rho, mu, mv, e] = interior.0;
            let mn = mu * n.x + mv * n.y;
            ConservedState([rho, mu - 2.0 * mn * n.x, mv - 2.0 * mn * n.y, e])
        }
        BoundaryTag::Inflow => *freestream,
        BoundaryTag::Outflow => *interior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{inflow_state, PrimitiveState, GAMMA};

    #[test]
    fn wall_mirrors_normal_velocity() {
        let u = PrimitiveState::from_rho_u_v_p(1.0, 1.0, 1.0, 1.0, GAMMA).to_conserved(GAMMA);
        let free = inflow_state(2.0, GAMMA).to_conserved(GAMMA);
        let g = apply_boundary(&u, BoundaryTag::WallUpper, Point::new(0.0, 1.0), &free);
        assert_eq!(g[0], u[0]);
        assert_eq!((g[1] / g[0], g[2] / g[0]), (1.0, -1.0));
        assert_eq!(g.pressure(GAMMA), u.pressure(GAMMA));
    }

    #[test]
    fn inflow_and_outflow() {
        let u = ConservedState::new(1.1, 0.3, 0.2, 2.0);
        let free = inflow_state(2.0, GAMMA).to_conserved(GAMMA);
        assert_eq!(apply_boundary(&u, BoundaryTag::Inflow, Point::new(-1.0, 0.0), &free), free);
        assert_eq!(apply_boundary(&u, BoundaryTag::Outflow, Point::new(1.0, 0.0), &free), u);
    }
}
