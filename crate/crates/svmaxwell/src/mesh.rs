//! Cartesian mesh and ghost-cell boundary conditions.

use crate::error::Error;
use crate::riemann::rotate_primitive;
use crate::state::{ConservedState, PrimitiveState};
use crate::Result;

/// Uniform Cartesian mesh of `nx x ny` cells on `[0, lx] x [0, ly]`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub dy: f64,
}

pub fn build_cartesian_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if nx < 1 || ny < 1 || !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::BadDimensions(format!("nx={nx}, ny={ny}, lx={lx}, ly={ly}")));
    }
    Ok(Mesh { nx, ny, lx, ly, dx: lx / nx as f64, dy: ly / ny as f64 })
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// `sum_j |Gamma_ij| / |V_i|` of an interior cell.
    pub fn perimeter_ratio(&self) -> f64 {
        2.0 / self.dx + 2.0 / self.dy
    }

    pub fn n_x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_y_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }
}

/// Domain edges in outward-normal order W, E, S, N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    West,
    East,
    South,
    North,
}

impl Edge {
    pub fn outward_normal(&self) -> [f64; 2] {
        match self {
            Edge::West => [-1.0, 0.0],
            Edge::East => [1.0, 0.0],
            Edge::South => [0.0, -1.0],
            Edge::North => [0.0, 1.0],
        }
    }
}

/// Ghost-cell recipe for one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCondition {
    /// The field is invariant under translations by `(sx dx, sy dy)`; the
    /// ghost copies the interior cell displaced one step along that
    /// direction (a diagonal neighbor for diagonal invariance).
    TranslationInvariant { along: (i32, i32) },
    /// Impermeable free-slip wall: normal velocity and `C_nt` reflected.
    SlipWall,
    /// No-slip wall moving tangentially with `wall_velocity` (normal
    /// component ignored); the ghost enforces the wall velocity at the face.
    NoSlipWall { wall_velocity: [f64; 2] },
    /// Zero-gradient outflow.
    Outflow,
}

/// Boundary conditions for all four edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub west: EdgeCondition,
    pub east: EdgeCondition,
    pub south: EdgeCondition,
    pub north: EdgeCondition,
}

impl BoundarySpec {
    pub fn uniform(cond: EdgeCondition) -> Self {
        Self { west: cond, east: cond, south: cond, north: cond }
    }

    pub fn edge(&self, edge: Edge) -> EdgeCondition {
        match edge {
            Edge::West => self.west,
            Edge::East => self.east,
            Edge::South => self.south,
            Edge::North => self.north,
        }
    }

    /// Dam-break setup: all edges translation-invariant along the `x + y`
    /// isolines (direction `(1, -1)`).
    pub fn translation_invariant_diagonal() -> Self {
        Self::uniform(EdgeCondition::TranslationInvariant { along: (1, -1) })
    }

    pub fn outflow() -> Self {
        Self::uniform(EdgeCondition::Outflow)
    }
}

/// State of the ghost cell across `edge` given the source interior state.
///
/// For `TranslationInvariant` and `Outflow` the caller passes the interior
/// cell the ghost copies (the diagonal neighbor for diagonal invariance) and
/// the state is returned unchanged; walls reflect the velocity and the
/// conformation tensor about the wall plane.
pub fn ghost_state(
    interior: &ConservedState,
    bc: &EdgeCondition,
    n: [f64; 2],
) -> Result<ConservedState> {
    match bc {
        EdgeCondition::TranslationInvariant { .. } | EdgeCondition::Outflow => Ok(*interior),
        EdgeCondition::SlipWall => reflect(interior, n, None),
        EdgeCondition::NoSlipWall { wall_velocity } => reflect(interior, n, Some(*wall_velocity)),
    }
}

fn reflect(q: &ConservedState, n: [f64; 2], wall: Option<[f64; 2]>) -> Result<ConservedState> {
    let p = q.to_primitive()?;
    // Work in the wall frame: normal component u, tangential v.
    let local = rotate_primitive(&p, n);
    let (u, v) = match wall {
        // Slip: mirror the normal component, keep the tangential one.
        None => (-local.u, local.v),
        // No-slip: the face value (ghost + interior)/2 equals the wall
        // velocity, whose normal component is zero.
        Some(w) => {
            let w_t = -w[0] * n[1] + w[1] * n[0];
            (-local.u, 2.0 * w_t - local.v)
        }
    };
    let reflected = PrimitiveState { u, v, c_xy: -local.c_xy, ..local };
    crate::riemann::from_local_frame(&reflected, n)
}

/// Interior cell index a ghost cell copies, for the given edge, boundary
/// condition and along-edge index. Corner targets are clamped to the nearest
/// interior cell.
pub fn ghost_source_cell(
    mesh: &Mesh,
    edge: Edge,
    along_index: usize,
    bc: &EdgeCondition,
) -> (usize, usize) {
    // Ghost cell coordinates just outside the edge.
    let (gi, gj): (i64, i64) = match edge {
        Edge::West => (-1, along_index as i64),
        Edge::East => (mesh.nx as i64, along_index as i64),
        Edge::South => (along_index as i64, -1),
        Edge::North => (along_index as i64, mesh.ny as i64),
    };
    let adjacent = || -> (usize, usize) {
        match edge {
            Edge::West => (0, along_index),
            Edge::East => (mesh.nx - 1, along_index),
            Edge::South => (along_index, 0),
            Edge::North => (along_index, mesh.ny - 1),
        }
    };
    match bc {
        EdgeCondition::TranslationInvariant { along: (sx, sy) } => {
            let clamp = |i: i64, n: usize| -> usize { i.clamp(0, n as i64 - 1) as usize };
            for k in [1i64, -1] {
                let ii = gi + k * *sx as i64;
                let jj = gj + k * *sy as i64;
                // Pick the displacement that moves off the edge.
                let inside = match edge {
                    Edge::West | Edge::East => ii >= 0 && ii < mesh.nx as i64,
                    Edge::South | Edge::North => jj >= 0 && jj < mesh.ny as i64,
                };
                if inside {
                    return (clamp(ii, mesh.nx), clamp(jj, mesh.ny));
                }
            }
            adjacent()
        }
        _ => adjacent(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_counts() {
        let mesh = build_cartesian_mesh(33, 33, 1.0, 1.0).unwrap();
        assert_eq!(mesh.n_cells(), 1089);
        assert!((mesh.perimeter_ratio() - 4.0 * 33.0).abs() < 1e-12);

        let single = build_cartesian_mesh(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(single.n_cells(), 1);
        assert_eq!(single.n_x_faces() + single.n_y_faces(), 4);

        let strip = build_cartesian_mesh(513, 1, 1.0, 1.0 / 513.0).unwrap();
        assert_eq!(strip.n_cells(), 513);

        assert!(build_cartesian_mesh(0, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn slip_wall_reflects_normal_velocity_and_shear() {
        let p = PrimitiveState::new(1.0, 1.0, 2.0, 1.5, 1.0, 0.3, 1.0);
        let q = p.to_conserved().unwrap();
        let g = ghost_state(&q, &EdgeCondition::SlipWall, [1.0, 0.0]).unwrap();
        let gp = g.to_primitive().unwrap();
        assert!((gp.u + 1.0).abs() < 1e-14);
        assert!((gp.v - 2.0).abs() < 1e-14);
        assert!((gp.c_xy + 0.3).abs() < 1e-14);
        assert!((gp.c_xx - 1.5).abs() < 1e-14);
        assert!((gp.c_zz - 1.0).abs() < 1e-14);
    }

    #[test]
    fn no_slip_lid_enforces_face_velocity() {
        // Lid at the north edge moving with speed 1 along +x.
        let p = PrimitiveState::new(1.0, 0.4, 0.1, 1.0, 1.0, 0.0, 1.0);
        let q = p.to_conserved().unwrap();
        let lid = EdgeCondition::NoSlipWall { wall_velocity: [1.0, 0.0] };
        let g = ghost_state(&q, &lid, [0.0, 1.0]).unwrap();
        let gp = g.to_primitive().unwrap();
        assert!((gp.u - 1.6).abs() < 1e-14, "tangential ghost 2*1 - 0.4");
        assert!((gp.v + 0.1).abs() < 1e-14, "normal component mirrored");

        let wall = EdgeCondition::NoSlipWall { wall_velocity: [0.0, 0.0] };
        let g = ghost_state(&q, &wall, [0.0, 1.0]).unwrap();
        let gp = g.to_primitive().unwrap();
        assert!((gp.u + 0.4).abs() < 1e-14);
        assert!((gp.v + 0.1).abs() < 1e-14);
    }

    #[test]
    fn diagonal_ghost_sources() {
        let mesh = build_cartesian_mesh(8, 8, 1.0, 1.0).unwrap();
        let bc = EdgeCondition::TranslationInvariant { along: (1, -1) };
        // East edge at row j: ghost (8, j) copies (7, j + 1).
        assert_eq!(ghost_source_cell(&mesh, Edge::East, 3, &bc), (7, 4));
        // West edge at row j: ghost (-1, j) copies (0, j - 1).
        assert_eq!(ghost_source_cell(&mesh, Edge::West, 3, &bc), (0, 2));
        // North edge at column i: ghost (i, 8) copies (i + 1, 7).
        assert_eq!(ghost_source_cell(&mesh, Edge::North, 3, &bc), (4, 7));
        // South edge: ghost (i, -1) copies (i - 1, 0).
        assert_eq!(ghost_source_cell(&mesh, Edge::South, 3, &bc), (2, 0));
        // Corners clamp to the nearest interior diagonal cell.
        assert_eq!(ghost_source_cell(&mesh, Edge::East, 7, &bc), (7, 7));

        // Lateral invariance of a 1D strip copies the same column.
        let strip = build_cartesian_mesh(16, 1, 1.0, 1.0 / 16.0).unwrap();
        let lateral = EdgeCondition::TranslationInvariant { along: (0, 1) };
        assert_eq!(ghost_source_cell(&strip, Edge::South, 5, &lateral), (5, 0));
        assert_eq!(ghost_source_cell(&strip, Edge::North, 5, &lateral), (5, 0));
    }
}
