//! Split time integrator: hyperbolic sub-step from the interface Riemann
//! solutions, backward-Euler relaxation/friction sources, optional explicit
//! momentum diffusion.
//!
//! The hyperbolic update is the convex-combination form
//!
//! ```text
//! q_i <- q_i + tau sum_faces (|Gamma|/|V|) [ sector gaps x state differences ]
//! ```
//!
//! applied under the stringent CFL condition `tau s_i <= (sum |Gamma|/|V|)^-1`,
//! which keeps every cell inside the convex admissible set and carries the
//! discrete entropy inequality.
//!
//! Face solves run in a fixed order and cell updates accumulate their four
//! faces as `(W + E) + (S + N)`, so results are independent of any later
//! parallelization and full runs commute bitwise with quarter-turn rotations
//! of the setup.

use crate::diagnostics::{entropy_residual_scale, StepDiagnostics};
use crate::error::Error;
use crate::mesh::{ghost_source_cell, ghost_state, BoundarySpec, Edge, Mesh};
use crate::rheology::{dissipation, relax_source_step, ModelKind};
use crate::riemann::{
    interface_update, rotate_increment_to_global, solve_fan, to_local_frame, LocalPair,
    RelaxationParams, select_params,
};
use crate::state::{entropy, ConservedState, PhysParams, PrimitiveState};
use crate::Result;

/// Piecewise-constant field on a mesh.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub cells: Vec<ConservedState>,
    pub time: f64,
    pub step: u64,
}

impl FieldState {
    /// Samples an initial condition at cell centers.
    pub fn from_fn(
        mesh: &Mesh,
        ic: impl Fn(f64, f64) -> PrimitiveState,
    ) -> Result<FieldState> {
        let mut cells = Vec::with_capacity(mesh.n_cells());
        for j in 0..mesh.ny {
            for i in 0..mesh.nx {
                let (x, y) = mesh.cell_center(i, j);
                cells.push(ic(x, y).to_conserved()?);
            }
        }
        Ok(FieldState { cells, time: 0.0, step: 0 })
    }

    pub fn uniform(mesh: &Mesh, p: &PrimitiveState) -> Result<FieldState> {
        let q = p.to_conserved()?;
        Ok(FieldState { cells: vec![q; mesh.n_cells()], time: 0.0, step: 0 })
    }
}

/// Solution of one interface Riemann problem, increments in the global frame.
struct FaceSolution {
    delta_left: [f64; 7],
    delta_right: [f64; 7],
    smax: f64,
    entropy_flux: f64,
    flux_mass: f64,
    flux_momentum: [f64; 2],
    entropy_ok: bool,
    escalations: u32,
}

struct FaceSet {
    x: Vec<FaceSolution>,
    y: Vec<FaceSolution>,
}

impl FaceSet {
    fn x_face(&self, mesh: &Mesh, i: usize, j: usize) -> &FaceSolution {
        &self.x[j * (mesh.nx + 1) + i]
    }

    fn y_face(&self, mesh: &Mesh, i: usize, j: usize) -> &FaceSolution {
        &self.y[j * mesh.nx + i]
    }
}

fn solve_one_face(
    ql: &ConservedState,
    qr: &ConservedState,
    axis_y: bool,
    params: &PhysParams,
    model: ModelKind,
) -> Result<FaceSolution> {
    let n = if axis_y { [0.0, 1.0] } else { [1.0, 0.0] };
    let pair = LocalPair {
        left: to_local_frame(ql, n)?,
        right: to_local_frame(qr, n)?,
        normal: n,
    };
    let rp: RelaxationParams = select_params(&pair, params, model);
    let fan = solve_fan(&pair, &rp, params, model)?;
    let upd = interface_update(&fan, f64::MAX)?;
    let flux_momentum = if axis_y {
        [-upd.flux[2], upd.flux[1]]
    } else {
        [upd.flux[1], upd.flux[2]]
    };
    Ok(FaceSolution {
        delta_left: rotate_increment_to_global(&upd.delta_left, axis_y),
        delta_right: rotate_increment_to_global(&upd.delta_right, axis_y),
        smax: upd.smax,
        entropy_flux: upd.entropy_flux,
        flux_mass: upd.flux[0],
        flux_momentum,
        entropy_ok: rp.entropy_ok,
        escalations: rp.escalations,
    })
}

fn solve_faces(
    state: &FieldState,
    mesh: &Mesh,
    bc: &BoundarySpec,
    params: &PhysParams,
    model: ModelKind,
) -> Result<FaceSet> {
    let cell = |i: usize, j: usize| &state.cells[mesh.cell_index(i, j)];
    let ghost = |edge: Edge, along: usize| -> Result<ConservedState> {
        let cond = bc.edge(edge);
        let (si, sj) = ghost_source_cell(mesh, edge, along, &cond);
        ghost_state(cell(si, sj), &cond, edge.outward_normal())
    };

    let mut x_faces = Vec::with_capacity(mesh.n_x_faces());
    for j in 0..mesh.ny {
        for i in 0..=mesh.nx {
            let ql = if i == 0 { ghost(Edge::West, j)? } else { *cell(i - 1, j) };
            let qr = if i == mesh.nx { ghost(Edge::East, j)? } else { *cell(i, j) };
            x_faces.push(solve_one_face(&ql, &qr, false, params, model)?);
        }
    }
    let mut y_faces = Vec::with_capacity(mesh.n_y_faces());
    for j in 0..=mesh.ny {
        for i in 0..mesh.nx {
            let ql = if j == 0 { ghost(Edge::South, i)? } else { *cell(i, j - 1) };
            let qr = if j == mesh.ny { ghost(Edge::North, i)? } else { *cell(i, j) };
            y_faces.push(solve_one_face(&ql, &qr, true, params, model)?);
        }
    }
    Ok(FaceSet { x: x_faces, y: y_faces })
}

fn max_cell_speed(faces: &FaceSet, mesh: &Mesh, i: usize, j: usize) -> f64 {
    let w = faces.x_face(mesh, i, j).smax;
    let e = faces.x_face(mesh, i + 1, j).smax;
    let s = faces.y_face(mesh, i, j).smax;
    let n = faces.y_face(mesh, i, j + 1).smax;
    w.max(e).max(s.max(n))
}

fn tau_from_faces(faces: &FaceSet, mesh: &Mesh, params: &PhysParams, cfl: f64) -> f64 {
    let cap = 1.0 / mesh.perimeter_ratio();
    let mut tau = f64::INFINITY;
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            tau = tau.min(cfl * (cap / max_cell_speed(faces, mesh, i, j)));
        }
    }
    if params.nu_s > 0.0 {
        let d = mesh.dx.min(mesh.dy);
        tau = tau.min(cfl * d * d / (8.0 * params.nu_s));
    }
    tau
}

/// Time step of the stringent CFL condition,
/// `tau = cfl min_i (sum_j |Gamma_ij|/|V_i|)^-1 / s_i`, additionally bounded
/// by `cfl min(dx,dy)^2 / (8 nu_s)` when momentum diffusion is active.
pub fn compute_timestep(
    state: &FieldState,
    mesh: &Mesh,
    bc: &BoundarySpec,
    params: &PhysParams,
    model: ModelKind,
    cfl: f64,
) -> Result<f64> {
    let faces = solve_faces(state, mesh, bc, params, model)?;
    Ok(tau_from_faces(&faces, mesh, params, cfl))
}

fn apply_hyperbolic(
    state: &FieldState,
    mesh: &Mesh,
    faces: &FaceSet,
    tau: f64,
    params: &PhysParams,
) -> Result<(FieldState, StepDiagnostics)> {
    let ratio = mesh.perimeter_ratio();
    let cap = 1.0 / ratio;
    let inv_dx = 1.0 / mesh.dx;
    let inv_dy = 1.0 / mesh.dy;
    let mut diag = StepDiagnostics::new(mesh.n_cells());
    diag.tau = tau;
    diag.total_faces = faces.x.len() + faces.y.len();
    for f in faces.x.iter().chain(faces.y.iter()) {
        if !f.entropy_ok {
            diag.failed_faces += 1;
        }
        let bucket = (f.escalations as usize).min(7);
        diag.iteration_histogram[bucket] += 1;
    }

    let mut cells = Vec::with_capacity(state.cells.len());
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let idx = mesh.cell_index(i, j);
            let s_i = max_cell_speed(faces, mesh, i, j);
            if tau * s_i > cap * (1.0 + 1e-12) {
                return Err(Error::CflViolated { cell: idx, tau, limit: cap / s_i });
            }
            let w = faces.x_face(mesh, i, j);
            let e = faces.x_face(mesh, i + 1, j);
            let s = faces.y_face(mesh, i, j);
            let n = faces.y_face(mesh, i, j + 1);
            let mut q = state.cells[idx];
            for k in 0..7 {
                let tx = inv_dx * (w.delta_right[k] + e.delta_left[k]);
                let ty = inv_dy * (s.delta_right[k] + n.delta_left[k]);
                q.0[k] += tau * (tx + ty);
            }
            let report = q.admissibility();
            diag.min_admissibility_margin = diag.min_admissibility_margin.min(report.min_margin());
            if let Some((constraint, margin)) = report.first_violation() {
                return Err(Error::InadmissibleResult { cell: idx, constraint, margin });
            }
            diag.cell_entropy_flux[idx] = inv_dx * (e.entropy_flux - w.entropy_flux)
                + inv_dy * (n.entropy_flux - s.entropy_flux);
            diag.cell_faces_ok[idx] = w.entropy_ok && e.entropy_ok && s.entropy_ok && n.entropy_ok;
            cells.push(q);
        }
    }

    // Outward boundary-flux ledgers.
    for j in 0..mesh.ny {
        let wf = faces.x_face(mesh, 0, j);
        let ef = faces.x_face(mesh, mesh.nx, j);
        diag.boundary_mass_flux += mesh.dy * (ef.flux_mass - wf.flux_mass);
        diag.boundary_entropy_flux += mesh.dy * (ef.entropy_flux - wf.entropy_flux);
        for c in 0..2 {
            diag.boundary_momentum_flux[c] +=
                mesh.dy * (ef.flux_momentum[c] - wf.flux_momentum[c]);
        }
    }
    for i in 0..mesh.nx {
        let sf = faces.y_face(mesh, i, 0);
        let nf = faces.y_face(mesh, i, mesh.ny);
        diag.boundary_mass_flux += mesh.dx * (nf.flux_mass - sf.flux_mass);
        diag.boundary_entropy_flux += mesh.dx * (nf.entropy_flux - sf.entropy_flux);
        for c in 0..2 {
            diag.boundary_momentum_flux[c] +=
                mesh.dx * (nf.flux_momentum[c] - sf.flux_momentum[c]);
        }
    }

    let next = FieldState { cells, time: state.time + tau, step: state.step + 1 };
    Ok((next, diag))
}

/// Forward-Euler integration of the homogeneous system over `tau` (which
/// must satisfy the stringent CFL bound for this state).
pub fn hyperbolic_step(
    state: &FieldState,
    mesh: &Mesh,
    bc: &BoundarySpec,
    tau: f64,
    params: &PhysParams,
    model: ModelKind,
) -> Result<(FieldState, StepDiagnostics)> {
    let faces = solve_faces(state, mesh, bc, params, model)?;
    let (mut next, mut diag) = apply_hyperbolic(state, mesh, &faces, tau, params)?;
    let (mass, momentum, ent) = crate::diagnostics::totals(&next, mesh, params)?;
    diag.time = next.time;
    diag.mass = mass;
    diag.momentum = momentum;
    diag.entropy = ent;
    next.step = state.step + 1;
    Ok((next, diag))
}

/// Cellwise backward-Euler relaxation/friction sources.
pub fn source_step(state: &FieldState, tau: f64, params: &PhysParams) -> Result<FieldState> {
    let mut cells = Vec::with_capacity(state.cells.len());
    for q in &state.cells {
        let p = q.to_primitive()?;
        cells.push(relax_source_step(&p, tau, params).to_conserved()?);
    }
    Ok(FieldState { cells, ..state.clone() })
}

/// Explicit centered diffusion of momentum with solvent viscosity `nu_s`:
/// `(HU) <- (HU) + tau div(nu_s H grad U)` on the 5-point stencil with ghost
/// values from the boundary conditions. Mass and conformation are untouched.
pub fn viscous_step(
    state: &FieldState,
    mesh: &Mesh,
    bc: &BoundarySpec,
    tau: f64,
    nu_s: f64,
) -> Result<FieldState> {
    if nu_s == 0.0 {
        return Ok(state.clone());
    }
    let d = mesh.dx.min(mesh.dy);
    let limit = d * d / (8.0 * nu_s);
    if tau > limit * (1.0 + 1e-12) {
        return Err(Error::DiffusionCflViolated { tau, limit });
    }

    let velocity = |q: &ConservedState| -> [f64; 3] {
        let [u, v] = q.velocity();
        [q.h(), u, v]
    };
    let cell = |i: usize, j: usize| &state.cells[mesh.cell_index(i, j)];
    let ghost = |edge: Edge, along: usize| -> Result<ConservedState> {
        let cond = bc.edge(edge);
        let (si, sj) = ghost_source_cell(mesh, edge, along, &cond);
        ghost_state(cell(si, sj), &cond, edge.outward_normal())
    };

    let inv_dx2 = 1.0 / (mesh.dx * mesh.dx);
    let inv_dy2 = 1.0 / (mesh.dy * mesh.dy);
    let mut cells = state.cells.clone();
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let c = velocity(cell(i, j));
            let w = velocity(&if i == 0 { ghost(Edge::West, j)? } else { *cell(i - 1, j) });
            let e =
                velocity(&if i + 1 == mesh.nx { ghost(Edge::East, j)? } else { *cell(i + 1, j) });
            let s = velocity(&if j == 0 { ghost(Edge::South, i)? } else { *cell(i, j - 1) });
            let n =
                velocity(&if j + 1 == mesh.ny { ghost(Edge::North, i)? } else { *cell(i, j + 1) });
            let idx = mesh.cell_index(i, j);
            for comp in 0..2 {
                let fw = 0.5 * (w[0] + c[0]) * (w[1 + comp] - c[1 + comp]);
                let fe = 0.5 * (e[0] + c[0]) * (e[1 + comp] - c[1 + comp]);
                let fs = 0.5 * (s[0] + c[0]) * (s[1 + comp] - c[1 + comp]);
                let fn_ = 0.5 * (n[0] + c[0]) * (n[1 + comp] - c[1 + comp]);
                let lap = inv_dx2 * (fw + fe) + inv_dy2 * (fs + fn_);
                cells[idx].0[1 + comp] += tau * nu_s * lap;
            }
        }
    }
    Ok(FieldState { cells, ..state.clone() })
}

/// One full split step: CFL time step, hyperbolic update, relaxation
/// sources, then momentum diffusion when `nu_s > 0`. The returned
/// diagnostics include the per-cell residual of the discrete entropy
/// inequality (the viscous sub-step is excluded from that audit).
pub fn advance(
    state: &FieldState,
    mesh: &Mesh,
    bc: &BoundarySpec,
    params: &PhysParams,
    model: ModelKind,
    cfl: f64,
) -> Result<(FieldState, f64, StepDiagnostics)> {
    let faces = solve_faces(state, mesh, bc, params, model)?;
    let tau = tau_from_faces(&faces, mesh, params, cfl);
    let (minus, mut diag) = apply_hyperbolic(state, mesh, &faces, tau, params)?;
    let sourced = source_step(&minus, tau, params)?;

    let mut max_residual: f64 = 0.0;
    for (i, (q0, q1)) in state.cells.iter().zip(sourced.cells.iter()).enumerate() {
        let s0 = entropy(q0, params)?;
        let s1 = entropy(q1, params)?;
        let p1 = q1.to_primitive()?;
        let sink = tau
            * p1.h
            * (params.friction * (p1.u * p1.u + p1.v * p1.v) + dissipation(&p1, params));
        let residual = s1 - s0 + tau * diag.cell_entropy_flux[i] + sink;
        let rel = residual / entropy_residual_scale(s0, s1, tau, diag.cell_entropy_flux[i]);
        diag.cell_entropy_residual[i] = rel;
        if diag.cell_faces_ok[i] {
            max_residual = max_residual.max(rel);
        }
    }
    diag.max_entropy_residual = max_residual;

    let next = if params.nu_s > 0.0 {
        viscous_step(&sourced, mesh, bc, tau, params.nu_s)?
    } else {
        sourced
    };
    let (mass, momentum, ent) = crate::diagnostics::totals(&next, mesh, params)?;
    diag.time = next.time;
    diag.mass = mass;
    diag.momentum = momentum;
    diag.entropy = ent;
    Ok((next, tau, diag))
}

/// Runs `advance` until `t_end`, clipping the last step, reporting each
/// step's diagnostics to the callback.
pub fn run_until(
    state: &mut FieldState,
    mesh: &Mesh,
    bc: &BoundarySpec,
    params: &PhysParams,
    model: ModelKind,
    cfl: f64,
    t_end: f64,
    mut on_step: impl FnMut(&FieldState, &StepDiagnostics),
) -> Result<()> {
    while state.time < t_end {
        let remaining = t_end - state.time;
        let faces = solve_faces(state, mesh, bc, params, model)?;
        let tau = tau_from_faces(&faces, mesh, params, cfl).min(remaining);
        let (minus, mut diag) = apply_hyperbolic(state, mesh, &faces, tau, params)?;
        let sourced = source_step(&minus, tau, params)?;
        let next = if params.nu_s > 0.0 {
            viscous_step(&sourced, mesh, bc, tau, params.nu_s)?
        } else {
            sourced
        };
        let mut max_residual: f64 = 0.0;
        for (i, (q0, q1)) in state.cells.iter().zip(next.cells.iter()).enumerate() {
            let s0 = entropy(q0, params)?;
            let s1 = entropy(q1, params)?;
            let rel = (s1 - s0 + tau * diag.cell_entropy_flux[i])
                / entropy_residual_scale(s0, s1, tau, diag.cell_entropy_flux[i]);
            diag.cell_entropy_residual[i] = rel;
            if diag.cell_faces_ok[i] {
                max_residual = max_residual.max(rel);
            }
        }
        diag.max_entropy_residual = max_residual;
        let (mass, momentum, ent) = crate::diagnostics::totals(&next, mesh, params)?;
        diag.time = next.time;
        diag.mass = mass;
        diag.momentum = momentum;
        diag.entropy = ent;
        *state = next;
        on_step(state, &diag);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_mesh, EdgeCondition};

    fn rest_params() -> PhysParams {
        PhysParams::default()
    }

    #[test]
    fn uniform_rest_state_is_a_fixed_point() {
        let mesh = build_cartesian_mesh(8, 8, 1.0, 1.0).unwrap();
        let bc = BoundarySpec::outflow();
        let params = rest_params();
        let state = FieldState::uniform(&mesh, &PrimitiveState::rest(1.0)).unwrap();
        for model in [ModelKind::Svucm, ModelKind::Svtm] {
            let tau = compute_timestep(&state, &mesh, &bc, &params, model, 0.9).unwrap();
            let (next, _) = hyperbolic_step(&state, &mesh, &bc, tau, &params, model).unwrap();
            for (a, b) in state.cells.iter().zip(next.cells.iter()) {
                for k in 0..7 {
                    assert!((a.0[k] - b.0[k]).abs() < 1e-14);
                }
            }
            let (after, _, _) = advance(&state, &mesh, &bc, &params, model, 0.9).unwrap();
            for (a, b) in state.cells.iter().zip(after.cells.iter()) {
                for k in 0..7 {
                    assert!((a.0[k] - b.0[k]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn uniform_moving_state_is_unchanged() {
        let mesh = build_cartesian_mesh(6, 6, 1.0, 1.0).unwrap();
        let bc = BoundarySpec::uniform(EdgeCondition::TranslationInvariant { along: (1, -1) });
        let params = rest_params();
        let p = PrimitiveState::new(1.0, 0.7, -0.3, 1.2, 0.9, 0.1, 1.1);
        let state = FieldState::uniform(&mesh, &p).unwrap();
        for model in [ModelKind::Svucm, ModelKind::Svtm] {
            let tau = compute_timestep(&state, &mesh, &bc, &params, model, 0.9).unwrap();
            let (next, _) = hyperbolic_step(&state, &mesh, &bc, tau, &params, model).unwrap();
            for (a, b) in state.cells.iter().zip(next.cells.iter()) {
                for k in 0..7 {
                    assert!((a.0[k] - b.0[k]).abs() < 1e-13, "component {k}");
                }
            }
        }
    }

    #[test]
    fn timestep_matches_rest_state_speeds() {
        // Uniform rest state, C = I, g = G = 10: the fan speeds are
        // +-c_par/h = +-sqrt(50), so tau = cfl dx / (4 sqrt(50)).
        let mesh = build_cartesian_mesh(32, 32, 1.0, 1.0).unwrap();
        let bc = BoundarySpec::outflow();
        let params = rest_params();
        let state = FieldState::uniform(&mesh, &PrimitiveState::rest(1.0)).unwrap();
        let tau = compute_timestep(&state, &mesh, &bc, &params, ModelKind::Svtm, 1.0).unwrap();
        let expected = (1.0 / 32.0) / (4.0 * 50.0_f64.sqrt());
        assert!((tau - expected).abs() < 1e-15 * expected.abs().max(1.0), "{tau} vs {expected}");
    }

    #[test]
    fn mass_and_momentum_budgets_close() {
        // Dam-break data on a small diagonal-invariant grid: one step keeps
        // total mass and momentum consistent with the boundary ledgers.
        let mesh = build_cartesian_mesh(12, 12, 1.0, 1.0).unwrap();
        let bc = BoundarySpec::translation_invariant_diagonal();
        let params = rest_params();
        let ic = |x: f64, y: f64| {
            if x + y < 1.0 {
                PrimitiveState::rest(3.0)
            } else {
                PrimitiveState::rest(1.0)
            }
        };
        for model in [ModelKind::Svucm, ModelKind::Svtm] {
            let mut state = FieldState::from_fn(&mesh, ic).unwrap();
            for _ in 0..5 {
                let (m0, p0, _) = crate::diagnostics::totals(&state, &mesh, &params).unwrap();
                let (next, tau, diag) = advance(&state, &mesh, &bc, &params, model, 0.9).unwrap();
                let (m1, p1, _) = crate::diagnostics::totals(&next, &mesh, &params).unwrap();
                let dm = m1 - m0 + tau * diag.boundary_mass_flux;
                assert!(dm.abs() <= 1e-13 * m0.abs(), "mass defect {dm:.3e}");
                for c in 0..2 {
                    let dp = p1[c] - p0[c] + tau * diag.boundary_momentum_flux[c];
                    let scale = tau * diag.boundary_momentum_flux[c].abs() + m0;
                    assert!(dp.abs() <= 1e-12 * scale, "momentum defect {dp:.3e}");
                }
                state = next;
            }
        }
    }

    #[test]
    fn source_only_dynamics_decouple_at_zero_elasticity() {
        // With G = 0 and a non-equilibrium C, depth and velocity stay fixed
        // while C relaxes geometrically with ratio 1/(1 + tau/lambda).
        let mesh = build_cartesian_mesh(4, 4, 1.0, 1.0).unwrap();
        let bc = BoundarySpec::outflow();
        let params = PhysParams { elastic: 0.0, ..PhysParams::default() };
        let p = PrimitiveState::new(1.0, 0.0, 0.0, 3.0, 2.0, 0.5, 2.0);
        let state = FieldState::uniform(&mesh, &p).unwrap();
        let (next, tau, _) = advance(&state, &mesh, &bc, &params, ModelKind::Svtm, 0.9).unwrap();
        let pn = next.cells[0].to_primitive().unwrap();
        assert!((pn.h - 1.0).abs() < 1e-13);
        assert!(pn.u.abs() < 1e-13);
        let f = 1.0 / (1.0 + tau / params.lambda);
        assert!((pn.c_zz - (2.0 + tau / params.lambda) * f).abs() < 1e-12);
        assert!((pn.c_xy - 0.5 * f).abs() < 1e-12);
    }

    #[test]
    fn entropy_residual_is_nonpositive_on_dam_break() {
        let mesh = build_cartesian_mesh(16, 16, 1.0, 1.0).unwrap();
        let bc = BoundarySpec::translation_invariant_diagonal();
        let params = rest_params();
        let ic = |x: f64, y: f64| {
            if x + y < 1.0 {
                PrimitiveState::rest(3.0)
            } else {
                PrimitiveState::rest(1.0)
            }
        };
        for model in [ModelKind::Svucm, ModelKind::Svtm] {
            let mut state = FieldState::from_fn(&mesh, ic).unwrap();
            for _ in 0..20 {
                let (next, _, diag) = advance(&state, &mesh, &bc, &params, model, 0.9).unwrap();
                assert!(
                    diag.max_entropy_residual <= 1e-10,
                    "entropy residual {:.3e} ({model})",
                    diag.max_entropy_residual
                );
                assert!(diag.min_admissibility_margin > 0.0);
                state = next;
            }
        }
    }

    #[test]
    fn cfl_violation_is_detected() {
        let mesh = build_cartesian_mesh(4, 4, 1.0, 1.0).unwrap();
        let bc = BoundarySpec::outflow();
        let params = rest_params();
        let state = FieldState::uniform(&mesh, &PrimitiveState::rest(1.0)).unwrap();
        let tau = compute_timestep(&state, &mesh, &bc, &params, ModelKind::Svtm, 1.0).unwrap();
        let res = hyperbolic_step(&state, &mesh, &bc, 3.0 * tau, &params, ModelKind::Svtm);
        assert!(matches!(res, Err(Error::CflViolated { .. })));
    }

    #[test]
    fn viscous_step_behaviour() {
        let mesh = build_cartesian_mesh(16, 4, 1.0, 0.25).unwrap();
        let bc = BoundarySpec::uniform(EdgeCondition::TranslationInvariant { along: (0, 1) });
        // Uniform velocity: diffusion is exactly zero.
        let p = PrimitiveState::new(1.0, 0.3, -0.2, 1.0, 1.0, 0.0, 1.0);
        let state = FieldState::uniform(&mesh, &p).unwrap();
        let next = viscous_step(&state, &mesh, &bc, 1e-4, 0.1).unwrap();
        for (a, b) in state.cells.iter().zip(next.cells.iter()) {
            assert!((a.0[1] - b.0[1]).abs() < 1e-15);
        }
        // nu_s = 0 is the identity.
        let next = viscous_step(&state, &mesh, &bc, 1e-4, 0.0).unwrap();
        assert_eq!(state.cells[3].0, next.cells[3].0);
        // Stability guard.
        assert!(matches!(
            viscous_step(&state, &mesh, &bc, 1.0, 0.1),
            Err(Error::DiffusionCflViolated { .. })
        ));
    }

    #[test]
    fn viscous_decay_matches_heat_kernel() {
        // U = cos(pi x) is the Neumann eigenfunction of the copy-ghost
        // stencil; its amplitude decays like exp(-nu pi^2 t) as dx -> 0.
        let n = 128;
        let mesh = build_cartesian_mesh(n, 1, 1.0, 1.0 / n as f64).unwrap();
        let bc = BoundarySpec::uniform(EdgeCondition::TranslationInvariant { along: (0, 1) });
        let nu = 0.05;
        let mut state = FieldState::from_fn(&mesh, |x, _| {
            PrimitiveState::new(1.0, (std::f64::consts::PI * x).cos(), 0.0, 1.0, 1.0, 0.0, 1.0)
        })
        .unwrap();
        let tau = 0.9 * mesh.dx * mesh.dx / (8.0 * nu);
        let t_end = 0.3;
        let mut t = 0.0;
        while t < t_end {
            let step = tau.min(t_end - t);
            state = viscous_step(&state, &mesh, &bc, step, nu).unwrap();
            t += step;
        }
        let amp = state
            .cells
            .iter()
            .map(|q| q.velocity()[0].abs())
            .fold(0.0_f64, f64::max);
        let expected = (-nu * std::f64::consts::PI.powi(2) * t_end).exp();
        assert!(
            (amp - expected).abs() <= 0.01 * expected,
            "amplitude {amp} vs heat-kernel {expected}"
        );
    }
}
