//! Conservation and entropy budgets, the Riemann-invariant audit oracle and
//! cross-section extraction.

use crate::engine::FieldState;
use crate::mesh::Mesh;
use crate::rheology::{dissipation, ModelKind};
use crate::riemann::RiemannFan;
use crate::state::{entropy, PhysParams};
use crate::Result;

/// Per-step audit record.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub time: f64,
    pub tau: f64,
    /// Totals of the updated state.
    pub mass: f64,
    pub momentum: [f64; 2],
    pub entropy: f64,
    /// Outward boundary-flux ledgers (per unit time).
    pub boundary_mass_flux: f64,
    pub boundary_momentum_flux: [f64; 2],
    pub boundary_entropy_flux: f64,
    /// Largest relative residual of the discrete entropy inequality over the
    /// cells whose faces all passed the consistency conditions.
    pub max_entropy_residual: f64,
    /// Faces returned by the parameter search with `entropy_ok = false`.
    pub failed_faces: usize,
    pub total_faces: usize,
    /// Worst admissibility margin over all cells (positive means admissible).
    pub min_admissibility_margin: f64,
    /// Parameter-search work histogram, bucketed by `c_par` doublings
    /// (0, 1, 2, ... >=7).
    pub iteration_histogram: [usize; 8],
    /// Per-cell `sum_j (|Gamma_ij| / |V_i|) G~_ij` of the hyperbolic step.
    pub cell_entropy_flux: Vec<f64>,
    /// Per-cell relative entropy residual (filled by `advance`).
    pub cell_entropy_residual: Vec<f64>,
    /// Per-cell flag: all adjacent faces passed the entropy conditions.
    pub cell_faces_ok: Vec<bool>,
}

impl StepDiagnostics {
    pub fn new(n_cells: usize) -> Self {
        Self {
            time: 0.0,
            tau: 0.0,
            mass: 0.0,
            momentum: [0.0; 2],
            entropy: 0.0,
            boundary_mass_flux: 0.0,
            boundary_momentum_flux: [0.0; 2],
            boundary_entropy_flux: 0.0,
            max_entropy_residual: 0.0,
            failed_faces: 0,
            total_faces: 0,
            min_admissibility_margin: f64::INFINITY,
            iteration_histogram: [0; 8],
            cell_entropy_flux: vec![0.0; n_cells],
            cell_entropy_residual: vec![0.0; n_cells],
            cell_faces_ok: vec![true; n_cells],
        }
    }

    /// Header of the diagnostics time-series CSV.
    pub fn csv_header() -> &'static str {
        "t,tau,mass,momx,momy,entropy,max_residual,failed_faces"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.time,
            self.tau,
            self.mass,
            self.momentum[0],
            self.momentum[1],
            self.entropy,
            self.max_entropy_residual,
            self.failed_faces
        )
    }
}

/// Total mass, momentum and entropy `sum_i |V_i| (H, HU, HV, S)_i`.
pub fn totals(
    state: &FieldState,
    mesh: &Mesh,
    params: &PhysParams,
) -> Result<(f64, [f64; 2], f64)> {
    let vol = mesh.dx * mesh.dy;
    let mut mass = 0.0;
    let mut mom = [0.0; 2];
    let mut ent = 0.0;
    for q in &state.cells {
        mass += q.0[0];
        mom[0] += q.0[1];
        mom[1] += q.0[2];
        ent += entropy(q, params)?;
    }
    Ok((mass * vol, [mom[0] * vol, mom[1] * vol], ent * vol))
}

/// Per-cell residual of the discrete entropy inequality
///
/// ```text
/// S(q^{n+1}) - S(q^n) + tau sum_j (|Gamma|/|V|) G~  <=  -tau k H |U|^2 - tau H D
/// ```
///
/// evaluated with the post-source state on the right-hand side; negative or
/// round-off-positive values are expected wherever the interface conditions
/// passed.
pub fn entropy_budget(
    before: &FieldState,
    after: &FieldState,
    cell_entropy_flux: &[f64],
    tau: f64,
    params: &PhysParams,
) -> Result<Vec<f64>> {
    let mut residuals = Vec::with_capacity(before.cells.len());
    for (i, (qb, qa)) in before.cells.iter().zip(after.cells.iter()).enumerate() {
        let s0 = entropy(qb, params)?;
        let s1 = entropy(qa, params)?;
        let p1 = qa.to_primitive()?;
        let sink = tau
            * p1.h
            * (params.friction * (p1.u * p1.u + p1.v * p1.v) + dissipation(&p1, params));
        residuals.push(s1 - s0 + tau * cell_entropy_flux[i] + sink);
    }
    Ok(residuals)
}

/// Scale used to normalize entropy residuals.
pub fn entropy_residual_scale(s0: f64, s1: f64, tau: f64, gsum: f64) -> f64 {
    s0.abs() + s1.abs() + tau * gsum.abs() + 1e-30
}

/// Maximal relative residual of the weak Riemann invariants across their
/// waves: the correctness oracle of the interface solver.
///
/// Checked per wave family:
/// * `u`, `pi_par` across the inner and contact waves;
/// * `pi_par / c_par^2 + 1/h` and the strong invariants across the outer and
///   inner waves (per side);
/// * `pi_par -+ c_par u` across the outer waves;
/// * `pi_perp + c_par v` / `pi_perp - c_par v` and `b u + (c_perp^2 -
///   c_par^2) v` and `a^2 pi_perp / c_par^2 - psi` across the outer waves;
/// * `pi_perp +- c_perp v` and `a^2 pi_perp / c_perp^2 - psi` across the
///   inner waves;
/// * `v`, `pi_perp` across the contact;
/// * the mass fluxes `h (u - xi)` across the outer waves.
pub fn invariant_audit(fan: &RiemannFan, _model: ModelKind) -> f64 {
    let s = &fan.states;
    let rp = &fan.params;
    let mut worst: f64 = 0.0;
    let resid = |a: f64, b: f64| -> f64 {
        let scale = a.abs().max(b.abs()).max(1.0);
        (a - b).abs() / scale
    };
    macro_rules! check {
        ($a:expr, $b:expr $(,)?) => {
            worst = worst.max(resid($a, $b));
        };
    }

    // Contact and inner waves: u and pi_par are common to all four
    // intermediate states.
    for k in [2, 3, 4] {
        check!(s[1].prim.u, s[k].prim.u);
        check!(s[1].pi_par, s[k].pi_par);
    }
    // Contact: v and pi_perp continuous.
    check!(s[2].prim.v, s[3].prim.v);
    check!(s[2].pi_perp, s[3].pi_perp);

    for (o, e, m) in [(0usize, 0usize, 1usize), (1, 5, 4)] {
        let cp = rp.c_par[o];
        let cperp = rp.c_perp[o];
        let a_sq = rp.a_sq[o];
        let b = rp.b[o];
        let outer = [&s[e], &s[m]];
        // pi_par / c_par^2 + 1/h across the outer wave.
        check!(
            outer[0].pi_par / (cp * cp) + 1.0 / outer[0].prim.h,
            outer[1].pi_par / (cp * cp) + 1.0 / outer[1].prim.h,
        );
        // pi_par -+ c_par u (left outer carries pi + c u, right pi - c u).
        let sign = if o == 0 { 1.0 } else { -1.0 };
        check!(
            outer[0].pi_par + sign * cp * outer[0].prim.u,
            outer[1].pi_par + sign * cp * outer[1].prim.u,
        );
        // Transverse invariants across the outer wave.
        check!(
            outer[0].pi_perp + sign * cp * outer[0].prim.v,
            outer[1].pi_perp + sign * cp * outer[1].prim.v,
        );
        check!(
            b * outer[0].prim.u + (cperp * cperp - cp * cp) * outer[0].prim.v,
            b * outer[1].prim.u + (cperp * cperp - cp * cp) * outer[1].prim.v,
        );
        check!(
            a_sq * outer[0].pi_perp / (cp * cp) - outer[0].psi,
            a_sq * outer[1].pi_perp / (cp * cp) - outer[1].psi,
        );
        // Relaxed-energy invariants across the outer wave.
        check!(
            outer[0].e_par_hat - outer[0].pi_par * outer[0].pi_par / (2.0 * cp * cp),
            outer[1].e_par_hat - outer[1].pi_par * outer[1].pi_par / (2.0 * cp * cp),
        );
        check!(
            outer[0].e_perp_hat - outer[0].pi_perp * outer[0].pi_perp / (2.0 * cp * cp),
            outer[1].e_perp_hat - outer[1].pi_perp * outer[1].pi_perp / (2.0 * cp * cp),
        );
        // Mass flux relative to the outer wave.
        let xi = if o == 0 { fan.speeds[0] } else { fan.speeds[4] };
        check!(outer[0].prim.h * (outer[0].prim.u - xi), sign * cp);
        check!(outer[1].prim.h * (outer[1].prim.u - xi), sign * cp);

        // Inner wave: star vs sharp state of this side.
        let inner = if o == 0 { [&s[1], &s[2]] } else { [&s[4], &s[3]] };
        check!(
            inner[0].pi_perp + sign * cperp * inner[0].prim.v,
            inner[1].pi_perp + sign * cperp * inner[1].prim.v,
        );
        check!(
            a_sq * inner[0].pi_perp / (cperp * cperp) - inner[0].psi,
            a_sq * inner[1].pi_perp / (cperp * cperp) - inner[1].psi,
        );
        check!(
            inner[0].e_perp_hat - inner[0].pi_perp * inner[0].pi_perp / (2.0 * cperp * cperp),
            inner[1].e_perp_hat - inner[1].pi_perp * inner[1].pi_perp / (2.0 * cperp * cperp),
        );
        check!(inner[0].e_par_hat, inner[1].e_par_hat);
        // Strong invariants across all waves of this side.
        let (i1, i2, i3) = fan.invariants[o];
        for st in [outer[0], outer[1], inner[1]] {
            let (j1, j2, j3) = crate::rheology::strong_invariants(&st.prim, fan.model);
            check!(j1, i1);
            check!(j2, i2);
            let shear_scale = st.prim.c_yy.abs() + st.prim.c_xy * st.prim.c_xy / st.prim.c_xx;
            worst = worst.max((j3 - i3).abs() / shear_scale.max(1.0));
        }
    }
    worst
}

/// Sampling line of a cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectionLine {
    /// The diagonal `x = y`, reported against the arc length along it.
    Diagonal,
    /// Vertical cut at `x = c`.
    XEquals(f64),
    /// Horizontal cut at `y = c`.
    YEquals(f64),
}

/// One sampled cross-section row: cell-center values, plus the projections
/// on the diagonal frame when the line is the diagonal.
#[derive(Debug, Clone, Copy)]
pub struct SectionSample {
    /// Arc-length coordinate along the line.
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub prim: crate::state::PrimitiveState,
    /// `U . n`, `U . t`, `C n.n`, `C n.t`, `C t.t` for `n = (1,1)/sqrt(2)`
    /// (zeros for axis-aligned lines).
    pub projected: [f64; 5],
}

/// Extracts the cells nearest to the requested line, in increasing arc
/// length. Samples are cell-center values with no interpolation.
pub fn cross_section(
    state: &FieldState,
    mesh: &Mesh,
    line: SectionLine,
) -> Result<Vec<SectionSample>> {
    let mut out = Vec::new();
    match line {
        SectionLine::Diagonal => {
            let n = mesh.nx.min(mesh.ny);
            for k in 0..n {
                let (x, y) = mesh.cell_center(k, k);
                let q = &state.cells[mesh.cell_index(k, k)];
                let p = q.to_primitive()?;
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                let un = (p.u + p.v) * inv_sqrt2;
                let ut = (p.v - p.u) * inv_sqrt2;
                let cnn = 0.5 * (p.c_xx + p.c_yy) + p.c_xy;
                let cnt = 0.5 * (p.c_yy - p.c_xx);
                let ctt = 0.5 * (p.c_xx + p.c_yy) - p.c_xy;
                out.push(SectionSample {
                    s: (x + y) * inv_sqrt2,
                    x,
                    y,
                    prim: p,
                    projected: [un, ut, cnn, cnt, ctt],
                });
            }
        }
        SectionLine::XEquals(c) => {
            let i = ((c / mesh.dx).floor() as i64).clamp(0, mesh.nx as i64 - 1) as usize;
            for j in 0..mesh.ny {
                let (x, y) = mesh.cell_center(i, j);
                let p = state.cells[mesh.cell_index(i, j)].to_primitive()?;
                out.push(SectionSample { s: y, x, y, prim: p, projected: [0.0; 5] });
            }
        }
        SectionLine::YEquals(c) => {
            let j = ((c / mesh.dy).floor() as i64).clamp(0, mesh.ny as i64 - 1) as usize;
            for i in 0..mesh.nx {
                let (x, y) = mesh.cell_center(i, j);
                let p = state.cells[mesh.cell_index(i, j)].to_primitive()?;
                out.push(SectionSample { s: x, x, y, prim: p, projected: [0.0; 5] });
            }
        }
    }
    Ok(out)
}
