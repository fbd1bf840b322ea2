//! Physical and conserved state representations shared by both models.
//!
//! The per-cell physical fields are the depth `h`, the horizontal velocity
//! `(u, v)`, the horizontal conformation tensor `C_h = [[c_xx, c_xy], [c_xy,
//! c_yy]]` and the vertical component `c_zz`. The scheme does not update the
//! physical fields directly but the vector
//!
//! ```text
//! q = (H, HU, HV, H C_xx, H C_yy, H C_xy / sqrt(C_xx C_yy), H C_zz)
//! ```
//!
//! whose admissible set `q1, q4, q5, q7 > 0, |q6| < q1` is convex and on
//! which the mathematical entropy `S = H E` is convex.

use crate::error::Error;
use crate::Result;

/// Positivity floor below which logarithms and divisions are refused.
const POSITIVITY_FLOOR: f64 = 1e-300;

/// Physical parameters of the flow.
///
/// `gravity` is g, `elastic` the specific elastic modulus G, `lambda` the
/// relaxation time, `friction` the Saint-Venant rugosity k and `nu_s` the
/// optional solvent viscosity (zero in the core models).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub gravity: f64,
    pub elastic: f64,
    pub lambda: f64,
    pub friction: f64,
    pub nu_s: f64,
}

impl PhysParams {
    pub fn new(gravity: f64, elastic: f64, lambda: f64) -> Self {
        Self { gravity, elastic, lambda, friction: 0.0, nu_s: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gravity > 0.0
            && self.elastic >= 0.0
            && self.lambda > 0.0
            && self.friction >= 0.0
            && self.nu_s >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange { line: 0, msg: format!("invalid physical parameters {self:?}") })
        }
    }
}

impl Default for PhysParams {
    /// Dam-break defaults: g = 10, G = 10, lambda = 1, k = 0, nu_s = 0.
    fn default() -> Self {
        Self { gravity: 10.0, elastic: 10.0, lambda: 1.0, friction: 0.0, nu_s: 0.0 }
    }
}

/// Per-cell physical fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveState {
    pub h: f64,
    pub u: f64,
    pub v: f64,
    pub c_xx: f64,
    pub c_yy: f64,
    pub c_xy: f64,
    pub c_zz: f64,
}

/// Convex finite-volume discretization vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedState(pub [f64; 7]);

/// Outcome of an admissibility check: one signed margin per inequality,
/// positive when satisfied.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityReport {
    /// Margins of `q1 > 0`, `q4 > 0`, `q5 > 0`, `q7 > 0`, `q1 - |q6| > 0`.
    pub margins: [f64; 5],
    /// Magnitude scale of the checked components.
    pub scale: f64,
}

pub const CONSTRAINT_NAMES: [&str; 5] = ["q1 > 0", "q4 > 0", "q5 > 0", "q7 > 0", "|q6| < q1"];

impl AdmissibilityReport {
    /// Exact inequality check (strict positivity of every margin).
    pub fn is_admissible(&self) -> bool {
        self.margins.iter().all(|&m| m > 0.0)
    }

    /// Scale-relative check that tolerates round-off near the boundary of
    /// the domain.
    pub fn is_numerically_admissible(&self) -> bool {
        let tol = 1e-13 * self.scale;
        self.margins.iter().all(|&m| m > tol)
    }

    /// Violated inequalities with their (non-positive) margins.
    pub fn violations(&self) -> Vec<(&'static str, f64)> {
        self.margins
            .iter()
            .enumerate()
            .filter(|(_, &m)| m <= 0.0)
            .map(|(i, &m)| (CONSTRAINT_NAMES[i], m))
            .collect()
    }

    pub fn first_violation(&self) -> Option<(&'static str, f64)> {
        self.violations().into_iter().next()
    }

    /// Worst (smallest) margin.
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

impl PrimitiveState {
    pub fn new(h: f64, u: f64, v: f64, c_xx: f64, c_yy: f64, c_xy: f64, c_zz: f64) -> Self {
        Self { h, u, v, c_xx, c_yy, c_xy, c_zz }
    }

    /// Rest state with identity conformation.
    pub fn rest(h: f64) -> Self {
        Self::new(h, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0)
    }

    pub fn det_ch(&self) -> f64 {
        self.c_xx * self.c_yy - self.c_xy * self.c_xy
    }

    fn margins(&self) -> [f64; 5] {
        [self.h, self.c_xx, self.c_yy, self.c_zz, self.det_ch()]
    }

    pub fn is_admissible(&self) -> bool {
        self.margins().iter().all(|&m| m > 0.0)
    }

    pub fn check_admissible(&self) -> Result<()> {
        const NAMES: [&str; 5] = ["h > 0", "c_xx > 0", "c_yy > 0", "c_zz > 0", "det C_h > 0"];
        let margins = self.margins();
        for (i, &m) in margins.iter().enumerate() {
            if !(m > POSITIVITY_FLOOR) {
                return Err(Error::InadmissibleState { constraint: NAMES[i], margin: m });
            }
        }
        Ok(())
    }

    pub fn to_conserved(&self) -> Result<ConservedState> {
        self.check_admissible()?;
        let q6 = self.h * self.c_xy / (self.c_xx * self.c_yy).sqrt();
        Ok(ConservedState([
            self.h,
            self.h * self.u,
            self.h * self.v,
            self.h * self.c_xx,
            self.h * self.c_yy,
            q6,
            self.h * self.c_zz,
        ]))
    }
}

impl ConservedState {
    pub fn h(&self) -> f64 {
        self.0[0]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.0[1] / self.0[0], self.0[2] / self.0[0]]
    }

    pub fn admissibility(&self) -> AdmissibilityReport {
        let q = &self.0;
        let margins = [q[0], q[3], q[4], q[6], q[0] - q[5].abs()];
        let scale =
            q[0].abs().max(q[3].abs()).max(q[4].abs()).max(q[5].abs()).max(q[6].abs()).max(1e-30);
        AdmissibilityReport { margins, scale }
    }

    pub fn is_admissible(&self) -> bool {
        self.admissibility().is_admissible()
    }

    pub fn to_primitive(&self) -> Result<PrimitiveState> {
        let report = self.admissibility();
        if let Some((constraint, margin)) = report.first_violation() {
            return Err(Error::InadmissibleState { constraint, margin });
        }
        let q = &self.0;
        if q[0] < POSITIVITY_FLOOR {
            return Err(Error::InadmissibleState { constraint: "q1 > 0", margin: q[0] });
        }
        let h = q[0];
        let c_xx = q[3] / h;
        let c_yy = q[4] / h;
        // c_xy = (q6 / q1) sqrt(c_xx c_yy), the exact inverse of the q6 map.
        let c_xy = q[5] / h * (c_xx * c_yy).sqrt();
        Ok(PrimitiveState {
            h,
            u: q[1] / h,
            v: q[2] / h,
            c_xx,
            c_yy,
            c_xy,
            c_zz: q[6] / h,
        })
    }

    pub fn add_scaled(&mut self, coeff: f64, other: &[f64; 7]) {
        for k in 0..7 {
            self.0[k] += coeff * other[k];
        }
    }
}

/// `x - ln x - 1`, the convex elastic energy density of one conformation
/// component.
pub fn elastic_potential(x: f64) -> f64 {
    x - x.ln() - 1.0
}

/// Specific free energy `E = (u^2 + v^2)/2 + g h / 2 + (G/2) tr(C - ln C - I)`
/// where the trace runs over `C_h` and `c_zz` and `tr ln C_h = ln det C_h`.
pub fn free_energy(p: &PrimitiveState, params: &PhysParams) -> Result<f64> {
    p.check_admissible()?;
    let kinetic = 0.5 * (p.u * p.u + p.v * p.v);
    let potential = 0.5 * params.gravity * p.h;
    let det = p.det_ch();
    let elastic = 0.5
        * params.elastic
        * ((p.c_xx + p.c_yy - det.ln() - 2.0) + elastic_potential(p.c_zz));
    Ok(kinetic + potential + elastic)
}

/// Splits the internal part of the free energy into the longitudinal and
/// transverse contributions used by the relaxation solver:
///
/// ```text
/// e_par  = g h / 2 + (G/2) [ (c_xx - ln c_xx - 1) + (c_zz - ln c_zz - 1) ]
/// e_perp = (G/2) c_xy^2 / c_xx + (G/2) (i3 - ln i3 - 1),   i3 = c_yy - c_xy^2/c_xx
/// ```
///
/// so that `(u^2 + v^2)/2 + e_par + e_perp = free_energy` exactly (the
/// determinant factors as `c_xx * i3`).
pub fn energy_split(p: &PrimitiveState, params: &PhysParams) -> Result<(f64, f64)> {
    p.check_admissible()?;
    let half_g = 0.5 * params.elastic;
    let e_par = 0.5 * params.gravity * p.h
        + half_g * (elastic_potential(p.c_xx) + elastic_potential(p.c_zz));
    let i3 = p.c_yy - p.c_xy * p.c_xy / p.c_xx;
    let e_perp = half_g * p.c_xy * p.c_xy / p.c_xx + half_g * elastic_potential(i3);
    Ok((e_par, e_perp))
}

/// Mathematical entropy `S = H E` of a conserved state.
pub fn entropy(q: &ConservedState, params: &PhysParams) -> Result<f64> {
    let p = q.to_primitive()?;
    Ok(p.h * free_energy(&p, params)?)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    /// Random admissible state with O(1) margins, suitable for exact-inequality
    /// property tests.
    pub fn random_state(rng: &mut impl Rng) -> PrimitiveState {
        let h: f64 = rng.gen_range(0.1..5.0);
        let u: f64 = rng.gen_range(-3.0..3.0);
        let v: f64 = rng.gen_range(-3.0..3.0);
        let c_xx: f64 = rng.gen_range(0.05..8.0);
        let c_yy: f64 = rng.gen_range(0.05..8.0);
        let rho: f64 = rng.gen_range(-0.95..0.95);
        let c_xy = rho * (c_xx * c_yy).sqrt();
        let c_zz: f64 = rng.gen_range(0.05..8.0);
        PrimitiveState::new(h, u, v, c_xx, c_yy, c_xy, c_zz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn assert_close(a: f64, b: f64, tol: f64) {
        let scale = a.abs().max(b.abs()).max(1.0);
        assert!((a - b).abs() <= tol * scale, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn conversion_matches_hand_values() {
        let q = PrimitiveState::rest(1.0).to_conserved().unwrap();
        assert_eq!(q.0, [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0]);

        // Dam-break deep state.
        let q = PrimitiveState::rest(3.0).to_conserved().unwrap();
        assert_eq!(q.0, [3.0, 0.0, 0.0, 3.0, 3.0, 0.0, 3.0]);

        // Sheared state: q6 = 2 * 1 / sqrt(4 * 1) = 1.
        let p = PrimitiveState::new(2.0, 1.0, -1.0, 4.0, 1.0, 1.0, 2.0);
        let q = p.to_conserved().unwrap();
        assert_eq!(q.0, [2.0, 2.0, -2.0, 8.0, 2.0, 1.0, 4.0]);

        let back = q.to_primitive().unwrap();
        assert_close(back.c_xy, 1.0, 1e-15);
        assert_close(back.u, 1.0, 1e-15);
    }

    #[test]
    fn inverse_recovers_stoker_left_state() {
        let q = ConservedState([3.0, 0.0, 0.0, 3.0, 3.0, 0.0, 3.0]);
        let p = q.to_primitive().unwrap();
        assert_eq!((p.h, p.u, p.v), (3.0, 0.0, 0.0));
        assert_eq!((p.c_xx, p.c_yy, p.c_xy, p.c_zz), (3.0 / 3.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        for _ in 0..100_000 {
            let p = testutil::random_state(&mut rng);
            let q = p.to_conserved().unwrap();
            let back = q.to_primitive().unwrap();
            assert_close(back.h, p.h, 1e-14);
            assert_close(back.u, p.u, 1e-14);
            assert_close(back.v, p.v, 1e-14);
            assert_close(back.c_xx, p.c_xx, 1e-14);
            assert_close(back.c_yy, p.c_yy, 1e-14);
            assert_close(back.c_xy, p.c_xy, 1e-14);
            assert_close(back.c_zz, p.c_zz, 1e-14);
        }
    }

    #[test]
    fn admissible_set_is_convex() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..10_000 {
            let qa = testutil::random_state(&mut rng).to_conserved().unwrap();
            let qb = testutil::random_state(&mut rng).to_conserved().unwrap();
            let theta: f64 = rng.gen_range(0.0..1.0);
            let mut q = [0.0; 7];
            for k in 0..7 {
                q[k] = theta * qa.0[k] + (1.0 - theta) * qb.0[k];
            }
            assert!(ConservedState(q).is_admissible());
        }
    }

    #[test]
    fn entropy_is_midpoint_convex() {
        let mut rng = StdRng::seed_from_u64(11);
        let params = PhysParams::default();
        for _ in 0..10_000 {
            let qa = testutil::random_state(&mut rng).to_conserved().unwrap();
            let qb = testutil::random_state(&mut rng).to_conserved().unwrap();
            let mut qm = [0.0; 7];
            for k in 0..7 {
                qm[k] = 0.5 * (qa.0[k] + qb.0[k]);
            }
            let sa = entropy(&qa, &params).unwrap();
            let sb = entropy(&qb, &params).unwrap();
            let sm = entropy(&ConservedState(qm), &params).unwrap();
            let scale = sa.abs().max(sb.abs()).max(sm.abs());
            assert!(sm <= 0.5 * (sa + sb) + 1e-12 * scale);
        }
    }

    #[test]
    fn free_energy_hand_values() {
        let params = PhysParams { gravity: 10.0, elastic: 10.0, ..PhysParams::default() };
        assert_close(free_energy(&PrimitiveState::rest(1.0), &params).unwrap(), 5.0, 1e-15);
        assert_close(free_energy(&PrimitiveState::rest(3.0), &params).unwrap(), 15.0, 1e-15);

        // Stretched state: E = 5 + 5 (1 - ln 2).
        let p = PrimitiveState::new(1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 1.0);
        let expected = 5.0 + 5.0 * (1.0 - 2.0_f64.ln());
        assert_close(free_energy(&p, &params).unwrap(), expected, 1e-14);
        assert!((free_energy(&p, &params).unwrap() - 6.5343).abs() < 1e-4);
    }

    #[test]
    fn energy_split_hand_values() {
        let params = PhysParams { gravity: 10.0, elastic: 10.0, ..PhysParams::default() };
        let (e_par, e_perp) = energy_split(&PrimitiveState::rest(1.0), &params).unwrap();
        assert_close(e_par, 5.0, 1e-15);
        assert_eq!(e_perp, 0.0);

        let p = PrimitiveState::new(1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 1.0);
        let (e_par, e_perp) = energy_split(&p, &params).unwrap();
        assert_close(e_par, 10.0 - 5.0 * 2.0_f64.ln(), 1e-14);
        assert_eq!(e_perp, 0.0);
    }

    #[test]
    fn energy_split_matches_free_energy() {
        let mut rng = StdRng::seed_from_u64(23);
        let params = PhysParams::default();
        for _ in 0..10_000 {
            let p = testutil::random_state(&mut rng);
            let (e_par, e_perp) = energy_split(&p, &params).unwrap();
            let kinetic = 0.5 * (p.u * p.u + p.v * p.v);
            let e = free_energy(&p, &params).unwrap();
            assert_close(kinetic + e_par + e_perp, e, 1e-13);
        }
    }

    #[test]
    fn admissibility_report_names_violations() {
        let ok = ConservedState([1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        assert!(ok.is_admissible());
        assert!(ok.admissibility().violations().is_empty());

        let bad_q4 = ConservedState([1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 1.0]);
        let violations = bad_q4.admissibility().violations();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].0, "q4 > 0");

        let bad_q6 = ConservedState([1.0, 0.0, 0.0, 1.0, 1.0, 1.5, 1.0]);
        let violations = bad_q6.admissibility().violations();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].0, "|q6| < q1");
        assert!(bad_q6.to_primitive().is_err());
    }
}
