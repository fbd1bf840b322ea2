//! Everything that differs between the two constitutive models.
//!
//! SVUCM uses the upper-convected rate and `Sigma = G (C - I)`; SVTM uses the
//! Cotter-Rivlin rate on the inverse deformation and `Sigma = G (I - C)`.
//! Both share the admissible domain, the equilibrium `C = I` and the free
//! energy, but the strongly transported quantities swap the roles of `c_xx`
//! and `c_zz` and the transverse strain variable carried by the Riemann
//! solver differs:
//!
//! | model | psi        | P_perp       | a^2 (smooth) | b            |
//! |-------|------------|--------------|--------------|--------------|
//! | SVTM  | c_xy / h   | G h^2 psi    | c_xx         | 2 G h^2 c_xy |
//! | SVUCM | -h c_xy    | G psi        | c_xx h^2     | 0            |

use crate::state::{elastic_potential, PhysParams, PrimitiveState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Svucm,
    Svtm,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Svucm => "svucm",
            ModelKind::Svtm => "svtm",
        }
    }

    /// Sign of `Sigma` relative to `G (C - I)`: +1 for SVUCM, -1 for SVTM.
    pub fn stress_sign(&self) -> f64 {
        match self {
            ModelKind::Svucm => 1.0,
            ModelKind::Svtm => -1.0,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Specific stress tensor `(Sigma_h, Sigma_zz)`; zero at `C = I`.
pub fn stress(p: &PrimitiveState, elastic: f64, model: ModelKind) -> ([f64; 3], f64) {
    let s = model.stress_sign() * elastic;
    ([s * (p.c_xx - 1.0), s * (p.c_yy - 1.0), s * p.c_xy], s * (p.c_zz - 1.0))
}

/// Smooth-case pressures and relaxation coefficients of the 1D subsystems.
///
/// These are the starting values of the per-interface parameter search, not
/// the final solver parameters.
#[derive(Debug, Clone, Copy)]
pub struct ModelCoefficients {
    /// Longitudinal pressure `P_par`.
    pub p_par: f64,
    /// Transverse pressure `P_perp`.
    pub p_perp: f64,
    /// Smooth value of `c_par^2`.
    pub c_par_sq: f64,
    /// Smooth value of `c_perp^2`.
    pub c_perp_sq: f64,
    /// Smooth value of `a^2`.
    pub a_sq: f64,
    /// Transverse coupling coefficient (zero for SVUCM).
    pub b: f64,
    /// Transverse strain variable carried by the solver.
    pub psi: f64,
}

pub fn model_coefficients(
    p: &PrimitiveState,
    params: &PhysParams,
    model: ModelKind,
) -> ModelCoefficients {
    let g = params.gravity;
    let ge = params.elastic;
    let h = p.h;
    let h2 = h * h;
    match model {
        ModelKind::Svtm => ModelCoefficients {
            p_par: 0.5 * g * h2 + ge * h * (p.c_xx - p.c_zz),
            p_perp: ge * h * p.c_xy,
            c_par_sq: h2 * (g * h + ge * (3.0 * p.c_xx + p.c_zz)),
            c_perp_sq: ge * h2 * p.c_xx,
            a_sq: p.c_xx,
            b: 2.0 * ge * h2 * p.c_xy,
            psi: p.c_xy / h,
        },
        ModelKind::Svucm => ModelCoefficients {
            p_par: 0.5 * g * h2 + ge * h * (p.c_zz - p.c_xx),
            p_perp: -ge * h * p.c_xy,
            c_par_sq: h2 * (g * h + ge * (3.0 * p.c_zz + p.c_xx)),
            c_perp_sq: ge * h2 * p.c_xx,
            a_sq: p.c_xx * h2,
            b: 0.0,
            psi: -h * p.c_xy,
        },
    }
}

/// `dP_par/dh` at frozen strong invariants; enters the solver initialization.
pub fn dp_par_dh(p: &PrimitiveState, params: &PhysParams, model: ModelKind) -> f64 {
    let g = params.gravity;
    let ge = params.elastic;
    match model {
        ModelKind::Svtm => g * p.h + ge * (3.0 * p.c_xx + p.c_zz),
        ModelKind::Svucm => g * p.h + ge * (3.0 * p.c_zz + p.c_xx),
    }
}

/// The three quantities transported unchanged across the whole fan on each
/// side of an interface Riemann problem.
///
/// SVTM: `(c_xx / h^2, h^2 c_zz, c_yy - c_xy^2 / c_xx)`;
/// SVUCM swaps the roles of `c_xx` and `c_zz`.
pub fn strong_invariants(p: &PrimitiveState, model: ModelKind) -> (f64, f64, f64) {
    let h2 = p.h * p.h;
    let i3 = p.c_yy - p.c_xy * p.c_xy / p.c_xx;
    match model {
        ModelKind::Svtm => (p.c_xx / h2, h2 * p.c_zz, i3),
        ModelKind::Svucm => (h2 * p.c_xx, p.c_zz / h2, i3),
    }
}

/// Backward-Euler integration of the friction and relaxation sources over a
/// step `tau`:
///
/// ```text
/// U   <- U / (1 + tau k)
/// C   <- (C + (tau/lambda) I) / (1 + tau/lambda)
/// ```
///
/// A convex combination toward the identity, so admissibility is preserved
/// for every `tau >= 0`. The depth is untouched.
pub fn relax_source_step(p: &PrimitiveState, tau: f64, params: &PhysParams) -> PrimitiveState {
    let fu = 1.0 / (1.0 + tau * params.friction);
    let r = tau / params.lambda;
    let fc = 1.0 / (1.0 + r);
    PrimitiveState {
        h: p.h,
        u: p.u * fu,
        v: p.v * fu,
        c_xx: (p.c_xx + r) * fc,
        c_yy: (p.c_yy + r) * fc,
        c_xy: p.c_xy * fc,
        c_zz: (p.c_zz + r) * fc,
    }
}

/// Relaxation dissipation `D = G (tr C_h + tr C_h^-1 + c_zz + 1/c_zz - 6) / (2 lambda)`,
/// nonnegative and zero exactly at `C = I`.
pub fn dissipation(p: &PrimitiveState, params: &PhysParams) -> f64 {
    let tr = p.c_xx + p.c_yy;
    let tr_inv = tr / p.det_ch();
    0.5 * params.elastic / params.lambda * (tr + tr_inv + p.c_zz + 1.0 / p.c_zz - 6.0)
}

/// Eigenvalue diagnostic of the Johnson-Segalman family with slip parameter
/// `zeta` in `[0, 2]`; only `zeta = 0` (the upper-convected case) is
/// unconditionally hyperbolic on the admissible domain.
#[derive(Debug, Clone, Copy)]
pub struct JsEigenvalues {
    /// `Delta = 2 g h + G (2 (3 - 2 zeta) c_zz + zeta c_yy - 3 zeta c_xx)`.
    pub delta: f64,
    /// Margin of the reality condition (inner radicand slack); eigenvalues
    /// are real iff it is nonnegative.
    pub margin: f64,
    /// The four non-contact eigenvalues, sorted, when real.
    pub eigenvalues: Option<[f64; 4]>,
}

impl JsEigenvalues {
    pub fn is_hyperbolic(&self) -> bool {
        self.eigenvalues.is_some()
    }
}

pub fn js_eigenvalues(p: &PrimitiveState, params: &PhysParams, zeta: f64) -> JsEigenvalues {
    let g = params.gravity;
    let ge = params.elastic;
    let delta = 2.0 * g * p.h
        + ge * (2.0 * (3.0 - 2.0 * zeta) * p.c_zz + zeta * p.c_yy - 3.0 * zeta * p.c_xx);
    let b = ge * ((4.0 - 2.0 * zeta) * p.c_xx - 2.0 * zeta * p.c_yy);
    let coupling = ge * 4.0 * zeta * p.c_xy;
    let inner = (delta * delta + coupling * coupling).sqrt();
    // Both outer radicands delta + b -+ inner must be nonnegative; the minus
    // branch is binding.
    let margin = delta + b - inner;
    if margin < 0.0 {
        return JsEigenvalues { delta, margin, eigenvalues: None };
    }
    let s_slow = 0.5 * margin.sqrt();
    let s_fast = 0.5 * (delta + b + inner).sqrt();
    JsEigenvalues {
        delta,
        margin,
        eigenvalues: Some([p.u - s_fast, p.u - s_slow, p.u + s_slow, p.u + s_fast]),
    }
}

/// One elastic term of the free energy; re-exported for condition checks.
pub fn ecal(x: f64) -> f64 {
    elastic_potential(x)
}
