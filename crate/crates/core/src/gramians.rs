//! Infinite and time-limited Gramians, the reduced and mixed Gramians that
//! enter the TLBT error bound, and a quadrature oracle for all of them.
//!
//! Systems with a mass matrix `E` are handled through their standard form
//! `(E^{-1}A, E^{-1}B, C)`. The reachability Gramian is identical in both
//! forms; the observability Gramian of the generalized equation `Q` relates
//! to the standard-form one by `E^T Q E`, and both are kept.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::balancing::ReducedModel;
use crate::error::{MorError, Result};
use crate::linalg::{
    default_separation_tol, eigenvalues, expm, lu_solve, lyapunov_factor, norm2, solve_lyapunov,
    solve_sylvester, spectrum_separation, spd_factor_with, Matrix,
};
use crate::system::{LinearModel, StateSpaceSystem};

/// Gramians may have eigenvalues down to `-PSD_TOL * ||.||_2` from rounding.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn finite(self) -> Option<f64> {
        match self {
            Horizon::Finite(t) => Some(t),
            Horizon::Infinite => None,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Infinite => write!(f, "inf"),
        }
    }
}

/// End-of-horizon terms `F = e^{AT}B`, `G = C e^{AT}`.
#[derive(Debug, Clone)]
pub struct HorizonData {
    pub tbar: f64,
    /// `E e^{E^{-1}AT} E^{-1} B`; plain `e^{AT}B` without `E`.
    pub f: Matrix,
    /// `C e^{E^{-1}AT}`.
    pub g: Matrix,
    /// `e^{E^{-1}AT} E^{-1} B`, the standard-form counterpart of `f`.
    pub f_std: Matrix,
}

#[derive(Debug, Clone)]
pub struct GramianSet {
    pub horizon: Horizon,
    /// Reachability Gramian.
    pub p: Matrix,
    /// Observability Gramian as it solves the (generalized) Lyapunov equation.
    pub q: Matrix,
    /// `E^T Q E`, the observability Gramian of the standard form.
    pub q_std: Matrix,
    pub lowrank_p: Option<Matrix>,
    pub lowrank_q: Option<Matrix>,
    pub horizon_data: Option<HorizonData>,
}

impl GramianSet {
    /// Attaches factors `Z` with `P ≈ Z Z^T` (and likewise for `Q`) truncated at `tol`.
    pub fn with_lowrank(mut self, tol: f64) -> Result<Self> {
        self.lowrank_p = Some(spd_factor_with(&self.p, tol, PSD_TOL)?);
        self.lowrank_q = Some(spd_factor_with(&self.q, tol, PSD_TOL)?);
        Ok(self)
    }
}

fn check_psd(m: &Matrix) -> Result<()> {
    let eig = m.clone().symmetric_eigenvalues();
    let norm = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_eig = eig.min();
    if min_eig < -PSD_TOL * norm {
        return Err(MorError::NotPsd { min_eig });
    }
    Ok(())
}

fn generalized_q(sys: &StateSpaceSystem, q_std: &Matrix) -> Result<Matrix> {
    match sys.e() {
        None => Ok(q_std.clone()),
        Some(e) => {
            // Q = E^{-T} Q_std E^{-1}
            let left = lu_solve(&e.transpose(), q_std, "E^T")?;
            let mut q = lu_solve(&e.transpose(), &left.transpose(), "E^T")?.transpose();
            crate::linalg::symmetrize(&mut q);
            Ok(q)
        }
    }
}

/// Solves `A P + P A^T + B B^T = 0` and `A^T Q + Q A + C^T C = 0`
/// (generalized analogues for systems with `E`).
pub fn infinite_gramians(sys: &StateSpaceSystem) -> Result<GramianSet> {
    let sf = sys.standard_form()?;
    let unstable: Vec<String> = eigenvalues(&sf.a)?
        .into_iter()
        .filter(|z| z.re >= 0.0)
        .map(|z| format!("{:e}{:+e}i", z.re, z.im))
        .collect();
    if !unstable.is_empty() {
        return Err(MorError::NotHurwitz(unstable.join(", ")));
    }
    let p = solve_lyapunov(&sf.a, &-(sf.b.as_ref() * sf.b.transpose()))?;
    let q_std = solve_lyapunov(&sf.a.transpose(), &-(sf.c.transpose() * sf.c))?;
    check_psd(&p)?;
    check_psd(&q_std)?;
    let q = generalized_q(sys, &q_std)?;
    // Square-root factors straight from the equations keep the small Hankel
    // singular values accurate.
    let zp = lyapunov_factor(&sf.a, &sf.b)?;
    let zq_std = lyapunov_factor(&sf.a.transpose(), &sf.c.transpose())?;
    let zq = match sys.e() {
        Some(e) => lu_solve(&e.transpose(), &zq_std, "E^T")?,
        None => zq_std,
    };
    Ok(GramianSet {
        horizon: Horizon::Infinite,
        p,
        q,
        q_std,
        lowrank_p: Some(zp),
        lowrank_q: Some(zq),
        horizon_data: None,
    })
}

fn check_tbar(tbar: f64) -> Result<()> {
    if tbar > 0.0 && tbar.is_finite() {
        Ok(())
    } else {
        Err(MorError::InvalidArgument(format!(
            "time horizon must be positive and finite, got {tbar}"
        )))
    }
}

pub fn horizon_data(sys: &StateSpaceSystem, tbar: f64) -> Result<HorizonData> {
    check_tbar(tbar)?;
    let sf = sys.standard_form()?;
    let e_at = expm(&sf.a, tbar)?;
    let f_std = &e_at * sf.b.as_ref();
    let g = sf.c * &e_at;
    let f = match sys.e() {
        Some(e) => e * &f_std,
        None => f_std.clone(),
    };
    Ok(HorizonData { tbar, f, g, f_std })
}

/// Solves `A P + P A^T + B B^T - F F^T = 0` and
/// `A^T Q + Q A + C^T C - G^T G = 0` with `F = e^{AT}B`, `G = C e^{AT}`.
///
/// `A` need not be Hurwitz; only `Λ(A) ∩ -Λ(A) = ∅` is required.
pub fn time_limited_gramians(sys: &StateSpaceSystem, tbar: f64) -> Result<GramianSet> {
    let hd = horizon_data(sys, tbar)?;
    let sf = sys.standard_form()?;
    let rhs_p = &hd.f_std * hd.f_std.transpose() - sf.b.as_ref() * sf.b.transpose();
    let rhs_q = hd.g.transpose() * &hd.g - sf.c.transpose() * sf.c;
    let p = solve_lyapunov(&sf.a, &rhs_p)?;
    let q_std = solve_lyapunov(&sf.a.transpose(), &rhs_q)?;
    check_psd(&p)?;
    check_psd(&q_std)?;
    let q = generalized_q(sys, &q_std)?;
    Ok(GramianSet {
        horizon: Horizon::Finite(tbar),
        p,
        q,
        q_std,
        lowrank_p: None,
        lowrank_q: None,
        horizon_data: Some(hd),
    })
}

// Four-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// `∫_0^T e^{A1 s} B1 B2^T e^{A2^T s} ds` by composite four-point Gauss–Legendre.
pub fn quadrature_integral(
    a1: &Matrix,
    b1: &Matrix,
    a2: &Matrix,
    b2: &Matrix,
    tbar: f64,
    panels: usize,
) -> Result<Matrix> {
    check_tbar(tbar)?;
    if panels == 0 {
        return Err(MorError::InvalidArgument("quadrature needs at least one panel".into()));
    }
    if b1.ncols() != b2.ncols() || a1.nrows() != b1.nrows() || a2.nrows() != b2.nrows() {
        return Err(MorError::dim(
            "quadrature operands",
            "A1/B1 and A2/B2 must be conforming with equal input counts",
        ));
    }
    let h = tbar / panels as f64;
    let mut acc = Matrix::zeros(a1.nrows(), a2.nrows());
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let s = mid + 0.5 * h * x;
            let left = expm(a1, s)? * b1;
            let right = expm(a2, s)? * b2;
            acc += (0.5 * h * w) * (left * right.transpose());
        }
    }
    Ok(acc)
}

/// Quadrature approximation of the time-limited reachability Gramian.
pub fn gramian_quadrature_oracle(sys: &StateSpaceSystem, tbar: f64, panels: usize) -> Result<Matrix> {
    let sf = sys.standard_form()?;
    quadrature_integral(&sf.a, &sf.b, &sf.a, &sf.b, tbar, panels)
}

fn require_separation(a1: &Matrix, a2: &Matrix, condition: &str) -> Result<()> {
    let sep = spectrum_separation(a1, a2, default_separation_tol(a1, a2))?;
    if sep.is_separated {
        Ok(())
    } else {
        Err(MorError::SpectrumViolation {
            condition: condition.to_string(),
            gap: sep.min_sum_abs,
        })
    }
}

pub(crate) const COND_REDUCED: &str = "Λ(A11) ∩ -Λ(A11) = ∅";
pub(crate) const COND_MIXED: &str = "Λ(A) ∩ -Λ(A11) = ∅";

fn end_term(a: &Matrix, b: &Matrix, horizon: Horizon) -> Result<Option<Matrix>> {
    match horizon {
        Horizon::Finite(t) => {
            check_tbar(t)?;
            Ok(Some(expm(a, t)? * b))
        }
        Horizon::Infinite => Ok(None),
    }
}

/// Reduced Gramian: `A11 P + P A11^T = -B1 B1^T + F_r F_r^T`, `F_r = e^{A11 T} B1`.
/// For an infinite horizon the exponential term is dropped.
pub fn reduced_gramian_horizon(rom: &ReducedModel, horizon: Horizon) -> Result<Matrix> {
    require_separation(&rom.a11, &rom.a11, COND_REDUCED)?;
    let mut rhs = -(&rom.b1 * rom.b1.transpose());
    if let Some(fr) = end_term(&rom.a11, &rom.b1, horizon)? {
        rhs += &fr * fr.transpose();
    }
    solve_lyapunov(&rom.a11, &rhs)
}

pub fn reduced_gramian(rom: &ReducedModel, tbar: f64) -> Result<Matrix> {
    reduced_gramian_horizon(rom, Horizon::Finite(tbar))
}

/// Mixed Gramian: `A P_M + P_M A11^T = -B B1^T + F F_r^T` (standard form for
/// systems with `E`). For an infinite horizon the exponential term is dropped.
pub fn mixed_gramian_horizon(
    sys: &StateSpaceSystem,
    rom: &ReducedModel,
    horizon: Horizon,
) -> Result<Matrix> {
    if rom.b1.ncols() != sys.m() || rom.c1.nrows() != sys.p() {
        return Err(MorError::dim(
            "reduced model",
            format!(
                "inputs/outputs {}x{} do not match the system's {}x{}",
                rom.b1.ncols(),
                rom.c1.nrows(),
                sys.m(),
                sys.p()
            ),
        ));
    }
    let sf = sys.standard_form()?;
    require_separation(&sf.a, &rom.a11, COND_MIXED)?;
    let mut rhs = -(sf.b.as_ref() * rom.b1.transpose());
    if let (Some(f), Some(fr)) = (
        end_term(&sf.a, &sf.b, horizon)?,
        end_term(&rom.a11, &rom.b1, horizon)?,
    ) {
        rhs += f * fr.transpose();
    }
    if rom.a11 == *sf.a && rom.b1 == *sf.b {
        // The mixed equation is then the Lyapunov equation of the system itself.
        return solve_lyapunov(&sf.a, &rhs);
    }
    solve_sylvester(&sf.a, &rom.a11, &rhs)
}

pub fn mixed_gramian(sys: &StateSpaceSystem, rom: &ReducedModel, tbar: f64) -> Result<Matrix> {
    mixed_gramian_horizon(sys, rom, Horizon::Finite(tbar))
}

/// Relative residual of `A X + X A^T - W` for diagnostics.
pub fn lyapunov_residual(a: &Matrix, x: &Matrix, w: &Matrix) -> f64 {
    let scale = w.norm().max(norm2(a) * x.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a * x + x * a.transpose() - w).norm() / scale
    }
}
