//! Error bounds for balanced truncation.
//!
//! The TLBT bound is
//! `ε² = tr(C P C^T) + tr(C1 P_r C1^T) - 2 tr(C P_M C1^T)` and guarantees
//! `max_{t ≤ T} ||y(t) - y_r(t)||_2 ≤ ε ||u||_{L²(0,T)}`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::balancing::{balance_all, ReducedModel, DEFAULT_VERIFICATION_CAP};
use crate::error::{MorError, Result};
use crate::gramians::{
    mixed_gramian_horizon, reduced_gramian_horizon, GramianSet, Horizon,
};
use crate::linalg::{trace_of_product, Matrix};
use crate::system::{LinearModel, StateSpaceSystem};

/// Negative radicands down to `-CLAMP_WINDOW * tr(C P C^T)` are rounded to zero.
pub const CLAMP_WINDOW: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    /// `tr(C P C^T)`.
    pub term_cpc: f64,
    /// `tr(C1 P_r C1^T)`.
    pub term_cprc: f64,
    /// `tr(C P_M C1^T)`.
    pub term_cpmc: f64,
    /// The unclamped `ε²`.
    pub radicand: f64,
    pub alt_leading: Option<f64>,
    pub alt_remainder: Option<f64>,
    pub alt_last: Option<f64>,
    pub horizon: Horizon,
    pub r: usize,
}

impl BoundReport {
    pub fn epsilon_squared(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// `alt_leading + alt_remainder + alt_last` when the second representation was computed.
    pub fn alt_epsilon_squared(&self) -> Option<f64> {
        Some(self.alt_leading? + self.alt_remainder? + self.alt_last?)
    }
}

fn assemble(
    term_cpc: f64,
    term_cprc: f64,
    term_cpmc: f64,
    horizon: Horizon,
    r: usize,
) -> Result<BoundReport> {
    let radicand = term_cpc + term_cprc - 2.0 * term_cpmc;
    if !radicand.is_finite() {
        return Err(MorError::NonFinite("error bound radicand".into()));
    }
    let window = CLAMP_WINDOW * term_cpc.abs();
    let epsilon = if radicand >= 0.0 {
        radicand.sqrt()
    } else if radicand >= -window {
        0.0
    } else {
        return Err(MorError::NumericalInconsistency { radicand, window });
    };
    Ok(BoundReport {
        epsilon,
        term_cpc,
        term_cprc,
        term_cpmc,
        radicand,
        alt_leading: None,
        alt_remainder: None,
        alt_last: None,
        horizon,
        r,
    })
}

fn rom_terms(
    sys: &StateSpaceSystem,
    rom: &ReducedModel,
    horizon: Horizon,
) -> Result<(Matrix, Matrix, f64, f64)> {
    let pr = reduced_gramian_horizon(rom, horizon)?;
    let pm = mixed_gramian_horizon(sys, rom, horizon)?;
    let cprc = trace_of_product(&(&rom.c1 * &pr), &rom.c1.transpose());
    let cpmc = trace_of_product(&(sys.c() * &pm), &rom.c1.transpose());
    Ok((pr, pm, cprc, cpmc))
}

fn check_p(sys: &StateSpaceSystem, p: &Matrix) -> Result<()> {
    if p.shape() != (sys.n(), sys.n()) {
        return Err(MorError::dim(
            "P",
            format!("expected {0}x{0}, got {1}x{2}", sys.n(), p.nrows(), p.ncols()),
        ));
    }
    Ok(())
}

/// The TLBT bound `ε` for `rom` on `[0, tbar]`, given the time-limited `P`.
pub fn tlbt_h2_bound(
    sys: &StateSpaceSystem,
    rom: &ReducedModel,
    p: &Matrix,
    tbar: f64,
) -> Result<BoundReport> {
    check_p(sys, p)?;
    let horizon = Horizon::Finite(tbar);
    let (_, _, cprc, cpmc) = rom_terms(sys, rom, horizon)?;
    let cpc = trace_of_product(&(sys.c() * p), &sys.c().transpose());
    assemble(cpc, cprc, cpmc, horizon, rom.r)
}

/// As [`tlbt_h2_bound`] with `tr(C P C^T)` replaced by `||C Z||_F²` for `P ≈ Z Z^T`.
pub fn tlbt_h2_bound_lowrank(
    sys: &StateSpaceSystem,
    rom: &ReducedModel,
    z: &Matrix,
    tbar: f64,
) -> Result<BoundReport> {
    if z.nrows() != sys.n() {
        return Err(MorError::dim("Z", format!("expected {} rows", sys.n())));
    }
    let horizon = Horizon::Finite(tbar);
    let (_, _, cprc, cpmc) = rom_terms(sys, rom, horizon)?;
    let cz = sys.c() * z;
    assemble(cz.norm_squared(), cprc, cpmc, horizon, rom.r)
}

/// Norms entering the product bounds on the remainder term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderDiagnostics {
    pub norm_f1: f64,
    pub norm_g1: f64,
    pub norm_g: f64,
    pub norm_pm: f64,
    pub trace_sigma1: f64,
    pub trace_pr: f64,
    /// `[||G1|| ||G|| ||P_M||, ||F1||² tr Σ1, ||G1||² tr P_r]`, bounding
    /// `|tr(G1^T G P_M)|`, `tr(F1 F1^T Σ1)` and `tr(G1^T G1 P_r)` respectively.
    pub upper_bounds: [f64; 3],
    /// `2 ub[0] + ub[1] + ub[2] ≥ |R|`, accounting for the factor 2 in `R`.
    pub remainder_bound: f64,
}

/// Everything the balanced-coordinate representation needs.
struct BalancedParts {
    report: BoundReport,
    diagnostics: RemainderDiagnostics,
}

fn verification_error(e: MorError) -> MorError {
    match e {
        MorError::Degenerate(msg) => MorError::VerificationUnavailable(msg),
        MorError::NotPsd { min_eig } => MorError::VerificationUnavailable(format!(
            "indefinite Gramian (eigenvalue {min_eig:e})"
        )),
        other => other,
    }
}

fn rows(m: &Matrix, start: usize, count: usize) -> Matrix {
    m.rows(start, count).into_owned()
}

fn balanced_parts(
    sys: &StateSpaceSystem,
    gramians: &GramianSet,
    r: usize,
    cap: usize,
) -> Result<BalancedParts> {
    let n = sys.n();
    if n > cap {
        return Err(MorError::VerificationUnavailable(format!(
            "order {n} exceeds the verification cap {cap}"
        )));
    }
    if r == 0 || r > n {
        return Err(MorError::Order {
            requested: r,
            available: n,
        });
    }
    check_p(sys, &gramians.p)?;
    // Rows of S are the columns of E^T W and columns of S^{-1} those of V.
    // States with singular values below the cutoff only enter through
    // Σ_2-weighted terms and are left out.
    let bal = balance_all(gramians, sys).map_err(verification_error)?;
    let nhat = bal.available_order();
    if r > nhat && r != n {
        return Err(MorError::Order {
            requested: r,
            available: nhat,
        });
    }
    // For r = n every numerically relevant state is kept.
    let r = r.min(nhat);
    let sigma = &bal.singular_values;
    let s = match sys.e() {
        Some(e) => bal.w.transpose() * e,
        None => bal.w.transpose(),
    };
    let s_inv = &bal.v;
    let sf = sys.standard_form()?;
    let ab = &s * sf.a.as_ref() * s_inv;
    let bb = &s * sf.b.as_ref();
    let cb = sf.c * s_inv;
    let k = nhat - r;
    let rom = ReducedModel {
        a11: ab.view((0, 0), (r, r)).into_owned(),
        b1: rows(&bb, 0, r),
        c1: cb.columns(0, r).into_owned(),
        r,
        horizon: gramians.horizon,
        parent_name: sys.name.clone(),
    };
    let a21 = ab.view((r, 0), (k, r)).into_owned();
    let b2 = rows(&bb, r, k);
    let sigma1 = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&sigma[..r]));
    let sigma2 = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&sigma[r..]));

    let (pr, pm, cprc, cpmc) = rom_terms(sys, &rom, gramians.horizon)?;
    let cpc = trace_of_product(&(sf.c * &gramians.p), &sf.c.transpose());
    let mut report = assemble(cpc, cprc, cpmc, gramians.horizon, r)?;

    let pm2 = rows(&(&s * &pm), r, k);
    let inner = &b2 * b2.transpose() + 2.0 * &pm2 * a21.transpose();
    let leading = trace_of_product(&sigma2, &inner);

    let (remainder, last, diagnostics) = match &gramians.horizon_data {
        Some(hd) => {
            let fb = &s * &hd.f_std;
            let gb = &hd.g * s_inv;
            let f1 = rows(&fb, 0, r);
            let g1 = gb.columns(0, r).into_owned();
            let fr = crate::linalg::expm(&rom.a11, hd.tbar)? * &rom.b1;
            let t_gp = trace_of_product(&g1.transpose(), &(&hd.g * &pm));
            let t_gpr = trace_of_product(&(g1.transpose() * &g1), &pr);
            let t_fs = trace_of_product(&(&f1 * f1.transpose()), &sigma1);
            let remainder = -2.0 * t_gp + t_gpr + t_fs;
            let d = &f1 - &fr;
            let last = -trace_of_product(&(&d * d.transpose()), &sigma1);
            let norm_f1 = f1.norm();
            let norm_g1 = g1.norm();
            let norm_g = hd.g.norm();
            let norm_pm = pm.norm();
            let trace_sigma1 = sigma1.trace();
            let trace_pr = pr.trace();
            let ub = [
                norm_g1 * norm_g * norm_pm,
                norm_f1 * norm_f1 * trace_sigma1,
                norm_g1 * norm_g1 * trace_pr,
            ];
            let diagnostics = RemainderDiagnostics {
                norm_f1,
                norm_g1,
                norm_g,
                norm_pm,
                trace_sigma1,
                trace_pr,
                upper_bounds: ub,
                remainder_bound: 2.0 * ub[0] + ub[1] + ub[2],
            };
            (remainder, last, diagnostics)
        }
        None => (
            0.0,
            0.0,
            RemainderDiagnostics {
                norm_f1: 0.0,
                norm_g1: 0.0,
                norm_g: 0.0,
                norm_pm: pm.norm(),
                trace_sigma1: sigma1.trace(),
                trace_pr: pr.trace(),
                upper_bounds: [0.0; 3],
                remainder_bound: 0.0,
            },
        ),
    };
    report.alt_leading = Some(leading);
    report.alt_remainder = Some(remainder);
    report.alt_last = Some(last);
    Ok(BalancedParts {
        report,
        diagnostics,
    })
}

/// Both representations of `ε²`, computed from the balanced realization
/// truncated to order `r`. Needs definite Gramians and `n` within the cap.
pub fn tlbt_h2_bound_alt(
    sys: &StateSpaceSystem,
    gramians: &GramianSet,
    r: usize,
    tbar: f64,
) -> Result<BoundReport> {
    tlbt_h2_bound_alt_capped(sys, gramians, r, tbar, DEFAULT_VERIFICATION_CAP)
}

pub fn tlbt_h2_bound_alt_capped(
    sys: &StateSpaceSystem,
    gramians: &GramianSet,
    r: usize,
    tbar: f64,
    cap: usize,
) -> Result<BoundReport> {
    require_horizon(gramians, tbar)?;
    Ok(balanced_parts(sys, gramians, r, cap)?.report)
}

pub fn remainder_diagnostics(
    sys: &StateSpaceSystem,
    gramians: &GramianSet,
    r: usize,
    tbar: f64,
) -> Result<RemainderDiagnostics> {
    require_horizon(gramians, tbar)?;
    if gramians.p.iter().all(|&v| v == 0.0) {
        // Nothing is reachable: F, P_M, P_r and Σ all vanish.
        let norm_g = gramians.horizon_data.as_ref().map_or(0.0, |hd| hd.g.norm());
        return Ok(RemainderDiagnostics {
            norm_f1: 0.0,
            norm_g1: 0.0,
            norm_g,
            norm_pm: 0.0,
            trace_sigma1: 0.0,
            trace_pr: 0.0,
            upper_bounds: [0.0; 3],
            remainder_bound: 0.0,
        });
    }
    Ok(balanced_parts(sys, gramians, r, DEFAULT_VERIFICATION_CAP)?.diagnostics)
}

fn require_horizon(gramians: &GramianSet, tbar: f64) -> Result<()> {
    match gramians.horizon {
        Horizon::Finite(t) if t == tbar && gramians.horizon_data.is_some() => Ok(()),
        other => Err(MorError::InvalidArgument(format!(
            "Gramians were computed for horizon {other}, not {tbar}"
        ))),
    }
}

/// `2 (σ_{r+1} + … + σ_n)`.
pub fn bt_hinf_bound(hankel_values: &[f64], r: usize) -> Result<f64> {
    if r > hankel_values.len() {
        return Err(MorError::Order {
            requested: r,
            available: hankel_values.len(),
        });
    }
    Ok(2.0 * hankel_values[r..].iter().sum::<f64>())
}

/// `tr(Σ2 (B2 B2^T + 2 P_M,2 A21^T))` from the infinite-horizon balanced realization.
pub fn bt_h2_bound_infinite(sys: &StateSpaceSystem, gramians: &GramianSet, r: usize) -> Result<f64> {
    if gramians.horizon != Horizon::Infinite {
        return Err(MorError::InvalidArgument(
            "infinite-horizon bound needs infinite Gramians".into(),
        ));
    }
    if r == 0 {
        return Err(MorError::InvalidArgument("reduced order must be at least 1".into()));
    }
    let parts = balanced_parts(sys, gramians, r, DEFAULT_VERIFICATION_CAP)?;
    Ok(parts.report.alt_leading.unwrap_or(0.0))
}

type CMatrix = DMatrix<Complex<f64>>;

fn complexify(m: &Matrix) -> CMatrix {
    m.map(|v| Complex::new(v, 0.0))
}

fn transfer(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    e: Option<&Matrix>,
    omega: f64,
) -> Result<CMatrix> {
    let n = a.nrows();
    let shift = Complex::new(0.0, omega);
    let e = match e {
        Some(e) => complexify(e),
        None => CMatrix::identity(n, n),
    };
    let pencil = e * shift - complexify(a);
    let x = pencil
        .lu()
        .solve(&complexify(b))
        .ok_or_else(|| MorError::Singular(format!("i*{omega}*E - A")))?;
    Ok(complexify(c) * x)
}

/// `max_ω σ_max(G(iω) - G_r(iω))` over the given frequencies.
pub fn hinf_error_sampled(
    sys: &StateSpaceSystem,
    rom: &ReducedModel,
    frequencies: &[f64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &w in frequencies {
        let full = transfer(sys.a(), sys.b(), sys.c(), sys.e(), w)?;
        let red = transfer(&rom.a11, &rom.b1, &rom.c1, None, w)?;
        let diff = full - red;
        let s = diff.singular_values().max();
        if !s.is_finite() {
            return Err(MorError::NonFinite(format!("transfer function at ω = {w}")));
        }
        worst = worst.max(s);
    }
    Ok(worst)
}

/// Sampled `σ_max(G(iω) - G_r(iω))` for truncation of a balanced realization
/// `(a, b, c)` to its leading `r` states.
///
/// The error is evaluated as `C̃ (iω I - Ã)^{-1} B̃` with
/// `Ã = A22 + A21 K A12`, `B̃ = B2 + A21 K B1`, `C̃ = C2 + C1 K A12` and
/// `K = (iω I - A11)^{-1}`. Unlike the difference of two transfer functions
/// this does not cancel, so errors far below `ε ‖G‖` are still resolved.
pub fn truncation_error_sampled(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    r: usize,
    frequencies: &[f64],
) -> Result<f64> {
    let n = a.nrows();
    if r == 0 || r > n {
        return Err(MorError::Order { requested: r, available: n });
    }
    if r == n {
        return Ok(0.0);
    }
    let k = n - r;
    let block = |m: &Matrix, at: (usize, usize), shape: (usize, usize)| {
        complexify(&m.view(at, shape).into_owned())
    };
    let (a11, a12) = (block(a, (0, 0), (r, r)), block(a, (0, r), (r, k)));
    let (a21, a22) = (block(a, (r, 0), (k, r)), block(a, (r, r), (k, k)));
    let (b1, b2) = (block(b, (0, 0), (r, b.ncols())), block(b, (r, 0), (k, b.ncols())));
    let (c1, c2) = (block(c, (0, 0), (c.nrows(), r)), block(c, (0, r), (c.nrows(), k)));
    let mut worst = 0.0f64;
    for &w in frequencies {
        let shift = Complex::new(0.0, w);
        let lu = (CMatrix::identity(r, r) * shift - &a11).lu();
        let singular = || MorError::Singular(format!("i*{w}*I - A11"));
        let ka12 = lu.solve(&a12).ok_or_else(singular)?;
        let kb1 = lu.solve(&b1).ok_or_else(singular)?;
        let schur = CMatrix::identity(k, k) * shift - &a22 - &a21 * &ka12;
        let bt = &b2 + &a21 * kb1;
        let ct = &c2 + &c1 * ka12;
        let x = schur
            .lu()
            .solve(&bt)
            .ok_or_else(|| MorError::Singular(format!("Schur complement at ω = {w}")))?;
        let s = (ct * x).singular_values().max();
        if !s.is_finite() {
            return Err(MorError::NonFinite(format!("error transfer function at ω = {w}")));
        }
        worst = worst.max(s);
    }
    Ok(worst)
}
