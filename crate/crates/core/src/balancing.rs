//! Square-root balanced truncation.
//!
//! With factors `P = Z_P Z_P^T`, `Q = Z_Q Z_Q^T` and the SVD
//! `Z_P^T E^T Z_Q = U Σ Y^T`, the projections are
//! `V = Z_P U_1 Σ_1^{-1/2}` and `W = Z_Q Y_1 Σ_1^{-1/2}`, so that `W^T E V = I`.

use nalgebra::DVector;

use crate::error::{MorError, Result};
use crate::gramians::{GramianSet, Horizon, PSD_TOL};
use crate::linalg::{ensure_square, spd_factor_with, Matrix};
use crate::system::{LinearModel, StateSpaceSystem};

/// Singular values below `SIGMA_TOL * σ_1` are not counted towards `n̂`.
pub const SIGMA_TOL: f64 = 1e-14;

/// Largest order for which the full balancing transform is formed.
pub const DEFAULT_VERIFICATION_CAP: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub a11: Matrix,
    pub b1: Matrix,
    pub c1: Matrix,
    pub r: usize,
    pub horizon: Horizon,
    pub parent_name: String,
}

impl LinearModel for ReducedModel {
    fn a(&self) -> &Matrix {
        &self.a11
    }
    fn b(&self) -> &Matrix {
        &self.b1
    }
    fn c(&self) -> &Matrix {
        &self.c1
    }
}

#[derive(Debug, Clone)]
pub struct BalancingResult {
    /// `σ_1 ≥ … ≥ σ_n̂ > 0`.
    pub singular_values: Vec<f64>,
    pub v: Matrix,
    pub w: Matrix,
    /// `(S, S^{-1})` when the full transform was requested.
    pub transform: Option<(Matrix, Matrix)>,
    pub horizon: Horizon,
    pub r: usize,
}

impl BalancingResult {
    /// `n̂`, the number of numerically nonzero singular values.
    pub fn available_order(&self) -> usize {
        self.singular_values.len()
    }

    pub fn tail_sum(&self) -> f64 {
        self.singular_values.get(self.r..).map_or(0.0, |t| t.iter().sum())
    }
}

fn factor(m: &Matrix, given: Option<&Matrix>) -> Result<Matrix> {
    match given {
        Some(z) => Ok(z.clone()),
        None => spd_factor_with(m, 0.0, PSD_TOL),
    }
}

/// Balances `sys` with respect to `gramians` and keeps `r` states.
///
/// `r = n` always succeeds; `V` and `W` then carry only the `n̂` balanced
/// directions and [`truncate`] returns the system unchanged.
pub fn balance(gramians: &GramianSet, sys: &StateSpaceSystem, r: usize) -> Result<BalancingResult> {
    balance_impl(gramians, sys, Some(r))
}

/// Balances and keeps all `n̂` states with numerically nonzero singular values.
pub fn balance_all(gramians: &GramianSet, sys: &StateSpaceSystem) -> Result<BalancingResult> {
    balance_impl(gramians, sys, None)
}

fn balance_impl(
    gramians: &GramianSet,
    sys: &StateSpaceSystem,
    r: Option<usize>,
) -> Result<BalancingResult> {
    let n = sys.n();
    if gramians.p.shape() != (n, n) || gramians.q.shape() != (n, n) {
        return Err(MorError::dim(
            "Gramians",
            format!("expected {n}x{n} matching the system order"),
        ));
    }
    let zp = factor(&gramians.p, gramians.lowrank_p.as_ref())?;
    let zq = factor(&gramians.q, gramians.lowrank_q.as_ref())?;
    if zp.ncols() == 0 || zq.ncols() == 0 {
        return Err(MorError::Degenerate(
            "a Gramian is zero, so no state is both reachable and observable".into(),
        ));
    }
    let m = match sys.e() {
        Some(e) => zp.transpose() * e.transpose() * &zq,
        None => zp.transpose() * &zq,
    };
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;
    let sigma1 = sv.max();
    if !(sigma1 > 0.0) {
        return Err(MorError::Degenerate("all singular values vanish".into()));
    }
    let singular_values: Vec<f64> = sv.iter().copied().filter(|&s| s > SIGMA_TOL * sigma1).collect();
    let nhat = singular_values.len();
    let r = r.unwrap_or(nhat);
    // r = n truncates nothing and is allowed even when n̂ < n.
    if r == 0 || (r > nhat && r != n) {
        return Err(MorError::Order {
            requested: r,
            available: nhat,
        });
    }
    let k = r.min(nhat);
    let scale = DVector::from_iterator(k, singular_values[..k].iter().map(|s| s.sqrt().recip()));
    let v = zp * u.columns(0, k) * Matrix::from_diagonal(&scale);
    let w = zq * vt.rows(0, k).transpose() * Matrix::from_diagonal(&scale);
    Ok(BalancingResult {
        singular_values,
        v,
        w,
        transform: None,
        horizon: gramians.horizon,
        r,
    })
}

/// Full transform for positive definite `P`, `Q` (standard form).
///
/// Returns `(S, S^{-1}, σ)` with `S P S^T = S^{-T} Q S^{-1} = diag(σ)`.
pub fn full_balancing_transform(p: &Matrix, q: &Matrix) -> Result<(Matrix, Matrix, Vec<f64>)> {
    ensure_square(p, "P")?;
    ensure_square(q, "Q")?;
    let n = p.nrows();
    if q.nrows() != n {
        return Err(MorError::dim("Q", format!("expected {n}x{n}")));
    }
    let lp = spd_factor_with(p, 0.0, PSD_TOL)?;
    if lp.ncols() < n {
        return Err(MorError::RankDeficient(format!("P (numerical rank {} < {n})", lp.ncols())));
    }
    let lq = spd_factor_with(q, 0.0, PSD_TOL)?;
    if lq.ncols() < n {
        return Err(MorError::RankDeficient(format!("Q (numerical rank {} < {n})", lq.ncols())));
    }
    let svd = (lp.transpose() * &lq).svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sigma[n - 1] <= SIGMA_TOL * sigma[0] {
        return Err(MorError::RankDeficient(format!(
            "P Q (singular value ratio {:e})",
            sigma[n - 1] / sigma[0]
        )));
    }
    let scale = Matrix::from_diagonal(&DVector::from_iterator(
        n,
        sigma.iter().map(|s| s.sqrt().recip()),
    ));
    let s = &scale * vt * lq.transpose();
    let s_inv = lp * u * &scale;
    Ok((s, s_inv, sigma))
}

impl BalancingResult {
    /// Attaches the full transform computed from `gramians` (standard form).
    pub fn with_transform(mut self, gramians: &GramianSet, cap: usize) -> Result<Self> {
        let n = gramians.p.nrows();
        if n > cap {
            return Err(MorError::VerificationUnavailable(format!(
                "order {n} exceeds the verification cap {cap}"
            )));
        }
        let (s, s_inv, _) = full_balancing_transform(&gramians.p, &gramians.q_std)?;
        self.transform = Some((s, s_inv));
        Ok(self)
    }
}

/// `A11 = W^T A V`, `B1 = W^T B`, `C1 = C V`.
///
/// When nothing is truncated (`r = n`) the standard-form realization
/// `(E^{-1}A, E^{-1}B, C)` itself is returned; it is similar to the balanced one.
pub fn truncate(sys: &StateSpaceSystem, bal: &BalancingResult) -> Result<ReducedModel> {
    if bal.v.nrows() != sys.n() || bal.w.nrows() != sys.n() {
        return Err(MorError::dim(
            "balancing result",
            format!(
                "projections have {} rows, system has order {}",
                bal.v.nrows(),
                sys.n()
            ),
        ));
    }
    if bal.r == sys.n() {
        let sf = sys.standard_form()?;
        return Ok(ReducedModel {
            a11: sf.a.into_owned(),
            b1: sf.b.into_owned(),
            c1: sf.c.clone(),
            r: bal.r,
            horizon: bal.horizon,
            parent_name: sys.name.clone(),
        });
    }
    let wt = bal.w.transpose();
    Ok(ReducedModel {
        a11: &wt * sys.a() * &bal.v,
        b1: &wt * sys.b(),
        c1: sys.c() * &bal.v,
        r: bal.r,
        horizon: bal.horizon,
        parent_name: sys.name.clone(),
    })
}

/// Smallest `r ≥ 1` with `σ_{r+1} + … + σ_n̂ ≤ τ`.
pub fn select_order(singular_values: &[f64], tau: f64) -> Result<usize> {
    if singular_values.is_empty() {
        return Err(MorError::InvalidArgument("no singular values to select from".into()));
    }
    if !(tau >= 0.0) {
        return Err(MorError::InvalidArgument(format!("tolerance must be nonnegative, got {tau}")));
    }
    for r in 1..singular_values.len() {
        let tail: f64 = singular_values[r..].iter().sum();
        if tail <= tau {
            return Ok(r);
        }
    }
    Ok(singular_values.len())
}
