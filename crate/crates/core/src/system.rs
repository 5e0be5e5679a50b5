//! LTI systems `E x' = A x + B u`, `y = C x` with `x(0) = 0`.

use std::borrow::Cow;

use crate::error::{MorError, Result};
use crate::linalg::{ensure_finite, inverse, lu_solve, Matrix};

/// Reciprocal-condition threshold below which `E` counts as singular.
pub const E_RCOND_TOL: f64 = 1e-12;

/// Anything that can be simulated: a realization `(E, A, B, C)`.
pub trait LinearModel {
    fn a(&self) -> &Matrix;
    fn b(&self) -> &Matrix;
    fn c(&self) -> &Matrix;
    /// Mass matrix; `None` means identity.
    fn e(&self) -> Option<&Matrix> {
        None
    }

    fn order(&self) -> usize {
        self.a().nrows()
    }
    fn inputs(&self) -> usize {
        self.b().ncols()
    }
    fn outputs(&self) -> usize {
        self.c().nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    e: Option<Matrix>,
    pub name: String,
}

/// The realization `(E^{-1} A, E^{-1} B, C)`; borrowed when `E` is absent.
#[derive(Debug, Clone)]
pub struct StandardForm<'a> {
    pub a: Cow<'a, Matrix>,
    pub b: Cow<'a, Matrix>,
    pub c: &'a Matrix,
}

impl StateSpaceSystem {
    /// Validates dimensions, finiteness and (when present) nonsingularity of `E`.
    pub fn new(
        name: impl Into<String>,
        a: Matrix,
        b: Matrix,
        c: Matrix,
        e: Option<Matrix>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(MorError::dim(
                "A",
                format!("expected a nonempty square matrix, got {}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(MorError::dim(
                "B",
                format!("expected {n}xm with m >= 1, got {}x{}", b.nrows(), b.ncols()),
            ));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(MorError::dim(
                "C",
                format!("expected px{n} with p >= 1, got {}x{}", c.nrows(), c.ncols()),
            ));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        if let Some(e) = &e {
            if e.shape() != (n, n) {
                return Err(MorError::dim(
                    "E",
                    format!("expected {n}x{n}, got {}x{}", e.nrows(), e.ncols()),
                ));
            }
            ensure_finite(e, "E")?;
            let sv = e.clone().svd(false, false).singular_values;
            let (lo, hi) = (sv.min(), sv.max());
            if hi == 0.0 || lo / hi < E_RCOND_TOL {
                return Err(MorError::Singular(format!(
                    "E (reciprocal condition {:e})",
                    if hi == 0.0 { 0.0 } else { lo / hi }
                )));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            e,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn standard_form(&self) -> Result<StandardForm<'_>> {
        match &self.e {
            None => Ok(StandardForm {
                a: Cow::Borrowed(&self.a),
                b: Cow::Borrowed(&self.b),
                c: &self.c,
            }),
            Some(e) => Ok(StandardForm {
                a: Cow::Owned(lu_solve(e, &self.a, "E")?),
                b: Cow::Owned(lu_solve(e, &self.b, "E")?),
                c: &self.c,
            }),
        }
    }
}

impl LinearModel for StateSpaceSystem {
    fn a(&self) -> &Matrix {
        &self.a
    }
    fn b(&self) -> &Matrix {
        &self.b
    }
    fn c(&self) -> &Matrix {
        &self.c
    }
    fn e(&self) -> Option<&Matrix> {
        self.e.as_ref()
    }
}

/// Finite-difference 1D heat equation on the unit interval with Dirichlet
/// boundaries: `A = (n+1)^2 tridiag(1, -2, 1)`, `B` the first `m` columns of
/// the identity, `C` the last `p` rows of the identity.
///
/// The input/output placement is a convention of this crate; it stands in for
/// benchmark models whose `B` and `C` are only known by their dimensions.
pub fn generate_heat_model(n: usize, m: usize, p: usize) -> Result<StateSpaceSystem> {
    if n < 3 {
        return Err(MorError::InvalidArgument(format!(
            "heat model needs n >= 3, got {n}"
        )));
    }
    if m == 0 || m > n || p == 0 || p > n {
        return Err(MorError::InvalidArgument(format!(
            "heat model needs 1 <= m, p <= n (n = {n}, m = {m}, p = {p})"
        )));
    }
    let h2 = ((n + 1) * (n + 1)) as f64;
    let a = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * h2
        } else if i.abs_diff(j) == 1 {
            h2
        } else {
            0.0
        }
    });
    let b = Matrix::from_fn(n, m, |i, j| if i == j { 1.0 } else { 0.0 });
    let c = Matrix::from_fn(p, n, |i, j| if j == n - p + i { 1.0 } else { 0.0 });
    StateSpaceSystem::new(format!("heat-n{n}-m{m}-p{p}"), a, b, c, None)
}

/// `(S A S^{-1}, S B, C S^{-1})`.
pub fn apply_state_transform(sys: &StateSpaceSystem, s: &Matrix) -> Result<StateSpaceSystem> {
    if sys.e().is_some() {
        return Err(MorError::InvalidArgument(
            "state transforms are only supported for systems without E".into(),
        ));
    }
    let n = sys.n();
    if s.shape() != (n, n) {
        return Err(MorError::dim(
            "transform S",
            format!("expected {n}x{n}, got {}x{}", s.nrows(), s.ncols()),
        ));
    }
    let s_inv = inverse(s, "transform S")?;
    StateSpaceSystem::new(
        sys.name.clone(),
        s * sys.a() * &s_inv,
        s * sys.b(),
        sys.c() * &s_inv,
        None,
    )
}
