//! Dense numerical kernels.
//!
//! Every matrix in the crate is a [`Matrix`] (`nalgebra::DMatrix<f64>`), which
//! stores its entries in column-major order.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen, SVD};

use crate::error::{MorError, Result};

/// Dense real matrix, column-major.
pub type Matrix = DMatrix<f64>;

/// Relative tolerance used when checking that an input is symmetric.
const SYMMETRY_TOL: f64 = 1e-10;

/// Relative factor for the default spectrum-separation tolerance.
pub const SEPARATION_FACTOR: f64 = 1e-8;

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MorError::NonFinite(what.to_string()))
    }
}

pub fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(MorError::dim(
            what,
            format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()),
        ))
    }
}

/// Spectral norm (largest singular value). Empty matrices have norm zero.
pub fn norm2(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// Maximum absolute column sum.
pub fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub(crate) fn is_symmetric(m: &Matrix) -> bool {
    let scale = m.amax();
    if scale == 0.0 {
        return true;
    }
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// Symmetrize in place as `(X + X^T) / 2`; the result is bitwise symmetric.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse via LU with partial pivoting.
pub fn inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    ensure_square(m, what)?;
    m.clone()
        .lu()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| MorError::Singular(what.to_string()))
}

/// Solves `M X = R` via LU with partial pivoting.
pub fn lu_solve(m: &Matrix, rhs: &Matrix, what: &str) -> Result<Matrix> {
    m.clone()
        .lu()
        .solve(rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| MorError::Singular(what.to_string()))
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm thresholds for the diagonal Padé degrees 3, 5, 7, 9 and 13 (Higham 2005).
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Returns `(U, V)` with the Padé approximant `(V - U)^{-1} (V + U)` for
/// degrees up to 9.
fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let a2 = a * a;
    let mut pow = Matrix::identity(n, n);
    let mut odd = Matrix::zeros(n, n);
    let mut even = Matrix::zeros(n, n);
    let half = b.len() / 2;
    for j in 0..half {
        odd += b[2 * j + 1] * &pow;
        even += b[2 * j] * &pow;
        if j + 1 < half {
            pow = &pow * &a2;
        }
    }
    (a * odd, even)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE13;
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
        + b[7] * &a6
        + b[5] * &a4
        + b[3] * &a2
        + b[1] * &id;
    let u = a * inner_u;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
        + b[6] * &a6
        + b[4] * &a4
        + b[2] * &a2
        + b[0] * &id;
    (u, v)
}

/// Matrix exponential `e^{A t}` by scaling and squaring with a diagonal Padé
/// approximant whose degree is chosen from the 1-norm of `A t`.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(a, "expm argument")?;
    if !t.is_finite() {
        return Err(MorError::InvalidArgument(format!(
            "expm time must be finite, got {t}"
        )));
    }
    ensure_finite(a, "expm argument")?;
    let at = a * t;
    let norm = norm1(&at);
    if !norm.is_finite() {
        return Err(MorError::ExpmOverflow { norm });
    }

    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_low(&at, &PADE3);
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_low(&at, &PADE5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_low(&at, &PADE7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_low(&at, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let scaled = &at * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };

    let mut result = lu_solve(&(&v - &u), &(&v + &u), "Pade denominator")
        .map_err(|_| MorError::ExpmOverflow { norm })?;
    for _ in 0..squarings {
        result = &result * &result;
        if !result.iter().all(|v| v.is_finite()) {
            return Err(MorError::ExpmOverflow { norm });
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Real Schur form and spectra
// ---------------------------------------------------------------------------

/// Real Schur form `A = Q T Q^T` with the diagonal block structure of `T`.
struct SchurForm {
    q: Matrix,
    t: Matrix,
    /// `(start, size)` of each diagonal block, size 1 or 2.
    blocks: Vec<(usize, usize)>,
}

impl SchurForm {
    fn new(a: &Matrix, what: &str) -> Result<Self> {
        let n = a.nrows();
        let schur = Schur::try_new(a.clone(), f64::EPSILON, 200 * n.max(10))
            .ok_or_else(|| MorError::NoConvergence(what.to_string()))?;
        let (q, mut t) = schur.unpack();
        for j in 0..n {
            for i in (j + 2)..n {
                t[(i, j)] = 0.0;
            }
        }
        let mut blocks = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        Ok(Self { q, t, blocks })
    }

    fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::with_capacity(self.t.nrows());
        for &(s, size) in &self.blocks {
            if size == 1 {
                out.push(Complex::new(self.t[(s, s)], 0.0));
                continue;
            }
            let (a, b) = (self.t[(s, s)], self.t[(s, s + 1)]);
            let (c, d) = (self.t[(s + 1, s)], self.t[(s + 1, s + 1)]);
            let half_tr = 0.5 * (a + d);
            let half_diff = 0.5 * (a - d);
            let disc = half_diff * half_diff + b * c;
            if disc < 0.0 {
                let im = (-disc).sqrt();
                out.push(Complex::new(half_tr, im));
                out.push(Complex::new(half_tr, -im));
            } else {
                let re = disc.sqrt();
                out.push(Complex::new(half_tr + re, 0.0));
                out.push(Complex::new(half_tr - re, 0.0));
            }
        }
        out
    }
}

/// Eigenvalues of a square matrix (via its real Schur form).
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex<f64>>> {
    ensure_square(a, "eigenvalue argument")?;
    ensure_finite(a, "eigenvalue argument")?;
    Ok(SchurForm::new(a, "eigenvalue argument")?.eigenvalues())
}

/// Largest real part over the spectrum of `a`.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// How far the spectra of two matrices are from cancelling each other.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeparation {
    /// `min |lambda + mu|` over `lambda` in the spectrum of `A1`, `mu` in that of `A2`.
    pub min_sum_abs: f64,
    pub is_separated: bool,
    pub tolerance: f64,
    /// The eigenvalue pair attaining the minimum.
    pub closest_pair: (Complex<f64>, Complex<f64>),
}

/// `1e-8 * (||A1||_2 + ||A2||_2)`.
pub fn default_separation_tol(a1: &Matrix, a2: &Matrix) -> f64 {
    SEPARATION_FACTOR * (norm2(a1) + norm2(a2))
}

fn separation_of(l1: &[Complex<f64>], l2: &[Complex<f64>], tol: f64) -> SpectrumSeparation {
    let mut best = f64::INFINITY;
    let mut pair = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    for &lam in l1 {
        for &mu in l2 {
            let gap = (lam + mu).norm();
            if gap < best {
                best = gap;
                pair = (lam, mu);
            }
        }
    }
    SpectrumSeparation {
        min_sum_abs: best,
        is_separated: best >= tol && best > 0.0,
        tolerance: tol,
        closest_pair: pair,
    }
}

/// Checks `Lambda(A1) ∩ -Lambda(A2) = ∅` numerically.
pub fn spectrum_separation(a1: &Matrix, a2: &Matrix, tol: f64) -> Result<SpectrumSeparation> {
    let l1 = eigenvalues(a1)?;
    let l2 = eigenvalues(a2)?;
    Ok(separation_of(&l1, &l2, tol))
}

fn fmt_complex(z: Complex<f64>) -> String {
    if z.im == 0.0 {
        format!("{:e}", z.re)
    } else {
        format!("{:e}{:+e}i", z.re, z.im)
    }
}

fn require_separated(s1: &SchurForm, s2: &SchurForm, tol: f64) -> Result<()> {
    let sep = separation_of(&s1.eigenvalues(), &s2.eigenvalues(), tol);
    if sep.is_separated {
        Ok(())
    } else {
        Err(MorError::SingularEquation {
            lambda: fmt_complex(sep.closest_pair.0),
            mu: fmt_complex(sep.closest_pair.1),
            gap: sep.min_sum_abs,
            tol,
        })
    }
}

// ---------------------------------------------------------------------------
// Sylvester and Lyapunov equations
// ---------------------------------------------------------------------------

/// Solves `T11 Y + Y T22^T = R` for blocks of size at most 2x2.
fn solve_diagonal_block(t11: &Matrix, t22: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let p = t11.nrows();
    let q = t22.nrows();
    if p == 1 && q == 1 {
        let d = t11[(0, 0)] + t22[(0, 0)];
        if d == 0.0 {
            return Err(MorError::Singular("Sylvester diagonal block".into()));
        }
        return Ok(Matrix::from_element(1, 1, rhs[(0, 0)] / d));
    }
    // Column-major vec: Y[a, b] sits at a + p * b.
    let dim = p * q;
    let mut k = Matrix::zeros(dim, dim);
    for b in 0..q {
        for a in 0..p {
            let row = a + p * b;
            for c in 0..p {
                k[(row, c + p * b)] += t11[(a, c)];
            }
            for d in 0..q {
                k[(row, a + p * d)] += t22[(b, d)];
            }
        }
    }
    let vec_rhs = Matrix::from_column_slice(dim, 1, rhs.as_slice());
    let sol = lu_solve(&k, &vec_rhs, "Sylvester diagonal block")?;
    Ok(Matrix::from_column_slice(p, q, sol.as_slice()))
}

/// Bartels–Stewart back substitution on the quasi-triangular factors.
fn solve_schur_sylvester(s1: &SchurForm, s2: &SchurForm, w: &Matrix) -> Result<Matrix> {
    let n = s1.t.nrows();
    let r = s2.t.nrows();
    let f = s1.q.transpose() * w * &s2.q;
    let mut y = Matrix::zeros(n, r);
    for &(i0, pi) in s1.blocks.iter().rev() {
        let i1 = i0 + pi;
        for &(j0, qj) in s2.blocks.iter().rev() {
            let j1 = j0 + qj;
            let mut rhs = f.view((i0, j0), (pi, qj)).clone_owned();
            if i1 < n {
                rhs -= s1.t.view((i0, i1), (pi, n - i1)) * y.view((i1, j0), (n - i1, qj));
            }
            if j1 < r {
                rhs -= y.view((i0, j1), (pi, r - j1))
                    * s2.t.view((j0, j1), (qj, r - j1)).transpose();
            }
            let t11 = s1.t.view((i0, i0), (pi, pi)).clone_owned();
            let t22 = s2.t.view((j0, j0), (qj, qj)).clone_owned();
            let blk = solve_diagonal_block(&t11, &t22, &rhs)?;
            y.view_mut((i0, j0), (pi, qj)).copy_from(&blk);
        }
    }
    Ok(&s1.q * y * s2.q.transpose())
}

/// Solves `A1 X + X A2^T = W` with the Bartels–Stewart scheme.
///
/// Fails with [`MorError::SingularEquation`] when some eigenvalue pair
/// satisfies `|lambda + mu| < 1e-8 (||A1||_2 + ||A2||_2)`.
pub fn solve_sylvester(a1: &Matrix, a2: &Matrix, w: &Matrix) -> Result<Matrix> {
    ensure_square(a1, "Sylvester A1")?;
    ensure_square(a2, "Sylvester A2")?;
    if w.nrows() != a1.nrows() || w.ncols() != a2.nrows() {
        return Err(MorError::dim(
            "Sylvester right-hand side",
            format!(
                "expected {}x{}, got {}x{}",
                a1.nrows(),
                a2.nrows(),
                w.nrows(),
                w.ncols()
            ),
        ));
    }
    ensure_finite(a1, "Sylvester A1")?;
    ensure_finite(a2, "Sylvester A2")?;
    ensure_finite(w, "Sylvester right-hand side")?;
    let s1 = SchurForm::new(a1, "Sylvester A1")?;
    let s2 = SchurForm::new(a2, "Sylvester A2")?;
    require_separated(&s1, &s2, default_separation_tol(a1, a2))?;
    solve_schur_sylvester(&s1, &s2, w)
}

/// Solves `A X + X A^T = W` for symmetric `W`; the result is exactly symmetric.
pub fn solve_lyapunov(a: &Matrix, w: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Lyapunov A")?;
    if w.shape() != a.shape() {
        return Err(MorError::dim(
            "Lyapunov right-hand side",
            format!(
                "expected {}x{}, got {}x{}",
                a.nrows(),
                a.ncols(),
                w.nrows(),
                w.ncols()
            ),
        ));
    }
    ensure_finite(a, "Lyapunov A")?;
    ensure_finite(w, "Lyapunov right-hand side")?;
    if !is_symmetric(w) {
        return Err(MorError::NotSymmetric("Lyapunov right-hand side".into()));
    }
    let mut w = w.clone();
    symmetrize(&mut w);
    let s = SchurForm::new(a, "Lyapunov A")?;
    let tol = 2.0 * SEPARATION_FACTOR * norm2(a);
    require_separated(&s, &s, tol)?;
    let mut x = solve_schur_sylvester(&s, &s, &w)?;
    symmetrize(&mut x);
    Ok(x)
}

/// Factor `L` (n x n) of the solution `P = L L^T` of `A P + P A^T + B B^T = 0`
/// for Hurwitz `A`, computed without forming `P` (Hammarling's method on the
/// complex Schur form). Small eigenvalues of `P` are then resolved relative to
/// `||L||²` instead of being lost below the rounding level of `||P||`.
pub fn lyapunov_factor(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Lyapunov A")?;
    if b.nrows() != a.nrows() {
        return Err(MorError::dim(
            "Lyapunov factor B",
            format!("expected {} rows, got {}", a.nrows(), b.nrows()),
        ));
    }
    ensure_finite(a, "Lyapunov A")?;
    ensure_finite(b, "Lyapunov B")?;
    let n = a.nrows();
    let cplx = |m: &Matrix| m.map(|v| Complex::new(v, 0.0));
    let schur = Schur::try_new(cplx(a), f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| MorError::NoConvergence("Lyapunov A".into()))?;
    let (u, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex::new(0.0, 0.0);
        }
    }
    let unstable: Vec<String> = (0..n)
        .map(|i| t[(i, i)])
        .filter(|z| z.re >= 0.0)
        .map(fmt_complex)
        .collect();
    if !unstable.is_empty() {
        return Err(MorError::NotHurwitz(unstable.join(", ")));
    }

    // With T = [T1 t; 0 τ] and R = [R1 r; 0 ρ] (P = R R^*) the last row u of
    // the input gives ρ² = -|u|²/(2 Re τ), (T1 + conj(τ)) r = -(t ρ + B1 u^*/ρ),
    // and the leading block solves the same equation with B1 - r u/ρ.
    let mut bh = u.adjoint() * cplx(b);
    let mut r = DMatrix::<Complex<f64>>::zeros(n, n);
    for k in (0..n).rev() {
        let tau = t[(k, k)];
        let row = bh.row(k).clone_owned();
        let rho = (row.norm_squared() / (-2.0 * tau.re)).sqrt();
        r[(k, k)] = Complex::new(rho, 0.0);
        if k == 0 || rho == 0.0 {
            continue;
        }
        let rho_c = Complex::new(rho, 0.0);
        let mut lhs = t.view((0, 0), (k, k)).clone_owned();
        for i in 0..k {
            lhs[(i, i)] += tau.conj();
        }
        let rhs = -(t.view((0, k), (k, 1)) * rho_c + bh.rows(0, k) * row.adjoint() / rho_c);
        let col = lhs
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| MorError::Singular("shifted Schur factor".into()))?;
        let update = &col * &row / rho_c;
        let mut lead = bh.rows_mut(0, k);
        lead -= update;
        r.view_mut((0, k), (k, 1)).copy_from(&col);
    }
    // P = L L^* is real, so P = [Re L, Im L][Re L, Im L]^T; compress by QR.
    let l = u * r;
    let mut z = Matrix::zeros(2 * n, n);
    for i in 0..n {
        for j in 0..n {
            z[(j, i)] = l[(i, j)].re;
            z[(n + j, i)] = l[(i, j)].im;
        }
    }
    Ok(z.qr().r().transpose())
}

// ---------------------------------------------------------------------------
// Factorization of symmetric positive semidefinite matrices
// ---------------------------------------------------------------------------

/// Factor `Z` (n x k) with `P ≈ Z Z^T`, keeping eigenpairs with
/// `lambda > keep_tol ||P||_2` and rejecting eigenvalues below `-neg_tol ||P||_2`.
/// Columns are ordered by decreasing eigenvalue.
pub fn spd_factor_with(p: &Matrix, keep_tol: f64, neg_tol: f64) -> Result<Matrix> {
    ensure_square(p, "PSD factor argument")?;
    ensure_finite(p, "PSD factor argument")?;
    if !is_symmetric(p) {
        return Err(MorError::NotSymmetric("PSD factor argument".into()));
    }
    let n = p.nrows();
    let mut sym = p.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| MorError::NoConvergence("symmetric eigendecomposition".into()))?;
    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return Ok(Matrix::zeros(n, 0));
    }
    let min_eig = eig.eigenvalues.min();
    if min_eig < -neg_tol * norm {
        return Err(MorError::NotPsd { min_eig });
    }
    let mut order: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > keep_tol * norm)
        .collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut z = Matrix::zeros(n, order.len());
    for (col, &i) in order.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        z.set_column(col, &(eig.eigenvectors.column(i) * scale));
    }
    Ok(z)
}

/// Rank-revealing factor `Z` with `||P - Z Z^T||_2 <= 2 tol ||P||_2`.
///
/// Eigenvalues in `[-tol ||P||_2, 0]` are treated as zero.
pub fn spd_factor(p: &Matrix, tol: f64) -> Result<Matrix> {
    spd_factor_with(p, tol, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_stable(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let g = random(n, n, rng);
        let shift = norm2(&g) + 0.5;
        g - Matrix::identity(n, n) * shift
    }

    fn rel_residual(a1: &Matrix, a2: &Matrix, x: &Matrix, w: &Matrix) -> f64 {
        (a1 * x + x * a2.transpose() - w).norm() / w.norm()
    }

    #[test]
    fn lyapunov_factor_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in [1, 4, 9] {
            let a = random_stable(n, &mut rng);
            let b = random(n, 2, &mut rng);
            let l = lyapunov_factor(&a, &b).unwrap();
            let p = solve_lyapunov(&a, &-(&b * b.transpose())).unwrap();
            assert!((&l * l.transpose() - &p).norm() <= 1e-12 * p.norm(), "n = {n}");
        }
        let l = lyapunov_factor(&m(1, 1, &[-1.0]), &m(1, 1, &[1.0])).unwrap();
        assert!((l[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_factor_resolves_tiny_eigenvalues() {
        // Diagonal A with a rapidly decaying input: P = diag(b_i² / (2|a_i|)).
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -3.0]));
        let b = m(3, 1, &[1.0, 1e-9, 1e-15]);
        let l = lyapunov_factor(&a, &b).unwrap();
        let p = &l * l.transpose();
        assert!((p[(2, 2)] - 1e-30 / 6.0).abs() <= 1e-12 * 1e-30);
        assert_eq!(lyapunov_factor(&a, &Matrix::zeros(3, 1)).unwrap(), Matrix::zeros(3, 3));
        assert!(lyapunov_factor(&m(1, 1, &[1.0]), &m(1, 1, &[1.0])).is_err());
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&Matrix::zeros(3, 3), 7.0).unwrap();
        assert_eq!(e, Matrix::identity(3, 3));
    }

    #[test]
    fn expm_nilpotent() {
        let e = expm(&m(2, 2, &[0.0, 1.0, 0.0, 0.0]), 2.0).unwrap();
        let want = m(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!((e - want).amax() < 1e-14);
    }

    #[test]
    fn expm_scalar_half() {
        let e = expm(&m(1, 1, &[-1.0]), 2f64.ln()).unwrap();
        assert!((e[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expm_rotation_uses_all_pade_degrees() {
        // exp([[0, w], [-w, 0]]) is a rotation by w.
        for w in [1e-3, 0.1, 0.5, 1.5, 4.0, 30.0] {
            let e = expm(&m(2, 2, &[0.0, 1.0, -1.0, 0.0]), w).unwrap();
            let want = m(2, 2, &[w.cos(), w.sin(), -w.sin(), w.cos()]);
            assert!((e - want).amax() < 1e-12 * (1.0 + w), "w = {w}");
        }
    }

    #[test]
    fn expm_rejects_nonsquare_and_overflow() {
        assert!(matches!(
            expm(&Matrix::zeros(2, 3), 1.0),
            Err(MorError::Dimension { .. })
        ));
        assert!(matches!(
            expm(&m(1, 1, &[1.0]), 1e6),
            Err(MorError::ExpmOverflow { .. })
        ));
        assert!(matches!(
            expm(&m(1, 1, &[1.0]), f64::NAN),
            Err(MorError::InvalidArgument(_))
        ));
    }

    #[test]
    fn sylvester_scalar() {
        let one = m(1, 1, &[-1.0]);
        let x = solve_sylvester(&one, &one, &one).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sylvester_zero_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a1 = random_stable(4, &mut rng);
        let a2 = random_stable(2, &mut rng);
        let x = solve_sylvester(&a1, &a2, &Matrix::zeros(4, 2)).unwrap();
        assert_eq!(x, Matrix::zeros(4, 2));
    }

    #[test]
    fn sylvester_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a1 = random_stable(5, &mut rng);
            let a2 = random_stable(3, &mut rng);
            let w = random(5, 3, &mut rng);
            let x = solve_sylvester(&a1, &a2, &w).unwrap();
            assert!(rel_residual(&a1, &a2, &x, &w) < 1e-10);
        }
    }

    #[test]
    fn sylvester_with_complex_eigenvalues() {
        // Rotation-dominated matrices force 2x2 Schur blocks on both sides.
        let a1 = m(
            3,
            3,
            &[-0.5, 3.0, 0.2, -3.0, -0.5, 0.1, 0.0, 0.3, -1.0],
        );
        let a2 = m(2, 2, &[-0.2, 5.0, -5.0, -0.2]);
        let w = m(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, -0.7]);
        let x = solve_sylvester(&a1, &a2, &w).unwrap();
        assert!(rel_residual(&a1, &a2, &x, &w) < 1e-12);
    }

    #[test]
    fn sylvester_unstable_but_separated() {
        let a1 = m(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let a2 = m(1, 1, &[1.0]);
        let w = m(2, 1, &[1.0, 1.0]);
        let x = solve_sylvester(&a1, &a2, &w).unwrap();
        assert!(rel_residual(&a1, &a2, &x, &w) < 1e-14);
    }

    #[test]
    fn sylvester_reports_offending_pair() {
        let err = solve_sylvester(&m(1, 1, &[-3.0]), &m(1, 1, &[3.0]), &m(1, 1, &[1.0]))
            .unwrap_err();
        match err {
            MorError::SingularEquation { lambda, mu, .. } => {
                assert!(lambda.starts_with("-3"));
                assert!(mu.starts_with('3'));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn sylvester_dimension_error() {
        let a = m(1, 1, &[-1.0]);
        assert!(matches!(
            solve_sylvester(&a, &a, &Matrix::zeros(2, 1)),
            Err(MorError::Dimension { .. })
        ));
    }

    #[test]
    fn lyapunov_cases() {
        let x = solve_lyapunov(&m(1, 1, &[-1.0]), &m(1, 1, &[-1.0])).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);

        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let x = solve_lyapunov(&a, &(-Matrix::identity(2, 2))).unwrap();
        let want = m(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        assert!((x - want).amax() < 1e-15);

        let x = solve_lyapunov(&a, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(x, Matrix::zeros(2, 2));
    }

    #[test]
    fn lyapunov_rejects_asymmetric_rhs() {
        let a = -Matrix::identity(2, 2);
        let w = m(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            solve_lyapunov(&a, &w),
            Err(MorError::NotSymmetric(_))
        ));
    }

    #[test]
    fn separation_examples() {
        let s = spectrum_separation(&m(1, 1, &[-1.0]), &m(1, 1, &[-1.0]), 1e-8).unwrap();
        assert_eq!(s.min_sum_abs, 2.0);
        assert!(s.is_separated);

        let s = spectrum_separation(&m(1, 1, &[-3.0]), &m(1, 1, &[3.0]), 1e-8).unwrap();
        assert_eq!(s.min_sum_abs, 0.0);
        assert!(!s.is_separated);

        let a1 = m(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let s = spectrum_separation(&a1, &m(1, 1, &[-4.0]), 1e-8).unwrap();
        assert_eq!(s.min_sum_abs, 5.0);
    }

    #[test]
    fn spd_factor_cases() {
        let z = spd_factor(&Matrix::identity(4, 4), 1e-12).unwrap();
        assert_eq!(z.ncols(), 4);
        assert!((&z * z.transpose() - Matrix::identity(4, 4)).amax() < 1e-14);

        let p = m(3, 3, &[4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let z = spd_factor(&p, 1e-12).unwrap();
        assert_eq!(z.ncols(), 2);
        assert!((&z * z.transpose() - &p).amax() < 1e-14);

        let z = spd_factor(&Matrix::zeros(3, 3), 1e-12).unwrap();
        assert_eq!(z.shape(), (3, 0));
    }

    #[test]
    fn spd_factor_rejects_indefinite() {
        let p = m(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        match spd_factor(&p, 1e-12) {
            Err(MorError::NotPsd { min_eig }) => assert!((min_eig + 0.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spd_factor_clamps_tiny_negatives() {
        let p = m(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let z = spd_factor(&p, 1e-12).unwrap();
        assert_eq!(z.ncols(), 1);
    }

    #[test]
    fn trace_of_product_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(3, 5, &mut rng);
        let b = random(5, 3, &mut rng);
        assert!((trace_of_product(&a, &b) - (&a * &b).trace()).abs() < 1e-14);
    }
}
