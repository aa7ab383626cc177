//! Dense complex linear algebra used by every solver in the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Factorizations (LU, SVD,
//! Hermitian eigen, Schur) come from nalgebra; the matrix functions built on
//! top of them (exponential, PSD square root, block-exponential integrals,
//! tolerant rank, null spaces) live here.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// 1x1 matrix holding `value`.
pub fn scalar(value: Complex64) -> CMatrix {
    CMatrix::from_element(1, 1, value)
}

/// Builds a matrix from row slices. All rows must have equal length.
pub fn from_rows(rows: &[Vec<Complex64>]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    CMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Operator 2-norm.
pub fn norm2(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of a square matrix (0 for an empty matrix).
pub fn min_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Result of testing a matrix for self-adjointness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianCheck {
    pub residual: f64,
    pub tolerance: f64,
}

impl HermitianCheck {
    pub fn new(m: &CMatrix, tolerance: f64) -> Self {
        Self {
            residual: norm2(&(m - m.adjoint())),
            tolerance,
        }
    }

    pub fn accepted(&self) -> bool {
        self.residual <= self.tolerance
    }
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part (`+inf` for an empty matrix).
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).0.first().copied().unwrap_or(f64::INFINITY)
}

/// Largest eigenvalue of the Hermitian part (`-inf` for an empty matrix).
pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).0.last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// `V diag(f(λ)) V*` for the Hermitian part of `m`.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    let n = values.len();
    let scaled = CMatrix::from_fn(n, n, |i, j| vectors[(i, j)] * f(values[j]));
    &scaled * vectors.adjoint()
}

/// Default clamping tolerance for PSD square roots: `1e-10 * ||M||`.
pub fn default_psd_tol(m: &CMatrix) -> f64 {
    1e-10 * norm2(m)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn sqrtm_psd(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    ensure_square(m)?;
    ensure_finite(m, "sqrtm_psd input")?;
    let check = HermitianCheck::new(m, tol.max(f64::MIN_POSITIVE));
    if !check.accepted() {
        return Err(Error::NotHermitian {
            residual: check.residual,
            tol: check.tolerance,
        });
    }
    let (values, _) = eigh(m);
    if let Some(&lowest) = values.first() {
        if lowest < -tol {
            return Err(Error::NegativeEigenvalue { value: lowest, tol });
        }
    }
    Ok(hermitian_function(m, |l| l.max(0.0).sqrt()))
}

/// `M^{-1/2}` for a Hermitian positive definite matrix.
pub fn inv_sqrtm_pd(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    let lowest = min_eigenvalue(m);
    if m.nrows() > 0 && !(lowest > 0.0) {
        return Err(Error::SigmaNotPositive {
            min_eigenvalue: lowest,
        });
    }
    Ok(hermitian_function(m, |l| 1.0 / l.sqrt()))
}

pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_square(a)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve: {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if a.nrows() == 0 {
        return Ok(zeros(0, b.ncols()));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularMatrix("LU solve"))?;
    ensure_finite(&x, "linear solve")?;
    Ok(x)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    solve(a, &identity(a.nrows()))
}

/// Eigenvalues of a general complex matrix (diagonal of its Schur form).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    ensure_finite(m, "eigenvalue input")?;
    let (_, t) = m.clone().schur().unpack();
    Ok((0..n).map(|k| t[(k, k)]).collect())
}

/// Orthonormal basis of the right null space: right singular vectors whose
/// singular value is at most `tol`.
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return zeros(0, 0);
    }
    // Pad to at least square so the SVD returns a full set of right vectors.
    let rows = m.nrows().max(cols);
    let mut padded = zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let picked: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= tol)
        .collect();
    CMatrix::from_fn(cols, picked.len(), |i, j| v_t[(picked[j], i)].conj())
}

/// Orthonormal basis of the column space: left singular vectors whose
/// singular value exceeds `tol`.
pub fn orth(m: &CMatrix, tol: f64) -> CMatrix {
    if m.is_empty() {
        return zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let picked: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > tol)
        .collect();
    CMatrix::from_fn(m.nrows(), picked.len(), |i, j| u[(i, picked[j])])
}

/// Number of singular values above `tol * sigma_max`.
pub fn rank_tol(m: &CMatrix, tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > tol * top).count(),
        _ => 0,
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

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
// 1-norm thresholds for Padé degrees 3, 5, 7, 9, 13 (double precision).
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

fn re(x: f64) -> Complex64 {
    c64(x, 0.0)
}

/// Odd/even split of a low-degree Padé numerator: returns (U, V).
fn pade_low(a: &CMatrix, coeffs: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let id = identity(n);
    let a2 = a * a;
    let mut even = id.clone() * re(coeffs[0]);
    let mut odd = id * re(coeffs[1]);
    let mut power = a2.clone();
    for k in 1..coeffs.len() / 2 {
        even += &power * re(coeffs[2 * k]);
        odd += &power * re(coeffs[2 * k + 1]);
        power = &power * &a2;
    }
    (a * odd, even)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let b = &PADE13;
    let id = identity(a.nrows());
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * re(b[13]) + &a4 * re(b[11]) + &a2 * re(b[9]);
    let outer_u = &a6 * &inner_u + &a6 * re(b[7]) + &a4 * re(b[5]) + &a2 * re(b[3]) + &id * re(b[1]);
    let u = a * outer_u;
    let inner_v = &a6 * re(b[12]) + &a4 * re(b[10]) + &a2 * re(b[8]);
    let v = &a6 * &inner_v + &a6 * re(b[6]) + &a4 * re(b[4]) + &a2 * re(b[2]) + &id * re(b[0]);
    (u, v)
}

/// Matrix exponential by scaling and squaring with Padé approximants.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    let n = ensure_square(m)?;
    ensure_finite(m, "expm input")?;
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let norm = norm1(m);
    let low: [(&[f64], f64); 4] = [
        (&PADE3, THETA[0]),
        (&PADE5, THETA[1]),
        (&PADE7, THETA[2]),
        (&PADE9, THETA[3]),
    ];
    let (u, v, squarings) = match low.iter().find(|(_, theta)| norm <= *theta) {
        Some((coeffs, _)) => {
            let (u, v) = pade_low(m, coeffs);
            (u, v, 0)
        }
        None => {
            let s = if norm > THETA[4] {
                (norm / THETA[4]).log2().ceil().max(0.0) as i32
            } else {
                0
            };
            let scaled = m * re(0.5f64.powi(s));
            let (u, v) = pade13(&scaled);
            (u, v, s)
        }
    };
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    ensure_finite(&r, "expm result")?;
    Ok(r)
}

/// `∫₀ˣ e^{A1 t} B e^{A2 t} dt`, read off the exponential of the block
/// matrix `[[-A1, B], [0, A2]] x` and corrected by `e^{A1 x}`.
pub fn vanloan_integral(a1: &CMatrix, b: &CMatrix, a2: &CMatrix, x: f64) -> Result<CMatrix> {
    let p = ensure_square(a1)?;
    let q = ensure_square(a2)?;
    if b.nrows() != p || b.ncols() != q {
        return Err(Error::DimensionMismatch(format!(
            "vanloan_integral: B is {}x{}, expected {p}x{q}",
            b.nrows(),
            b.ncols()
        )));
    }
    let mut block = zeros(p + q, p + q);
    block.view_mut((0, 0), (p, p)).copy_from(&(-a1 * re(x)));
    block.view_mut((0, p), (p, q)).copy_from(&(b * re(x)));
    block.view_mut((p, p), (q, q)).copy_from(&(a2 * re(x)));
    let e = expm(&block)?;
    let top_right = e.view((0, p), (p, q)).into_owned();
    Ok(expm(&(a1 * re(x)))? * top_right)
}
