//! Inverse problem: from a rational Weyl function `φ(z) = C(zI − A)⁻¹B` to
//! generating matrices of a pseudo-exponential potential.
//!
//! Pipeline: minimal realization, admissibility screen, Hermitian solution
//! `X` of `XC*CX + i(XA* − AX) + BB* = 0`, then
//! `α = A + iBB*X⁻¹, Σ₀ = X, ϑ₁ = B, ϑ₂ = −iXC*`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gbdt::{self, GbdtParams, SignatureLayout};
use crate::linalg::{self, c64, CMatrix, I};
use crate::spectral;

/// State-space triple for `φ(z) = C(zI − A)⁻¹B` (`m2×m1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub c: CMatrix,
    pub a: CMatrix,
    pub b: CMatrix,
}

impl Realization {
    pub fn new(c: CMatrix, a: CMatrix, b: CMatrix) -> Result<Self> {
        let n = linalg::ensure_square(&a)?;
        if c.ncols() != n || b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "realization: C {:?}, A {n}x{n}, B {:?}",
                c.shape(),
                b.shape()
            )));
        }
        if c.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::DimensionMismatch("realization needs m1, m2 >= 1".into()));
        }
        for (m, what) in [(&c, "C"), (&a, "A"), (&b, "B")] {
            linalg::ensure_finite(m, what)?;
        }
        Ok(Self { c, a, b })
    }

    /// State dimension `N`.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn layout(&self) -> SignatureLayout {
        SignatureLayout {
            m1: self.b.ncols(),
            m2: self.c.nrows(),
        }
    }

    /// Applies the state-space change `x → Qx` restricted to the columns of `basis`.
    fn compress(&self, basis: &CMatrix) -> Self {
        Self {
            c: &self.c * basis,
            a: basis.adjoint() * &self.a * basis,
            b: basis.adjoint() * &self.b,
        }
    }
}

/// `C(zI − A)⁻¹B`.
pub fn eval_transfer(r: &Realization, z: Complex64) -> Result<CMatrix> {
    let n = r.order();
    if n == 0 {
        let l = r.layout();
        return Ok(linalg::zeros(l.m2, l.m1));
    }
    gbdt::check_resolvent(&r.a, z)?;
    let x = linalg::solve(&(linalg::identity(n) * z - &r.a), &r.b)?;
    Ok(&r.c * x)
}

/// Orthonormal basis of the Krylov space `span{B, AB, A²B, …}` built one
/// block at a time; directions below `tol` (relative) are dropped.
fn reachable_basis(a: &CMatrix, b: &CMatrix, tol: f64) -> CMatrix {
    let n = a.nrows();
    let b_scale = linalg::norm2(b);
    if n == 0 || b_scale == 0.0 {
        return linalg::zeros(n, 0);
    }
    let mut basis = linalg::orth(b, tol * b_scale);
    let mut frontier = basis.clone();
    let a_scale = linalg::norm2(a);
    while basis.ncols() < n && frontier.ncols() > 0 && a_scale > 0.0 {
        let mut w = a * &frontier;
        for _ in 0..2 {
            w -= &basis * (basis.adjoint() * &w);
        }
        let fresh = linalg::orth(&w, tol * a_scale);
        let take = fresh.ncols().min(n - basis.ncols());
        let fresh = fresh.columns(0, take).into_owned();
        basis = gbdt::hstack(&basis, &fresh);
        frontier = fresh;
    }
    basis
}

/// Default relative rank tolerance for the staircase reduction.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Minimal realization by controllability then observability truncation.
/// An already minimal realization is returned unchanged, not rotated.
pub fn mcmillan_reduce(r: &Realization, tol: f64) -> Realization {
    let n = r.order();
    let reachable = reachable_basis(&r.a, &r.b, tol);
    let controllable = if reachable.ncols() == n { r.clone() } else { r.compress(&reachable) };
    let observable = reachable_basis(&controllable.a.adjoint(), &controllable.c.adjoint(), tol);
    if observable.ncols() == controllable.order() {
        controllable
    } else {
        controllable.compress(&observable)
    }
}

/// Outcome of the admissibility screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// Largest `‖φ(t)‖` over the real test grid.
    pub max_norm: f64,
    /// Where the maximum was attained.
    pub argmax: f64,
    /// Largest imaginary part over the poles.
    pub max_pole_imag: f64,
}

/// 201 Chebyshev-distributed points on `[−100, 100]`.
pub fn default_real_grid() -> Vec<f64> {
    (0..=200)
        .map(|k| 100.0 * (std::f64::consts::PI * k as f64 / 200.0).cos())
        .collect()
}

/// Screens `φ` for poles in the closed upper half-plane and for expansion on
/// `ℝ`. The real-axis test is grid-based (plus the real parts of the poles),
/// so passing it is advisory; Riccati solvability is the conclusive test.
pub fn check_admissible(r: &Realization, grid: Option<&[f64]>, tol: f64) -> Result<AdmissibilityReport> {
    let poles = linalg::eigenvalues(&r.a)?;
    let pole_tol = tol * (1.0 + linalg::norm2(&r.a));
    let mut max_pole_imag = f64::NEG_INFINITY;
    for p in &poles {
        max_pole_imag = max_pole_imag.max(p.im);
        if p.im > pole_tol {
            return Err(Error::PoleInUpperHalfPlane { re: p.re, im: p.im });
        }
        if p.im >= -pole_tol {
            return Err(Error::ExpansiveOnRealAxis {
                t: p.re,
                norm: f64::INFINITY,
            });
        }
    }
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = default_real_grid();
            &default_grid
        }
    };
    let mut points: Vec<f64> = grid.to_vec();
    points.extend(poles.iter().map(|p| p.re));
    let mut report = AdmissibilityReport {
        max_norm: 0.0,
        argmax: 0.0,
        max_pole_imag,
    };
    for t in points {
        let norm = linalg::norm2(&eval_transfer(r, c64(t, 0.0))?);
        if norm > report.max_norm {
            report.max_norm = norm;
            report.argmax = t;
        }
    }
    if report.max_norm > 1.0 + tol {
        return Err(Error::ExpansiveOnRealAxis {
            t: report.argmax,
            norm: report.max_norm,
        });
    }
    Ok(report)
}

/// Hermitian solution of `XC*CX + i(XA* − AX) + BB* = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub x: CMatrix,
    pub residual: f64,
    pub min_eigenvalue: f64,
}

/// `‖XC*CX + i(XA* − AX) + BB*‖`.
pub fn riccati_residual(r: &Realization, x: &CMatrix) -> f64 {
    linalg::norm2(&riccati_lhs(r, x))
}

fn riccati_lhs(r: &Realization, x: &CMatrix) -> CMatrix {
    let q = r.c.adjoint() * &r.c;
    x * q * x + (x * r.a.adjoint() - &r.a * x) * I + &r.b * r.b.adjoint()
}

fn riccati_scale(r: &Realization, x: &CMatrix) -> f64 {
    let nx = linalg::norm2(x);
    let nc = linalg::norm2(&r.c);
    let nb = linalg::norm2(&r.b);
    1.0 + nx * nx * nc * nc + 2.0 * linalg::norm2(&r.a) * nx + nb * nb
}

/// Groups numerically coincident eigenvalues. Returns (mean, multiplicity).
fn clusters(values: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for k in i + 1..n {
            if (values[i] - values[k]).norm() <= tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, k));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += values[i];
                g.2 += 1;
            }
            None => groups.push((r, values[i], 1)),
        }
    }
    let mut out: Vec<(Complex64, usize)> = groups
        .into_iter()
        .map(|(_, sum, count)| (sum / count as f64, count))
        .collect();
    out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    out
}

/// The `k` right singular vectors of `(H − μI)^power` with smallest singular values.
fn smallest_right_vectors(h: &CMatrix, mu: Complex64, power: usize, k: usize) -> CMatrix {
    let dim = h.nrows();
    let shifted = h - linalg::identity(dim) * mu;
    let mut p = linalg::identity(dim);
    for _ in 0..power {
        p = &p * &shifted;
    }
    let svd = p.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    CMatrix::from_fn(dim, k, |i, j| v_t[(order[j], i)].conj())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum HalfPlane {
    Left,
    Right,
}

/// Graph subspace `[I; X]` from the Hamiltonian eigenvalues on one side of
/// the imaginary axis plus half of every cluster sitting on the axis.
fn hamiltonian_candidate(r: &Realization, h: &CMatrix, side: HalfPlane) -> Result<CMatrix> {
    let n = r.order();
    let values = linalg::eigenvalues(h)?;
    let scale = 1.0 + linalg::norm2(h);
    let cluster_tol = 1e-6 * scale;
    let mut columns: Vec<CMatrix> = Vec::new();
    for (mu, mult) in clusters(&values, cluster_tol) {
        if mu.re.abs() <= cluster_tol {
            if mult % 2 != 0 {
                return Err(Error::NoHermitianSolution(format!(
                    "odd multiplicity {mult} on the imaginary axis at {mu}"
                )));
            }
            columns.push(smallest_right_vectors(h, mu, mult / 2, mult / 2));
        } else if (mu.re < 0.0) == (side == HalfPlane::Left) {
            columns.push(smallest_right_vectors(h, mu, mult, mult));
        }
    }
    let total: usize = columns.iter().map(|c| c.ncols()).sum();
    if total != n {
        return Err(Error::NoHermitianSolution(format!(
            "selected invariant subspace has dimension {total}, expected {n}"
        )));
    }
    let mut u = linalg::zeros(2 * n, 0);
    for c in &columns {
        u = gbdt::hstack(&u, c);
    }
    let u1 = u.rows(0, n).into_owned();
    let u2 = u.rows(n, n).into_owned();
    let s = linalg::singular_values(&u1);
    if s.last().copied().unwrap_or(0.0) <= 1e-12 * s.first().copied().unwrap_or(0.0) {
        return Err(Error::NoHermitianSolution("invariant subspace is not a graph".into()));
    }
    let x = linalg::solve(&u1.transpose(), &u2.transpose())?.transpose();
    let herm = linalg::HermitianCheck::new(&x, 1e-6 * (1.0 + linalg::norm2(&x)));
    if !herm.accepted() {
        return Err(Error::NoHermitianSolution(format!(
            "graph solution is not Hermitian (residual {:.3e})",
            herm.residual
        )));
    }
    Ok(linalg::hermitian_part(&x))
}

/// Newton refinement of a Hermitian Riccati solution; steps are kept only
/// while they reduce the residual.
fn newton_refine(r: &Realization, mut x: CMatrix) -> CMatrix {
    let n = r.order();
    let q = r.c.adjoint() * &r.c;
    let mut residual = riccati_residual(r, &x);
    for _ in 0..30 {
        if residual == 0.0 {
            break;
        }
        let k = &x * &q - &r.a * I;
        let op = linalg::kron(&linalg::identity(n), &k) + linalg::kron(&k.map(|z| z.conj()), &linalg::identity(n));
        let rhs = -riccati_lhs(r, &x);
        let rhs = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let svd = op.svd(true, true);
        let cutoff = 1e-13 * svd.singular_values.max();
        let Ok(delta) = svd.solve(&rhs, cutoff) else {
            break;
        };
        let delta = CMatrix::from_column_slice(n, n, delta.as_slice());
        let candidate = linalg::hermitian_part(&(&x + delta));
        let next = riccati_residual(r, &candidate);
        if !(next < residual) {
            break;
        }
        x = candidate;
        residual = next;
    }
    x
}

/// All Hermitian solutions reachable from the two half-plane selections of
/// the Hamiltonian spectrum, refined and deduplicated.
pub fn riccati_solutions(r: &Realization, tol: f64) -> Result<Vec<RiccatiSolution>> {
    let n = r.order();
    if n == 0 {
        return Ok(vec![RiccatiSolution {
            x: linalg::zeros(0, 0),
            residual: 0.0,
            min_eigenvalue: f64::INFINITY,
        }]);
    }
    let f = &r.a * I;
    let q = r.c.adjoint() * &r.c;
    let g = &r.b * r.b.adjoint();
    let mut h = linalg::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&f.adjoint());
    h.view_mut((0, n), (n, n)).copy_from(&(-q));
    h.view_mut((n, 0), (n, n)).copy_from(&g);
    h.view_mut((n, n), (n, n)).copy_from(&(-f));

    let mut found: Vec<RiccatiSolution> = Vec::new();
    let mut last_error = None;
    for side in [HalfPlane::Left, HalfPlane::Right] {
        let x = match hamiltonian_candidate(r, &h, side) {
            Ok(x) => newton_refine(r, x),
            Err(e) => {
                last_error = Some(e);
                continue;
            }
        };
        let residual = riccati_residual(r, &x);
        let limit = tol * riccati_scale(r, &x);
        if residual > limit {
            last_error = Some(Error::ResidualTooLarge { residual, tol: limit });
            continue;
        }
        let min_eigenvalue = linalg::min_eigenvalue(&x);
        if !(min_eigenvalue > 0.0) {
            last_error = Some(Error::NoHermitianSolution(format!(
                "Hermitian solution is not positive (smallest eigenvalue {min_eigenvalue:.3e})"
            )));
            continue;
        }
        let duplicate = found
            .iter()
            .any(|s| linalg::norm2(&(&s.x - &x)) <= 1e-8 * (1.0 + linalg::norm2(&x)));
        if !duplicate {
            found.push(RiccatiSolution {
                x,
                residual,
                min_eigenvalue,
            });
        }
    }
    if found.is_empty() {
        return Err(last_error.unwrap_or_else(|| Error::NoHermitianSolution("no candidate subspace".into())));
    }
    Ok(found)
}

/// Default relative residual tolerance for Riccati solutions.
pub const DEFAULT_RICCATI_TOL: f64 = 1e-10;

/// A positive Hermitian solution of the Riccati equation (the first one found).
pub fn solve_riccati(r: &Realization, tol: f64) -> Result<RiccatiSolution> {
    Ok(riccati_solutions(r, tol)?.swap_remove(0))
}

/// Maps a Riccati solution to generating matrices.
pub fn params_from_solution(r: &Realization, sol: &RiccatiSolution) -> Result<GbdtParams> {
    let layout = r.layout();
    let x = &sol.x;
    let n = r.order();
    let bbt = &r.b * r.b.adjoint();
    let alpha = if n == 0 {
        linalg::zeros(0, 0)
    } else {
        &r.a + linalg::solve(x, &bbt)?.adjoint() * I
    };
    let theta2 = x * r.c.adjoint() * -I;
    let tol = gbdt::default_identity_tol(&alpha, x, &r.b, &theta2) + 2.0 * sol.residual;
    gbdt::make_gbdt(layout, alpha, x.clone(), r.b.clone(), theta2, Some(tol))
}

/// Intermediate products of the inverse map.
#[derive(Debug, Clone)]
pub struct InverseSolution {
    pub reduced: Realization,
    pub admissibility: AdmissibilityReport,
    pub riccati: RiccatiSolution,
    pub params: GbdtParams,
}

/// Tolerances of the inverse map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseTolerances {
    pub rank: f64,
    pub admissibility: f64,
    pub riccati: f64,
}

impl Default for InverseTolerances {
    fn default() -> Self {
        Self {
            rank: DEFAULT_RANK_TOL,
            admissibility: 1e-9,
            riccati: DEFAULT_RICCATI_TOL,
        }
    }
}

/// Full inverse map with intermediate results.
pub fn inverse_problem_detailed(r: &Realization, tol: InverseTolerances) -> Result<InverseSolution> {
    let reduced = mcmillan_reduce(r, tol.rank);
    let admissibility = check_admissible(&reduced, None, tol.admissibility)?;
    let riccati = solve_riccati(&reduced, tol.riccati)?;
    let params = params_from_solution(&reduced, &riccati)?;
    Ok(InverseSolution {
        reduced,
        admissibility,
        riccati,
        params,
    })
}

/// Generating matrices of the unique potential whose Weyl function is `φ`.
pub fn inverse_problem(r: &Realization, tol: InverseTolerances) -> Result<GbdtParams> {
    Ok(inverse_problem_detailed(r, tol)?.params)
}

/// `φ(z) = −iϑ₂*Σ₀⁻¹(zI − θ)⁻¹ϑ₁` with `θ = α − iϑ₁ϑ₁*Σ₀⁻¹`.
pub fn weyl_closed_form(params: &GbdtParams, z: Complex64) -> Result<CMatrix> {
    let n = params.n();
    let layout = params.layout;
    if n == 0 {
        return Ok(linalg::zeros(layout.m2, layout.m1));
    }
    let theta = spectral::theta_matrix(params)?;
    gbdt::check_resolvent(&theta, z)?;
    let resolvent_theta1 = linalg::solve(&(linalg::identity(n) * z - theta), &params.theta1)?;
    let left = linalg::solve(&params.sigma0, &params.theta2)?.adjoint();
    Ok(left * resolvent_theta1 * -I)
}
