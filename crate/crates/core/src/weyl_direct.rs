//! Direct problem: Weyl function of a sampled potential via nested matrix balls.
//!
//! For `Im z > 0` the set of admissible values at `x` is the matrix ball
//! `{ρ_l ω ρ_r + center : ‖ω‖ ≤ 1}` with
//! `center = −𝔄₂₂⁻¹𝔄₂₁`, `ρ_l = (−𝔄₂₂)^{−1/2}` and
//! `ρ_r = (𝔄₁₁ − 𝔄₁₂𝔄₂₂⁻¹𝔄₂₁)^{1/2}`. The balls shrink as `x` grows and
//! their intersection is the Weyl function.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gbdt::SignatureLayout;
use crate::linalg::{self, c64, CMatrix};
use crate::propagator::{self, PropagatorResult, SampledPotential};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBall {
    /// `m2×m1`.
    pub center: CMatrix,
    /// `m2×m2`, Hermitian positive definite.
    pub rho_l: CMatrix,
    /// `m1×m1`, Hermitian, `0 ⪯ ρ_r ⪯ I`.
    pub rho_r: CMatrix,
}

impl MatrixBall {
    /// `‖ρ_l‖·‖ρ_r‖`: every member lies within this distance of the center.
    pub fn radius(&self) -> f64 {
        linalg::norm2(&self.rho_l) * linalg::norm2(&self.rho_r)
    }
}

/// Weyl function estimate at one `z`.
///
/// `radius_bound` is the certified error of `phi`: the ball radius at
/// `x_used` plus the discretization error of the center, estimated by
/// repeating the propagation on every other grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylEstimate {
    pub z: Complex64,
    pub phi: CMatrix,
    pub radius_bound: f64,
    pub ball_radius: f64,
    pub discretization_error: f64,
    pub x_used: f64,
}

fn neg_a22_checked(layout: SignatureLayout, a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (_, _, a21, a22) = layout.blocks(a);
    let neg22 = -a22;
    let lowest = linalg::min_eigenvalue(&neg22);
    if !(lowest > 0.0) {
        return Err(Error::BlockNotPositive {
            min_eigenvalue: lowest,
        });
    }
    Ok((neg22, a21))
}

fn check_square_a(layout: SignatureLayout, a: &CMatrix) -> Result<()> {
    if a.shape() != (layout.m(), layout.m()) {
        return Err(Error::DimensionMismatch(format!(
            "A matrix is {:?}, expected {}x{}",
            a.shape(),
            layout.m(),
            layout.m()
        )));
    }
    linalg::ensure_finite(a, "A matrix")
}

/// Ball `𝓝(x, z)` from `𝔄(x, z)` using the Schur complement directly.
///
/// Suitable while `𝔄` is moderately sized; for long propagations use
/// [`ball_from_solution`], which avoids the cancellation in `𝔄₁₁ − 𝔄₁₂𝔄₂₂⁻¹𝔄₂₁`.
pub fn ball_at(a: &CMatrix, layout: SignatureLayout) -> Result<MatrixBall> {
    check_square_a(layout, a)?;
    let (neg22, a21) = neg_a22_checked(layout, a)?;
    let (a11, a12, _, _) = layout.blocks(a);
    let center = linalg::solve(&neg22, &a21)?;
    let rho_l = linalg::inv_sqrtm_pd(&neg22)?;
    let schur = linalg::hermitian_part(&(a11 + a12 * &center));
    let rho_r = linalg::sqrtm_psd(&schur, 1e-9 * linalg::norm2(a).max(1.0))?;
    Ok(MatrixBall {
        center,
        rho_l,
        rho_r,
    })
}

/// Ball at node `k` of a propagation, with `ρ_r` taken from
/// `(𝔄⁻¹)₁₁ = (𝔄₁₁ − 𝔄₁₂𝔄₂₂⁻¹𝔄₂₁)⁻¹`.
pub fn ball_from_solution(result: &PropagatorResult, k: usize) -> Result<MatrixBall> {
    let layout = result.layout;
    let a = result.a_matrix(k);
    let (neg22, a21) = neg_a22_checked(layout, &a)?;
    let center = linalg::solve(&neg22, &a21)?;
    let rho_l = linalg::inv_sqrtm_pd(&neg22)?;
    let a_inv = result.a_inverse(k);
    let (inv11, _, _, _) = layout.blocks(&a_inv);
    let rho_r = linalg::inv_sqrtm_pd(&inv11).map_err(|_| Error::BlockNotPositive {
        min_eigenvalue: linalg::min_eigenvalue(&inv11),
    })?;
    Ok(MatrixBall {
        center,
        rho_l,
        rho_r,
    })
}

/// `[I, φ̂*] 𝔄 [I; φ̂]`, the `m1×m1` Hermitian form whose positivity is ball membership.
pub fn membership_form(a: &CMatrix, candidate: &CMatrix) -> CMatrix {
    let m1 = candidate.ncols();
    let mut stacked = linalg::zeros(m1 + candidate.nrows(), m1);
    stacked.view_mut((0, 0), (m1, m1)).fill_with_identity();
    stacked.view_mut((m1, 0), candidate.shape()).copy_from(candidate);
    linalg::hermitian_part(&(stacked.adjoint() * a * stacked))
}

/// Default membership tolerance `1e-9·‖𝔄‖`.
pub fn default_membership_tol(a: &CMatrix) -> f64 {
    1e-9 * linalg::norm2(a)
}

/// True iff `candidate` belongs to the ball of `𝔄`: the form
/// `[I, φ̂*]𝔄[I; φ̂]` has no eigenvalue below `−tol`.
pub fn contains(ball: &MatrixBall, a: &CMatrix, candidate: &CMatrix, tol: Option<f64>) -> bool {
    if candidate.shape() != ball.center.shape() || a.nrows() != candidate.nrows() + candidate.ncols() {
        return false;
    }
    let tol = tol.unwrap_or_else(|| default_membership_tol(a));
    linalg::min_eigenvalue(&membership_form(a, candidate)) >= -tol
}

/// Ball point `ρ_l ω ρ_r + center` for a contraction `ω`.
pub fn sample_point(ball: &MatrixBall, omega: &CMatrix) -> Result<CMatrix> {
    if omega.shape() != ball.center.shape() {
        return Err(Error::DimensionMismatch(format!(
            "omega is {:?}, expected {:?}",
            omega.shape(),
            ball.center.shape()
        )));
    }
    let norm = linalg::norm2(omega);
    if norm > 1.0 + 1e-12 {
        return Err(Error::OmegaNotContractive { norm });
    }
    Ok(&ball.rho_l * omega * &ball.rho_r + &ball.center)
}

fn require_upper(z: Complex64) -> Result<()> {
    if !(z.im > 0.0) {
        return Err(Error::NotUpperHalfPlane(z.im));
    }
    Ok(())
}

fn check_range(potential: &SampledPotential, x: f64) -> Result<()> {
    let last = potential.x_last();
    if !(x >= 0.0) || x > last * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "x = {x} outside the sampled range [0, {last}]"
        )));
    }
    Ok(())
}

/// Weyl function estimate: center of the ball at the last node `≤ x_max`.
pub fn estimate_weyl(potential: &SampledPotential, z: Complex64, x_max: f64) -> Result<WeylEstimate> {
    require_upper(z)?;
    check_range(potential, x_max)?;
    let fine = potential.truncated(x_max);
    let result = propagator::propagate(&fine, z)?;
    let last = result.len() - 1;
    let ball = ball_from_solution(&result, last)?;
    let discretization_error = if fine.len() >= 3 {
        let coarse = propagator::propagate(&fine.coarsened(), z)?;
        let coarse_center = ball_from_solution(&coarse, coarse.len() - 1)?.center;
        linalg::norm2(&(&ball.center - coarse_center))
    } else {
        0.0
    };
    let ball_radius = ball.radius();
    linalg::ensure_finite(&ball.center, "Weyl estimate")?;
    Ok(WeylEstimate {
        z,
        phi: ball.center,
        radius_bound: ball_radius + discretization_error,
        ball_radius,
        discretization_error,
        x_used: fine.x_last(),
    })
}

/// [`estimate_weyl`] over many `z`, fanned out according to `exec`.
pub fn estimate_weyl_grid(
    potential: &SampledPotential,
    zs: &[Complex64],
    x_max: f64,
    exec: Execution,
) -> Result<Vec<WeylEstimate>> {
    exec.try_map(zs, |&z| estimate_weyl(potential, z, x_max))
}

fn stacked_candidate(phi: &CMatrix) -> CMatrix {
    let m1 = phi.ncols();
    let mut s = linalg::zeros(m1 + phi.nrows(), m1);
    s.view_mut((0, 0), (m1, m1)).fill_with_identity();
    s.view_mut((m1, 0), phi.shape()).copy_from(phi);
    s
}

fn check_candidate(layout: SignatureLayout, phi: &CMatrix) -> Result<()> {
    if phi.shape() != (layout.m2, layout.m1) {
        return Err(Error::DimensionMismatch(format!(
            "candidate is {:?}, expected {}x{}",
            phi.shape(),
            layout.m2,
            layout.m1
        )));
    }
    Ok(())
}

/// Trapezoid value of `∫₀^r [I, φ*] u*u [I; φ] dx` on the potential's grid.
///
/// Bounded in `r` for the Weyl function, growing at least linearly otherwise.
pub fn l2_weyl_functional(potential: &SampledPotential, phi: &CMatrix, z: Complex64, r: f64) -> Result<CMatrix> {
    require_upper(z)?;
    check_candidate(potential.layout(), phi)?;
    check_range(potential, r)?;
    let result = propagator::propagate(&potential.truncated(r), z)?;
    let stacked = stacked_candidate(phi);
    let grams: Vec<CMatrix> = result
        .us
        .iter()
        .map(|u| {
            let y = u * &stacked;
            y.adjoint() * y
        })
        .collect();
    let mut total = linalg::zeros(phi.ncols(), phi.ncols());
    for (k, w) in result.xs.windows(2).enumerate() {
        total += (&grams[k] + &grams[k + 1]) * c64(0.5 * (w[1] - w[0]), 0.0);
    }
    let total = linalg::hermitian_part(&total);
    linalg::ensure_finite(&total, "L2 functional")?;
    Ok(total)
}

/// Outcome of the growth test `‖Ψ(x, z)‖² ≤ 2e^{2xM}` on `[0, l]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiBoundReport {
    /// `sup_{x ≤ l} ‖Ψ(x, z)‖`.
    pub sup_norm: f64,
    /// `2e^{2lM}`, the bound on `‖Ψ‖²` at the end of the interval.
    pub bound: f64,
    /// `sup_x ‖Ψ(x)‖² / (2e^{2xM})`.
    pub worst_ratio: f64,
    pub ok: bool,
}

/// Checks `Ψ(x, z) = e^{−ixz}u(x, z)[I; φ]` against `‖Ψ‖² ≤ 2e^{2xM}`,
/// `M = sup ‖V‖` on `[0, l]`.
pub fn psi_bound_check(potential: &SampledPotential, phi: &CMatrix, z: Complex64, l: f64) -> Result<PsiBoundReport> {
    require_upper(z)?;
    check_candidate(potential.layout(), phi)?;
    check_range(potential, l)?;
    let slack = 1e-9;
    let trimmed = potential.truncated(l);
    let big_m = trimmed.sup_norm_up_to(l);
    let result = propagator::propagate(&trimmed, z)?;
    let stacked = stacked_candidate(phi);
    let mut sup_norm: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for (u, &x) in result.us.iter().zip(&result.xs) {
        let psi = u * &stacked * (-linalg::I * z * x).exp();
        let norm = linalg::norm2(&psi);
        sup_norm = sup_norm.max(norm);
        worst_ratio = worst_ratio.max(norm * norm / (2.0 * (2.0 * x * big_m).exp()));
    }
    Ok(PsiBoundReport {
        sup_norm,
        bound: 2.0 * (2.0 * trimmed.x_last() * big_m).exp(),
        worst_ratio,
        ok: worst_ratio.is_finite() && worst_ratio <= 1.0 + slack,
    })
}
