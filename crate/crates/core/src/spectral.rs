//! The matrix `θ = α − iϑ₁ϑ₁*Σ₀⁻¹`, its spectrum, and bound states of the
//! half-line operator `−ij d/dx − V` generated by real eigenvalues of `θ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gbdt::{self, GbdtParams, NormalizedFrame};
use crate::linalg::{self, c64, CMatrix, I};

/// `θ = α − iϑ₁ϑ₁*Σ₀⁻¹`.
pub fn theta_matrix(params: &GbdtParams) -> Result<CMatrix> {
    if params.n() == 0 {
        return Ok(linalg::zeros(0, 0));
    }
    let gram = &params.theta1 * params.theta1.adjoint();
    let right = linalg::solve(&params.sigma0, &gram)?.adjoint();
    Ok(&params.alpha - right * I)
}

/// `θ` together with the residual of its companion identity
/// `Σ₀⁻¹θ − θ*Σ₀⁻¹ = −iΣ₀⁻¹(ϑ₁ϑ₁* + ϑ₂ϑ₂*)Σ₀⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub matrix: CMatrix,
    pub identity_residual: f64,
    pub tolerance: f64,
}

impl Theta {
    pub fn ok(&self) -> bool {
        self.identity_residual <= self.tolerance
    }
}

pub fn theta_of(params: &GbdtParams) -> Result<Theta> {
    let matrix = theta_matrix(params)?;
    let n = params.n();
    if n == 0 {
        return Ok(Theta {
            matrix,
            identity_residual: 0.0,
            tolerance: 0.0,
        });
    }
    let sinv = linalg::inverse(&params.sigma0)?;
    let gram = &params.theta1 * params.theta1.adjoint() + &params.theta2 * params.theta2.adjoint();
    let lhs = &sinv * &matrix - matrix.adjoint() * &sinv;
    let rhs = &sinv * gram * &sinv * -I;
    let identity_residual = linalg::norm2(&(lhs - rhs));
    let s = linalg::norm2(&sinv);
    let tolerance =
        s * s * gbdt::default_identity_tol(&params.alpha, &params.sigma0, &params.theta1, &params.theta2);
    Ok(Theta {
        matrix,
        identity_residual,
        tolerance,
    })
}

/// Default tolerance for calling an eigenvalue of `θ` real.
pub fn default_real_tol(theta: &CMatrix) -> f64 {
    1e-8 * (1.0 + linalg::norm2(theta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub max_imag: f64,
    pub tolerance: f64,
    pub ok: bool,
}

/// Checks that `σ(θ)` lies in the closed lower half-plane.
pub fn spectrum_check(params: &GbdtParams, tol: Option<f64>) -> Result<SpectrumReport> {
    let theta = theta_matrix(params)?;
    let tolerance = tol.unwrap_or_else(|| default_real_tol(&theta));
    let eigenvalues = linalg::eigenvalues(&theta)?;
    let max_imag = eigenvalues.iter().map(|l| l.im).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumReport {
        ok: eigenvalues.iter().all(|l| l.im <= tolerance),
        eigenvalues,
        max_imag,
        tolerance,
    })
}

/// Eigenfunction `g(x) = jΛ(x)*Σ(x)⁻¹f` built from a real eigenpair of `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub lambda: f64,
    /// Unit eigenvector of `θ`.
    pub f: CMatrix,
    pub xs: Vec<f64>,
    /// `g(x_k)` as `m×1` columns.
    pub g_samples: Vec<CMatrix>,
    /// Trapezoid value of `∫‖g‖²` over the grid.
    pub l2_norm_estimate: f64,
    /// Trapezoid value of `∫‖g‖²` over the second half of the grid.
    pub tail_estimate: f64,
    /// `f*Σ₀⁻¹f`, the scale the tail is compared against.
    pub tail_scale: f64,
    pub g0_norm: f64,
    /// Largest central-difference residual of `g′ = iλg + ijVjg`.
    pub ode_residual: f64,
    /// Largest of `‖ϑ₁*Σ₀⁻¹f‖, ‖ϑ₂*Σ₀⁻¹f‖, ‖αf − λf‖`.
    pub consequence_residual: f64,
}

impl BoundState {
    pub fn sup_norm(&self) -> f64 {
        self.g_samples.iter().map(linalg::norm2).fold(0.0, f64::max)
    }

    /// Whether `g` vanishes on the whole grid (to `tol`).
    pub fn is_trivial(&self, tol: f64) -> bool {
        self.sup_norm() <= tol
    }
}

fn trapezoid(xs: &[f64], values: &[f64]) -> f64 {
    xs.windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
        .sum()
}

/// Real eigenvalues of `θ` (within `tol`) with an orthonormal eigenbasis each.
fn real_eigenspaces(theta: &CMatrix, tol: f64) -> Result<Vec<(f64, CMatrix)>> {
    let n = theta.nrows();
    let mut reals: Vec<f64> = linalg::eigenvalues(theta)?
        .into_iter()
        .filter(|l| l.im.abs() <= tol)
        .map(|l| l.re)
        .collect();
    reals.sort_by(f64::total_cmp);
    let merge = 1e-6 * (1.0 + linalg::norm2(theta));
    let mut distinct: Vec<f64> = Vec::new();
    for l in reals {
        match distinct.last() {
            Some(&prev) if (l - prev).abs() <= merge => {}
            _ => distinct.push(l),
        }
    }
    let mut out = Vec::new();
    for lambda in distinct {
        let shifted = theta - linalg::identity(n) * c64(lambda, 0.0);
        let mut basis = linalg::null_space(&shifted, tol.max(1e-10 * (1.0 + linalg::norm2(theta))));
        if basis.ncols() == 0 {
            // Defective or ill-conditioned: fall back to the best single direction.
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.expect("requested V");
            let k = svd.singular_values.imin();
            basis = CMatrix::from_fn(n, 1, |i, _| v_t[(k, i)].conj());
        }
        out.push((lambda, basis));
    }
    Ok(out)
}

/// Bound states from the real spectrum of `θ`, sampled on `[0, x_max]`.
///
/// Each eigenvector is screened against the consequences
/// `ϑ₁*Σ₀⁻¹f = ϑ₂*Σ₀⁻¹f = 0, αf = λf`; a failure is reported as
/// [`Error::ConsequenceViolated`].
pub fn bound_states(params: &GbdtParams, x_max: f64, step: f64, tol: Option<f64>) -> Result<Vec<BoundState>> {
    let len = gbdt::grid_len(x_max, step)?;
    if len < 3 {
        return Err(Error::InvalidGrid("bound states need at least three grid nodes".into()));
    }
    let n = params.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let theta = theta_matrix(params)?;
    let tol = tol.unwrap_or_else(|| default_real_tol(&theta));
    let sinv = linalg::inverse(&params.sigma0)?;
    let consequence_tol = 1e-6
        * (1.0
            + linalg::norm2(&params.alpha)
            + linalg::norm2(&sinv) * (linalg::norm2(&params.theta1) + linalg::norm2(&params.theta2)));
    let layout = params.layout;
    let j = layout.j();
    let xs: Vec<f64> = (0..len).map(|k| k as f64 * step).collect();

    let mut states = Vec::new();
    for (lambda, basis) in real_eigenspaces(&theta, tol)? {
        for col in 0..basis.ncols() {
            let f = basis.column(col).into_owned();
            let f = CMatrix::from_column_slice(n, 1, f.as_slice());
            let h = &sinv * &f;
            let shifted = &params.alpha * &f - &f * c64(lambda, 0.0);
            let consequence_residual = [
                linalg::norm2(&(params.theta1.adjoint() * &h)),
                linalg::norm2(&(params.theta2.adjoint() * &h)),
                linalg::norm2(&shifted),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            if consequence_residual > consequence_tol {
                return Err(Error::ConsequenceViolated {
                    lambda,
                    residual: consequence_residual,
                });
            }

            let mut frame = NormalizedFrame::start(params, Some(&f))?;
            let mut g_samples = Vec::with_capacity(len);
            let mut potentials = Vec::with_capacity(len);
            for &x in &xs {
                frame.advance_to(x)?;
                g_samples.push(frame.tracked_image());
                potentials.push(layout.potential_matrix(&frame.potential()));
            }
            let mut ode_residual: f64 = 0.0;
            for k in 1..len - 1 {
                let derivative = (&g_samples[k + 1] - &g_samples[k - 1]) / c64(2.0 * step, 0.0);
                let rhs = (&g_samples[k] * c64(lambda, 0.0) + &j * &potentials[k] * &j * &g_samples[k]) * I;
                ode_residual = ode_residual.max(linalg::norm2(&(derivative - rhs)));
            }
            let sq: Vec<f64> = g_samples.iter().map(|g| linalg::norm2(g).powi(2)).collect();
            let half = len / 2;
            states.push(BoundState {
                lambda,
                g0_norm: linalg::norm2(&g_samples[0]),
                l2_norm_estimate: trapezoid(&xs, &sq),
                tail_estimate: trapezoid(&xs[half..], &sq[half..]),
                tail_scale: (f.adjoint() * &h)[(0, 0)].re,
                f,
                xs: xs.clone(),
                g_samples,
                ode_residual,
                consequence_residual,
            });
        }
    }
    Ok(states)
}

/// `G(x) = jΛ(x)*Σ(x)⁻¹` from the direct state evaluation.
fn g_operator(params: &GbdtParams, x: f64) -> Result<(CMatrix, gbdt::GbdtState)> {
    let state = gbdt::state_at(params, x)?;
    let g = params.layout.j() * linalg::solve(&state.sigma, &state.lambda)?.adjoint();
    Ok((g, state))
}

/// Central-difference residual of
/// `(jΛ*Σ⁻¹)′ = iΛ*Σ⁻¹α + (Λ*Σ⁻¹Λ − jΛ*Σ⁻¹Λj)jΛ*Σ⁻¹` at `x ≥ h`.
pub fn derivative_identity_residual(params: &GbdtParams, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || x < h {
        return Err(Error::InvalidGrid(format!("need 0 < h <= x, got x = {x}, h = {h}")));
    }
    let j = params.layout.j();
    let (g_plus, _) = g_operator(params, x + h)?;
    let (g_minus, _) = g_operator(params, x - h)?;
    let (g, state) = g_operator(params, x)?;
    let lsl = relation_product(&state)?;
    let derivative = (g_plus - g_minus) / c64(2.0 * h, 0.0);
    // Λ*Σ⁻¹ = jG since j² = I.
    let lam_sinv = &j * &g;
    let rhs = &lam_sinv * &params.alpha * I + (&lsl - &j * &lsl * &j) * &g;
    Ok(linalg::norm2(&(derivative - rhs)))
}

fn relation_product(state: &gbdt::GbdtState) -> Result<CMatrix> {
    Ok(state.lambda.adjoint() * linalg::solve(&state.sigma, &state.lambda)?)
}

/// `‖Λ*Σ⁻¹Λ − jΛ*Σ⁻¹Λj − ijV‖` with `V` taken from the potential evaluator.
pub fn relation_residual(params: &GbdtParams, x: f64) -> Result<f64> {
    let layout = params.layout;
    let j = layout.j();
    let state = gbdt::state_at(params, x)?;
    let lsl = relation_product(&state)?;
    let v = layout.potential_matrix(&gbdt::potential_at(params, x)?);
    Ok(linalg::norm2(&(&lsl - &j * &lsl * &j - &j * v * I)))
}
