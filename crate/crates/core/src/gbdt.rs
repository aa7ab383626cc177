//! Generalized pseudo-exponential potentials and their closed-form
//! fundamental solutions.
//!
//! A potential is generated by parameter matrices `(α, Σ₀, ϑ₁, ϑ₂)` tied by
//! `αΣ₀ − Σ₀α* = i(ϑ₁ϑ₁* − ϑ₂ϑ₂*)`. With
//! `Λ(x) = [e^{−ixα}ϑ₁, e^{ixα}ϑ₂]` and `Σ(x) = Σ₀ + ∫₀ˣ ΛΛ*`, the potential is
//! `v(x) = −2i Λ₁(x)* Σ(x)⁻¹ Λ₂(x)`.

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, I, ONE};
use crate::propagator::SampledPotential;

/// Block dimensions `m1`, `m2` and the signature matrix `j = diag(I_{m1}, −I_{m2})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SignatureLayout {
    pub m1: usize,
    pub m2: usize,
}

impl SignatureLayout {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 || m2 == 0 {
            return Err(Error::DimensionMismatch(format!(
                "signature layout needs m1, m2 >= 1 (got {m1}, {m2})"
            )));
        }
        Ok(Self { m1, m2 })
    }

    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }

    pub fn j(&self) -> CMatrix {
        CMatrix::from_fn(self.m(), self.m(), |r, c| match (r == c, r < self.m1) {
            (true, true) => ONE,
            (true, false) => -ONE,
            _ => linalg::ZERO,
        })
    }

    /// Off-diagonal `V = [[0, v], [v*, 0]]` built from the `m1×m2` block `v`.
    pub fn potential_matrix(&self, v: &CMatrix) -> CMatrix {
        let mut big = linalg::zeros(self.m(), self.m());
        big.view_mut((0, self.m1), (self.m1, self.m2)).copy_from(v);
        big.view_mut((self.m1, 0), (self.m2, self.m1)).copy_from(&v.adjoint());
        big
    }

    /// Blocks `(X11, X12, X21, X22)` of an `m×m` matrix.
    pub fn blocks(&self, a: &CMatrix) -> (CMatrix, CMatrix, CMatrix, CMatrix) {
        let (m1, m2) = (self.m1, self.m2);
        (
            a.view((0, 0), (m1, m1)).into_owned(),
            a.view((0, m1), (m1, m2)).into_owned(),
            a.view((m1, 0), (m2, m1)).into_owned(),
            a.view((m1, m1), (m2, m2)).into_owned(),
        )
    }
}

/// Validated generating matrices of a pseudo-exponential potential.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtParams {
    pub layout: SignatureLayout,
    pub alpha: CMatrix,
    pub sigma0: CMatrix,
    pub theta1: CMatrix,
    pub theta2: CMatrix,
}

/// `Λ(x)` and `Σ(x)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtState {
    pub x: f64,
    pub lambda: CMatrix,
    pub sigma: CMatrix,
}

/// Default tolerance for the generating identity, scaled with the data.
pub fn default_identity_tol(alpha: &CMatrix, sigma0: &CMatrix, theta1: &CMatrix, theta2: &CMatrix) -> f64 {
    let t1 = linalg::norm2(theta1);
    let t2 = linalg::norm2(theta2);
    1e-10 * (1.0 + linalg::norm2(alpha) * linalg::norm2(sigma0) + t1 * t1 + t2 * t2)
}

/// `‖αΣ₀ − Σ₀α* − i(ϑ₁ϑ₁* − ϑ₂ϑ₂*)‖`.
pub fn identity_residual(alpha: &CMatrix, sigma0: &CMatrix, theta1: &CMatrix, theta2: &CMatrix) -> f64 {
    let lhs = alpha * sigma0 - sigma0 * alpha.adjoint();
    let rhs = (theta1 * theta1.adjoint() - theta2 * theta2.adjoint()) * I;
    linalg::norm2(&(lhs - rhs))
}

/// Validates dimensions, positivity of `Σ₀`, and the generating identity.
///
/// `tol_identity = None` uses [`default_identity_tol`].
pub fn make_gbdt(
    layout: SignatureLayout,
    alpha: CMatrix,
    sigma0: CMatrix,
    theta1: CMatrix,
    theta2: CMatrix,
    tol_identity: Option<f64>,
) -> Result<GbdtParams> {
    let n = linalg::ensure_square(&alpha)?;
    let dims_ok = sigma0.shape() == (n, n)
        && theta1.shape() == (n, layout.m1)
        && theta2.shape() == (n, layout.m2);
    if !dims_ok {
        return Err(Error::DimensionMismatch(format!(
            "GBDT parameters: alpha {n}x{n}, sigma0 {:?}, theta1 {:?} (want {n}x{}), theta2 {:?} (want {n}x{})",
            sigma0.shape(),
            theta1.shape(),
            layout.m1,
            theta2.shape(),
            layout.m2
        )));
    }
    for (m, what) in [
        (&alpha, "alpha"),
        (&sigma0, "sigma0"),
        (&theta1, "theta1"),
        (&theta2, "theta2"),
    ] {
        linalg::ensure_finite(m, what)?;
    }
    let tol = tol_identity.unwrap_or_else(|| default_identity_tol(&alpha, &sigma0, &theta1, &theta2));
    if n > 0 {
        let herm = linalg::HermitianCheck::new(&sigma0, 1e-12 * (1.0 + linalg::norm2(&sigma0)));
        if !herm.accepted() {
            return Err(Error::NotHermitian {
                residual: herm.residual,
                tol: herm.tolerance,
            });
        }
        let lowest = linalg::min_eigenvalue(&sigma0);
        if lowest <= 0.0 {
            return Err(Error::SigmaNotPositive {
                min_eigenvalue: lowest,
            });
        }
    }
    let residual = identity_residual(&alpha, &sigma0, &theta1, &theta2);
    if residual > tol {
        return Err(Error::IdentityViolated { residual, tol });
    }
    Ok(GbdtParams {
        layout,
        sigma0: linalg::hermitian_part(&sigma0),
        alpha,
        theta1,
        theta2,
    })
}

impl GbdtParams {
    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn identity_residual(&self) -> f64 {
        identity_residual(&self.alpha, &self.sigma0, &self.theta1, &self.theta2)
    }

    /// `Λ(0) = [ϑ₁, ϑ₂]`.
    pub fn lambda0(&self) -> CMatrix {
        hstack(&self.theta1, &self.theta2)
    }
}

pub(crate) fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = linalg::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidGrid(format!("x = {x} must be finite and nonnegative")));
    }
    Ok(())
}

/// `Λ(x)` and `Σ(x)` by direct evaluation; `Σ` via two block-exponential integrals.
pub fn state_at(params: &GbdtParams, x: f64) -> Result<GbdtState> {
    check_x(x)?;
    let n = params.n();
    let m = params.layout.m();
    if n == 0 {
        return Ok(GbdtState {
            x,
            lambda: linalg::zeros(0, m),
            sigma: linalg::zeros(0, 0),
        });
    }
    let alpha = &params.alpha;
    let ix = c64(0.0, x);
    let lambda = hstack(
        &(linalg::expm(&(alpha * -ix))? * &params.theta1),
        &(linalg::expm(&(alpha * ix))? * &params.theta2),
    );
    let gram1 = &params.theta1 * params.theta1.adjoint();
    let gram2 = &params.theta2 * params.theta2.adjoint();
    let first = linalg::vanloan_integral(&(alpha * -I), &gram1, &(alpha.adjoint() * I), x)?;
    let second = linalg::vanloan_integral(&(alpha * I), &gram2, &(alpha.adjoint() * -I), x)?;
    let sigma = linalg::hermitian_part(&(&params.sigma0 + first + second));
    let lowest = linalg::min_eigenvalue(&sigma);
    if lowest <= 0.0 {
        return Err(Error::SigmaNotPositive {
            min_eigenvalue: lowest,
        });
    }
    Ok(GbdtState { x, lambda, sigma })
}

/// `‖αΣ(x) − Σ(x)α* − iΛ(x)jΛ(x)*‖`.
pub fn propagated_identity_residual(params: &GbdtParams, state: &GbdtState) -> f64 {
    let alpha = &params.alpha;
    let lhs = alpha * &state.sigma - &state.sigma * alpha.adjoint();
    let rhs = &state.lambda * params.layout.j() * state.lambda.adjoint() * I;
    linalg::norm2(&(lhs - rhs))
}

/// Evolves the GBDT data in a frame where `Σ = I`.
///
/// The potential and the transfer matrix are invariant under
/// `Λ → TΛ, Σ → TΣT*, α → TαT⁻¹`, so marching in small steps and
/// re-normalizing with the Cholesky factor of the step's `Σ` keeps every
/// quantity well conditioned even when `Σ(x)` itself has exponentially
/// separated eigenvalues.
#[derive(Debug, Clone)]
pub struct NormalizedFrame {
    layout: SignatureLayout,
    x: f64,
    alpha: CMatrix,
    lambda: CMatrix,
    tracked: CMatrix,
}

fn cholesky_lower(m: &CMatrix) -> Result<CMatrix> {
    let lowest = linalg::min_eigenvalue(m);
    nalgebra::Cholesky::new(linalg::hermitian_part(m))
        .map(|c| c.l())
        .ok_or(Error::SigmaNotPositive {
            min_eigenvalue: lowest,
        })
}

fn lower_solve(l: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if l.nrows() == 0 {
        return Ok(b.clone());
    }
    l.solve_lower_triangular(b)
        .ok_or(Error::SingularMatrix("triangular solve"))
}

impl NormalizedFrame {
    /// Frame at `x = 0`. Columns of `tracked` are carried as `T f` (for
    /// instance eigenvectors of `α`), so that `Λ*Σ⁻¹f = Λ'*(Tf)`.
    pub fn start(params: &GbdtParams, tracked: Option<&CMatrix>) -> Result<Self> {
        let n = params.n();
        let tracked = tracked.cloned().unwrap_or_else(|| linalg::zeros(n, 0));
        if tracked.nrows() != n {
            return Err(Error::DimensionMismatch("tracked vectors must have n rows".into()));
        }
        if n == 0 {
            return Ok(Self {
                layout: params.layout,
                x: 0.0,
                alpha: params.alpha.clone(),
                lambda: linalg::zeros(0, params.layout.m()),
                tracked,
            });
        }
        let l = cholesky_lower(&params.sigma0)?;
        let alpha = lower_solve(&l, &(&params.alpha * &l))?;
        Ok(Self {
            layout: params.layout,
            x: 0.0,
            alpha,
            lambda: lower_solve(&l, &params.lambda0())?,
            tracked: lower_solve(&l, &tracked)?,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    fn max_step(&self) -> f64 {
        let lam = linalg::norm2(&self.lambda);
        0.5 / (1.0 + linalg::norm2(&self.alpha) + lam * lam)
    }

    fn step(&mut self, h: f64) -> Result<()> {
        let m1 = self.layout.m1;
        let m2 = self.layout.m2;
        let alpha = &self.alpha;
        let ih = c64(0.0, h);
        let l1 = self.lambda.columns(0, m1).into_owned();
        let l2 = self.lambda.columns(m1, m2).into_owned();
        let n = alpha.nrows();
        let first = linalg::vanloan_integral(&(alpha * -I), &(&l1 * l1.adjoint()), &(alpha.adjoint() * I), h)?;
        let second = linalg::vanloan_integral(&(alpha * I), &(&l2 * l2.adjoint()), &(alpha.adjoint() * -I), h)?;
        let sigma_h = linalg::identity(n) + first + second;
        let lambda_h = hstack(
            &(linalg::expm(&(alpha * -ih))? * l1),
            &(linalg::expm(&(alpha * ih))? * l2),
        );
        let l = cholesky_lower(&sigma_h)?;
        self.alpha = lower_solve(&l, &(&self.alpha * &l))?;
        self.lambda = lower_solve(&l, &lambda_h)?;
        self.tracked = lower_solve(&l, &self.tracked)?;
        self.x += h;
        Ok(())
    }

    /// Marches to `target ≥ x` in steps bounded by the frame's scale.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        check_x(target)?;
        if target < self.x {
            return Err(Error::InvalidGrid(format!(
                "cannot march backwards from {} to {target}",
                self.x
            )));
        }
        if self.alpha.nrows() == 0 {
            self.x = target;
            return Ok(());
        }
        while target - self.x > 0.0 {
            let remaining = target - self.x;
            let h = remaining.min(self.max_step());
            if remaining - h <= 1e-14 * target.max(1.0) {
                self.step(remaining)?;
                self.x = target;
            } else {
                self.step(h)?;
            }
        }
        Ok(())
    }

    /// `v(x) = −2i Λ₁'* Λ₂'`.
    pub fn potential(&self) -> CMatrix {
        let (m1, m2) = (self.layout.m1, self.layout.m2);
        if self.alpha.nrows() == 0 {
            return linalg::zeros(m1, m2);
        }
        let l1 = self.lambda.columns(0, m1);
        let l2 = self.lambda.columns(m1, m2);
        l1.adjoint() * l2 * c64(0.0, -2.0)
    }

    /// `w(x, z) = I + ij Λ'*(zI − α')⁻¹Λ'` (conditioning of `z` is checked by the caller).
    pub fn transfer(&self, z: num_complex::Complex64) -> Result<CMatrix> {
        let m = self.layout.m();
        let n = self.alpha.nrows();
        if n == 0 {
            return Ok(linalg::identity(m));
        }
        let resolvent_lambda = linalg::solve(&(linalg::identity(n) * z - &self.alpha), &self.lambda)?;
        Ok(linalg::identity(m) + self.layout.j() * self.lambda.adjoint() * resolvent_lambda * I)
    }

    /// `jΛ(x)*Σ(x)⁻¹ f` for each tracked vector `f`.
    pub fn tracked_image(&self) -> CMatrix {
        self.layout.j() * self.lambda.adjoint() * &self.tracked
    }

    /// `Λ*Σ⁻¹Λ` in frame form (`Λ'*Λ'`); frame invariant.
    pub fn gram(&self) -> CMatrix {
        self.lambda.adjoint() * &self.lambda
    }
}

/// `v(x) = −2i ϑ₁* e^{ixα*} Σ(x)⁻¹ e^{ixα} ϑ₂`.
pub fn potential_at(params: &GbdtParams, x: f64) -> Result<CMatrix> {
    check_x(x)?;
    let mut frame = NormalizedFrame::start(params, None)?;
    frame.advance_to(x)?;
    Ok(frame.potential())
}

/// Number of nodes of the uniform grid `0, step, …, ≤ x_max`.
pub fn grid_len(x_max: f64, step: f64) -> Result<usize> {
    if !(x_max > 0.0 && step > 0.0 && x_max.is_finite() && step.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "x_max = {x_max} and step = {step} must be positive"
        )));
    }
    Ok((x_max / step + 1e-9).floor() as usize + 1)
}

/// Samples `v` at `x_k = k·step`, `k = 0, …, floor(x_max/step)`.
pub fn sample_potential(params: &GbdtParams, x_max: f64, step: f64) -> Result<SampledPotential> {
    let len = grid_len(x_max, step)?;
    let mut frame = NormalizedFrame::start(params, None)?;
    let mut xs = Vec::with_capacity(len);
    let mut vs = Vec::with_capacity(len);
    for k in 0..len {
        let x = k as f64 * step;
        frame.advance_to(x)?;
        xs.push(x);
        vs.push(frame.potential());
    }
    SampledPotential::new(params.layout, xs, vs)
}

/// Rejects `z` too close to the spectrum of `α`.
pub fn check_resolvent(alpha: &CMatrix, z: num_complex::Complex64) -> Result<()> {
    let n = alpha.nrows();
    if n == 0 {
        return Ok(());
    }
    let shifted = linalg::identity(n) * z - alpha;
    let sigma_min = linalg::min_singular_value(&shifted);
    let cap = 1e-12 * (z.norm() + linalg::norm2(alpha));
    if sigma_min <= cap {
        return Err(Error::ZNearSpectrum { sigma_min, cap });
    }
    Ok(())
}

/// `w_α(x, z) = I_m + ij Λ(x)*Σ(x)⁻¹(zI − α)⁻¹Λ(x)`.
pub fn transfer_w(params: &GbdtParams, x: f64, z: num_complex::Complex64) -> Result<CMatrix> {
    check_resolvent(&params.alpha, z)?;
    let mut frame = NormalizedFrame::start(params, None)?;
    frame.advance_to(x)?;
    frame.transfer(z)
}

/// `e^{ixzj} = diag(e^{ixz} I_{m1}, e^{−ixz} I_{m2})`.
pub fn free_solution(layout: SignatureLayout, x: f64, z: num_complex::Complex64) -> CMatrix {
    let up = (I * z * x).exp();
    let down = (-I * z * x).exp();
    CMatrix::from_fn(layout.m(), layout.m(), |r, c| match (r == c, r < layout.m1) {
        (true, true) => up,
        (true, false) => down,
        _ => linalg::ZERO,
    })
}

/// Closed-form fundamental solution `u(x, z) = w(x, z) e^{ixzj} w(0, z)⁻¹`.
pub fn fundamental_closed(params: &GbdtParams, x: f64, z: num_complex::Complex64) -> Result<CMatrix> {
    let w0 = transfer_w(params, 0.0, z)?;
    let s = linalg::singular_values(&w0);
    if s.last().copied().unwrap_or(0.0) < 1e-12 * s.first().copied().unwrap_or(0.0) {
        return Err(Error::SingularNormalization);
    }
    let w0_inv = linalg::inverse(&w0).map_err(|_| Error::SingularNormalization)?;
    let wx = transfer_w(params, x, z)?;
    Ok(wx * free_solution(params.layout, x, z) * w0_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{scalar, ZERO};

    fn layout11() -> SignatureLayout {
        SignatureLayout::new(1, 1).unwrap()
    }

    pub(crate) fn scalar_model() -> GbdtParams {
        make_gbdt(layout11(), scalar(ZERO), scalar(ONE), scalar(ONE), scalar(ONE), None).unwrap()
    }

    fn growing_model() -> GbdtParams {
        make_gbdt(
            layout11(),
            scalar(I),
            scalar(ONE),
            scalar(c64(2f64.sqrt(), 0.0)),
            scalar(ZERO),
            None,
        )
        .unwrap()
    }

    #[test]
    fn layout_rejects_empty_blocks() {
        assert!(SignatureLayout::new(0, 2).is_err());
        let l = SignatureLayout::new(2, 1).unwrap();
        let j = l.j();
        assert_eq!(&j * &j, linalg::identity(3));
    }

    #[test]
    fn make_gbdt_examples() {
        assert_eq!(scalar_model().identity_residual(), 0.0);
        let bad = make_gbdt(layout11(), scalar(ZERO), scalar(ONE), scalar(ONE), scalar(c64(2.0, 0.0)), None);
        assert!(matches!(bad, Err(Error::IdentityViolated { .. })));
        assert!(growing_model().identity_residual() < 1e-15);
        let not_pos = make_gbdt(layout11(), scalar(ZERO), scalar(-ONE), scalar(ONE), scalar(ONE), None);
        assert!(matches!(not_pos, Err(Error::SigmaNotPositive { .. })));
    }

    #[test]
    fn state_examples() {
        let p = scalar_model();
        let s = state_at(&p, 1.0).unwrap();
        assert!((s.sigma[(0, 0)] - c64(3.0, 0.0)).norm() < 1e-13);
        let s0 = state_at(&p, 0.0).unwrap();
        assert_eq!(s0.sigma, p.sigma0);
        assert_eq!(s0.lambda, p.lambda0());
        for &x in &[0.5, 1.0, 3.0] {
            let s = state_at(&growing_model(), x).unwrap();
            let expected = (2.0 * x).exp();
            assert!((s.sigma[(0, 0)].re - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn potential_examples() {
        let p = scalar_model();
        assert!((potential_at(&p, 0.0).unwrap()[(0, 0)] - c64(0.0, -2.0)).norm() < 1e-15);
        assert!((potential_at(&p, 1.0).unwrap()[(0, 0)] - c64(0.0, -2.0 / 3.0)).norm() < 1e-14);
        let zero = potential_at(&growing_model(), 2.0).unwrap();
        assert_eq!(zero[(0, 0)], ZERO);
    }

    #[test]
    fn sample_examples() {
        let s = sample_potential(&scalar_model(), 1.0, 0.5).unwrap();
        assert_eq!(s.xs(), &[0.0, 0.5, 1.0]);
        let expected = [c64(0.0, -2.0), c64(0.0, -1.0), c64(0.0, -2.0 / 3.0)];
        for (v, e) in s.vs().iter().zip(expected) {
            assert!((v[(0, 0)] - e).norm() < 1e-14);
        }
        assert_eq!(grid_len(1.0, 0.1).unwrap(), 11);
        assert_eq!(grid_len(1.05, 0.5).unwrap(), 3);
        assert!(sample_potential(&scalar_model(), 0.0, 0.1).is_err());
    }

    #[test]
    fn transfer_examples() {
        let p = scalar_model();
        let w = transfer_w(&p, 0.0, c64(0.0, 2.0)).unwrap();
        let expected = linalg::from_rows(&[
            vec![c64(1.5, 0.0), c64(0.5, 0.0)],
            vec![c64(-0.5, 0.0), c64(0.5, 0.0)],
        ]);
        assert!(linalg::norm2(&(w - expected)) < 1e-15);
        let j = p.layout.j();
        for &x in &[0.0, 1.0, 5.0] {
            let w = transfer_w(&p, x, c64(1.0, 0.0)).unwrap();
            assert!(linalg::norm2(&(w.adjoint() * &j * &w - &j)) < 1e-10);
        }
        assert!(matches!(transfer_w(&p, 0.0, ZERO), Err(Error::ZNearSpectrum { .. })));
    }

    #[test]
    fn fundamental_at_zero_and_free_case() {
        let p = scalar_model();
        let u0 = fundamental_closed(&p, 0.0, c64(1.0, 2.0)).unwrap();
        assert!(linalg::norm2(&(u0 - linalg::identity(2))) < 1e-14);
        let z = c64(0.7, 0.4);
        let u = fundamental_closed(&growing_model(), 1.3, z).unwrap();
        let free = free_solution(layout11(), 1.3, z);
        assert!(linalg::norm2(&(u - free)) < 1e-12);
    }

    #[test]
    fn frame_agrees_with_direct_formula() {
        let p = growing_model();
        let direct = state_at(&p, 2.0).unwrap();
        let v_direct = direct.lambda.columns(0, 1).adjoint()
            * linalg::solve(&direct.sigma, &direct.lambda.columns(1, 1).into_owned()).unwrap()
            * c64(0.0, -2.0);
        assert!(linalg::norm2(&(v_direct - potential_at(&p, 2.0).unwrap())) < 1e-14);
    }
}
