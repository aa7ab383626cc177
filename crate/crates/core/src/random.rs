//! Random instances for property checks, benchmarks, and the CLI demo configs.

use rand::Rng;

use crate::error::Result;
use crate::gbdt::{self, GbdtParams, SignatureLayout};
use crate::linalg::{self, c64, CMatrix, I};
use crate::propagator::SampledPotential;
use crate::weyl_inverse::{self, Realization};

/// Entries with real and imaginary parts uniform on `[−1, 1]`.
pub fn cmatrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    linalg::hermitian_part(&cmatrix(rng, n, n))
}

/// Positive definite with smallest eigenvalue at least `floor`.
pub fn positive_definite<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> CMatrix {
    let m = cmatrix(rng, n, n);
    linalg::hermitian_part(&(&m * m.adjoint() + linalg::identity(n) * c64(floor, 0.0)))
}

/// Matrix with operator norm uniform on `[0, radius]`.
pub fn contraction<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, radius: f64) -> CMatrix {
    let m = cmatrix(rng, rows, cols);
    let norm = linalg::norm2(&m);
    if norm == 0.0 {
        return m;
    }
    m * c64(radius * rng.gen::<f64>() / norm, 0.0)
}

/// Generating matrices satisfying the identity by construction:
/// `α = ((i/2)(ϑ₁ϑ₁* − ϑ₂ϑ₂*) + H)Σ₀⁻¹` with `H` Hermitian.
pub fn valid_params<R: Rng + ?Sized>(rng: &mut R, layout: SignatureLayout, n: usize) -> Result<GbdtParams> {
    let sigma0 = positive_definite(rng, n, 0.5);
    let theta1 = cmatrix(rng, n, layout.m1);
    let theta2 = cmatrix(rng, n, layout.m2);
    let d = &theta1 * theta1.adjoint() - &theta2 * theta2.adjoint();
    let h = hermitian(rng, n);
    let alpha = if n == 0 {
        linalg::zeros(0, 0)
    } else {
        linalg::solve(&sigma0, &(d * c64(0.0, -0.5) + h))?.adjoint()
    };
    gbdt::make_gbdt(layout, alpha, sigma0, theta1, theta2, None)
}

/// Dense sample of `sup_t ‖φ(t)‖`: a fine uniform grid around the poles
/// plus the default Chebyshev grid.
pub fn real_axis_sup(r: &Realization) -> Result<f64> {
    let reach = 2.0 * (1.0 + linalg::norm2(&r.a));
    let fine = 4000;
    let mut points: Vec<f64> = (0..=fine)
        .map(|k| -reach + 2.0 * reach * k as f64 / fine as f64)
        .collect();
    points.extend(weyl_inverse::default_real_grid());
    points.extend(linalg::eigenvalues(&r.a)?.iter().map(|p| p.re));
    let mut sup: f64 = 0.0;
    for t in points {
        sup = sup.max(linalg::norm2(&weyl_inverse::eval_transfer(r, c64(t, 0.0))?));
    }
    Ok(sup)
}

/// Stable realization of order `n` scaled so that `sup_t ‖φ(t)‖ ≈ target`.
/// Poles are pushed to `Im λ ≤ −0.3`.
pub fn admissible_realization<R: Rng + ?Sized>(
    rng: &mut R,
    m1: usize,
    m2: usize,
    n: usize,
    target: f64,
) -> Result<Realization> {
    let mut a = cmatrix(rng, n, n);
    if n > 0 {
        let top = linalg::eigenvalues(&a)?.iter().map(|p| p.im).fold(f64::NEG_INFINITY, f64::max);
        let shift = top + 0.3 + 0.7 * rng.gen::<f64>();
        a -= linalg::identity(n) * (I * shift);
    }
    let b = cmatrix(rng, n, m1);
    let c = cmatrix(rng, m2, n);
    let r = Realization::new(c, a, b)?;
    let sup = real_axis_sup(&r)?;
    if sup == 0.0 {
        return Ok(r);
    }
    Realization::new(r.c * c64(target / sup, 0.0), r.a, r.b)
}

/// Smooth bounded potential `v(x) = P + Q e^{−x/4} cos(ωx)`.
pub fn smooth_potential<R: Rng + ?Sized>(
    rng: &mut R,
    layout: SignatureLayout,
    x_max: f64,
    step: f64,
) -> Result<SampledPotential> {
    let p = cmatrix(rng, layout.m1, layout.m2) * c64(0.5, 0.0);
    let q = cmatrix(rng, layout.m1, layout.m2);
    let omega = rng.gen_range(0.5..3.0);
    SampledPotential::from_fn(layout, x_max, step, |x| {
        &p + &q * c64((-x / 4.0).exp() * (omega * x).cos(), 0.0)
    })
}
