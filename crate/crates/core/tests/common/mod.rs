#![allow(dead_code)]

use dirac_weyl::gbdt::{self, GbdtParams, SignatureLayout};
use dirac_weyl::linalg::{self, c64, scalar, CMatrix, ONE, ZERO};

pub fn scalar_model() -> GbdtParams {
    gbdt::make_gbdt(SignatureLayout::new(1, 1).unwrap(), scalar(ZERO), scalar(ONE), scalar(ONE), scalar(ONE), None).unwrap()
}

/// n = 2, m1 = m2 = 1 parameters whose θ has the real eigenvalue `lambda`
/// with eigenvector `T e₁`.
///
/// In the frame Σ₀ = I: α = diag(λ, q), ϑ₁ = [0; a], ϑ₂ = [0; b] with
/// Im q = (|a|² − |b|²)/2, which is exactly the generating identity. The
/// congruence Σ₀ = TT*, α → TαT⁻¹, ϑ → Tϑ hides the structure.
pub fn real_eigenvalue_instance(lambda: f64) -> (GbdtParams, CMatrix) {
    let a = c64(0.8, 0.3);
    let b = c64(-0.4, 0.9);
    let q = c64(0.7, (a.norm_sqr() - b.norm_sqr()) / 2.0);
    let alpha = linalg::from_rows(&[vec![c64(lambda, 0.0), ZERO], vec![ZERO, q]]);
    let theta1 = linalg::from_rows(&[vec![ZERO], vec![a]]);
    let theta2 = linalg::from_rows(&[vec![ZERO], vec![b]]);
    let t = linalg::from_rows(&[vec![c64(1.2, 0.1), c64(-0.3, 0.5)], vec![c64(0.4, -0.2), c64(0.9, 0.0)]]);
    let t_inv = linalg::inverse(&t).unwrap();
    let params = gbdt::make_gbdt(
        SignatureLayout::new(1, 1).unwrap(),
        &t * alpha * t_inv,
        &t * t.adjoint(),
        &t * theta1,
        &t * theta2,
        None,
    )
    .unwrap();
    let f = t.column(0).into_owned();
    (params, CMatrix::from_column_slice(2, 1, f.as_slice()))
}
