//! Numerical fundamental solution of `y' = i(zj + jV(x))y` for sampled potentials.
//!
//! Exponential midpoint stepping: `u_{k+1} = exp(i h_k (zj + jV_mid)) u_k`
//! with `V_mid` the average of the neighbouring samples. The inverse
//! `u(x, z)⁻¹` is accumulated alongside from the inverse step factors so that
//! the direct-problem code can form `𝔄⁻¹ = u⁻¹ j u⁻*` without inverting the
//! exponentially ill-conditioned `u`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gbdt::SignatureLayout;
use crate::linalg::{self, c64, CMatrix, I};

/// Potential samples `v(x_k)` on an ascending grid starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    layout: SignatureLayout,
    xs: Vec<f64>,
    vs: Vec<CMatrix>,
}

impl SampledPotential {
    pub fn new(layout: SignatureLayout, xs: Vec<f64>, vs: Vec<CMatrix>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if xs.len() != vs.len() {
            return Err(Error::InvalidGrid(format!(
                "{} nodes but {} samples",
                xs.len(),
                vs.len()
            )));
        }
        if xs[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("grid starts at {} instead of 0", xs[0])));
        }
        if let Some(w) = xs.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        for v in &vs {
            if v.shape() != (layout.m1, layout.m2) {
                return Err(Error::DimensionMismatch(format!(
                    "potential sample is {:?}, expected {}x{}",
                    v.shape(),
                    layout.m1,
                    layout.m2
                )));
            }
            linalg::ensure_finite(v, "potential sample")?;
        }
        Ok(Self { layout, xs, vs })
    }

    /// Uniform grid with a constant sample value.
    pub fn constant(layout: SignatureLayout, v: CMatrix, x_max: f64, step: f64) -> Result<Self> {
        let len = crate::gbdt::grid_len(x_max, step)?;
        let xs = (0..len).map(|k| k as f64 * step).collect();
        Self::new(layout, xs, vec![v; len])
    }

    pub fn zero(layout: SignatureLayout, x_max: f64, step: f64) -> Result<Self> {
        Self::constant(layout, linalg::zeros(layout.m1, layout.m2), x_max, step)
    }

    /// Uniform grid sampled from a closure.
    pub fn from_fn(
        layout: SignatureLayout,
        x_max: f64,
        step: f64,
        f: impl Fn(f64) -> CMatrix,
    ) -> Result<Self> {
        let len = crate::gbdt::grid_len(x_max, step)?;
        let xs: Vec<f64> = (0..len).map(|k| k as f64 * step).collect();
        let vs = xs.iter().map(|&x| f(x)).collect();
        Self::new(layout, xs, vs)
    }

    pub fn layout(&self) -> SignatureLayout {
        self.layout
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn vs(&self) -> &[CMatrix] {
        &self.vs
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x_last(&self) -> f64 {
        *self.xs.last().expect("grid is nonempty")
    }

    /// Index of the last node `≤ x` (0 if `x` precedes the grid).
    pub fn index_at_or_below(&self, x: f64) -> usize {
        let tol = 1e-12 * x.abs().max(1.0);
        self.xs.partition_point(|&node| node <= x + tol).saturating_sub(1)
    }

    /// Nodes up to and including the last node `≤ x`.
    pub fn truncated(&self, x: f64) -> Self {
        let end = self.index_at_or_below(x) + 1;
        Self {
            layout: self.layout,
            xs: self.xs[..end].to_vec(),
            vs: self.vs[..end].to_vec(),
        }
    }

    /// Every other node, always keeping the last one.
    pub fn coarsened(&self) -> Self {
        let last = self.len() - 1;
        let keep: Vec<usize> = (0..self.len()).filter(|&k| k % 2 == 0 || k == last).collect();
        Self {
            layout: self.layout,
            xs: keep.iter().map(|&k| self.xs[k]).collect(),
            vs: keep.iter().map(|&k| self.vs[k].clone()).collect(),
        }
    }

    /// `sup_k ‖v(x_k)‖` over nodes `x_k ≤ l` (equals `sup ‖V‖`).
    pub fn sup_norm_up_to(&self, l: f64) -> f64 {
        let end = self.index_at_or_below(l) + 1;
        self.vs[..end].iter().map(linalg::norm2).fold(0.0, f64::max)
    }

    /// `V` at the midpoint of interval `k` from linear interpolation.
    fn midpoint_v(&self, k: usize) -> CMatrix {
        let mid = (&self.vs[k] + &self.vs[k + 1]) * c64(0.5, 0.0);
        self.layout.potential_matrix(&mid)
    }
}

/// `u(x_k, z)` and `u(x_k, z)⁻¹` on the potential's grid.
#[derive(Debug, Clone)]
pub struct PropagatorResult {
    pub z: Complex64,
    pub layout: SignatureLayout,
    pub xs: Vec<f64>,
    pub us: Vec<CMatrix>,
    pub us_inv: Vec<CMatrix>,
}

/// Exponential-midpoint propagation of the normalized fundamental solution.
pub fn propagate(potential: &SampledPotential, z: Complex64) -> Result<PropagatorResult> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("spectral parameter z"));
    }
    let layout = potential.layout();
    let m = layout.m();
    let j = layout.j();
    let zj = &j * z;
    let len = potential.len();
    let mut us = Vec::with_capacity(len);
    let mut us_inv = Vec::with_capacity(len);
    us.push(linalg::identity(m));
    us_inv.push(linalg::identity(m));
    for k in 0..len - 1 {
        let h = potential.xs[k + 1] - potential.xs[k];
        let generator = (&zj + &j * potential.midpoint_v(k)) * (I * h);
        let forward = linalg::expm(&generator)?;
        let backward = linalg::expm(&(-generator))?;
        let next = &forward * &us[k];
        let next_inv = &us_inv[k] * &backward;
        linalg::ensure_finite(&next, "fundamental solution")?;
        us.push(next);
        us_inv.push(next_inv);
    }
    Ok(PropagatorResult {
        z,
        layout,
        xs: potential.xs.clone(),
        us,
        us_inv,
    })
}

impl PropagatorResult {
    pub fn len(&self) -> usize {
        self.us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.us.is_empty()
    }

    /// `𝔄(x_k, z) = u* j u`, symmetrized.
    pub fn a_matrix(&self, k: usize) -> CMatrix {
        let u = &self.us[k];
        linalg::hermitian_part(&(u.adjoint() * self.layout.j() * u))
    }

    /// `𝔄(x_k, z)⁻¹ = u⁻¹ j u⁻*`, symmetrized.
    pub fn a_inverse(&self, k: usize) -> CMatrix {
        let v = &self.us_inv[k];
        linalg::hermitian_part(&(v * self.layout.j() * v.adjoint()))
    }
}

/// `𝔄(x_k, z)` for a propagation result (free-function form).
pub fn a_matrix(result: &PropagatorResult, k: usize) -> CMatrix {
    result.a_matrix(k)
}
