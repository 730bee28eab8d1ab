//! Dense first-kind solves for the equilibrium density and the exterior
//! Dirichlet problem, and evaluation of the resulting potentials.

use std::f64::consts::PI;
use std::sync::Once;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use log::warn;
use serde::Serialize;

use crate::density::DensityVector;
use crate::error::{Error, Result};
use crate::geometry::vec3::scale;
use crate::geometry::SurfaceQuadrature;
use crate::potential::{eval_double_layer, eval_single_layer, BoundaryOperators};

pub const CONDITION_WARN: f64 = 1e8;
pub const CONDITION_ERROR: f64 = 1e12;
/// Far-field samples must sit at least this many diameters out.
pub const FAR_FIELD_MIN_DIAMETERS: f64 = 50.0;

static SEQUENTIAL_DENSE: Once = Once::new();

/// Dense factorizations and eigensolves run sequentially so their rounding
/// never depends on the worker count; assembly carries the parallelism.
pub(crate) fn pin_dense_parallelism() {
    SEQUENTIAL_DENSE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Run `f` on a dedicated pool of `threads` workers (0 = rayon's default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// The operators of one surface together with the factorized single layer.
pub struct BoundarySolver<'q> {
    pub quad: &'q SurfaceQuadrature,
    pub ops: BoundaryOperators,
    pub condition: f64,
    lu: PartialPivLu<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumSolution {
    /// `∂u/∂n` on the surface.
    pub density: DensityVector,
    pub capacity: f64,
    pub condition: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletSolution {
    pub data: DensityVector,
    /// `∂w/∂n` on the surface.
    pub density: DensityVector,
}

/// Anything with an off-surface representation formula.
pub trait ExteriorField {
    fn potential(&self, quad: &SurfaceQuadrature, x: [f64; 3]) -> Result<f64>;
}

impl ExteriorField for EquilibriumSolution {
    fn potential(&self, quad: &SurfaceQuadrature, x: [f64; 3]) -> Result<f64> {
        eval_single_layer(quad, &self.density, x)
    }
}

impl ExteriorField for DirichletSolution {
    /// `w = S[φ] − D[f]`.
    fn potential(&self, quad: &SurfaceQuadrature, x: [f64; 3]) -> Result<f64> {
        Ok(eval_single_layer(quad, &self.density, x)? - eval_double_layer(quad, &self.data, x)?)
    }
}

/// Hager's estimate of `‖A⁻¹‖₁` from a factorization.
fn inverse_norm1(lu: &PartialPivLu<f64>, n: usize) -> f64 {
    let mut x = Mat::<f64>::from_fn(n, 1, |_, _| 1.0 / n as f64);
    let mut best = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x);
        let est: f64 = (0..n).map(|i| y[(i, 0)].abs()).sum();
        if est <= best {
            break;
        }
        best = est;
        let xi = Mat::<f64>::from_fn(n, 1, |i, _| if y[(i, 0)] >= 0.0 { 1.0 } else { -1.0 });
        let z = lu.solve_transpose(&xi);
        let (mut jmax, mut zmax) = (0, 0.0);
        for i in 0..n {
            if z[(i, 0)].abs() > zmax {
                zmax = z[(i, 0)].abs();
                jmax = i;
            }
        }
        let ztx: f64 = (0..n).map(|i| z[(i, 0)] * x[(i, 0)]).sum();
        if zmax <= ztx {
            break;
        }
        x = Mat::<f64>::from_fn(n, 1, |i, _| if i == jmax { 1.0 } else { 0.0 });
    }
    best
}

fn norm1(a: &Mat<f64>) -> f64 {
    (0..a.ncols()).map(|j| a.col(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl<'q> BoundarySolver<'q> {
    pub fn new(quad: &'q SurfaceQuadrature) -> Result<Self> {
        Self::with_operators(quad, BoundaryOperators::assemble(quad)?)
    }

    pub fn with_operators(quad: &'q SurfaceQuadrature, ops: BoundaryOperators) -> Result<Self> {
        ops.s.check(quad)?;
        pin_dense_parallelism();
        let n = quad.len();
        let lu = ops.s.entries.partial_piv_lu();
        let condition = norm1(&ops.s.entries) * inverse_norm1(&lu, n);
        if !condition.is_finite() || condition > CONDITION_ERROR {
            return Err(Error::IllConditioned(condition));
        }
        if condition > CONDITION_WARN {
            warn!("single-layer matrix condition estimate {condition:.3e}");
        }
        Ok(BoundarySolver { quad, ops, condition, lu })
    }

    /// Solve `S φ = rhs`.
    pub fn solve_single_layer(&self, rhs: &DensityVector) -> Result<DensityVector> {
        rhs.check(self.quad)?;
        let n = self.quad.len();
        let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs.values[i]);
        let x = self.lu.solve(&b);
        Ok(DensityVector { values: (0..n).map(|i| x[(i, 0)]).collect(), quad_id: self.quad.id })
    }

    /// `S[φ₀] = 1`; capacity by Gauss' integral `−(1/4π)∫φ₀`.
    pub fn equilibrium(&self) -> Result<EquilibriumSolution> {
        let density = self.solve_single_layer(&DensityVector::constant(self.quad, 1.0))?;
        let capacity = -gauss_integral(self.quad, &density) / (4.0 * PI);
        if let Some(i) = density.values.iter().position(|&v| v >= 0.0) {
            warn!("equilibrium density is not negative at node {i}");
        }
        Ok(EquilibriumSolution { density, capacity, condition: self.condition })
    }

    /// `S[φ] = (½I + K)[f]`.
    pub fn dirichlet(&self, f: &DensityVector) -> Result<DirichletSolution> {
        f.check(self.quad)?;
        let mut rhs = self.ops.k(self.quad)?.apply(f)?;
        for (r, v) in rhs.values.iter_mut().zip(&f.values) {
            *r += 0.5 * v;
        }
        let density = self.solve_single_layer(&rhs)?;
        Ok(DirichletSolution { data: f.clone(), density })
    }
}

pub fn gauss_integral(quad: &SurfaceQuadrature, density: &DensityVector) -> f64 {
    quad.nodes.iter().zip(&density.values).map(|(n, v)| n.weight * v).sum()
}

pub fn solve_equilibrium(quad: &SurfaceQuadrature) -> Result<EquilibriumSolution> {
    BoundarySolver::new(quad)?.equilibrium()
}

pub fn solve_exterior_dirichlet(quad: &SurfaceQuadrature, f: &DensityVector) -> Result<DirichletSolution> {
    BoundarySolver::new(quad)?.dirichlet(f)
}

pub fn eval_potential(quad: &SurfaceQuadrature, field: &impl ExteriorField, x: [f64; 3]) -> Result<f64> {
    field.potential(quad, x)
}

/// The 26 normalized directions of the `{−1,0,1}³ ∖ {0}` stencil.
pub fn far_field_directions() -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(26);
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                if (a, b, c) != (0, 0, 0) {
                    let v = [a as f64, b as f64, c as f64];
                    out.push(scale(v, 1.0 / (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()));
                }
            }
        }
    }
    out
}

/// Mean of `|x|·u(x)` over the fixed direction set at `|x| = radius`.
pub fn far_field_coefficient(quad: &SurfaceQuadrature, field: &impl ExteriorField, radius: f64) -> Result<f64> {
    let minimum = FAR_FIELD_MIN_DIAMETERS * quad.surface.diameter();
    if !(radius >= minimum * (1.0 - 1e-12)) {
        return Err(Error::RadiusTooSmall { radius, minimum });
    }
    let dirs = far_field_directions();
    let mut sum = 0.0;
    for d in &dirs {
        sum += radius * field.potential(quad, scale(*d, radius))?;
    }
    Ok(sum / dirs.len() as f64)
}
