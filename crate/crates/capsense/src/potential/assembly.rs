use std::sync::OnceLock;

use rayon::prelude::*;

use super::kernels::{double, single, Kernel};
use super::nearfield::{DensityModel, NearField, Target};
use super::operator::{BoundaryOperatorMatrix, OperatorKind};
use crate::density::DensityVector;
use crate::error::{Error, Result};
use crate::geometry::vec3::{norm, sub};
use crate::geometry::SurfaceQuadrature;

/// Single-layer operator with on-surface rows integrated cell by cell
/// (polar rule in the target's own cell, adaptive rules nearby).
pub fn assemble_s(quad: &SurfaceQuadrature) -> BoundaryOperatorMatrix {
    let nf = NearField::new(quad, DensityModel::Interpolated);
    assemble_s_with(quad, &nf)
}

pub fn assemble_s_with(quad: &SurfaceQuadrature, nf: &NearField) -> BoundaryOperatorMatrix {
    assert_eq!(nf.quad_id, quad.id);
    let rows: Vec<Vec<f64>> = (0..quad.len())
        .into_par_iter()
        .map(|i| nf.row(Kernel::Single, &[Target { x: quad.nodes[i].position, coef: 1.0 }], Some(i)))
        .collect();
    BoundaryOperatorMatrix::from_rows(OperatorKind::S, quad, &rows)
}

/// NP operator K by the point rule, diagonal completed so that `K[1] = ½`.
pub fn assemble_k(quad: &SurfaceQuadrature) -> BoundaryOperatorMatrix {
    let n = quad.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = quad.nodes[i].position;
            let mut row: Vec<f64> = quad
                .nodes
                .iter()
                .enumerate()
                .map(|(j, y)| if j == i { 0.0 } else { y.weight * double(x, y.position, y.normal) })
                .collect();
            let off: f64 = row.iter().sum();
            row[i] = 0.5 - off;
            row
        })
        .collect();
    BoundaryOperatorMatrix::from_rows(OperatorKind::K, quad, &rows)
}

/// K* as the weighted transpose of K: `w_i K*_ij = w_j K_ji`.
pub fn assemble_kstar(quad: &SurfaceQuadrature, k: &BoundaryOperatorMatrix) -> Result<BoundaryOperatorMatrix> {
    k.check(quad)?;
    if k.kind != OperatorKind::K {
        return Err(Error::Domain("assemble_kstar needs the K matrix".into()));
    }
    let w = quad.weights();
    let n = quad.len();
    let entries = faer::Mat::from_fn(n, n, |i, j| k.entries[(j, i)] * w[j] / w[i]);
    Ok(BoundaryOperatorMatrix { kind: OperatorKind::Kstar, entries, quad_id: quad.id })
}

/// `∂S[φ]/∂n|₊ = (½I + K*)[φ]`.
pub fn exterior_normal_derivative_s(
    quad: &SurfaceQuadrature,
    kstar: &BoundaryOperatorMatrix,
    density: &DensityVector,
) -> Result<DensityVector> {
    kstar.check(quad)?;
    density.check(quad)?;
    let mut out = kstar.apply(density)?;
    for (o, p) in out.values.iter_mut().zip(&density.values) {
        *o += 0.5 * p;
    }
    Ok(out)
}

fn near_field_guard(quad: &SurfaceQuadrature, x: [f64; 3]) -> Result<()> {
    let mut worst = f64::INFINITY;
    let mut required = 0.0;
    for n in &quad.nodes {
        let d = norm(sub(x, n.position));
        if d - 2.0 * n.spacing < worst {
            worst = d - 2.0 * n.spacing;
            required = 2.0 * n.spacing;
        }
    }
    if worst < 0.0 {
        return Err(Error::NearField { distance: worst + required, required });
    }
    Ok(())
}

/// Point-rule single-layer potential `Σ Γ(x − y_j) φ_j w_j` at an off-surface point.
pub fn eval_single_layer(quad: &SurfaceQuadrature, density: &DensityVector, x: [f64; 3]) -> Result<f64> {
    density.check(quad)?;
    near_field_guard(quad, x)?;
    Ok(quad.nodes.iter().zip(&density.values).map(|(n, p)| n.weight * p * single(x, n.position)).sum())
}

/// Point-rule double-layer potential at an off-surface point.
pub fn eval_double_layer(quad: &SurfaceQuadrature, density: &DensityVector, x: [f64; 3]) -> Result<f64> {
    density.check(quad)?;
    near_field_guard(quad, x)?;
    Ok(quad
        .nodes
        .iter()
        .zip(&density.values)
        .map(|(n, p)| n.weight * p * double(x, n.position, n.normal))
        .sum())
}

/// The operators of one surface. The single layer is assembled eagerly; the
/// NP pair only when first asked for.
pub struct BoundaryOperators {
    pub s: BoundaryOperatorMatrix,
    pub nearfield: NearField,
    quad_id: u64,
    np: OnceLock<(BoundaryOperatorMatrix, BoundaryOperatorMatrix)>,
}

impl BoundaryOperators {
    pub fn assemble(quad: &SurfaceQuadrature) -> Result<Self> {
        let nearfield = NearField::new(quad, DensityModel::Interpolated);
        let s = assemble_s_with(quad, &nearfield);
        Ok(BoundaryOperators { s, nearfield, quad_id: quad.id, np: OnceLock::new() })
    }

    fn np(&self, quad: &SurfaceQuadrature) -> Result<&(BoundaryOperatorMatrix, BoundaryOperatorMatrix)> {
        if quad.id != self.quad_id {
            return Err(Error::QuadratureMismatch { expected: self.quad_id, found: quad.id });
        }
        if self.np.get().is_none() {
            let k = assemble_k(quad);
            let kstar = assemble_kstar(quad, &k)?;
            let _ = self.np.set((k, kstar));
        }
        Ok(self.np.get().expect("initialized above"))
    }

    pub fn k(&self, quad: &SurfaceQuadrature) -> Result<&BoundaryOperatorMatrix> {
        Ok(&self.np(quad)?.0)
    }

    pub fn kstar(&self, quad: &SurfaceQuadrature) -> Result<&BoundaryOperatorMatrix> {
        Ok(&self.np(quad)?.1)
    }
}

/// Layer potential at an arbitrary off-surface point through the cell engine;
/// usable inside the point rule's exclusion zone.
pub fn eval_layer_near(nf: &NearField, kernel: Kernel, density: &DensityVector, x: [f64; 3]) -> Result<f64> {
    if density.quad_id != nf.quad_id {
        return Err(Error::QuadratureMismatch { expected: nf.quad_id, found: density.quad_id });
    }
    let row = nf.row(kernel, &[Target { x, coef: 1.0 }], None);
    Ok(row.iter().zip(&density.values).map(|(r, p)| r * p).sum())
}
