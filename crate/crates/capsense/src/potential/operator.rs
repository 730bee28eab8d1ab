use faer::Mat;
use serde::Serialize;

use crate::density::DensityVector;
use crate::error::{Error, Result};
use crate::geometry::SurfaceQuadrature;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    S,
    K,
    Kstar,
    S1,
    K1,
}

/// Dense discretization of a boundary operator on one quadrature.
#[derive(Clone, Debug)]
pub struct BoundaryOperatorMatrix {
    pub kind: OperatorKind,
    pub entries: Mat<f64>,
    pub quad_id: u64,
}

impl BoundaryOperatorMatrix {
    pub fn from_rows(kind: OperatorKind, quad: &SurfaceQuadrature, rows: &[Vec<f64>]) -> Self {
        let n = quad.len();
        let entries = Mat::from_fn(n, n, |i, j| rows[i][j]);
        BoundaryOperatorMatrix { kind, entries, quad_id: quad.id }
    }

    pub fn zeros(kind: OperatorKind, quad: &SurfaceQuadrature) -> Self {
        BoundaryOperatorMatrix { kind, entries: Mat::zeros(quad.len(), quad.len()), quad_id: quad.id }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn check(&self, quad: &SurfaceQuadrature) -> Result<()> {
        if self.quad_id != quad.id {
            return Err(Error::QuadratureMismatch { expected: quad.id, found: self.quad_id });
        }
        Ok(())
    }

    /// Matrix–vector product accumulated column by column in index order.
    pub fn apply_values(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut y = vec![0.0; n];
        for j in 0..n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let col = self.entries.col(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
        y
    }

    pub fn apply(&self, density: &DensityVector) -> Result<DensityVector> {
        if density.quad_id != self.quad_id {
            return Err(Error::QuadratureMismatch { expected: self.quad_id, found: density.quad_id });
        }
        Ok(DensityVector { values: self.apply_values(&density.values), quad_id: self.quad_id })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}
