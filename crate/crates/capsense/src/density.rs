use crate::error::{Error, Result};
use crate::geometry::SurfaceQuadrature;

/// Nodal values of a boundary density, bound to one quadrature.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DensityVector {
    pub values: Vec<f64>,
    pub quad_id: u64,
}

impl DensityVector {
    pub fn new(quad: &SurfaceQuadrature, values: Vec<f64>) -> Result<Self> {
        if values.len() != quad.len() {
            return Err(Error::Domain(format!(
                "density has {} values but the quadrature has {} nodes",
                values.len(),
                quad.len()
            )));
        }
        Ok(DensityVector { values, quad_id: quad.id })
    }

    pub fn constant(quad: &SurfaceQuadrature, v: f64) -> Self {
        DensityVector { values: vec![v; quad.len()], quad_id: quad.id }
    }

    pub fn zeros(quad: &SurfaceQuadrature) -> Self {
        Self::constant(quad, 0.0)
    }

    pub fn from_fn(quad: &SurfaceQuadrature, f: impl Fn([f64; 3]) -> f64) -> Self {
        DensityVector { values: quad.nodes.iter().map(|n| f(n.position)).collect(), quad_id: quad.id }
    }

    pub fn check(&self, quad: &SurfaceQuadrature) -> Result<()> {
        if self.quad_id != quad.id {
            return Err(Error::QuadratureMismatch { expected: quad.id, found: self.quad_id });
        }
        Ok(())
    }

    /// Re-bind nodal values to a quadrature with the same node layout
    /// (the pullback along Ψ_ε is node-index identity).
    pub fn pull_back(&self, from: &SurfaceQuadrature, to: &SurfaceQuadrature) -> Result<Self> {
        self.check(from)?;
        if !from.same_layout(to) {
            return Err(Error::Domain("pullback needs quadratures with the same node layout".into()));
        }
        Ok(DensityVector { values: self.values.clone(), quad_id: to.id })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
