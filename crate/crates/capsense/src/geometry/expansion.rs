use rayon::prelude::*;

use super::profile::Profile;
use super::quadrature::{Node, SurfaceQuadrature};
use super::vec3::{axpy, scale};
use crate::jet::Real;

/// Nodal samples of `h` and its tangential gradient on one quadrature.
#[derive(Clone, Debug)]
pub struct PerturbationField {
    pub profile: Profile,
    pub h: Vec<f64>,
    pub grad_t_h: Vec<[f64; 3]>,
    pub quad_id: u64,
}

impl PerturbationField {
    /// Sample `h` at the nodes; the tangential gradient comes from exact chart derivatives.
    pub fn new(quad: &SurfaceQuadrature, profile: &Profile) -> Self {
        let n = quad.len();
        if profile.is_zero() {
            return PerturbationField {
                profile: Profile::Zero,
                h: vec![0.0; n],
                grad_t_h: vec![[0.0; 3]; n],
                quad_id: quad.id,
            };
        }
        let (h, grad_t_h): (Vec<f64>, Vec<[f64; 3]>) = quad
            .nodes
            .par_iter()
            .map(|node| {
                let j = quad.surface.profile_jet(profile, node.chart, node.xi, node.theta);
                (j.value(), surface_gradient(node, j.deriv(1, 0), j.deriv(0, 1)))
            })
            .unzip();
        PerturbationField { profile: profile.clone(), h, grad_t_h, quad_id: quad.id }
    }

    pub fn is_zero(&self) -> bool {
        self.profile.is_zero()
    }
}

/// `G^{ij} f_j X_i` from parameter derivatives `(f_ξ, f_θ)`.
pub fn surface_gradient(node: &Node, fu: f64, fv: f64) -> [f64; 3] {
    let [[e, f], [_, g]] = node.metric;
    let det = e * g - f * f;
    let a = (g * fu - f * fv) / det;
    let b = (e * fv - f * fu) / det;
    axpy(a, node.geometry.xu, scale(node.geometry.xv, b))
}

/// `(n⁰, n¹)` with `n¹ = −∇_T h`.
pub fn normal_expansion(node: &Node, field: &PerturbationField, index: usize) -> ([f64; 3], [f64; 3]) {
    (node.normal, scale(field.grad_t_h[index], -1.0))
}

/// `(σ⁰, σ¹) = (1, −2 h τ)`.
pub fn area_element_expansion(node: &Node, field: &PerturbationField, index: usize) -> (f64, f64) {
    if field.is_zero() {
        return (1.0, 0.0);
    }
    (1.0, -2.0 * field.h[index] * node.tau)
}
