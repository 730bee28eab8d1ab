//! Parametric surfaces, their differential geometry, quadrature, and the
//! normal perturbation map with its first-order expansions.

pub mod diffops;
pub mod expansion;
pub mod harmonics;
pub mod profile;
pub mod quadrature;
pub mod surface;
pub mod vec3;

pub use diffops::{laplace_beltrami, tangential_gradient, ParamStencils};
pub use expansion::{area_element_expansion, normal_expansion, PerturbationField};
pub use harmonics::RealHarmonic;
pub use profile::Profile;
pub use quadrature::{build_quadrature, ChartGrid, Node, SurfaceQuadrature};
pub use surface::{
    make_surface, mean_curvature, perturb_surface, LocalGeometry, ParametricSurface, Shape, SurfacePoint,
};
