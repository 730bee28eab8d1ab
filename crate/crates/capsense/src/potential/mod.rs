//! Layer potentials and their boundary operators.

pub mod assembly;
pub mod kernels;
pub mod nearfield;
pub mod operator;
pub mod perturbed;

pub use assembly::{
    assemble_k, assemble_kstar, assemble_s, assemble_s_with, BoundaryOperators, eval_double_layer, eval_single_layer,
    eval_layer_near, exterior_normal_derivative_s,
};
pub use kernels::{adjoint_double, double, single, Kernel};
pub use nearfield::{interpolate, DensityModel, NearField, Target};
pub use operator::{BoundaryOperatorMatrix, OperatorKind};
pub use perturbed::{assemble_k1, assemble_s1};
