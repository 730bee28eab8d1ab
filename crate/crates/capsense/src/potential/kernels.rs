use std::f64::consts::PI;

const INV4PI: f64 = 1.0 / (4.0 * PI);

/// Fundamental solution `Γ(x − y) = −1/(4π|x − y|)`.
#[inline]
pub fn single(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    -INV4PI / (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// `∂Γ(x − y)/∂n(y) = ⟨y − x, n(y)⟩ / (4π|x − y|³)`.
#[inline]
pub fn double(x: [f64; 3], y: [f64; 3], ny: [f64; 3]) -> f64 {
    let d = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    INV4PI * (d[0] * ny[0] + d[1] * ny[1] + d[2] * ny[2]) / (r2 * r2.sqrt())
}

/// `∂Γ(x − y)/∂n(x) = ⟨x − y, n(x)⟩ / (4π|x − y|³)`.
#[inline]
pub fn adjoint_double(x: [f64; 3], nx: [f64; 3], y: [f64; 3]) -> f64 {
    double(y, x, nx)
}

/// Kernel of a layer potential, as a function of target `x` and source `(y, n(y))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Single,
    Double,
}

impl Kernel {
    #[inline]
    pub fn eval(self, x: [f64; 3], y: [f64; 3], ny: [f64; 3]) -> f64 {
        match self {
            Kernel::Single => single(x, y),
            Kernel::Double => double(x, y, ny),
        }
    }
}
