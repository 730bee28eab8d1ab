//! Truncated bivariate Taylor arithmetic.
//!
//! A `Jet<D>` carries the Taylor coefficients of a function of the two chart
//! parameters up to total degree `D` (at most 3). Chart and profile formulas
//! are written once against [`Real`] and evaluated either on plain `f64` or
//! on jets, which yields exact partial derivatives without differencing.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn recip(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
}

/// Coefficient `c[i][j]` multiplies `du^i dv^j`; entries with `i + j > D` are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const D: usize> {
    pub c: [[f64; 4]; 4],
}

impl<const D: usize> Jet<D> {
    pub fn constant(v: f64) -> Self {
        let mut c = [[0.0; 4]; 4];
        c[0][0] = v;
        Jet { c }
    }

    /// The first chart variable expanded about `v`.
    pub fn var_u(v: f64) -> Self {
        let mut j = Self::constant(v);
        if D >= 1 {
            j.c[1][0] = 1.0;
        }
        j
    }

    pub fn var_v(v: f64) -> Self {
        let mut j = Self::constant(v);
        if D >= 1 {
            j.c[0][1] = 1.0;
        }
        j
    }

    /// Partial derivative `∂^{i+j} / ∂u^i ∂v^j` at the expansion point.
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i + j <= D);
        self.c[i][j] * FACT[i] * FACT[j]
    }

    /// Drop to a lower truncation degree.
    pub fn truncate<const E: usize>(&self) -> Jet<E> {
        debug_assert!(E <= D);
        let mut c = [[0.0; 4]; 4];
        for i in 0..=E {
            for j in 0..=E - i {
                c[i][j] = self.c[i][j];
            }
        }
        Jet { c }
    }

    /// `∂/∂u`, valid to degree `D - 1`.
    pub fn du<const E: usize>(&self) -> Jet<E> {
        debug_assert!(E + 1 <= D);
        let mut c = [[0.0; 4]; 4];
        for i in 0..=E {
            for j in 0..=E - i {
                c[i][j] = (i + 1) as f64 * self.c[i + 1][j];
            }
        }
        Jet { c }
    }

    /// `∂/∂v`, valid to degree `D - 1`.
    pub fn dv<const E: usize>(&self) -> Jet<E> {
        debug_assert!(E + 1 <= D);
        let mut c = [[0.0; 4]; 4];
        for i in 0..=E {
            for j in 0..=E - i {
                c[i][j] = (j + 1) as f64 * self.c[i][j + 1];
            }
        }
        Jet { c }
    }

    /// Compose with a scalar function given its value and first three derivatives.
    fn compose(self, f: [f64; 4]) -> Self {
        let mut d = self;
        d.c[0][0] = 0.0;
        let mut out = Self::constant(f[0]);
        let mut pw = d;
        let mut k = 1;
        while k <= D {
            out = out + pw * (f[k] / FACT[k]);
            if k < D {
                pw = pw * d;
            }
            k += 1;
        }
        out
    }
}

const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];

impl<const D: usize> Add for Jet<D> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        for i in 0..=D {
            for j in 0..=D - i {
                self.c[i][j] += o.c[i][j];
            }
        }
        self
    }
}

impl<const D: usize> Sub for Jet<D> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        for i in 0..=D {
            for j in 0..=D - i {
                self.c[i][j] -= o.c[i][j];
            }
        }
        self
    }
}

impl<const D: usize> Neg for Jet<D> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for i in 0..=D {
            for j in 0..=D - i {
                self.c[i][j] = -self.c[i][j];
            }
        }
        self
    }
}

impl<const D: usize> Mul for Jet<D> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut c = [[0.0; 4]; 4];
        for i1 in 0..=D {
            for j1 in 0..=D - i1 {
                let a = self.c[i1][j1];
                if a == 0.0 {
                    continue;
                }
                let rem = D - i1 - j1;
                for i2 in 0..=rem {
                    for j2 in 0..=rem - i2 {
                        c[i1 + i2][j1 + j2] += a * o.c[i2][j2];
                    }
                }
            }
        }
        Jet { c }
    }
}

impl<const D: usize> Div for Jet<D> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<const D: usize> Add<f64> for Jet<D> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: f64) -> Self {
        self.c[0][0] += o;
        self
    }
}

impl<const D: usize> Sub<f64> for Jet<D> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: f64) -> Self {
        self.c[0][0] -= o;
        self
    }
}

impl<const D: usize> Mul<f64> for Jet<D> {
    type Output = Self;
    #[inline]
    fn mul(mut self, o: f64) -> Self {
        for i in 0..=D {
            for j in 0..=D - i {
                self.c[i][j] *= o;
            }
        }
        self
    }
}

impl<const D: usize> Real for Jet<D> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.c[0][0]
    }
    fn sin(self) -> Self {
        let (s, c) = self.c[0][0].sin_cos();
        self.compose([s, c, -s, -c])
    }
    fn cos(self) -> Self {
        let (s, c) = self.c[0][0].sin_cos();
        self.compose([c, -s, -c, s])
    }
    fn sqrt(self) -> Self {
        let a = self.c[0][0];
        let r = a.sqrt();
        self.compose([r, 0.5 / r, -0.25 / (a * r), 0.375 / (a * a * r)])
    }
    fn exp(self) -> Self {
        let e = self.c[0][0].exp();
        self.compose([e, e, e, e])
    }
    fn recip(self) -> Self {
        let a = self.c[0][0];
        let r = 1.0 / a;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }
}
