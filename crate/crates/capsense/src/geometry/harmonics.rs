use std::f64::consts::PI;

use crate::jet::Real;

/// Real spherical harmonic `Y_lm` of the direction `x/|x|`, orthonormal on
/// the unit sphere. Negative `m` selects the sine branch.
#[derive(Clone, Debug, PartialEq)]
pub struct RealHarmonic {
    pub l: usize,
    pub m: i32,
    norm: f64,
    /// Coefficients of `d^|m| P_l / dt^|m|`, ascending powers of t.
    dpoly: [f64; 9],
    len: usize,
}

impl RealHarmonic {
    pub fn new(l: usize, m: i32) -> Option<Self> {
        let am = m.unsigned_abs() as usize;
        if am > l || l > 8 {
            return None;
        }
        let mut p = legendre_coefficients(l);
        let mut len = l + 1;
        for _ in 0..am {
            for k in 1..len {
                p[k - 1] = k as f64 * p[k];
            }
            p[len - 1] = 0.0;
            len -= 1;
        }
        let ratio: f64 = ((l - am + 1)..=(l + am)).map(|k| k as f64).product::<f64>().recip();
        let base = (2 * l + 1) as f64 / (4.0 * PI) * ratio;
        let norm = if am == 0 { base.sqrt() } else { (2.0 * base).sqrt() };
        Some(RealHarmonic { l, m, norm, dpoly: p, len })
    }

    pub fn eval<T: Real>(&self, x: [T; 3]) -> T {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let inv = r.recip();
        let (ux, uy, uz) = (x[0] * inv, x[1] * inv, x[2] * inv);
        let mut poly = T::cst(0.0);
        for &c in self.dpoly[..self.len].iter().rev() {
            poly = poly * uz + c;
        }
        let am = self.m.unsigned_abs();
        let mut re = T::cst(1.0);
        let mut im = T::cst(0.0);
        for _ in 0..am {
            let nre = re * ux - im * uy;
            im = re * uy + im * ux;
            re = nre;
        }
        let ang = if self.m >= 0 { re } else { im };
        poly * ang * self.norm
    }
}

fn legendre_coefficients(l: usize) -> [f64; 9] {
    let mut p0 = [0.0; 9];
    p0[0] = 1.0;
    if l == 0 {
        return p0;
    }
    let mut p1 = [0.0; 9];
    p1[1] = 1.0;
    for k in 2..=l {
        let mut p2 = [0.0; 9];
        for i in 0..k {
            p2[i + 1] += (2 * k - 1) as f64 * p1[i] / k as f64;
            p2[i] -= (k - 1) as f64 * p0[i] / k as f64;
        }
        p0 = p1;
        p1 = p2;
    }
    p1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::gauss_legendre;

    #[test]
    fn y20_closed_form() {
        let y = RealHarmonic::new(2, 0).unwrap();
        let p = [0.3, -0.4, 0.5];
        let r2: f64 = p.iter().map(|v| v * v).sum();
        let expect = (5.0 / (16.0 * PI)).sqrt() * (3.0 * p[2] * p[2] / r2 - 1.0);
        assert!((y.eval(p) - expect).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_up_to_degree_four() {
        let (t, wt) = gauss_legendre(24);
        let nphi = 48;
        let mut all = vec![];
        for l in 0..=4 {
            for m in -(l as i32)..=(l as i32) {
                all.push(RealHarmonic::new(l, m).unwrap());
            }
        }
        for a in &all {
            for b in &all {
                let mut s = 0.0;
                for (ti, wi) in t.iter().zip(&wt) {
                    let st = (1.0 - ti * ti).sqrt();
                    for k in 0..nphi {
                        let ph = 2.0 * PI * k as f64 / nphi as f64;
                        let x = [st * ph.cos(), st * ph.sin(), *ti];
                        s += wi * 2.0 * PI / nphi as f64 * a.eval(x) * b.eval(x);
                    }
                }
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "({},{}) ({},{})", a.l, a.m, b.l, b.m);
            }
        }
    }
}
