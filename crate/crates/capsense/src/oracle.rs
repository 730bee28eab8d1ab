//! Closed-form and brute-force references the numerical paths are checked against.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geometry::{build_quadrature, perturb_surface, ParametricSurface, Profile};
use crate::solver::solve_equilibrium;

/// A named closed-form reference with its domain of validity.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticReference {
    pub name: &'static str,
    pub validity: &'static str,
    pub eval: fn(&[f64]) -> Result<f64>,
}

pub const REFERENCES: [AnalyticReference; 3] = [
    AnalyticReference { name: "sphere_capacity", validity: "R > 0", eval: |p| sphere_capacity(p[0]) },
    AnalyticReference { name: "ellipsoid_capacity", validity: "a, b, c > 0", eval: |p| ellipsoid_capacity(p[0], p[1], p[2]) },
    AnalyticReference { name: "sphere_np_eigenvalue", validity: "integer l ≥ 0", eval: |p| sphere_np_eigenvalue(p[0] as i64) },
];

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn sphere_capacity(r: f64) -> Result<f64> {
    positive("radius", r)?;
    Ok(r)
}

/// `∫₀^∞ ds/√((a²+s)(b²+s)(c²+s))` after `s = tan²t`, as an integrand on `[0, π/2]`.
fn elliptic_integrand(a: f64, b: f64, c: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| {
        let (s, co) = t.sin_cos();
        // ds = 2 tan t sec²t dt; the cos³t factors cancel against the root.
        let c2 = co * co;
        2.0 * s / ((a * a * c2 + s * s) * (b * b * c2 + s * s) * (c * c * c2 + s * s)).sqrt()
    }
}

/// `2 / ∫₀^∞ ds/√((a²+s)(b²+s)(c²+s))`.
pub fn ellipsoid_capacity(a: f64, b: f64, c: f64) -> Result<f64> {
    positive("a", a)?;
    positive("b", b)?;
    positive("c", c)?;
    let i = crate::rules::integrate(elliptic_integrand(a, b, c), 0.0, FRAC_PI_2, 1e-12);
    Ok(2.0 / i)
}

/// The same integral by composite midpoint sums, Richardson-extrapolated over
/// interval doubling. Independent of the adaptive rule; used as a cross-check.
pub fn ellipsoid_capacity_midpoint(a: f64, b: f64, c: f64) -> Result<f64> {
    positive("a", a)?;
    positive("b", b)?;
    positive("c", c)?;
    let f = elliptic_integrand(a, b, c);
    let mut table: Vec<Vec<f64>> = vec![];
    let mut n = 8usize;
    for level in 0..14 {
        let h = FRAC_PI_2 / n as f64;
        let m: f64 = (0..n).map(|k| f((k as f64 + 0.5) * h)).sum::<f64>() * h;
        let mut row = vec![m];
        for j in 1..=level {
            let p = 4f64.powi(j as i32);
            let prev = &table[level - 1];
            row.push((p * row[j - 1] - prev[j - 1]) / (p - 1.0));
        }
        if level > 2 {
            let (x, y) = (row[level], table[level - 1][level - 1]);
            if (x - y).abs() < 1e-14 * x.abs() {
                return Ok(2.0 / x);
            }
        }
        table.push(row);
        n *= 2;
    }
    let last = table.last().unwrap();
    Ok(2.0 / last[last.len() - 1])
}

/// `u = R/|x|`, `∇u = −R x/|x|³` outside the sphere of radius `R` about the origin.
pub fn sphere_exterior_field(r: f64, x: [f64; 3]) -> Result<(f64, [f64; 3])> {
    positive("radius", r)?;
    let d = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if d <= r {
        return Err(Error::Domain(format!("point at distance {d} is not outside radius {r}")));
    }
    let g = -r / (d * d * d);
    Ok((r / d, [g * x[0], g * x[1], g * x[2]]))
}

/// Central difference `(cap(Ω_δ) − cap(Ω_{−δ}))/(2δ)`, each side re-solved from scratch.
pub fn fd_capacity_derivative(surface: &ParametricSurface, h: &Profile, delta: f64, resolution: usize) -> Result<f64> {
    positive("step", delta)?;
    if h.is_zero() {
        return Ok(0.0);
    }
    let cap = |eps: f64| -> Result<f64> {
        let s = perturb_surface(surface, h, eps)?;
        Ok(solve_equilibrium(&build_quadrature(&s, resolution)?)?.capacity)
    };
    Ok((cap(delta)? - cap(-delta)?) / (2.0 * delta))
}

/// `1/(2(2l+1))`, the NP eigenvalue of degree `l` on any sphere.
pub fn sphere_np_eigenvalue(l: i64) -> Result<f64> {
    if l < 0 {
        return Err(Error::Domain(format!("degree must be non-negative, got {l}")));
    }
    Ok(1.0 / (2.0 * (2 * l + 1) as f64))
}
