use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::harmonics::RealHarmonic;
use super::profile::{parse_numbers, Profile};
use super::vec3::{cross, dot, norm, scale, sub};
use crate::error::{Error, Result};
use crate::jet::{Jet, Real};

/// Named shape from the built-in library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    Ellipsoid { axes: [f64; 3] },
    /// Radial graph `r(ω) = R (1 + Σ c Y_lm(ω))` over the unit sphere.
    Star { radius: f64, terms: Vec<(usize, i32, f64)> },
    /// Open flat patch `origin + ξ e1 + θ e2`, `(ξ, θ) ∈ [0, extent.0] × [0, extent.1]`.
    Plane { origin: [f64; 3], e1: [f64; 3], e2: [f64; 3], extent: [f64; 2] },
}

impl Shape {
    /// Parse `sphere:R`, `ellipsoid:a,b,c`, `star:R,l,m,c[,l,m,c...]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidShape(format!("{spec}: {msg}"));
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n.trim().to_ascii_lowercase(), parse_numbers(a).map_err(|e| bad(&e))?),
            None => (spec.trim().to_ascii_lowercase(), vec![]),
        };
        let shape = match name.as_str() {
            "sphere" => match args.as_slice() {
                [] => Shape::Sphere { radius: 1.0 },
                [r] => Shape::Sphere { radius: *r },
                _ => return Err(bad("expected sphere:R")),
            },
            "ellipsoid" => match args.as_slice() {
                [a, b, c] => Shape::Ellipsoid { axes: [*a, *b, *c] },
                _ => return Err(bad("expected ellipsoid:a,b,c")),
            },
            "star" => {
                if args.is_empty() || (args.len() - 1) % 3 != 0 {
                    return Err(bad("expected star:R,l,m,c[,l,m,c...]"));
                }
                let mut terms = vec![];
                for t in args[1..].chunks(3) {
                    if t[0].fract() != 0.0 || t[1].fract() != 0.0 || t[0] < 0.0 {
                        return Err(bad("harmonic indices must be integers"));
                    }
                    terms.push((t[0] as usize, t[1] as i32, t[2]));
                }
                Shape::Star { radius: args[0], terms }
            }
            _ => return Err(bad("unknown shape")),
        };
        Ok(shape)
    }
}

/// How chart nodes are distributed along ξ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    /// Gauss–Legendre in `-cos ξ` on (0, π); clusters nodes at poles.
    Cosine,
    /// Gauss–Legendre in ξ over the range.
    Linear,
}

/// Identification of the extended chart across the ξ ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gluing {
    /// `X(-ξ, θ) = X(ξ, θ + π)`, and likewise about ξ = π.
    Pole,
    /// `X(-ξ, θ) = X(ξ, -θ)`, and likewise about ξ = π.
    Fold,
    /// No identification (open patch edge).
    Open,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum BaseChart {
    Sphere { r: f64 },
    /// Polar axis `axis` carries the semi-axis `pol`; the others carry `eq`.
    Spheroid { eq: f64, pol: f64, axis: usize },
    /// Curvature-line chart of the ellipsoid with sorted semi-axes a > b > c,
    /// placed so that local axis i lands on world axis `perm[i]`.
    Triaxial { a: f64, b: f64, c: f64, k1: f64, k2: f64, perm: [usize; 3] },
    Star { r: f64, terms: Vec<(RealHarmonic, f64)> },
    Plane { origin: [f64; 3], e1: [f64; 3], e2: [f64; 3] },
}

impl BaseChart {
    fn eval<T: Real>(&self, u: T, v: T) -> [T; 3] {
        match self {
            BaseChart::Sphere { r } => {
                let s = u.sin();
                [s * v.cos() * *r, s * v.sin() * *r, u.cos() * *r]
            }
            BaseChart::Spheroid { eq, pol, axis } => {
                let s = u.sin();
                let local = [s * v.cos() * *eq, s * v.sin() * *eq, u.cos() * *pol];
                match axis {
                    0 => [local[2], local[0], local[1]],
                    1 => [local[1], local[2], local[0]],
                    _ => local,
                }
            }
            BaseChart::Triaxial { a, b, c, k1, k2, perm } => {
                let (cu, su, cv, sv) = (u.cos(), u.sin(), v.cos(), v.sin());
                let local = [
                    cv * (T::cst(1.0) - cu * cu * *k1).sqrt() * *a,
                    su * sv * *b,
                    cu * (T::cst(1.0) - cv * cv * *k2).sqrt() * *c,
                ];
                let mut out = [T::cst(0.0); 3];
                for i in 0..3 {
                    out[perm[i]] = local[i];
                }
                out
            }
            BaseChart::Star { r, terms } => {
                let s = u.sin();
                let w = [s * v.cos(), s * v.sin(), u.cos()];
                let mut rad = T::cst(1.0);
                for (y, c) in terms {
                    rad = rad + y.eval(w) * *c;
                }
                let rad = rad * *r;
                [w[0] * rad, w[1] * rad, w[2] * rad]
            }
            BaseChart::Plane { origin, e1, e2 } => {
                let mut out = [T::cst(0.0); 3];
                for i in 0..3 {
                    out[i] = u * e1[i] + v * e2[i] + origin[i];
                }
                out
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub(crate) base: BaseChart,
    pub xi_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub sampling: Sampling,
    pub theta_periodic: bool,
    pub gluing: Gluing,
    /// +1 when `X_ξ × X_θ` points outward, −1 otherwise.
    pub orientation: f64,
}

/// The normal offset `X + ε h(X) n(X)` defining a perturbed surface.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalOffset {
    pub profile: Profile,
    pub eps: f64,
}

/// Position, derivatives and outward normal at one parameter pair.
#[derive(Clone, Copy, Debug)]
pub struct LocalGeometry {
    pub x: [f64; 3],
    pub xu: [f64; 3],
    pub xv: [f64; 3],
    pub xuu: [f64; 3],
    pub xuv: [f64; 3],
    pub xvv: [f64; 3],
    pub normal: [f64; 3],
    pub jac: f64,
}

impl LocalGeometry {
    pub fn metric(&self) -> [[f64; 2]; 2] {
        let f = dot(self.xu, self.xv);
        [[dot(self.xu, self.xu), f], [f, dot(self.xv, self.xv)]]
    }

    /// Paper-convention mean curvature: `Δ = ∂_nn − 2τ ∂_n + Δ_G`, so τ = −1/R on a sphere.
    pub fn tau(&self) -> f64 {
        let [[e, f], [_, g]] = self.metric();
        let l = dot(self.xuu, self.normal);
        let m = dot(self.xuv, self.normal);
        let n = dot(self.xvv, self.normal);
        (l * g - 2.0 * m * f + n * e) / (2.0 * (e * g - f * f))
    }
}

/// Position, outward normal and area Jacobian `|X_ξ × X_θ|`.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub x: [f64; 3],
    pub normal: [f64; 3],
    pub jac: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricSurface {
    pub shape: Shape,
    pub charts: Vec<Chart>,
    pub offset: Option<NormalOffset>,
}

/// Build a surface from the shape library.
pub fn make_surface(shape: &Shape) -> Result<ParametricSurface> {
    let bad = |msg: String| Err(Error::InvalidShape(msg));
    let polar = |base: BaseChart| Chart {
        base,
        xi_range: (0.0, PI),
        theta_range: (0.0, 2.0 * PI),
        sampling: Sampling::Cosine,
        theta_periodic: true,
        gluing: Gluing::Pole,
        orientation: 1.0,
    };
    let mut chart = match shape {
        Shape::Sphere { radius } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return bad(format!("sphere radius must be positive, got {radius}"));
            }
            polar(BaseChart::Sphere { r: *radius })
        }
        Shape::Ellipsoid { axes } => {
            if axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return bad(format!("ellipsoid semi-axes must be positive, got {axes:?}"));
            }
            ellipsoid_chart(*axes, polar)
        }
        Shape::Star { radius, terms } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return bad(format!("star radius must be positive, got {radius}"));
            }
            let mut ys = vec![];
            for &(l, m, c) in terms {
                let y = RealHarmonic::new(l, m)
                    .ok_or_else(|| Error::InvalidShape(format!("bad harmonic ({l},{m})")))?;
                if !c.is_finite() {
                    return bad("non-finite star coefficient".into());
                }
                ys.push((y, c));
            }
            let chart = polar(BaseChart::Star { r: *radius, terms: ys });
            for i in 0..=40 {
                for j in 0..80 {
                    let u = PI * i as f64 / 40.0;
                    let v = 2.0 * PI * j as f64 / 80.0;
                    if norm(chart.base.eval(u, v)) <= 0.05 * radius {
                        return bad("star radial function must stay positive".into());
                    }
                }
            }
            chart
        }
        Shape::Plane { origin, e1, e2, extent } => {
            if norm(cross(*e1, *e2)) == 0.0 || extent.iter().any(|e| !(*e > 0.0)) {
                return bad("plane patch needs independent edge vectors and positive extents".into());
            }
            Chart {
                base: BaseChart::Plane { origin: *origin, e1: *e1, e2: *e2 },
                xi_range: (0.0, extent[0]),
                theta_range: (0.0, extent[1]),
                sampling: Sampling::Linear,
                theta_periodic: false,
                gluing: Gluing::Open,
                orientation: 1.0,
            }
        }
    };
    if chart.gluing != Gluing::Open {
        let (u, v) = (1.1, 0.7);
        let g = chart_local::<2, 2>(&chart, None, u, v);
        chart.orientation = if dot(cross(g.xu, g.xv), g.x) > 0.0 { 1.0 } else { -1.0 };
    }
    Ok(ParametricSurface { shape: shape.clone(), charts: vec![chart], offset: None })
}

fn ellipsoid_chart(axes: [f64; 3], polar: impl Fn(BaseChart) -> Chart) -> Chart {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| axes[j].partial_cmp(&axes[i]).unwrap());
    let (a, b, c) = (axes[idx[0]], axes[idx[1]], axes[idx[2]]);
    let close = |p: f64, q: f64| (p - q).abs() <= 1e-13 * p.max(q);
    if close(a, c) {
        return polar(BaseChart::Sphere { r: a });
    }
    if close(a, b) {
        return polar(BaseChart::Spheroid { eq: a, pol: c, axis: idx[2] });
    }
    if close(b, c) {
        return polar(BaseChart::Spheroid { eq: b, pol: a, axis: idx[0] });
    }
    let k1 = (b * b - c * c) / (a * a - c * c);
    Chart {
        base: BaseChart::Triaxial { a, b, c, k1, k2: 1.0 - k1, perm: idx },
        xi_range: (0.0, PI),
        theta_range: (0.0, 2.0 * PI),
        sampling: Sampling::Linear,
        theta_periodic: true,
        gluing: Gluing::Fold,
        orientation: 1.0,
    }
}

/// Evaluate a chart (with optional normal offset) on jets of degree `D`;
/// `E` must be `D + 1` when an offset is present (the normal costs one order).
fn chart_jet<const D: usize, const E: usize>(
    chart: &Chart,
    offset: Option<&NormalOffset>,
    u: f64,
    v: f64,
) -> [Jet<D>; 3] {
    match offset {
        None => chart.base.eval(Jet::<D>::var_u(u), Jet::<D>::var_v(v)),
        Some(off) => {
            debug_assert_eq!(E, D + 1);
            let x = chart.base.eval(Jet::<E>::var_u(u), Jet::<E>::var_v(v));
            let xu: [Jet<D>; 3] = [x[0].du(), x[1].du(), x[2].du()];
            let xv: [Jet<D>; 3] = [x[0].dv(), x[1].dv(), x[2].dv()];
            let c = [
                xu[1] * xv[2] - xu[2] * xv[1],
                xu[2] * xv[0] - xu[0] * xv[2],
                xu[0] * xv[1] - xu[1] * xv[0],
            ];
            let inv = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt().recip() * chart.orientation;
            let xd: [Jet<D>; 3] = [x[0].truncate(), x[1].truncate(), x[2].truncate()];
            let h = off.profile.eval(xd) * off.eps;
            [
                xd[0] + h * c[0] * inv,
                xd[1] + h * c[1] * inv,
                xd[2] + h * c[2] * inv,
            ]
        }
    }
}

fn chart_local<const D: usize, const E: usize>(
    chart: &Chart,
    offset: Option<&NormalOffset>,
    u: f64,
    v: f64,
) -> LocalGeometry {
    let x = chart_jet::<D, E>(chart, offset, u, v);
    let d = |i: usize, j: usize| [x[0].deriv(i, j), x[1].deriv(i, j), x[2].deriv(i, j)];
    let (xu, xv) = (d(1, 0), d(0, 1));
    let c = cross(xu, xv);
    let jac = norm(c);
    LocalGeometry {
        x: d(0, 0),
        xu,
        xv,
        xuu: d(2, 0),
        xuv: d(1, 1),
        xvv: d(0, 2),
        normal: scale(c, chart.orientation / jac),
        jac,
    }
}

impl ParametricSurface {
    pub fn is_perturbed(&self) -> bool {
        self.offset.is_some()
    }

    /// Full second-order local geometry.
    pub fn local(&self, chart: usize, u: f64, v: f64) -> LocalGeometry {
        let ch = &self.charts[chart];
        match &self.offset {
            None => chart_local::<2, 2>(ch, None, u, v),
            Some(off) => chart_local::<2, 3>(ch, Some(off), u, v),
        }
    }

    /// Position, normal and Jacobian (first derivatives only).
    pub fn point(&self, chart: usize, u: f64, v: f64) -> SurfacePoint {
        let ch = &self.charts[chart];
        let x = match &self.offset {
            None => chart_jet::<1, 1>(ch, None, u, v),
            Some(off) => chart_jet::<1, 2>(ch, Some(off), u, v),
        };
        let xu = [x[0].deriv(1, 0), x[1].deriv(1, 0), x[2].deriv(1, 0)];
        let xv = [x[0].deriv(0, 1), x[1].deriv(0, 1), x[2].deriv(0, 1)];
        let c = cross(xu, xv);
        let jac = norm(c);
        SurfacePoint { x: [x[0].value(), x[1].value(), x[2].value()], normal: scale(c, ch.orientation / jac), jac }
    }

    pub fn position(&self, chart: usize, u: f64, v: f64) -> [f64; 3] {
        let ch = &self.charts[chart];
        match &self.offset {
            None => ch.base.eval(u, v),
            Some(off) => {
                let x = chart_jet::<0, 1>(ch, Some(off), u, v);
                [x[0].value(), x[1].value(), x[2].value()]
            }
        }
    }

    /// Jet of a profile restricted to the surface, for analytic tangential derivatives.
    pub fn profile_jet(&self, profile: &Profile, chart: usize, u: f64, v: f64) -> Jet<1> {
        let ch = &self.charts[chart];
        let x = match &self.offset {
            None => chart_jet::<1, 1>(ch, None, u, v),
            Some(off) => chart_jet::<1, 2>(ch, Some(off), u, v),
        };
        profile.eval(x)
    }

    /// Diameter estimated from a parameter-grid sample.
    pub fn diameter(&self) -> f64 {
        let mut pts = vec![];
        for (c, ch) in self.charts.iter().enumerate() {
            for i in 0..=24 {
                for j in 0..=48 {
                    let u = ch.xi_range.0 + (ch.xi_range.1 - ch.xi_range.0) * i as f64 / 24.0;
                    let v = ch.theta_range.0 + (ch.theta_range.1 - ch.theta_range.0) * j as f64 / 48.0;
                    pts.push(self.position(c, u, v));
                }
            }
        }
        let mut d: f64 = 0.0;
        for p in &pts {
            for q in &pts {
                d = d.max(norm(sub(*p, *q)));
            }
        }
        d
    }
}

/// Mean curvature τ (paper sign convention) at a parameter pair.
pub fn mean_curvature(surface: &ParametricSurface, chart: usize, xi: f64, theta: f64) -> Result<f64> {
    let ch = surface.charts.get(chart).ok_or_else(|| Error::Domain(format!("no chart {chart}")))?;
    let inside = xi > ch.xi_range.0 && xi < ch.xi_range.1;
    let g = surface.local(chart, xi, theta);
    let scale_len = norm(g.xu).max(norm(g.xv)).max(1e-300);
    if !inside || !(g.jac > 1e-10 * scale_len * scale_len) {
        return Err(Error::Degenerate { xi, theta });
    }
    Ok(g.tau())
}

/// The perturbed surface `∂Ω_ε = { x + ε h(x) n(x) }`.
pub fn perturb_surface(surface: &ParametricSurface, profile: &Profile, eps: f64) -> Result<ParametricSurface> {
    if surface.offset.is_some() {
        return Err(Error::Domain("perturbing an already perturbed surface is not supported".into()));
    }
    if !eps.is_finite() {
        return Err(Error::Config(format!("eps must be finite, got {eps}")));
    }
    if eps == 0.0 || profile.is_zero() {
        return Ok(surface.clone());
    }
    let mut margin: f64 = 0.0;
    for (c, ch) in surface.charts.iter().enumerate() {
        let (ni, nj) = (48, 96);
        for i in 0..ni {
            for j in 0..nj {
                let u = ch.xi_range.0 + (ch.xi_range.1 - ch.xi_range.0) * (i as f64 + 0.5) / ni as f64;
                let v = ch.theta_range.0 + (ch.theta_range.1 - ch.theta_range.0) * (j as f64 + 0.5) / nj as f64;
                let g = surface.local(c, u, v);
                let h: f64 = profile.eval(g.x);
                margin = margin.max((eps * h * g.tau()).abs());
            }
        }
    }
    if !(margin < 0.5) {
        return Err(Error::PerturbationTooLarge { margin });
    }
    Ok(ParametricSurface {
        shape: surface.shape.clone(),
        charts: surface.charts.clone(),
        offset: Some(NormalOffset { profile: profile.clone(), eps }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_chart_is_standard() {
        let s = make_surface(&Shape::Sphere { radius: 1.0 }).unwrap();
        let (u, v) = (0.8_f64, 2.1_f64);
        let g = s.local(0, u, v);
        let expect = [u.sin() * v.cos(), u.sin() * v.sin(), u.cos()];
        for i in 0..3 {
            assert!((g.x[i] - expect[i]).abs() < 1e-15);
            assert!((g.normal[i] - expect[i]).abs() < 1e-14);
        }
        assert!((g.tau() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_shapes() {
        assert_eq!(Shape::parse("sphere:2").unwrap(), Shape::Sphere { radius: 2.0 });
        assert_eq!(Shape::parse("ellipsoid:2,1,0.5").unwrap(), Shape::Ellipsoid { axes: [2.0, 1.0, 0.5] });
        assert!(Shape::parse("star:1,2,0,0.1").is_ok());
        assert!(Shape::parse("torus:1").is_err());
        assert!(make_surface(&Shape::parse("sphere:-1").unwrap()).is_err());
        assert!(make_surface(&Shape::parse("ellipsoid:1,0,1").unwrap()).is_err());
    }

    #[test]
    fn spheroid_and_permuted_ellipsoids_are_outward_and_on_surface() {
        for axes in [[2.0, 1.0, 0.5], [0.5, 2.0, 1.0], [1.0, 1.0, 0.5], [2.0, 1.0, 1.0], [1.0, 3.0, 1.0]] {
            let s = make_surface(&Shape::Ellipsoid { axes }).unwrap();
            for (u, v) in [(0.3, 0.2), (1.7, 4.0), (2.9, 5.9)] {
                let g = s.local(0, u, v);
                let f: f64 = (0..3).map(|i| (g.x[i] / axes[i]).powi(2)).sum();
                assert!((f - 1.0).abs() < 1e-13, "{axes:?}");
                let grad = [g.x[0] / axes[0].powi(2), g.x[1] / axes[1].powi(2), g.x[2] / axes[2].powi(2)];
                assert!(dot(grad, g.normal) > 0.0);
                assert!(dot(g.xu, g.xv).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perturbation_guard() {
        let s = make_surface(&Shape::Sphere { radius: 1.0 }).unwrap();
        assert!(perturb_surface(&s, &Profile::one(), 0.4).is_ok());
        assert!(matches!(
            perturb_surface(&s, &Profile::one(), 0.6),
            Err(Error::PerturbationTooLarge { .. })
        ));
        let p = perturb_surface(&s, &Profile::one(), 0.1).unwrap();
        assert!(perturb_surface(&p, &Profile::one(), 0.1).is_err());
    }
}
