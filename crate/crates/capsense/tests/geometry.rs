use std::f64::consts::PI;

use capsense::geometry::vec3::{cross, dot, norm, sub};
use capsense::geometry::*;
use capsense::rules::integrate;
use capsense::DensityVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere(r: f64) -> ParametricSurface {
    make_surface(&Shape::Sphere { radius: r }).unwrap()
}

fn ellipsoid() -> ParametricSurface {
    make_surface(&Shape::Ellipsoid { axes: [2.0, 1.0, 0.5] }).unwrap()
}

fn y(l: usize, m: i32, p: [f64; 3]) -> f64 {
    RealHarmonic::new(l, m).unwrap().eval(p)
}

#[test]
fn sphere_chart_matches_the_standard_parametrization() {
    let s = sphere(1.0);
    for (u, v) in [(0.1, 0.0), (1.0, 2.0), (3.0, 6.0)] {
        let p = s.position(0, u, v);
        let e = [f64::sin(u) * f64::cos(v), f64::sin(u) * f64::sin(v), f64::cos(u)];
        assert!(norm(sub(p, e)) < 1e-15);
    }
}

#[test]
fn unit_ellipsoid_is_the_unit_sphere() {
    let s = sphere(1.0);
    let e = make_surface(&Shape::Ellipsoid { axes: [1.0, 1.0, 1.0] }).unwrap();
    let qs = build_quadrature(&s, 16).unwrap();
    let qe = build_quadrature(&e, 16).unwrap();
    for (a, b) in qs.nodes.iter().zip(&qe.nodes) {
        assert!(norm(sub(a.position, b.position)) < 1e-15);
        assert!((a.weight - b.weight).abs() < 1e-15);
    }
}

#[test]
fn orthogonality_at_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for shape in [
        Shape::Sphere { radius: 1.3 },
        Shape::Ellipsoid { axes: [2.0, 1.0, 0.5] },
        Shape::Ellipsoid { axes: [0.7, 3.0, 1.1] },
        Shape::Ellipsoid { axes: [1.0, 2.0, 2.0] },
        Shape::Ellipsoid { axes: [2.0, 2.0, 1.0] },
    ] {
        let s = make_surface(&shape).unwrap();
        for _ in 0..100 {
            let u = rng.gen_range(1e-3..PI - 1e-3);
            let v = rng.gen_range(0.0..2.0 * PI);
            let g = s.local(0, u, v);
            let scale = norm(g.xu) * norm(g.xv);
            assert!(dot(g.xu, g.xv).abs() <= 1e-12 * scale.max(1.0), "{shape:?} at ({u},{v})");
            assert!(g.jac > 0.0);
        }
    }
}

#[test]
fn sphere_area_and_monotone_convergence() {
    for r in [1.0, 2.0] {
        let s = sphere(r);
        let exact = 4.0 * PI * r * r;
        let errs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| ((build_quadrature(&s, n).unwrap().area() - exact) / exact).abs())
            .collect();
        assert!(errs[1] <= 2e-3);
        // Gauss–Legendre in cos ξ integrates the sphere's area element exactly,
        // so the error sits at rounding level and can only be compared to that floor.
        for w in errs.windows(2) {
            assert!(w[1] <= w[0].max(1e-13), "{errs:?}");
        }
    }
}

#[test]
fn ellipsoid_area_matches_adaptive_parameter_quadrature() {
    let (a, b, c) = (2.0, 1.0, 0.5);
    // Independent chart: (a sin u cos v, b sin u sin v, c cos u).
    let jac = |u: f64, v: f64| {
        let xu = [a * u.cos() * v.cos(), b * u.cos() * v.sin(), -c * u.sin()];
        let xv = [-a * u.sin() * v.sin(), b * u.sin() * v.cos(), 0.0];
        norm(cross(xu, xv))
    };
    let area = integrate(|u| integrate(|v| jac(u, v), 0.0, 2.0 * PI, 1e-12), 0.0, PI, 1e-10);
    let q = build_quadrature(&ellipsoid(), 64).unwrap();
    assert!(((q.area() - area) / area).abs() < 2e-3, "{} vs {}", q.area(), area);
}

#[test]
fn quadrature_node_invariants() {
    for s in [sphere(1.0), ellipsoid(), make_surface(&Shape::parse("star:1,2,0,0.1,3,1,0.05").unwrap()).unwrap()] {
        let q = build_quadrature(&s, 32).unwrap();
        for n in &q.nodes {
            assert!(n.weight > 0.0);
            assert!((norm(n.normal) - 1.0).abs() < 1e-12);
            assert!(dot(n.normal, n.tangent_frame[0]).abs() < 1e-10);
            assert!(dot(n.normal, n.tangent_frame[1]).abs() < 1e-10);
            assert!(dot(n.tangent_frame[0], n.tangent_frame[1]).abs() < 1e-12);
            let [[e, f], [f2, g]] = n.metric;
            assert_eq!(f, f2);
            assert!(e > 0.0 && e * g - f * f > 0.0);
            assert!(n.xi > 0.0 && n.xi < PI);
        }
    }
}

#[test]
fn curvature_sign_lock() {
    for r in [0.5, 1.0, 2.0] {
        let s = sphere(r);
        let q = build_quadrature(&s, 16).unwrap();
        for n in &q.nodes {
            assert!((n.tau + 1.0 / r).abs() < 1e-10);
        }
        assert!((mean_curvature(&s, 0, 0.4, 1.0).unwrap() + 1.0 / r).abs() < 1e-10);
    }
    assert!(mean_curvature(&sphere(1.0), 0, 0.0, 1.0).is_err());
}

#[test]
fn ellipsoid_tip_curvature_matches_normal_variation() {
    let (a, b, c) = (2.0, 1.0, 0.5);
    // Surface near (a,0,0) as a graph over (y,z); unit normal from the implicit gradient.
    let normal = |yy: f64, zz: f64| {
        let x = a * (1.0 - yy * yy / (b * b) - zz * zz / (c * c)).sqrt();
        let gr = [x / (a * a), yy / (b * b), zz / (c * c)];
        let l = norm(gr);
        [gr[0] / l, gr[1] / l, gr[2] / l]
    };
    let h = 1e-5;
    let dny = (normal(h, 0.0)[1] - normal(-h, 0.0)[1]) / (2.0 * h);
    let dnz = (normal(0.0, h)[2] - normal(0.0, -h)[2]) / (2.0 * h);
    let oracle = -(dny + dnz) / 2.0;
    let tau = mean_curvature(&ellipsoid(), 0, PI / 2.0, 0.0).unwrap();
    assert!((tau - oracle).abs() < 1e-6, "{tau} vs {oracle}");
}

#[test]
fn perturbation_of_the_sphere() {
    let s = sphere(1.0);
    let q0 = build_quadrature(&s, 32).unwrap();
    let inflated = perturb_surface(&s, &Profile::one(), 0.1).unwrap();
    let qi = build_quadrature(&inflated, 32).unwrap();
    let q11 = build_quadrature(&sphere(1.1), 32).unwrap();
    for (a, b) in qi.nodes.iter().zip(&q11.nodes) {
        assert!(norm(sub(a.position, b.position)) < 1e-12);
        assert!(norm(sub(a.normal, b.normal)) < 1e-12);
        assert!((a.tau - b.tau).abs() < 1e-12);
        assert!((a.weight - b.weight).abs() < 1e-12);
    }
    let same = build_quadrature(&perturb_surface(&s, &Profile::one(), 0.0).unwrap(), 32).unwrap();
    for (a, b) in same.nodes.iter().zip(&q0.nodes) {
        assert!(norm(sub(a.position, b.position)) <= 1e-12);
        assert!((a.tau - b.tau).abs() <= 1e-12 && (a.weight - b.weight).abs() <= 1e-12);
    }
    let eps = 0.05;
    let p = perturb_surface(&s, &Profile::y(2, 0), eps).unwrap();
    let qp = build_quadrature(&p, 32).unwrap();
    for (a, b) in qp.nodes.iter().zip(&q0.nodes) {
        let x = b.position;
        let hv = y(2, 0, x);
        let expect = [x[0] + eps * hv * x[0], x[1] + eps * hv * x[1], x[2] + eps * hv * x[2]];
        assert!(norm(sub(a.position, expect)) < 1e-12);
    }
}

#[test]
fn perturbed_normals_and_weights_match_differencing() {
    let s = ellipsoid();
    let p = perturb_surface(&s, &Profile::parse("bump:2,0,0,0.5").unwrap(), 0.1).unwrap();
    let (u, v) = (1.2, 0.4);
    let g = p.local(0, u, v);
    let d = 1e-5;
    let fu = sub(p.position(0, u + d, v), p.position(0, u - d, v)).map(|t| t / (2.0 * d));
    let fv = sub(p.position(0, u, v + d), p.position(0, u, v - d)).map(|t| t / (2.0 * d));
    assert!(norm(sub(fu, g.xu)) < 1e-8);
    assert!(norm(sub(fv, g.xv)) < 1e-8);
    let puu = [0, 1, 2].map(|i| {
        (p.position(0, u + d, v)[i] - 2.0 * p.position(0, u, v)[i] + p.position(0, u - d, v)[i]) / (d * d)
    });
    assert!(norm(sub(puu, g.xuu)) < 1e-4);
}

#[test]
fn normal_and_area_expansions() {
    let s = sphere(1.0);
    let q = build_quadrature(&s, 32).unwrap();
    let one = PerturbationField::new(&q, &Profile::one());
    let z = PerturbationField::new(&q, &Profile::parse("z").unwrap());
    let zero = PerturbationField::new(&q, &Profile::Zero);
    for (k, n) in q.nodes.iter().enumerate() {
        let (n0, n1) = normal_expansion(n, &one, k);
        assert_eq!(n0, n.normal);
        assert!(norm(n1) < 1e-14);
        let (_, m1) = normal_expansion(n, &z, k);
        // −(∇z − (∇z·n) n)
        let e = [n.normal[2] * n.normal[0], n.normal[2] * n.normal[1], n.normal[2] * n.normal[2] - 1.0];
        assert!(norm(sub(m1, e)) < 1e-12);
        assert!(dot(m1, n.normal).abs() <= 1e-10 * norm(m1) + 1e-14);
        assert!(dot(z.grad_t_h[k], n.normal).abs() < 1e-10);
        let (s0, s1) = area_element_expansion(n, &one, k);
        assert_eq!(s0, 1.0);
        assert!((s1 - 2.0).abs() < 1e-12);
        assert_eq!(area_element_expansion(n, &zero, k), (1.0, 0.0));
    }
    let q2 = build_quadrature(&sphere(2.0), 16).unwrap();
    let one2 = PerturbationField::new(&q2, &Profile::one());
    for (k, n) in q2.nodes.iter().enumerate() {
        assert!((area_element_expansion(n, &one2, k).1 - 1.0).abs() < 1e-12);
    }
    // The equator node (1,0,0) of the z-profile: n1 = −(0,0,1).
    let eq = PerturbationField::new(&q, &Profile::parse("z").unwrap());
    let k = q
        .nodes
        .iter()
        .enumerate()
        .min_by(|a, b| norm(sub(a.1.position, [1.0, 0.0, 0.0])).total_cmp(&norm(sub(b.1.position, [1.0, 0.0, 0.0]))))
        .unwrap()
        .0;
    let (_, n1) = normal_expansion(&q.nodes[k], &eq, k);
    let offset = norm(sub(q.nodes[k].position, [1.0, 0.0, 0.0]));
    assert!(norm(sub(n1, [0.0, 0.0, -1.0])) < 2.0 * offset);
}

#[test]
fn laplace_beltrami_on_sphere_harmonics() {
    let q = build_quadrature(&sphere(1.0), 64).unwrap();
    let c = DensityVector::constant(&q, 3.7);
    assert!(laplace_beltrami(&q, &c).unwrap().iter().all(|v| v.abs() <= 1e-10));
    for (l, m) in [(1usize, 0i32), (2, 0), (2, 1), (1, -1)] {
        let f = DensityVector::from_fn(&q, |p| y(l, m, p));
        let lap = laplace_beltrami(&q, &f).unwrap();
        let ev = -((l * (l + 1)) as f64);
        let err: f64 = lap.iter().zip(&f.values).map(|(a, b)| (a - ev * b).powi(2)).sum::<f64>().sqrt();
        let size: f64 = f.values.iter().map(|b| (ev * b).powi(2)).sum::<f64>().sqrt();
        assert!(err / size < 0.02, "l={l} m={m}: {}", err / size);
        let maxerr = lap.iter().zip(&f.values).map(|(a, b)| (a - ev * b).abs()).fold(0.0, f64::max);
        assert!(maxerr < 0.02 * ev.abs() * f.values.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    }
}

#[test]
fn laplace_beltrami_on_the_ellipsoid_integrates_to_zero() {
    let q = build_quadrature(&ellipsoid(), 64).unwrap();
    let f = DensityVector::from_fn(&q, |p| p[0] * p[2] + p[1].powi(2));
    let lap = laplace_beltrami(&q, &f).unwrap();
    let w = q.weights();
    let total: f64 = lap.iter().zip(&w).map(|(a, b)| a * b).sum();
    let scale: f64 = lap.iter().zip(&w).map(|(a, b)| a.abs() * b).sum();
    assert!(total.abs() < 1e-3 * scale, "{total} {scale}");
}

#[test]
fn tangential_gradient_cases() {
    let q = build_quadrature(&sphere(1.0), 64).unwrap();
    let c = DensityVector::constant(&q, 2.0);
    assert!(tangential_gradient(&q, &c).unwrap().iter().all(|g| norm(*g) < 1e-10));
    let z = DensityVector::from_fn(&q, |p| p[2]);
    let g = tangential_gradient(&q, &z).unwrap();
    for (k, n) in q.nodes.iter().enumerate() {
        let e = [-n.normal[2] * n.normal[0], -n.normal[2] * n.normal[1], 1.0 - n.normal[2] * n.normal[2]];
        assert!(norm(sub(g[k], e)) < 1e-2 * norm(e).max(1e-2));
        assert!(dot(g[k], n.normal).abs() <= 1e-8 * norm(g[k]).max(1.0));
    }

    let e1 = [0.6, 0.0, 0.8];
    let e2 = [0.0, 1.0, 0.0];
    let plane = make_surface(&Shape::Plane { origin: [0.3, -0.2, 1.0], e1, e2, extent: [1.0, 2.0] }).unwrap();
    let qp = build_quadrature(&plane, 12).unwrap();
    let a = [1.5, -2.0, 0.7];
    let f = DensityVector::from_fn(&qp, |p| dot(a, p) + 4.0);
    let g = tangential_gradient(&qp, &f).unwrap();
    let nrm = cross(e1, e2);
    let expect = sub(a, nrm.map(|t| t * dot(a, nrm)));
    for v in g {
        assert!(norm(sub(v, expect)) < 1e-8);
    }
}

#[test]
fn field_on_a_foreign_quadrature_is_rejected() {
    let q1 = build_quadrature(&sphere(1.0), 16).unwrap();
    let q2 = build_quadrature(&sphere(1.0), 16).unwrap();
    let f = DensityVector::constant(&q1, 1.0);
    assert!(laplace_beltrami(&q2, &f).is_err());
    assert!(tangential_gradient(&q2, &f).is_err());
}
