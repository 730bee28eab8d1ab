use capsense::geometry::vec3::{norm, scale};
use capsense::geometry::*;
use capsense::oracle::{ellipsoid_capacity, sphere_exterior_field};
use capsense::solver::*;
use capsense::{DensityVector, Error};

fn quad(shape: Shape, res: usize) -> SurfaceQuadrature {
    build_quadrature(&make_surface(&shape).unwrap(), res).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn sphere_capacity_is_the_radius() {
    for r in [0.5, 1.0, 3.0] {
        let q = quad(Shape::Sphere { radius: r }, 24);
        let eq = solve_equilibrium(&q).unwrap();
        assert!(rel(eq.capacity, r) < 1e-8, "R={r}: {}", eq.capacity);
        // ∂u/∂n = −1/R everywhere
        assert!(eq.density.values.iter().all(|v| (v + 1.0 / r).abs() < 1e-6));
        assert!(eq.condition > 1.0 && eq.condition < CONDITION_WARN);
    }
}

#[test]
fn ellipsoid_capacity_matches_the_elliptic_integral() {
    let exact = ellipsoid_capacity(2.0, 1.0, 0.5).unwrap();
    let mut last = f64::INFINITY;
    for res in [16, 32] {
        let eq = solve_equilibrium(&quad(Shape::Ellipsoid { axes: [2.0, 1.0, 0.5] }, res)).unwrap();
        let e = rel(eq.capacity, exact);
        assert!(e < last / 10.0, "res {res}: {e:e}");
        assert!(eq.density.values.iter().all(|v| *v < 0.0));
        last = e;
    }
    assert!(last < 1e-4, "{last:e}");
}

#[test]
fn exterior_potential_of_the_sphere() {
    let q = quad(Shape::Sphere { radius: 1.5 }, 24);
    let eq = solve_equilibrium(&q).unwrap();
    for x in [[3.0, 0.0, 0.0], [-2.0, 2.0, 1.0], [0.5, -0.3, 4.0]] {
        let (u, _) = sphere_exterior_field(1.5, x).unwrap();
        let v = eval_potential(&q, &eq, x).unwrap();
        assert!(rel(v, u) < 1e-8, "{x:?}: {v} vs {u}");
    }
}

#[test]
fn far_field_coefficient_recovers_the_capacity() {
    let q = quad(Shape::Ellipsoid { axes: [2.0, 1.0, 0.5] }, 24);
    let eq = solve_equilibrium(&q).unwrap();
    let d = q.surface.diameter();
    assert!((d - 4.0).abs() < 1e-9, "{d}");
    let c = far_field_coefficient(&q, &eq, 60.0 * d).unwrap();
    // the dipole term vanishes by symmetry; the quadrupole is O((d/r)²)
    assert!(rel(c, eq.capacity) < 1e-3, "{c} vs {}", eq.capacity);
    match far_field_coefficient(&q, &eq, 10.0 * d) {
        Err(Error::RadiusTooSmall { radius, minimum }) => {
            assert_eq!(radius, 40.0);
            assert!((minimum - FAR_FIELD_MIN_DIAMETERS * d).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(far_field_directions().len(), 26);
}

#[test]
fn dirichlet_on_the_sphere_decays_by_degree() {
    // f = Y_lm on the unit sphere extends as Y_lm(x̂)/|x|^{l+1}.
    let q = quad(Shape::Sphere { radius: 1.0 }, 24);
    let solver = BoundarySolver::new(&q).unwrap();
    for (l, m) in [(0, 0), (1, 0), (2, -1), (3, 2)] {
        let y = RealHarmonic::new(l, m).unwrap();
        let f = DensityVector::from_fn(&q, |p| y.eval(scale(p, 1.0 / norm(p))));
        let sol = solver.dirichlet(&f).unwrap();
        // ∂w/∂n = −(l+1) f; S⁻¹ amplifies local errors, so the nodal bound is looser
        let d: Vec<f64> = sol.density.values.iter().zip(&f.values).map(|(a, b)| a + (l + 1) as f64 * b).collect();
        let l2 = q.norm(&d) / q.norm(&f.values) / (l + 1) as f64;
        let max = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(l2 < 2e-3 && max < 1e-2, "l={l}: {l2:e} {max:e}");
        for x in [[2.0, 1.0, -1.0], [0.0, -3.0, 0.5]] {
            let r = norm(x);
            let want = y.eval(scale(x, 1.0 / r)) / r.powi(l as i32 + 1);
            let got = eval_potential(&q, &sol, x).unwrap();
            assert!((got - want).abs() < 1e-5, "l={l} {x:?}: {got} vs {want}");
        }
    }
}

#[test]
fn green_reciprocity_on_the_ellipsoid() {
    // ∫ f ∂u/∂n = ∫ ∂w/∂n for exterior harmonics u (u = 1 on Γ) and w (w = f).
    let q = quad(Shape::Ellipsoid { axes: [2.0, 1.0, 0.5] }, 24);
    let solver = BoundarySolver::new(&q).unwrap();
    let eq = solver.equilibrium().unwrap();
    let f = DensityVector::from_fn(&q, |p| 1.0 + p[0] - 0.3 * p[1] * p[2] + p[2] * p[2]);
    let sol = solver.dirichlet(&f).unwrap();
    let lhs = q.inner(&f.values, &eq.density.values);
    let rhs = gauss_integral(&q, &sol.density);
    assert!((lhs - rhs).abs() < 1e-3 * lhs.abs(), "{lhs} vs {rhs}");
}

#[test]
fn solver_rejects_foreign_densities() {
    let a = quad(Shape::Sphere { radius: 1.0 }, 16);
    let b = quad(Shape::Sphere { radius: 1.0 }, 16);
    let solver = BoundarySolver::new(&a).unwrap();
    let f = DensityVector::constant(&b, 1.0);
    assert!(matches!(solver.dirichlet(&f), Err(Error::QuadratureMismatch { .. })));
    assert!(matches!(solver.solve_single_layer(&f), Err(Error::QuadratureMismatch { .. })));
    assert!(DensityVector::new(&a, vec![1.0; 3]).is_err());
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let run = |t| {
        with_threads(t, || {
            let q = quad(Shape::Star { radius: 1.0, terms: vec![(2, 0, 0.1), (3, 1, 0.05)] }, 16);
            let eq = solve_equilibrium(&q).unwrap();
            (eq.capacity, eq.density.values)
        })
        .unwrap()
    };
    let (c1, d1) = run(1);
    let (c2, d2) = run(2);
    let (c4, d4) = run(4);
    assert_eq!(c1.to_bits(), c2.to_bits());
    assert_eq!(c1.to_bits(), c4.to_bits());
    assert_eq!(d1, d2);
    assert_eq!(d1, d4);
}
