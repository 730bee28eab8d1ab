use capsense::geometry::{make_surface, Profile, Shape};
use capsense::oracle::*;
use capsense::Error;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn spheroids_have_closed_forms() {
    // prolate a > b = c: √(a²−c²) / acosh(a/c)
    let (a, c) = (3.0f64, 1.0f64);
    let e = (a * a - c * c).sqrt();
    assert!(rel(ellipsoid_capacity(a, c, c).unwrap(), e / (a / c).acosh()) < 1e-11);
    // oblate a = b > c: √(a²−c²) / acos(c/a)
    let (a, c) = (2.0f64, 0.5f64);
    let e = (a * a - c * c).sqrt();
    assert!(rel(ellipsoid_capacity(a, a, c).unwrap(), e / (c / a).acos()) < 1e-11);
}

#[test]
fn triaxial_reference_value() {
    // 1/R_F(4, 1, 1/4) from an independent Carlson evaluation
    let c = ellipsoid_capacity(2.0, 1.0, 0.5).unwrap();
    assert!((c - 1.1300718110789862).abs() < 1e-12, "{c}");
    assert!((ellipsoid_capacity_midpoint(2.0, 1.0, 0.5).unwrap() - c).abs() < 1e-12);
}

#[test]
fn ellipsoid_reduces_to_the_sphere() {
    for r in [0.3, 1.0, 7.0] {
        assert!(rel(ellipsoid_capacity(r, r, r).unwrap(), sphere_capacity(r).unwrap()) < 1e-12);
    }
}

#[test]
fn domains_are_enforced() {
    assert!(matches!(sphere_capacity(0.0), Err(Error::Domain(_))));
    assert!(matches!(sphere_capacity(f64::NAN), Err(Error::Domain(_))));
    assert!(matches!(ellipsoid_capacity(1.0, -1.0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(ellipsoid_capacity_midpoint(1.0, 1.0, 0.0), Err(Error::Domain(_))));
    assert!(matches!(sphere_np_eigenvalue(-1), Err(Error::Domain(_))));
    assert!(matches!(sphere_exterior_field(1.0, [0.5, 0.0, 0.0]), Err(Error::Domain(_))));
    let s = make_surface(&Shape::Sphere { radius: 1.0 }).unwrap();
    assert!(fd_capacity_derivative(&s, &Profile::one(), 0.0, 16).is_err());
}

#[test]
fn sphere_field_gradient_matches_differences() {
    let x = [1.2, -0.7, 2.1];
    let (_, g) = sphere_exterior_field(2.0, x).unwrap();
    let h = 1e-6;
    for k in 0..3 {
        let (mut xp, mut xm) = (x, x);
        xp[k] += h;
        xm[k] -= h;
        let d = (sphere_exterior_field(2.0, xp).unwrap().0 - sphere_exterior_field(2.0, xm).unwrap().0) / (2.0 * h);
        assert!((d - g[k]).abs() < 1e-8, "{k}: {d} vs {}", g[k]);
    }
}

#[test]
fn np_eigenvalues_of_the_sphere() {
    assert_eq!(sphere_np_eigenvalue(0).unwrap(), 0.5);
    assert_eq!(sphere_np_eigenvalue(1).unwrap(), 1.0 / 6.0);
    assert_eq!(sphere_np_eigenvalue(2).unwrap(), 0.1);
}

#[test]
fn reference_table_dispatches() {
    let names: Vec<&str> = REFERENCES.iter().map(|r| r.name).collect();
    assert_eq!(names, ["sphere_capacity", "ellipsoid_capacity", "sphere_np_eigenvalue"]);
    assert_eq!((REFERENCES[0].eval)(&[2.5]).unwrap(), 2.5);
    assert!((REFERENCES[2].eval)(&[-3.0]).is_err());
    assert!(REFERENCES.iter().all(|r| !r.validity.is_empty()));
}

#[test]
fn finite_difference_derivative_of_a_dilation() {
    // cap((1+δ)B) = 1+δ
    let s = make_surface(&Shape::Sphere { radius: 1.0 }).unwrap();
    let d = fd_capacity_derivative(&s, &Profile::one(), 1e-3, 16).unwrap();
    assert!((d - 1.0).abs() < 1e-5, "{d}");
    assert_eq!(fd_capacity_derivative(&s, &Profile::Zero, 1e-3, 16).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn adaptive_and_midpoint_rules_agree(a in 0.2f64..5.0, b in 0.2f64..5.0, c in 0.2f64..5.0) {
        let x = ellipsoid_capacity(a, b, c).unwrap();
        let y = ellipsoid_capacity_midpoint(a, b, c).unwrap();
        prop_assert!(rel(x, y) < 1e-9, "{} vs {}", x, y);
        // capacity is symmetric in the axes and lies between the inscribed and circumscribed spheres
        prop_assert!(rel(ellipsoid_capacity(c, a, b).unwrap(), x) < 1e-10);
        prop_assert!(x >= a.min(b).min(c) * (1.0 - 1e-12) && x <= a.max(b).max(c) * (1.0 + 1e-12));
    }
}
