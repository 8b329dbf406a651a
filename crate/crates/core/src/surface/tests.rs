use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn surfaces() -> Vec<(ModelSurface, fn(&mut ChaCha8Rng) -> [f64; 2])> {
    vec![
        (ModelSurface::plane(), |r| [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)]),
        (ModelSurface::sphere(1.0).unwrap(), |r| [r.gen_range(0.0..PI), r.gen_range(-PI..PI)]),
        (ModelSurface::sphere(0.25).unwrap(), |r| [r.gen_range(0.0..PI), r.gen_range(-PI..PI)]),
        (ModelSurface::hyperbolic(1.0).unwrap(), |r| {
            let (a, rad) = (r.gen_range(-PI..PI), r.gen_range(0.0f64..0.9));
            [rad * a.cos(), rad * a.sin()]
        }),
        (ModelSurface::cylinder(TAU).unwrap(), |r| [r.gen_range(0.0..TAU), r.gen_range(-3.0..3.0)]),
        (ModelSurface::slit_plane(), |r| loop {
            let p: [f64; 2] = [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
            if p[0].abs() > 1e-3 || p[1] < 0.0 {
                return p;
            }
        }),
        (ModelSurface::cone(1.5 * PI).unwrap(), |r| [r.gen_range(0.01..3.0), r.gen_range(0.0..1.5 * PI)]),
        (ModelSurface::cone(2.5 * PI).unwrap(), |r| [r.gen_range(0.01..3.0), r.gen_range(0.0..2.5 * PI)]),
    ]
}

#[test]
fn plane_pythagoras() {
    let s = ModelSurface::plane();
    let d = s.distance(&s.point(0.0, 0.0).unwrap(), &s.point(3.0, 4.0).unwrap()).unwrap();
    assert!((d - 5.0).abs() < 1e-15);
}

#[test]
fn sphere_poles_are_pi_apart() {
    let s = ModelSurface::sphere(1.0).unwrap();
    let d = s.distance(&s.point(0.0, 0.0).unwrap(), &s.point(PI, 1.3).unwrap()).unwrap();
    assert!((d - PI).abs() < 1e-12);
}

/// Brute force over one-waypoint polylines dipping below the slit tip.
fn slit_bruteforce(a: [f64; 2], b: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 1..=200_000 {
        let e = 2.0 * k as f64 / 200_000.0;
        let w = [0.0, -e];
        let l = (a[0] - w[0]).hypot(a[1] - w[1]) + (b[0] - w[0]).hypot(b[1] - w[1]);
        best = best.min(l);
    }
    best
}

#[test]
fn slit_plane_routes_around_tip() {
    let s = ModelSurface::slit_plane();
    let (a, b) = ([-1.0, 1.0], [1.0, 1.0]);
    let oracle = slit_bruteforce(a, b);
    let d = s.distance(&s.point(a[0], a[1]).unwrap(), &s.point(b[0], b[1]).unwrap()).unwrap();
    assert!((d - 2.0 * SQRT_2).abs() < 1e-12);
    assert!((d - oracle).abs() < 1e-4, "d={d} oracle={oracle}");
    let g = s.geodesics(&s.point(a[0], a[1]).unwrap(), &s.point(b[0], b[1]).unwrap(), 1e-9).unwrap();
    assert_eq!(g.paths.len(), 1);
    assert!(!g.paths[0].attained);
}

#[test]
fn slit_plane_rejects_ray_points() {
    let s = ModelSurface::slit_plane();
    assert!(s.point(0.0, 0.0).is_err());
    assert!(s.point(0.0, 2.0).is_err());
    assert!(s.point(0.0, -1.0).is_ok());
}

#[test]
fn slit_plane_locally_flat_on_right_half() {
    let s = ModelSurface::slit_plane();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let a = [rng.gen_range(0.01..3.0), rng.gen_range(-3.0..3.0)];
        let b = [rng.gen_range(0.01..3.0), rng.gen_range(-3.0..3.0)];
        let d = s.distance(&s.point(a[0], a[1]).unwrap(), &s.point(b[0], b[1]).unwrap()).unwrap();
        assert!((d - (a[0] - b[0]).hypot(a[1] - b[1])).abs() < 1e-12);
    }
}

#[test]
fn slit_plane_exp_reports_exit() {
    let s = ModelSurface::slit_plane();
    let x = s.point(-1.0, 1.0).unwrap();
    match s.exp_dir(&x, 0.0, 2.0) {
        Err(Error::DomainExit { t_exit }) => assert!((t_exit - 1.0).abs() < 1e-12),
        other => panic!("expected domain exit, got {other:?}"),
    }
    assert!(s.exp_dir(&x, 0.0, 0.5).is_ok());
}

#[test]
fn cylinder_half_turn_has_two_geodesics() {
    let s = ModelSurface::cylinder(TAU).unwrap();
    let g = s.geodesics(&s.point(0.0, 0.0).unwrap(), &s.point(PI, 0.0).unwrap(), 1e-9).unwrap();
    assert_eq!(g.paths.len(), 2);
    for p in &g.paths {
        assert!((p.length - PI).abs() < 1e-12);
    }
}

#[test]
fn sphere_antipode_is_continuum() {
    let s = ModelSurface::sphere(1.0).unwrap();
    let g = s.geodesics_sampled(&s.point(0.0, 0.0).unwrap(), &s.point(PI, 0.0).unwrap(), 1e-9, 12).unwrap();
    assert!(g.continuum);
    assert!(g.paths.len() >= 12);
}

#[test]
fn plane_geodesic_is_unique() {
    let s = ModelSurface::plane();
    let g = s.geodesics(&s.point(0.5, -1.0).unwrap(), &s.point(2.0, 3.0).unwrap(), 1e-9).unwrap();
    assert_eq!(g.paths.len(), 1);
    assert!(!g.continuum);
}

#[test]
fn exp_examples() {
    let p = ModelSurface::plane();
    let x = p.point(0.0, 0.0).unwrap();
    let y = p.exp_map(&x, &p.tangent(x, [1.0, 0.0]).unwrap(), 2.0).unwrap();
    assert!((y.x() - 2.0).abs() < 1e-15 && y.y().abs() < 1e-15);

    let s = ModelSurface::sphere(1.0).unwrap();
    let n = s.point(0.0, 0.0).unwrap();
    for k in 0..8 {
        let v = s.unit_vector(n, k as f64);
        let south = s.exp_map(&n, &v, PI).unwrap();
        assert!((south.x() - PI).abs() < 1e-7);
    }

    // Invert cosh(d) = 1 + 2 r^2 / (1 - r^2) for d = 1 by bisection.
    let (mut lo, mut hi) = (0.0f64, 0.999f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let d = (1.0 + 2.0 * mid * mid / (1.0 - mid * mid)).acosh();
        if d < 1.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let h = ModelSurface::hyperbolic(1.0).unwrap();
    let o = h.point(0.0, 0.0).unwrap();
    let y = h.exp_map(&o, &h.unit_vector(o, 0.0), 1.0).unwrap();
    assert!((y.x() - lo).abs() < 1e-12);
    assert!((y.x() - 0.5f64.tanh()).abs() < 1e-12);
}

#[test]
fn angle_examples() {
    let p = ModelSurface::plane();
    let x = p.point(1.0, 1.0).unwrap();
    let e1 = p.tangent(x, [1.0, 0.0]).unwrap();
    let e2 = p.tangent(x, [0.0, 1.0]).unwrap();
    assert!((angle(&e1, &e2).unwrap() - FRAC_PI_2).abs() < 1e-15);
    assert!((angle(&e1, &e1.scaled(-1.0)).unwrap() - PI).abs() < 1e-15);
    assert!(angle(&e1, &e1).unwrap().abs() < 1e-7);
    assert!(matches!(angle(&e1, &e1.scaled(0.0)), Err(Error::ZeroVector)));

    let s = ModelSurface::sphere(1.0).unwrap();
    let b = s.point(FRAC_PI_4, 0.0).unwrap();
    let u = s.tangent(b, [1.0, 0.0]).unwrap();
    let v = s.tangent(b, [0.0, 1.0]).unwrap();
    // g = diag(1, sin^2 theta) so the cross term vanishes.
    assert!((angle(&u, &v).unwrap() - FRAC_PI_2).abs() < 1e-15);
    assert!((v.norm() - FRAC_PI_4.sin()).abs() < 1e-15);
}

#[test]
fn mismatched_surfaces_are_rejected() {
    let p = ModelSurface::plane();
    let s = ModelSurface::sphere(1.0).unwrap();
    let a = p.point(0.0, 0.0).unwrap();
    let b = s.point(1.0, 0.0).unwrap();
    assert!(matches!(p.distance(&a, &b), Err(Error::SurfaceMismatch { .. })));
}

#[test]
fn triangle_inequality_and_symmetry() {
    for (s, sample) in surfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let [a, b, c] = [sample(&mut rng), sample(&mut rng), sample(&mut rng)];
            let (a, b, c) = (s.point(a[0], a[1]).unwrap(), s.point(b[0], b[1]).unwrap(), s.point(c[0], c[1]).unwrap());
            let ab = s.distance(&a, &b).unwrap();
            let ba = s.distance(&b, &a).unwrap();
            let bc = s.distance(&b, &c).unwrap();
            let ac = s.distance(&a, &c).unwrap();
            assert!((ab - ba).abs() <= 1e-9, "{}: asymmetric {ab} {ba}", s.kind());
            assert!(ac <= ab + bc + 1e-9, "{}: {ac} > {ab} + {bc}", s.kind());
        }
    }
}

#[test]
fn geodesic_lengths_match_distance() {
    for (s, sample) in surfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (a, b) = (sample(&mut rng), sample(&mut rng));
            let (a, b) = (s.point(a[0], a[1]).unwrap(), s.point(b[0], b[1]).unwrap());
            let d = s.distance(&a, &b).unwrap();
            let g = s.geodesics(&a, &b, 1e-9).unwrap();
            assert!(!g.paths.is_empty());
            for path in &g.paths {
                assert!((path.length - d).abs() <= 1e-9);
                // The polyline must be traversed at unit speed up to chord error.
                let poly: f64 = path.polyline.windows(2).map(|w| s.distance(&w[0], &w[1]).unwrap()).sum();
                assert!(poly <= d + 1e-7, "{}: polyline {poly} vs {d}", s.kind());
                assert!(poly >= d - 1e-6 * d.max(1.0), "{}: polyline {poly} vs {d}", s.kind());
            }
        }
    }
}

#[test]
fn exp_log_round_trip() {
    for (s, sample) in surfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 500 {
            let a = sample(&mut rng);
            let x = s.point(a[0], a[1]).unwrap();
            let scale = s.injectivity_scale(&x).min(2.0);
            let t = rng.gen_range(0.05..0.9) * scale;
            let psi = rng.gen_range(-PI..PI);
            let v = s.unit_vector(x, psi);
            let y = match s.exp_map(&x, &v, t) {
                Ok(y) => y,
                Err(Error::DomainExit { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let g = s.geodesics(&x, &y, 1e-12).unwrap();
            assert_eq!(g.paths.len(), 1, "{} at {:?}", s.kind(), a);
            let back = angle(&g.paths[0].direction, &v).unwrap();
            assert!(back <= 1e-6, "{}: angle {back}", s.kind());
            assert!((s.distance(&x, &y).unwrap() - t).abs() < 1e-9);
            checked += 1;
        }
    }
}

#[test]
fn tangent_norm_cache_is_consistent() {
    let s = ModelSurface::sphere(2.0).unwrap();
    let x = s.point(1.0, 0.3).unwrap();
    let v = s.tangent(x, [0.3, -0.7]).unwrap();
    let r2 = 0.5;
    let expect = (r2 * 0.09 + r2 * 1.0f64.sin().powi(2) * 0.49).sqrt();
    assert!((v.norm() - expect).abs() <= 1e-12 * expect);
    let u = s.unit_vector(x, 0.77);
    assert!(u.is_unit());
    assert!((u.frame_angle() - 0.77).abs() < 1e-12);
}

#[test]
fn cone_distance_through_apex() {
    let s = ModelSurface::cone(2.5 * PI).unwrap();
    let a = s.point(1.0, 0.0).unwrap();
    let b = s.point(2.0, 1.25 * PI).unwrap();
    // Both sides subtend more than pi, so the minimizer passes the apex.
    assert!((s.distance(&a, &b).unwrap() - 3.0).abs() < 1e-12);
}
