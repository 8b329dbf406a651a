use std::f64::consts::{PI, TAU};

use cutlocus::closed_set::ClosedSet;
use cutlocus::export::fmt_f64;
use cutlocus::field::{classify_region, directional_derivative, gradient_norm, max_directional_derivative, ChartRegion, FieldConfig};
use cutlocus::mesh::{icosphere, MeshSurface};
use cutlocus::par::Parallelism;
use cutlocus::surface::{ModelSurface, SurfaceKind, SurfacePoint};
use proptest::prelude::*;

fn surfaces() -> Vec<ModelSurface> {
    vec![
        ModelSurface::plane(),
        ModelSurface::sphere(1.0).unwrap(),
        ModelSurface::sphere(4.0).unwrap(),
        ModelSurface::hyperbolic(1.0).unwrap(),
        ModelSurface::cylinder(3.0).unwrap(),
        ModelSurface::slit_plane(),
        ModelSurface::cone(4.0).unwrap(),
    ]
}

/// Maps unit-square coordinates into a compact part of each chart.
fn place(s: &ModelSurface, u: f64, v: f64) -> Option<SurfacePoint> {
    let (x, y) = match s.kind() {
        SurfaceKind::RoundSphere { .. } => (0.05 + u * (PI - 0.1), -PI + TAU * v),
        SurfaceKind::HyperbolicPlane { .. } => (0.8 * u * (TAU * v).cos(), 0.8 * u * (TAU * v).sin()),
        SurfaceKind::FlatCone { .. } => (0.05 + 2.0 * u, TAU * v),
        _ => (-2.0 + 4.0 * u, -2.0 + 4.0 * v),
    };
    s.point(x, y).ok()
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..1.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(k in 0usize..7, a in (unit(), unit()), b in (unit(), unit()), c in (unit(), unit())) {
        let s = surfaces()[k];
        let (Some(p), Some(q), Some(r)) = (place(&s, a.0, a.1), place(&s, b.0, b.1), place(&s, c.0, c.1)) else {
            return Ok(());
        };
        let pq = s.distance(&p, &q).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - s.distance(&q, &p).unwrap()).abs() <= 1e-9);
        prop_assert!(s.distance(&p, &p).unwrap() <= 1e-9);
        prop_assert!(s.distance(&p, &r).unwrap() <= pq + s.distance(&q, &r).unwrap() + 1e-9);
    }

    #[test]
    fn short_geodesics_are_minimizing(k in 0usize..7, a in (unit(), unit()), psi in -PI..PI, frac in 0.05..0.9f64) {
        let s = surfaces()[k];
        let Some(x) = place(&s, a.0, a.1) else { return Ok(()) };
        let t = frac * s.injectivity_scale(&x).min(1.0);
        let Ok(y) = s.exp_dir(&x, psi, t) else { return Ok(()) };
        prop_assert!((s.distance(&x, &y).unwrap() - t).abs() <= 1e-8);
    }

    #[test]
    fn distance_to_a_set_is_one_lipschitz(
        k in 0usize..5,
        pts in prop::collection::vec((unit(), unit()), 1..6),
        a in (unit(), unit()),
        b in (unit(), unit()),
    ) {
        let s = surfaces()[k];
        let set: Vec<SurfacePoint> = pts.iter().filter_map(|p| place(&s, p.0, p.1)).collect();
        if set.is_empty() {
            return Ok(());
        }
        let set = ClosedSet::points(s, set).unwrap();
        let (Some(p), Some(q)) = (place(&s, a.0, a.1), place(&s, b.0, b.1)) else { return Ok(()) };
        let (dp, dq) = (set.eval_da(&p).unwrap(), set.eval_da(&q).unwrap());
        prop_assert!((dp - dq).abs() <= s.distance(&p, &q).unwrap() + 1e-9);
        let g = gradient_norm(&set, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&g.grad_norm));
        if g.footpoint_count == 1 && dp > 1e-6 {
            prop_assert!((g.grad_norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn gradient_norm_dominates_every_direction(dirs in prop::collection::vec(-PI..PI, 1..8), u in -PI..PI) {
        let (v, arg) = max_directional_derivative(&dirs);
        prop_assert!(v + 1e-12 >= directional_derivative(&dirs, u));
        prop_assert!((directional_derivative(&dirs, arg) - v).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&v));
        let mut rev = dirs.clone();
        rev.reverse();
        prop_assert!((max_directional_derivative(&rev).0 - v).abs() <= 1e-9);
    }

    #[test]
    fn formatted_floats_round_trip(x in any::<f64>()) {
        let s = fmt_f64(x);
        if x.is_nan() {
            prop_assert_eq!(s, "nan");
        } else {
            prop_assert_eq!(s.parse::<f64>().unwrap(), if x == 0.0 { 0.0 } else { x });
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_distances_form_a_metric(i in 0usize..42, j in 0usize..42, k in 0usize..42) {
        let (v, f) = icosphere(1);
        let m = MeshSurface::new(v, f, 2).unwrap();
        let (di, dj) = (m.distances_from(i).unwrap(), m.distances_from(j).unwrap());
        prop_assert!((di[j] - dj[i]).abs() <= 1e-12);
        prop_assert!(di[k] <= di[j] + dj[k] + 1e-12);
        prop_assert!(di[i] == 0.0);
    }
}

#[test]
fn sequential_and_parallel_grids_agree() {
    let s = ModelSurface::sphere(1.0).unwrap();
    let a = ClosedSet::points(s, vec![s.point(1.0, 0.3).unwrap(), s.point(2.0, -1.0).unwrap()]).unwrap();
    let region = ChartRegion::new([0.1, 3.0], [-3.0, 3.0], [40, 33]).unwrap();
    let run = |parallelism| {
        let g = classify_region(&a, &region, &FieldConfig { parallelism, ..FieldConfig::default() }).unwrap();
        g.cells.iter().map(|c| (c.distance.to_bits(), c.grad_norm().to_bits(), c.label)).collect::<Vec<_>>()
    };
    assert_eq!(run(Parallelism::Sequential), run(Parallelism::Parallel));
}
