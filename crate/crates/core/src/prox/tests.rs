use super::*;
use crate::geometry::{ConvexSet, Isometry, Matrix, MetricTree, Ray, TreePoint};
use crate::search::golden_section;
use std::f64::consts::FRAC_PI_2;

fn line() -> Space {
    Space::Euclidean { dim: 1 }
}

fn x_of(p: &Point) -> f64 {
    p.as_vector().unwrap()[0]
}

fn tripod() -> Space {
    Space::tree(MetricTree::star(3, 1.0).unwrap())
}

/// Brute-force minimizer of the prox objective over a fine grid of the tree.
fn tree_grid_oracle(space: &Space, f: &Functional, x: &Point, lambda: f64, h: f64) -> Point {
    let tree = space.as_tree().unwrap();
    let mut best = (f64::INFINITY, x.clone());
    for (e, edge) in tree.edges().iter().enumerate() {
        let steps = (edge.length / h).ceil() as usize;
        for k in 0..=steps {
            let p = Point::Tree(tree.canonical(TreePoint::Edge {
                edge: e,
                offset: (k as f64 * h).min(edge.length),
            }));
            let v = prox_objective(space, f, x, lambda, &p);
            if v < best.0 {
                best = (v, p);
            }
        }
    }
    best.1
}

#[test]
fn zero_step_is_identity() {
    let s = Space::Hyperboloid { dim: 2 };
    let x = Space::hyperboloid_point(&[0.3, 0.4]);
    let f = Functional::distance(s.origin(), 1.0);
    let r = resolvent(&s, &f, &x, 0.0, 1e-9).unwrap();
    assert_eq!(r.point, x);
    assert_eq!(r.iterations, 0);
}

#[test]
fn scalar_quadratic_resolvent_and_envelope() {
    let f = Functional::squared_distance(Point::scalar(0.0), 1.0);
    let r = resolvent(&line(), &f, &Point::scalar(2.0), 1.0, 1e-10).unwrap();
    assert!((x_of(&r.point) - 1.0).abs() < 1e-15);
    let env = moreau_envelope(&line(), &f, &Point::scalar(2.0), 1.0).unwrap();
    assert!((env - 1.0).abs() < 1e-15);
    // golden-section oracle for the envelope
    let (_, oracle) = golden_section(|y| 0.5 * y * y + 0.5 * (2.0 - y).powi(2), -5.0, 5.0, 1e-12);
    assert!((env - oracle).abs() < 1e-12);
}

#[test]
fn indicator_envelope_is_half_squared_distance_scaled() {
    let f = Functional::Indicator(ConvexSet::Interval { lo: 0.0, hi: 1.0 });
    let env = moreau_envelope(&line(), &f, &Point::scalar(2.0), 0.5).unwrap();
    assert!((env - 1.0).abs() < 1e-15);
}

#[test]
fn soft_threshold_examples() {
    let f = Functional::distance(Point::scalar(0.0), 1.0);
    let x = Point::scalar(5.0);
    assert_eq!(moreau_envelope(&line(), &f, &x, 1.0).unwrap(), 4.5);
    assert_eq!(slope_upper(&line(), &f, &x, 1.0).unwrap(), 1.0);
    let c = envelope_chain_slack(&line(), &f, &x, 1.0).unwrap();
    assert!(c.s1.abs() < 1e-15 && c.s2.unwrap().abs() < 1e-15);
    let q = Functional::squared_distance(Point::scalar(0.0), 1.0);
    let c = envelope_chain_slack(&line(), &q, &Point::scalar(2.0), 1.0).unwrap();
    assert!((c.s1 - 1.0).abs() < 1e-14);
    let ind = Functional::Indicator(ConvexSet::Interval { lo: 0.0, hi: 1.0 });
    let c = envelope_chain_slack(&line(), &ind, &Point::scalar(0.5), 1.0).unwrap();
    assert_eq!(c.s1, 0.0);
    assert_eq!(slope_upper(&line(), &ind, &Point::scalar(0.5), 1.0).unwrap(), 0.0);
}

#[test]
fn slope_upper_approaches_slope() {
    let q = Functional::squared_distance(Point::scalar(0.0), 1.0);
    let s = slope_upper(&line(), &q, &Point::scalar(1.0), 1e-6).unwrap();
    assert!((s - 1.0).abs() < 1e-5);
}

#[test]
fn tripod_distance_resolvent_walks_through_branch_point() {
    let s = tripod();
    let f = Functional::distance(Point::node(1), 1.0);
    let x = Point::on_edge(1, 0.8);
    let r = resolvent(&s, &f, &x, 1.2, 1e-10).unwrap();
    assert!((s.dist(&x, &r.point) - 1.2).abs() < 1e-12);
    assert!((s.dist(&r.point, &Point::node(1)) - 0.6).abs() < 1e-12);
    let oracle = tree_grid_oracle(&s, &f, &x, 1.2, 1e-4);
    assert!(s.dist(&oracle, &r.point) < 2e-4);
}

#[test]
fn tree_median_resolvent_matches_grid() {
    let s = tripod();
    let f = Functional::uniform_fermat_weber(vec![Point::node(1), Point::node(2), Point::node(3)], 1).unwrap();
    for (x, lambda) in [(Point::node(1), 0.5), (Point::on_edge(2, 0.3), 2.0), (Point::node(0), 1.0)] {
        let r = resolvent(&s, &f, &x, lambda, 1e-10).unwrap();
        let oracle = tree_grid_oracle(&s, &f, &x, lambda, 1e-4);
        assert!(s.dist(&oracle, &r.point) < 2e-4);
        assert!(r.growth_gap >= -1e-10, "{}", r.growth_gap);
    }
}

#[test]
fn tree_indicator_plus_distance() {
    let s = tripod();
    let branch_a = ConvexSet::TreeSpan {
        points: vec![Point::node(0), Point::node(1)],
    };
    let f = Functional::sum(vec![
        (Functional::Indicator(branch_a), 1.0),
        (Functional::distance(Point::node(2), 1.0), 1.0),
    ])
    .unwrap();
    let r = resolvent(&s, &f, &Point::node(1), 0.3, 1e-10).unwrap();
    // Pulled toward node 2 but confined to branch A.
    assert!((s.dist(&r.point, &Point::node(0)) - 0.7).abs() < 1e-12);
}

#[test]
fn euclidean_busemann_translates() {
    let s = Space::Euclidean { dim: 2 };
    let f = Functional::Busemann(Ray::Directed {
        base: Point::vector([0.0, 0.0]),
        direction: vec![0.0, 2.0],
    });
    let r = resolvent(&s, &f, &Point::vector([1.0, 1.0]), 0.5, 1e-10).unwrap();
    assert_eq!(r.point, Point::vector([1.0, 1.5]));
}

#[test]
fn hyperbolic_busemann_moves_unit_rate() {
    let s = Space::Hyperboloid { dim: 2 };
    let ray = Ray::Directed {
        base: s.origin(),
        direction: vec![0.0, 1.0, 0.0],
    };
    let f = Functional::Busemann(ray.clone());
    let x = Space::hyperboloid_point(&[0.2, -0.7]);
    let r = resolvent(&s, &f, &x, 0.8, 1e-10).unwrap();
    assert!((s.dist(&x, &r.point) - 0.8).abs() < 1e-10);
    let ray = ray.normalized(&s).unwrap();
    assert!((ray.busemann(&s, &r.point) - ray.busemann(&s, &x) + 0.8).abs() < 1e-10);
}

#[test]
fn rigid_displacement_resolvent_matches_golden_grid() {
    let s = Space::Euclidean { dim: 2 };
    let rot = Isometry::rotation2(FRAC_PI_2);
    let f = Functional::Displacement(rot.clone());
    let x = Point::vector([1.0, 0.0]);
    for lambda in [0.1, 0.3, 1.0, 5.0] {
        let r = resolvent(&s, &f, &x, lambda, 1e-10).unwrap();
        // The fixed point set is the origin, so the minimizer is radial.
        let (t, _) = golden_section(
            |a| prox_objective(&s, &f, &x, lambda, &Point::vector([a, 0.0])),
            0.0,
            1.0,
            1e-12,
        );
        let p = r.point.as_vector().unwrap();
        assert!((p[0] - t).abs() < 1e-6 && p[1].abs() < 1e-12, "{lambda}: {p:?} vs {t}");
        assert!(r.growth_gap >= -1e-9);
    }
}

#[test]
fn translation_displacement_is_constant() {
    let s = Space::Euclidean { dim: 2 };
    let f = Functional::Displacement(Isometry::translation(vec![1.0, 0.0]));
    let x = Point::vector([0.3, 0.4]);
    let r = resolvent(&s, &f, &x, 1.0, 1e-10).unwrap();
    assert!(s.dist(&r.point, &x) < 1e-12);
}

#[test]
fn spd_barycenter_via_majorize_minimize() {
    let s = Space::Spd { n: 2 };
    let a = Point::Matrix(Matrix::diag(&[4.0, 1.0]));
    let b = Point::Matrix(Matrix::diag(&[0.25, 1.0]));
    let f = Functional::uniform_fermat_weber(vec![a.clone(), b], 2).unwrap();
    let r = resolvent(&s, &f, &a, 1e3, 1e-12).unwrap();
    let expect = 2f64.ln() * 2.0 / (2.0 * 1e3 + 1.0);
    assert!((s.dist(&r.point, &s.origin()) - expect).abs() < 1e-9);
}

#[test]
fn hyperbolic_median_matches_closed_form_on_geodesic() {
    // Two anchors on a geodesic through the origin; the resolvent of the
    // median from the origin is the origin itself.
    let s = Space::Hyperboloid { dim: 2 };
    let a = Space::hyperboloid_point(&[1.0, 0.0]);
    let b = Space::hyperboloid_point(&[-1.0, 0.0]);
    let f = Functional::uniform_fermat_weber(vec![a.clone(), b], 1).unwrap();
    let r = resolvent(&s, &f, &s.origin(), 1.0, 1e-10).unwrap();
    assert!(s.dist(&r.point, &s.origin()) < 1e-10);
    // From a point off the geodesic, compare with a golden search along the
    // segment toward the resolvent and beyond.
    let x = Space::hyperboloid_point(&[0.2, 0.9]);
    let r = resolvent(&s, &f, &x, 0.4, 1e-11).unwrap();
    assert!(r.growth_gap >= -1e-9);
    let obj = |y: &Point| prox_objective(&s, &f, &x, 0.4, y);
    let base = obj(&r.point);
    for k in 0..50 {
        let th = k as f64 * 0.1257;
        let z = s.exp_map(&r.point, &crate::geometry::Tangent::Vector({
            let p = r.point.as_vector().unwrap();
            let mut v = vec![0.0, 1e-3 * th.cos(), 1e-3 * th.sin()];
            v[0] = (p[1] * v[1] + p[2] * v[2]) / p[0];
            v
        }));
        assert!(obj(&z) >= base - 1e-12);
    }
}

#[test]
fn custom_functional_needs_structure_off_trees() {
    let s = Space::Euclidean { dim: 2 };
    let f = Functional::Custom(crate::functionals::Custom::new("norm", |_, p| {
        p.as_vector().unwrap().iter().map(|v| v * v).sum::<f64>().sqrt()
    }));
    assert!(matches!(
        resolvent(&s, &f, &Point::vector([1.0, 1.0]), 1.0, 1e-8),
        Err(Error::Unsupported(_))
    ));
    let g = Functional::Custom(
        crate::functionals::Custom::new("abs", |_, p| p.as_vector().unwrap()[0].abs()).with_lipschitz(1.0),
    );
    let r = resolvent(&line(), &g, &Point::scalar(3.0), 1.0, 1e-8).unwrap();
    assert!((x_of(&r.point) - 2.0).abs() < 1e-6);
}

#[test]
fn splitting_handles_indicator_plus_busemann() {
    let s = Space::Euclidean { dim: 2 };
    let f = Functional::sum(vec![
        (
            Functional::Indicator(ConvexSet::Ball {
                center: Point::vector([0.0, 0.0]),
                radius: 1.0,
            }),
            1.0,
        ),
        (
            Functional::Busemann(Ray::Directed {
                base: Point::vector([0.0, 0.0]),
                direction: vec![1.0, 0.0],
            }),
            1.0,
        ),
    ])
    .unwrap();
    let r = resolvent(&s, &f, &Point::vector([0.0, 0.0]), 0.5, 1e-4).unwrap();
    let p = r.point.as_vector().unwrap();
    assert!((p[0] - 0.5).abs() < 1e-2 && p[1].abs() < 1e-2, "{p:?}");
}
