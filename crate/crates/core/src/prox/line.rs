//! Exact resolvents on one-dimensional backends: the real line and the
//! edges of a metric tree. Along a single edge every distance term is
//! `|s − c|` for a virtual coordinate `c`, so the prox objective is a convex
//! piecewise quadratic in the offset.

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::geometry::{ConvexSet, MetricTree, Point, Ray, Space, TreePoint};
use crate::search::{golden_section, LineObjective};

/// Terms without a piecewise-quadratic form, minimized by golden section.
type Extra<'a> = Vec<(&'a Functional, f64)>;

fn minimize(
    space: &Space,
    obj: &LineObjective,
    extra: &Extra<'_>,
    to_point: &dyn Fn(f64) -> Point,
    lo: f64,
    hi: f64,
) -> f64 {
    let s0 = obj.minimize(lo, hi);
    if extra.is_empty() {
        return s0;
    }
    let full = |s: f64| {
        let p = to_point(s);
        obj.eval(s) + extra.iter().map(|(f, c)| c * f.value(space, &p)).sum::<f64>()
    };
    // Grow a bracket around the smooth minimizer until both ends rise.
    let center = full(s0);
    let mut r = 1.0_f64.max(s0.abs() * 1e-3);
    let (mut a, mut b);
    loop {
        a = (s0 - r).max(lo);
        b = (s0 + r).min(hi);
        let left_ok = a <= lo || full(a) >= center;
        let right_ok = b >= hi || full(b) >= center;
        if (left_ok && right_ok) || r > 1e12 {
            break;
        }
        r *= 2.0;
    }
    let tol = 1e-12 * (1.0 + b - a);
    let (s, v) = golden_section(full, a, b, tol);
    let s = if v <= center { s } else { s0 };
    polish(space, obj, extra, to_point, lo, hi, s)
}

/// Golden section stalls near `√ε` on the quadratic bottom. Where the extra
/// terms are locally linear, fold their slope into the exact line solve.
fn polish(
    space: &Space,
    obj: &LineObjective,
    extra: &Extra<'_>,
    to_point: &dyn Fn(f64) -> Point,
    lo: f64,
    hi: f64,
    s: f64,
) -> f64 {
    let e = |t: f64| {
        let p = to_point(t);
        extra.iter().map(|(f, c)| c * f.value(space, &p)).sum::<f64>()
    };
    let full = |t: f64| obj.eval(t) + e(t);
    for h in [1e-3, 1e-5] {
        let (a, b) = ((s - h).max(lo), (s + h).min(hi));
        if b - a < h {
            continue;
        }
        let (ea, em, eb) = (e(a), e(0.5 * (a + b)), e(b));
        if (ea + eb - 2.0 * em).abs() > 1e-9 * h {
            continue;
        }
        let mut linear = obj.clone();
        linear.linear += (eb - ea) / (b - a);
        let t = linear.minimize(a, b);
        if t > a && t < b && full(t) <= full(s) + 1e-15 * full(s).abs().max(1.0) {
            return t;
        }
    }
    s
}

pub(super) fn real_line_resolvent(
    space: &Space,
    atoms: &[(Functional, f64)],
    x: &Point,
    lambda: f64,
) -> Result<(Point, usize)> {
    let x0 = x.as_vector().expect("line point")[0];
    let mut obj = LineObjective {
        quadratics: vec![(x0, 1.0 / lambda)],
        ..Default::default()
    };
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut extra = Vec::new();
    for (atom, c) in atoms {
        let coord = |p: &Point| p.as_vector().expect("line point")[0];
        match atom {
            Functional::Distance { anchor, weight } => obj.kinks.push((coord(anchor), *weight)),
            Functional::SquaredDistance { anchor, weight } => obj.quadratics.push((coord(anchor), *weight)),
            Functional::Busemann(ray) => match ray.normalized(space)? {
                Ray::Directed { direction, .. } => obj.linear -= c * direction[0],
                _ => unreachable!("validated line ray"),
            },
            Functional::Indicator(set) => {
                let (l, h) = match set {
                    ConvexSet::Interval { lo, hi } => (*lo, *hi),
                    ConvexSet::Ball { center, radius } => (coord(center) - radius, coord(center) + radius),
                    ConvexSet::Segment { start, end } => {
                        (coord(start).min(coord(end)), coord(start).max(coord(end)))
                    }
                    ConvexSet::TreeSpan { .. } => unreachable!("validated set"),
                };
                lo = lo.max(l);
                hi = hi.min(h);
            }
            other => {
                if matches!(other, Functional::Custom(c) if c.lipschitz.is_none()) {
                    return Err(Error::unsupported(
                        "custom functional needs a resolvent or a Lipschitz bound",
                    ));
                }
                extra.push((other, *c));
            }
        }
    }
    if lo > hi {
        return Err(Error::invalid("indicator sets have empty intersection"));
    }
    let s = minimize(space, &obj, &extra, &|s| Point::scalar(s), lo, hi);
    Ok((Point::scalar(s), 1))
}

/// Interval of offsets of `edge` lying in `set`, if nonempty.
fn edge_window(space: &Space, tree: &MetricTree, edge: usize, set: &ConvexSet) -> Option<(f64, f64)> {
    let e = tree.edge(edge);
    let (u, v) = (Point::node(e.u), Point::node(e.v));
    let tol = 1e-12 * (1.0 + e.length);
    let pu = set.project(space, &u);
    let pv = set.project(space, &v);
    let on_edge = |p: &Point| (space.dist(&u, p) + space.dist(p, &v) - e.length).abs() <= tol;
    let du = space.dist(&u, &pu);
    let dv = space.dist(&v, &pv);
    let lo = if du <= tol {
        0.0
    } else if on_edge(&pu) {
        du
    } else {
        return None;
    };
    let hi = if dv <= tol {
        e.length
    } else if on_edge(&pv) {
        e.length - dv
    } else {
        return None;
    };
    (lo <= hi + tol).then_some((lo, hi.max(lo)))
}

pub(super) fn tree_resolvent(
    space: &Space,
    tree: &MetricTree,
    atoms: &[(Functional, f64)],
    x: &Point,
    lambda: f64,
) -> Result<(Point, usize)> {
    let xp = x.as_tree().expect("tree point");
    if tree.edges().is_empty() {
        return Ok((Point::node(0), 1));
    }
    let full_value = |p: &Point| {
        atoms.iter().map(|(f, c)| c * f.value(space, p)).sum::<f64>()
            + space.dist(x, p).powi(2) / (2.0 * lambda)
    };
    let mut best: Option<(f64, Point)> = None;
    for edge in 0..tree.edges().len() {
        let len = tree.edge(edge).length;
        let (mut lo, mut hi) = (0.0, len);
        let mut obj = LineObjective {
            quadratics: vec![(tree.edge_coordinate(edge, xp), 1.0 / lambda)],
            ..Default::default()
        };
        let mut extra = Vec::new();
        let mut empty = false;
        for (atom, c) in atoms {
            let coord = |p: &Point| tree.edge_coordinate(edge, p.as_tree().expect("tree point"));
            match atom {
                Functional::Distance { anchor, weight } => obj.kinks.push((coord(anchor), *weight)),
                Functional::SquaredDistance { anchor, weight } => {
                    obj.quadratics.push((coord(anchor), *weight))
                }
                Functional::Busemann(Ray::Toward { leaf, .. }) => {
                    obj.kinks.push((tree.edge_coordinate(edge, TreePoint::Node(*leaf)), *c))
                }
                Functional::Indicator(set) => match edge_window(space, tree, edge, set) {
                    Some((l, h)) => {
                        lo = f64::max(lo, l);
                        hi = f64::min(hi, h);
                    }
                    None => empty = true,
                },
                other => {
                    if matches!(other, Functional::Custom(c) if c.lipschitz.is_none()) {
                        return Err(Error::unsupported(
                            "custom functional needs a resolvent or a Lipschitz bound",
                        ));
                    }
                    extra.push((other, *c));
                }
            }
        }
        if empty || lo > hi {
            continue;
        }
        let to_point = |s: f64| Point::Tree(tree.canonical(TreePoint::Edge { edge, offset: s }));
        let s = minimize(space, &obj, &extra, &to_point, lo, hi);
        let p = to_point(s);
        let v = full_value(&p);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, p));
        }
    }
    best.map(|(_, p)| (p, tree.edges().len()))
        .ok_or_else(|| Error::invalid("indicator sets have empty intersection"))
}
