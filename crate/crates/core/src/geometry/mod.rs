//! Hadamard space backends and the metric operations built on them.

mod isometry;
mod linalg;
mod ray;
mod sets;
mod space;
mod tree;

pub use isometry::Isometry;
pub use linalg::{Matrix, SymEigen};
pub use ray::Ray;
pub use sets::ConvexSet;
pub use space::{GeodesicSegment, Point, Space, Tangent, HYPERBOLOID_DRIFT_TOL, SPD_SYMMETRY_TOL};
pub use tree::{Edge, MetricTree, TreePoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{bisect_increasing, golden_section};

/// Distance between two points, validating both.
pub fn distance(space: &Space, x: &Point, y: &Point) -> Result<f64> {
    space.distance(x, y)
}

pub fn geodesic_point(space: &Space, x: &Point, y: &Point, t: f64) -> Result<Point> {
    space.geodesic_point(x, y, t)
}

/// Nearest point of a geodesic segment: `(t*, γ(t*))`.
pub fn project_to_segment(space: &Space, p: &Point, seg: &GeodesicSegment) -> Result<(f64, Point)> {
    space.validate(p)?;
    space.validate(&seg.start)?;
    space.validate(&seg.end)?;
    Ok(segment_projection(space, p, &seg.start, &seg.end))
}

pub(crate) fn segment_projection(space: &Space, p: &Point, x: &Point, y: &Point) -> (f64, Point) {
    let len = space.dist(x, y);
    if len == 0.0 {
        return (0.0, x.clone());
    }
    let t = match space {
        Space::Euclidean { .. } | Space::PdNorm { .. } => {
            let v = space.log_map(x, y);
            let w = space.log_map(x, p);
            (space.inner(x, &w, &v) / space.inner(x, &v, &v)).clamp(0.0, 1.0)
        }
        Space::Tree(tree) => {
            let (Point::Tree(a), Point::Tree(b), Point::Tree(q)) = (x, y, p) else {
                unreachable!("validated tree points")
            };
            tree.project_to_path(*q, *a, *b) / len
        }
        _ if space.is_riemannian() => {
            // Derivative sign of t ↦ ½d(p, γ(t))², increasing by convexity.
            let slope = |t: f64| {
                let g = space.geodesic(x, y, t);
                let to_p = space.log_map(&g, p);
                let ahead = space.log_map(&g, y).add(&space.log_map(&g, x).scale(-1.0));
                -space.inner(&g, &to_p, &ahead)
            };
            if slope(0.0) >= 0.0 {
                0.0
            } else if slope(1.0) <= 0.0 {
                1.0
            } else {
                bisect_increasing(slope, 0.0, 1.0, 200)
            }
        }
        _ => {
            let f = |t: f64| space.dist(p, &space.geodesic(x, y, t)).powi(2);
            golden_section(f, 0.0, 1.0, 1e-12).0
        }
    };
    (t, space.geodesic(x, y, t))
}

/// Metric projection onto a closed convex set.
pub fn project_to_set(space: &Space, p: &Point, set: &ConvexSet) -> Result<Point> {
    space.validate(p)?;
    set.validate(space)?;
    Ok(set.project(space, p))
}

/// Finite-`h` comparison angle at `x` between the geodesics toward `y` and `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub h: f64,
    pub angle: f64,
    /// Angle at `h/2`; the difference indicates how far from the limit `h` is.
    pub angle_half: f64,
}

pub fn alexandrov_angle(space: &Space, x: &Point, y: &Point, z: &Point, h: f64) -> Result<AngleReport> {
    space.validate(x)?;
    space.validate(y)?;
    space.validate(z)?;
    let dy = space.dist(x, y);
    let dz = space.dist(x, z);
    if dy == 0.0 || dz == 0.0 {
        return Err(Error::invalid("angle undefined at coincident points"));
    }
    if !(h > 0.0) || h > dy.min(dz) * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "angle scale h = {h} must lie in (0, {}]",
            dy.min(dz)
        )));
    }
    let at = |h: f64| {
        let a = space.step_toward(x, y, h);
        let b = space.step_toward(x, z, h);
        comparison_angle(h, h, space.dist(&a, &b))
    };
    Ok(AngleReport {
        h,
        angle: at(h),
        angle_half: at(0.5 * h),
    })
}

/// Default angle scale: `10⁻⁴` of the shorter side.
pub fn default_angle_scale(space: &Space, x: &Point, y: &Point, z: &Point) -> f64 {
    1e-4 * space.dist(x, y).min(space.dist(x, z))
}

/// Euclidean angle opposite side `c` in a triangle with sides `a`, `b`, `c`.
pub fn comparison_angle(a: f64, b: f64, c: f64) -> f64 {
    let cos = (a * a + b * b - c * c) / (2.0 * a * b);
    cos.clamp(-1.0, 1.0).acos()
}

/// RHS − LHS of the CAT(0) inequality for `p` against `seg` at `t`.
pub fn cat0_slack(space: &Space, p: &Point, seg: &GeodesicSegment, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("parameter {t} outside [0, 1]")));
    }
    space.validate(p)?;
    space.validate(&seg.start)?;
    space.validate(&seg.end)?;
    Ok(cat0_slack_unchecked(space, p, &seg.start, &seg.end, t))
}

pub(crate) fn cat0_slack_unchecked(space: &Space, p: &Point, x: &Point, y: &Point, t: f64) -> f64 {
    let g = space.geodesic(x, y, t);
    let dx = space.dist(p, x);
    let dy = space.dist(p, y);
    let dxy = space.dist(x, y);
    (1.0 - t) * dx * dx + t * dy * dy - t * (1.0 - t) * dxy * dxy - space.dist(p, &g).powi(2)
}

pub fn apply_isometry(space: &Space, iso: &Isometry, x: &Point) -> Result<Point> {
    iso.validate_for(space)?;
    space.validate(x)?;
    Ok(iso.apply(space, x))
}
