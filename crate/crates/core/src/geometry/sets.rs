use serde::{Deserialize, Serialize};

use super::space::{Point, Space};
use super::segment_projection;
use crate::error::{Error, Result};

/// Closed convex subsets with exact metric projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSet {
    Ball { center: Point, radius: f64 },
    Segment { start: Point, end: Point },
    /// Convex hull of finitely many tree points.
    TreeSpan { points: Vec<Point> },
    /// `[lo, hi]` on the real line.
    Interval { lo: f64, hi: f64 },
}

impl ConvexSet {
    pub fn validate(&self, space: &Space) -> Result<()> {
        match self {
            ConvexSet::Ball { center, radius } => {
                if !(*radius >= 0.0) {
                    return Err(Error::invalid(format!("ball radius {radius} is negative")));
                }
                space.validate(center)
            }
            ConvexSet::Segment { start, end } => {
                space.validate(start)?;
                space.validate(end)
            }
            ConvexSet::TreeSpan { points } => {
                if space.as_tree().is_none() {
                    return Err(Error::invalid("tree span requires a tree space"));
                }
                if points.is_empty() {
                    return Err(Error::invalid("tree span has no points"));
                }
                points.iter().try_for_each(|p| space.validate(p))
            }
            ConvexSet::Interval { lo, hi } => {
                if !matches!(space, Space::Euclidean { dim: 1 }) {
                    return Err(Error::invalid("interval requires the real line"));
                }
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(Error::invalid(format!("interval [{lo}, {hi}] is empty")));
                }
                Ok(())
            }
        }
    }

    /// Metric projection; the set must already be validated against `space`.
    pub fn project(&self, space: &Space, p: &Point) -> Point {
        match self {
            ConvexSet::Ball { center, radius } => {
                let d = space.dist(center, p);
                if d <= *radius {
                    p.clone()
                } else {
                    space.step_toward(center, p, *radius)
                }
            }
            ConvexSet::Segment { start, end } => segment_projection(space, p, start, end).1,
            ConvexSet::TreeSpan { points } => {
                // The hull is the union of the paths from the first point to the others.
                let root = &points[0];
                let mut best = (space.dist(p, root), root.clone());
                for other in &points[1..] {
                    let (_, q) = segment_projection(space, p, root, other);
                    let d = space.dist(p, &q);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
                best.1
            }
            ConvexSet::Interval { lo, hi } => {
                let x = p.as_vector().expect("real line point")[0];
                Point::scalar(x.clamp(*lo, *hi))
            }
        }
    }

    pub fn distance_to(&self, space: &Space, p: &Point) -> f64 {
        space.dist(p, &self.project(space, p))
    }

    pub fn contains(&self, space: &Space, p: &Point, tol: f64) -> bool {
        self.distance_to(space, p) <= tol
    }
}
