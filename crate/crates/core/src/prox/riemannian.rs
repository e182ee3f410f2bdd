//! Majorize–minimize resolvent for sums of distance terms on Riemannian
//! backends.
//!
//! Each `w·d(·, a)` is majorized at `y` by `(w / 2dᵢ)·d(·, a)²` and the
//! quadratic model is stepped to its tangent-space minimizer, which in flat
//! space is Weiszfeld's iteration. The prox term makes the objective
//! `1/λ`-strongly convex, so `d(y, J) ≤ λ·|grad|` certifies every iterate.

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::geometry::{Point, Ray, Space, Tangent};

const MAX_ITERATIONS: usize = 100_000;
const PIN_RADIUS: f64 = 1e-12;

pub(super) fn applies(space: &Space, atoms: &[(Functional, f64)]) -> bool {
    space.is_riemannian()
        && atoms.iter().all(|(a, _)| match a {
            Functional::Distance { .. } | Functional::SquaredDistance { .. } => true,
            Functional::Busemann(_) => matches!(space, Space::Euclidean { .. } | Space::PdNorm { .. }),
            _ => false,
        })
}

struct Model<'a> {
    space: &'a Space,
    dists: Vec<(Point, f64)>,
    squares: Vec<(Point, f64)>,
    /// Constant gradient of the linear (flat Busemann) part, with its base.
    linear: Vec<(Point, Vec<f64>)>,
    curvature: f64,
}

impl Model<'_> {
    fn value(&self, y: &Point) -> f64 {
        let s = self.space;
        let mut v: f64 = self.dists.iter().map(|(a, w)| w * s.dist(y, a)).sum();
        v += self.squares.iter().map(|(a, w)| 0.5 * w * s.dist(y, a).powi(2)).sum::<f64>();
        for (base, g) in &self.linear {
            v += s.inner(base, &s.log_map(base, y), &Tangent::Vector(g.clone()));
        }
        v
    }

    /// Gradient of all terms except distance terms vanishing at `y`,
    /// plus the Weiszfeld weight and the total weight of those skipped.
    fn gradient(&self, y: &Point) -> (Tangent, f64, f64) {
        let s = self.space;
        let mut g = s.log_map(y, y);
        let mut weight = self.curvature;
        let mut pinned = 0.0;
        for (a, w) in &self.dists {
            let d = s.dist(y, a);
            // Within roundoff of the anchor the Weiszfeld weight is garbage.
            if d <= PIN_RADIUS {
                pinned += w;
                continue;
            }
            g.axpy(-w / d, &s.log_map(y, a));
            weight += w / d;
        }
        for (a, w) in &self.squares {
            g.axpy(-w, &s.log_map(y, a));
        }
        for (_, lin) in &self.linear {
            g = g.add(&Tangent::Vector(lin.clone()));
        }
        (g, weight, pinned)
    }

    /// Upper bound on `d(y, J)` from the minimal subgradient norm.
    fn certificate(&self, y: &Point) -> f64 {
        let (g, _, pinned) = self.gradient(y);
        (self.space.tangent_norm(y, &g) - pinned).max(0.0) / self.curvature
    }
}

pub(super) fn resolvent(
    space: &Space,
    atoms: &[(Functional, f64)],
    x: &Point,
    lambda: f64,
    tol: f64,
) -> Result<(Point, usize)> {
    let mut model = Model {
        space,
        dists: Vec::new(),
        squares: vec![(x.clone(), 1.0 / lambda)],
        linear: Vec::new(),
        curvature: 0.0,
    };
    for (atom, c) in atoms {
        match atom {
            Functional::Distance { anchor, weight } => model.dists.push((anchor.clone(), *weight)),
            Functional::SquaredDistance { anchor, weight } => model.squares.push((anchor.clone(), *weight)),
            Functional::Busemann(ray) => {
                if let Ray::Directed { base, direction } = ray.normalized(space)? {
                    model.linear.push((base, direction.iter().map(|u| -c * u).collect()));
                }
            }
            _ => unreachable!("checked by applies"),
        }
    }
    model.curvature = model.squares.iter().map(|(_, w)| w).sum();

    // A kink can be the minimizer; Weiszfeld only reaches it in the limit.
    for (a, _) in &model.dists {
        if model.certificate(a) == 0.0 {
            return Ok((a.clone(), 0));
        }
    }

    let mut y = x.clone();
    let mut value = model.value(&y);
    for it in 1..=MAX_ITERATIONS {
        if model.certificate(&y) <= tol {
            return Ok((y, it));
        }
        let (g, weight, pinned) = model.gradient(&y);
        let gnorm = space.tangent_norm(&y, &g);
        // At a kink, shrink the step by the pinned weight (Vardi–Zhang).
        let shrink = if pinned > 0.0 { (1.0 - pinned / gnorm).max(0.0) } else { 1.0 };
        let mut step = g.scale(-shrink / weight);
        let mut next = space.normalize(space.exp_map(&y, &step));
        let mut next_value = model.value(&next);
        // Near the minimizer value decreases fall below roundoff; the
        // certificate still resolves progress there.
        let gap = model.certificate(&y);
        let improves = |p: &Point, v: f64| v <= value || model.certificate(p) < gap;
        let mut halvings = 0;
        while !improves(&next, next_value) && halvings < 60 {
            step = step.scale(0.5);
            next = space.normalize(space.exp_map(&y, &step));
            next_value = model.value(&next);
            halvings += 1;
        }
        if !improves(&next, next_value) {
            break;
        }
        y = next;
        value = next_value;
    }
    let gap = model.certificate(&y);
    if gap <= tol {
        return Ok((y, MAX_ITERATIONS));
    }
    Err(Error::solver(
        "majorize–minimize resolvent did not certify the tolerance",
        Some(y),
        gap,
    ))
}
