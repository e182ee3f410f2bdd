//! Windowed weak-convergence diagnostics: asymptotic centers, projection
//! scores along probe geodesics, Opial slacks and cluster search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{omega_tail, SequenceWindow};
use crate::geometry::{segment_projection as project, Matrix, Point, Space, Tangent, TreePoint};

const BC_ITERATIONS: usize = 100_000;
const GROWTH_PROBES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterResult {
    pub center: Point,
    /// `ω̂` at the center: the squared radius of the tail.
    pub omega_value: f64,
    /// `min_z ω̂(z) − ω̂(center) − d(center, z)²` over probes.
    pub growth_gap: f64,
    /// Distance to the center of the second half of the window.
    pub window_sensitivity: f64,
    pub iterations: usize,
}

/// Default certificate tolerance for an exactly computed center.
pub fn default_center_tol(space: &Space, window: &SequenceWindow) -> f64 {
    let r2 = omega_tail(space, window, &window.points[0]);
    1e-8 * (1.0 + r2)
}

/// Minimizer of `ω̂(x) = max d(x, xₙ)²` over the window.
///
/// Exact on flat backends (smallest enclosing ball) and trees (midpoint of
/// a diameter pair); elsewhere by the Bădoiu–Clarkson iteration, stepping
/// toward the farthest point with step `1/(k+1)`.
pub fn asymptotic_center(space: &Space, window: &SequenceWindow, tol: f64) -> Result<CenterResult> {
    window.validate(space)?;
    let (center, iterations) = minimax_center(space, &window.points);
    let omega_value = omega_tail(space, window, &center);
    let growth_gap = center_growth_gap(space, window, &center, omega_value);
    let half = window.second_half();
    let window_sensitivity = if half.points.len() == window.points.len() {
        0.0
    } else {
        space.dist(&center, &minimax_center(space, &half.points).0)
    };
    if growth_gap < -tol {
        return Err(Error::solver(
            "asymptotic center failed its quadratic-growth certificate",
            Some(center),
            growth_gap,
        ));
    }
    Ok(CenterResult {
        center,
        omega_value,
        growth_gap,
        window_sensitivity,
        iterations,
    })
}

fn minimax_center(space: &Space, points: &[Point]) -> (Point, usize) {
    match space {
        Space::Euclidean { .. } => {
            let pts: Vec<Vec<f64>> = points.iter().map(|p| p.as_vector().unwrap().to_vec()).collect();
            (Point::Vector(enclosing_ball(&pts).0), 1)
        }
        Space::PdNorm { metric } => {
            let root = metric.sym_apply(f64::sqrt);
            let inv_root = metric.sym_apply(|v| 1.0 / v.sqrt());
            let pts: Vec<Vec<f64>> = points.iter().map(|p| root.mul_vec(p.as_vector().unwrap())).collect();
            (Point::Vector(inv_root.mul_vec(&enclosing_ball(&pts).0)), 1)
        }
        Space::Tree(_) => {
            let far = |from: &Point| {
                points
                    .iter()
                    .max_by(|a, b| space.dist(from, a).total_cmp(&space.dist(from, b)))
                    .unwrap()
                    .clone()
            };
            let a = far(&points[0]);
            let b = far(&a);
            (space.geodesic(&a, &b, 0.5), 2)
        }
        _ => badoiu_clarkson(space, points),
    }
}

fn badoiu_clarkson(space: &Space, points: &[Point]) -> (Point, usize) {
    let mut c = points[0].clone();
    let farthest = |c: &Point| {
        points
            .iter()
            .max_by(|a, b| space.dist(c, a).total_cmp(&space.dist(c, b)))
            .unwrap()
    };
    let mut best = (omega(space, points, &c), c.clone());
    for k in 1..=BC_ITERATIONS {
        let far = farthest(&c);
        c = space.normalize(space.geodesic(&c, far, 1.0 / (k as f64 + 1.0)));
        let w = omega(space, points, &c);
        if w < best.0 {
            best = (w, c.clone());
        }
    }
    (best.1, BC_ITERATIONS)
}

fn omega(space: &Space, points: &[Point], x: &Point) -> f64 {
    points.iter().map(|p| space.dist(x, p).powi(2)).fold(0.0, f64::max)
}

fn center_growth_gap(space: &Space, window: &SequenceWindow, m: &Point, wm: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc3a7);
    let n = window.points.len();
    let stride = (n / (GROWTH_PROBES / 2)).max(1);
    let mut probes: Vec<Point> = window
        .points
        .iter()
        .step_by(stride)
        .take(GROWTH_PROBES / 2)
        .map(|p| space.geodesic(m, p, 0.5))
        .collect();
    let r = 0.5 * wm.sqrt().max(1e-3);
    while probes.len() < GROWTH_PROBES {
        probes.push(space.sample_near(&mut rng, m, r));
    }
    probes
        .iter()
        .map(|z| omega_tail(space, window, z) - wm - space.dist(m, z).powi(2))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest enclosing Euclidean ball (Welzl's algorithm, iterative over the
/// points so that recursion depth is bounded by the dimension).
pub fn enclosing_ball(points: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut pts: Vec<&Vec<f64>> = points.iter().collect();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0xba11));
    let dim = points[0].len();
    let mut boundary = Vec::new();
    welzl(&pts, pts.len(), &mut boundary, dim)
}

fn inside(ball: &(Vec<f64>, f64), p: &[f64]) -> bool {
    let d = ball.0.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    d <= ball.1 * (1.0 + 1e-12) + 1e-15
}

fn welzl(pts: &[&Vec<f64>], n: usize, boundary: &mut Vec<Vec<f64>>, dim: usize) -> (Vec<f64>, f64) {
    let mut ball = circumball(boundary, dim);
    if boundary.len() == dim + 1 {
        return ball;
    }
    for i in 0..n {
        if ball.1 < 0.0 || !inside(&ball, pts[i]) {
            boundary.push(pts[i].clone());
            ball = welzl(pts, i, boundary, dim);
            boundary.pop();
        }
    }
    ball
}

/// Smallest ball with every given point on its boundary; radius −1 when empty.
fn circumball(boundary: &[Vec<f64>], dim: usize) -> (Vec<f64>, f64) {
    match boundary.len() {
        0 => (vec![0.0; dim], -1.0),
        1 => (boundary[0].clone(), 0.0),
        k => {
            let p0 = &boundary[0];
            let diffs: Vec<Vec<f64>> = boundary[1..]
                .iter()
                .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
                .collect();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let mut g = Matrix::zeros(k - 1, k - 1);
            let mut rhs = vec![0.0; k - 1];
            for i in 0..k - 1 {
                for j in 0..k - 1 {
                    g[(i, j)] = dot(&diffs[i], &diffs[j]);
                }
                rhs[i] = 0.5 * dot(&diffs[i], &diffs[i]);
            }
            let coeffs = match g.cholesky_solve(&rhs) {
                Ok(c) => c,
                // Affinely dependent boundary: fall back to the widest pair.
                Err(_) => return widest_pair_ball(boundary),
            };
            let mut c = p0.clone();
            for (lam, d) in coeffs.iter().zip(&diffs) {
                for (ci, di) in c.iter_mut().zip(d) {
                    *ci += lam * di;
                }
            }
            let r = boundary
                .iter()
                .map(|p| dot(&sub(p, &c), &sub(p, &c)).sqrt())
                .fold(0.0, f64::max);
            (c, r)
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn widest_pair_ball(points: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut best = (0, 0, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = sub(&points[i], &points[j]).iter().map(|v| v * v).sum::<f64>().sqrt();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let c = points[best.0].iter().zip(&points[best.1]).map(|(a, b)| 0.5 * (a + b)).collect();
    (c, 0.5 * best.2)
}

/// Default probe points for weak-limit scores at `x`.
///
/// Trees: the midpoint of each branch leaving `x` (first 8 by edge id).
/// Riemannian backends: 8 seeded random unit-speed directions.
pub fn default_probes(space: &Space, x: &Point) -> Vec<Point> {
    match (space, x) {
        (Space::Tree(tree), Point::Tree(p)) => match tree.canonical(*p) {
            TreePoint::Node(n) => {
                let mut inc: Vec<(usize, usize)> = tree.incident(n).to_vec();
                inc.sort_by_key(|&(_, e)| e);
                inc.iter()
                    .take(8)
                    .map(|&(other, _)| space.geodesic(x, &Point::node(other), 0.5))
                    .collect()
            }
            TreePoint::Edge { edge, .. } => {
                let e = tree.edge(edge);
                vec![
                    space.geodesic(x, &Point::node(e.u), 0.5),
                    space.geodesic(x, &Point::node(e.v), 0.5),
                ]
            }
        },
        _ if space.is_riemannian() => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x9b0be);
            let mut out = Vec::new();
            while out.len() < 8 {
                let target = space.sample_point(&mut rng, 2.0);
                let v: Tangent = space.log_map(x, &target);
                let n = space.tangent_norm(x, &v);
                if n > 1e-9 {
                    out.push(space.exp_map(x, &v.scale(1.0 / n)));
                }
            }
            out
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x9b0be);
            (0..8).map(|_| space.sample_point(&mut rng, 2.0)).collect()
        }
    }
}

/// `max_y max_n d(x, P_{[x,y]} xₙ)` over probes `y`.
pub fn weak_limit_score(space: &Space, window: &SequenceWindow, x: &Point, probes: &[Point]) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::invalid("weak limit score needs at least one probe"));
    }
    window.validate(space)?;
    space.validate(x)?;
    let mut score = 0.0_f64;
    for y in probes {
        space.validate(y)?;
        let len = space.dist(x, y);
        if len == 0.0 {
            return Err(Error::invalid("probe coincides with the candidate limit"));
        }
        for p in &window.points {
            let (t, _) = project(space, p, x, y);
            score = score.max(t * len);
        }
    }
    Ok(score)
}

/// `min_n d(xₙ, z) − min_n d(xₙ, x)`, the tail surrogate of the Opial gap.
pub fn opial_slack(space: &Space, window: &SequenceWindow, x: &Point, z: &Point) -> f64 {
    let tail_min = |q: &Point| {
        window
            .points
            .iter()
            .map(|p| space.dist(p, q))
            .fold(f64::INFINITY, f64::min)
    };
    tail_min(z) - tail_min(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongCheck {
    pub weak_score: f64,
    /// `max_n |d(xₙ, y) − d(x, y)|`.
    pub dist_gap: f64,
    /// `max_n d(xₙ, x)`.
    pub strong_gap: f64,
}

pub fn strong_from_weak_check(
    space: &Space,
    window: &SequenceWindow,
    x: &Point,
    y: &Point,
    probes: &[Point],
) -> Result<StrongCheck> {
    let weak_score = weak_limit_score(space, window, x, probes)?;
    space.validate(y)?;
    let dxy = space.dist(x, y);
    let dist_gap = window
        .points
        .iter()
        .map(|p| (space.dist(p, y) - dxy).abs())
        .fold(0.0, f64::max);
    let strong_gap = window.points.iter().map(|p| space.dist(p, x)).fold(0.0, f64::max);
    Ok(StrongCheck {
        weak_score,
        dist_gap,
        strong_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: Point,
    /// Phases of the thinned subsequences whose centers fell here.
    pub members: Vec<usize>,
}

/// Candidate weak cluster points: asymptotic centers of the `k` thinned
/// subsequences `x_{N+j}, x_{N+j+k}, …`, merged when within `radius`.
pub fn weak_cluster_search(space: &Space, window: &SequenceWindow, k: usize, radius: f64) -> Result<Vec<Cluster>> {
    if k == 0 {
        return Err(Error::invalid("need at least one subsequence"));
    }
    window.validate(space)?;
    let mut clusters: Vec<Cluster> = Vec::new();
    for phase in 0..k {
        let Some(sub) = window.thinned(k, phase) else { continue };
        let (c, _) = minimax_center(space, &sub.points);
        match clusters.iter_mut().find(|cl| space.dist(&cl.center, &c) <= radius) {
            Some(cl) => cl.members.push(phase),
            None => clusters.push(Cluster {
                center: c,
                members: vec![phase],
            }),
        }
    }
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricTree;

    fn star(legs: usize) -> Space {
        Space::tree(MetricTree::star(legs, 1.0).unwrap())
    }

    #[test]
    fn alternating_line_center() {
        let s = Space::Euclidean { dim: 1 };
        let w = SequenceWindow::new((0..20).map(|i| Point::scalar((i % 2) as f64)).collect(), 0).unwrap();
        let c = asymptotic_center(&s, &w, 1e-12).unwrap();
        assert_eq!(c.center, Point::scalar(0.5));
        assert_eq!(c.omega_value, 0.25);
        assert!(c.growth_gap >= -1e-12);
        assert_eq!(c.window_sensitivity, 0.0);
    }

    #[test]
    fn constant_and_star_centers() {
        let s = Space::Euclidean { dim: 3 };
        let a = Point::vector([1.0, -2.0, 0.5]);
        let w = SequenceWindow::new(vec![a.clone(); 5], 3).unwrap();
        let c = asymptotic_center(&s, &w, 1e-12).unwrap();
        assert!(s.dist(&c.center, &a) < 1e-15 && c.omega_value < 1e-28);

        let t = star(10);
        let w = SequenceWindow::new((1..=10).map(Point::node).collect(), 0).unwrap();
        let c = asymptotic_center(&t, &w, 1e-12).unwrap();
        assert_eq!(c.center, Point::node(0));
        assert_eq!(c.omega_value, 1.0);
    }

    #[test]
    fn enclosing_ball_of_triangle() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0], vec![1.0, 0.5]];
        let (c, r) = enclosing_ball(&pts);
        // circumcenter of the acute triangle
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!((c[1] - 4.0 / 3.0).abs() < 1e-12);
        assert!((r - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_center_is_certified_loosely() {
        let s = Space::Hyperboloid { dim: 2 };
        let pts: Vec<Point> = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
            .iter()
            .map(|p| Space::hyperboloid_point(p))
            .collect();
        let w = SequenceWindow::new(pts, 0).unwrap();
        let c = asymptotic_center(&s, &w, 1e-2).unwrap();
        assert!(s.dist(&c.center, &s.origin()) < 1e-2);
    }

    #[test]
    fn star_tips_converge_weakly_not_strongly() {
        let t = star(30);
        let tail: Vec<Point> = (11..=30).map(Point::node).collect();
        let w = SequenceWindow::new(tail, 10).unwrap();
        let x = Point::node(0);
        let probes = default_probes(&t, &x);
        assert_eq!(probes.len(), 8);
        assert!(weak_limit_score(&t, &w, &x, &probes).unwrap() <= 1e-12);
        let chk = strong_from_weak_check(&t, &w, &x, &x, &probes).unwrap();
        assert_eq!(chk.dist_gap, 1.0);
        assert_eq!(chk.strong_gap, 1.0);
        let z = Point::on_edge(0, 0.3);
        assert!((opial_slack(&t, &w, &x, &z) - 0.3).abs() < 1e-12);
        assert_eq!(opial_slack(&t, &w, &x, &x), 0.0);
    }

    #[test]
    fn alternating_plane_sequence_is_not_weakly_convergent() {
        let s = Space::Euclidean { dim: 2 };
        let w = SequenceWindow::new(
            (0..10).map(|n| Point::vector([if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0])).collect(),
            0,
        )
        .unwrap();
        let score = weak_limit_score(&s, &w, &Point::vector([0.0, 0.0]), &[Point::vector([1.0, 0.0])]).unwrap();
        assert_eq!(score, 1.0);
        assert!(weak_limit_score(&s, &w, &Point::vector([0.0, 0.0]), &[]).is_err());
    }

    #[test]
    fn cluster_search_separates_alternating_subsequences() {
        let s = Space::Euclidean { dim: 1 };
        let w = SequenceWindow::new(
            (1..=40)
                .map(|n| Point::scalar(if n % 2 == 0 { 1.0 + 1.0 / n as f64 } else { -1.0 - 1.0 / n as f64 }))
                .collect(),
            1,
        )
        .unwrap();
        let clusters = weak_cluster_search(&s, &w, 2, 0.2).unwrap();
        assert_eq!(clusters.len(), 2);
    }
}
