//! Hadamard space backends and their point representations.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use super::tree::{Edge, MetricTree, TreePoint};
use crate::error::{Error, Result};

/// Allowed drift of the Lorentz constraint `x∘x = 1` on input points.
pub const HYPERBOLOID_DRIFT_TOL: f64 = 1e-10;
/// Allowed asymmetry of SPD inputs before symmetrization.
pub const SPD_SYMMETRY_TOL: f64 = 1e-12;

/// A concrete Hadamard space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceSpec", into = "SpaceSpec")]
pub enum Space {
    Euclidean { dim: usize },
    /// `ℝᵈ` with the inner product `⟨u, v⟩ = uᵀ M v` for a positive-definite `M`.
    PdNorm { metric: Matrix },
    /// Hyperboloid model of `ℍᵈ`, points in `ℝᵈ⁺¹` with `x∘x = 1`, `x₀ > 0`.
    Hyperboloid { dim: usize },
    Tree(Arc<MetricTree>),
    /// Positive-definite `n × n` matrices with the affine-invariant metric.
    Spd { n: usize },
    /// ℓ² product: `d² = Σ dᵢ²`.
    Product(Vec<Space>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointSpec", into = "PointSpec")]
pub enum Point {
    Vector(Vec<f64>),
    Tree(TreePoint),
    Matrix(Matrix),
    Product(Vec<Point>),
}

/// Tangent vectors of the Riemannian backends.
#[derive(Debug, Clone, PartialEq)]
pub enum Tangent {
    Vector(Vec<f64>),
    Matrix(Matrix),
    Product(Vec<Tangent>),
}

/// The geodesic segment `[x, y]`, parameterized over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSegment {
    pub start: Point,
    pub end: Point,
}

impl GeodesicSegment {
    pub fn new(start: Point, end: Point) -> Self {
        GeodesicSegment { start, end }
    }

    pub fn at(&self, space: &Space, t: f64) -> Point {
        space.geodesic(&self.start, &self.end, t)
    }

    pub fn length(&self, space: &Space) -> f64 {
        space.dist(&self.start, &self.end)
    }
}

impl Point {
    pub fn scalar(x: f64) -> Point {
        Point::Vector(vec![x])
    }

    pub fn vector(v: impl Into<Vec<f64>>) -> Point {
        Point::Vector(v.into())
    }

    pub fn node(n: usize) -> Point {
        Point::Tree(TreePoint::Node(n))
    }

    pub fn on_edge(edge: usize, offset: f64) -> Point {
        Point::Tree(TreePoint::Edge { edge, offset })
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Point::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_tree(&self) -> Option<TreePoint> {
        match self {
            Point::Tree(p) => Some(*p),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&Matrix> {
        match self {
            Point::Matrix(m) => Some(m),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Point::Vector(_) => "vector",
            Point::Tree(_) => "tree",
            Point::Matrix(_) => "matrix",
            Point::Product(_) => "product",
        }
    }
}

fn lorentz(x: &[f64], y: &[f64]) -> f64 {
    x[0] * y[0] - x[1..].iter().zip(&y[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// `−(x−y)∘(x−y) = 4 sinh²(d/2)`, computed without forming `x∘y`.
fn minkowski_gap_sq(x: &[f64], y: &[f64]) -> f64 {
    let spatial: f64 = x[1..].iter().zip(&y[1..]).map(|(a, b)| (a - b) * (a - b)).sum();
    let time = (x[0] - y[0]) * (x[0] - y[0]);
    (spatial - time).max(0.0)
}

fn lift_to_sheet(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v[1..].iter().map(|a| a * a).sum();
    v[0] = (1.0 + s).sqrt();
    v
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn lerp(x: &[f64], y: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect()
}

/// Cached square roots of an SPD base point.
struct SpdFrame {
    sqrt: Matrix,
    inv_sqrt: Matrix,
}

impl SpdFrame {
    fn new(a: &Matrix) -> Self {
        let e = a.sym_eigen();
        SpdFrame {
            sqrt: e.reconstruct(f64::sqrt),
            inv_sqrt: e.reconstruct(|v| 1.0 / v.sqrt()),
        }
    }

    /// `A^{-1/2} B A^{-1/2}`.
    fn whiten(&self, b: &Matrix) -> Matrix {
        b.congruence(&self.inv_sqrt)
    }

    fn color(&self, m: &Matrix) -> Matrix {
        m.congruence(&self.sqrt)
    }
}

impl Space {
    pub fn tree(tree: MetricTree) -> Space {
        Space::Tree(Arc::new(tree))
    }

    pub fn pd_norm(metric: Matrix) -> Result<Space> {
        if !metric.is_square() || metric.max_asymmetry() > 1e-12 {
            return Err(Error::invalid("pd_norm metric must be a symmetric square matrix"));
        }
        if metric.sym_eigen().min() <= 0.0 {
            return Err(Error::domain("pd_norm metric is not positive definite"));
        }
        Ok(Space::PdNorm { metric })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Space::Euclidean { .. } => "euclidean",
            Space::PdNorm { .. } => "pd_norm",
            Space::Hyperboloid { .. } => "hyperboloid",
            Space::Tree(_) => "tree",
            Space::Spd { .. } => "spd",
            Space::Product(_) => "product",
        }
    }

    pub fn as_tree(&self) -> Option<&MetricTree> {
        match self {
            Space::Tree(t) => Some(t),
            _ => None,
        }
    }

    /// True when every factor carries exponential and logarithm maps.
    pub fn is_riemannian(&self) -> bool {
        match self {
            Space::Tree(_) => false,
            Space::Product(fs) => fs.iter().all(Space::is_riemannian),
            _ => true,
        }
    }

    /// Whether the space is a flat vector space with the standard inner product.
    pub fn is_flat_euclidean(&self) -> bool {
        matches!(self, Space::Euclidean { .. })
    }

    /// Checks that `p` is a valid point of this space.
    pub fn validate(&self, p: &Point) -> Result<()> {
        match (self, p) {
            (Space::Euclidean { dim }, Point::Vector(v)) => check_vec(v, *dim),
            (Space::PdNorm { metric }, Point::Vector(v)) => check_vec(v, metric.rows()),
            (Space::Hyperboloid { dim }, Point::Vector(v)) => {
                check_vec(v, dim + 1)?;
                if v[0] <= 0.0 {
                    return Err(Error::domain("hyperboloid point must have x0 > 0"));
                }
                let drift = (lorentz(v, v) - 1.0).abs();
                if drift > HYPERBOLOID_DRIFT_TOL * v[0] * v[0] {
                    return Err(Error::domain(format!(
                        "hyperboloid point violates x∘x = 1 by {drift:e}"
                    )));
                }
                Ok(())
            }
            (Space::Tree(t), Point::Tree(q)) => t.validate(q),
            (Space::Spd { n }, Point::Matrix(m)) => {
                if m.rows() != *n || m.cols() != *n {
                    return Err(Error::invalid(format!("expected a {n}x{n} matrix")));
                }
                if m.as_slice().iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("non-finite matrix entry"));
                }
                let scale = m.frobenius().max(1.0);
                if m.max_asymmetry() > SPD_SYMMETRY_TOL * scale {
                    return Err(Error::invalid("SPD point is not symmetric"));
                }
                let e = m.sym_eigen();
                if e.min() <= 0.0 {
                    return Err(Error::domain(format!(
                        "matrix is not positive definite (eigenvalues {:?})",
                        e.values
                    )));
                }
                Ok(())
            }
            (Space::Product(fs), Point::Product(ps)) => {
                if fs.len() != ps.len() {
                    return Err(Error::invalid(format!(
                        "product point has {} parts, space has {} factors",
                        ps.len(),
                        fs.len()
                    )));
                }
                fs.iter().zip(ps).try_for_each(|(f, p)| f.validate(p))
            }
            (s, p) => Err(Error::invalid(format!(
                "{} point does not belong to a {} space",
                p.kind(),
                s.name()
            ))),
        }
    }

    /// Repairs rounding drift: symmetrizes SPD points, reprojects onto the
    /// hyperboloid sheet, canonicalizes tree points.
    pub fn normalize(&self, p: Point) -> Point {
        match (self, p) {
            (Space::Hyperboloid { .. }, Point::Vector(v)) => Point::Vector(lift_to_sheet(v)),
            (Space::Spd { .. }, Point::Matrix(m)) => Point::Matrix(m.symmetrized()),
            (Space::Tree(t), Point::Tree(q)) => Point::Tree(t.canonical(q)),
            (Space::Product(fs), Point::Product(ps)) => {
                Point::Product(fs.iter().zip(ps).map(|(f, p)| f.normalize(p)).collect())
            }
            (_, p) => p,
        }
    }

    /// Validated distance.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.validate(x)?;
        self.validate(y)?;
        Ok(self.dist(x, y))
    }

    /// Distance between points already known to belong to this space.
    ///
    /// Panics if the point representations do not match the space.
    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        match (self, x, y) {
            (Space::Euclidean { .. }, Point::Vector(a), Point::Vector(b)) => norm2(&sub(a, b)),
            (Space::PdNorm { metric }, Point::Vector(a), Point::Vector(b)) => {
                let d = sub(a, b);
                let md = metric.mul_vec(&d);
                d.iter().zip(&md).map(|(u, v)| u * v).sum::<f64>().max(0.0).sqrt()
            }
            (Space::Hyperboloid { .. }, Point::Vector(a), Point::Vector(b)) => {
                2.0 * (0.5 * minkowski_gap_sq(a, b).sqrt()).asinh()
            }
            (Space::Tree(t), Point::Tree(p), Point::Tree(q)) => t.distance(*p, *q),
            (Space::Spd { .. }, Point::Matrix(a), Point::Matrix(b)) => {
                let frame = SpdFrame::new(a);
                let m = frame.whiten(b);
                m.sym_eigen()
                    .values
                    .iter()
                    .map(|v| v.ln().powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
            (Space::Product(fs), Point::Product(ps), Point::Product(qs)) => fs
                .iter()
                .zip(ps.iter().zip(qs))
                .map(|(f, (p, q))| f.dist(p, q).powi(2))
                .sum::<f64>()
                .sqrt(),
            _ => panic!("point representation does not match {} space", self.name()),
        }
    }

    /// Validated geodesic point `(1−t)x + ty`.
    pub fn geodesic_point(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("geodesic parameter {t} outside [0, 1]")));
        }
        self.validate(x)?;
        self.validate(y)?;
        Ok(self.geodesic(x, y, t))
    }

    /// The point at fraction `t` of the way from `x` to `y`.
    pub fn geodesic(&self, x: &Point, y: &Point, t: f64) -> Point {
        if t <= 0.0 {
            return x.clone();
        }
        if t >= 1.0 {
            return y.clone();
        }
        match (self, x, y) {
            (Space::Euclidean { .. } | Space::PdNorm { .. }, Point::Vector(a), Point::Vector(b)) => {
                Point::Vector(lerp(a, b, t))
            }
            (Space::Hyperboloid { .. }, Point::Vector(a), Point::Vector(b)) => {
                let d = self.dist(x, y);
                if d < 1e-8 {
                    return Point::Vector(lift_to_sheet(lerp(a, b, t)));
                }
                let sd = d.sinh();
                let wa = ((1.0 - t) * d).sinh() / sd;
                let wb = (t * d).sinh() / sd;
                let v = a.iter().zip(b).map(|(p, q)| wa * p + wb * q).collect();
                Point::Vector(lift_to_sheet(v))
            }
            (Space::Tree(tree), Point::Tree(p), Point::Tree(q)) => {
                let d = tree.distance(*p, *q);
                Point::Tree(tree.walk(*p, *q, t * d))
            }
            (Space::Spd { .. }, Point::Matrix(a), Point::Matrix(b)) => {
                let frame = SpdFrame::new(a);
                let m = frame.whiten(b).sym_apply(|v| v.powf(t));
                Point::Matrix(frame.color(&m))
            }
            (Space::Product(fs), Point::Product(ps), Point::Product(qs)) => Point::Product(
                fs.iter()
                    .zip(ps.iter().zip(qs))
                    .map(|(f, (p, q))| f.geodesic(p, q, t))
                    .collect(),
            ),
            _ => panic!("point representation does not match {} space", self.name()),
        }
    }

    /// Moves from `x` toward `y` by arc length `s`, stopping at `y`.
    pub fn step_toward(&self, x: &Point, y: &Point, s: f64) -> Point {
        let d = self.dist(x, y);
        if d <= 0.0 || s >= d {
            return y.clone();
        }
        if s <= 0.0 {
            return x.clone();
        }
        self.geodesic(x, y, s / d)
    }

    /// Riemannian logarithm `log_x y`. Panics on tree factors.
    pub fn log_map(&self, x: &Point, y: &Point) -> Tangent {
        match (self, x, y) {
            (Space::Euclidean { .. } | Space::PdNorm { .. }, Point::Vector(a), Point::Vector(b)) => {
                Tangent::Vector(sub(b, a))
            }
            (Space::Hyperboloid { .. }, Point::Vector(a), Point::Vector(b)) => {
                let gap = minkowski_gap_sq(a, b);
                let d = self.dist(x, y);
                if d == 0.0 {
                    return Tangent::Vector(vec![0.0; a.len()]);
                }
                let cosh_d = 1.0 + 0.5 * gap;
                let factor = if d < 1e-8 { 1.0 } else { d / d.sinh() };
                let mut v: Vec<f64> = a
                    .iter()
                    .zip(b)
                    .map(|(p, q)| factor * (q - cosh_d * p))
                    .collect();
                let c = lorentz(a, &v);
                for (vi, ai) in v.iter_mut().zip(a) {
                    *vi -= c * ai;
                }
                Tangent::Vector(v)
            }
            (Space::Spd { .. }, Point::Matrix(a), Point::Matrix(b)) => {
                let frame = SpdFrame::new(a);
                let m = frame.whiten(b).sym_apply(f64::ln);
                Tangent::Matrix(frame.color(&m))
            }
            (Space::Product(fs), Point::Product(ps), Point::Product(qs)) => Tangent::Product(
                fs.iter()
                    .zip(ps.iter().zip(qs))
                    .map(|(f, (p, q))| f.log_map(p, q))
                    .collect(),
            ),
            _ => panic!("log map unavailable on {} space", self.name()),
        }
    }

    /// Riemannian exponential `exp_x v`. Panics on tree factors.
    pub fn exp_map(&self, x: &Point, v: &Tangent) -> Point {
        match (self, x, v) {
            (Space::Euclidean { .. } | Space::PdNorm { .. }, Point::Vector(a), Tangent::Vector(u)) => {
                Point::Vector(a.iter().zip(u).map(|(p, q)| p + q).collect())
            }
            (Space::Hyperboloid { .. }, Point::Vector(a), Tangent::Vector(u)) => {
                let n = self.tangent_norm(x, v);
                if n == 0.0 {
                    return x.clone();
                }
                let (c, s) = (n.cosh(), n.sinh() / n);
                let w = a.iter().zip(u).map(|(p, q)| c * p + s * q).collect();
                Point::Vector(lift_to_sheet(w))
            }
            (Space::Spd { .. }, Point::Matrix(a), Tangent::Matrix(u)) => {
                let frame = SpdFrame::new(a);
                let m = frame.whiten(u).sym_apply(f64::exp);
                Point::Matrix(frame.color(&m))
            }
            (Space::Product(fs), Point::Product(ps), Tangent::Product(us)) => Point::Product(
                fs.iter()
                    .zip(ps.iter().zip(us))
                    .map(|(f, (p, u))| f.exp_map(p, u))
                    .collect(),
            ),
            _ => panic!("exp map unavailable on {} space", self.name()),
        }
    }

    /// Riemannian inner product of two tangent vectors at `x`.
    pub fn inner(&self, x: &Point, u: &Tangent, v: &Tangent) -> f64 {
        match (self, x, u, v) {
            (Space::Euclidean { .. }, _, Tangent::Vector(a), Tangent::Vector(b)) => {
                a.iter().zip(b).map(|(p, q)| p * q).sum()
            }
            (Space::PdNorm { metric }, _, Tangent::Vector(a), Tangent::Vector(b)) => {
                let mb = metric.mul_vec(b);
                a.iter().zip(&mb).map(|(p, q)| p * q).sum()
            }
            (Space::Hyperboloid { .. }, _, Tangent::Vector(a), Tangent::Vector(b)) => -lorentz(a, b),
            (Space::Spd { .. }, Point::Matrix(base), Tangent::Matrix(a), Tangent::Matrix(b)) => {
                let frame = SpdFrame::new(base);
                frame.whiten(a).dot(&frame.whiten(b))
            }
            (Space::Product(fs), Point::Product(ps), Tangent::Product(us), Tangent::Product(vs)) => fs
                .iter()
                .zip(ps)
                .zip(us.iter().zip(vs))
                .map(|((f, p), (a, b))| f.inner(p, a, b))
                .sum(),
            _ => panic!("inner product unavailable on {} space", self.name()),
        }
    }

    pub fn tangent_norm(&self, x: &Point, v: &Tangent) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }

    /// A random point. `radius` sets the spread of the draw.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> Point {
        match self {
            Space::Euclidean { dim } => {
                Point::Vector((0..*dim).map(|_| rng.random_range(-radius..=radius)).collect())
            }
            Space::PdNorm { metric } => Point::Vector(
                (0..metric.rows())
                    .map(|_| rng.random_range(-radius..=radius))
                    .collect(),
            ),
            Space::Hyperboloid { dim } => {
                let mut v = vec![0.0];
                v.extend((0..*dim).map(|_| rng.random_range(-radius..=radius)));
                Point::Vector(lift_to_sheet(v))
            }
            Space::Tree(t) => {
                let edge = rng.random_range(0..t.edges().len().max(1));
                if t.edges().is_empty() {
                    return Point::node(0);
                }
                let len = t.edge(edge).length;
                Point::Tree(t.canonical(TreePoint::Edge {
                    edge,
                    offset: rng.random_range(0.0..=len),
                }))
            }
            Space::Spd { n } => {
                let mut s = Matrix::zeros(*n, *n);
                for i in 0..*n {
                    for j in i..*n {
                        let v = rng.random_range(-radius..=radius) * 0.5;
                        s[(i, j)] = v;
                        s[(j, i)] = v;
                    }
                }
                Point::Matrix(s.sym_apply(f64::exp))
            }
            Space::Product(fs) => {
                Point::Product(fs.iter().map(|f| f.sample_point(rng, radius)).collect())
            }
        }
    }

    /// A random point within distance `r` of `p`.
    pub fn sample_near<R: Rng + ?Sized>(&self, rng: &mut R, p: &Point, r: f64) -> Point {
        let target = self.sample_point(rng, 1.0 + r);
        let fraction = rng.random_range(0.0..=1.0);
        self.step_toward(p, &target, r * fraction)
    }

    /// A natural base point (origin, identity, first node).
    pub fn origin(&self) -> Point {
        match self {
            Space::Euclidean { dim } => Point::Vector(vec![0.0; *dim]),
            Space::PdNorm { metric } => Point::Vector(vec![0.0; metric.rows()]),
            Space::Hyperboloid { dim } => {
                let mut v = vec![0.0; dim + 1];
                v[0] = 1.0;
                Point::Vector(v)
            }
            Space::Tree(_) => Point::node(0),
            Space::Spd { n } => Point::Matrix(Matrix::identity(*n)),
            Space::Product(fs) => Point::Product(fs.iter().map(Space::origin).collect()),
        }
    }

    /// Hyperboloid point above the given spatial coordinates.
    pub fn hyperboloid_point(spatial: &[f64]) -> Point {
        let mut v = vec![0.0];
        v.extend_from_slice(spatial);
        Point::Vector(lift_to_sheet(v))
    }

    /// Lorentz form, exposed for invariant checks.
    pub fn lorentz_form(x: &[f64], y: &[f64]) -> f64 {
        lorentz(x, y)
    }
}

fn check_vec(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::invalid(format!(
            "expected {dim} coordinates, got {}",
            v.len()
        )));
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("non-finite coordinate"));
    }
    Ok(())
}

impl Tangent {
    pub fn scale(&self, s: f64) -> Tangent {
        match self {
            Tangent::Vector(v) => Tangent::Vector(v.iter().map(|a| a * s).collect()),
            Tangent::Matrix(m) => Tangent::Matrix(m.scale(s)),
            Tangent::Product(ts) => Tangent::Product(ts.iter().map(|t| t.scale(s)).collect()),
        }
    }

    pub fn add(&self, other: &Tangent) -> Tangent {
        match (self, other) {
            (Tangent::Vector(a), Tangent::Vector(b)) => {
                Tangent::Vector(a.iter().zip(b).map(|(p, q)| p + q).collect())
            }
            (Tangent::Matrix(a), Tangent::Matrix(b)) => Tangent::Matrix(a + b),
            (Tangent::Product(a), Tangent::Product(b)) => {
                Tangent::Product(a.iter().zip(b).map(|(p, q)| p.add(q)).collect())
            }
            _ => panic!("mismatched tangent representations"),
        }
    }

    /// Accumulates `s · other` into `self`.
    pub fn axpy(&mut self, s: f64, other: &Tangent) {
        *self = self.add(&other.scale(s));
    }

    pub fn zero_like(&self) -> Tangent {
        self.scale(0.0)
    }
}

// ---------------------------------------------------------------------------
// JSON forms

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NodesSpec {
    Count(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpaceSpec {
    Euclidean { dim: usize },
    PdNorm { metric: Matrix },
    Hyperboloid { dim: usize },
    Tree {
        nodes: NodesSpec,
        edges: Vec<(usize, usize, f64)>,
    },
    Spd { n: usize },
    Product { factors: Vec<SpaceSpec> },
}

impl TryFrom<SpaceSpec> for Space {
    type Error = Error;

    fn try_from(spec: SpaceSpec) -> Result<Space> {
        Ok(match spec {
            SpaceSpec::Euclidean { dim } => {
                if dim == 0 {
                    return Err(Error::invalid("euclidean dim must be positive"));
                }
                Space::Euclidean { dim }
            }
            SpaceSpec::PdNorm { metric } => Space::pd_norm(metric)?,
            SpaceSpec::Hyperboloid { dim } => {
                if dim == 0 {
                    return Err(Error::invalid("hyperboloid dim must be positive"));
                }
                Space::Hyperboloid { dim }
            }
            SpaceSpec::Tree { nodes, edges } => {
                let labels = match nodes {
                    NodesSpec::Count(n) => (0..n).map(|i| i.to_string()).collect(),
                    NodesSpec::Labels(l) => l,
                };
                let edges = edges
                    .into_iter()
                    .map(|(u, v, length)| Edge { u, v, length })
                    .collect();
                Space::tree(MetricTree::new(labels, edges)?)
            }
            SpaceSpec::Spd { n } => {
                if !(2..=4).contains(&n) {
                    return Err(Error::invalid("spd order must be 2, 3 or 4"));
                }
                Space::Spd { n }
            }
            SpaceSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::invalid("product needs at least one factor"));
                }
                Space::Product(
                    factors
                        .into_iter()
                        .map(Space::try_from)
                        .collect::<Result<_>>()?,
                )
            }
        })
    }
}

impl From<Space> for SpaceSpec {
    fn from(s: Space) -> SpaceSpec {
        match s {
            Space::Euclidean { dim } => SpaceSpec::Euclidean { dim },
            Space::PdNorm { metric } => SpaceSpec::PdNorm { metric },
            Space::Hyperboloid { dim } => SpaceSpec::Hyperboloid { dim },
            Space::Tree(t) => SpaceSpec::Tree {
                nodes: NodesSpec::Labels(t.labels().to_vec()),
                edges: t.edges().iter().map(|e| (e.u, e.v, e.length)).collect(),
            },
            Space::Spd { n } => SpaceSpec::Spd { n },
            Space::Product(fs) => SpaceSpec::Product {
                factors: fs.into_iter().map(SpaceSpec::from).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PointSpec {
    Node {
        node: usize,
    },
    Edge {
        edge: usize,
        offset: f64,
    },
    Parts {
        kind: String,
        parts: Vec<PointSpec>,
    },
    Coords {
        kind: String,
        coords: Vec<f64>,
    },
    Bare(Vec<f64>),
}

impl TryFrom<PointSpec> for Point {
    type Error = Error;

    fn try_from(spec: PointSpec) -> Result<Point> {
        Ok(match spec {
            PointSpec::Node { node } => Point::node(node),
            PointSpec::Edge { edge, offset } => Point::on_edge(edge, offset),
            PointSpec::Bare(v) => Point::Vector(v),
            PointSpec::Parts { kind, parts } => {
                if kind != "product" {
                    return Err(Error::invalid(format!("point kind `{kind}` does not take parts")));
                }
                Point::Product(parts.into_iter().map(Point::try_from).collect::<Result<_>>()?)
            }
            PointSpec::Coords { kind, coords } => match kind.as_str() {
                "vector" | "euclidean" | "pd_norm" | "hyperboloid" => Point::Vector(coords),
                "spd" | "matrix" => {
                    let n = (coords.len() as f64).sqrt().round() as usize;
                    Point::Matrix(Matrix::from_row_major(n, n, coords)?)
                }
                other => return Err(Error::invalid(format!("unknown point kind `{other}`"))),
            },
        })
    }
}

impl From<Point> for PointSpec {
    fn from(p: Point) -> PointSpec {
        match p {
            Point::Vector(coords) => PointSpec::Coords {
                kind: "vector".into(),
                coords,
            },
            Point::Tree(TreePoint::Node(node)) => PointSpec::Node { node },
            Point::Tree(TreePoint::Edge { edge, offset }) => PointSpec::Edge { edge, offset },
            Point::Matrix(m) => PointSpec::Coords {
                kind: "spd".into(),
                coords: m.as_slice().to_vec(),
            },
            Point::Product(ps) => PointSpec::Parts {
                kind: "product".into(),
                parts: ps.into_iter().map(PointSpec::from).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_pythagoras() {
        let s = Space::Euclidean { dim: 2 };
        let d = s.distance(&Point::vector([0.0, 0.0]), &Point::vector([3.0, 4.0])).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn mismatched_tags_are_rejected() {
        let s = Space::Euclidean { dim: 2 };
        assert!(matches!(
            s.distance(&Point::node(0), &Point::vector([0.0, 0.0])),
            Err(Error::InvalidInput(_))
        ));
        let spd = Space::Spd { n: 2 };
        let bad = Point::Matrix(Matrix::diag(&[1.0, -1.0]));
        assert!(matches!(
            spd.distance(&bad, &spd.origin()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn geodesic_parameter_outside_unit_interval() {
        let s = Space::Euclidean { dim: 1 };
        assert!(s.geodesic_point(&Point::scalar(0.0), &Point::scalar(1.0), 1.5).is_err());
    }

    #[test]
    fn hyperboloid_log_exp_roundtrip() {
        let s = Space::Hyperboloid { dim: 2 };
        let x = Space::hyperboloid_point(&[0.3, -0.2]);
        let y = Space::hyperboloid_point(&[-1.0, 0.7]);
        let v = s.log_map(&x, &y);
        assert!((s.tangent_norm(&x, &v) - s.dist(&x, &y)).abs() < 1e-12);
        let back = s.exp_map(&x, &v);
        assert!(s.dist(&back, &y) < 1e-12);
    }

    #[test]
    fn spd_log_exp_roundtrip() {
        let s = Space::Spd { n: 3 };
        let a = Point::Matrix(
            Matrix::from_rows(&[
                vec![2.0, 0.3, 0.1],
                vec![0.3, 1.0, -0.2],
                vec![0.1, -0.2, 0.5],
            ])
            .unwrap(),
        );
        let b = Point::Matrix(Matrix::diag(&[1.0, 3.0, 0.7]));
        let v = s.log_map(&a, &b);
        assert!((s.tangent_norm(&a, &v) - s.dist(&a, &b)).abs() < 1e-12);
        assert!(s.dist(&s.exp_map(&a, &v), &b) < 1e-12);
    }

    #[test]
    fn json_shapes() {
        let s: Space = serde_json::from_str(
            r#"{"kind":"tree","nodes":["c","a","b"],"edges":[[0,1,1.0],[0,2,2.0]]}"#,
        )
        .unwrap();
        assert_eq!(s.as_tree().unwrap().node_count(), 3);
        let p: Point = serde_json::from_str(r#"{"edge":1,"offset":0.5}"#).unwrap();
        assert_eq!(p, Point::on_edge(1, 0.5));
        let q: Point = serde_json::from_str(r#"{"kind":"spd","coords":[4,0,0,1]}"#).unwrap();
        assert_eq!(q, Point::Matrix(Matrix::diag(&[4.0, 1.0])));
        let text = serde_json::to_string(&q).unwrap();
        assert_eq!(serde_json::from_str::<Point>(&text).unwrap(), q);
        assert!(serde_json::from_str::<Space>(r#"{"kind":"spd","n":7}"#).is_err());
    }
}
