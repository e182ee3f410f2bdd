//! Convex lower-semicontinuous functionals on Hadamard spaces.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, Isometry, Point, Ray, Space, Tangent};

/// Points within this distance of a set count as members for indicators.
pub const INDICATOR_TOL: f64 = 1e-10;

type EvalFn = dyn Fn(&Space, &Point) -> f64 + Send + Sync;
type ResolventFn = dyn Fn(&Space, &Point, f64) -> Point + Send + Sync;

/// A user-supplied convex functional.
#[derive(Clone)]
pub struct Custom {
    pub name: String,
    eval: Arc<EvalFn>,
    resolvent: Option<Arc<ResolventFn>>,
    /// Lipschitz constant on bounded sets, if known.
    pub lipschitz: Option<f64>,
}

impl Custom {
    pub fn new(name: impl Into<String>, eval: impl Fn(&Space, &Point) -> f64 + Send + Sync + 'static) -> Self {
        Custom {
            name: name.into(),
            eval: Arc::new(eval),
            resolvent: None,
            lipschitz: None,
        }
    }

    pub fn with_resolvent(
        mut self,
        resolvent: impl Fn(&Space, &Point, f64) -> Point + Send + Sync + 'static,
    ) -> Self {
        self.resolvent = Some(Arc::new(resolvent));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn eval(&self, space: &Space, x: &Point) -> f64 {
        (self.eval)(space, x)
    }

    pub fn exact_resolvent(&self, space: &Space, x: &Point, lambda: f64) -> Option<Point> {
        self.resolvent.as_ref().map(|r| r(space, x, lambda))
    }
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom")
            .field("name", &self.name)
            .field("has_resolvent", &self.resolvent.is_some())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Functional {
    /// `(w/2)·d(·, a)²`.
    SquaredDistance { anchor: Point, weight: f64 },
    /// `w·d(·, a)`.
    Distance { anchor: Point, weight: f64 },
    /// `Σ cᵢ fᵢ`. With `normalized`, the Fermat–Weber masses sum to one.
    WeightedSum {
        terms: Vec<(Functional, f64)>,
        normalized: bool,
    },
    Indicator(ConvexSet),
    Busemann(Ray),
    /// `d(·, T·)`.
    Displacement(Isometry),
    Custom(Custom),
}

impl Functional {
    pub fn squared_distance(anchor: Point, weight: f64) -> Functional {
        Functional::SquaredDistance { anchor, weight }
    }

    pub fn distance(anchor: Point, weight: f64) -> Functional {
        Functional::Distance { anchor, weight }
    }

    pub fn sum(terms: Vec<(Functional, f64)>) -> Result<Functional> {
        let f = Functional::WeightedSum {
            terms,
            normalized: false,
        };
        f.check_weights()?;
        Ok(f)
    }

    /// `Σ wₙ d(·, aₙ)^p` with `p ∈ {1, 2}` and `Σ wₙ = 1`.
    pub fn fermat_weber(anchors: Vec<Point>, weights: Vec<f64>, p: u32) -> Result<Functional> {
        if anchors.len() != weights.len() || anchors.is_empty() {
            return Err(Error::invalid("need one positive weight per anchor"));
        }
        let terms = anchors
            .into_iter()
            .zip(weights)
            .map(|(a, w)| power_term(a, w, p).map(|f| (f, 1.0)))
            .collect::<Result<Vec<_>>>()?;
        let f = Functional::WeightedSum {
            terms,
            normalized: true,
        };
        f.check_weights()?;
        Ok(f)
    }

    /// Equal-weight median (`p = 1`) or barycenter (`p = 2`) objective.
    pub fn uniform_fermat_weber(anchors: Vec<Point>, p: u32) -> Result<Functional> {
        let n = anchors.len();
        Self::fermat_weber(anchors, vec![1.0 / n.max(1) as f64; n], p)
    }

    fn check_weights(&self) -> Result<()> {
        match self {
            Functional::SquaredDistance { weight, .. } | Functional::Distance { weight, .. } => {
                if !(*weight > 0.0 && weight.is_finite()) {
                    return Err(Error::invalid(format!("weight {weight} must be positive")));
                }
            }
            Functional::WeightedSum { terms, normalized } => {
                if terms.is_empty() {
                    return Err(Error::invalid("weighted sum has no terms"));
                }
                for (f, c) in terms {
                    if !(*c > 0.0 && c.is_finite()) {
                        return Err(Error::invalid(format!("sum weight {c} must be positive")));
                    }
                    f.check_weights()?;
                }
                if *normalized {
                    let mass: f64 = terms
                        .iter()
                        .map(|(f, c)| f.fermat_weber_mass().map(|m| m * c))
                        .sum::<Option<f64>>()
                        .ok_or_else(|| Error::invalid("normalized sums may only hold distance terms"))?;
                    if (mass - 1.0).abs() > 1e-12 {
                        return Err(Error::invalid(format!("Fermat–Weber weights sum to {mass}, not 1")));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Weight `wₙ` of this term written as `wₙ d^p`.
    fn fermat_weber_mass(&self) -> Option<f64> {
        match self {
            Functional::Distance { weight, .. } => Some(*weight),
            Functional::SquaredDistance { weight, .. } => Some(0.5 * weight),
            _ => None,
        }
    }

    /// Flattens nested sums into `(atom, coefficient)` pairs, folding the
    /// coefficient into distance weights.
    pub fn atoms(&self) -> Vec<(Functional, f64)> {
        let mut out = Vec::new();
        self.collect_atoms(1.0, &mut out);
        out
    }

    fn collect_atoms(&self, scale: f64, out: &mut Vec<(Functional, f64)>) {
        match self {
            Functional::WeightedSum { terms, .. } => {
                for (f, c) in terms {
                    f.collect_atoms(scale * c, out);
                }
            }
            Functional::Distance { anchor, weight } => out.push((
                Functional::Distance {
                    anchor: anchor.clone(),
                    weight: weight * scale,
                },
                1.0,
            )),
            Functional::SquaredDistance { anchor, weight } => out.push((
                Functional::SquaredDistance {
                    anchor: anchor.clone(),
                    weight: weight * scale,
                },
                1.0,
            )),
            other => out.push((other.clone(), scale)),
        }
    }

    /// Checks that the functional is defined on `space`.
    pub fn check(&self, space: &Space) -> Result<()> {
        self.check_weights()?;
        match self {
            Functional::SquaredDistance { anchor, .. } | Functional::Distance { anchor, .. } => {
                space.validate(anchor)
            }
            Functional::WeightedSum { terms, .. } => terms.iter().try_for_each(|(f, _)| f.check(space)),
            Functional::Indicator(set) => set.validate(space),
            Functional::Busemann(ray) => ray.normalized(space).map(|_| ()),
            Functional::Displacement(iso) => iso.validate_for(space),
            Functional::Custom(_) => Ok(()),
        }
    }

    /// Value at a validated point; `+∞` off the domain.
    pub fn eval(&self, space: &Space, x: &Point) -> Result<f64> {
        space.validate(x)?;
        self.check(space)?;
        Ok(self.value(space, x))
    }

    /// Value without input validation.
    pub fn value(&self, space: &Space, x: &Point) -> f64 {
        match self {
            Functional::SquaredDistance { anchor, weight } => 0.5 * weight * space.dist(x, anchor).powi(2),
            Functional::Distance { anchor, weight } => weight * space.dist(x, anchor),
            Functional::WeightedSum { terms, .. } => {
                terms.iter().map(|(f, c)| c * f.value(space, x)).sum()
            }
            Functional::Indicator(set) => {
                if set.contains(space, x, INDICATOR_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Functional::Busemann(ray) => match ray.normalized(space) {
                Ok(r) => r.busemann(space, x),
                Err(_) => f64::NAN,
            },
            Functional::Displacement(iso) => space.dist(x, &iso.apply(space, x)),
            Functional::Custom(c) => c.eval(space, x),
        }
    }

    /// Global Lipschitz constant where one exists.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Functional::Distance { weight, .. } => Some(*weight),
            Functional::Busemann(_) => Some(1.0),
            Functional::Displacement(_) => Some(2.0),
            Functional::WeightedSum { terms, .. } => terms
                .iter()
                .map(|(f, c)| f.lipschitz().map(|l| l * c))
                .sum(),
            Functional::Custom(c) => c.lipschitz,
            _ => None,
        }
    }

    /// Riemannian gradient where every atom is differentiable at `x`.
    pub fn gradient(&self, space: &Space, x: &Point) -> Option<Tangent> {
        if !space.is_riemannian() {
            return None;
        }
        let mut total: Option<Tangent> = None;
        for (atom, c) in self.atoms() {
            let g = match &atom {
                Functional::SquaredDistance { anchor, weight } => {
                    space.log_map(x, anchor).scale(-weight * c)
                }
                Functional::Distance { anchor, weight } => {
                    let d = space.dist(x, anchor);
                    if d == 0.0 {
                        return None;
                    }
                    space.log_map(x, anchor).scale(-weight * c / d)
                }
                Functional::Busemann(ray) => match (space, ray.normalized(space).ok()?) {
                    (Space::Euclidean { .. } | Space::PdNorm { .. }, Ray::Directed { direction, .. }) => {
                        Tangent::Vector(direction.iter().map(|u| -u * c).collect())
                    }
                    _ => return None,
                },
                _ => return None,
            };
            total = Some(match total {
                Some(t) => t.add(&g),
                None => g,
            });
        }
        total
    }

    /// `|∂f|(x)` when a closed form is registered for this functional.
    pub fn known_slope(&self, space: &Space, x: &Point) -> Option<f64> {
        let atoms = self.atoms();
        if let [(atom, c)] = atoms.as_slice() {
            let s = match atom {
                Functional::SquaredDistance { anchor, weight } => weight * space.dist(x, anchor),
                Functional::Distance { anchor, weight } => {
                    if space.dist(x, anchor) == 0.0 {
                        0.0
                    } else {
                        *weight
                    }
                }
                Functional::Indicator(set) => {
                    if set.contains(space, x, INDICATOR_TOL) {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                }
                Functional::Busemann(_) => 1.0,
                _ => return None,
            };
            return Some(c * s);
        }
        self.gradient(space, x).map(|g| space.tangent_norm(x, &g))
    }
}

fn power_term(anchor: Point, w: f64, p: u32) -> Result<Functional> {
    match p {
        1 => Ok(Functional::Distance { anchor, weight: w }),
        2 => Ok(Functional::SquaredDistance {
            anchor,
            weight: 2.0 * w,
        }),
        _ => Err(Error::invalid(format!("distance power p = {p} not in {{1, 2}}"))),
    }
}

/// `(1−t)f(x) + t f(y) − β t(1−t) d(x,y)² − f(γ(t))`.
pub fn convexity_slack(space: &Space, f: &Functional, beta: f64, x: &Point, y: &Point, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("parameter {t} outside [0, 1]")));
    }
    if !(beta >= 0.0) {
        return Err(Error::invalid("β must be nonnegative"));
    }
    let fx = f.eval(space, x)?;
    let fy = f.eval(space, y)?;
    if !fx.is_finite() || !fy.is_finite() {
        return Err(Error::invalid("functional is infinite at an endpoint"));
    }
    let g = space.geodesic(x, y, t);
    let d = space.dist(x, y);
    Ok((1.0 - t) * fx + t * fy - beta * t * (1.0 - t) * d * d - f.value(space, &g))
}

/// A stored tail `x_N, …, x_M` of a bounded sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceWindow {
    pub points: Vec<Point>,
    /// Index `N` of the first stored point.
    #[serde(default)]
    pub start: usize,
}

impl SequenceWindow {
    pub fn new(points: Vec<Point>, start: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("sequence window is empty"));
        }
        Ok(SequenceWindow { points, start })
    }

    pub fn validate(&self, space: &Space) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("sequence window is empty"));
        }
        self.points.iter().try_for_each(|p| space.validate(p))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The later half of the tail, used to gauge window sensitivity.
    pub fn second_half(&self) -> SequenceWindow {
        let cut = self.points.len() / 2;
        SequenceWindow {
            points: self.points[cut..].to_vec(),
            start: self.start + cut,
        }
    }

    /// Every `k`-th point starting at offset `phase`.
    pub fn thinned(&self, k: usize, phase: usize) -> Option<SequenceWindow> {
        let points: Vec<Point> = self.points.iter().skip(phase).step_by(k.max(1)).cloned().collect();
        (!points.is_empty()).then(|| SequenceWindow {
            points,
            start: self.start + phase,
        })
    }
}

/// `max_n d(x, xₙ)²` over the stored tail.
pub fn omega_tail(space: &Space, window: &SequenceWindow, x: &Point) -> f64 {
    window
        .points
        .iter()
        .map(|p| space.dist(x, p).powi(2))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// JSON forms

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FunctionalSpec {
    /// `w·d(·, a)^p`.
    Dist {
        #[serde(default = "one_u32")]
        p: u32,
        anchor: Point,
        #[serde(default = "one_f64")]
        w: f64,
    },
    Sum {
        terms: Vec<FunctionalSpec>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        normalized: bool,
    },
    Indicator { set: ConvexSet },
    Busemann { ray: Ray },
    Displacement { isometry: Isometry },
    Custom { name: String },
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

impl TryFrom<FunctionalSpec> for Functional {
    type Error = Error;

    fn try_from(spec: FunctionalSpec) -> Result<Functional> {
        let f = match spec {
            FunctionalSpec::Dist { p, anchor, w } => power_term(anchor, w, p)?,
            FunctionalSpec::Sum {
                terms,
                weights,
                normalized,
            } => {
                let n = terms.len();
                let weights = weights.unwrap_or_else(|| vec![1.0; n]);
                if weights.len() != n {
                    return Err(Error::invalid("sum weights and terms differ in length"));
                }
                Functional::WeightedSum {
                    terms: terms
                        .into_iter()
                        .map(Functional::try_from)
                        .zip(weights)
                        .map(|(f, c)| f.map(|f| (f, c)))
                        .collect::<Result<_>>()?,
                    normalized,
                }
            }
            FunctionalSpec::Indicator { set } => Functional::Indicator(set),
            FunctionalSpec::Busemann { ray } => Functional::Busemann(ray),
            FunctionalSpec::Displacement { isometry } => Functional::Displacement(isometry),
            FunctionalSpec::Custom { name } => {
                return Err(Error::unsupported(format!(
                    "custom functional `{name}` cannot be loaded from a descriptor"
                )))
            }
        };
        f.check_weights()?;
        Ok(f)
    }
}

impl From<&Functional> for FunctionalSpec {
    fn from(f: &Functional) -> FunctionalSpec {
        match f {
            Functional::Distance { anchor, weight } => FunctionalSpec::Dist {
                p: 1,
                anchor: anchor.clone(),
                w: *weight,
            },
            Functional::SquaredDistance { anchor, weight } => FunctionalSpec::Dist {
                p: 2,
                anchor: anchor.clone(),
                w: 0.5 * weight,
            },
            Functional::WeightedSum { terms, normalized } => FunctionalSpec::Sum {
                terms: terms.iter().map(|(f, _)| f.into()).collect(),
                weights: Some(terms.iter().map(|(_, c)| *c).collect()),
                normalized: *normalized,
            },
            Functional::Indicator(set) => FunctionalSpec::Indicator { set: set.clone() },
            Functional::Busemann(ray) => FunctionalSpec::Busemann { ray: ray.clone() },
            Functional::Displacement(iso) => FunctionalSpec::Displacement {
                isometry: iso.clone(),
            },
            Functional::Custom(c) => FunctionalSpec::Custom { name: c.name.clone() },
        }
    }
}

impl Serialize for Functional {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FunctionalSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Functional {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = FunctionalSpec::deserialize(d)?;
        Functional::try_from(spec).map_err(serde::de::Error::custom)
    }
}
