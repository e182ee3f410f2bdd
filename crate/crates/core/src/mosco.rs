//! Mosco-convergence harness: recovery and liminf conditions, convergence
//! of envelopes, resolvents, projections and semigroups along built-in or
//! user-supplied sequences.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::semigroup_fixed;
use crate::functionals::{Functional, SequenceWindow};
use crate::geometry::{ConvexSet, MetricTree, Point, Space};
use crate::prox::resolvent;
use crate::weak::{default_probes, weak_limit_score};

/// Declared gap bounds of a family at `(x, λ, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub env: f64,
    pub res: f64,
}

type Generator = Arc<dyn Fn(usize) -> Functional + Send + Sync>;
type Recovery = Arc<dyn Fn(&Point, usize) -> Point + Send + Sync>;
type RateFn = Arc<dyn Fn(&Point, f64, usize) -> Rates + Send + Sync>;

/// `n ↦ fⁿ` on a fixed space together with the limit `f`.
#[derive(Clone)]
pub struct FunctionalSequence {
    pub name: String,
    pub space: Space,
    pub limit: Functional,
    generator: Generator,
    recovery: Option<Recovery>,
    rate: Option<RateFn>,
}

impl fmt::Debug for FunctionalSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalSequence")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("limit", &self.limit)
            .field("recovery", &self.recovery.is_some())
            .finish()
    }
}

impl FunctionalSequence {
    pub fn new(
        name: impl Into<String>,
        space: Space,
        generator: impl Fn(usize) -> Functional + Send + Sync + 'static,
        limit: Functional,
    ) -> Self {
        FunctionalSequence {
            name: name.into(),
            space,
            limit,
            generator: Arc::new(generator),
            recovery: None,
            rate: None,
        }
    }

    /// Recovery sequence `(x, n) ↦ yₙ` with `yₙ → x` and `fⁿ(yₙ) → f(x)`.
    pub fn with_recovery(mut self, r: impl Fn(&Point, usize) -> Point + Send + Sync + 'static) -> Self {
        self.recovery = Some(Arc::new(r));
        self
    }

    pub fn with_rate(mut self, r: impl Fn(&Point, f64, usize) -> Rates + Send + Sync + 'static) -> Self {
        self.rate = Some(Arc::new(r));
        self
    }

    /// `fⁿ`, for `n ≥ 1`.
    pub fn term(&self, n: usize) -> Functional {
        (self.generator)(n.max(1))
    }

    pub fn recovery(&self, x: &Point, n: usize) -> Option<Point> {
        self.recovery.as_ref().map(|r| r(x, n.max(1)))
    }

    pub fn rates(&self, x: &Point, lambda: f64, n: usize) -> Option<Rates> {
        self.rate.as_ref().map(|r| r(x, lambda, n.max(1)))
    }
}

/// Built-in functional families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalFamily {
    /// `½d(·, 1/n)²` on the real line, limit `½d(·, 0)²`.
    TranslatedQuadratic,
    /// `(½ + 1/(4n))d(·, a) + (½ − 1/(4n))d(·, b)`, limit the unweighted
    /// median functional.
    PerturbedFermatWeber { space: Space, a: Point, b: Point },
    /// `½d(·, aₙ)²` on a unit star, `aₙ` at distance `1/n` up leg 0; limit
    /// anchored at the center.
    StarAnchorDrift { legs: usize },
    /// Indicators of `[0, 1 + 1/n]`, limit the indicator of `[0, 1]`.
    ShrinkingIntervals,
    Constant { space: Space, functional: Functional },
}

impl FunctionalFamily {
    pub fn id(&self) -> &'static str {
        match self {
            FunctionalFamily::TranslatedQuadratic => "translated_quadratic",
            FunctionalFamily::PerturbedFermatWeber { .. } => "perturbed_fermat_weber",
            FunctionalFamily::StarAnchorDrift { .. } => "star_anchor_drift",
            FunctionalFamily::ShrinkingIntervals => "shrinking_intervals",
            FunctionalFamily::Constant { .. } => "constant",
        }
    }

    pub fn sequence(&self) -> Result<FunctionalSequence> {
        let name = self.id();
        Ok(match self {
            FunctionalFamily::TranslatedQuadratic => {
                let line = Space::Euclidean { dim: 1 };
                FunctionalSequence::new(
                    name,
                    line,
                    |n| Functional::squared_distance(Point::scalar(1.0 / n as f64), 1.0),
                    Functional::squared_distance(Point::scalar(0.0), 1.0),
                )
                .with_recovery(|x, _| x.clone())
                .with_rate(|x, lambda, n| {
                    let n = n as f64;
                    let x = x.as_vector().map_or(0.0, |v| v[0].abs());
                    Rates {
                        env: (2.0 * x + 1.0 / n) / (2.0 * (1.0 + lambda) * n),
                        res: lambda / ((1.0 + lambda) * n),
                    }
                })
            }
            FunctionalFamily::PerturbedFermatWeber { space, a, b } => {
                space.validate(a)?;
                space.validate(b)?;
                let (sa, sb) = (a.clone(), b.clone());
                let gen = move |n: usize| {
                    let e = 0.25 / n as f64;
                    Functional::WeightedSum {
                        terms: vec![
                            (Functional::distance(sa.clone(), 1.0), 0.5 + e),
                            (Functional::distance(sb.clone(), 1.0), 0.5 - e),
                        ],
                        normalized: false,
                    }
                };
                let limit = gen(usize::MAX);
                let limit = match limit {
                    Functional::WeightedSum { terms, .. } => Functional::WeightedSum {
                        terms: terms.into_iter().map(|(f, _)| (f, 0.5)).collect(),
                        normalized: false,
                    },
                    other => other,
                };
                let dab = space.dist(a, b);
                FunctionalSequence::new(name, space.clone(), gen, limit)
                    .with_recovery(|x, _| x.clone())
                    .with_rate(move |_, lambda, n| {
                        let e = 0.25 / n as f64;
                        Rates {
                            env: e * dab,
                            res: 2.0 * e * lambda,
                        }
                    })
            }
            FunctionalFamily::StarAnchorDrift { legs } => {
                let tree = Space::tree(MetricTree::star(*legs, 1.0)?);
                let center = Point::node(0);
                let t2 = tree.clone();
                FunctionalSequence::new(
                    name,
                    tree,
                    |n| Functional::squared_distance(Point::on_edge(0, 1.0 / n as f64), 1.0),
                    Functional::squared_distance(center.clone(), 1.0),
                )
                .with_recovery(|x, _| x.clone())
                .with_rate(move |x, lambda, n| {
                    let n = n as f64;
                    let r = t2.dist(x, &center);
                    Rates {
                        env: (2.0 * r + 1.0 / n) / (2.0 * (1.0 + lambda) * n),
                        res: lambda / ((1.0 + lambda) * n),
                    }
                })
            }
            FunctionalFamily::ShrinkingIntervals => FunctionalSequence::new(
                name,
                Space::Euclidean { dim: 1 },
                |n| {
                    Functional::Indicator(ConvexSet::Interval {
                        lo: 0.0,
                        hi: 1.0 + 1.0 / n as f64,
                    })
                },
                Functional::Indicator(ConvexSet::Interval { lo: 0.0, hi: 1.0 }),
            )
            // Clamping x into Cₙ recovers f(x) = 0 for x ∈ [0, 1].
            .with_recovery(|x, n| {
                let v = x.as_vector().map_or(0.0, |v| v[0]);
                Point::scalar(v.clamp(0.0, 1.0 + 1.0 / n as f64))
            })
            .with_rate(|x, lambda, n| {
                let n = n as f64;
                let v = x.as_vector().map_or(0.0, |v| v[0]);
                let d = (v - 1.0).max(-v).max(0.0);
                Rates {
                    env: (2.0 * d + 1.0 / n) / (2.0 * lambda * n),
                    res: 1.0 / n,
                }
            }),
            FunctionalFamily::Constant { space, functional } => {
                functional.check(space)?;
                let f = functional.clone();
                FunctionalSequence::new(name, space.clone(), move |_| f.clone(), functional.clone())
                    .with_recovery(|x, _| x.clone())
                    .with_rate(|_, _, _| Rates { env: 0.0, res: 0.0 })
            }
        })
    }
}

/// Log-spaced grid `1, 2, 4, …` up to and including `n_max`.
pub fn log_grid(n_max: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect();
    if grid.last() != Some(&n_max) && n_max > 0 {
        grid.push(n_max);
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M2Report {
    pub n: usize,
    /// `|fⁿ(yₙ) − f(x)| + d(yₙ, x)`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M1Window {
    pub start: usize,
    /// Weak-limit score of the window at `x`; large values void the slack.
    pub weak_score: f64,
    /// Tail minimum of `fⁿ(xₙ)` minus `f(x)`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoscoReport {
    pub family: String,
    /// `None` when the sequence has no recovery provider.
    pub m2: Option<M2Report>,
    pub m1: Vec<M1Window>,
    /// M1 is only ever checked on the supplied windows.
    pub m1_sampled: bool,
}

impl MoscoReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.m2.as_ref().is_none_or(|m| m.gap <= tol) && self.m1.iter().all(|w| w.slack >= -tol)
    }
}

/// Check (M2) at `n = N` and the windowed (M1) slack on each test window.
/// Window point `i` is taken as the `(start + i)`-th sequence element.
pub fn mosco_check(seq: &FunctionalSequence, x: &Point, windows: &[SequenceWindow], n: usize) -> Result<MoscoReport> {
    let space = &seq.space;
    space.validate(x)?;
    let fx = seq.limit.eval(space, x)?;
    let m2 = match seq.recovery(x, n) {
        Some(y) => {
            space.validate(&y)?;
            let fy = seq.term(n).value(space, &y);
            Some(M2Report {
                n,
                gap: (fy - fx).abs() + space.dist(&y, x),
            })
        }
        None => None,
    };
    let probes = default_probes(space, x);
    let m1 = windows
        .iter()
        .map(|w| {
            let weak_score = weak_limit_score(space, w, x, &probes)?;
            let tail_min = w
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| seq.term(w.start + i).value(space, p))
                .fold(f64::INFINITY, f64::min);
            Ok(M1Window {
                start: w.start,
                weak_score,
                slack: tail_min - fx,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MoscoReport {
        family: seq.name.clone(),
        m2,
        m1,
        m1_sampled: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub family: String,
    pub lambda: f64,
    /// Rows `[n, env_gap, res_gap]`.
    pub gaps: Vec<(usize, f64, f64)>,
    /// Solver failures by `n`.
    pub failures: Vec<(usize, String)>,
    /// Whether every row past `√N` lies under the declared rate plus `10·tol`.
    pub passed: bool,
}

impl GapReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        w.write_record(["n", "env_gap", "res_gap"]).map_err(wrap)?;
        for (n, e, r) in &self.gaps {
            w.write_record([n.to_string(), e.to_string(), r.to_string()]).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))
    }
}

/// Envelope and resolvent gaps on the log grid up to `N`.
pub fn envelope_resolvent_convergence(
    seq: &FunctionalSequence,
    x: &Point,
    lambda: f64,
    n_max: usize,
    tol: f64,
) -> Result<GapReport> {
    envelope_resolvent_gaps(seq, x, lambda, &log_grid(n_max), tol)
}

/// Envelope and resolvent gaps on an explicit grid of indices.
pub fn envelope_resolvent_gaps(
    seq: &FunctionalSequence,
    x: &Point,
    lambda: f64,
    grid: &[usize],
    tol: f64,
) -> Result<GapReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("λ = {lambda} must be positive")));
    }
    let space = &seq.space;
    space.validate(x)?;
    let limit = resolvent(space, &seq.limit, x, lambda, tol)?;
    let rows: Vec<(usize, Result<(f64, f64)>)> = grid
        .par_iter()
        .map(|&n| {
            let r = resolvent(space, &seq.term(n), x, lambda, tol)
                .map(|r| ((r.objective - limit.objective).abs(), space.dist(&r.point, &limit.point)));
            (n, r)
        })
        .collect();
    let mut gaps = Vec::new();
    let mut failures = Vec::new();
    for (n, r) in rows {
        match r {
            Ok((e, g)) => gaps.push((n, e, g)),
            Err(e) => failures.push((n, e.to_string())),
        }
    }
    let eventually = (grid.iter().copied().max().unwrap_or(1) as f64).sqrt();
    let passed = failures.is_empty()
        && gaps.iter().filter(|(n, _, _)| *n as f64 >= eventually).all(|&(n, e, g)| {
            seq.rates(x, lambda, n)
                .is_none_or(|r| e <= r.env + 10.0 * tol && g <= r.res + 10.0 * tol)
        });
    Ok(GapReport {
        family: seq.name.clone(),
        lambda,
        gaps,
        failures,
        passed,
    })
}

/// Whether `Cₙ` shrinks, grows, or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Decreasing,
    Increasing,
    None,
}

/// Sequences of convex sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetFamily {
    /// `[0, 1 + 1/n]` on the real line.
    NestedIntervals,
    /// Balls of radius `1 − 1/n` about the origin of ℝᵈ.
    IncreasingBalls { dim: usize },
    /// An explicit list; indices past the end repeat the last set.
    Explicit {
        space: Space,
        sets: Vec<ConvexSet>,
        limit: ConvexSet,
        monotonicity: Monotonicity,
    },
}

impl SetFamily {
    pub fn id(&self) -> &'static str {
        match self {
            SetFamily::NestedIntervals => "nested_intervals",
            SetFamily::IncreasingBalls { .. } => "increasing_balls",
            SetFamily::Explicit { .. } => "explicit",
        }
    }

    pub fn space(&self) -> Space {
        match self {
            SetFamily::NestedIntervals => Space::Euclidean { dim: 1 },
            SetFamily::IncreasingBalls { dim } => Space::Euclidean { dim: *dim },
            SetFamily::Explicit { space, .. } => space.clone(),
        }
    }

    pub fn set(&self, n: usize) -> ConvexSet {
        let n = n.max(1) as f64;
        match self {
            SetFamily::NestedIntervals => ConvexSet::Interval { lo: 0.0, hi: 1.0 + 1.0 / n },
            SetFamily::IncreasingBalls { dim } => ConvexSet::Ball {
                center: Point::Vector(vec![0.0; *dim]),
                radius: 1.0 - 1.0 / n,
            },
            SetFamily::Explicit { sets, .. } => sets[(n as usize - 1).min(sets.len() - 1)].clone(),
        }
    }

    pub fn limit(&self) -> ConvexSet {
        match self {
            SetFamily::NestedIntervals => ConvexSet::Interval { lo: 0.0, hi: 1.0 },
            SetFamily::IncreasingBalls { dim } => ConvexSet::Ball {
                center: Point::Vector(vec![0.0; *dim]),
                radius: 1.0,
            },
            SetFamily::Explicit { limit, .. } => limit.clone(),
        }
    }

    pub fn monotonicity(&self) -> Monotonicity {
        match self {
            SetFamily::NestedIntervals => Monotonicity::Decreasing,
            SetFamily::IncreasingBalls { .. } => Monotonicity::Increasing,
            SetFamily::Explicit { monotonicity, .. } => *monotonicity,
        }
    }

    /// Declared bound on the distance and projection gaps at `n`.
    pub fn rate(&self, n: usize) -> Option<f64> {
        match self {
            SetFamily::NestedIntervals | SetFamily::IncreasingBalls { .. } => Some(1.0 / n.max(1) as f64),
            SetFamily::Explicit { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.space();
        if let SetFamily::Explicit { sets, limit, .. } = self {
            if sets.is_empty() {
                return Err(Error::invalid("explicit set family is empty"));
            }
            sets.iter().try_for_each(|s| s.validate(&space))?;
            limit.validate(&space)?;
        }
        Ok(())
    }
}

/// Intersection of a decreasing, or closed union of an increasing, family.
pub fn monotone_set_limit(seq: &SetFamily) -> Result<ConvexSet> {
    seq.validate()?;
    let SetFamily::Explicit {
        space,
        sets,
        monotonicity,
        ..
    } = seq
    else {
        return Ok(seq.limit());
    };
    let shrinking = match monotonicity {
        Monotonicity::Decreasing => true,
        Monotonicity::Increasing => false,
        Monotonicity::None => return Err(Error::unsupported("family has no monotonicity flag")),
    };
    if sets.windows(2).all(|w| w[0] == w[1]) {
        return Ok(sets[0].clone());
    }
    if let Some(bounds) = sets
        .iter()
        .map(|s| match s {
            ConvexSet::Interval { lo, hi } => Some((*lo, *hi)),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
    {
        let (lo, hi) = if shrinking {
            bounds.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(l, h), &(a, b)| (l.max(a), h.min(b)))
        } else {
            bounds.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(a, b)| (l.min(a), h.max(b)))
        };
        if lo > hi {
            return Err(Error::invalid("nested intervals have empty intersection"));
        }
        return Ok(ConvexSet::Interval { lo, hi });
    }
    if let ConvexSet::Ball { center, .. } = &sets[0] {
        let radii = sets
            .iter()
            .map(|s| match s {
                ConvexSet::Ball { center: c, radius } if space.dist(c, center) == 0.0 => Some(*radius),
                _ => None,
            })
            .collect::<Option<Vec<_>>>();
        if let Some(r) = radii {
            let radius = if shrinking {
                r.iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                r.iter().copied().fold(0.0, f64::max)
            };
            return Ok(ConvexSet::Ball {
                center: center.clone(),
                radius,
            });
        }
    }
    Err(Error::unsupported("no closed-form limit for this set family"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetGapReport {
    pub family: String,
    /// Rows `[n, dist_gap, proj_gap]`.
    pub gaps: Vec<(usize, f64, f64)>,
    pub passed: bool,
}

/// `|d(x, Cₙ) − d(x, C)|` and `d(P_{Cₙ}x, P_C x)` on the log grid up to `N`.
pub fn wijsman_check(seq: &SetFamily, x: &Point, n_max: usize, tol: f64) -> Result<SetGapReport> {
    wijsman_gaps(seq, x, &log_grid(n_max), tol)
}

pub fn wijsman_gaps(seq: &SetFamily, x: &Point, grid: &[usize], tol: f64) -> Result<SetGapReport> {
    seq.validate()?;
    let space = seq.space();
    space.validate(x)?;
    let limit = seq.limit();
    let (d, p) = (limit.distance_to(&space, x), limit.project(&space, x));
    let gaps: Vec<(usize, f64, f64)> = grid
        .par_iter()
        .map(|&n| {
            let c = seq.set(n);
            (n, (c.distance_to(&space, x) - d).abs(), space.dist(&c.project(&space, x), &p))
        })
        .collect();
    let passed = gaps
        .iter()
        .all(|&(n, dg, pg)| seq.rate(n).is_none_or(|r| dg <= r + tol && pg <= r + tol));
    Ok(SetGapReport {
        family: seq.id().to_string(),
        gaps,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupGapReport {
    pub family: String,
    pub t: f64,
    pub n_steps: usize,
    /// Rows `[n, sem_gap]`.
    pub gaps: Vec<(usize, f64)>,
    /// Whether every row lies under `n_steps` times the declared resolvent
    /// rate at `λ = t/n_steps`, plus the solver allowance.
    pub passed: bool,
}

/// `d(Sⁿ_t x, S_t x)` with both semigroups discretized by `n_steps`
/// backward-Euler steps.
pub fn semigroup_convergence(
    seq: &FunctionalSequence,
    x: &Point,
    t: f64,
    n_max: usize,
    n_steps: usize,
    tol: f64,
) -> Result<SemigroupGapReport> {
    semigroup_gaps(seq, x, t, &log_grid(n_max), n_steps, tol)
}

pub fn semigroup_gaps(
    seq: &FunctionalSequence,
    x: &Point,
    t: f64,
    grid: &[usize],
    n_steps: usize,
    tol: f64,
) -> Result<SemigroupGapReport> {
    let space = &seq.space;
    let limit = semigroup_fixed(space, &seq.limit, x, t, n_steps, tol)?;
    let gaps = grid
        .par_iter()
        .map(|&n| Ok((n, space.dist(&semigroup_fixed(space, &seq.term(n), x, t, n_steps, tol)?, &limit))))
        .collect::<Result<Vec<_>>>()?;
    let lambda = t / n_steps as f64;
    let allowance = 10.0 * n_steps as f64 * tol;
    let passed = gaps.iter().all(|&(n, g)| {
        seq.rates(x, lambda, n)
            .is_none_or(|r| g <= n_steps as f64 * r.res + allowance)
    });
    Ok(SemigroupGapReport {
        family: seq.name.clone(),
        t,
        n_steps,
        gaps,
        passed,
    })
}
