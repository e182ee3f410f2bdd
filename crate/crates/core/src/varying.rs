//! Sequences of spaces related to a limit space by explicit reference maps
//! `φⁿ: Xⁿ → X` and lifts `ψⁿ: X → Xⁿ` with declared distortion `εₙ`, and
//! convergence checks for resolvents and semigroups across them.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::semigroup_fixed;
use crate::functionals::Functional;
use crate::geometry::{Matrix, MetricTree, Point, Space, TreePoint};
use crate::prox::resolvent;

/// Built-in asymptotic relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArInstance {
    /// `Xⁿ = X`, both maps the identity.
    Identity { space: Space },
    /// Tripod with legs `1 + 1/n` onto the unit tripod by radial rescaling.
    ScaledTripod,
    /// ℝ² with the norm of `I + E/n`, `E = [[1, ½], [½, 1]]`, onto the
    /// Euclidean plane by the identity.
    PdNormPlane,
}

const SAMPLE_RADIUS: f64 = 1.0;

impl ArInstance {
    pub fn id(&self) -> &'static str {
        match self {
            ArInstance::Identity { .. } => "identity",
            ArInstance::ScaledTripod => "scaled_tripod",
            ArInstance::PdNormPlane => "pd_norm_plane",
        }
    }

    fn leg(n: usize) -> f64 {
        1.0 + 1.0 / n.max(1) as f64
    }

    /// `Xⁿ`.
    pub fn space(&self, n: usize) -> Result<Space> {
        let n = n.max(1);
        Ok(match self {
            ArInstance::Identity { space } => space.clone(),
            ArInstance::ScaledTripod => Space::tree(MetricTree::star(3, Self::leg(n))?),
            ArInstance::PdNormPlane => {
                let e = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]])?;
                Space::pd_norm(&Matrix::identity(2) + &e.scale(1.0 / n as f64))?
            }
        })
    }

    /// `X`.
    pub fn limit(&self) -> Result<Space> {
        Ok(match self {
            ArInstance::Identity { space } => space.clone(),
            ArInstance::ScaledTripod => Space::tree(MetricTree::star(3, 1.0)?),
            ArInstance::PdNormPlane => Space::Euclidean { dim: 2 },
        })
    }

    /// Declared distortion of `φⁿ` on the sampling ball.
    pub fn epsilon(&self, n: usize) -> f64 {
        match self {
            ArInstance::Identity { .. } => 0.0,
            ArInstance::ScaledTripod | ArInstance::PdNormPlane => 2.0 / n.max(1) as f64,
        }
    }

    /// `φⁿ: Xⁿ → X`.
    pub fn phi(&self, n: usize, p: &Point) -> Point {
        self.rescale(p, 1.0 / Self::leg(n))
    }

    /// `ψⁿ: X → Xⁿ`.
    pub fn psi(&self, n: usize, p: &Point) -> Point {
        self.rescale(p, Self::leg(n))
    }

    fn rescale(&self, p: &Point, factor: f64) -> Point {
        match (self, p) {
            (ArInstance::ScaledTripod, Point::Tree(TreePoint::Edge { edge, offset })) => Point::on_edge(*edge, offset * factor),
            _ => p.clone(),
        }
    }
}

/// Which axioms were checked numerically and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArReport {
    pub instance: String,
    pub n: usize,
    pub epsilon: f64,
    /// Largest observed `|d(φⁿa, φⁿb) − dₙ(a, b)|`.
    pub distortion: f64,
    /// Largest observed `d(φⁿψⁿx, x)`.
    pub lift_error: f64,
    /// Largest `|dₙ(xₙ, yₙ) − d(x, y)|` over lifted pairs.
    pub a3_residual: f64,
    /// Largest `d(φⁿyₙ, x) − dₙ(xₙ, yₙ) − d(φⁿxₙ, x)` over nearby pairs.
    pub a4_residual: f64,
    /// (A1) and (A2) hold by construction: both maps are total.
    pub structural: Vec<String>,
}

/// Sample-based check of the distortion declaration and of the (A3)/(A4)
/// surrogates at index `n`.
pub fn ar_axioms_check(inst: &ArInstance, n: usize, samples: usize, tol: f64) -> Result<ArReport> {
    let xn = inst.space(n)?;
    let x = inst.limit()?;
    let eps = inst.epsilon(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0xa4a3 ^ n as u64);
    let witness = |what: &str, a: &Point, b: &Point, value: f64, bound: f64| {
        Error::Certification(format!(
            "{} at n = {n}: {what} {value:e} exceeds {bound:e} for witness pair {a:?}, {b:?}",
            inst.id()
        ))
    };
    let (mut distortion, mut lift_error, mut a3, mut a4) = (0.0_f64, 0.0_f64, 0.0_f64, f64::NEG_INFINITY);
    for _ in 0..samples {
        let a = xn.sample_point(&mut rng, SAMPLE_RADIUS);
        let b = xn.sample_point(&mut rng, SAMPLE_RADIUS);
        let dist = (x.dist(&inst.phi(n, &a), &inst.phi(n, &b)) - xn.dist(&a, &b)).abs();
        if dist > eps + tol {
            return Err(witness("distortion", &a, &b, dist, eps));
        }
        distortion = distortion.max(dist);

        let p = x.sample_point(&mut rng, SAMPLE_RADIUS);
        let q = x.sample_point(&mut rng, SAMPLE_RADIUS);
        let (pn, qn) = (inst.psi(n, &p), inst.psi(n, &q));
        let lift = x.dist(&inst.phi(n, &pn), &p);
        if lift > eps + tol {
            return Err(witness("lift error", &p, &pn, lift, eps));
        }
        lift_error = lift_error.max(lift);
        let r3 = (xn.dist(&pn, &qn) - x.dist(&p, &q)).abs();
        let bound = 2.0 * eps + x.dist(&inst.phi(n, &pn), &p) + x.dist(&inst.phi(n, &qn), &q);
        if r3 > bound + tol {
            return Err(witness("(A3) residual", &p, &q, r3, bound));
        }
        a3 = a3.max(r3);

        let yn = xn.sample_near(&mut rng, &pn, 1.0 / n.max(1) as f64);
        let r4 = x.dist(&inst.phi(n, &yn), &p) - xn.dist(&pn, &yn) - x.dist(&inst.phi(n, &pn), &p);
        if r4 > eps + tol {
            return Err(witness("(A4) residual", &pn, &yn, r4, eps));
        }
        a4 = a4.max(r4);
    }
    Ok(ArReport {
        instance: inst.id().to_string(),
        n,
        epsilon: eps,
        distortion,
        lift_error,
        a3_residual: a3,
        a4_residual: a4.max(0.0),
        structural: vec!["A1".into(), "A2".into()],
    })
}

/// `max_t d(φⁿγⁿ(t), γ(t))`, where `γⁿ` joins the lifts of `x` and `y`.
pub fn geodesic_convergence_check(inst: &ArInstance, n: usize, x: &Point, y: &Point, t_grid: &[f64]) -> Result<f64> {
    let xs = inst.space(n)?;
    let lim = inst.limit()?;
    lim.validate(x)?;
    lim.validate(y)?;
    let (xn, yn) = (inst.psi(n, x), inst.psi(n, y));
    let mut gap = 0.0_f64;
    for &t in t_grid {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("t = {t} outside [0, 1]")));
        }
        let pn = inst.phi(n, &xs.geodesic(&xn, &yn, t));
        gap = gap.max(lim.dist(&pn, &lim.geodesic(x, y, t)));
    }
    Ok(gap)
}

type VaryingGenerator = Arc<dyn Fn(usize, &Space) -> Functional + Send + Sync>;

/// `n ↦ fⁿ` on `Xⁿ` with limit `f` on `X`.
#[derive(Clone)]
pub struct VaryingFunctionalSequence {
    pub name: String,
    pub limit: Functional,
    generator: VaryingGenerator,
}

impl fmt::Debug for VaryingFunctionalSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VaryingFunctionalSequence")
            .field("name", &self.name)
            .field("limit", &self.limit)
            .finish()
    }
}

impl VaryingFunctionalSequence {
    pub fn new(
        name: impl Into<String>,
        generator: impl Fn(usize, &Space) -> Functional + Send + Sync + 'static,
        limit: Functional,
    ) -> Self {
        VaryingFunctionalSequence {
            name: name.into(),
            limit,
            generator: Arc::new(generator),
        }
    }

    /// `fⁿ` on the given `Xⁿ`.
    pub fn term(&self, n: usize, space: &Space) -> Functional {
        (self.generator)(n.max(1), space)
    }
}

/// Built-in varying families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VaryingFamily {
    /// `(w/2)dₙ(·, ψⁿa)²` with limit `(w/2)d(·, a)²`.
    QuadraticAnchor { anchor: Point, weight: f64 },
    /// A functional that is built identically on every `Xⁿ` (e.g. for the
    /// identity instance).
    Constant { functional: Functional },
}

impl VaryingFamily {
    pub fn sequence(&self, inst: &ArInstance) -> Result<VaryingFunctionalSequence> {
        let lim = inst.limit()?;
        Ok(match self {
            VaryingFamily::QuadraticAnchor { anchor, weight } => {
                lim.validate(anchor)?;
                if !(*weight > 0.0 && weight.is_finite()) {
                    return Err(Error::invalid(format!("weight {weight} must be positive")));
                }
                let (a, w, inst) = (anchor.clone(), *weight, inst.clone());
                VaryingFunctionalSequence::new(
                    "quadratic_anchor",
                    move |n, _| Functional::squared_distance(inst.psi(n, &a), w),
                    Functional::squared_distance(anchor.clone(), w),
                )
            }
            VaryingFamily::Constant { functional } => {
                functional.check(&lim)?;
                let f = functional.clone();
                VaryingFunctionalSequence::new("constant", move |_, _| f.clone(), functional.clone())
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaryingGapReport {
    pub instance: String,
    pub family: String,
    pub lambda: f64,
    /// Rows `[n, εₙ, env_gap, res_gap]`.
    pub gaps: Vec<(usize, f64, f64, f64)>,
    pub failures: Vec<(usize, String)>,
}

/// Envelope and resolvent gaps at `xₙ = ψⁿx`, measured in `X` through `φⁿ`.
pub fn mosco_ar_check(
    inst: &ArInstance,
    vseq: &VaryingFunctionalSequence,
    x: &Point,
    lambda: f64,
    grid: &[usize],
    tol: f64,
) -> Result<VaryingGapReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("λ = {lambda} must be positive")));
    }
    let lim = inst.limit()?;
    lim.validate(x)?;
    let base = resolvent(&lim, &vseq.limit, x, lambda, tol)?;
    let rows: Vec<(usize, Result<(f64, f64)>)> = grid
        .par_iter()
        .map(|&n| {
            let r = inst.space(n).and_then(|xs| {
                let f = vseq.term(n, &xs);
                let r = resolvent(&xs, &f, &inst.psi(n, x), lambda, tol)?;
                Ok((
                    (r.objective - base.objective).abs(),
                    lim.dist(&inst.phi(n, &r.point), &base.point),
                ))
            });
            (n, r)
        })
        .collect();
    let mut gaps = Vec::new();
    let mut failures = Vec::new();
    for (n, r) in rows {
        match r {
            Ok((e, g)) => gaps.push((n, inst.epsilon(n), e, g)),
            Err(e) => failures.push((n, e.to_string())),
        }
    }
    Ok(VaryingGapReport {
        instance: inst.id().to_string(),
        family: vseq.name.clone(),
        lambda,
        gaps,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaryingSemigroupReport {
    pub instance: String,
    pub family: String,
    pub t: f64,
    pub n_steps: usize,
    /// Rows `[n, εₙ, sem_gap]`.
    pub gaps: Vec<(usize, f64, f64)>,
}

/// `d(φⁿSⁿ_t ψⁿx, S_t x)`, both semigroups with `n_steps` backward-Euler steps.
pub fn semigroup_ar_check(
    inst: &ArInstance,
    vseq: &VaryingFunctionalSequence,
    x: &Point,
    t: f64,
    grid: &[usize],
    n_steps: usize,
    tol: f64,
) -> Result<VaryingSemigroupReport> {
    let lim = inst.limit()?;
    let base = semigroup_fixed(&lim, &vseq.limit, x, t, n_steps, tol)?;
    let gaps = grid
        .par_iter()
        .map(|&n| {
            let xs = inst.space(n)?;
            let f = vseq.term(n, &xs);
            let s = semigroup_fixed(&xs, &f, &inst.psi(n, x), t, n_steps, tol)?;
            Ok((n, inst.epsilon(n), lim.dist(&inst.phi(n, &s), &base)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VaryingSemigroupReport {
        instance: inst.id().to_string(),
        family: vseq.name.clone(),
        t,
        n_steps,
        gaps,
    })
}
