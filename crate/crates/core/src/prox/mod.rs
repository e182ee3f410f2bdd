//! Resolvents, Moreau–Yosida envelopes and slope estimates.
//!
//! `resolvent` dispatches to a closed form when the functional has one and
//! otherwise to the most specific exact solver for the backend: per-edge
//! piecewise-quadratic minimization on trees and the real line, a
//! majorize–minimize iteration for distance sums on Riemannian backends, and
//! cyclic proximal splitting as the last resort.

mod exact;
mod line;
mod riemannian;
mod splitting;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::geometry::{Point, Space};

/// Output of a resolvent evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxResult {
    pub point: Point,
    /// `f(point) + d(x, point)²/(2λ)`.
    pub objective: f64,
    /// Smallest value of `g(z) − g(point) − d(point, z)²/(2λ)` over probe
    /// points `z`; nonnegative at the exact resolvent.
    pub growth_gap: f64,
    pub iterations: usize,
}

/// `10⁻⁸·(1 + r)` where `r` is the largest distance from `x` to an anchor.
pub fn default_tol(space: &Space, f: &Functional, x: &Point) -> f64 {
    let scale = anchors(f)
        .iter()
        .map(|a| space.dist(x, a))
        .fold(0.0, f64::max);
    1e-8 * (1.0 + scale)
}

fn anchors(f: &Functional) -> Vec<Point> {
    f.atoms()
        .into_iter()
        .filter_map(|(a, _)| match a {
            Functional::Distance { anchor, .. } | Functional::SquaredDistance { anchor, .. } => Some(anchor),
            _ => None,
        })
        .collect()
}

/// `J_λ x`, the minimizer of `y ↦ f(y) + d(x, y)²/(2λ)`.
pub fn resolvent(space: &Space, f: &Functional, x: &Point, lambda: f64, tol: f64) -> Result<ProxResult> {
    space.validate(x)?;
    f.check(space)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("λ = {lambda} must be finite and nonnegative")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if lambda == 0.0 {
        return Ok(ProxResult {
            point: x.clone(),
            objective: f.value(space, x),
            growth_gap: 0.0,
            iterations: 0,
        });
    }
    let (point, iterations) = solve(space, f, x, lambda, tol)?;
    let point = space.normalize(point);
    let objective = prox_objective(space, f, x, lambda, &point);
    if !objective.is_finite() {
        return Err(Error::invalid("functional is identically +∞ near the input"));
    }
    let growth_gap = growth_gap(space, f, x, lambda, &point, objective);
    Ok(ProxResult {
        point,
        objective,
        growth_gap,
        iterations,
    })
}

/// Resolvent point only, with the default tolerance.
pub fn resolve(space: &Space, f: &Functional, x: &Point, lambda: f64) -> Result<Point> {
    resolvent(space, f, x, lambda, default_tol(space, f, x)).map(|r| r.point)
}

fn solve(space: &Space, f: &Functional, x: &Point, lambda: f64, tol: f64) -> Result<(Point, usize)> {
    let atoms = f.atoms();
    if let [(atom, c)] = atoms.as_slice() {
        if let Some(p) = exact::single(space, atom, *c, x, lambda)? {
            return Ok((p, 1));
        }
    }
    match space {
        Space::Tree(tree) => line::tree_resolvent(space, tree, &atoms, x, lambda),
        Space::Euclidean { dim: 1 } => line::real_line_resolvent(space, &atoms, x, lambda),
        _ if riemannian::applies(space, &atoms) => riemannian::resolvent(space, &atoms, x, lambda, tol),
        _ => splitting::resolvent(space, f, &atoms, x, lambda, tol),
    }
}

pub(crate) fn prox_objective(space: &Space, f: &Functional, x: &Point, lambda: f64, y: &Point) -> f64 {
    f.value(space, y) + space.dist(x, y).powi(2) / (2.0 * lambda)
}

/// Deterministic probe points around `p` used by the growth certificate.
pub(crate) fn probes(space: &Space, f: &Functional, x: &Point, p: &Point, radius: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut out = vec![x.clone(), space.geodesic(p, x, 0.5)];
    for a in anchors(f) {
        out.push(space.geodesic(p, &a, 0.5));
        out.push(a);
    }
    for _ in 0..8 {
        out.push(space.sample_near(&mut rng, p, radius));
    }
    out
}

fn growth_gap(space: &Space, f: &Functional, x: &Point, lambda: f64, p: &Point, gp: f64) -> f64 {
    let radius = (0.25 * space.dist(x, p)).max(1e-3);
    let gap = probes(space, f, x, p, radius)
        .iter()
        .map(|z| prox_objective(space, f, x, lambda, z) - gp - space.dist(p, z).powi(2) / (2.0 * lambda))
        .filter(|g| !g.is_nan())
        .fold(f64::INFINITY, f64::min);
    // Every probe off the domain: nothing to report.
    if gap.is_finite() {
        gap
    } else {
        0.0
    }
}

/// `f_λ(x)`, with `f₀ = f`.
pub fn moreau_envelope(space: &Space, f: &Functional, x: &Point, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("λ = {lambda} must be nonnegative")));
    }
    if lambda == 0.0 {
        return f.eval(space, x);
    }
    Ok(resolvent(space, f, x, lambda, default_tol(space, f, x))?.objective)
}

/// `d(x, J_λx)/λ`, an upper bound for the slope at `J_λx`.
pub fn slope_upper(space: &Space, f: &Functional, x: &Point, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("slope estimate needs λ > 0"));
    }
    let j = resolve(space, f, x, lambda)?;
    Ok(space.dist(x, &j) / lambda)
}

/// Residuals of `d²/λ² ≤ 2(f − f_λ)/λ ≤ |∂f|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSlack {
    /// `2(f(x) − f_λ(x))/λ − d(x, J_λx)²/λ²`.
    pub s1: f64,
    /// `|∂f|(x)² − 2(f(x) − f_λ(x))/λ`, when a slope formula is registered.
    pub s2: Option<f64>,
}

pub fn envelope_chain_slack(space: &Space, f: &Functional, x: &Point, lambda: f64) -> Result<ChainSlack> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("chain slack needs λ > 0"));
    }
    let fx = f.eval(space, x)?;
    if !fx.is_finite() {
        return Err(Error::invalid("functional is infinite at x"));
    }
    let r = resolvent(space, f, x, lambda, default_tol(space, f, x))?;
    let d = space.dist(x, &r.point);
    let middle = 2.0 * (fx - r.objective) / lambda;
    Ok(ChainSlack {
        s1: middle - d * d / (lambda * lambda),
        s2: f.known_slope(space, x).map(|s| s * s - middle),
    })
}

#[cfg(test)]
mod tests;
