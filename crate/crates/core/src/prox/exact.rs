//! Closed-form resolvents of single catalogue terms.

use crate::error::Result;
use crate::functionals::Functional;
use crate::geometry::{Isometry, Matrix, Point, Ray, Space, Tangent};
use crate::search::bisect_increasing;

/// Resolvent of `c·atom` when a closed form exists.
pub(super) fn single(space: &Space, atom: &Functional, c: f64, x: &Point, lambda: f64) -> Result<Option<Point>> {
    let lam = c * lambda;
    Ok(match atom {
        Functional::Indicator(set) => Some(set.project(space, x)),
        Functional::SquaredDistance { anchor, weight } => {
            let s = lam * weight;
            Some(space.geodesic(x, anchor, s / (1.0 + s)))
        }
        Functional::Distance { anchor, weight } => Some(space.step_toward(x, anchor, lam * weight)),
        Functional::Busemann(ray) => busemann(space, &ray.normalized(space)?, x, lam),
        Functional::Displacement(Isometry::EuclideanRigid { q, v }) if space.is_flat_euclidean() => {
            Some(Point::Vector(rigid_displacement(q, v, x.as_vector().expect("vector"), lam)))
        }
        Functional::Custom(custom) => custom.exact_resolvent(space, x, lam),
        _ => None,
    })
}

/// A Busemann function decreases at unit rate exactly along geodesics
/// heading to its point at infinity, so the resolvent moves `λ` that way.
fn busemann(space: &Space, ray: &Ray, x: &Point, lam: f64) -> Option<Point> {
    match (ray, space) {
        (Ray::Toward { leaf, .. }, Space::Tree(_)) => Some(space.step_toward(x, &Point::node(*leaf), lam)),
        (Ray::Directed { direction, .. }, Space::Euclidean { .. } | Space::PdNorm { .. }) => {
            Some(space.exp_map(x, &Tangent::Vector(direction.iter().map(|u| lam * u).collect())))
        }
        (Ray::Directed { base, direction }, Space::Hyperboloid { .. }) => {
            let o = base.as_vector()?;
            let y = x.as_vector()?;
            let null: Vec<f64> = o.iter().zip(direction).map(|(a, b)| a + b).collect();
            let scale = Space::lorentz_form(y, &null);
            let v: Vec<f64> = null.iter().zip(y).map(|(n, p)| lam * (n / scale - p)).collect();
            Some(space.exp_map(x, &Tangent::Vector(v)))
        }
        _ => None,
    }
}

/// Resolvent of `λ|Ay − v|` with `A = I − Q` on Euclidean space.
///
/// By duality `y = x − λAᵀs`, where `s` minimizes `½λ|Aᵀs|² − ⟨s, b⟩`
/// over the unit ball and `b = Ax − v`: a trust-region subproblem solved in
/// the eigenbasis of `AAᵀ` by bisection on the multiplier.
pub(super) fn rigid_displacement(q: &Matrix, v: &[f64], x: &[f64], lam: f64) -> Vec<f64> {
    let n = x.len();
    let a = &Matrix::identity(n) - q;
    let at = a.transpose();
    let ax = a.mul_vec(x);
    let b: Vec<f64> = ax.iter().zip(v).map(|(p, t)| p - t).collect();
    let eig = (&a * &at).sym_eigen();
    let top = eig.values.iter().cloned().fold(0.0, f64::max).max(1.0);
    let coeffs: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|r| eig.vectors[(r, i)] * b[r]).sum())
        .collect();
    let bnorm = b.iter().map(|t| t * t).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return x.to_vec();
    }
    let curv: Vec<f64> = eig.values.iter().map(|s| lam * s.max(0.0)).collect();
    let degenerate = |i: usize| eig.values[i] <= 1e-14 * top;
    let s_norm = |mu: f64| -> f64 {
        (0..n)
            .map(|i| {
                let den = curv[i] + mu;
                if den == 0.0 {
                    0.0
                } else {
                    (coeffs[i] / den).powi(2)
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    let unconstrained_ok = (0..n).all(|i| !degenerate(i) || coeffs[i].abs() <= 1e-14 * (1.0 + bnorm));
    let mu = if unconstrained_ok && s_norm(0.0) <= 1.0 {
        0.0
    } else {
        bisect_increasing(|mu| 1.0 - s_norm(mu), 0.0, bnorm, 200)
    };
    let s_eig: Vec<f64> = (0..n)
        .map(|i| {
            let den = curv[i] + mu;
            if den == 0.0 || (mu == 0.0 && degenerate(i)) {
                0.0
            } else {
                coeffs[i] / den
            }
        })
        .collect();
    let s: Vec<f64> = (0..n)
        .map(|r| (0..n).map(|i| eig.vectors[(r, i)] * s_eig[i]).sum())
        .collect();
    let step = at.mul_vec(&s);
    x.iter().zip(step).map(|(p, g)| p - lam * g).collect()
}
