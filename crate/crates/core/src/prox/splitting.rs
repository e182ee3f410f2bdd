//! Cyclic proximal splitting: the fallback for sums whose terms each have a
//! closed-form resolvent but no joint exact solver applies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{exact, prox_objective};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::geometry::{Point, Space};

const MAX_TERM_STEPS: usize = 1_000_000;

pub(super) fn resolvent(
    space: &Space,
    f: &Functional,
    atoms: &[(Functional, f64)],
    x: &Point,
    lambda: f64,
    tol: f64,
) -> Result<(Point, usize)> {
    // Fail early if some term has no closed-form resolvent here.
    for (atom, c) in atoms {
        if exact::single(space, atom, *c, x, 1.0)?.is_none() {
            return Err(Error::unsupported(format!(
                "no resolvent for {} on {} space",
                describe(atom),
                space.name()
            )));
        }
    }
    if matches!(space, Space::Euclidean { .. } | Space::PdNorm { .. }) {
        return parallel(space, atoms, x, lambda, tol);
    }
    // Indicators go last so each sweep ends in the domain.
    let mut atoms = atoms.to_vec();
    atoms.sort_by_key(|(a, _)| matches!(a, Functional::Indicator(_)));
    let quad = Functional::squared_distance(x.clone(), 1.0 / lambda);
    let g = |y: &Point| prox_objective(space, f, x, lambda, y);
    let threshold = tol * tol / (2.0 * lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut y = x.clone();
    let mut best = (g(&y), y.clone());
    let mut steps = 0;
    let mut sweep = 1usize;
    while steps < MAX_TERM_STEPS {
        let mu = lambda / sweep as f64;
        let previous = y.clone();
        y = space.normalize(exact::single(space, &quad, 1.0, &y, mu)?.expect("closed form"));
        steps += 1;
        for (atom, c) in &atoms {
            y = space.normalize(exact::single(space, atom, *c, &y, mu)?.expect("checked above"));
            steps += 1;
        }
        let gy = g(&y);
        if gy < best.0 {
            best = (gy, y.clone());
        }
        if best.0.is_finite() {
            let radius = 0.25 * space.dist(x, &best.1);
            let mut worst = f64::INFINITY;
            for _ in 0..8 {
                let z = space.sample_near(&mut rng, &best.1, radius);
                worst = worst.min(g(&z) - best.0 - space.dist(&best.1, &z).powi(2) / (2.0 * lambda));
            }
            // Probes alone can miss a descent direction; also require the
            // sweep to have stalled.
            if sweep > 1 && worst >= -threshold && space.dist(&previous, &y) <= tol {
                return Ok((best.1, steps));
            }
        }
        sweep += 1;
    }
    Err(Error::solver("proximal splitting hit its step cap", Some(best.1), f64::NAN))
}

/// Parallel Douglas–Rachford on a linear space. The prox term is split
/// evenly over the atoms, so each one stays strongly convex and the fixed
/// step converges without the bias of cyclic splitting.
fn parallel(space: &Space, atoms: &[(Functional, f64)], x: &Point, lambda: f64, tol: f64) -> Result<(Point, usize)> {
    let x = x.as_vector().expect("vector point").to_vec();
    let m = atoms.len() as f64;
    let gamma = m * lambda;
    let share = 1.0 / (lambda * m);
    let a = share + 1.0 / gamma;
    let prox = |atom: &Functional, c: f64, z: &[f64]| -> Result<Vec<f64>> {
        let center: Vec<f64> = x.iter().zip(z).map(|(xi, zi)| (share * xi + zi / gamma) / a).collect();
        let p = exact::single(space, atom, c, &Point::vector(center), 1.0 / a)?.expect("checked by caller");
        Ok(p.as_vector().expect("vector point").to_vec())
    };
    let norm = |u: &[f64], v: &[f64]| space.dist(&Point::vector(u.to_vec()), &Point::vector(v.to_vec()));
    let mut z = vec![x.clone(); atoms.len()];
    let mut y = x.clone();
    for it in 1..=MAX_TERM_STEPS / atoms.len() {
        let ps = atoms.iter().zip(&z).map(|((atom, c), zi)| prox(atom, *c, zi)).collect::<Result<Vec<_>>>()?;
        let mut p = vec![0.0; x.len()];
        for pi in &ps {
            for (pk, v) in p.iter_mut().zip(pi) {
                *pk += v / m;
            }
        }
        for (zi, pi) in z.iter_mut().zip(&ps) {
            for k in 0..zi.len() {
                zi[k] += 2.0 * p[k] - y[k] - pi[k];
            }
        }
        let moved = norm(&p, &y);
        let spread = ps.iter().map(|pi| norm(pi, &p)).fold(0.0, f64::max);
        y = p;
        if moved <= 1e-3 * tol && spread <= 1e-3 * tol {
            // An indicator's own prox output is feasible; prefer it.
            let out = atoms
                .iter()
                .position(|(a, _)| matches!(a, Functional::Indicator(_)))
                .map_or(y, |i| ps[i].clone());
            return Ok((Point::vector(out), it * atoms.len()));
        }
    }
    Err(Error::solver("proximal splitting hit its step cap", Some(Point::vector(y)), f64::NAN))
}

fn describe(f: &Functional) -> &'static str {
    match f {
        Functional::SquaredDistance { .. } => "squared distance",
        Functional::Distance { .. } => "distance",
        Functional::WeightedSum { .. } => "weighted sum",
        Functional::Indicator(_) => "indicator",
        Functional::Busemann(_) => "Busemann function",
        Functional::Displacement(_) => "displacement function",
        Functional::Custom(_) => "custom functional",
    }
}
