use serde::{Deserialize, Serialize};

use super::space::{Point, Space, Tangent};
use crate::error::{Error, Result};

/// Unit-speed geodesic ray.
///
/// On a finite tree a ray runs from `base` to a leaf and continues as a
/// formal extension of the leaf edge; only its Busemann function is used
/// beyond the leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ray {
    Toward { base: Point, leaf: usize },
    Directed { base: Point, direction: Vec<f64> },
}

impl Ray {
    pub fn base(&self) -> &Point {
        match self {
            Ray::Toward { base, .. } | Ray::Directed { base, .. } => base,
        }
    }

    /// Validates against `space` and returns the ray with a unit direction.
    pub fn normalized(&self, space: &Space) -> Result<Ray> {
        space.validate(self.base())?;
        match (self, space) {
            (Ray::Toward { base, leaf }, Space::Tree(tree)) => {
                if *leaf >= tree.node_count() || !tree.is_leaf(*leaf) {
                    return Err(Error::invalid(format!("ray target {leaf} is not a leaf")));
                }
                if space.dist(base, &Point::node(*leaf)) == 0.0 {
                    return Err(Error::invalid("ray base coincides with its leaf"));
                }
                Ok(self.clone())
            }
            (
                Ray::Directed { base, direction },
                Space::Euclidean { .. } | Space::PdNorm { .. } | Space::Hyperboloid { .. },
            ) => {
                let x = base.as_vector().expect("validated vector point");
                if direction.len() != x.len() || direction.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("ray direction has the wrong length"));
                }
                let mut u = direction.clone();
                if let Space::Hyperboloid { .. } = space {
                    // Project onto the tangent space at the base.
                    let c = Space::lorentz_form(x, &u);
                    for (ui, xi) in u.iter_mut().zip(x) {
                        *ui -= c * xi;
                    }
                }
                let norm = space.tangent_norm(base, &Tangent::Vector(u.clone()));
                if !(norm > 0.0) {
                    return Err(Error::invalid("ray direction is zero"));
                }
                Ok(Ray::Directed {
                    base: base.clone(),
                    direction: u.iter().map(|v| v / norm).collect(),
                })
            }
            _ => Err(Error::unsupported(format!(
                "rays are not available on {} spaces",
                space.name()
            ))),
        }
    }

    /// `c(t)` for a normalized ray. On trees, `t` past the leaf is an error.
    pub fn at(&self, space: &Space, t: f64) -> Result<Point> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("ray parameter {t} is negative")));
        }
        match self {
            Ray::Toward { base, leaf } => {
                let tip = Point::node(*leaf);
                let reach = space.dist(base, &tip);
                if t > reach * (1.0 + 1e-12) {
                    return Err(Error::domain(format!(
                        "t = {t} lies on the formal extension past leaf {leaf}"
                    )));
                }
                Ok(space.step_toward(base, &tip, t))
            }
            Ray::Directed { base, direction } => {
                Ok(space.exp_map(base, &Tangent::Vector(direction.iter().map(|v| v * t).collect())))
            }
        }
    }

    /// Busemann function `lim d(x, c(t)) − t` of a normalized ray.
    pub fn busemann(&self, space: &Space, x: &Point) -> f64 {
        match (self, space) {
            (Ray::Toward { base, leaf }, _) => {
                let tip = Point::node(*leaf);
                space.dist(x, &tip) - space.dist(base, &tip)
            }
            (Ray::Directed { base, direction }, Space::Hyperboloid { .. }) => {
                let o = base.as_vector().expect("vector");
                let null: Vec<f64> = o.iter().zip(direction).map(|(a, b)| a + b).collect();
                Space::lorentz_form(x.as_vector().expect("vector"), &null).ln()
            }
            (Ray::Directed { base, direction }, _) => {
                let diff = space.log_map(base, x);
                -space.inner(base, &diff, &Tangent::Vector(direction.clone()))
            }
        }
    }
}
