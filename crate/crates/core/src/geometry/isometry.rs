use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use super::space::{Point, Space};
use super::tree::TreePoint;
use crate::error::{Error, Result};

const ISOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Isometry {
    /// `x ↦ Qx + v`.
    EuclideanRigid { q: Matrix, v: Vec<f64> },
    /// Node permutation preserving edges and their lengths.
    TreeAutomorphism { perm: Vec<usize> },
    /// Linear map preserving the Lorentz form and the upper sheet.
    HyperbolicLorentz { matrix: Matrix },
    /// `X ↦ G X Gᵀ`.
    SpdCongruence { g: Matrix },
}

impl Isometry {
    pub fn euclidean_rigid(q: Matrix, v: Vec<f64>) -> Result<Self> {
        let iso = Isometry::EuclideanRigid { q, v };
        iso.check_shape()?;
        Ok(iso)
    }

    pub fn translation(v: Vec<f64>) -> Self {
        Isometry::EuclideanRigid {
            q: Matrix::identity(v.len()),
            v,
        }
    }

    pub fn rotation2(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Isometry::EuclideanRigid {
            q: Matrix::from_rows(&[vec![c, -s], vec![s, c]]).expect("2x2"),
            v: vec![0.0, 0.0],
        }
    }

    /// Boost of rapidity `r` mixing the time axis with spatial axis `axis`.
    pub fn lorentz_boost(dim: usize, axis: usize, r: f64) -> Self {
        let mut m = Matrix::identity(dim + 1);
        let (c, s) = (r.cosh(), r.sinh());
        m[(0, 0)] = c;
        m[(axis, axis)] = c;
        m[(0, axis)] = s;
        m[(axis, 0)] = s;
        Isometry::HyperbolicLorentz { matrix: m }
    }

    pub fn spd_congruence(g: Matrix) -> Result<Self> {
        let iso = Isometry::SpdCongruence { g };
        iso.check_shape()?;
        Ok(iso)
    }

    /// Space-independent checks: orthogonality, Lorentz property, invertibility.
    fn check_shape(&self) -> Result<()> {
        match self {
            Isometry::EuclideanRigid { q, v } => {
                if !q.is_square() || q.rows() != v.len() {
                    return Err(Error::invalid("rigid motion needs a square Q matching v"));
                }
                let defect = (&(&q.transpose() * q) - &Matrix::identity(q.rows())).frobenius();
                if defect > ISOMETRY_TOL {
                    return Err(Error::invalid(format!("Q is not orthogonal (defect {defect:e})")));
                }
            }
            Isometry::TreeAutomorphism { perm } => {
                let mut seen = vec![false; perm.len()];
                for &p in perm {
                    if p >= perm.len() || seen[p] {
                        return Err(Error::invalid("tree automorphism is not a permutation"));
                    }
                    seen[p] = true;
                }
            }
            Isometry::HyperbolicLorentz { matrix } => {
                if !matrix.is_square() || matrix.rows() < 2 {
                    return Err(Error::invalid("Lorentz matrix must be square"));
                }
                let n = matrix.rows();
                let mut j = Matrix::identity(n).scale(-1.0);
                j[(0, 0)] = 1.0;
                let defect = (&(&(&matrix.transpose() * &j) * matrix) - &j).frobenius();
                if defect > ISOMETRY_TOL * matrix.frobenius().powi(2).max(1.0) {
                    return Err(Error::invalid(format!(
                        "matrix does not preserve the Lorentz form (defect {defect:e})"
                    )));
                }
                if matrix[(0, 0)] <= 0.0 {
                    return Err(Error::invalid("Lorentz matrix swaps the sheets"));
                }
            }
            Isometry::SpdCongruence { g } => {
                if !g.is_square() {
                    return Err(Error::invalid("congruence matrix must be square"));
                }
                let det = g.determinant();
                if !(det.abs() > 1e-12) {
                    return Err(Error::invalid("congruence matrix is singular"));
                }
            }
        }
        Ok(())
    }

    /// Checks that this isometry acts on `space`.
    pub fn validate_for(&self, space: &Space) -> Result<()> {
        self.check_shape()?;
        match (self, space) {
            (Isometry::EuclideanRigid { v, .. }, Space::Euclidean { dim }) if v.len() == *dim => Ok(()),
            (Isometry::TreeAutomorphism { perm }, Space::Tree(tree)) => {
                if perm.len() != tree.node_count() {
                    return Err(Error::invalid("permutation size differs from node count"));
                }
                for e in tree.edges() {
                    let image = tree
                        .edge_between(perm[e.u], perm[e.v])
                        .ok_or_else(|| Error::invalid("permutation does not preserve edges"))?;
                    if (tree.edge(image).length - e.length).abs() > ISOMETRY_TOL * e.length {
                        return Err(Error::invalid("permutation does not preserve edge lengths"));
                    }
                }
                Ok(())
            }
            (Isometry::HyperbolicLorentz { matrix }, Space::Hyperboloid { dim })
                if matrix.rows() == dim + 1 =>
            {
                Ok(())
            }
            (Isometry::SpdCongruence { g }, Space::Spd { n }) if g.rows() == *n => Ok(()),
            _ => Err(Error::invalid(format!(
                "isometry does not act on a {} space of this size",
                space.name()
            ))),
        }
    }

    /// Applies the isometry to a validated point.
    pub fn apply(&self, space: &Space, x: &Point) -> Point {
        match (self, x) {
            (Isometry::EuclideanRigid { q, v }, Point::Vector(a)) => {
                Point::Vector(q.mul_vec(a).iter().zip(v).map(|(p, t)| p + t).collect())
            }
            (Isometry::TreeAutomorphism { perm }, Point::Tree(p)) => {
                let tree = space.as_tree().expect("tree space");
                Point::Tree(match *p {
                    TreePoint::Node(n) => TreePoint::Node(perm[n]),
                    TreePoint::Edge { edge, offset } => {
                        let e = tree.edge(edge);
                        let image = tree
                            .edge_between(perm[e.u], perm[e.v])
                            .expect("validated automorphism");
                        let ie = tree.edge(image);
                        let offset = if ie.u == perm[e.u] {
                            offset
                        } else {
                            ie.length - offset
                        };
                        tree.canonical(TreePoint::Edge { edge: image, offset })
                    }
                })
            }
            (Isometry::HyperbolicLorentz { matrix }, Point::Vector(a)) => {
                space.normalize(Point::Vector(matrix.mul_vec(a)))
            }
            (Isometry::SpdCongruence { g }, Point::Matrix(a)) => Point::Matrix(a.congruence(g)),
            _ => panic!("isometry does not act on this point"),
        }
    }
}
