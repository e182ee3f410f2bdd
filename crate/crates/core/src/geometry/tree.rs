//! Finite metric trees with precomputed all-pairs node distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

/// A point of a metric tree: either a node or an interior point of an edge,
/// measured from the edge's `u` end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreePoint {
    Node(usize),
    Edge { edge: usize, offset: f64 },
}

/// One straight piece of a tree path: a sub-interval of a single edge.
#[derive(Debug, Clone, Copy)]
struct Piece {
    edge: usize,
    from: f64,
    to: f64,
}

impl Piece {
    fn len(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

#[derive(Debug, Clone)]
pub struct MetricTree {
    labels: Vec<String>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    dist: Vec<f64>,
    next_hop: Vec<usize>,
}

impl PartialEq for MetricTree {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels && self.edges == other.edges
    }
}

impl MetricTree {
    /// Builds and validates a tree: connected, acyclic, positive lengths.
    pub fn new(labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("tree has no nodes"));
        }
        if edges.len() + 1 != n {
            return Err(Error::invalid(format!(
                "a tree on {n} nodes needs {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(Error::invalid(format!("edge {id} references a missing node")));
            }
            if e.u == e.v {
                return Err(Error::invalid(format!("edge {id} is a self-loop")));
            }
            if !(e.length > 0.0 && e.length.is_finite()) {
                return Err(Error::invalid(format!(
                    "edge {id} has non-positive length {}",
                    e.length
                )));
            }
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
        }
        let mut dist = vec![f64::INFINITY; n * n];
        let mut next_hop = vec![usize::MAX; n * n];
        for src in 0..n {
            dist[src * n + src] = 0.0;
            next_hop[src * n + src] = src;
            let mut stack = vec![src];
            while let Some(a) = stack.pop() {
                for &(b, e) in &adjacency[a] {
                    if dist[src * n + b].is_infinite() {
                        dist[src * n + b] = dist[src * n + a] + edges[e].length;
                        next_hop[src * n + b] = if a == src { b } else { next_hop[src * n + a] };
                        stack.push(b);
                    }
                }
            }
        }
        if dist.iter().any(|d| d.is_infinite()) {
            return Err(Error::invalid("tree is not connected"));
        }
        Ok(MetricTree {
            labels,
            edges,
            adjacency,
            dist,
            next_hop,
        })
    }

    /// A star with `legs` edges of the given length; node 0 is the center and
    /// node `i + 1` is the tip of leg (edge) `i`.
    pub fn star(legs: usize, length: f64) -> Result<Self> {
        let labels = std::iter::once("center".to_string())
            .chain((0..legs).map(|i| format!("tip{i}")))
            .collect();
        let edges = (0..legs)
            .map(|i| Edge {
                u: 0,
                v: i + 1,
                length,
            })
            .collect();
        MetricTree::new(labels, edges)
    }

    /// Star with per-leg lengths.
    pub fn star_with_lengths(lengths: &[f64]) -> Result<Self> {
        let labels = std::iter::once("center".to_string())
            .chain((0..lengths.len()).map(|i| format!("tip{i}")))
            .collect();
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &length)| Edge { u: 0, v: i + 1, length })
            .collect();
        MetricTree::new(labels, edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// Incident `(neighbor, edge id)` pairs of a node.
    pub fn incident(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.adjacency[node].len() == 1
    }

    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.node_count() + b]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|(_, e)| *e)
    }

    /// Canonical form: zero and full offsets collapse to the incident node.
    pub fn canonical(&self, p: TreePoint) -> TreePoint {
        match p {
            TreePoint::Edge { edge, offset } => {
                let e = &self.edges[edge];
                if offset <= 0.0 {
                    TreePoint::Node(e.u)
                } else if offset >= e.length {
                    TreePoint::Node(e.v)
                } else {
                    p
                }
            }
            node => node,
        }
    }

    pub fn validate(&self, p: &TreePoint) -> Result<()> {
        match *p {
            TreePoint::Node(n) if n < self.node_count() => Ok(()),
            TreePoint::Node(n) => Err(Error::invalid(format!("node {n} is not in the tree"))),
            TreePoint::Edge { edge, offset } => {
                let e = self
                    .edges
                    .get(edge)
                    .ok_or_else(|| Error::invalid(format!("edge {edge} is not in the tree")))?;
                if !(0.0..=e.length).contains(&offset) {
                    return Err(Error::invalid(format!(
                        "offset {offset} outside [0, {}] on edge {edge}",
                        e.length
                    )));
                }
                Ok(())
            }
        }
    }

    /// Offset of a node along an edge it is incident to.
    fn node_offset(&self, edge: usize, node: usize) -> f64 {
        let e = &self.edges[edge];
        if node == e.u {
            0.0
        } else {
            e.length
        }
    }

    pub fn distance(&self, p: TreePoint, q: TreePoint) -> f64 {
        match (self.canonical(p), self.canonical(q)) {
            (TreePoint::Node(a), TreePoint::Node(b)) => self.node_distance(a, b),
            (TreePoint::Node(a), TreePoint::Edge { edge, offset })
            | (TreePoint::Edge { edge, offset }, TreePoint::Node(a)) => {
                let e = &self.edges[edge];
                (offset + self.node_distance(a, e.u))
                    .min(e.length - offset + self.node_distance(a, e.v))
            }
            (
                TreePoint::Edge { edge: e1, offset: s1 },
                TreePoint::Edge { edge: e2, offset: s2 },
            ) => {
                if e1 == e2 {
                    return (s1 - s2).abs();
                }
                let a = &self.edges[e1];
                let b = &self.edges[e2];
                let ends_a = [(a.u, s1), (a.v, a.length - s1)];
                let ends_b = [(b.u, s2), (b.v, b.length - s2)];
                let mut best = f64::INFINITY;
                for (na, da) in ends_a {
                    for (nb, db) in ends_b {
                        best = best.min(da + self.node_distance(na, nb) + db);
                    }
                }
                best
            }
        }
    }

    /// Pieces of the unique path from `p` to `q`.
    fn path(&self, p: TreePoint, q: TreePoint) -> Vec<Piece> {
        let p = self.canonical(p);
        let q = self.canonical(q);
        if let (TreePoint::Edge { edge: e1, offset: s1 }, TreePoint::Edge { edge: e2, offset: s2 }) =
            (p, q)
        {
            if e1 == e2 {
                return vec![Piece {
                    edge: e1,
                    from: s1,
                    to: s2,
                }];
            }
        }
        // Endpoint nodes through which the path leaves p and enters q.
        let exits = |x: TreePoint| -> Vec<(usize, Option<Piece>)> {
            match x {
                TreePoint::Node(n) => vec![(n, None)],
                TreePoint::Edge { edge, offset } => {
                    let e = &self.edges[edge];
                    vec![
                        (
                            e.u,
                            Some(Piece {
                                edge,
                                from: offset,
                                to: 0.0,
                            }),
                        ),
                        (
                            e.v,
                            Some(Piece {
                                edge,
                                from: offset,
                                to: e.length,
                            }),
                        ),
                    ]
                }
            }
        };
        let mut best: Option<(f64, usize, Option<Piece>, usize, Option<Piece>)> = None;
        for (na, pa) in exits(p) {
            for (nb, pb) in exits(q) {
                let len = pa.map_or(0.0, |x| x.len())
                    + self.node_distance(na, nb)
                    + pb.map_or(0.0, |x| x.len());
                if best.as_ref().is_none_or(|b| len < b.0) {
                    best = Some((len, na, pa, nb, pb));
                }
            }
        }
        let (_, na, pa, nb, pb) = best.expect("tree endpoints");
        let mut pieces = Vec::new();
        if let Some(piece) = pa {
            pieces.push(piece);
        }
        let mut cur = na;
        let n = self.node_count();
        while cur != nb {
            let nxt = self.next_hop[cur * n + nb];
            let edge = self.edge_between(cur, nxt).expect("adjacent nodes share an edge");
            pieces.push(Piece {
                edge,
                from: self.node_offset(edge, cur),
                to: self.node_offset(edge, nxt),
            });
            cur = nxt;
        }
        if let Some(piece) = pb {
            // Reverse the exit piece of q so it runs toward q.
            pieces.push(Piece {
                edge: piece.edge,
                from: piece.to,
                to: piece.from,
            });
        }
        pieces.retain(|piece| piece.len() > 0.0);
        pieces
    }

    /// The point at arc length `s` from `p` along the path to `q`.
    pub fn walk(&self, p: TreePoint, q: TreePoint, s: f64) -> TreePoint {
        let mut remaining = s.max(0.0);
        let pieces = self.path(p, q);
        for piece in &pieces {
            let len = piece.len();
            if remaining <= len {
                let dir = (piece.to - piece.from).signum();
                return self.canonical(TreePoint::Edge {
                    edge: piece.edge,
                    offset: piece.from + dir * remaining,
                });
            }
            remaining -= len;
        }
        self.canonical(q)
    }

    /// Exact projection of `p` onto the geodesic `[a, b]`, returned as the
    /// arc length from `a`.
    pub fn project_to_path(&self, p: TreePoint, a: TreePoint, b: TreePoint) -> f64 {
        let dab = self.distance(a, b);
        if dab == 0.0 {
            return 0.0;
        }
        let s = 0.5 * (self.distance(a, p) + dab - self.distance(b, p));
        s.clamp(0.0, dab)
    }

    /// Virtual line coordinate of `a` relative to an edge: for every offset
    /// `s` on the edge, `d(point(edge, s), a) = |s − coordinate|`.
    pub fn edge_coordinate(&self, edge: usize, a: TreePoint) -> f64 {
        let e = &self.edges[edge];
        match self.canonical(a) {
            TreePoint::Edge { edge: ea, offset } if ea == edge => offset,
            TreePoint::Node(n) if n == e.u => 0.0,
            TreePoint::Node(n) if n == e.v => e.length,
            other => {
                let du = self.distance(TreePoint::Node(e.u), other);
                let dv = self.distance(TreePoint::Node(e.v), other);
                if du <= dv {
                    -du
                } else {
                    e.length + dv
                }
            }
        }
    }

    /// Whether `q` lies within `tol` of the path `[a, b]`.
    pub fn on_path(&self, q: TreePoint, a: TreePoint, b: TreePoint, tol: f64) -> bool {
        (self.distance(a, q) + self.distance(q, b) - self.distance(a, b)).abs() <= tol
    }
}
