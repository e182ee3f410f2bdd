//! Convex analysis and gradient flows on Hadamard spaces.
//!
//! The crate provides concrete nonpositively curved backends (Euclidean
//! spaces, weighted inner-product planes, the hyperboloid model, finite
//! metric trees, positive-definite matrices and their products), a catalogue
//! of convex functionals on them, resolvents and Moreau–Yosida envelopes,
//! iterated-resolvent semigroups and the proximal point algorithm, windowed
//! weak-convergence diagnostics, and harnesses that check Mosco-type
//! convergence of resolvents and semigroups on fixed and varying spaces.

pub mod error;
pub mod flows;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod mosco;
pub mod prox;
pub mod search;
pub mod varying;
pub mod weak;

pub use error::{Error, Result};
pub use functionals::{Functional, SequenceWindow};
pub use geometry::{ConvexSet, Isometry, Matrix, MetricTree, Point, Ray, Space, TreePoint};
