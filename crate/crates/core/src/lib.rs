//! Generalized total variation (GTV) minimization for networked federated
//! learning.
//!
//! Nodes of an [`EmpiricalGraph`] carry local datasets and local losses; the
//! solver learns one parameter vector per node by minimizing the sum of local
//! losses plus a GTV penalty that couples neighbours:
//!
//! ```text
//! min_w  Σᵢ ℓᵢ(wᵢ) + λ Σ_{e={i,j}} A_e φ(wᵢ − wⱼ)
//! ```
//!
//! Node and edge indices in the library API are 0-based. The on-disk file
//! formats in [`io`] use 1-based node ids.

pub mod analysis;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod penalties;
pub mod solver;

pub use analysis::Partition;
pub use error::{GtvError, Result};
pub use graph::{Edge, EdgeField, EmpiricalGraph, NodeField};
pub use losses::{LocalDataset, LocalLoss, LossKind};
pub use penalties::GtvPenalty;
pub use solver::{solve, SolveResult, SolverConfig, StopReason};
