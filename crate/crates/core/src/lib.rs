//! Factor-graph back-end for SLAM in dynamic scenes.
//!
//! Two families of formulation share one solver:
//!
//! * **world-centric** — dynamic points are re-estimated at every step in the
//!   world frame and tied together by per-object rigid motions `H`;
//! * **object-centric** — each object carries a pose trajectory `L` and its points
//!   are estimated once in the object frame.
//!
//! Graphs are built from a [`SceneDataset`](dataset::SceneDataset), optimized with
//! Levenberg–Marquardt ([`solver`]) and scored with relative pose error ([`eval`]).

pub mod builders;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod factors;
pub mod graph;
pub mod io;
pub mod se3;
pub mod sim;
pub mod solver;
pub mod sparse;

pub use dataset::SceneDataset;
pub use error::{Error, Result};
pub use factors::{Factor, FactorKind};
pub use graph::{FactorGraph, NoiseModel, Values, Variable, VariableKey};
pub use se3::{Point3, Pose, Twist};
