//! Ground-truth optimal topologies for ad-hoc robot networks and a
//! per-robot stacked-ensemble predictor trained on them.
//!
//! The crate is organised bottom-up:
//!
//! * [`netmodel`] places robots and classifies their links,
//! * [`generator`] samples random connected configurations,
//! * [`topology`] computes the optimal backbone cycle and branch forest,
//! * [`dataset`] turns configurations into labeled rows,
//! * [`learners`] holds the three base classifiers,
//! * [`ensemble`] stacks them under a boosted-tree blender, one per robot.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod generator;
pub mod learners;
pub mod netmodel;
pub mod topology;

pub use ensemble::{OpTopNet, StackedEnsemble};
pub use error::{Error, Result};
pub use netmodel::{LinkClass, NetworkGraph, NetworkParams, Robot, RobotNetwork};
pub use topology::{ClusterAssignment, Topology};
