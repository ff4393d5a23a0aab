//! Hierarchical causal structure learning for two-level (group/unit) data.
//!
//! The crate is `no_std` and only needs `alloc`. It contains the statistical
//! machinery end to end:
//!
//! * [`graph`]: leveled DAGs, topological order and the structural Hamming distance.
//! * [`gam`]: penalized B-spline additive regression with REML or GCV smoothing selection,
//!   ridge-penalized group intercepts and per-term significance tests.
//! * [`cam`]: the three-stage causal additive model learner.
//! * [`hscm`]: hierarchical estimation across group and unit levels.
//! * [`intervene`]: simulation of hard interventions.
//! * [`simgen`]: the synthetic benchmark generator and evaluation loop.
//!
//! File formats, the command line and parallel benchmark orchestration live in
//! the companion `hscm` crate.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod cam;
pub mod data;
pub mod error;
pub mod gam;
pub mod graph;
pub mod hscm;
pub mod intervene;
pub mod linalg;
pub mod rng;
pub mod simgen;
pub mod special;
pub mod stats;

pub use cam::{cam, CamConfig};
pub use data::HierDataset;
pub use error::{Error, Result};
pub use gam::{fit_additive, AdditiveFit, Predictor, SmoothSpec, TermKind};
pub use graph::{shd, Dag, Level, NodeId};
pub use hscm::{estimate, function_rmse, EstimateOptions, HscmModel};
pub use intervene::{do_intervention, simulate, InterventionRequest, InterventionResult, OutcomeLevel};
pub use simgen::{gen_dag, gen_data, generate, run_benchmark, run_replicate, GroundTruth, NoiseFamily, SimConfig};
