//! Core algorithms for robustness-preserving graph compression.
//!
//! The crate is organized around a pipeline that trains two cooperating
//! DQN agents on a graph — a vital-node detector and a redundancy
//! detector — and uses the latter to delete nodes while keeping the
//! graph's degradation behavior under targeted attacks close to the
//! original. Everything here is pure computation over in-memory data:
//! the crate is `no_std` (with `alloc`) and all file formats, CSV
//! emission, and CLI plumbing live in the companion `cutter-cli` crate.
//!
//! Module map:
//! - [`graph`]: immutable graph snapshots, connected components,
//!   pairwise connectivity, logical node deletion.
//! - [`centrality`] / [`attack`]: the six node-ranking attack
//!   strategies and the progressive-removal attack executor.
//! - [`nn`]: dense tensors, a reverse-mode tape, Adam, checkpoints.
//! - [`models`]: shared/task-specific graph encoders, Q decoders,
//!   reward networks, and the prototype window encoder.
//! - [`rl`]: the node-removal MDP, epsilon-greedy rollouts, replay,
//!   and DQN updates.
//! - [`shaping`]: true returns, affine return alignment, and
//!   prototype-constrained reward shaping.
//! - [`explore`]: the two-phase active–follow protocol coupling the
//!   agents.
//! - [`eval`]: degradation curves, robustness-preservation scores, and
//!   topological fidelity metrics.
//! - [`trainer`]: the end-to-end training loop and greedy compression.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attack;
pub mod centrality;
pub mod eval;
pub mod explore;
pub mod generate;
pub mod graph;
pub mod models;
pub mod nn;
pub mod rl;
pub mod rng;
pub mod shaping;
pub mod trainer;

#[cfg(feature = "testkit")]
pub mod testkit;

pub(crate) mod util;

pub use attack::{AttackPlan, AttackSchedule, AttackStrategy, DegradationCurve, GraphTag};
pub use graph::{ComponentLabeling, CompressionSpec, Graph, GraphError};
pub use models::{AgentKind, CutterModel, ModelDims};
pub use rl::{EnvState, EpsilonSchedule, ReplayBuffer, TrajectoryRecord, TrajectorySource};
pub use shaping::{AffineCalibrator, PenaltyWeights, PrototypePair, ShapingConfig};
pub use trainer::{TrainConfig, TrainResult, Trainer};
