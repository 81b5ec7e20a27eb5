//! Quaternion knowledge-graph embeddings with relation-aware rotations.
//!
//! Entities and relations live in `H^n`. A triple `(h, r, t)` is scored by
//! rotating the head with a per-relation unit quaternion, rotating again by the
//! normalized relation embedding, rotating the tail with a second per-relation
//! unit quaternion, and taking the quaternion inner product of the two sides:
//!
//! ```text
//! f(h, r, t) = ((v_h ⊗ w1◁) ⊗ v_r◁) • (v_t ⊗ w2◁)
//! ```
//!
//! Setting both rotation vectors to the identity quaternion recovers the
//! QuatE score `(v_h ⊗ v_r◁) • v_t`.
//!
//! The crate is split into:
//! - [`quat`]: batched quaternion-vector kernels with hand-written backward rules
//! - [`data`]: triple files, dictionaries, filter index, relation cardinality
//! - [`model`]: parameter tables, score variants, checkpoints
//! - [`train`]: negative sampling, logistic loss, Adagrad, the epoch loop
//! - [`eval`]: filtered ranking, MR/MRR/Hits@k, per-relation and per-category reports

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod quat;
pub mod real;
pub mod rng;
pub mod train;

pub use data::{Category, Dataset, Dictionary, FilterIndex, RelationStats, Split, Triple};
pub use error::{Error, Result};
pub use eval::{EvalReport, FilterMode, Metrics, Side, TieMode};
pub use model::{InitRotation, ParamStore, ScoreVariant};
pub use quat::{QGrad, QRef, QVec};
pub use real::Real;
pub use train::{TrainConfig, TrainLog, TrainOutcome};
