//! Collaborative-filtering toolkit.
//!
//! The crate models a sparsely observed ratings matrix and implements four
//! scorer families over it: the damped user-item bias model, popularity and
//! lift, user- and item-based nearest neighbors, and latent-factor models.
//! Every scorer plugs into a [`ScorerChain`](scoring::ScorerChain), which
//! provides fallback and deterministic top-N ranking.

pub mod baseline;
pub mod error;
mod format;
pub mod harness;
pub mod knn;
pub mod matrix;
pub mod mf;
pub mod scoring;

pub use baseline::{BiasModel, CoOccurrence};
pub use error::{Error, Result};
pub use knn::{ItemKnnModel, UserKnnConfig, WeightKind};
pub use matrix::{IdMap, ItemId, Rating, RatingsMatrix, Row, Stats, UserId};
pub use mf::{FactorModel, TrainConfig};
pub use scoring::{RankedList, ScoreRequest, Scorer, ScorerChain};
