//! Offline simulation of active-learning rating elicitation for
//! collaborative filtering.
//!
//! The library models the classic offline elicitation protocol: the rating
//! data is split into a known matrix `K` (what the recommender has seen), an
//! elicitable pool `X` (ratings the simulated users could still provide) and
//! a held-out test matrix `T`. Each round a strategy picks items to ask each
//! user about, the chosen ratings move from `X` to `K`, optional "free"
//! ratings are inferred from item similarity, the base recommender is
//! retrained and MAE on `T` is recorded.
//!
//! Modules:
//! - [`dataset`]: loaders, density filtering and the K/X/T split
//! - [`recsys`]: the biased latent-factor recommender trained by SGD
//! - [`nonpers`]: non-personalized item scorers (variance, entropy, ...)
//! - [`pers`]: personalized per-user rankers (max/min rating, IKNN, binary, ...)
//! - [`hybrid`]: the adaptive rank blend of a non-personalized and a
//!   personalized strategy
//! - [`free`]: free-rating inference from feature/embedding similarity
//! - [`sim`]: the round loop, MAE evaluation and multi-strategy comparison

pub mod dataset;
pub mod error;
pub mod free;
pub mod hybrid;
pub mod nonpers;
pub mod pers;
pub mod recsys;
pub mod sim;

pub use dataset::{DatasetSplit, ItemFeatureMatrix, ItemId, RatingTriple, SparseRatingMatrix, UserId};
pub use error::Error;
pub use recsys::{FactorModel, TrainConfig};
pub use sim::{IterationReport, SimulationConfig, SimulationResult};
