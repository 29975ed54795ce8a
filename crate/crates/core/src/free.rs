//! Free-rating inference.
//!
//! After a user rates an item, the most cosine-similar other item (over
//! concatenated feature and embedding vectors) receives a copy of that
//! rating at no elicitation cost. Each block of the concatenation is
//! L2-normalized by default so the wide binary feature block cannot drown
//! out the short embedding block.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{ItemFeatureMatrix, ItemId, SparseRatingMatrix, UserId};
use crate::error::Error;
use crate::recsys::FactorModel;

/// Which representation drives item similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreeMode {
    #[serde(rename = "off")]
    Off,
    #[serde(rename = "features")]
    FeaturesOnly,
    #[serde(rename = "features+embeddings")]
    FeaturesPlusEmbeddings,
}

impl fmt::Display for FreeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreeMode::Off => write!(f, "off"),
            FreeMode::FeaturesOnly => write!(f, "features"),
            FreeMode::FeaturesPlusEmbeddings => write!(f, "features+embeddings"),
        }
    }
}

impl std::str::FromStr for FreeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "off" => Ok(FreeMode::Off),
            "features" | "features_only" => Ok(FreeMode::FeaturesOnly),
            "features+embeddings" | "features_plus_embeddings" => {
                Ok(FreeMode::FeaturesPlusEmbeddings)
            }
            other => Err(Error::param("free-ratings", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeConfig {
    pub mode: FreeMode,
    /// Inferred ratings per elicited item.
    pub per_item: usize,
    /// L2-normalize each block before concatenation.
    pub block_norm: bool,
}

impl Default for FreeConfig {
    fn default() -> Self {
        Self { mode: FreeMode::Off, per_item: 1, block_norm: true }
    }
}

/// Sparse similarity vector of one item: sorted `(dimension, value)`
/// pairs covering the feature block and, when present, the embedding
/// block behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemVector {
    pub item: ItemId,
    dims: Vec<(u32, f64)>,
    norm: f64,
}

impl ItemVector {
    /// Builds a vector from raw `(dimension, value)` pairs (test fixtures
    /// and oracles).
    pub fn from_sparse(item: ItemId, mut dims: Vec<(u32, f64)>) -> Self {
        dims.retain(|&(_, v)| v != 0.0);
        dims.sort_by_key(|&(d, _)| d);
        let norm = dims.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        Self { item, dims, norm }
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dims(&self) -> &[(u32, f64)] {
        &self.dims
    }

    /// Cosine similarity; 0 whenever either vector is zero.
    pub fn cosine(&self, other: &ItemVector) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        let mut dot = 0.0;
        let (mut a, mut b) = (self.dims.iter().peekable(), other.dims.iter().peekable());
        while let (Some(&&(da, va)), Some(&&(db, vb))) = (a.peek(), b.peek()) {
            match da.cmp(&db) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    dot += va * vb;
                    a.next();
                    b.next();
                }
            }
        }
        dot / (self.norm * other.norm)
    }
}

/// Builds the similarity vectors for `items`.
///
/// In embedding mode the vectors must be rebuilt every round (the model
/// changes after retraining); feature-only vectors are stable. Items the
/// model has never seen contribute a zero embedding block. Every item
/// needs a feature row; a missing one is an error.
pub fn build_vectors(
    items: &[ItemId],
    features: &ItemFeatureMatrix,
    model: Option<&FactorModel>,
    config: &FreeConfig,
) -> Result<BTreeMap<ItemId, ItemVector>, Error> {
    if config.mode == FreeMode::Off {
        return Ok(BTreeMap::new());
    }
    if config.mode == FreeMode::FeaturesPlusEmbeddings && model.is_none() {
        return Err(Error::param("free-ratings", "embedding mode needs a trained model"));
    }
    let feature_dims = features.dim() as u32;
    let mut vectors = BTreeMap::new();
    for &item in items {
        let active = features.active_dims(item)?;
        let mut dims: Vec<(u32, f64)> = Vec::with_capacity(active.len());
        let feature_value = if config.block_norm && !active.is_empty() {
            1.0 / (active.len() as f64).sqrt()
        } else {
            1.0
        };
        dims.extend(active.iter().map(|&d| (d, feature_value)));
        if config.mode == FreeMode::FeaturesPlusEmbeddings {
            if let Ok(embedding) = model.unwrap().item_embedding(item) {
                let scale = if config.block_norm {
                    let norm = embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        1.0 / norm
                    } else {
                        0.0
                    }
                } else {
                    1.0
                };
                dims.extend(
                    embedding
                        .iter()
                        .enumerate()
                        .filter(|&(_, &v)| v != 0.0)
                        .map(|(idx, &v)| (feature_dims + idx as u32, v * scale)),
                );
            }
        }
        vectors.insert(item, ItemVector::from_sparse(item, dims));
    }
    Ok(vectors)
}

/// The candidate most cosine-similar to `item`; ties break toward the
/// smallest item id. A zero-vector source matches nothing meaningfully, so
/// the smallest-id candidate comes back with similarity 0 and a warning.
/// `None` when there are no candidates.
pub fn most_similar(
    item: ItemId,
    vectors: &BTreeMap<ItemId, ItemVector>,
    candidates: impl IntoIterator<Item = ItemId>,
) -> Option<(ItemId, f64)> {
    let source = match vectors.get(&item) {
        Some(v) => v,
        None => {
            log::warn!("no similarity vector for item {item}");
            return None;
        }
    };
    if source.norm() == 0.0 {
        log::warn!("item {item} has a zero similarity vector; free rating is arbitrary");
    }
    let mut best: Option<(ItemId, f64)> = None;
    let mut sorted: Vec<ItemId> = candidates.into_iter().filter(|&c| c != item).collect();
    sorted.sort_unstable();
    sorted.dedup();
    for candidate in sorted {
        let Some(vector) = vectors.get(&candidate) else { continue };
        let sim = source.cosine(vector);
        match best {
            Some((_, best_sim)) if sim <= best_sim => {}
            _ => best = Some((candidate, sim)),
        }
    }
    best
}

/// One inferred rating: the user's rating on `source_item` copied onto
/// `target_item`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeRatingEvent {
    pub user: UserId,
    pub source_item: ItemId,
    pub target_item: ItemId,
    pub rating: u8,
    pub similarity: f64,
}

/// Infers up to `per_item` free ratings for each elicited `(item, rating)`
/// pair. Candidates are all vectorized items minus the source, minus
/// everything already in the user's known row, minus items elicited or
/// free-rated for this user in the same round. Events are returned in
/// elicitation order; the caller applies them to K.
pub fn infer_free_ratings(
    user: UserId,
    elicited: &[(ItemId, u8)],
    vectors: &BTreeMap<ItemId, ItemVector>,
    known: &SparseRatingMatrix,
    per_item: usize,
) -> Vec<FreeRatingEvent> {
    let mut events = Vec::new();
    if per_item == 0 || vectors.is_empty() {
        return events;
    }
    let elicited_items: HashSet<ItemId> = elicited.iter().map(|&(i, _)| i).collect();
    let mut taken: HashSet<ItemId> = HashSet::new();
    for &(source, rating) in elicited {
        for _ in 0..per_item {
            let candidates = vectors.keys().copied().filter(|&j| {
                j != source
                    && !known.contains(user, j)
                    && !elicited_items.contains(&j)
                    && !taken.contains(&j)
            });
            let Some((target, similarity)) = most_similar(source, vectors, candidates) else {
                break;
            };
            taken.insert(target);
            events.push(FreeRatingEvent { user, source_item: source, target_item: target, rating, similarity });
        }
    }
    events
}
