//! Personalized scorers: per-user rankings over that user's candidate
//! items, driven by models trained on the current known matrix.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::dataset::{ItemId, SparseRatingMatrix, UserId};
use crate::error::Error;
use crate::recsys::{self, FactorModel, TrainConfig};

/// A user's candidate items ordered best-first; ties always fall back to
/// ascending item id.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRanking {
    pub user: UserId,
    entries: Vec<(ItemId, f64)>,
}

impl UserRanking {
    /// Best = highest score.
    pub fn from_scores_desc(user: UserId, mut scores: Vec<(ItemId, f64)>) -> Self {
        scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self { user, entries: scores }
    }

    /// Best = lowest score.
    pub fn from_scores_asc(user: UserId, mut scores: Vec<(ItemId, f64)>) -> Self {
        scores.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Self { user, entries: scores }
    }

    pub fn entries(&self) -> &[(ItemId, f64)] {
        &self.entries
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank per item, 1 = best.
    pub fn ranks(&self) -> BTreeMap<ItemId, usize> {
        self.entries.iter().enumerate().map(|(pos, &(i, _))| (i, pos + 1)).collect()
    }
}

/// Candidates sorted by predicted rating, highest first.
pub fn max_rating(user: UserId, model: &FactorModel, pool: &[ItemId]) -> UserRanking {
    let scores = pool.iter().map(|&i| (i, model.predict(user, i))).collect();
    UserRanking::from_scores_desc(user, scores)
}

/// Candidates sorted by predicted rating, lowest first.
pub fn min_rating(user: UserId, model: &FactorModel, pool: &[ItemId]) -> UserRanking {
    let scores = pool.iter().map(|&i| (i, model.predict(user, i))).collect();
    UserRanking::from_scores_asc(user, scores)
}

/// Candidates sorted by the Euclidean norm of their latent factors,
/// smallest first. Items the model has never seen carry no latent
/// information and rank as norm 0.
pub fn min_norm(user: UserId, model: &FactorModel, pool: &[ItemId]) -> UserRanking {
    let scores = pool
        .iter()
        .map(|&i| (i, model.item_latent_norm(i).unwrap_or(0.0)))
        .collect();
    UserRanking::from_scores_asc(user, scores)
}

/// Item-based k-nearest-neighbour scorer.
///
/// Similarity is adjusted cosine over co-rating users (ratings centered on
/// each user's mean), defined only when at least two users co-rated the
/// pair and both centered vectors are nonzero. For a candidate, the `k`
/// most similar positively-correlated items the user has rated form the
/// neighborhood; the prediction is the similarity-weighted average of the
/// user's ratings on them. Candidates without a usable neighbor get the
/// user's mean rating; a user with no ratings at all is ranked by item
/// mean.
pub struct ItemKnn<'a> {
    known: &'a SparseRatingMatrix,
    user_means: HashMap<UserId, f64>,
    k: usize,
    min_coraters: usize,
    cache: RwLock<HashMap<(ItemId, ItemId), Option<f64>>>,
}

impl<'a> ItemKnn<'a> {
    pub fn new(known: &'a SparseRatingMatrix, k: usize) -> Self {
        let user_means = known
            .users()
            .map(|u| {
                let row = known.user_ratings(u);
                let sum: u64 = row.iter().map(|&(_, r)| r as u64).sum();
                (u, sum as f64 / row.len() as f64)
            })
            .collect();
        Self { known, user_means, k: k.max(1), min_coraters: 2, cache: RwLock::new(HashMap::new()) }
    }

    /// Adjusted-cosine similarity, `None` when undefined.
    pub fn similarity(&self, a: ItemId, b: ItemId) -> Option<f64> {
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(hit) = self.cache.read().unwrap().get(&key) {
            return *hit;
        }
        let sim = self.compute_similarity(key.0, key.1);
        self.cache.write().unwrap().insert(key, sim);
        sim
    }

    fn compute_similarity(&self, a: ItemId, b: ItemId) -> Option<f64> {
        let col_a = self.known.item_ratings(a);
        let col_b = self.known.item_ratings(b);
        let mut ia = col_a.iter().peekable();
        let mut ib = col_b.iter().peekable();
        let (mut num, mut den_a, mut den_b, mut coraters) = (0.0, 0.0, 0.0, 0usize);
        while let (Some(&&(ua, ra)), Some(&&(ub, rb))) = (ia.peek(), ib.peek()) {
            match ua.cmp(&ub) {
                std::cmp::Ordering::Less => {
                    ia.next();
                }
                std::cmp::Ordering::Greater => {
                    ib.next();
                }
                std::cmp::Ordering::Equal => {
                    let mean = self.user_means[&ua];
                    let da = ra as f64 - mean;
                    let db = rb as f64 - mean;
                    num += da * db;
                    den_a += da * da;
                    den_b += db * db;
                    coraters += 1;
                    ia.next();
                    ib.next();
                }
            }
        }
        if coraters < self.min_coraters || den_a == 0.0 || den_b == 0.0 {
            return None;
        }
        Some(num / (den_a.sqrt() * den_b.sqrt()))
    }

    fn item_mean(&self, item: ItemId) -> f64 {
        let col = self.known.item_ratings(item);
        if col.is_empty() {
            self.known.global_mean()
        } else {
            col.iter().map(|&(_, r)| r as f64).sum::<f64>() / col.len() as f64
        }
    }

    pub fn predict(&self, user: UserId, item: ItemId) -> f64 {
        let rated = self.known.user_ratings(user);
        let Some(&user_mean) = self.user_means.get(&user) else {
            return self.item_mean(item);
        };
        // Positive similarities only; sorted best-first, id as tiebreak.
        let mut neighbors: Vec<(f64, ItemId, u8)> = rated
            .iter()
            .filter(|&&(j, _)| j != item)
            .filter_map(|&(j, r)| {
                self.similarity(item, j)
                    .filter(|&s| s > 0.0)
                    .map(|s| (s, j, r))
            })
            .collect();
        neighbors.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        neighbors.truncate(self.k);
        let weight: f64 = neighbors.iter().map(|&(s, _, _)| s).sum();
        if neighbors.is_empty() || weight == 0.0 {
            return user_mean;
        }
        neighbors.iter().map(|&(s, _, r)| s * r as f64).sum::<f64>() / weight
    }

    /// Candidates sorted by predicted rating, highest first.
    pub fn rank(&self, user: UserId, pool: &[ItemId]) -> UserRanking {
        let scores = pool.iter().map(|&i| (i, self.predict(user, i))).collect();
        UserRanking::from_scores_desc(user, scores)
    }
}

/// One-shot item-kNN ranking; build an [`ItemKnn`] once per round when
/// ranking many users.
pub fn iknn(user: UserId, known: &SparseRatingMatrix, pool: &[ItemId], k: usize) -> UserRanking {
    ItemKnn::new(known, k).rank(user, pool)
}

/// Hyperparameters of the likelihood-of-rating model trained on the dense
/// binarized matrix (rated cells 1, everything else 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTrainConfig {
    pub factors: usize,
    /// Raw iteration budget; the per-training epoch count is derived from
    /// it (see [`BinaryTrainConfig::epochs_for`]).
    pub iterations: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// Bypass the derived epoch count entirely.
    pub epochs_override: Option<usize>,
}

impl Default for BinaryTrainConfig {
    fn default() -> Self {
        Self {
            factors: 291,
            iterations: 1501,
            learning_rate: 0.01834,
            regularization: 0.01467,
            epochs_override: None,
        }
    }
}

impl BinaryTrainConfig {
    /// Epochs for a matrix with `num_users` rows:
    /// `round(iterations / num_users)`, never below 5.
    pub fn epochs_for(&self, num_users: usize) -> usize {
        if let Some(epochs) = self.epochs_override {
            return epochs.max(1);
        }
        let derived = (self.iterations as f64 / num_users.max(1) as f64).round() as usize;
        derived.max(5)
    }

    pub fn train_config(&self, num_users: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            factors: self.factors,
            learning_rate: self.learning_rate,
            regularization: self.regularization,
            epochs: self.epochs_for(num_users),
            seed,
            clamp: false,
            max_rating: 5.0,
        }
    }
}

/// Trains the binary likelihood model on the dense binarized view of
/// `known` over the given user/item universe.
pub fn train_binary_model(
    known: &SparseRatingMatrix,
    users: &[UserId],
    items: &[ItemId],
    config: &BinaryTrainConfig,
    seed: u64,
) -> Result<FactorModel, Error> {
    recsys::train_dense_binary(known, users, items, &config.train_config(users.len(), seed))
}

/// Candidates sorted by predicted rating likelihood, highest first.
pub fn binary(user: UserId, binary_model: &FactorModel, pool: &[ItemId]) -> UserRanking {
    let scores = pool.iter().map(|&i| (i, binary_model.predict(user, i))).collect();
    UserRanking::from_scores_desc(user, scores)
}

/// Blends the min-norm and min-rating rankings by rank position with
/// `w = (iter − 1) / total_iter`: early rounds follow min-rating, late
/// rounds min-norm. Ranks are 1 = best and the combined score is
/// minimized.
pub fn non_myopic(
    user: UserId,
    iter: usize,
    total_iter: usize,
    min_norm_ranking: &UserRanking,
    min_rating_ranking: &UserRanking,
) -> Result<UserRanking, Error> {
    if total_iter == 0 {
        return Err(Error::param("total_iter", "must be at least 1"));
    }
    if iter == 0 {
        return Err(Error::param("iter", "rounds are 1-based"));
    }
    let w = (iter - 1) as f64 / total_iter as f64;
    Ok(combine_ranks(user, min_norm_ranking, min_rating_ranking, w))
}

/// `score(i) = w·rank_a(i) + (1−w)·rank_b(i)`, sorted ascending. Items
/// missing from either ranking are dropped with a warning.
pub(crate) fn combine_ranks(
    user: UserId,
    ranking_a: &UserRanking,
    ranking_b: &UserRanking,
    w: f64,
) -> UserRanking {
    let ranks_a = ranking_a.ranks();
    let ranks_b = ranking_b.ranks();
    if ranks_a.len() != ranks_b.len() || ranks_a.keys().ne(ranks_b.keys()) {
        log::warn!("rank pools disagree for user {user}; blending their intersection");
    }
    let scores: Vec<(ItemId, f64)> = ranks_a
        .iter()
        .filter_map(|(&item, &ra)| {
            ranks_b
                .get(&item)
                .map(|&rb| (item, w * ra as f64 + (1.0 - w) * rb as f64))
        })
        .collect();
    UserRanking::from_scores_asc(user, scores)
}

/// Which personalized ranker to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersKind {
    MaxRating,
    MinRating,
    MinNorm,
    Iknn,
    Binary,
    NonMyopic,
}

impl PersKind {
    pub const ALL: [PersKind; 6] = [
        PersKind::MaxRating,
        PersKind::MinRating,
        PersKind::MinNorm,
        PersKind::Iknn,
        PersKind::Binary,
        PersKind::NonMyopic,
    ];

    /// Whether ranking with this strategy needs the binary likelihood
    /// model.
    pub fn needs_binary_model(self) -> bool {
        matches!(self, PersKind::Binary)
    }
}

impl fmt::Display for PersKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PersKind::MaxRating => "max_rating",
            PersKind::MinRating => "min_rating",
            PersKind::MinNorm => "min_norm",
            PersKind::Iknn => "iknn",
            PersKind::Binary => "binary",
            PersKind::NonMyopic => "non_myopic",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for PersKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "max_rating" => Ok(PersKind::MaxRating),
            "min_rating" => Ok(PersKind::MinRating),
            "min_norm" => Ok(PersKind::MinNorm),
            "iknn" => Ok(PersKind::Iknn),
            "binary" => Ok(PersKind::Binary),
            "non_myopic" => Ok(PersKind::NonMyopic),
            other => Err(Error::param("strategy", format!("unknown ranker `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingTriple;

    fn triple(u: u32, i: u32, r: u8) -> RatingTriple {
        RatingTriple { user: UserId(u), item: ItemId(i), rating: r }
    }

    /// d=1 model where item biases pin the predictions exactly:
    /// prediction(u, i) = mean + item_bias[i].
    fn bias_model(items: &[(u32, f64)], mean: f64) -> FactorModel {
        let mut items = items.to_vec();
        items.sort_by_key(|&(i, _)| i);
        let ids: Vec<ItemId> = items.iter().map(|&(i, _)| ItemId(i)).collect();
        let biases: Vec<f64> = items.iter().map(|&(_, b)| b).collect();
        FactorModel::from_parts(
            vec![UserId(1)],
            ids.clone(),
            vec![0.0],
            vec![0.0; ids.len()],
            vec![0.0],
            biases,
            mean,
            1,
            None,
        )
    }

    /// d=2 model with explicit item factor rows (norm tests).
    fn factor_model(items: &[(u32, [f64; 2])]) -> FactorModel {
        let mut items = items.to_vec();
        items.sort_by_key(|&(i, _)| i);
        let ids: Vec<ItemId> = items.iter().map(|&(i, _)| ItemId(i)).collect();
        let factors: Vec<f64> = items.iter().flat_map(|&(_, row)| row).collect();
        FactorModel::from_parts(
            vec![UserId(1)],
            ids.clone(),
            vec![0.0, 0.0],
            factors,
            vec![0.0],
            vec![0.0; ids.len()],
            3.0,
            2,
            None,
        )
    }

    #[test]
    fn max_rating_sorts_descending() {
        let model = bias_model(&[(1, 1.2), (2, 0.1)], 3.0); // preds 4.2, 3.1
        let r = max_rating(UserId(1), &model, &[ItemId(1), ItemId(2)]);
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(1), ItemId(2)]);
    }

    #[test]
    fn equal_predictions_fall_back_to_id_order() {
        let model = bias_model(&[(9, 0.5), (2, 0.5), (5, 0.5)], 3.0);
        let r = max_rating(UserId(1), &model, &[ItemId(9), ItemId(2), ItemId(5)]);
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(2), ItemId(5), ItemId(9)]);
    }

    #[test]
    fn rating_sorts_match_brute_force_oracle() {
        let items: Vec<(u32, f64)> = (1..=10).map(|i| (i, ((i * 7) % 10) as f64 / 10.0)).collect();
        let model = bias_model(&items, 3.0);
        let pool: Vec<ItemId> = (1..=10).map(ItemId).collect();

        let mut expected: Vec<(ItemId, f64)> =
            pool.iter().map(|&i| (i, model.predict(UserId(1), i))).collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let got = max_rating(UserId(1), &model, &pool);
        assert_eq!(
            got.items().collect::<Vec<_>>(),
            expected.iter().map(|&(i, _)| i).collect::<Vec<_>>()
        );

        expected.reverse();
        let got = min_rating(UserId(1), &model, &pool);
        assert_eq!(
            got.items().collect::<Vec<_>>(),
            expected.iter().map(|&(i, _)| i).collect::<Vec<_>>()
        );
    }

    #[test]
    fn min_and_max_rating_are_mutually_reversed() {
        let items: Vec<(u32, f64)> = (1..=8).map(|i| (i, i as f64 * 0.13)).collect();
        let model = bias_model(&items, 3.0);
        let pool: Vec<ItemId> = (1..=8).map(ItemId).collect();
        let mut max_order: Vec<ItemId> = max_rating(UserId(1), &model, &pool).items().collect();
        let min_order: Vec<ItemId> = min_rating(UserId(1), &model, &pool).items().collect();
        max_order.reverse();
        assert_eq!(max_order, min_order);
    }

    #[test]
    fn min_norm_prefers_small_latent_rows() {
        let model = factor_model(&[(1, [0.1, 0.0]), (2, [2.0, 0.0]), (3, [0.0, 0.0])]);
        let r = min_norm(UserId(1), &model, &[ItemId(1), ItemId(2), ItemId(3)]);
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(3), ItemId(1), ItemId(2)]);
    }

    #[test]
    fn min_norm_matches_brute_force_oracle() {
        let items: Vec<(u32, [f64; 2])> =
            (1..=10).map(|i| (i, [(i % 4) as f64, (i % 3) as f64 * 0.5])).collect();
        let model = factor_model(&items);
        let pool: Vec<ItemId> = (1..=10).map(ItemId).collect();
        let mut expected: Vec<(ItemId, f64)> = pool
            .iter()
            .map(|&i| (i, model.item_latent_norm(i).unwrap()))
            .collect();
        expected.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let got: Vec<ItemId> = min_norm(UserId(1), &model, &pool).items().collect();
        assert_eq!(got, expected.iter().map(|&(i, _)| i).collect::<Vec<_>>());
    }

    /// Straight-from-definition item-kNN oracle: full similarity table by
    /// explicit co-rater enumeration, then a weighted average.
    mod knn_oracle {
        use super::*;

        pub fn user_mean(k: &SparseRatingMatrix, u: UserId) -> Option<f64> {
            let row = k.user_ratings(u);
            if row.is_empty() {
                return None;
            }
            Some(row.iter().map(|&(_, r)| r as f64).sum::<f64>() / row.len() as f64)
        }

        pub fn adjusted_cosine(k: &SparseRatingMatrix, a: ItemId, b: ItemId) -> Option<f64> {
            let mut pairs = Vec::new();
            for &(u, ra) in k.item_ratings(a) {
                for &(u2, rb) in k.item_ratings(b) {
                    if u == u2 {
                        pairs.push((u, ra, rb));
                    }
                }
            }
            if pairs.len() < 2 {
                return None;
            }
            let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
            for (u, ra, rb) in pairs {
                let m = user_mean(k, u).unwrap();
                num += (ra as f64 - m) * (rb as f64 - m);
                da += (ra as f64 - m).powi(2);
                db += (rb as f64 - m).powi(2);
            }
            if da == 0.0 || db == 0.0 {
                return None;
            }
            Some(num / (da.sqrt() * db.sqrt()))
        }

        pub fn predict(k: &SparseRatingMatrix, u: UserId, item: ItemId, kk: usize) -> f64 {
            let Some(mean) = user_mean(k, u) else {
                let col = k.item_ratings(item);
                return if col.is_empty() {
                    k.global_mean()
                } else {
                    col.iter().map(|&(_, r)| r as f64).sum::<f64>() / col.len() as f64
                };
            };
            let mut sims: Vec<(f64, ItemId, u8)> = k
                .user_ratings(u)
                .iter()
                .filter(|&&(j, _)| j != item)
                .filter_map(|&(j, r)| {
                    adjusted_cosine(k, item, j).filter(|&s| s > 0.0).map(|s| (s, j, r))
                })
                .collect();
            sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            sims.truncate(kk);
            let w: f64 = sims.iter().map(|&(s, _, _)| s).sum();
            if sims.is_empty() || w == 0.0 {
                mean
            } else {
                sims.iter().map(|&(s, _, r)| s * r as f64).sum::<f64>() / w
            }
        }
    }

    fn hand_matrix() -> SparseRatingMatrix {
        SparseRatingMatrix::from_triples([
            triple(1, 1, 5),
            triple(1, 2, 4),
            triple(1, 3, 1),
            triple(2, 1, 4),
            triple(2, 2, 5),
            triple(2, 4, 2),
            triple(3, 2, 2),
            triple(3, 3, 3),
            triple(3, 4, 4),
            triple(4, 1, 3),
            triple(4, 3, 4),
            triple(4, 4, 5),
        ])
    }

    #[test]
    fn iknn_matches_brute_force_oracle() {
        let k = hand_matrix();
        let scorer = ItemKnn::new(&k, 2);
        for u in 1..=4u32 {
            for i in 1..=4u32 {
                let got = scorer.predict(UserId(u), ItemId(i));
                let want = knn_oracle::predict(&k, UserId(u), ItemId(i), 2);
                assert!(
                    (got - want).abs() < 1e-12,
                    "user {u} item {i}: got {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn iknn_single_perfect_neighbor_copies_the_rating() {
        // Users 10/11 rate items 1 and 2 identically (and item 3 low), so
        // the pair's mean-centered deviations line up exactly: sim = 1.
        // User 5 rated only item 1 with a 5, so candidate 2 inherits 5.0,
        // while candidate 3 has no positively-correlated neighbor and gets
        // the user mean (also 5.0); the tie resolves by item id.
        let k = SparseRatingMatrix::from_triples([
            triple(10, 1, 5),
            triple(10, 2, 5),
            triple(10, 3, 1),
            triple(11, 1, 4),
            triple(11, 2, 4),
            triple(11, 3, 2),
            triple(5, 1, 5),
        ]);
        let scorer = ItemKnn::new(&k, 40);
        let sim = scorer.similarity(ItemId(1), ItemId(2)).unwrap();
        assert!(sim > 0.99, "expected near-perfect similarity, got {sim}");
        assert!((scorer.predict(UserId(5), ItemId(2)) - 5.0).abs() < 1e-12);
        let r = scorer.rank(UserId(5), &[ItemId(2), ItemId(3)]);
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(2), ItemId(3)]);
    }

    #[test]
    fn iknn_with_no_signal_uses_user_mean_and_id_order() {
        // Nobody co-rates anything: all similarities undefined.
        let k = SparseRatingMatrix::from_triples([
            triple(1, 1, 4),
            triple(2, 2, 3),
            triple(3, 3, 2),
        ]);
        let scorer = ItemKnn::new(&k, 40);
        let r = scorer.rank(UserId(1), &[ItemId(5), ItemId(2), ItemId(9)]);
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(2), ItemId(5), ItemId(9)]);
        assert!(r.entries().iter().all(|&(_, s)| (s - 4.0).abs() < 1e-12));
    }

    #[test]
    fn iknn_empty_user_row_ranks_by_item_mean() {
        let k = SparseRatingMatrix::from_triples([
            triple(1, 1, 5),
            triple(1, 2, 2),
            triple(2, 1, 5),
        ]);
        let scorer = ItemKnn::new(&k, 40);
        // User 99 has no ratings: item 1 mean 5.0, item 2 mean 2.0.
        let r = scorer.rank(UserId(99), &[ItemId(1), ItemId(2)]);
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(1), ItemId(2)]);
    }

    #[test]
    fn identical_rating_columns_have_similarity_one() {
        let k = SparseRatingMatrix::from_triples([
            triple(1, 1, 5),
            triple(1, 2, 5),
            triple(2, 1, 1),
            triple(2, 2, 1),
            triple(1, 3, 3),
            triple(2, 3, 3),
        ]);
        let scorer = ItemKnn::new(&k, 40);
        let sim = scorer.similarity(ItemId(1), ItemId(2)).unwrap();
        assert!((sim - 1.0).abs() < 1e-12, "got {sim}");
    }

    #[test]
    fn binary_ranks_by_likelihood() {
        let model = bias_model(&[(1, 0.9), (2, 0.2)], 0.0);
        let r = binary(UserId(1), &model, &[ItemId(2), ItemId(1)]);
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(1), ItemId(2)]);
        assert!(binary(UserId(1), &model, &[]).is_empty());
    }

    #[test]
    fn binary_hyperparameter_defaults() {
        let c = BinaryTrainConfig::default();
        assert_eq!(c.factors, 291);
        assert_eq!(c.iterations, 1501);
        assert!((c.learning_rate - 0.01834).abs() < 1e-12);
        assert!((c.regularization - 0.01467).abs() < 1e-12);
    }

    #[test]
    fn binary_epoch_derivation() {
        let c = BinaryTrainConfig::default();
        assert_eq!(c.epochs_for(1), 1501);
        assert_eq!(c.epochs_for(100), 15);
        assert_eq!(c.epochs_for(6040), 5); // round(0.248) = 0, floored at 5
        let forced = BinaryTrainConfig { epochs_override: Some(3), ..Default::default() };
        assert_eq!(forced.epochs_for(6040), 3);
    }

    #[test]
    fn binarization_definition_on_3x3() {
        let k =
            SparseRatingMatrix::from_triples([triple(1, 1, 1), triple(2, 3, 5), triple(3, 2, 3)]);
        for u in 1..=3u32 {
            for i in 1..=3u32 {
                let expected = if (u, i) == (1, 1) || (u, i) == (2, 3) || (u, i) == (3, 2) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(recsys::binarized_value(&k, UserId(u), ItemId(i)), expected);
            }
        }
    }

    fn ranking_of(user: u32, ordered: &[u32]) -> UserRanking {
        UserRanking {
            user: UserId(user),
            entries: ordered.iter().enumerate().map(|(p, &i)| (ItemId(i), p as f64)).collect(),
        }
    }

    #[test]
    fn non_myopic_first_round_equals_min_rating() {
        let by_norm = ranking_of(1, &[3, 1, 2]);
        let by_rating = ranking_of(1, &[2, 3, 1]);
        let r = non_myopic(UserId(1), 1, 25, &by_norm, &by_rating).unwrap();
        assert_eq!(r.items().collect::<Vec<_>>(), by_rating.items().collect::<Vec<_>>());
    }

    #[test]
    fn non_myopic_full_weight_equals_min_norm() {
        let by_norm = ranking_of(1, &[3, 1, 2]);
        let by_rating = ranking_of(1, &[2, 3, 1]);
        // iter = total + 1 gives w = 1 exactly.
        let r = non_myopic(UserId(1), 26, 25, &by_norm, &by_rating).unwrap();
        assert_eq!(r.items().collect::<Vec<_>>(), by_norm.items().collect::<Vec<_>>());
    }

    #[test]
    fn non_myopic_tie_resolves_by_id() {
        // w = 0.5: ranks MinNorm (a:1, b:2), MinRating (a:2, b:1) -> both 1.5.
        let by_norm = ranking_of(1, &[1, 2]);
        let by_rating = ranking_of(1, &[2, 1]);
        // (iter - 1) / total = 0.5 at iter 3, total 4.
        let r = non_myopic(UserId(1), 3, 4, &by_norm, &by_rating).unwrap();
        assert_eq!(r.items().collect::<Vec<_>>(), vec![ItemId(1), ItemId(2)]);
        assert!(r.entries().iter().all(|&(_, s)| (s - 1.5).abs() < 1e-12));
    }

    #[test]
    fn non_myopic_rejects_zero_total() {
        let a = ranking_of(1, &[1]);
        let b = ranking_of(1, &[1]);
        assert!(non_myopic(UserId(1), 1, 0, &a, &b).is_err());
    }

    #[test]
    fn rankings_stay_within_pool_without_duplicates() {
        let model = bias_model(&(1..=20).map(|i| (i, (i % 7) as f64)).collect::<Vec<_>>(), 3.0);
        let pool: Vec<ItemId> = (5..=15).map(ItemId).collect();
        for r in [
            max_rating(UserId(1), &model, &pool),
            min_rating(UserId(1), &model, &pool),
            min_norm(UserId(1), &model, &pool),
        ] {
            let items: Vec<ItemId> = r.items().collect();
            let mut dedup = items.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), items.len());
            assert!(items.iter().all(|i| pool.contains(i)));
            assert_eq!(items.len(), pool.len());
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in PersKind::ALL {
            assert_eq!(kind.to_string().parse::<PersKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<PersKind>().is_err());
    }
}
