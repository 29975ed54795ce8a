//! The round loop: score, elicit, infer free ratings, retrain, evaluate.
//!
//! Per round every user is asked for their top `batch_size` candidates
//! according to the configured strategy; those ratings move from the
//! elicitable pool into the known matrix, optional free ratings are copied
//! onto similar items, the base recommender is retrained from scratch and
//! MAE on the untouched test matrix is recorded. All per-user work inside
//! a round reads immutable round-start snapshots, so users can be ranked
//! in parallel and results are independent of evaluation order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSplit, ItemFeatureMatrix, ItemId, SparseRatingMatrix, UserId};
use crate::error::Error;
use crate::free::{self, FreeConfig, FreeMode};
use crate::hybrid::{self, HybridConfig};
use crate::nonpers::{ItemStats, NonPersKind, ScoreVector};
use crate::pers::{self, BinaryTrainConfig, ItemKnn, PersKind, UserRanking};
use crate::recsys::{self, FactorModel, TrainConfig};

/// Seed offsets so the per-round RNG streams of the base model, the binary
/// model and the random scorer never collide.
const BINARY_SEED_OFFSET: u64 = 1_000_003;
const RANDOM_SEED_OFFSET: u64 = 2_000_003;

/// Elicitation strategy selected by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum StrategyKind {
    NonPersonalized(NonPersKind),
    Personalized(PersKind),
    AdaptiveHybrid,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::NonPersonalized(kind) => write!(f, "{kind}"),
            StrategyKind::Personalized(kind) => write!(f, "{kind}"),
            StrategyKind::AdaptiveHybrid => write!(f, "adaptive_hybrid"),
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s == "adaptive_hybrid" {
            return Ok(StrategyKind::AdaptiveHybrid);
        }
        if let Ok(kind) = s.parse::<NonPersKind>() {
            return Ok(StrategyKind::NonPersonalized(kind));
        }
        if let Ok(kind) = s.parse::<PersKind>() {
            return Ok(StrategyKind::Personalized(kind));
        }
        Err(Error::param("strategy", format!("unknown strategy `{s}`")))
    }
}

impl From<StrategyKind> for String {
    fn from(kind: StrategyKind) -> String {
        kind.to_string()
    }
}

impl TryFrom<String> for StrategyKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub strategy: StrategyKind,
    /// Elicitation rounds; 0 records only the round-0 baseline.
    pub total_iter: usize,
    /// Items requested per user per round.
    pub batch_size: usize,
    pub hybrid: HybridConfig,
    pub free: FreeConfig,
    pub train: TrainConfig,
    pub binary_train: BinaryTrainConfig,
    /// Neighborhood size of the item-kNN ranker.
    pub iknn_k: usize,
    /// Base seed; per-round model seeds are derived from it.
    pub master_seed: u64,
    /// Keep a log of every elicited (round, user, item, rating); useful
    /// for invariant checks, off by default.
    pub record_elicitations: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::AdaptiveHybrid,
            total_iter: 25,
            batch_size: 10,
            hybrid: HybridConfig::default(),
            free: FreeConfig::default(),
            train: TrainConfig::default(),
            binary_train: BinaryTrainConfig::default(),
            iknn_k: 40,
            master_seed: 42,
            record_elicitations: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.batch_size == 0 {
            return Err(Error::param("batch", "must be at least 1"));
        }
        if self.iknn_k == 0 {
            return Err(Error::param("iknn_k", "must be at least 1"));
        }
        self.hybrid.validate()?;
        Ok(())
    }

    /// Whether this run ever needs the binary likelihood model.
    fn needs_binary(&self) -> bool {
        match self.strategy {
            StrategyKind::Personalized(kind) => kind.needs_binary_model(),
            StrategyKind::AdaptiveHybrid => self.hybrid.p_strategy.needs_binary_model(),
            StrategyKind::NonPersonalized(_) => false,
        }
    }

    fn needs_np_scores(&self) -> bool {
        matches!(
            self.strategy,
            StrategyKind::NonPersonalized(_) | StrategyKind::AdaptiveHybrid
        )
    }

    fn needs_iknn(&self) -> bool {
        match self.strategy {
            StrategyKind::Personalized(kind) => kind == PersKind::Iknn,
            StrategyKind::AdaptiveHybrid => self.hybrid.p_strategy == PersKind::Iknn,
            StrategyKind::NonPersonalized(_) => false,
        }
    }
}

/// One row of the per-round report. `seconds` is measured wall time and
/// is diagnostic only; the CSV emitted by the CLI keeps that column
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iter: usize,
    pub elicited: usize,
    pub free: usize,
    pub mae: f64,
    pub seconds: f64,
    /// Dataset ratings currently in K (free copies excluded).
    pub known_real: usize,
    /// Free copies currently in K.
    pub known_free: usize,
    /// Ratings still elicitable.
    pub pool_remaining: usize,
}

/// What happened to a free rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeEventStatus {
    /// Copied into K.
    Applied,
    /// Later replaced by a genuinely elicited rating for the same cell.
    Overwritten,
}

impl fmt::Display for FreeEventStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreeEventStatus::Applied => write!(f, "applied"),
            FreeEventStatus::Overwritten => write!(f, "overwritten"),
        }
    }
}

/// Free-rating log row: `rating` is the copied value for `applied` rows
/// and the real replacing value for `overwritten` rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEventRecord {
    pub iter: usize,
    pub user: UserId,
    pub source: ItemId,
    pub target: ItemId,
    pub rating: u8,
    pub similarity: f64,
    pub status: FreeEventStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElicitationRecord {
    pub iter: usize,
    pub user: UserId,
    pub item: ItemId,
    pub rating: u8,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub strategy: String,
    pub reports: Vec<IterationReport>,
    pub events: Vec<FreeEventRecord>,
    pub elicitations: Vec<ElicitationRecord>,
    /// Every user ran out of elicitable items before `total_iter`.
    pub truncated: bool,
}

/// Mean absolute error of the (clamped) predictions over the test matrix.
pub fn mae(model: &FactorModel, test: &SparseRatingMatrix) -> Result<f64, Error> {
    if test.is_empty() {
        return Err(Error::EmptyTestMatrix);
    }
    let total: f64 = test
        .triples()
        .map(|t| (t.rating as f64 - model.predict(t.user, t.item)).abs())
        .sum();
    Ok(total / test.len() as f64)
}

/// Immutable snapshots every user ranking of one round reads from.
struct RoundContext<'a> {
    config: &'a SimulationConfig,
    base_model: &'a FactorModel,
    binary_model: Option<&'a FactorModel>,
    iknn: Option<&'a ItemKnn<'a>>,
    np_scores: Option<&'a ScoreVector>,
    /// Top-N non-personalized shortlist, when configured.
    np_shortlist: Option<&'a HashSet<ItemId>>,
    iter: usize,
    total_iter: usize,
}

impl<'a> RoundContext<'a> {
    fn rank_personalized(&self, kind: PersKind, user: UserId, pool: &[ItemId]) -> UserRanking {
        match kind {
            PersKind::MaxRating => pers::max_rating(user, self.base_model, pool),
            PersKind::MinRating => pers::min_rating(user, self.base_model, pool),
            PersKind::MinNorm => pers::min_norm(user, self.base_model, pool),
            PersKind::Iknn => self.iknn.expect("iknn context prepared").rank(user, pool),
            PersKind::Binary => {
                pers::binary(user, self.binary_model.expect("binary model prepared"), pool)
            }
            PersKind::NonMyopic => {
                let by_norm = pers::min_norm(user, self.base_model, pool);
                let by_rating = pers::min_rating(user, self.base_model, pool);
                pers::non_myopic(user, self.iter, self.total_iter.max(1), &by_norm, &by_rating)
                    .expect("validated parameters")
            }
        }
    }

    fn np_ranking(&self, user: UserId, pool: &[ItemId]) -> UserRanking {
        let scores = self.np_scores.expect("non-personalized scores prepared");
        let entries = pool.iter().map(|&i| (i, scores.get(i).unwrap_or(0.0))).collect();
        UserRanking::from_scores_desc(user, entries)
    }

    fn rank(&self, user: UserId, pool: &[ItemId]) -> UserRanking {
        match self.config.strategy {
            StrategyKind::NonPersonalized(_) => self.np_ranking(user, pool),
            StrategyKind::Personalized(kind) => self.rank_personalized(kind, user, pool),
            StrategyKind::AdaptiveHybrid => {
                let restricted: Vec<ItemId> = match self.np_shortlist {
                    Some(shortlist) => {
                        let kept: Vec<ItemId> =
                            pool.iter().copied().filter(|i| shortlist.contains(i)).collect();
                        if kept.is_empty() {
                            log::warn!(
                                "user {user}: non-personalized shortlist misses the whole pool; \
                                 using the full pool"
                            );
                            pool.to_vec()
                        } else {
                            kept
                        }
                    }
                    None => pool.to_vec(),
                };
                let np = self.np_ranking(user, &restricted);
                let p = self.rank_personalized(self.config.hybrid.p_strategy, user, &restricted);
                let w = hybrid::hybrid_weight(self.iter, self.config.hybrid.alpha)
                    .expect("validated parameters");
                hybrid::hybrid_rank_weighted(user, &np, &p, w)
            }
        }
    }
}

/// Runs the full simulation over a working copy of the split.
///
/// The returned report list has `total_iter + 1` entries (index 0 is the
/// pre-elicitation baseline) unless every user ran dry first, in which
/// case it is shorter and `truncated` is set.
pub fn run(
    config: &SimulationConfig,
    split: &DatasetSplit,
    features: Option<&ItemFeatureMatrix>,
) -> Result<SimulationResult, Error> {
    config.validate()?;
    if config.free.mode != FreeMode::Off && features.is_none() {
        return Err(Error::param("free-ratings", "enabled but no item features supplied"));
    }

    let mut known = split.known.clone();
    let mut pool = split.elicitable.clone();
    let test = &split.test;
    let users: Vec<UserId> = split.user_universe();
    let items: Vec<ItemId> = split.item_universe();
    let initial_real = known.len() + pool.len() + test.len();

    let mut reports: Vec<IterationReport> = Vec::with_capacity(config.total_iter + 1);
    let mut events: Vec<FreeEventRecord> = Vec::new();
    let mut elicitations: Vec<ElicitationRecord> = Vec::new();
    // Cells of K holding a free copy instead of a dataset rating.
    let mut free_cells: BTreeMap<(UserId, ItemId), FreeEventRecord> = BTreeMap::new();
    let mut exhausted_logged: BTreeSet<UserId> = BTreeSet::new();
    let mut truncated = false;

    // Feature-only vectors never change; build them once.
    let static_vectors = if config.free.mode == FreeMode::FeaturesOnly {
        Some(free::build_vectors(&items, features.unwrap(), None, &config.free)?)
    } else {
        None
    };

    let round_start = Instant::now();
    let mut base_model = train_base(config, &known, 0)?;
    let mae0 = mae(&base_model, test)?;
    reports.push(IterationReport {
        iter: 0,
        elicited: 0,
        free: 0,
        mae: mae0,
        seconds: round_start.elapsed().as_secs_f64(),
        known_real: known.len() - free_cells.len(),
        known_free: free_cells.len(),
        pool_remaining: pool.len(),
    });

    for iter in 1..=config.total_iter {
        let round_start = Instant::now();
        if pool.is_empty() {
            log::info!("all users exhausted their elicitable pools; stopping after round {}", iter - 1);
            truncated = true;
            break;
        }

        // Round-start snapshots.
        let pool_items: Vec<ItemId> = pool.items().collect();
        let np_scores = if config.needs_np_scores() {
            let stats = ItemStats::build(&known, pool_items.iter().copied(), users.len());
            let np_kind = match config.strategy {
                StrategyKind::NonPersonalized(kind) => kind,
                _ => config.hybrid.np_strategy,
            };
            Some(np_kind.score(&stats, config.master_seed + RANDOM_SEED_OFFSET + iter as u64))
        } else {
            None
        };
        let np_shortlist: Option<HashSet<ItemId>> = match (config.strategy, config.hybrid.np_shortlist_size) {
            (StrategyKind::AdaptiveHybrid, Some(limit)) => Some(
                np_scores
                    .as_ref()
                    .expect("hybrid computes np scores")
                    .ranked()
                    .into_iter()
                    .take(limit)
                    .collect(),
            ),
            _ => None,
        };
        let binary_model = if config.needs_binary() {
            Some(pers::train_binary_model(
                &known,
                &users,
                &items,
                &config.binary_train,
                config.master_seed + BINARY_SEED_OFFSET + iter as u64,
            )?)
        } else {
            None
        };
        let iknn = config.needs_iknn().then(|| ItemKnn::new(&known, config.iknn_k));
        let ctx = RoundContext {
            config,
            base_model: &base_model,
            binary_model: binary_model.as_ref(),
            iknn: iknn.as_ref(),
            np_scores: np_scores.as_ref(),
            np_shortlist: np_shortlist.as_ref(),
            iter,
            total_iter: config.total_iter,
        };

        // Rank every user against the snapshots, in parallel; apply later
        // in ascending user order so the commit is deterministic.
        let mut selections: Vec<(UserId, Vec<ItemId>)> = users
            .par_iter()
            .filter_map(|&user| {
                let row = pool.user_ratings(user);
                if row.is_empty() {
                    return None;
                }
                let candidates: Vec<ItemId> = row.iter().map(|&(i, _)| i).collect();
                let ranking = ctx.rank(user, &candidates);
                let picks: Vec<ItemId> =
                    ranking.items().take(config.batch_size).collect();
                Some((user, picks))
            })
            .collect();
        selections.sort_by_key(|&(user, _)| user);

        for &user in &users {
            if pool.user_ratings(user).is_empty() && exhausted_logged.insert(user) {
                log::info!("user {user} has no elicitable items left; skipping from round {iter}");
            }
        }

        // Commit phase: move the elicited ratings from X to K.
        let mut elicited_count = 0usize;
        let mut per_user_elicited: Vec<(UserId, Vec<(ItemId, u8)>)> = Vec::new();
        for (user, picks) in selections {
            let mut taken: Vec<(ItemId, u8)> = Vec::with_capacity(picks.len());
            for item in picks {
                let rating = pool.remove(user, item).expect("picked from the user's pool");
                if let Some(original) = free_cells.remove(&(user, item)) {
                    // A free copy occupied this cell; the real rating wins.
                    events.push(FreeEventRecord {
                        iter,
                        rating,
                        status: FreeEventStatus::Overwritten,
                        ..original
                    });
                }
                known.insert(user, item, rating);
                if config.record_elicitations {
                    elicitations.push(ElicitationRecord { iter, user, item, rating });
                }
                taken.push((item, rating));
                elicited_count += 1;
            }
            per_user_elicited.push((user, taken));
        }

        // Free-rating phase.
        let mut free_count = 0usize;
        if config.free.mode != FreeMode::Off {
            let fresh_vectors = if config.free.mode == FreeMode::FeaturesPlusEmbeddings {
                Some(free::build_vectors(&items, features.unwrap(), Some(&base_model), &config.free)?)
            } else {
                None
            };
            let vectors = fresh_vectors
                .as_ref()
                .or(static_vectors.as_ref())
                .expect("vectors prepared for enabled free mode");
            // Inference only reads the user's own K row, so parallel
            // inference against the committed K matches sequential
            // application order.
            let mut inferred: Vec<(UserId, Vec<free::FreeRatingEvent>)> = per_user_elicited
                .par_iter()
                .map(|(user, elicited)| {
                    (*user, free::infer_free_ratings(*user, elicited, vectors, &known, config.free.per_item))
                })
                .collect();
            inferred.sort_by_key(|&(user, _)| user);
            for (_, user_events) in inferred {
                for event in user_events {
                    let previous = known.insert(event.user, event.target_item, event.rating);
                    debug_assert!(previous.is_none(), "free rating overwrote an existing cell");
                    let record = FreeEventRecord {
                        iter,
                        user: event.user,
                        source: event.source_item,
                        target: event.target_item,
                        rating: event.rating,
                        similarity: event.similarity,
                        status: FreeEventStatus::Applied,
                    };
                    free_cells.insert((event.user, event.target_item), record);
                    events.push(record);
                    free_count += 1;
                }
            }
        }

        // Retrain from scratch on the grown K and evaluate.
        base_model = train_base(config, &known, iter)?;
        let mae_now = mae(&base_model, test)?;

        debug_assert_eq!(
            known.len() - free_cells.len() + pool.len() + test.len(),
            initial_real,
            "dataset ratings leaked at round {iter}"
        );

        let seconds = round_start.elapsed().as_secs_f64();
        log::info!(
            "[{}] round {iter}: mae {:.6}, elicited {elicited_count}, free {free_count}, {seconds:.2}s",
            config.strategy,
            mae_now
        );
        reports.push(IterationReport {
            iter,
            elicited: elicited_count,
            free: free_count,
            mae: mae_now,
            seconds,
            known_real: known.len() - free_cells.len(),
            known_free: free_cells.len(),
            pool_remaining: pool.len(),
        });
    }

    Ok(SimulationResult {
        strategy: config.strategy.to_string(),
        reports,
        events,
        elicitations,
        truncated,
    })
}

fn train_base(
    config: &SimulationConfig,
    known: &SparseRatingMatrix,
    iter: usize,
) -> Result<FactorModel, Error> {
    let mut train_config = config.train.clone();
    train_config.seed = config.master_seed + iter as u64;
    recsys::train(known, &train_config)
}

/// Runs several configurations against the same split (each run works on
/// its own copies). All configurations must agree on the master seed so
/// the curves stay comparable.
pub fn compare_strategies(
    configs: &[SimulationConfig],
    split: &DatasetSplit,
    features: Option<&ItemFeatureMatrix>,
) -> Result<Vec<SimulationResult>, Error> {
    let first_seed = match configs.first() {
        Some(config) => config.master_seed,
        None => return Err(Error::param("configs", "nothing to compare")),
    };
    if configs.iter().any(|c| c.master_seed != first_seed) {
        return Err(Error::param(
            "configs",
            "master seeds differ; comparisons need a shared seed",
        ));
    }
    configs.iter().map(|config| run(config, split, features)).collect()
}
