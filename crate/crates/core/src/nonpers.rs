//! Non-personalized item scorers.
//!
//! Each scorer assigns one score per candidate item from the known matrix
//! alone; every user sees the same ranking and higher scores are elicited
//! first. Logarithms are natural throughout. An item nobody has rated in
//! the known matrix scores 0 under every scorer.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ItemId, SparseRatingMatrix, MAX_RATING};
use crate::error::Error;

/// Per-item summary of the known matrix over the candidate pool.
#[derive(Debug, Clone)]
pub struct ItemStats {
    total_users: usize,
    max_rating: u8,
    items: BTreeMap<ItemId, ItemStat>,
}

#[derive(Debug, Clone)]
struct ItemStat {
    /// Number of raters in K.
    count: usize,
    /// Histogram over rating values 1..=max_rating.
    hist: Vec<usize>,
    sum: u64,
    /// Sum over this item's raters of how many *other* items each rated,
    /// i.e. `Σ_{j≠i} |U_i ∩ U_j|` unrolled per user.
    co_ratings: usize,
}

impl ItemStat {
    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }

    fn variance(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let mean = self.mean();
        let sq_sum: f64 = self
            .hist
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let r = (idx + 1) as f64;
                c as f64 * (r - mean) * (r - mean)
            })
            .sum();
        sq_sum / self.count as f64
    }

    /// Shannon entropy of the rating distribution over raters only.
    fn entropy(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let n = self.count as f64;
        -self
            .hist
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    }
}

impl ItemStats {
    /// Summarizes the known matrix for every item in `pool`.
    /// `total_users` is the size of the full user set (entropy0 treats
    /// users without a rating for an item as a "rating 0" class).
    pub fn build(
        known: &SparseRatingMatrix,
        pool: impl IntoIterator<Item = ItemId>,
        total_users: usize,
    ) -> Self {
        let mut items = BTreeMap::new();
        for item in pool {
            let col = known.item_ratings(item);
            let mut hist = vec![0usize; MAX_RATING as usize];
            let mut sum = 0u64;
            let mut co_ratings = 0usize;
            for &(user, rating) in col {
                hist[rating as usize - 1] += 1;
                sum += rating as u64;
                co_ratings += known.user_ratings(user).len() - 1;
            }
            items.insert(item, ItemStat { count: col.len(), hist, sum, co_ratings });
        }
        Self { total_users, max_rating: MAX_RATING, items }
    }

    pub fn total_users(&self) -> usize {
        self.total_users
    }

    pub fn pool(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items.keys().copied()
    }

    pub fn pool_size(&self) -> usize {
        self.items.len()
    }

    pub fn rater_count(&self, item: ItemId) -> usize {
        self.items.get(&item).map(|s| s.count).unwrap_or(0)
    }

    pub fn mean_rating(&self, item: ItemId) -> f64 {
        self.items.get(&item).map(|s| s.mean()).unwrap_or(0.0)
    }

    fn map<F: Fn(&ItemStat) -> f64>(&self, f: F) -> ScoreVector {
        ScoreVector {
            scores: self.items.iter().map(|(&i, s)| (i, f(s))).collect(),
        }
    }
}

/// Item scores over the candidate pool; all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: BTreeMap<ItemId, f64>,
}

impl ScoreVector {
    pub fn get(&self, item: ItemId) -> Option<f64> {
        self.scores.get(&item).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.scores.iter().map(|(&i, &s)| (i, s))
    }

    /// Items best-first: descending score, ties by ascending item id.
    pub fn ranked(&self) -> Vec<ItemId> {
        let mut v: Vec<(ItemId, f64)> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().map(|(i, _)| i).collect()
    }

    /// Dense 1-based ranks (1 = best) over the subset of `items` that this
    /// vector scores; items missing from the vector are skipped.
    pub fn ranks_over<I: IntoIterator<Item = ItemId>>(&self, items: I) -> BTreeMap<ItemId, usize> {
        let mut subset: Vec<(ItemId, f64)> = items
            .into_iter()
            .filter_map(|i| self.get(i).map(|s| (i, s)))
            .collect();
        subset.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        subset.into_iter().enumerate().map(|(pos, (i, _))| (i, pos + 1)).collect()
    }
}

/// Variance of the item's ratings (population variance over its raters).
pub fn variance(stats: &ItemStats) -> ScoreVector {
    stats.map(ItemStat::variance)
}

/// Entropy of the rating distribution over the item's raters.
pub fn entropy(stats: &ItemStats) -> ScoreVector {
    stats.map(ItemStat::entropy)
}

/// Entropy over *all* users, counting the absence of a rating as an extra
/// "rating 0" class.
pub fn entropy0(stats: &ItemStats) -> ScoreVector {
    let total = stats.total_users;
    stats.map(|s| {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        let missing = total.saturating_sub(s.count);
        let mut ent = 0.0;
        if missing > 0 {
            let p = missing as f64 / n;
            ent -= p * p.ln();
        }
        for &c in &s.hist {
            if c > 0 {
                let p = c as f64 / n;
                ent -= p * p.ln();
            }
        }
        ent
    })
}

/// Number of co-ratings with other items: `Σ_{j≠i} |U_i ∩ U_j|`.
pub fn co_coverage(stats: &ItemStats) -> ScoreVector {
    stats.map(|s| s.co_ratings as f64)
}

/// Rater count `|U_i|`.
pub fn popularity(stats: &ItemStats) -> ScoreVector {
    stats.map(|s| s.count as f64)
}

/// `ln(pop) × Ent`.
pub fn pop_entropy(stats: &ItemStats) -> ScoreVector {
    stats.map(|s| {
        if s.count == 0 {
            0.0
        } else {
            (s.count as f64).ln() * s.entropy()
        }
    })
}

/// `√pop × Var`.
pub fn pop_variance(stats: &ItemStats) -> ScoreVector {
    stats.map(|s| {
        if s.count == 0 {
            0.0
        } else {
            (s.count as f64).sqrt() * s.variance()
        }
    })
}

/// Closed form behind [`helf`]:
/// `2·ln(pop)·Ent / (ln|U| · ln(maxR) · (ln(pop) + Ent/ln(maxR)))`.
/// Degenerate denominators (single user, unit popularity with zero
/// entropy) score 0.
pub fn helf_formula(pop: usize, total_users: usize, entropy: f64, max_rating: u8) -> f64 {
    if pop == 0 || total_users == 0 {
        return 0.0;
    }
    let ln_pop = (pop as f64).ln();
    let num = 2.0 * ln_pop * entropy;
    if num == 0.0 {
        return 0.0;
    }
    let ln_max = (max_rating as f64).ln();
    let denom = (total_users as f64).ln() * ln_max * (ln_pop + entropy / ln_max);
    if denom == 0.0 || !denom.is_finite() {
        return 0.0;
    }
    num / denom
}

/// Harmonic blend of log-popularity and entropy, exactly as
/// [`helf_formula`] states it.
pub fn helf(stats: &ItemStats) -> ScoreVector {
    stats.map(|s| helf_formula(s.count, stats.total_users, s.entropy(), stats.max_rating))
}

/// Closed form behind [`helf_classic`]: both terms normalized first,
/// `2·LF·HE / (LF + HE)` with `LF = ln(pop)/ln|U|` and
/// `HE = Ent/ln(maxR)`.
pub fn helf_classic_formula(pop: usize, total_users: usize, entropy: f64, max_rating: u8) -> f64 {
    let ln_users = (total_users as f64).ln();
    if pop == 0 || ln_users == 0.0 || !ln_users.is_finite() {
        return 0.0;
    }
    let lf = (pop as f64).ln() / ln_users;
    let he = entropy / (max_rating as f64).ln();
    if lf + he == 0.0 {
        return 0.0;
    }
    2.0 * lf * he / (lf + he)
}

/// Classical harmonic-mean variant of [`helf`].
pub fn helf_classic(stats: &ItemStats) -> ScoreVector {
    stats.map(|s| helf_classic_formula(s.count, stats.total_users, s.entropy(), stats.max_rating))
}

/// Uniform scores in `[0, 1)`, deterministic under `seed`; the baseline
/// strategy. Items are visited in ascending id order.
pub fn random_score(pool: &[ItemId], seed: u64) -> ScoreVector {
    let mut sorted: Vec<ItemId> = pool.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScoreVector {
        scores: sorted.into_iter().map(|i| (i, rng.random::<f64>())).collect(),
    }
}

/// Which non-personalized scorer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonPersKind {
    Variance,
    Entropy,
    Entropy0,
    CoCoverage,
    Popularity,
    PopEntropy,
    PopVariance,
    Helf,
    HelfClassic,
    Random,
}

impl NonPersKind {
    pub const ALL: [NonPersKind; 10] = [
        NonPersKind::Variance,
        NonPersKind::Entropy,
        NonPersKind::Entropy0,
        NonPersKind::CoCoverage,
        NonPersKind::Popularity,
        NonPersKind::PopEntropy,
        NonPersKind::PopVariance,
        NonPersKind::Helf,
        NonPersKind::HelfClassic,
        NonPersKind::Random,
    ];

    /// Scores the pool summarized by `stats`. Only `random` consumes the
    /// seed.
    pub fn score(self, stats: &ItemStats, random_seed: u64) -> ScoreVector {
        match self {
            NonPersKind::Variance => variance(stats),
            NonPersKind::Entropy => entropy(stats),
            NonPersKind::Entropy0 => entropy0(stats),
            NonPersKind::CoCoverage => co_coverage(stats),
            NonPersKind::Popularity => popularity(stats),
            NonPersKind::PopEntropy => pop_entropy(stats),
            NonPersKind::PopVariance => pop_variance(stats),
            NonPersKind::Helf => helf(stats),
            NonPersKind::HelfClassic => helf_classic(stats),
            NonPersKind::Random => {
                let pool: Vec<ItemId> = stats.pool().collect();
                random_score(&pool, random_seed)
            }
        }
    }
}

impl fmt::Display for NonPersKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            NonPersKind::Variance => "variance",
            NonPersKind::Entropy => "entropy",
            NonPersKind::Entropy0 => "entropy0",
            NonPersKind::CoCoverage => "co_coverage",
            NonPersKind::Popularity => "popularity",
            NonPersKind::PopEntropy => "pop_entropy",
            NonPersKind::PopVariance => "pop_variance",
            NonPersKind::Helf => "helf",
            NonPersKind::HelfClassic => "helf_classic",
            NonPersKind::Random => "random",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for NonPersKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "variance" => Ok(NonPersKind::Variance),
            "entropy" => Ok(NonPersKind::Entropy),
            "entropy0" => Ok(NonPersKind::Entropy0),
            "co_coverage" => Ok(NonPersKind::CoCoverage),
            "popularity" => Ok(NonPersKind::Popularity),
            "pop_entropy" => Ok(NonPersKind::PopEntropy),
            "pop_variance" => Ok(NonPersKind::PopVariance),
            "helf" => Ok(NonPersKind::Helf),
            "helf_classic" => Ok(NonPersKind::HelfClassic),
            "random" => Ok(NonPersKind::Random),
            other => Err(Error::param("strategy", format!("unknown scorer `{other}`"))),
        }
    }
}
