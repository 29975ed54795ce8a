//! Rating data: loaders, density filtering and the K/X/T split.
//!
//! The offline elicitation protocol works on three disjoint matrices drawn
//! from one filtered dataset: `K` holds the ratings the system already
//! knows, `X` holds the ratings a simulated user could still provide, and
//! `T` is the untouched evaluation set.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Highest rating value in MovieLens-style data.
pub const MAX_RATING: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One observed rating. Values are integers in `1..=MAX_RATING`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingTriple {
    pub user: UserId,
    pub item: ItemId,
    pub rating: u8,
}

/// Input file format for [`load_ratings`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingsFormat {
    /// MovieLens 1M `ratings.dat`: `UserID::MovieID::Rating::Timestamp`.
    Movielens1m,
    /// Generic `user,item,rating` CSV, optional header line.
    Csv,
}

impl std::str::FromStr for RatingsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "movielens_1m" | "movielens" | "dat" => Ok(RatingsFormat::Movielens1m),
            "csv" => Ok(RatingsFormat::Csv),
            other => Err(Error::param("format", format!("unknown ratings format `{other}`"))),
        }
    }
}

impl fmt::Display for RatingsFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatingsFormat::Movielens1m => write!(f, "movielens_1m"),
            RatingsFormat::Csv => write!(f, "csv"),
        }
    }
}

/// Sparse user-item rating matrix with both row and column views.
///
/// The row view maps each user to their `(item, rating)` pairs, the column
/// view maps each item to its `(user, rating)` pairs; the two always hold
/// the same triples. Rows and columns are kept sorted so every iteration
/// order is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseRatingMatrix {
    rows: BTreeMap<UserId, Vec<(ItemId, u8)>>,
    cols: BTreeMap<ItemId, Vec<(UserId, u8)>>,
    len: usize,
}

impl SparseRatingMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = RatingTriple>) -> Self {
        let mut m = Self::new();
        for t in triples {
            m.insert(t.user, t.item, t.rating);
        }
        m
    }

    /// Inserts or overwrites the rating for `(user, item)`.
    /// Returns the previous value if the cell was already present.
    pub fn insert(&mut self, user: UserId, item: ItemId, rating: u8) -> Option<u8> {
        let row = self.rows.entry(user).or_default();
        let prev = match row.binary_search_by_key(&item, |&(i, _)| i) {
            Ok(pos) => Some(std::mem::replace(&mut row[pos].1, rating)),
            Err(pos) => {
                row.insert(pos, (item, rating));
                None
            }
        };
        let col = self.cols.entry(item).or_default();
        match col.binary_search_by_key(&user, |&(u, _)| u) {
            Ok(pos) => col[pos].1 = rating,
            Err(pos) => col.insert(pos, (user, rating)),
        }
        if prev.is_none() {
            self.len += 1;
        }
        prev
    }

    /// Removes the `(user, item)` cell, returning its rating if present.
    pub fn remove(&mut self, user: UserId, item: ItemId) -> Option<u8> {
        let row = self.rows.get_mut(&user)?;
        let pos = row.binary_search_by_key(&item, |&(i, _)| i).ok()?;
        let (_, rating) = row.remove(pos);
        if row.is_empty() {
            self.rows.remove(&user);
        }
        let col = self.cols.get_mut(&item).expect("column view out of sync");
        let cpos = col
            .binary_search_by_key(&user, |&(u, _)| u)
            .expect("column view out of sync");
        col.remove(cpos);
        if col.is_empty() {
            self.cols.remove(&item);
        }
        self.len -= 1;
        Some(rating)
    }

    pub fn get(&self, user: UserId, item: ItemId) -> Option<u8> {
        let row = self.rows.get(&user)?;
        row.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| row[pos].1)
    }

    pub fn contains(&self, user: UserId, item: ItemId) -> bool {
        self.get(user, item).is_some()
    }

    /// Number of stored ratings.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_users(&self) -> usize {
        self.rows.len()
    }

    pub fn num_items(&self) -> usize {
        self.cols.len()
    }

    /// Users in ascending id order.
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.rows.keys().copied()
    }

    /// Items in ascending id order.
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.cols.keys().copied()
    }

    /// The user's `(item, rating)` pairs sorted by item id; empty if unknown.
    pub fn user_ratings(&self, user: UserId) -> &[(ItemId, u8)] {
        self.rows.get(&user).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The item's `(user, rating)` pairs sorted by user id; empty if unknown.
    pub fn item_ratings(&self, item: ItemId) -> &[(UserId, u8)] {
        self.cols.get(&item).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All triples in (user, item) order.
    pub fn triples(&self) -> impl Iterator<Item = RatingTriple> + '_ {
        self.rows.iter().flat_map(|(&user, row)| {
            row.iter().map(move |&(item, rating)| RatingTriple { user, item, rating })
        })
    }

    /// Mean of all stored ratings; 0 when empty.
    pub fn global_mean(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        let sum: u64 = self
            .rows
            .values()
            .flat_map(|row| row.iter().map(|&(_, r)| r as u64))
            .sum();
        sum as f64 / self.len as f64
    }
}

/// The three disjoint matrices of the offline elicitation protocol.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    /// Ratings the system knows from the start (grows during simulation).
    pub known: SparseRatingMatrix,
    /// Ratings the simulated user can still be asked for.
    pub elicitable: SparseRatingMatrix,
    /// Held-out evaluation ratings; never touched by the simulation.
    pub test: SparseRatingMatrix,
}

impl DatasetSplit {
    /// All users appearing in any of the three matrices, ascending.
    pub fn user_universe(&self) -> Vec<UserId> {
        let mut users: BTreeSet<UserId> = BTreeSet::new();
        users.extend(self.known.users());
        users.extend(self.elicitable.users());
        users.extend(self.test.users());
        users.into_iter().collect()
    }

    /// All items appearing in any of the three matrices, ascending.
    pub fn item_universe(&self) -> Vec<ItemId> {
        let mut items: BTreeSet<ItemId> = BTreeSet::new();
        items.extend(self.known.items());
        items.extend(self.elicitable.items());
        items.extend(self.test.items());
        items.into_iter().collect()
    }

    pub fn total_ratings(&self) -> usize {
        self.known.len() + self.elicitable.len() + self.test.len()
    }
}

/// Binary item side-information vectors over a fixed vocabulary.
///
/// The vocabulary lists genre dimensions first, actor dimensions second,
/// each block sorted lexicographically, so identical token files always
/// produce identical vectors.
#[derive(Debug, Clone)]
pub struct ItemFeatureMatrix {
    vocab: Vec<String>,
    genre_dims: usize,
    vectors: BTreeMap<ItemId, Vec<u32>>,
}

impl ItemFeatureMatrix {
    /// Builds the matrix from per-item token lists. `genres` and `actors`
    /// are separate namespaces; duplicates within an item are collapsed.
    pub fn from_tokens(items: impl IntoIterator<Item = (ItemId, Vec<String>, Vec<String>)>) -> Self {
        let entries: Vec<(ItemId, Vec<String>, Vec<String>)> = items.into_iter().collect();
        let mut genres: BTreeSet<&str> = BTreeSet::new();
        let mut actors: BTreeSet<&str> = BTreeSet::new();
        for (_, g, a) in &entries {
            genres.extend(g.iter().map(String::as_str));
            actors.extend(a.iter().map(String::as_str));
        }
        let genre_dims = genres.len();
        let mut vocab: Vec<String> = Vec::with_capacity(genre_dims + actors.len());
        vocab.extend(genres.iter().map(|s| s.to_string()));
        vocab.extend(actors.iter().map(|s| s.to_string()));
        let genre_index: HashMap<&str, u32> =
            genres.iter().enumerate().map(|(i, &s)| (s, i as u32)).collect();
        let actor_index: HashMap<&str, u32> = actors
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, (genre_dims + i) as u32))
            .collect();

        let mut vectors = BTreeMap::new();
        for (item, g, a) in &entries {
            let mut dims: Vec<u32> = g
                .iter()
                .map(|t| genre_index[t.as_str()])
                .chain(a.iter().map(|t| actor_index[t.as_str()]))
                .collect();
            dims.sort_unstable();
            dims.dedup();
            if dims.is_empty() {
                log::warn!("item {item} has no feature tokens; using a zero vector");
            }
            vectors.insert(*item, dims);
        }
        Self { vocab, genre_dims, vectors }
    }

    /// Total feature dimension (genres + actors).
    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn genre_dims(&self) -> usize {
        self.genre_dims
    }

    pub fn actor_dims(&self) -> usize {
        self.vocab.len() - self.genre_dims
    }

    pub fn num_items(&self) -> usize {
        self.vectors.len()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.vectors.contains_key(&item)
    }

    /// Sorted indices of the item's active dimensions.
    pub fn active_dims(&self, item: ItemId) -> Result<&[u32], Error> {
        self.vectors
            .get(&item)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownItem(item))
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.vectors.keys().copied()
    }
}

/// Reads rating triples from `path`.
///
/// MovieLens lines look like `1::1193::5::978300760`; timestamps are
/// discarded. The CSV fallback expects `user,item,rating` with an optional
/// header. Malformed lines and out-of-range ratings are reported with their
/// line number.
pub fn load_ratings(path: &Path, format: RatingsFormat) -> Result<Vec<RatingTriple>, Error> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = match format {
            RatingsFormat::Movielens1m => trimmed.split("::").collect(),
            RatingsFormat::Csv => trimmed.split(',').map(str::trim).collect(),
        };
        let (min_fields, max_fields) = match format {
            RatingsFormat::Movielens1m => (4, 4),
            RatingsFormat::Csv => (3, 4),
        };
        if fields.len() < min_fields || fields.len() > max_fields {
            if format == RatingsFormat::Csv && line_no == 1 && looks_like_header(&fields) {
                continue;
            }
            return Err(Error::Parse {
                path: path_str,
                line: line_no,
                detail: format!("expected {min_fields} fields, found {}", fields.len()),
            });
        }
        let parse_u32 = |field: &str, what: &str| -> Result<u32, Error> {
            field.parse::<u32>().map_err(|_| Error::Parse {
                path: path_str.clone(),
                line: line_no,
                detail: format!("invalid {what} `{field}`"),
            })
        };
        if format == RatingsFormat::Csv && line_no == 1 && looks_like_header(&fields) {
            continue;
        }
        let user = parse_u32(fields[0], "user id")?;
        let item = parse_u32(fields[1], "item id")?;
        let rating: i64 = fields[2].parse().map_err(|_| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            detail: format!("invalid rating `{}`", fields[2]),
        })?;
        if rating < 1 || rating > MAX_RATING as i64 {
            return Err(Error::RatingOutOfRange {
                path: path_str,
                line: line_no,
                value: rating,
                max: MAX_RATING,
            });
        }
        triples.push(RatingTriple {
            user: UserId(user),
            item: ItemId(item),
            rating: rating as u8,
        });
    }
    Ok(triples)
}

fn looks_like_header(fields: &[&str]) -> bool {
    fields
        .iter()
        .take(3)
        .any(|f| f.parse::<i64>().is_err())
}

/// Reads item side information.
///
/// One item per line: `item_id<TAB>token,token,...`. Tokens prefixed
/// `actor:` populate the actor block, `genre:` (or no prefix) the genre
/// block. Lines starting with `#` and blank lines are skipped.
pub fn load_item_features(path: &Path) -> Result<ItemFeatureMatrix, Error> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut entries: Vec<(ItemId, Vec<String>, Vec<String>)> = Vec::new();
    let mut seen: HashSet<ItemId> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        // A line with no tab (or a trailing tab eaten by trim) is an item
        // with an empty token list.
        let (id_part, tokens_part) = trimmed.split_once('\t').unwrap_or((trimmed, ""));
        let item = ItemId(id_part.trim().parse::<u32>().map_err(|_| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            detail: format!("invalid item id `{id_part}`"),
        })?);
        if !seen.insert(item) {
            return Err(Error::Parse {
                path: path_str,
                line: line_no,
                detail: format!("duplicate item id {item}"),
            });
        }
        let mut genres = Vec::new();
        let mut actors = Vec::new();
        for token in tokens_part.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            if let Some(name) = token.strip_prefix("actor:") {
                actors.push(name.trim().to_string());
            } else if let Some(name) = token.strip_prefix("genre:") {
                genres.push(name.trim().to_string());
            } else {
                genres.push(token.to_string());
            }
        }
        entries.push((item, genres, actors));
    }
    Ok(ItemFeatureMatrix::from_tokens(entries))
}

/// Keeps only ratings whose user AND item both have at least `min_count`
/// ratings, iterating alternately over the two axes until both constraints
/// hold simultaneously.
pub fn filter_dense(ratings: &[RatingTriple], min_count: usize) -> Result<Vec<RatingTriple>, Error> {
    if min_count <= 1 {
        return Ok(ratings.to_vec());
    }
    let mut kept: Vec<RatingTriple> = ratings.to_vec();
    loop {
        let mut user_counts: HashMap<UserId, usize> = HashMap::new();
        let mut item_counts: HashMap<ItemId, usize> = HashMap::new();
        for t in &kept {
            *user_counts.entry(t.user).or_default() += 1;
            *item_counts.entry(t.item).or_default() += 1;
        }
        let before = kept.len();
        kept.retain(|t| user_counts[&t.user] >= min_count && item_counts[&t.item] >= min_count);
        if kept.is_empty() {
            return Err(Error::FilterRemovedEverything { min_count });
        }
        if kept.len() == before {
            return Ok(kept);
        }
    }
}

/// Draws, per user, `k_per_user` ratings into K and `t_per_user` into T
/// uniformly at random; the remainder lands in X. Deterministic under
/// `seed`. Every user must have strictly more than `k_per_user +
/// t_per_user` ratings so X is never empty at the start.
pub fn split(
    ratings: &[RatingTriple],
    k_per_user: usize,
    t_per_user: usize,
    seed: u64,
) -> Result<DatasetSplit, Error> {
    let mut by_user: BTreeMap<UserId, Vec<RatingTriple>> = BTreeMap::new();
    for t in ratings {
        by_user.entry(t.user).or_default().push(*t);
    }
    let need = k_per_user + t_per_user;
    let mut known = SparseRatingMatrix::new();
    let mut elicitable = SparseRatingMatrix::new();
    let mut test = SparseRatingMatrix::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (user, mut row) in by_user {
        if row.len() <= need {
            return Err(Error::SplitTooFewRatings { user, have: row.len(), need });
        }
        row.sort_by_key(|t| t.item);
        row.shuffle(&mut rng);
        for (pos, t) in row.into_iter().enumerate() {
            let target = if pos < k_per_user {
                &mut known
            } else if pos < need {
                &mut test
            } else {
                &mut elicitable
            };
            target.insert(t.user, t.item, t.rating);
        }
    }
    Ok(DatasetSplit { known, elicitable, test })
}

/// Keeps the ratings of a uniformly drawn subset of `n` users (all users if
/// `n` is 0 or exceeds the user count). Deterministic under `seed`.
pub fn subsample_users(ratings: &[RatingTriple], n: usize, seed: u64) -> Vec<RatingTriple> {
    let users: BTreeSet<UserId> = ratings.iter().map(|t| t.user).collect();
    if n == 0 || n >= users.len() {
        return ratings.to_vec();
    }
    let mut users: Vec<UserId> = users.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    users.shuffle(&mut rng);
    let keep: HashSet<UserId> = users.into_iter().take(n).collect();
    ratings.iter().filter(|t| keep.contains(&t.user)).copied().collect()
}
