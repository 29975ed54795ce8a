//! Synthetic rating/feature data for the integration and acceptance
//! suites, shaped like a dense MovieLens subsample:
//!
//! - a planted low-rank taste model drives the rating values;
//! - items come in small "franchise" clusters (sequels, same-director
//!   films): near-identical latent factors, shared genres and mostly
//!   shared actors, so feature-similar items really are rated alike;
//! - item exposure is zipf-skewed *and* taste-correlated (users mostly
//!   rate what they would watch), the selection bias rating-likelihood
//!   models feed on;
//! - per-user activity is heavy-tailed.
//!
//! Output uses the same file formats the tool ingests.

// Each test target compiles this module separately and none uses all of it.
#![allow(dead_code)]

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LATENT: usize = 3;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    pub genres: usize,
    pub actors: usize,
    /// Every user rates at least this many items...
    pub min_ratings_per_user: usize,
    /// ...plus up to this many more (heavy-tailed).
    pub extra_ratings_span: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// Sized for the 25-round trend-replication protocol: most users hold
    /// more than `25 x 10` elicitable ratings, so strategies still differ
    /// at the final round.
    pub fn movielens_like(seed: u64) -> Self {
        Self {
            users: 320,
            items: 840,
            genres: 14,
            actors: 160,
            min_ratings_per_user: 260,
            extra_ratings_span: 160,
            seed,
        }
    }

    pub fn small(seed: u64) -> Self {
        Self {
            users: 24,
            items: 60,
            genres: 6,
            actors: 20,
            min_ratings_per_user: 25,
            extra_ratings_span: 20,
            seed,
        }
    }
}

pub struct SynthData {
    /// MovieLens-format `user::item::rating::timestamp` lines.
    pub ratings_dat: String,
    /// `item<TAB>genre:...,actor:...` lines covering every item.
    pub features_tsv: String,
}

fn dot(a: &[f64; LATENT], b: &[f64; LATENT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn generate(spec: &SynthSpec) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let proto_factor = Normal::new(0.0, 0.75).unwrap();
    let jitter = Normal::new(0.0, 0.10).unwrap();
    let proto_bias = Normal::new(0.0, 0.25).unwrap();
    let bias_jitter = Normal::new(0.0, 0.06).unwrap();
    let noise = Normal::new(0.0, 0.35).unwrap();

    // Franchise clusters of ~3 items sharing latent factors and features.
    let cluster_size = 3;
    let clusters = spec.items.div_ceil(cluster_size);
    let mut item_factors: Vec<[f64; LATENT]> = Vec::with_capacity(spec.items);
    let mut item_bias: Vec<f64> = Vec::with_capacity(spec.items);
    let mut cluster_of: Vec<usize> = Vec::with_capacity(spec.items);
    for cluster in 0..clusters {
        let proto: [f64; LATENT] = std::array::from_fn(|_| proto_factor.sample(&mut rng));
        let base_bias = proto_bias.sample(&mut rng);
        for _ in 0..cluster_size {
            if item_factors.len() == spec.items {
                break;
            }
            item_factors.push(std::array::from_fn(|d| proto[d] + jitter.sample(&mut rng)));
            item_bias.push(base_bias + bias_jitter.sample(&mut rng));
            cluster_of.push(cluster);
        }
    }

    // Genres are random directions in taste space, assigned per cluster so
    // franchise members always share them.
    let genre_dirs: Vec<[f64; LATENT]> = (0..spec.genres)
        .map(|_| {
            let v: [f64; LATENT] = std::array::from_fn(|_| proto_factor.sample(&mut rng));
            let norm = dot(&v, &v).sqrt().max(1e-9);
            std::array::from_fn(|d| v[d] / norm)
        })
        .collect();
    let genres_of_cluster: Vec<(usize, usize)> = (0..clusters)
        .map(|cluster| {
            let probe = item_factors[cluster_of.iter().position(|&c| c == cluster).unwrap()];
            let mut scored: Vec<(usize, f64)> = genre_dirs
                .iter()
                .enumerate()
                .map(|(g, dir)| (g, dot(&probe, dir)))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            (scored[0].0, scored[1].0)
        })
        .collect();
    // Four candidate actors per cluster; each item carries three of them.
    let cluster_actors: Vec<[usize; 4]> = (0..clusters)
        .map(|cluster| {
            let (primary, secondary) = genres_of_cluster[cluster];
            std::array::from_fn(|slot| {
                let genre = if slot < 3 { primary } else { secondary };
                let stride = spec.actors.div_ceil(spec.genres).max(1);
                (genre + rng.random_range(0..stride) * spec.genres) % spec.actors
            })
        })
        .collect();

    let mut features_tsv = String::new();
    for (item, &cluster) in cluster_of.iter().enumerate() {
        let (primary, secondary) = genres_of_cluster[cluster];
        let dropped = rng.random_range(0..4);
        let mut actors: Vec<usize> = cluster_actors[cluster]
            .iter()
            .enumerate()
            .filter(|&(slot, _)| slot != dropped)
            .map(|(_, &a)| a)
            .collect();
        actors.sort_unstable();
        actors.dedup();
        let _ = write!(features_tsv, "{}\tgenre:G{:02},genre:G{:02}", item + 1, primary, secondary);
        for actor in actors {
            let _ = write!(features_tsv, ",actor:A{actor:03}");
        }
        features_tsv.push('\n');
    }

    // Zipf-ish popularity over a random permutation: item id carries no
    // popularity information.
    let mut order: Vec<usize> = (0..spec.items).collect();
    for idx in (1..order.len()).rev() {
        order.swap(idx, rng.random_range(0..=idx));
    }
    let mut popularity = vec![0.0; spec.items];
    for (rank, &item) in order.iter().enumerate() {
        popularity[item] = 1.0 / (rank as f64 + 3.0).powf(0.8);
    }

    let mut ratings_dat = String::new();
    for user in 0..spec.users {
        let taste: [f64; LATENT] = std::array::from_fn(|_| proto_factor.sample(&mut rng));
        let spread: f64 = rng.random::<f64>();
        let wanted = (spec.min_ratings_per_user as f64
            + spec.extra_ratings_span as f64 * spread.powf(1.5)) as usize;
        let wanted = wanted.min(spec.items * 55 / 100);

        // Exposure = popularity x taste affinity: users mostly rate what
        // they would choose to watch.
        let mut cumulative = Vec::with_capacity(spec.items);
        let mut total = 0.0;
        for item in 0..spec.items {
            let affinity = (0.8 * dot(&taste, &item_factors[item]).tanh()).exp();
            total += popularity[item] * affinity;
            cumulative.push(total);
        }
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < wanted {
            let ticket = rng.random::<f64>() * total;
            let pick = cumulative.partition_point(|&c| c <= ticket).min(spec.items - 1);
            chosen.insert(pick);
        }

        for item in chosen {
            let raw =
                3.4 + item_bias[item] + dot(&taste, &item_factors[item]) + noise.sample(&mut rng);
            let rating = raw.round().clamp(1.0, 5.0) as u8;
            let _ = writeln!(ratings_dat, "{}::{}::{}::0", user + 1, item + 1, rating);
        }
    }

    SynthData { ratings_dat, features_tsv }
}

/// Writes the generated files into `dir` and returns their paths.
pub fn write_into(
    dir: &std::path::Path,
    spec: &SynthSpec,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = generate(spec);
    let ratings = dir.join("ratings.dat");
    let features = dir.join("features.tsv");
    std::fs::write(&ratings, &data.ratings_dat).unwrap();
    std::fs::write(&features, &data.features_tsv).unwrap();
    (ratings, features)
}
