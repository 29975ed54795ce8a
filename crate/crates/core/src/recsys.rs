//! Biased latent-factor recommender trained by stochastic gradient descent.
//!
//! Predictions follow `r̂_ui = μ + b_u + b_i + ⟨p_u, q_i⟩`. The trainer
//! minimizes squared error with L2 regularization over the observed cells,
//! visiting them in a freshly shuffled order each epoch; everything is
//! driven by one seeded RNG so identical inputs give bitwise-identical
//! models.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ItemId, SparseRatingMatrix, UserId};
use crate::error::Error;

/// Standard deviation of the random factor initialization.
const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Latent dimension `d`.
    pub factors: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Clip predictions to `[1, max_rating]`.
    pub clamp: bool,
    pub max_rating: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            factors: 50,
            learning_rate: 0.005,
            regularization: 0.02,
            epochs: 20,
            seed: 0,
            clamp: true,
            max_rating: 5.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.learning_rate <= 0.0 {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if self.regularization < 0.0 {
            return Err(Error::param("regularization", "must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        if self.factors == 0 {
            return Err(Error::param("factors", "must be at least 1"));
        }
        Ok(())
    }
}

/// A trained model. Immutable after training; queries are read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    users: Vec<UserId>,
    items: Vec<ItemId>,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    global_mean: f64,
    factors: usize,
    clamp: Option<(f64, f64)>,
}

impl FactorModel {
    /// Assembles a model from explicit parameters (used for hand-built
    /// fixtures and by the trainer). `users` and `items` must be sorted.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        users: Vec<UserId>,
        items: Vec<ItemId>,
        user_factors: Vec<f64>,
        item_factors: Vec<f64>,
        user_bias: Vec<f64>,
        item_bias: Vec<f64>,
        global_mean: f64,
        factors: usize,
        clamp: Option<(f64, f64)>,
    ) -> Self {
        assert!(users.windows(2).all(|w| w[0] < w[1]), "users must be sorted");
        assert!(items.windows(2).all(|w| w[0] < w[1]), "items must be sorted");
        assert_eq!(user_factors.len(), users.len() * factors);
        assert_eq!(item_factors.len(), items.len() * factors);
        assert_eq!(user_bias.len(), users.len());
        assert_eq!(item_bias.len(), items.len());
        Self {
            users,
            items,
            user_factors,
            item_factors,
            user_bias,
            item_bias,
            global_mean,
            factors,
            clamp,
        }
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    fn user_index(&self, user: UserId) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    fn item_index(&self, item: ItemId) -> Option<usize> {
        self.items.binary_search(&item).ok()
    }

    fn user_row(&self, idx: usize) -> &[f64] {
        &self.user_factors[idx * self.factors..(idx + 1) * self.factors]
    }

    fn item_row(&self, idx: usize) -> &[f64] {
        &self.item_factors[idx * self.factors..(idx + 1) * self.factors]
    }

    /// Rating estimate for `(user, item)`.
    ///
    /// Unknown users or items fall back to the global mean plus whichever
    /// bias is known; this never fails. Clamping applies when enabled.
    pub fn predict(&self, user: UserId, item: ItemId) -> f64 {
        let uidx = self.user_index(user);
        let iidx = self.item_index(item);
        let mut score = self.global_mean;
        if let Some(u) = uidx {
            score += self.user_bias[u];
        }
        if let Some(i) = iidx {
            score += self.item_bias[i];
        }
        if let (Some(u), Some(i)) = (uidx, iidx) {
            score += dot(self.user_row(u), self.item_row(i));
        }
        if let Some((lo, hi)) = self.clamp {
            score = score.clamp(lo, hi);
        }
        score
    }

    /// The item's latent factor row `e_i`.
    pub fn item_embedding(&self, item: ItemId) -> Result<&[f64], Error> {
        let idx = self.item_index(item).ok_or(Error::UnknownItem(item))?;
        Ok(self.item_row(idx))
    }

    /// Euclidean norm of the item's latent factor row.
    pub fn item_latent_norm(&self, item: ItemId) -> Result<f64, Error> {
        Ok(self.item_embedding(item)?.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    fn all_finite(&self) -> bool {
        self.user_factors.iter().all(|v| v.is_finite())
            && self.item_factors.iter().all(|v| v.is_finite())
            && self.user_bias.iter().all(|v| v.is_finite())
            && self.item_bias.iter().all(|v| v.is_finite())
    }

    /// Debug dump: versioned text header followed by row-major parameter
    /// blocks. Not consumed anywhere in the pipeline.
    pub fn dump(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "elicitsim-factor-model v1")?;
        writeln!(w, "factors {}", self.factors)?;
        writeln!(w, "users {}", self.users.len())?;
        writeln!(w, "items {}", self.items.len())?;
        writeln!(w, "global_mean {}", self.global_mean)?;
        match self.clamp {
            Some((lo, hi)) => writeln!(w, "clamp {lo} {hi}")?,
            None => writeln!(w, "clamp none")?,
        }
        for (idx, user) in self.users.iter().enumerate() {
            write!(w, "user {user} {}", self.user_bias[idx])?;
            for v in self.user_row(idx) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        for (idx, item) in self.items.iter().enumerate() {
            write!(w, "item {item} {}", self.item_bias[idx])?;
            for v in self.item_row(idx) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-sample loss the SGD step descends:
/// `½(r − r̂)² + ½λ(b_u² + b_i² + ‖p_u‖² + ‖q_i‖²)` with the raw
/// (unclamped) prediction `r̂ = μ + b_u + b_i + ⟨p_u, q_i⟩`.
pub fn sample_loss(
    user_vec: &[f64],
    item_vec: &[f64],
    user_bias: f64,
    item_bias: f64,
    mean: f64,
    rating: f64,
    reg: f64,
) -> f64 {
    let err = rating - (mean + user_bias + item_bias + dot(user_vec, item_vec));
    let sq_norms = user_bias * user_bias
        + item_bias * item_bias
        + dot(user_vec, user_vec)
        + dot(item_vec, item_vec);
    0.5 * err * err + 0.5 * reg * sq_norms
}

/// Analytic gradient of [`sample_loss`]. Factor gradients are written into
/// the provided buffers; the return value is `(∂L/∂b_u, ∂L/∂b_i)`. This is
/// the exact computation the trainer applies each step.
#[allow(clippy::too_many_arguments)]
pub fn sample_gradients(
    user_vec: &[f64],
    item_vec: &[f64],
    user_bias: f64,
    item_bias: f64,
    mean: f64,
    rating: f64,
    reg: f64,
    user_grad: &mut [f64],
    item_grad: &mut [f64],
) -> (f64, f64) {
    let err = rating - (mean + user_bias + item_bias + dot(user_vec, item_vec));
    for f in 0..user_vec.len() {
        user_grad[f] = -err * item_vec[f] + reg * user_vec[f];
        item_grad[f] = -err * user_vec[f] + reg * item_vec[f];
    }
    (-err + reg * user_bias, -err + reg * item_bias)
}

/// Full-data training objective:
/// `Σ (r − r̂)² + λ(‖p_u‖² + ‖q_i‖² + b_u² + b_i²)` over observed cells,
/// with raw predictions.
pub fn objective(model: &FactorModel, matrix: &SparseRatingMatrix, reg: f64) -> f64 {
    let mut total = 0.0;
    for t in matrix.triples() {
        let u = model.user_index(t.user).expect("user seen in training");
        let i = model.item_index(t.item).expect("item seen in training");
        let pred = model.global_mean
            + model.user_bias[u]
            + model.item_bias[i]
            + dot(model.user_row(u), model.item_row(i));
        let err = t.rating as f64 - pred;
        total += err * err
            + reg
                * (dot(model.user_row(u), model.user_row(u))
                    + dot(model.item_row(i), model.item_row(i))
                    + model.user_bias[u] * model.user_bias[u]
                    + model.item_bias[i] * model.item_bias[i]);
    }
    total
}

struct Trainer {
    model: FactorModel,
    samples: Vec<(u32, u32, f64)>,
    rng: ChaCha8Rng,
    config: TrainConfig,
}

impl Trainer {
    fn new(
        users: Vec<UserId>,
        items: Vec<ItemId>,
        samples: Vec<(u32, u32, f64)>,
        global_mean: f64,
        config: &TrainConfig,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let d = config.factors;
        let user_factors: Vec<f64> =
            (0..users.len() * d).map(|_| normal.sample(&mut rng)).collect();
        let item_factors: Vec<f64> =
            (0..items.len() * d).map(|_| normal.sample(&mut rng)).collect();
        let user_bias = vec![0.0; users.len()];
        let item_bias = vec![0.0; items.len()];
        let clamp = config.clamp.then_some((1.0, config.max_rating));
        let model = FactorModel::from_parts(
            users,
            items,
            user_factors,
            item_factors,
            user_bias,
            item_bias,
            global_mean,
            d,
            clamp,
        );
        Self { model, samples, rng, config: config.clone() }
    }

    fn run(mut self, mut trace: Option<&mut Vec<f64>>, matrix: Option<&SparseRatingMatrix>) -> Result<FactorModel, Error> {
        let d = self.config.factors;
        let lr = self.config.learning_rate;
        let reg = self.config.regularization;
        let mut user_grad = vec![0.0; d];
        let mut item_grad = vec![0.0; d];
        for epoch in 1..=self.config.epochs {
            self.samples.shuffle(&mut self.rng);
            for &(u, i, r) in &self.samples {
                let (u, i) = (u as usize, i as usize);
                let (bu, bi) = (self.model.user_bias[u], self.model.item_bias[i]);
                let (dbu, dbi) = sample_gradients(
                    &self.model.user_factors[u * d..(u + 1) * d],
                    &self.model.item_factors[i * d..(i + 1) * d],
                    bu,
                    bi,
                    self.model.global_mean,
                    r,
                    reg,
                    &mut user_grad,
                    &mut item_grad,
                );
                self.model.user_bias[u] -= lr * dbu;
                self.model.item_bias[i] -= lr * dbi;
                for f in 0..d {
                    self.model.user_factors[u * d + f] -= lr * user_grad[f];
                    self.model.item_factors[i * d + f] -= lr * item_grad[f];
                }
            }
            if !self.model.all_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            if let (Some(trace), Some(matrix)) = (trace.as_deref_mut(), matrix) {
                trace.push(objective(&self.model, matrix, reg));
            }
        }
        Ok(self.model)
    }
}

/// Trains on the observed cells of `matrix`.
pub fn train(matrix: &SparseRatingMatrix, config: &TrainConfig) -> Result<FactorModel, Error> {
    train_impl(matrix, config, None)
}

/// Like [`train`], but also records the full-data objective after every
/// epoch.
pub fn train_traced(
    matrix: &SparseRatingMatrix,
    config: &TrainConfig,
) -> Result<(FactorModel, Vec<f64>), Error> {
    let mut trace = Vec::with_capacity(config.epochs);
    let model = train_impl(matrix, config, Some(&mut trace))?;
    Ok((model, trace))
}

fn train_impl(
    matrix: &SparseRatingMatrix,
    config: &TrainConfig,
    trace: Option<&mut Vec<f64>>,
) -> Result<FactorModel, Error> {
    config.validate()?;
    if matrix.is_empty() {
        return Err(Error::EmptyTrainingMatrix);
    }
    let users: Vec<UserId> = matrix.users().collect();
    let items: Vec<ItemId> = matrix.items().collect();
    let user_pos = |u: UserId| users.binary_search(&u).unwrap() as u32;
    let item_pos = |i: ItemId| items.binary_search(&i).unwrap() as u32;
    let samples: Vec<(u32, u32, f64)> = matrix
        .triples()
        .map(|t| (user_pos(t.user), item_pos(t.item), t.rating as f64))
        .collect();
    let trainer = Trainer::new(users, items, samples, matrix.global_mean(), config);
    trainer.run(trace, Some(matrix))
}

/// Binarization rule: any rating becomes 1, a missing cell 0.
pub fn binarized_value(known: &SparseRatingMatrix, user: UserId, item: ItemId) -> f64 {
    if known.contains(user, item) {
        1.0
    } else {
        0.0
    }
}

/// Trains on the *dense* binarized view of `known`: every `(user, item)`
/// cell over the given universe is a sample, 1 where a rating exists and 0
/// elsewhere. Used by the likelihood-of-rating strategy.
pub fn train_dense_binary(
    known: &SparseRatingMatrix,
    users: &[UserId],
    items: &[ItemId],
    config: &TrainConfig,
) -> Result<FactorModel, Error> {
    config.validate()?;
    if users.is_empty() || items.is_empty() {
        return Err(Error::EmptyTrainingMatrix);
    }
    let cells = users.len().saturating_mul(items.len());
    if cells > u32::MAX as usize {
        return Err(Error::param(
            "binary matrix",
            format!("{} x {} cells exceed the supported size", users.len(), items.len()),
        ));
    }
    let item_pos: std::collections::HashMap<ItemId, u32> =
        items.iter().enumerate().map(|(idx, &i)| (i, idx as u32)).collect();
    let rated: Vec<HashSet<u32>> = users
        .iter()
        .map(|&u| {
            known
                .user_ratings(u)
                .iter()
                .filter_map(|&(i, _)| item_pos.get(&i).copied())
                .collect()
        })
        .collect();
    let n_items = items.len() as u32;
    let positives: usize = rated.iter().map(HashSet::len).sum();
    let global_mean = positives as f64 / cells as f64;
    let samples: Vec<(u32, u32, f64)> = (0..cells as u32)
        .map(|cell| {
            let u = cell / n_items;
            let i = cell % n_items;
            let v = if rated[u as usize].contains(&i) { 1.0 } else { 0.0 };
            (u, i, v)
        })
        .collect();
    let trainer = Trainer::new(users.to_vec(), items.to_vec(), samples, global_mean, config);
    trainer.run(None, None)
}
