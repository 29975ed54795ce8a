//! Flag / config-file resolution.
//!
//! Every knob can come from a command-line flag or a plain `key = value`
//! file (`--config`); flags win, file values fill the gaps, spec defaults
//! cover the rest. Keys use the flag spelling without the leading dashes,
//! e.g. `min-count = 100`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use elicitsim::dataset::RatingsFormat;
use elicitsim::free::{FreeConfig, FreeMode};
use elicitsim::hybrid::HybridConfig;
use elicitsim::nonpers::NonPersKind;
use elicitsim::pers::{BinaryTrainConfig, PersKind};
use elicitsim::recsys::TrainConfig;
use elicitsim::sim::{SimulationConfig, StrategyKind};

use crate::manifest::ProtocolSection;

/// Parsed `key = value` file. Blank lines and `#` comments are skipped.
#[derive(Debug, Default)]
pub struct KvFile {
    map: HashMap<String, String>,
}

impl KvFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut map = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), idx + 1))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    fn get_parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config key `{key}`: cannot parse `{raw}`")),
        }
    }
}

/// Flags shared by `run` and `compare`.
#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// Ratings file (MovieLens `ratings.dat` or `user,item,rating` CSV).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Input format: movielens_1m | csv (default: by file extension).
    #[arg(long)]
    pub format: Option<String>,

    /// Item feature file (`item_id<TAB>token,token,...`).
    #[arg(long)]
    pub features: Option<PathBuf>,

    /// Keep only users and items with at least this many ratings.
    #[arg(long)]
    pub min_count: Option<usize>,

    /// Ratings per user seeded into the known matrix K.
    #[arg(long)]
    pub k_per_user: Option<usize>,

    /// Ratings per user held out into the test matrix T.
    #[arg(long)]
    pub t_per_user: Option<usize>,

    /// Random subsample of users after filtering (0 = all).
    #[arg(long)]
    pub max_users: Option<usize>,

    /// Hybrid decay rate.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Elicitation rounds.
    #[arg(long)]
    pub iters: Option<usize>,

    /// Items elicited per user per round.
    #[arg(long)]
    pub batch: Option<usize>,

    /// Free-rating mode: off | features | features+embeddings.
    #[arg(long)]
    pub free_ratings: Option<String>,

    /// Free ratings inferred per elicited item.
    #[arg(long)]
    pub free_per_item: Option<usize>,

    /// Master seed (split + per-round model seeds derive from it).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Latent dimension of the base recommender.
    #[arg(long)]
    pub factors: Option<usize>,

    /// SGD learning rate of the base recommender.
    #[arg(long)]
    pub lr: Option<f64>,

    /// L2 regularization of the base recommender.
    #[arg(long)]
    pub reg: Option<f64>,

    /// SGD epochs of the base recommender.
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Use the classical normalized HELF formula instead of the printed one.
    #[arg(long)]
    pub helf_classic: bool,

    /// Concatenate raw feature/embedding blocks without per-block L2
    /// normalization.
    #[arg(long)]
    pub no_block_norm: bool,

    /// Blend the hybrid only over the non-personalized top-N items.
    #[arg(long)]
    pub np_shortlist_size: Option<usize>,

    /// Optional `key = value` settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct InputSpec {
    pub data: PathBuf,
    pub format: RatingsFormat,
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub input: InputSpec,
    pub protocol: ProtocolSection,
    pub runs: Vec<SimulationConfig>,
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Merges flags, config file and defaults into executable settings.
/// `strategies` holds the strategy names to run (one for `run`, several
/// for `compare`).
pub fn resolve(common: &CommonArgs, strategies: &[String]) -> Result<Resolved, String> {
    let kv = match &common.config {
        Some(path) => KvFile::load(path)?,
        None => KvFile::default(),
    };

    let data = pick(
        common.data.clone(),
        kv.get_parse::<PathBuf>("data")?,
        PathBuf::new(),
    );
    if data.as_os_str().is_empty() {
        return Err("no ratings file: pass --data or put `data = ...` in the config".into());
    }
    let format = match pick(common.format.clone(), kv.get_parse::<String>("format")?, String::new())
    {
        s if s.is_empty() => infer_format(&data),
        s => s.parse::<RatingsFormat>().map_err(|e| e.to_string())?,
    };
    let features = common.features.clone().or(kv.get_parse::<PathBuf>("features")?);

    let protocol = ProtocolSection {
        min_count: pick(common.min_count, kv.get_parse("min-count")?, 100),
        k_per_user: pick(common.k_per_user, kv.get_parse("k-per-user")?, 1),
        t_per_user: pick(common.t_per_user, kv.get_parse("t-per-user")?, 30),
        max_users: pick(common.max_users, kv.get_parse("max-users")?, 0),
        seed: pick(common.seed, kv.get_parse("seed")?, 42),
    };

    let free_mode_raw = pick(
        common.free_ratings.clone(),
        kv.get_parse::<String>("free-ratings")?,
        "off".to_string(),
    );
    let free = FreeConfig {
        mode: free_mode_raw.parse::<FreeMode>().map_err(|e| e.to_string())?,
        per_item: pick(common.free_per_item, kv.get_parse("free-per-item")?, 1),
        block_norm: !(common.no_block_norm
            || kv.get_parse::<bool>("no-block-norm")?.unwrap_or(false)),
    };
    if free.mode != FreeMode::Off && features.is_none() {
        return Err("free ratings are enabled but no --features file is given".into());
    }

    let train = TrainConfig {
        factors: pick(common.factors, kv.get_parse("factors")?, 50),
        learning_rate: pick(common.lr, kv.get_parse("lr")?, 0.005),
        regularization: pick(common.reg, kv.get_parse("reg")?, 0.02),
        epochs: pick(common.epochs, kv.get_parse("epochs")?, 20),
        seed: protocol.seed,
        clamp: true,
        max_rating: 5.0,
    };
    let binary_train = BinaryTrainConfig {
        factors: pick(None, kv.get_parse("binary-factors")?, 291),
        iterations: pick(None, kv.get_parse("binary-iterations")?, 1501),
        learning_rate: pick(None, kv.get_parse("binary-lr")?, 0.01834),
        regularization: pick(None, kv.get_parse("binary-reg")?, 0.01467),
        epochs_override: kv.get_parse("binary-epochs")?,
    };
    let hybrid = HybridConfig {
        alpha: pick(common.alpha, kv.get_parse("alpha")?, 2.0),
        np_strategy: kv
            .get_parse::<String>("np-strategy")?
            .map(|s| s.parse::<NonPersKind>().map_err(|e| e.to_string()))
            .transpose()?
            .unwrap_or(NonPersKind::PopEntropy),
        p_strategy: kv
            .get_parse::<String>("p-strategy")?
            .map(|s| s.parse::<PersKind>().map_err(|e| e.to_string()))
            .transpose()?
            .unwrap_or(PersKind::Binary),
        np_shortlist_size: common
            .np_shortlist_size
            .or(kv.get_parse("np-shortlist-size")?),
    };
    let helf_classic =
        common.helf_classic || kv.get_parse::<bool>("helf-classic")?.unwrap_or(false);

    let mut runs = Vec::with_capacity(strategies.len());
    for name in strategies {
        let mut strategy = name.parse::<StrategyKind>().map_err(|e| e.to_string())?;
        if helf_classic && strategy == StrategyKind::NonPersonalized(NonPersKind::Helf) {
            strategy = StrategyKind::NonPersonalized(NonPersKind::HelfClassic);
        }
        runs.push(SimulationConfig {
            strategy,
            total_iter: pick(common.iters, kv.get_parse("iters")?, 25),
            batch_size: pick(common.batch, kv.get_parse("batch")?, 10),
            hybrid: hybrid.clone(),
            free: free.clone(),
            train: train.clone(),
            binary_train: binary_train.clone(),
            iknn_k: pick(None, kv.get_parse("iknn-k")?, 40),
            master_seed: protocol.seed,
            record_elicitations: false,
        });
    }
    if runs.is_empty() {
        return Err("no strategy given: pass --strategy (or --strategies for compare)".into());
    }

    Ok(Resolved { input: InputSpec { data, format, features }, protocol, runs })
}

fn infer_format(path: &Path) -> RatingsFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => RatingsFormat::Csv,
        _ => RatingsFormat::Movielens1m,
    }
}
