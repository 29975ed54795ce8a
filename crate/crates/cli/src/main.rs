//! Command-line runner: `run` one strategy, `compare` several on a shared
//! split, `plot` report CSVs as an SVG, `inspect` dataset statistics.

mod manifest;
mod report;
mod settings;
mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use elicitsim::dataset::{self, DatasetSplit, ItemFeatureMatrix, RatingTriple, RatingsFormat};
use elicitsim::sim::{self, SimulationResult};

use manifest::{DataSection, ObservedSection, ProtocolSection, RunManifest, TOOL_NAME};
use settings::{CommonArgs, InputSpec, Resolved};

#[derive(Parser)]
#[command(name = "elicitsim", version, about = "Offline rating-elicitation simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one elicitation strategy and write its per-round report.
    Run(RunArgs),
    /// Run several strategies against the same split.
    Compare(CompareArgs),
    /// Render report CSVs as an SVG line chart.
    Plot(PlotArgs),
    /// Print dataset statistics after filtering.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Strategy name (variance, entropy, entropy0, co_coverage,
    /// popularity, pop_entropy, pop_variance, helf, random, max_rating,
    /// min_rating, min_norm, iknn, binary, non_myopic, adaptive_hybrid).
    #[arg(long)]
    strategy: Option<String>,

    /// Reproduce a previous run from its manifest (checksums verified).
    #[arg(long)]
    from_manifest: Option<PathBuf>,

    /// Output directory for report.csv, events.csv and manifest.json.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,

    #[arg(long)]
    from_manifest: Option<PathBuf>,

    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Report CSVs produced by `run` or `compare`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Output SVG path.
    #[arg(long, default_value = "mae.svg")]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    data: PathBuf,

    /// movielens_1m | csv (default: by file extension).
    #[arg(long)]
    format: Option<String>,

    #[arg(long)]
    features: Option<PathBuf>,

    #[arg(long, default_value_t = 100)]
    min_count: usize,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run_command(args),
        Command::Compare(args) => compare_command(args),
        Command::Plot(args) => plot_command(args),
        Command::Inspect(args) => inspect_command(args),
    };
    if let Err(message) = outcome {
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}

fn run_command(args: RunArgs) -> Result<(), String> {
    let plan = match &args.from_manifest {
        Some(path) => plan_from_manifest(path)?,
        None => {
            let names = match &args.strategy {
                Some(name) => vec![name.clone()],
                None => config_strategies(&args.common)?.ok_or("missing --strategy")?,
            };
            if names.len() != 1 {
                return Err("`run` takes exactly one strategy; use `compare` for several".into());
            }
            settings::resolve(&args.common, &names)?
        }
    };
    execute(&plan, "run", &args.out_dir)
}

fn compare_command(args: CompareArgs) -> Result<(), String> {
    let plan = match &args.from_manifest {
        Some(path) => plan_from_manifest(path)?,
        None => {
            let names = if args.strategies.is_empty() {
                config_strategies(&args.common)?.ok_or("missing --strategies")?
            } else {
                args.strategies.clone()
            };
            settings::resolve(&args.common, &names)?
        }
    };
    execute(&plan, "compare", &args.out_dir)
}

/// `strategy`/`strategies` keys from the config file, when present.
fn config_strategies(common: &CommonArgs) -> Result<Option<Vec<String>>, String> {
    let Some(path) = &common.config else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let key = key.trim();
            if key == "strategy" || key == "strategies" {
                return Ok(Some(
                    value.trim().split(',').map(|s| s.trim().to_string()).collect(),
                ));
            }
        }
    }
    Ok(None)
}

fn plan_from_manifest(path: &Path) -> Result<Resolved, String> {
    let loaded = RunManifest::load(path)?;
    loaded.verify_inputs()?;
    Ok(Resolved {
        input: InputSpec {
            data: loaded.data.path.clone(),
            format: loaded.data.format,
            features: loaded.data.features_path.clone(),
        },
        protocol: loaded.protocol.clone(),
        runs: loaded.runs.clone(),
    })
}

struct Prepared {
    split: DatasetSplit,
    features: Option<ItemFeatureMatrix>,
    observed: ObservedSection,
}

fn prepare(input: &InputSpec, protocol: &ProtocolSection) -> Result<Prepared, String> {
    let raw = dataset::load_ratings(&input.data, input.format).map_err(|e| e.to_string())?;
    log::info!("loaded {} ratings from {}", raw.len(), input.data.display());
    let filtered = dataset::filter_dense(&raw, protocol.min_count).map_err(|e| e.to_string())?;
    let kept = dataset::subsample_users(&filtered, protocol.max_users, protocol.seed);
    let observed = observe(&kept);
    log::info!(
        "after filtering (min_count {}): {} users, {} items, {} ratings",
        protocol.min_count,
        observed.users,
        observed.items,
        observed.ratings
    );
    let split = dataset::split(&kept, protocol.k_per_user, protocol.t_per_user, protocol.seed)
        .map_err(|e| e.to_string())?;
    let features = input
        .features
        .as_deref()
        .map(dataset::load_item_features)
        .transpose()
        .map_err(|e| e.to_string())?;
    Ok(Prepared { split, features, observed })
}

fn observe(triples: &[RatingTriple]) -> ObservedSection {
    let users: std::collections::HashSet<_> = triples.iter().map(|t| t.user).collect();
    let items: std::collections::HashSet<_> = triples.iter().map(|t| t.item).collect();
    ObservedSection { users: users.len(), items: items.len(), ratings: triples.len() }
}

fn execute(plan: &Resolved, command: &str, out_dir: &Path) -> Result<(), String> {
    let prepared = prepare(&plan.input, &plan.protocol)?;
    let results = sim::compare_strategies(&plan.runs, &prepared.split, prepared.features.as_ref())
        .map_err(|e| e.to_string())?;

    fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let report_path = out_dir.join("report.csv");
    fs::write(&report_path, report::render_report(&results))
        .map_err(|e| format!("{}: {e}", report_path.display()))?;

    for result in &results {
        if result.events.is_empty() {
            continue;
        }
        let name = if results.len() == 1 {
            "events.csv".to_string()
        } else {
            format!("events-{}.csv", result.strategy)
        };
        let path = out_dir.join(name);
        fs::write(&path, report::render_events(&result.events))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }

    let run_manifest = RunManifest {
        tool: TOOL_NAME.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_utc: chrono::Utc::now().to_rfc3339(),
        command: command.into(),
        data: DataSection {
            path: plan.input.data.clone(),
            format: plan.input.format,
            sha256: manifest::sha256_file(&plan.input.data)?,
            features_path: plan.input.features.clone(),
            features_sha256: plan
                .input
                .features
                .as_deref()
                .map(manifest::sha256_file)
                .transpose()?,
        },
        protocol: plan.protocol.clone(),
        observed: prepared.observed,
        runs: plan.runs.clone(),
    };
    run_manifest.save(&out_dir.join("manifest.json"))?;

    for result in &results {
        print_summary(result);
    }
    println!("wrote {}", report_path.display());
    Ok(())
}

fn print_summary(result: &SimulationResult) {
    if let (Some(first), Some(last)) = (result.reports.first(), result.reports.last()) {
        println!(
            "{}: baseline MAE {:.6} -> round {} MAE {:.6}{}",
            result.strategy,
            first.mae,
            last.iter,
            last.mae,
            if result.truncated { " (stopped early: pools exhausted)" } else { "" }
        );
    }
}

type SeriesPoints = BTreeMap<String, Vec<(usize, f64)>>;

fn plot_command(args: PlotArgs) -> Result<(), String> {
    // Series keyed by (file, strategy); the label drops the file stem when
    // a strategy appears in only one input.
    let mut per_file: Vec<(String, SeriesPoints)> = Vec::new();
    for path in &args.inputs {
        let rows = report::parse_report(path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("report")
            .to_string();
        let mut groups: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        for row in rows {
            groups.entry(row.strategy).or_default().push((row.iter, row.mae));
        }
        per_file.push((stem, groups));
    }
    let mut strategy_counts: BTreeMap<String, usize> = BTreeMap::new();
    for (_, groups) in &per_file {
        for name in groups.keys() {
            *strategy_counts.entry(name.clone()).or_default() += 1;
        }
    }
    let mut series = Vec::new();
    for (stem, groups) in &per_file {
        for (name, points) in groups {
            let label = if strategy_counts[name] > 1 {
                format!("{stem}:{name}")
            } else {
                name.clone()
            };
            let mut points = points.clone();
            points.sort_by_key(|&(iter, _)| iter);
            series.push(svg::Series { label, points });
        }
    }
    if series.is_empty() {
        return Err("no data rows in the given report files".into());
    }
    fs::write(&args.out, svg::render(&series))
        .map_err(|e| format!("{}: {e}", args.out.display()))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn inspect_command(args: InspectArgs) -> Result<(), String> {
    let format = match &args.format {
        Some(raw) => raw.parse::<RatingsFormat>().map_err(|e| e.to_string())?,
        None => match args.data.extension().and_then(|e| e.to_str()) {
            Some("csv") => RatingsFormat::Csv,
            _ => RatingsFormat::Movielens1m,
        },
    };
    let raw = dataset::load_ratings(&args.data, format).map_err(|e| e.to_string())?;
    let observed_raw = observe(&raw);
    println!(
        "raw: {} users, {} items, {} ratings",
        observed_raw.users, observed_raw.items, observed_raw.ratings
    );

    let filtered = dataset::filter_dense(&raw, args.min_count).map_err(|e| e.to_string())?;
    let observed = observe(&filtered);
    println!(
        "filtered (min_count {}): {} users, {} items, {} ratings",
        args.min_count, observed.users, observed.items, observed.ratings
    );
    if observed.users > 0 && observed.items > 0 {
        println!(
            "density: {:.4}",
            observed.ratings as f64 / (observed.users as f64 * observed.items as f64)
        );
        let mut per_user: BTreeMap<_, usize> = BTreeMap::new();
        let mut per_item: BTreeMap<_, usize> = BTreeMap::new();
        for t in &filtered {
            *per_user.entry(t.user).or_default() += 1;
            *per_item.entry(t.item).or_default() += 1;
        }
        print_distribution("ratings per user", per_user.values().copied().collect());
        print_distribution("ratings per item", per_item.values().copied().collect());
    }

    if let Some(path) = &args.features {
        let features = dataset::load_item_features(path).map_err(|e| e.to_string())?;
        println!(
            "features: {} items, {} genre dims + {} actor dims = {} total",
            features.num_items(),
            features.genre_dims(),
            features.actor_dims(),
            features.dim()
        );
    }
    Ok(())
}

fn print_distribution(label: &str, mut counts: Vec<usize>) {
    if counts.is_empty() {
        return;
    }
    counts.sort_unstable();
    let median = counts[counts.len() / 2];
    println!(
        "{label}: min {}, median {}, max {}",
        counts[0],
        median,
        counts[counts.len() - 1]
    );
}
