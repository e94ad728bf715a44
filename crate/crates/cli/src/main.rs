//! `navdrift`: detect drifting usage behavior in web access logs.
//!
//! The pipeline runs as separate commands so every intermediate product is a
//! plain file that can be inspected, versioned, or regenerated:
//!
//! ```text
//! ingest   access log            -> navigations.csv + requests.csv
//! features navigation tables     -> features.csv + feature_stats.csv
//! cluster  feature table         -> <strategy>/partition_*.csv, prototypes_*.csv, manifest.json
//! synth    scenario JSON         -> features.csv + truth.csv
//! evaluate two partition files   -> agreement scores (JSON)
//! report   clustered strategies  -> cr_pairwise.csv, fmeasure_*.csv, summary.json
//! ```
//!
//! Every command exits 0 on success and prints a one-line JSON summary to
//! stdout; failures exit nonzero with a one-line `{"error": …}` on stderr.
//! Identical inputs, flags, and seeds always produce byte-identical outputs.

use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use navdrift_core::cluster::ClusteringConfig;
use navdrift_core::eval::{corrected_rand, f_measure};
use navdrift_core::features::{
    feature_vector, standardize, Granularity, SemanticPatterns, StandardizationScope,
};
use navdrift_core::ingest::{
    drop_extreme_navigations, filter_navigations, open_log, parse_log, sessionize, FilterRules,
    LogFormat, DEFAULT_SESSION_TIMEOUT_SECS,
};
use navdrift_core::io::{
    read_features_csv, read_navigation_files, read_partition_csv, read_strategy_partitions,
    write_feature_stats_csv, write_features_csv, write_ground_truth_csv, write_navigations_csv,
    write_report_files, write_requests_csv, write_strategy_results,
};
use navdrift_core::report::compare_strategies;
use navdrift_core::strategies::{
    run_strategy, CarryMode, StrategyKind, TemporalDataset, ALL_STRATEGIES,
};
use navdrift_core::synth::{generate, DriftScenario};
use serde::Deserialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "navdrift",
    version,
    about = "Detect drifting usage behavior in web access logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    shared: SharedArgs,
}

/// Flags accepted by every command; values not given fall back to the
/// `--config` file, then to the built-in defaults.
#[derive(Args, Debug, Clone)]
struct SharedArgs {
    /// Root random seed (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of clusters (default 10).
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Iteration cap per optimization run (default 100).
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,

    /// Random restarts for from-scratch clusterings (default 100).
    #[arg(long = "n-init", global = true)]
    n_init: Option<usize>,

    /// Sub-period granularity: month, week, or day (default month).
    #[arg(long, global = true)]
    granularity: Option<String>,

    /// JSON settings file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

/// Optional settings file: any subset of the shared flags plus a few
/// pipeline switches, as JSON.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    seed: Option<u64>,
    k: Option<usize>,
    max_iter: Option<usize>,
    n_init: Option<usize>,
    granularity: Option<String>,
    scope: Option<String>,
    carry: Option<String>,
    session_timeout_secs: Option<i64>,
    drop_quantile: Option<f64>,
}

/// Fully resolved settings (flags over config file over defaults).
struct Settings {
    clustering: ClusteringConfig,
    /// Seed only when the user chose one (flag or file); `clustering.seed`
    /// always holds the effective value.
    explicit_seed: Option<u64>,
    granularity: Granularity,
    scope: StandardizationScope,
    carry: CarryMode,
    session_timeout_secs: i64,
    drop_quantile: Option<f64>,
}

impl Settings {
    fn resolve(shared: &SharedArgs) -> anyhow::Result<Settings> {
        let file = match &shared.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading settings file {}", path.display()))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .with_context(|| format!("parsing settings file {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let defaults = ClusteringConfig::default();
        let explicit_seed = shared.seed.or(file.seed);
        let clustering = defaults
            .with_k(shared.k.or(file.k).unwrap_or(defaults.k))
            .with_max_iterations(
                shared
                    .max_iter
                    .or(file.max_iter)
                    .unwrap_or(defaults.max_iterations),
            )
            .with_n_initializations(
                shared
                    .n_init
                    .or(file.n_init)
                    .unwrap_or(defaults.n_initializations),
            )
            .with_seed(explicit_seed.unwrap_or(defaults.seed));
        let granularity = match shared
            .granularity
            .as_deref()
            .or(file.granularity.as_deref())
        {
            Some(text) => text.parse().map_err(anyhow::Error::msg)?,
            None => Granularity::Month,
        };
        let scope = match file.scope.as_deref() {
            Some(text) => text.parse().map_err(anyhow::Error::msg)?,
            None => StandardizationScope::Global,
        };
        let carry = match file.carry.as_deref() {
            Some(text) => text.parse().map_err(anyhow::Error::msg)?,
            None => CarryMode::default(),
        };
        Ok(Settings {
            clustering,
            explicit_seed,
            granularity,
            scope,
            carry,
            session_timeout_secs: file
                .session_timeout_secs
                .unwrap_or(DEFAULT_SESSION_TIMEOUT_SECS),
            drop_quantile: file.drop_quantile,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse an access log into navigation tables.
    Ingest(IngestArgs),
    /// Compute the 13 behavior variables per navigation and standardize them.
    Features(FeaturesArgs),
    /// Cluster each time sub-period under one strategy.
    Cluster(ClusterArgs),
    /// Generate a synthetic drifting stream from a scenario file.
    Synth(SynthArgs),
    /// Compare two partition files.
    Evaluate(EvaluateArgs),
    /// Assemble the cross-strategy comparison report.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Access log file (plain text or gzip).
    #[arg(long)]
    input: PathBuf,

    /// Log dialect: combined (default) or common.
    #[arg(long, default_value = "combined")]
    format: String,

    /// Session gap in seconds; a larger gap starts a new navigation
    /// (default 1800).
    #[arg(long = "session-timeout")]
    session_timeout: Option<i64>,

    /// Drop navigations above this duration/size quantile (off unless given).
    #[arg(long = "drop-quantile")]
    drop_quantile: Option<f64>,

    /// Directory for navigations.csv and requests.csv.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Navigation table written by `ingest`.
    #[arg(long, default_value = "navigations.csv")]
    navigations: PathBuf,

    /// Request sidecar written by `ingest`.
    #[arg(long, default_value = "requests.csv")]
    requests: PathBuf,

    /// File of resource patterns counted as semantic requests
    /// (one per line, `*` suffix for prefix matches).
    #[arg(long)]
    semantic: Option<PathBuf>,

    /// Standardization scope: global (default) or per-period.
    #[arg(long)]
    scope: Option<String>,

    /// Directory for features.csv and feature_stats.csv.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Feature table written by `features` or `synth`.
    #[arg(long, default_value = "features.csv")]
    features: PathBuf,

    /// Clustering strategy: global, independent, previous, or dependent.
    #[arg(long)]
    strategy: String,

    /// Prototype carry for the previous strategy: recompute (default) or
    /// freeze_first.
    #[arg(long)]
    carry: Option<String>,

    /// Results directory; files land in a subdirectory named after the
    /// strategy.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario description (JSON).
    #[arg(long)]
    scenario: PathBuf,

    /// Directory for features.csv and truth.csv.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Partition whose clusters play the reference role.
    #[arg(long)]
    apriori: PathBuf,

    /// Partition whose clusters are matched against the reference.
    #[arg(long)]
    reached: PathBuf,

    /// Write the scores here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results directory holding one subdirectory per clustered strategy.
    #[arg(long)]
    results: PathBuf,

    /// Comma-separated strategies to compare (default: every strategy
    /// subdirectory present, in canonical order).
    #[arg(long)]
    strategies: Option<String>,

    /// Directory for the report files.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(error) => {
            eprintln!("{}", json!({ "error": render_error(&error) }));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain into one line, dropping causes whose text a parent
/// message already embeds.
fn render_error(error: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if parts.last().is_none_or(|prev| !prev.contains(&text)) {
            parts.push(text);
        }
    }
    parts.join(": ")
}

fn run(cli: Cli) -> anyhow::Result<serde_json::Value> {
    let settings = Settings::resolve(&cli.shared)?;
    match cli.command {
        Command::Ingest(args) => cmd_ingest(&settings, &args),
        Command::Features(args) => cmd_features(&settings, &args),
        Command::Cluster(args) => cmd_cluster(&settings, &args),
        Command::Synth(args) => cmd_synth(&settings, &args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

fn cmd_ingest(settings: &Settings, args: &IngestArgs) -> anyhow::Result<serde_json::Value> {
    let format = match args.format.as_str() {
        "common" => LogFormat::Common,
        "combined" => LogFormat::Combined,
        other => anyhow::bail!("unknown log format {other:?} (expected common or combined)"),
    };
    let reader = open_log(&args.input)?;
    let outcome = parse_log(BufReader::new(reader), format)?;
    let n_requests = outcome.requests.len();

    let timeout_seconds = args
        .session_timeout
        .unwrap_or(settings.session_timeout_secs);
    anyhow::ensure!(timeout_seconds > 0, "session timeout must be positive");
    let navigations = sessionize(outcome.requests, chrono::Duration::seconds(timeout_seconds));
    let n_sessionized = navigations.len();

    let kept = filter_navigations(navigations, &FilterRules::default());
    let n_filtered = kept.len();
    let quantile = args.drop_quantile.or(settings.drop_quantile);
    let kept = match quantile {
        Some(q) => drop_extreme_navigations(kept, q)?,
        None => kept,
    };

    ensure_dir(&args.out_dir)?;
    write_navigations_csv(&args.out_dir.join("navigations.csv"), &kept)?;
    write_requests_csv(&args.out_dir.join("requests.csv"), &kept)?;

    Ok(json!({
        "command": "ingest",
        "total_lines": outcome.total_lines,
        "malformed_lines": outcome.malformed_lines,
        "requests": n_requests,
        "navigations": n_sessionized,
        "kept": kept.len(),
        "dropped_by_rules": n_sessionized - n_filtered,
        "dropped_as_extreme": n_filtered - kept.len(),
        "out_dir": args.out_dir.display().to_string(),
    }))
}

fn cmd_features(settings: &Settings, args: &FeaturesArgs) -> anyhow::Result<serde_json::Value> {
    let navigations = read_navigation_files(&args.navigations, &args.requests)?;
    let semantic = match &args.semantic {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading semantic patterns {}", path.display()))?;
            SemanticPatterns::from_lines(&text)
        }
        None => SemanticPatterns::new(Vec::new()),
    };
    let scope = match args.scope.as_deref() {
        Some(text) => text.parse().map_err(anyhow::Error::msg)?,
        None => settings.scope,
    };

    let vectors: Vec<_> = navigations
        .iter()
        .map(|nav| feature_vector(nav, &semantic, settings.granularity))
        .collect();
    let (standardized, stats) = standardize(&vectors, scope)?;

    ensure_dir(&args.out_dir)?;
    write_features_csv(&args.out_dir.join("features.csv"), &standardized)?;
    write_feature_stats_csv(&args.out_dir.join("feature_stats.csv"), &stats)?;

    let mut sub_periods: Vec<&str> = standardized.iter().map(|v| v.sub_period.as_str()).collect();
    sub_periods.sort_unstable();
    sub_periods.dedup();
    Ok(json!({
        "command": "features",
        "navigations": standardized.len(),
        "granularity": settings.granularity.as_str(),
        "scope": scope.as_str(),
        "sub_periods": sub_periods,
        "out_dir": args.out_dir.display().to_string(),
    }))
}

fn cmd_cluster(settings: &Settings, args: &ClusterArgs) -> anyhow::Result<serde_json::Value> {
    let strategy: StrategyKind = args.strategy.parse().map_err(anyhow::Error::msg)?;
    let carry = match args.carry.as_deref() {
        Some(text) => text.parse().map_err(anyhow::Error::msg)?,
        None => settings.carry,
    };
    let vectors = read_features_csv(&args.features)?;
    let dataset = TemporalDataset::from_feature_vectors(&vectors)?;
    let outcome = run_strategy(strategy, &dataset, &settings.clustering, carry)?;
    ensure_dir(&args.out_dir)?;
    let strategy_dir =
        write_strategy_results(&args.out_dir, &outcome, &settings.clustering, carry)?;

    Ok(json!({
        "command": "cluster",
        "strategy": strategy.as_str(),
        "k": settings.clustering.k,
        "seed": settings.clustering.seed,
        "sub_periods": outcome.periods.len(),
        "total_inertia": outcome.periods.iter().map(|p| p.partition.inertia()).sum::<f64>(),
        "out_dir": strategy_dir.display().to_string(),
    }))
}

fn cmd_synth(settings: &Settings, args: &SynthArgs) -> anyhow::Result<serde_json::Value> {
    let mut scenario = DriftScenario::from_path(&args.scenario)?;
    if let Some(seed) = settings.explicit_seed {
        scenario.seed = seed;
    }
    let data = generate(&scenario)?;
    let vectors = data.feature_vectors()?;

    ensure_dir(&args.out_dir)?;
    write_features_csv(&args.out_dir.join("features.csv"), &vectors)?;
    write_ground_truth_csv(&args.out_dir.join("truth.csv"), &data)?;

    Ok(json!({
        "command": "synth",
        "seed": scenario.seed,
        "periods": scenario.periods,
        "points": vectors.len(),
        "components": data.component_names,
        "out_dir": args.out_dir.display().to_string(),
    }))
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<serde_json::Value> {
    let apriori = read_partition_csv(&args.apriori)?;
    let reached = read_partition_csv(&args.reached)?;
    let cr = corrected_rand(&apriori, &reached)?;
    let f = f_measure(&apriori, &reached)?;
    let scores = json!({
        "command": "evaluate",
        "apriori": args.apriori.display().to_string(),
        "reached": args.reached.display().to_string(),
        "items": apriori.len(),
        "corrected_rand": cr,
        "overall_f": f.overall,
        "per_cluster": f.per_cluster.iter().map(|c| json!({
            "cluster": c.cluster,
            "size": c.size,
            "best_match": c.best_match,
            "f": c.f,
        })).collect::<Vec<_>>(),
    });
    if let Some(path) = &args.out {
        let mut text = serde_json::to_string_pretty(&scores)?;
        text.push('\n');
        std::fs::write(path, text)
            .with_context(|| format!("writing scores to {}", path.display()))?;
    }
    Ok(scores)
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<serde_json::Value> {
    let names: Vec<String> = match &args.strategies {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => ALL_STRATEGIES
            .iter()
            .filter(|s| args.results.join(s.as_str()).join("manifest.json").exists())
            .map(|s| s.as_str().to_string())
            .collect(),
    };
    anyhow::ensure!(
        !names.is_empty(),
        "no strategy results found under {}",
        args.results.display()
    );
    let mut partitions = Vec::with_capacity(names.len());
    for name in &names {
        let kind: StrategyKind = name.parse().map_err(anyhow::Error::msg)?;
        partitions.push(read_strategy_partitions(&args.results.join(kind.as_str()))?);
    }
    let bundle = compare_strategies(&partitions)?;
    write_report_files(&args.out_dir, &bundle)?;

    Ok(json!({
        "command": "report",
        "strategies": names,
        "periods": bundle.periods,
        "cr_values": bundle.pairwise_cr.len(),
        "out_dir": args.out_dir.display().to_string(),
    }))
}
