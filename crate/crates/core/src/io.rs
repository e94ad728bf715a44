//! On-disk formats: CSV tables, run manifests, and report files.
//!
//! Every writer here is a pure function of its input values — no clocks, no
//! environment — so rewriting the same data always produces byte-identical
//! files. Numbers are formatted with Rust's shortest round-trip notation and
//! timestamps as RFC 3339 UTC (`2002-07-15T10:00:00Z`).
//!
//! Column orders (also documented in the repository README):
//!
//! * `navigations.csv`: `id,user_key,start,end,n_requests`
//! * `requests.csv`: `navigation_id,timestamp,resource,status,bytes`
//! * feature table: `nav_id,sub_period,` then the 13 variable names
//! * feature stats sidecar: `scope,group,variable,mean,stddev,constant`
//! * partition files: `nav_id,cluster`
//! * prototype files: `cluster,` then one column per dimension (the variable
//!   names when the dimensionality matches the feature table, else `x0…`)
//! * ground truth: `nav_id,sub_period,component_index,component`
//! * pairwise CR: `period,strategy_a,strategy_b,cr`
//! * per-cluster F: `period,apriori_strategy,reached_strategy,cluster,size,best_match,f`
//! * overall F: `period,apriori_strategy,reached_strategy,overall_f`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusteringConfig, ConvergenceRule, Partition, Prototypes, DISTANCE};
use crate::features::{FeatureVector, StandardizationStats, N_VARIABLES, VARIABLE_NAMES};
use crate::ingest::{Navigation, RawRequest};
use crate::report::{PairCrSummary, PairFSummary, ReportBundle};
use crate::strategies::{CarryMode, PeriodOutcome, StrategyKind, StrategyOutcome};
use crate::synth::GeneratedData;

/// Errors raised while reading or writing data files.
#[derive(Debug, Error)]
pub enum IoError {
    /// Filesystem error.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// CSV-level error.
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    /// JSON (de)serialization error.
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    /// A file's header row is not the expected one.
    #[error("{}: expected header {expected:?}, found {found:?}", path.display())]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    /// A data row is malformed.
    #[error("{} record {record}: {reason}", path.display())]
    Row {
        path: PathBuf,
        record: u64,
        reason: String,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn csv(path: &Path, source: csv::Error) -> Self {
        IoError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    fn row(path: &Path, record: u64, reason: impl Into<String>) -> Self {
        IoError::Row {
            path: path.to_path_buf(),
            record,
            reason: reason.into(),
        }
    }
}

fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn parse_timestamp(path: &Path, record: u64, text: &str) -> Result<DateTime<Utc>, IoError> {
    DateTime::parse_from_rfc3339(text)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| IoError::row(path, record, format!("bad timestamp {text:?}: {e}")))
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, IoError> {
    csv::Writer::from_path(path).map_err(|e| IoError::csv(path, e))
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IoError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| IoError::csv(path, e))
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
) -> Result<(), IoError> {
    let found = reader.headers().map_err(|e| IoError::csv(path, e))?;
    let found: Vec<&str> = found.iter().collect();
    if found != expected {
        return Err(IoError::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    record: u64,
    name: &str,
    text: &str,
) -> Result<T, IoError>
where
    T::Err: std::fmt::Display,
{
    text.parse()
        .map_err(|e| IoError::row(path, record, format!("bad {name} {text:?}: {e}")))
}

const NAVIGATION_HEADER: [&str; 5] = ["id", "user_key", "start", "end", "n_requests"];
const REQUEST_HEADER: [&str; 5] = ["navigation_id", "timestamp", "resource", "status", "bytes"];
const PARTITION_HEADER: [&str; 2] = ["nav_id", "cluster"];
const STATS_HEADER: [&str; 6] = ["scope", "group", "variable", "mean", "stddev", "constant"];
const TRUTH_HEADER: [&str; 4] = ["nav_id", "sub_period", "component_index", "component"];
const CR_HEADER: [&str; 4] = ["period", "strategy_a", "strategy_b", "cr"];
const CLUSTER_F_HEADER: [&str; 7] = [
    "period",
    "apriori_strategy",
    "reached_strategy",
    "cluster",
    "size",
    "best_match",
    "f",
];
const OVERALL_F_HEADER: [&str; 4] = [
    "period",
    "apriori_strategy",
    "reached_strategy",
    "overall_f",
];

/// Writes the one-line-per-navigation table.
pub fn write_navigations_csv(path: &Path, navigations: &[Navigation]) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(NAVIGATION_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for nav in navigations {
        writer
            .write_record([
                nav.id.to_string(),
                nav.user_key.clone(),
                format_timestamp(nav.start()),
                format_timestamp(nav.end()),
                nav.n_requests().to_string(),
            ])
            .map_err(|e| IoError::csv(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Writes the per-request sidecar (every request of every navigation).
pub fn write_requests_csv(path: &Path, navigations: &[Navigation]) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(REQUEST_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for nav in navigations {
        for request in &nav.requests {
            writer
                .write_record([
                    nav.id.to_string(),
                    format_timestamp(request.timestamp),
                    request.resource.clone(),
                    request.status.to_string(),
                    request.bytes.to_string(),
                ])
                .map_err(|e| IoError::csv(path, e))?;
        }
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Reads navigations back from the table plus its request sidecar.
pub fn read_navigation_files(
    navigations_path: &Path,
    requests_path: &Path,
) -> Result<Vec<Navigation>, IoError> {
    let mut reader = open_reader(navigations_path)?;
    check_header(navigations_path, &mut reader, &NAVIGATION_HEADER)?;
    // id -> (user_key, expected request count), in file order.
    let mut order: Vec<u64> = Vec::new();
    let mut meta: BTreeMap<u64, (String, usize)> = BTreeMap::new();
    for (index, record) in reader.records().enumerate() {
        let record_no = index as u64 + 1;
        let record = record.map_err(|e| IoError::csv(navigations_path, e))?;
        if record.len() != NAVIGATION_HEADER.len() {
            return Err(IoError::row(
                navigations_path,
                record_no,
                format!(
                    "expected {} fields, found {}",
                    NAVIGATION_HEADER.len(),
                    record.len()
                ),
            ));
        }
        let id: u64 = parse_field(navigations_path, record_no, "id", &record[0])?;
        let n_requests: usize = parse_field(navigations_path, record_no, "n_requests", &record[4])?;
        if meta
            .insert(id, (record[1].to_string(), n_requests))
            .is_some()
        {
            return Err(IoError::row(
                navigations_path,
                record_no,
                format!("duplicate navigation id {id}"),
            ));
        }
        order.push(id);
    }

    let mut reader = open_reader(requests_path)?;
    check_header(requests_path, &mut reader, &REQUEST_HEADER)?;
    let mut grouped: BTreeMap<u64, Vec<RawRequest>> = BTreeMap::new();
    for (index, record) in reader.records().enumerate() {
        let record_no = index as u64 + 1;
        let record = record.map_err(|e| IoError::csv(requests_path, e))?;
        if record.len() != REQUEST_HEADER.len() {
            return Err(IoError::row(
                requests_path,
                record_no,
                format!(
                    "expected {} fields, found {}",
                    REQUEST_HEADER.len(),
                    record.len()
                ),
            ));
        }
        let nav_id: u64 = parse_field(requests_path, record_no, "navigation_id", &record[0])?;
        let (user_key, _) = meta.get(&nav_id).ok_or_else(|| {
            IoError::row(
                requests_path,
                record_no,
                format!("navigation id {nav_id} not present in the navigation table"),
            )
        })?;
        grouped.entry(nav_id).or_default().push(RawRequest {
            timestamp: parse_timestamp(requests_path, record_no, &record[1])?,
            user_key: user_key.clone(),
            resource: record[2].to_string(),
            status: parse_field(requests_path, record_no, "status", &record[3])?,
            bytes: parse_field(requests_path, record_no, "bytes", &record[4])?,
        });
    }

    let mut navigations = Vec::with_capacity(order.len());
    for id in order {
        let (_, expected) = meta[&id];
        let requests = grouped.remove(&id).unwrap_or_default();
        if requests.len() != expected {
            return Err(IoError::row(
                requests_path,
                0,
                format!(
                    "navigation {id} has {} requests on disk, expected {expected}",
                    requests.len()
                ),
            ));
        }
        let nav = Navigation::new(id, requests)
            .map_err(|e| IoError::row(requests_path, 0, format!("navigation {id}: {e}")))?;
        navigations.push(nav);
    }
    Ok(navigations)
}

fn feature_header() -> Vec<String> {
    let mut header = vec!["nav_id".to_string(), "sub_period".to_string()];
    header.extend(VARIABLE_NAMES.iter().map(|n| n.to_string()));
    header
}

/// Writes the feature table (`nav_id,sub_period,` then the 13 variables).
pub fn write_features_csv(path: &Path, records: &[FeatureVector]) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(feature_header())
        .map_err(|e| IoError::csv(path, e))?;
    for record in records {
        let mut row = vec![record.nav_id.to_string(), record.sub_period.clone()];
        row.extend(record.values.iter().map(|v| v.to_string()));
        writer
            .write_record(row)
            .map_err(|e| IoError::csv(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Reads a feature table written by [`write_features_csv`].
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>, IoError> {
    let mut reader = open_reader(path)?;
    let expected = feature_header();
    let expected_refs: Vec<&str> = expected.iter().map(String::as_str).collect();
    check_header(path, &mut reader, &expected_refs)?;
    let mut records = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record_no = index as u64 + 1;
        let record = record.map_err(|e| IoError::csv(path, e))?;
        if record.len() != 2 + N_VARIABLES {
            return Err(IoError::row(
                path,
                record_no,
                format!(
                    "expected {} fields, found {}",
                    2 + N_VARIABLES,
                    record.len()
                ),
            ));
        }
        let mut values = [0.0f64; N_VARIABLES];
        for (slot, field) in values.iter_mut().zip(record.iter().skip(2)) {
            *slot = parse_field(path, record_no, "feature value", field)?;
        }
        records.push(FeatureVector {
            nav_id: parse_field(path, record_no, "nav_id", &record[0])?,
            sub_period: record[1].to_string(),
            values,
        });
    }
    Ok(records)
}

/// Writes the standardization statistics sidecar.
pub fn write_feature_stats_csv(path: &Path, stats: &StandardizationStats) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(STATS_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for group in &stats.groups {
        for (v, name) in VARIABLE_NAMES.iter().enumerate() {
            writer
                .write_record([
                    stats.scope.as_str().to_string(),
                    group.group.clone(),
                    name.to_string(),
                    group.means[v].to_string(),
                    group.stddevs[v].to_string(),
                    group.constant[v].to_string(),
                ])
                .map_err(|e| IoError::csv(path, e))?;
        }
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Writes one sub-period's cluster membership (`nav_id,cluster`).
pub fn write_partition_csv(path: &Path, partition: &Partition) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(PARTITION_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for (&id, &label) in partition.item_ids().iter().zip(partition.assignment()) {
        writer
            .write_record([id.to_string(), label.to_string()])
            .map_err(|e| IoError::csv(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Reads a partition file back. The cluster count is the highest label plus
/// one and the inertia is set to 0 (membership files carry neither; fit
/// diagnostics live in the run manifest).
pub fn read_partition_csv(path: &Path) -> Result<Partition, IoError> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &PARTITION_HEADER)?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record_no = index as u64 + 1;
        let record = record.map_err(|e| IoError::csv(path, e))?;
        if record.len() != PARTITION_HEADER.len() {
            return Err(IoError::row(
                path,
                record_no,
                format!(
                    "expected {} fields, found {}",
                    PARTITION_HEADER.len(),
                    record.len()
                ),
            ));
        }
        ids.push(parse_field(path, record_no, "nav_id", &record[0])?);
        labels.push(parse_field(path, record_no, "cluster", &record[1])?);
    }
    let n_clusters = labels.iter().max().map_or(0, |&m| m + 1);
    Partition::new(ids, labels, n_clusters.max(1), 0.0)
        .map_err(|e| IoError::row(path, 0, e.to_string()))
}

/// Column names for a prototype table: the feature variable names when the
/// dimensionality matches the feature table, generic `x0…` otherwise.
fn prototype_header(dim: usize) -> Vec<String> {
    let mut header = vec!["cluster".to_string()];
    if dim == N_VARIABLES {
        header.extend(VARIABLE_NAMES.iter().map(|n| n.to_string()));
    } else {
        header.extend((0..dim).map(|d| format!("x{d}")));
    }
    header
}

/// Writes one sub-period's prototypes, one row per cluster.
pub fn write_prototypes_csv(path: &Path, prototypes: &Prototypes) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(prototype_header(prototypes.dim()))
        .map_err(|e| IoError::csv(path, e))?;
    for (cluster, vector) in prototypes.vectors().iter().enumerate() {
        let mut row = vec![cluster.to_string()];
        row.extend(vector.iter().map(|v| v.to_string()));
        writer
            .write_record(row)
            .map_err(|e| IoError::csv(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Writes the ground truth of a generated stream.
pub fn write_ground_truth_csv(path: &Path, data: &GeneratedData) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(TRUTH_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for period in &data.periods {
        for (&id, &component) in period.ids.iter().zip(&period.truth) {
            writer
                .write_record([
                    id.to_string(),
                    period.label.clone(),
                    component.to_string(),
                    data.component_names[component].clone(),
                ])
                .map_err(|e| IoError::csv(path, e))?;
        }
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Per-sub-period block of a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPeriod {
    /// Sub-period label.
    pub label: String,
    /// Number of navigations in the sub-period.
    pub n_points: usize,
    /// Cluster count of the partition.
    pub n_clusters: usize,
    /// Partition inertia (see the strategy documentation for what it is
    /// measured against).
    pub inertia: f64,
    /// Optimization iterations spent in the sub-period.
    pub iterations: usize,
    /// Clusters left without members.
    pub empty_clusters: Vec<usize>,
}

/// Everything needed to audit or reproduce one strategy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Strategy name.
    pub strategy: StrategyKind,
    /// Number of clusters.
    pub k: usize,
    /// Iteration cap per optimization run.
    pub max_iterations: usize,
    /// Random restarts for from-scratch clusterings.
    pub n_initializations: usize,
    /// Root seed.
    pub seed: u64,
    /// Distance function name.
    pub distance: String,
    /// Convergence rule.
    pub convergence: ConvergenceRule,
    /// Prototype carry mode (previous strategy only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub carry: Option<CarryMode>,
    /// Sub-period granularity inferred from the labels
    /// (month/week/day/custom).
    pub granularity: String,
    /// Per-sub-period diagnostics, in chronological order.
    pub sub_periods: Vec<ManifestPeriod>,
}

/// Infers the sub-period granularity from label shapes: `YYYY-MM` is month,
/// `YYYY-Wnn` is week, `YYYY-MM-DD` is day; anything else (synthetic `p1`
/// labels included) is custom.
pub fn infer_granularity(labels: &[String]) -> &'static str {
    fn digits(s: &str) -> bool {
        !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
    }
    let shape = |label: &str| -> Option<&'static str> {
        let parts: Vec<&str> = label.split('-').collect();
        match parts.as_slice() {
            [y, m] if digits(y) && y.len() == 4 && digits(m) && m.len() == 2 => Some("month"),
            [y, w]
                if digits(y)
                    && y.len() == 4
                    && w.len() == 3
                    && w.starts_with('W')
                    && digits(&w[1..]) =>
            {
                Some("week")
            }
            [y, m, d]
                if digits(y)
                    && y.len() == 4
                    && digits(m)
                    && m.len() == 2
                    && digits(d)
                    && d.len() == 2 =>
            {
                Some("day")
            }
            _ => None,
        }
    };
    let mut shapes = labels.iter().map(|l| shape(l));
    match shapes.next().flatten() {
        Some(first) if shapes.all(|s| s == Some(first)) => first,
        _ => "custom",
    }
}

/// Builds the manifest describing one strategy outcome.
pub fn build_manifest(
    outcome: &StrategyOutcome,
    config: &ClusteringConfig,
    carry: CarryMode,
) -> RunManifest {
    let labels: Vec<String> = outcome.periods.iter().map(|p| p.label.clone()).collect();
    RunManifest {
        strategy: outcome.strategy,
        k: config.k,
        max_iterations: config.max_iterations,
        n_initializations: config.n_initializations,
        seed: config.seed,
        distance: DISTANCE.to_string(),
        convergence: config.convergence,
        carry: (outcome.strategy == StrategyKind::Previous).then_some(carry),
        granularity: infer_granularity(&labels).to_string(),
        sub_periods: outcome
            .periods
            .iter()
            .map(|p: &PeriodOutcome| ManifestPeriod {
                label: p.label.clone(),
                n_points: p.partition.len(),
                n_clusters: p.partition.n_clusters(),
                inertia: p.partition.inertia(),
                iterations: p.iterations,
                empty_clusters: p.partition.empty_clusters(),
            })
            .collect(),
    }
}

/// Serializes any JSON-representable document with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Reads a run manifest.
pub fn read_manifest_json(path: &Path) -> Result<RunManifest, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes one strategy's results into `dir/<strategy>/`: a partition file
/// and a prototype file per sub-period, plus `manifest.json`.
///
/// Returns the strategy directory. File names embed the sub-period label:
/// `partition_<label>.csv`, `prototypes_<label>.csv`.
pub fn write_strategy_results(
    dir: &Path,
    outcome: &StrategyOutcome,
    config: &ClusteringConfig,
    carry: CarryMode,
) -> Result<PathBuf, IoError> {
    let strategy_dir = dir.join(outcome.strategy.as_str());
    std::fs::create_dir_all(&strategy_dir).map_err(|e| IoError::io(&strategy_dir, e))?;
    for period in &outcome.periods {
        write_partition_csv(
            &strategy_dir.join(format!("partition_{}.csv", period.label)),
            &period.partition,
        )?;
        write_prototypes_csv(
            &strategy_dir.join(format!("prototypes_{}.csv", period.label)),
            &period.prototypes,
        )?;
    }
    write_json(
        &strategy_dir.join("manifest.json"),
        &build_manifest(outcome, config, carry),
    )?;
    Ok(strategy_dir)
}

/// Reads one strategy's partitions back from a results directory written by
/// [`write_strategy_results`], using the manifest for the sub-period order.
pub fn read_strategy_partitions(
    strategy_dir: &Path,
) -> Result<crate::report::StrategyPartitions, IoError> {
    let manifest = read_manifest_json(&strategy_dir.join("manifest.json"))?;
    let mut periods = Vec::with_capacity(manifest.sub_periods.len());
    for period in &manifest.sub_periods {
        let partition =
            read_partition_csv(&strategy_dir.join(format!("partition_{}.csv", period.label)))?;
        periods.push((period.label.clone(), partition));
    }
    Ok(crate::report::StrategyPartitions {
        strategy: manifest.strategy,
        periods,
    })
}

/// Writes the pairwise CR table of a report.
pub fn write_cr_pairwise_csv(path: &Path, bundle: &ReportBundle) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(CR_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for record in &bundle.pairwise_cr {
        writer
            .write_record([
                record.period.clone(),
                record.strategy_a.as_str().to_string(),
                record.strategy_b.as_str().to_string(),
                record.cr.to_string(),
            ])
            .map_err(|e| IoError::csv(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Writes the per-cluster F table of a report.
pub fn write_cluster_f_csv(path: &Path, bundle: &ReportBundle) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(CLUSTER_F_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for record in &bundle.cluster_f {
        writer
            .write_record([
                record.period.clone(),
                record.apriori_strategy.as_str().to_string(),
                record.reached_strategy.as_str().to_string(),
                record.cluster.to_string(),
                record.size.to_string(),
                record.best_match.to_string(),
                record.f.to_string(),
            ])
            .map_err(|e| IoError::csv(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Writes the overall-F table of a report.
pub fn write_overall_f_csv(path: &Path, bundle: &ReportBundle) -> Result<(), IoError> {
    let mut writer = open_writer(path)?;
    writer
        .write_record(OVERALL_F_HEADER)
        .map_err(|e| IoError::csv(path, e))?;
    for record in &bundle.overall_f {
        writer
            .write_record([
                record.period.clone(),
                record.apriori_strategy.as_str().to_string(),
                record.reached_strategy.as_str().to_string(),
                record.overall.to_string(),
            ])
            .map_err(|e| IoError::csv(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// The JSON summary document: coverage plus the five-number summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    /// Sub-period labels covered.
    pub periods: Vec<String>,
    /// Strategies compared, in input order.
    pub strategies: Vec<StrategyKind>,
    /// CR five-number summary per unordered strategy pair.
    pub cr_summary: Vec<PairCrSummary>,
    /// Per-cluster-F five-number summary per ordered strategy pair.
    pub f_summary: Vec<PairFSummary>,
}

impl From<&ReportBundle> for ReportSummary {
    fn from(bundle: &ReportBundle) -> Self {
        ReportSummary {
            periods: bundle.periods.clone(),
            strategies: bundle.strategies.clone(),
            cr_summary: bundle.cr_summary.clone(),
            f_summary: bundle.f_summary.clone(),
        }
    }
}

/// Writes the full report: `cr_pairwise.csv`, `fmeasure_clusters.csv`,
/// `fmeasure_overall.csv`, and `summary.json` inside `dir`.
pub fn write_report_files(dir: &Path, bundle: &ReportBundle) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    write_cr_pairwise_csv(&dir.join("cr_pairwise.csv"), bundle)?;
    write_cluster_f_csv(&dir.join("fmeasure_clusters.csv"), bundle)?;
    write_overall_f_csv(&dir.join("fmeasure_overall.csv"), bundle)?;
    write_json(&dir.join("summary.json"), &ReportSummary::from(bundle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::StandardizationScope;
    use crate::report::compare_strategies;
    use chrono::TimeZone;
    use tempfile::TempDir;

    fn navigation(id: u64, user_key: &str, times: &[i64]) -> Navigation {
        let requests = times
            .iter()
            .map(|&t| RawRequest {
                timestamp: Utc.timestamp_opt(1_026_691_200 + t, 0).unwrap(),
                user_key: user_key.to_string(),
                resource: format!("/page/{t}"),
                status: 200,
                bytes: 100 + t as u64,
            })
            .collect();
        Navigation::new(id, requests).unwrap()
    }

    #[test]
    fn navigations_and_requests_round_trip() {
        let dir = TempDir::new().unwrap();
        let navs = vec![
            navigation(1, "10.0.0.1 agent-a", &[0, 30, 90]),
            navigation(2, "10.0.0.2 agent, with comma", &[10, 40]),
        ];
        let nav_path = dir.path().join("navigations.csv");
        let req_path = dir.path().join("requests.csv");
        write_navigations_csv(&nav_path, &navs).unwrap();
        write_requests_csv(&req_path, &navs).unwrap();
        let back = read_navigation_files(&nav_path, &req_path).unwrap();
        assert_eq!(back, navs);

        let text = std::fs::read_to_string(&nav_path).unwrap();
        assert!(text.starts_with("id,user_key,start,end,n_requests\n"));
        assert!(text.contains("2002-07-15T00:00:00Z"));
    }

    #[test]
    fn mismatched_request_counts_are_detected() {
        let dir = TempDir::new().unwrap();
        let navs = vec![navigation(1, "u", &[0, 30])];
        let nav_path = dir.path().join("navigations.csv");
        let req_path = dir.path().join("requests.csv");
        write_navigations_csv(&nav_path, &navs).unwrap();
        write_requests_csv(&req_path, &navs[..0]).unwrap();
        assert!(matches!(
            read_navigation_files(&nav_path, &req_path),
            Err(IoError::Row { .. })
        ));
    }

    #[test]
    fn feature_table_round_trips_with_exact_header() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("features.csv");
        let mut values = [0.0f64; N_VARIABLES];
        values[0] = 3.0;
        values[7] = 40.0 / 3.0;
        let records = vec![
            FeatureVector {
                nav_id: 7,
                sub_period: "2002-07".to_string(),
                values,
            },
            FeatureVector {
                nav_id: 8,
                sub_period: "2002-08".to_string(),
                values: [1.25; N_VARIABLES],
            },
        ];
        write_features_csv(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "nav_id,sub_period,NbRequests_OK,NbRequests_BAD,PRequests_OK,NbRepetitions,\
             PRepetitions,TotalDuration,AvDuration,AvDuration_OK,NbRequests_SEM,\
             PRequests_SEM,TotalSize,AvTotalSize,MaxDuration_OK"
        );
        let back = read_features_csv(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn feature_table_header_is_validated() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("features.csv");
        std::fs::write(&path, "nav,period,x\n1,p,0\n").unwrap();
        assert!(matches!(
            read_features_csv(&path),
            Err(IoError::Header { .. })
        ));
    }

    #[test]
    fn stats_sidecar_lists_every_group_and_variable() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("feature_stats.csv");
        let records = vec![
            FeatureVector {
                nav_id: 1,
                sub_period: "2002-07".to_string(),
                values: [1.0; N_VARIABLES],
            },
            FeatureVector {
                nav_id: 2,
                sub_period: "2002-07".to_string(),
                values: [3.0; N_VARIABLES],
            },
        ];
        let (_, stats) =
            crate::features::standardize(&records, StandardizationScope::Global).unwrap();
        write_feature_stats_csv(&path, &stats).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scope,group,variable,mean,stddev,constant");
        assert_eq!(lines.len(), 1 + N_VARIABLES);
        assert_eq!(lines[1], "global,global,NbRequests_OK,2,1,false");
    }

    #[test]
    fn partition_files_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("partition_p1.csv");
        let partition = Partition::new(vec![11, 12, 13, 14], vec![2, 0, 2, 1], 3, 42.5).unwrap();
        write_partition_csv(&path, &partition).unwrap();
        let back = read_partition_csv(&path).unwrap();
        assert_eq!(back.item_ids(), partition.item_ids());
        assert_eq!(back.assignment(), partition.assignment());
        assert_eq!(back.n_clusters(), 3);
        assert_eq!(back.inertia(), 0.0, "membership files do not carry inertia");
    }

    #[test]
    fn prototype_headers_follow_the_dimensionality() {
        let dir = TempDir::new().unwrap();
        let narrow = dir.path().join("narrow.csv");
        write_prototypes_csv(
            &narrow,
            &Prototypes::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap(),
        )
        .unwrap();
        let text = std::fs::read_to_string(&narrow).unwrap();
        assert!(text.starts_with("cluster,x0,x1\n"));
        assert!(text.contains("0,0,1"));

        let wide = dir.path().join("wide.csv");
        write_prototypes_csv(
            &wide,
            &Prototypes::new(vec![vec![0.5; N_VARIABLES]]).unwrap(),
        )
        .unwrap();
        let text = std::fs::read_to_string(&wide).unwrap();
        assert!(text.starts_with("cluster,NbRequests_OK,"));
        assert!(text
            .trim_end()
            .ends_with("MaxDuration_OK\n0,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5"));
    }

    #[test]
    fn granularity_is_inferred_from_label_shapes() {
        let labels = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(infer_granularity(&labels(&["2002-07", "2002-08"])), "month");
        assert_eq!(
            infer_granularity(&labels(&["2002-W29", "2002-W30"])),
            "week"
        );
        assert_eq!(infer_granularity(&labels(&["2002-07-15"])), "day");
        assert_eq!(infer_granularity(&labels(&["p1", "p2"])), "custom");
        assert_eq!(infer_granularity(&labels(&["2002-07", "p2"])), "custom");
        assert_eq!(infer_granularity(&labels(&[])), "custom");
    }

    fn small_outcome() -> (StrategyOutcome, ClusteringConfig) {
        use crate::strategies::{cluster_independent, PeriodData, TemporalDataset};
        let dataset = TemporalDataset::new(vec![
            PeriodData {
                label: "2002-07".to_string(),
                ids: vec![1, 2, 3, 4],
                points: vec![vec![0.0], vec![0.1], vec![9.0], vec![9.1]],
            },
            PeriodData {
                label: "2002-08".to_string(),
                ids: vec![5, 6, 7, 8],
                points: vec![vec![0.2], vec![0.3], vec![9.2], vec![9.3]],
            },
        ])
        .unwrap();
        let config = ClusteringConfig::default()
            .with_k(2)
            .with_n_initializations(5)
            .with_seed(1);
        (cluster_independent(&dataset, &config).unwrap(), config)
    }

    #[test]
    fn strategy_results_directory_round_trips_and_is_reproducible() {
        let (outcome, config) = small_outcome();
        let dir = TempDir::new().unwrap();
        let strategy_dir =
            write_strategy_results(dir.path(), &outcome, &config, CarryMode::default()).unwrap();
        assert_eq!(strategy_dir, dir.path().join("independent"));
        for name in [
            "partition_2002-07.csv",
            "partition_2002-08.csv",
            "prototypes_2002-07.csv",
            "prototypes_2002-08.csv",
            "manifest.json",
        ] {
            assert!(strategy_dir.join(name).exists(), "missing {name}");
        }

        let manifest = read_manifest_json(&strategy_dir.join("manifest.json")).unwrap();
        assert_eq!(manifest.strategy, StrategyKind::Independent);
        assert_eq!(manifest.k, 2);
        assert_eq!(manifest.distance, "euclidean");
        assert_eq!(manifest.granularity, "month");
        assert_eq!(manifest.carry, None, "carry is only recorded for previous");
        assert_eq!(manifest.sub_periods.len(), 2);
        assert_eq!(manifest.sub_periods[0].label, "2002-07");
        assert_eq!(manifest.sub_periods[0].n_points, 4);

        let partitions = read_strategy_partitions(&strategy_dir).unwrap();
        assert_eq!(partitions.strategy, StrategyKind::Independent);
        assert_eq!(partitions.periods.len(), 2);
        assert_eq!(
            partitions.periods[0].1.assignment(),
            outcome.periods[0].partition.assignment()
        );

        // Rewriting produces byte-identical files.
        let before: Vec<Vec<u8>> = [
            "partition_2002-07.csv",
            "prototypes_2002-08.csv",
            "manifest.json",
        ]
        .iter()
        .map(|n| std::fs::read(strategy_dir.join(n)).unwrap())
        .collect();
        write_strategy_results(dir.path(), &outcome, &config, CarryMode::default()).unwrap();
        let after: Vec<Vec<u8>> = [
            "partition_2002-07.csv",
            "prototypes_2002-08.csv",
            "manifest.json",
        ]
        .iter()
        .map(|n| std::fs::read(strategy_dir.join(n)).unwrap())
        .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn previous_strategy_manifests_record_the_carry_mode() {
        use crate::strategies::{cluster_previous, PeriodData, TemporalDataset};
        let dataset = TemporalDataset::new(vec![PeriodData {
            label: "p1".to_string(),
            ids: vec![1, 2],
            points: vec![vec![0.0], vec![9.0]],
        }])
        .unwrap();
        let config = ClusteringConfig::default()
            .with_k(2)
            .with_n_initializations(3);
        let outcome = cluster_previous(&dataset, &config, CarryMode::FreezeFirst).unwrap();
        let manifest = build_manifest(&outcome, &config, CarryMode::FreezeFirst);
        assert_eq!(manifest.carry, Some(CarryMode::FreezeFirst));
        assert_eq!(manifest.granularity, "custom");
    }

    #[test]
    fn report_files_are_written_and_reproducible() {
        let (outcome, _) = small_outcome();
        let mut shifted = outcome.clone();
        shifted.strategy = StrategyKind::Global;
        let bundle = compare_strategies(&[(&outcome).into(), (&shifted).into()]).unwrap();
        let dir = TempDir::new().unwrap();
        write_report_files(dir.path(), &bundle).unwrap();

        let cr_text = std::fs::read_to_string(dir.path().join("cr_pairwise.csv")).unwrap();
        let mut lines = cr_text.lines();
        assert_eq!(lines.next().unwrap(), "period,strategy_a,strategy_b,cr");
        assert_eq!(lines.next().unwrap(), "2002-07,independent,global,1");

        let f_text = std::fs::read_to_string(dir.path().join("fmeasure_clusters.csv")).unwrap();
        assert!(f_text
            .starts_with("period,apriori_strategy,reached_strategy,cluster,size,best_match,f\n"));

        let summary: ReportSummary = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("summary.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(summary.periods, vec!["2002-07", "2002-08"]);
        assert_eq!(summary.cr_summary.len(), 1);
        assert_eq!(summary.cr_summary[0].summary.min, 1.0);

        let before = std::fs::read(dir.path().join("summary.json")).unwrap();
        write_report_files(dir.path(), &bundle).unwrap();
        let after = std::fs::read(dir.path().join("summary.json")).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn ground_truth_file_lists_components_by_name() {
        use crate::synth::{generate, ComponentSpec, DriftScenario};
        let scenario = DriftScenario {
            dimensions: 1,
            periods: 2,
            points_per_period: 3,
            seed: 3,
            components: vec![
                ComponentSpec {
                    name: "base".to_string(),
                    mean: vec![0.0],
                    spread: 1.0,
                    weight: 1.0,
                },
                ComponentSpec {
                    name: "far".to_string(),
                    mean: vec![50.0],
                    spread: 1.0,
                    weight: 1.0,
                },
            ],
            events: vec![],
        };
        let data = generate(&scenario).unwrap();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("truth.csv");
        write_ground_truth_csv(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "nav_id,sub_period,component_index,component");
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("1,p1,"));
        assert!(lines
            .iter()
            .skip(1)
            .all(|l| l.ends_with(",0,base") || l.ends_with(",1,far")));
    }
}
