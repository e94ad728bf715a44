//! Numeric description of navigations.
//!
//! Every filtered navigation becomes one row of a feature table: thirteen
//! descriptors summarizing volume, success rate, repetitiveness, timing, and
//! transfer size, plus a sub-period label derived from the navigation's start
//! time. Because the raw descriptors live on wildly different scales (counts,
//! proportions, seconds, bytes), they are z-score standardized before
//! clustering.
//!
//! Per-request durations are forward gaps: a request lasts until the next
//! request of the same navigation starts, and the final request lasts 0
//! seconds.

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Navigation;

/// Number of descriptors per navigation.
pub const N_VARIABLES: usize = 13;

/// Descriptor names, in table column order.
pub const VARIABLE_NAMES: [&str; N_VARIABLES] = [
    "NbRequests_OK",
    "NbRequests_BAD",
    "PRequests_OK",
    "NbRepetitions",
    "PRepetitions",
    "TotalDuration",
    "AvDuration",
    "AvDuration_OK",
    "NbRequests_SEM",
    "PRequests_SEM",
    "TotalSize",
    "AvTotalSize",
    "MaxDuration_OK",
];

/// Errors raised while computing or standardizing features.
#[derive(Debug, Error)]
pub enum FeatureError {
    /// Standardization needs data.
    #[error("no feature vectors to standardize")]
    Empty,
    /// A standardization group must contain at least two vectors for its
    /// deviations to be meaningful.
    #[error("standardization group {group:?} needs at least 2 vectors, found {found}")]
    GroupTooSmall { group: String, found: usize },
}

/// How timestamps map to sub-period labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Calendar month, e.g. `2002-07`.
    Month,
    /// ISO week, e.g. `2002-W29`.
    Week,
    /// Calendar day, e.g. `2002-07-15`.
    Day,
}

impl Granularity {
    /// Stable lowercase name, as used on the command line and in manifests.
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Month => "month",
            Granularity::Week => "week",
            Granularity::Day => "day",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "month" => Ok(Granularity::Month),
            "week" => Ok(Granularity::Week),
            "day" => Ok(Granularity::Day),
            other => Err(format!(
                "unknown granularity {other:?} (expected month, week, or day)"
            )),
        }
    }
}

/// URL patterns marking requests with special site-specific meaning.
///
/// A pattern ending in `*` matches any resource starting with the prefix
/// before the `*`; any other pattern matches exactly. The set may be empty,
/// in which case no request counts as semantic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SemanticPatterns {
    patterns: Vec<String>,
}

impl SemanticPatterns {
    /// Builds a pattern set from explicit patterns.
    pub fn new(patterns: Vec<String>) -> Self {
        SemanticPatterns { patterns }
    }

    /// Parses one pattern per line; blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Self {
        SemanticPatterns {
            patterns: text
                .lines()
                .map(str::trim)
                .filter(|line| !line.is_empty() && !line.starts_with('#'))
                .map(str::to_string)
                .collect(),
        }
    }

    /// True when the resource matches any pattern.
    pub fn matches(&self, resource: &str) -> bool {
        self.patterns
            .iter()
            .any(|pattern| match pattern.strip_suffix('*') {
                Some(prefix) => resource.starts_with(prefix),
                None => resource == pattern,
            })
    }

    /// The raw patterns.
    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }
}

/// One navigation's descriptors plus its sub-period label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Navigation identifier.
    pub nav_id: u64,
    /// Sub-period label, e.g. `2002-07`.
    pub sub_period: String,
    /// Descriptor values in [`VARIABLE_NAMES`] order.
    pub values: [f64; N_VARIABLES],
}

impl FeatureVector {
    /// Descriptor values as an owned vector (for matrix-style consumers).
    pub fn to_point(&self) -> Vec<f64> {
        self.values.to_vec()
    }
}

/// Computes the thirteen descriptors of one navigation.
///
/// Ratios whose denominator is the number of successful requests are defined
/// as 0 when the navigation has no successful request at all; such rows can
/// be recognized by `NbRequests_OK == 0`.
pub fn compute_descriptors(
    navigation: &Navigation,
    semantic: &SemanticPatterns,
) -> [f64; N_VARIABLES] {
    let n = navigation.n_requests();
    let n_f = n as f64;
    // Forward gap to the next request; the final request lasts 0 s.
    let durations: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 < n {
                (navigation.requests[i + 1].timestamp - navigation.requests[i].timestamp)
                    .num_seconds() as f64
            } else {
                0.0
            }
        })
        .collect();

    let mut n_ok = 0u64;
    let mut total_duration_ok = 0.0f64;
    let mut max_duration_ok = 0.0f64;
    let mut n_semantic = 0u64;
    let mut total_bytes = 0.0f64;
    let mut distinct: HashSet<&str> = HashSet::with_capacity(n);
    for (request, &duration) in navigation.requests.iter().zip(&durations) {
        if request.status == 200 {
            n_ok += 1;
            total_duration_ok += duration;
            if duration > max_duration_ok {
                max_duration_ok = duration;
            }
        }
        if semantic.matches(&request.resource) {
            n_semantic += 1;
        }
        total_bytes += request.bytes as f64;
        distinct.insert(request.resource.as_str());
    }
    let n_bad = n as u64 - n_ok;
    let repetitions = (n - distinct.len()) as f64;
    let total_duration = navigation.duration_seconds();
    let ok_f = n_ok as f64;

    [
        ok_f,
        n_bad as f64,
        ok_f / n_f,
        repetitions,
        repetitions / n_f,
        total_duration,
        total_duration / n_f,
        if n_ok > 0 {
            total_duration_ok / ok_f
        } else {
            0.0
        },
        n_semantic as f64,
        n_semantic as f64 / n_f,
        total_bytes,
        if n_ok > 0 { total_bytes / ok_f } else { 0.0 },
        max_duration_ok,
    ]
}

/// Sub-period label of a UTC instant under the given granularity. Labels are
/// chosen so that their lexicographic order matches chronological order.
pub fn assign_sub_period(start: DateTime<Utc>, granularity: Granularity) -> String {
    match granularity {
        Granularity::Month => start.format("%Y-%m").to_string(),
        Granularity::Week => start.format("%G-W%V").to_string(),
        Granularity::Day => start.format("%Y-%m-%d").to_string(),
    }
}

/// Computes one navigation's full feature row (descriptors plus label).
pub fn feature_vector(
    navigation: &Navigation,
    semantic: &SemanticPatterns,
    granularity: Granularity,
) -> FeatureVector {
    FeatureVector {
        nav_id: navigation.id,
        sub_period: assign_sub_period(navigation.start(), granularity),
        values: compute_descriptors(navigation, semantic),
    }
}

/// What a standardization group covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizationScope {
    /// One mean/deviation pair per variable over the whole table (default).
    Global,
    /// Separate statistics within each sub-period.
    PerSubPeriod,
}

impl StandardizationScope {
    /// Stable lowercase name.
    pub fn as_str(self) -> &'static str {
        match self {
            StandardizationScope::Global => "global",
            StandardizationScope::PerSubPeriod => "per_sub_period",
        }
    }
}

impl std::str::FromStr for StandardizationScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(StandardizationScope::Global),
            "per_sub_period" | "per-sub-period" | "per-period" => {
                Ok(StandardizationScope::PerSubPeriod)
            }
            other => Err(format!(
                "unknown standardization scope {other:?} (expected global or per-period)"
            )),
        }
    }
}

/// Mean and population standard deviation per variable within one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    /// Group key: `global`, or the sub-period label.
    pub group: String,
    /// Per-variable means.
    pub means: [f64; N_VARIABLES],
    /// Per-variable population standard deviations (divide by n).
    pub stddevs: [f64; N_VARIABLES],
    /// Variables that were constant within the group; their standardized
    /// values are 0.
    pub constant: [bool; N_VARIABLES],
}

/// Statistics recorded by a standardization pass, for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    /// Scope the statistics were computed under.
    pub scope: StandardizationScope,
    /// One entry per group, in group-key order.
    pub groups: Vec<GroupStats>,
}

/// Z-score standardization: subtract the group mean and divide by the group's
/// population standard deviation, per variable. Constant variables map to 0
/// and are flagged. Row order is preserved.
pub fn standardize(
    records: &[FeatureVector],
    scope: StandardizationScope,
) -> Result<(Vec<FeatureVector>, StandardizationStats), FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::Empty);
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (index, record) in records.iter().enumerate() {
        let key = match scope {
            StandardizationScope::Global => "global".to_string(),
            StandardizationScope::PerSubPeriod => record.sub_period.clone(),
        };
        groups.entry(key).or_default().push(index);
    }
    let mut output: Vec<FeatureVector> = records.to_vec();
    let mut stats = Vec::with_capacity(groups.len());
    for (group, members) in groups {
        let count = members.len();
        if count < 2 {
            return Err(FeatureError::GroupTooSmall {
                group,
                found: count,
            });
        }
        let inv = 1.0 / count as f64;
        let mut means = [0.0f64; N_VARIABLES];
        for &index in &members {
            for (mean, value) in means.iter_mut().zip(&records[index].values) {
                *mean += value;
            }
        }
        for mean in &mut means {
            *mean *= inv;
        }
        let mut stddevs = [0.0f64; N_VARIABLES];
        for &index in &members {
            for (var, (value, mean)) in stddevs
                .iter_mut()
                .zip(records[index].values.iter().zip(&means))
            {
                let centered = value - mean;
                *var += centered * centered;
            }
        }
        let mut constant = [false; N_VARIABLES];
        for (stddev, flag) in stddevs.iter_mut().zip(&mut constant) {
            *stddev = (*stddev * inv).sqrt();
            *flag = *stddev == 0.0;
        }
        for &index in &members {
            for v in 0..N_VARIABLES {
                output[index].values[v] = if constant[v] {
                    0.0
                } else {
                    (records[index].values[v] - means[v]) / stddevs[v]
                };
            }
        }
        stats.push(GroupStats {
            group,
            means,
            stddevs,
            constant,
        });
    }
    Ok((
        output,
        StandardizationStats {
            scope,
            groups: stats,
        },
    ))
}
