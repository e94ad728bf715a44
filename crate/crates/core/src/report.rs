//! Cross-strategy comparison reports.
//!
//! After the four temporal strategies have partitioned the same sub-periods,
//! this module confronts their partitions: the corrected Rand index for every
//! unordered strategy pair in every sub-period (how similar two strategies'
//! partitions are, chance-corrected), and the per-cluster F-measure for every
//! ordered pair (how well each cluster of the first strategy is recovered by
//! the second). Five-number summaries (min, quartiles, max) aggregate both
//! families of values into boxplot-ready statistics.
//!
//! All outputs are pure functions of the input partitions and are ordered
//! deterministically (period-major, then pair order), so regenerating a
//! report from persisted partitions reproduces it exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::Partition;
use crate::eval::{corrected_rand, f_measure, EvalError};
use crate::strategies::{StrategyKind, StrategyOutcome};

/// Errors raised while assembling a comparison report.
#[derive(Debug, Error)]
pub enum ReportError {
    /// At least one strategy is needed.
    #[error("no strategy results to compare")]
    NoStrategies,
    /// All strategies must cover the same sub-periods in the same order.
    #[error("strategy {strategy} covers sub-periods {found:?}, expected {expected:?}")]
    PeriodMismatch {
        strategy: StrategyKind,
        expected: Vec<String>,
        found: Vec<String>,
    },
    /// An index computation failed for one pair in one sub-period.
    #[error("comparing {left} and {right} in sub-period {period:?}: {source}")]
    Comparison {
        period: String,
        left: StrategyKind,
        right: StrategyKind,
        source: EvalError,
    },
}

/// One strategy's partitions, one per sub-period — the minimal input a
/// comparison needs (prototypes and iteration counts play no role).
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPartitions {
    /// Which strategy produced the partitions.
    pub strategy: StrategyKind,
    /// `(sub-period label, partition)` in chronological order.
    pub periods: Vec<(String, Partition)>,
}

impl From<&StrategyOutcome> for StrategyPartitions {
    fn from(outcome: &StrategyOutcome) -> Self {
        StrategyPartitions {
            strategy: outcome.strategy,
            periods: outcome
                .periods
                .iter()
                .map(|p| (p.label.clone(), p.partition.clone()))
                .collect(),
        }
    }
}

/// Corrected Rand between two strategies' partitions of one sub-period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseCr {
    /// Sub-period label.
    pub period: String,
    /// First strategy of the unordered pair (input order).
    pub strategy_a: StrategyKind,
    /// Second strategy of the unordered pair.
    pub strategy_b: StrategyKind,
    /// Corrected Rand index of the two partitions.
    pub cr: f64,
}

/// Per-cluster F-measure of one ordered strategy comparison in one
/// sub-period: how well one cluster of the first strategy is recovered by
/// the second strategy's partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFRecord {
    /// Sub-period label.
    pub period: String,
    /// Strategy whose clusters are being looked for.
    pub apriori_strategy: StrategyKind,
    /// Strategy whose partition is searched for matches.
    pub reached_strategy: StrategyKind,
    /// Cluster index within the a priori partition.
    pub cluster: usize,
    /// Cluster size.
    pub size: u64,
    /// Index of the best-matching reached cluster.
    pub best_match: usize,
    /// The cluster's F value against its best match.
    pub f: f64,
}

/// Overall (size-weighted) F-measure of one ordered comparison in one
/// sub-period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallFRecord {
    /// Sub-period label.
    pub period: String,
    /// Strategy whose clusters are being looked for.
    pub apriori_strategy: StrategyKind,
    /// Strategy whose partition is searched for matches.
    pub reached_strategy: StrategyKind,
    /// Size-weighted overall F.
    pub overall: f64,
}

/// Minimum, quartiles, and maximum of a sample (linear interpolation between
/// order statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Five-number summary of one unordered pair's CR values across sub-periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCrSummary {
    pub strategy_a: StrategyKind,
    pub strategy_b: StrategyKind,
    #[serde(flatten)]
    pub summary: FiveNumber,
}

/// Five-number summary of one ordered pair's per-cluster F values pooled
/// across sub-periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFSummary {
    pub apriori_strategy: StrategyKind,
    pub reached_strategy: StrategyKind,
    #[serde(flatten)]
    pub summary: FiveNumber,
}

/// Everything a strategy comparison produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    /// Sub-period labels, in chronological order.
    pub periods: Vec<String>,
    /// Strategies, in input order.
    pub strategies: Vec<StrategyKind>,
    /// CR per sub-period and unordered strategy pair (period-major order).
    pub pairwise_cr: Vec<PairwiseCr>,
    /// Per-cluster F rows for every ordered strategy pair (period-major,
    /// then pair order, then cluster index).
    pub cluster_f: Vec<ClusterFRecord>,
    /// Overall F per sub-period and ordered pair.
    pub overall_f: Vec<OverallFRecord>,
    /// CR five-number summary per unordered pair.
    pub cr_summary: Vec<PairCrSummary>,
    /// Per-cluster-F five-number summary per ordered pair.
    pub f_summary: Vec<PairFSummary>,
}

/// Five-number summary with quartiles by linear interpolation between order
/// statistics (the common spreadsheet/statistics-package convention). Returns
/// `None` for an empty sample.
pub fn five_number_summary(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |q: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if frac == 0.0 || lo + 1 >= sorted.len() {
            sorted[lo]
        } else {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        }
    };
    Some(FiveNumber {
        min: sorted[0],
        q1: at(0.25),
        median: at(0.5),
        q3: at(0.75),
        max: sorted[sorted.len() - 1],
    })
}

fn check_aligned(results: &[StrategyPartitions]) -> Result<Vec<String>, ReportError> {
    let reference: Vec<String> = results[0]
        .periods
        .iter()
        .map(|(label, _)| label.clone())
        .collect();
    for result in &results[1..] {
        let labels: Vec<String> = result
            .periods
            .iter()
            .map(|(label, _)| label.clone())
            .collect();
        if labels != reference {
            return Err(ReportError::PeriodMismatch {
                strategy: result.strategy,
                expected: reference,
                found: labels,
            });
        }
    }
    Ok(reference)
}

/// Confronts the partitions of several strategies over a shared sub-period
/// set.
///
/// For every sub-period: the corrected Rand index of every unordered
/// strategy pair (in input order), and the per-cluster plus overall
/// F-measure of every ordered pair, with the first-listed strategy in the
/// a priori role. Five-number summaries aggregate CR per unordered pair
/// (across sub-periods) and per-cluster F per ordered pair (pooled across
/// sub-periods and clusters).
///
/// A single input strategy yields a valid bundle with empty pairwise
/// sections.
pub fn compare_strategies(results: &[StrategyPartitions]) -> Result<ReportBundle, ReportError> {
    if results.is_empty() {
        return Err(ReportError::NoStrategies);
    }
    let periods = check_aligned(results)?;
    let n_strategies = results.len();

    let mut pairwise_cr = Vec::new();
    let mut cluster_f = Vec::new();
    let mut overall_f = Vec::new();
    for (t, period) in periods.iter().enumerate() {
        for i in 0..n_strategies {
            for j in (i + 1)..n_strategies {
                let cr = corrected_rand(&results[i].periods[t].1, &results[j].periods[t].1)
                    .map_err(|source| ReportError::Comparison {
                        period: period.clone(),
                        left: results[i].strategy,
                        right: results[j].strategy,
                        source,
                    })?;
                pairwise_cr.push(PairwiseCr {
                    period: period.clone(),
                    strategy_a: results[i].strategy,
                    strategy_b: results[j].strategy,
                    cr,
                });
            }
        }
        for i in 0..n_strategies {
            for j in 0..n_strategies {
                if i == j {
                    continue;
                }
                let measure = f_measure(&results[i].periods[t].1, &results[j].periods[t].1)
                    .map_err(|source| ReportError::Comparison {
                        period: period.clone(),
                        left: results[i].strategy,
                        right: results[j].strategy,
                        source,
                    })?;
                for m in &measure.per_cluster {
                    cluster_f.push(ClusterFRecord {
                        period: period.clone(),
                        apriori_strategy: results[i].strategy,
                        reached_strategy: results[j].strategy,
                        cluster: m.cluster,
                        size: m.size,
                        best_match: m.best_match,
                        f: m.f,
                    });
                }
                overall_f.push(OverallFRecord {
                    period: period.clone(),
                    apriori_strategy: results[i].strategy,
                    reached_strategy: results[j].strategy,
                    overall: measure.overall,
                });
            }
        }
    }

    let mut cr_summary = Vec::new();
    for i in 0..n_strategies {
        for j in (i + 1)..n_strategies {
            let values: Vec<f64> = pairwise_cr
                .iter()
                .filter(|r| {
                    r.strategy_a == results[i].strategy && r.strategy_b == results[j].strategy
                })
                .map(|r| r.cr)
                .collect();
            if let Some(summary) = five_number_summary(&values) {
                cr_summary.push(PairCrSummary {
                    strategy_a: results[i].strategy,
                    strategy_b: results[j].strategy,
                    summary,
                });
            }
        }
    }
    let mut f_summary = Vec::new();
    for i in 0..n_strategies {
        for j in 0..n_strategies {
            if i == j {
                continue;
            }
            let values: Vec<f64> = cluster_f
                .iter()
                .filter(|r| {
                    r.apriori_strategy == results[i].strategy
                        && r.reached_strategy == results[j].strategy
                })
                .map(|r| r.f)
                .collect();
            if let Some(summary) = five_number_summary(&values) {
                f_summary.push(PairFSummary {
                    apriori_strategy: results[i].strategy,
                    reached_strategy: results[j].strategy,
                    summary,
                });
            }
        }
    }

    Ok(ReportBundle {
        periods,
        strategies: results.iter().map(|r| r.strategy).collect(),
        pairwise_cr,
        cluster_f,
        overall_f,
        cr_summary,
        f_summary,
    })
}

/// Convenience wrapper over [`compare_strategies`] for freshly computed
/// strategy outcomes.
pub fn compare_outcomes(outcomes: &[StrategyOutcome]) -> Result<ReportBundle, ReportError> {
    let partitions: Vec<StrategyPartitions> =
        outcomes.iter().map(StrategyPartitions::from).collect();
    compare_strategies(&partitions)
}
