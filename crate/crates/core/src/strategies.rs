//! Temporal clustering strategies.
//!
//! A feature table split into chronological sub-periods can be clustered in
//! four ways that differ in how much information flows across time:
//!
//! * **global** — one clustering of all sub-periods pooled, then restricted
//!   to each sub-period (labels kept, so every sub-period is described in the
//!   same frame of reference);
//! * **independent** — each sub-period clustered from scratch with fresh
//!   multi-start initializations (local view, no memory);
//! * **previous** — the first sub-period is clustered from scratch; each
//!   later sub-period is assigned in a single allocation pass against the
//!   prototypes carried from the period before, after which the prototypes
//!   are recomputed as the new cluster means and carried onward;
//! * **dependent** — like previous, but each later sub-period runs the full
//!   alternating optimization to convergence, seeded by the carried
//!   prototypes (a single initialization, no restarts).
//!
//! In previous and dependent runs, cluster index `c` in one sub-period is the
//! continuation of cluster index `c` in the one before, which is what makes
//! cross-period comparisons by cluster meaningful.
//!
//! Sub-period `p` (0-based) derives its seed as `seed + p`, so a dataset with
//! a single sub-period produces byte-identical partitions under all four
//! strategies.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{
    allocate, best_of, period_seed, represent, run, squared_distance, ClusterError,
    ClusteringConfig, Init, Partition, Prototypes,
};
use crate::features::FeatureVector;

/// Errors raised while assembling temporal datasets or running strategies.
#[derive(Debug, Error)]
pub enum StrategyError {
    /// A temporal dataset needs at least one sub-period.
    #[error("temporal dataset needs at least one sub-period")]
    EmptyDataset,
    /// Every sub-period must contain at least one navigation.
    #[error("sub-period {label:?} has no points")]
    EmptySubPeriod { label: String },
    /// Sub-period labels must be strictly increasing (chronological).
    #[error("sub-period labels must be strictly increasing: {previous:?} then {next:?}")]
    UnorderedLabels { previous: String, next: String },
    /// Navigation identifiers must be unique across the whole dataset.
    #[error("navigation id {id} appears more than once")]
    DuplicateId { id: u64 },
    /// Each sub-period must pair ids with points one-to-one.
    #[error("sub-period {label:?} has {n_ids} ids but {n_points} points")]
    IdPointMismatch {
        label: String,
        n_ids: usize,
        n_points: usize,
    },
    /// All points must share one dimensionality.
    #[error("sub-period {label:?} has a {found}-dimensional point, expected {expected}")]
    DimensionMismatch {
        label: String,
        expected: usize,
        found: usize,
    },
    /// A sub-period that is clustered from scratch needs at least `k` points.
    #[error("sub-period {label:?} has {n_points} navigations, fewer than k = {k}")]
    UndersizedSubPeriod {
        label: String,
        n_points: usize,
        k: usize,
    },
    /// Error from the underlying clustering engine.
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// One sub-period's share of the feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodData {
    /// Chronologically sortable label, e.g. `2002-07`.
    pub label: String,
    /// Navigation identifiers, aligned with `points`.
    pub ids: Vec<u64>,
    /// Feature vectors, aligned with `ids`.
    pub points: Vec<Vec<f64>>,
}

/// A feature table split into chronologically ordered sub-periods.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalDataset {
    periods: Vec<PeriodData>,
    dim: usize,
}

impl TemporalDataset {
    /// Validates and wraps sub-period data.
    ///
    /// Labels must be strictly increasing, ids globally unique, and all
    /// points of one dimensionality.
    pub fn new(periods: Vec<PeriodData>) -> Result<Self, StrategyError> {
        if periods.is_empty() {
            return Err(StrategyError::EmptyDataset);
        }
        let mut dim: Option<usize> = None;
        let mut seen_ids: HashSet<u64> = HashSet::new();
        for (index, period) in periods.iter().enumerate() {
            if period.points.is_empty() {
                return Err(StrategyError::EmptySubPeriod {
                    label: period.label.clone(),
                });
            }
            if period.ids.len() != period.points.len() {
                return Err(StrategyError::IdPointMismatch {
                    label: period.label.clone(),
                    n_ids: period.ids.len(),
                    n_points: period.points.len(),
                });
            }
            if index > 0 && periods[index - 1].label >= period.label {
                return Err(StrategyError::UnorderedLabels {
                    previous: periods[index - 1].label.clone(),
                    next: period.label.clone(),
                });
            }
            for point in &period.points {
                let expected = *dim.get_or_insert(point.len());
                if point.len() != expected {
                    return Err(StrategyError::DimensionMismatch {
                        label: period.label.clone(),
                        expected,
                        found: point.len(),
                    });
                }
            }
            for &id in &period.ids {
                if !seen_ids.insert(id) {
                    return Err(StrategyError::DuplicateId { id });
                }
            }
        }
        Ok(TemporalDataset {
            dim: dim.expect("at least one non-empty period"),
            periods,
        })
    }

    /// Groups standardized feature rows by sub-period label (sorted, which is
    /// chronological for the label formats used here). Rows keep their input
    /// order within each sub-period.
    pub fn from_feature_vectors(records: &[FeatureVector]) -> Result<Self, StrategyError> {
        let mut groups: BTreeMap<&str, (Vec<u64>, Vec<Vec<f64>>)> = BTreeMap::new();
        for record in records {
            let (ids, points) = groups.entry(record.sub_period.as_str()).or_default();
            ids.push(record.nav_id);
            points.push(record.to_point());
        }
        TemporalDataset::new(
            groups
                .into_iter()
                .map(|(label, (ids, points))| PeriodData {
                    label: label.to_string(),
                    ids,
                    points,
                })
                .collect(),
        )
    }

    /// The sub-periods, in chronological order.
    pub fn periods(&self) -> &[PeriodData] {
        &self.periods
    }

    /// Shared dimensionality of all points.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of navigations across sub-periods.
    pub fn n_points(&self) -> usize {
        self.periods.iter().map(|p| p.points.len()).sum()
    }

    /// Sub-period labels, in order.
    pub fn labels(&self) -> Vec<String> {
        self.periods.iter().map(|p| p.label.clone()).collect()
    }

    /// All ids and points concatenated in sub-period order.
    fn pooled(&self) -> (Vec<u64>, Vec<Vec<f64>>) {
        let total = self.n_points();
        let mut ids = Vec::with_capacity(total);
        let mut points = Vec::with_capacity(total);
        for period in &self.periods {
            ids.extend_from_slice(&period.ids);
            points.extend_from_slice(&period.points);
        }
        (ids, points)
    }
}

/// The four temporal clustering strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// One pooled clustering restricted to each sub-period.
    Global,
    /// Independent local clustering per sub-period.
    Independent,
    /// Single allocation against carried prototypes per sub-period.
    Previous,
    /// Full re-convergence from carried prototypes per sub-period.
    Dependent,
}

/// All strategies, in canonical order.
pub const ALL_STRATEGIES: [StrategyKind; 4] = [
    StrategyKind::Global,
    StrategyKind::Independent,
    StrategyKind::Previous,
    StrategyKind::Dependent,
];

impl StrategyKind {
    /// Stable lowercase name, as used on the command line and in file names.
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Global => "global",
            StrategyKind::Independent => "independent",
            StrategyKind::Previous => "previous",
            StrategyKind::Dependent => "dependent",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(StrategyKind::Global),
            "independent" => Ok(StrategyKind::Independent),
            "previous" => Ok(StrategyKind::Previous),
            "dependent" => Ok(StrategyKind::Dependent),
            other => Err(format!(
                "unknown strategy {other:?} (expected global, independent, previous, or dependent)"
            )),
        }
    }
}

/// Which prototypes the previous strategy hands to the next sub-period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarryMode {
    /// Carry the means recomputed after each sub-period's allocation
    /// (default): each partition shapes the next period's reference.
    #[default]
    Recompute,
    /// Keep the first sub-period's prototypes as the reference for every
    /// later sub-period.
    FreezeFirst,
}

impl CarryMode {
    /// Stable lowercase name.
    pub fn as_str(self) -> &'static str {
        match self {
            CarryMode::Recompute => "recompute",
            CarryMode::FreezeFirst => "freeze_first",
        }
    }
}

impl std::str::FromStr for CarryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recompute" => Ok(CarryMode::Recompute),
            "freeze_first" | "freeze-first" => Ok(CarryMode::FreezeFirst),
            other => Err(format!(
                "unknown carry mode {other:?} (expected recompute or freeze_first)"
            )),
        }
    }
}

/// One sub-period's clustering under some strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodOutcome {
    /// Sub-period label.
    pub label: String,
    /// Cluster membership of the sub-period's navigations. The partition's
    /// inertia is measured against the prototypes that produced the
    /// assignment (for the previous strategy: the carried reference).
    pub partition: Partition,
    /// Prototypes describing the reached clusters: converged prototypes for
    /// optimized periods, recomputed means for allocation-only periods, the
    /// shared pooled prototypes for the global strategy.
    pub prototypes: Prototypes,
    /// Optimization iterations spent inside this sub-period; 0 when the
    /// partition came from a single allocation pass.
    pub iterations: usize,
}

/// A strategy's partitions for every sub-period, in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    /// Which strategy produced the partitions.
    pub strategy: StrategyKind,
    /// One outcome per sub-period, aligned with the dataset's periods.
    pub periods: Vec<PeriodOutcome>,
}

impl StrategyOutcome {
    /// The outcome for a given sub-period label, if present.
    pub fn period(&self, label: &str) -> Option<&PeriodOutcome> {
        self.periods.iter().find(|p| p.label == label)
    }
}

/// Inertia of a fixed assignment against fixed prototypes.
fn assignment_inertia(points: &[Vec<f64>], assignment: &[usize], prototypes: &Prototypes) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(point, &label)| squared_distance(point, &prototypes.vectors()[label]))
        .sum()
}

fn check_period_size(period: &PeriodData, k: usize) -> Result<(), StrategyError> {
    if period.points.len() < k {
        return Err(StrategyError::UndersizedSubPeriod {
            label: period.label.clone(),
            n_points: period.points.len(),
            k,
        });
    }
    Ok(())
}

/// Global strategy: cluster all sub-periods pooled, then restrict the result
/// to each sub-period keeping the pooled labels and prototypes.
///
/// Concatenating the per-period assignments in order reconstructs the pooled
/// assignment exactly; per-period inertia is measured against the shared
/// pooled prototypes.
pub fn cluster_global(
    dataset: &TemporalDataset,
    config: &ClusteringConfig,
) -> Result<StrategyOutcome, StrategyError> {
    let (ids, points) = dataset.pooled();
    let outcome = best_of(&ids, &points, config)?;
    let label_of: HashMap<u64, usize> = ids
        .iter()
        .zip(outcome.partition.assignment())
        .map(|(&id, &label)| (id, label))
        .collect();
    let mut periods = Vec::with_capacity(dataset.periods().len());
    for period in dataset.periods() {
        let assignment: Vec<usize> = period.ids.iter().map(|id| label_of[id]).collect();
        let inertia = assignment_inertia(&period.points, &assignment, &outcome.prototypes);
        let partition = Partition::new(period.ids.clone(), assignment, config.k, inertia)?;
        periods.push(PeriodOutcome {
            label: period.label.clone(),
            partition,
            prototypes: outcome.prototypes.clone(),
            iterations: outcome.iterations,
        });
    }
    Ok(StrategyOutcome {
        strategy: StrategyKind::Global,
        periods,
    })
}

/// Independent strategy: a fresh multi-start clustering per sub-period, with
/// sub-period `p` seeded by `seed + p`.
pub fn cluster_independent(
    dataset: &TemporalDataset,
    config: &ClusteringConfig,
) -> Result<StrategyOutcome, StrategyError> {
    let mut periods = Vec::with_capacity(dataset.periods().len());
    for (index, period) in dataset.periods().iter().enumerate() {
        check_period_size(period, config.k)?;
        let mut period_config = *config;
        period_config.seed = period_seed(config.seed, index);
        let outcome = best_of(&period.ids, &period.points, &period_config)?;
        periods.push(PeriodOutcome {
            label: period.label.clone(),
            partition: outcome.partition,
            prototypes: outcome.prototypes,
            iterations: outcome.iterations,
        });
    }
    Ok(StrategyOutcome {
        strategy: StrategyKind::Independent,
        periods,
    })
}

/// Previous strategy: the first sub-period is clustered from scratch; each
/// later one gets a single allocation pass against the carried prototypes,
/// then the prototypes are recomputed as the new cluster means.
///
/// `carry` selects what the next sub-period allocates against: the recomputed
/// means (default) or the first sub-period's prototypes unchanged. A cluster
/// left empty by an allocation keeps its reference prototype.
pub fn cluster_previous(
    dataset: &TemporalDataset,
    config: &ClusteringConfig,
    carry: CarryMode,
) -> Result<StrategyOutcome, StrategyError> {
    let first = &dataset.periods()[0];
    check_period_size(first, config.k)?;
    let outcome = best_of(&first.ids, &first.points, config)?;
    let mut carried = outcome.prototypes.clone();
    let mut periods = Vec::with_capacity(dataset.periods().len());
    periods.push(PeriodOutcome {
        label: first.label.clone(),
        partition: outcome.partition,
        prototypes: outcome.prototypes,
        iterations: outcome.iterations,
    });
    for period in &dataset.periods()[1..] {
        let partition = allocate(&period.ids, &period.points, &carried)?;
        let represented = represent(&period.points, &partition, &carried)?;
        periods.push(PeriodOutcome {
            label: period.label.clone(),
            partition,
            prototypes: represented.prototypes.clone(),
            iterations: 0,
        });
        if carry == CarryMode::Recompute {
            carried = represented.prototypes;
        }
    }
    Ok(StrategyOutcome {
        strategy: StrategyKind::Previous,
        periods,
    })
}

/// Dependent strategy: the first sub-period is clustered from scratch; each
/// later one runs the alternating optimization to convergence starting from
/// the carried prototypes (one initialization, no restarts), and its
/// converged prototypes are carried onward.
pub fn cluster_dependent(
    dataset: &TemporalDataset,
    config: &ClusteringConfig,
) -> Result<StrategyOutcome, StrategyError> {
    let first = &dataset.periods()[0];
    check_period_size(first, config.k)?;
    let outcome = best_of(&first.ids, &first.points, config)?;
    let mut carried = outcome.prototypes.clone();
    let mut periods = Vec::with_capacity(dataset.periods().len());
    periods.push(PeriodOutcome {
        label: first.label.clone(),
        partition: outcome.partition,
        prototypes: outcome.prototypes,
        iterations: outcome.iterations,
    });
    for period in &dataset.periods()[1..] {
        let outcome = run(
            &period.ids,
            &period.points,
            config.k,
            config.max_iterations,
            Init::FromPrototypes(&carried),
        )?;
        carried = outcome.prototypes.clone();
        periods.push(PeriodOutcome {
            label: period.label.clone(),
            partition: outcome.partition,
            prototypes: outcome.prototypes,
            iterations: outcome.iterations,
        });
    }
    Ok(StrategyOutcome {
        strategy: StrategyKind::Dependent,
        periods,
    })
}

/// Runs one strategy. `carry` only affects [`StrategyKind::Previous`].
pub fn run_strategy(
    kind: StrategyKind,
    dataset: &TemporalDataset,
    config: &ClusteringConfig,
    carry: CarryMode,
) -> Result<StrategyOutcome, StrategyError> {
    match kind {
        StrategyKind::Global => cluster_global(dataset, config),
        StrategyKind::Independent => cluster_independent(dataset, config),
        StrategyKind::Previous => cluster_previous(dataset, config, carry),
        StrategyKind::Dependent => cluster_dependent(dataset, config),
    }
}

/// Runs all four strategies in canonical order.
pub fn run_all_strategies(
    dataset: &TemporalDataset,
    config: &ClusteringConfig,
    carry: CarryMode,
) -> Result<Vec<StrategyOutcome>, StrategyError> {
    ALL_STRATEGIES
        .iter()
        .map(|&kind| run_strategy(kind, dataset, config, carry))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution as _, Normal};

    fn period(label: &str, first_id: u64, points: Vec<Vec<f64>>) -> PeriodData {
        PeriodData {
            label: label.to_string(),
            ids: (first_id..first_id + points.len() as u64).collect(),
            points,
        }
    }

    /// Two well-separated 2-D blobs with deterministic jitter.
    fn two_blobs(rng: &mut ChaCha8Rng, n_per_blob: usize, centers: [f64; 2]) -> Vec<Vec<f64>> {
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut points = Vec::with_capacity(2 * n_per_blob);
        for &center in &centers {
            for _ in 0..n_per_blob {
                points.push(vec![center + noise.sample(rng), noise.sample(rng)]);
            }
        }
        points
    }

    fn config(k: usize) -> ClusteringConfig {
        ClusteringConfig::default()
            .with_k(k)
            .with_n_initializations(20)
            .with_seed(42)
    }

    #[test]
    fn dataset_validation_rejects_malformed_input() {
        assert!(matches!(
            TemporalDataset::new(vec![]),
            Err(StrategyError::EmptyDataset)
        ));
        assert!(matches!(
            TemporalDataset::new(vec![period("2002-07", 1, vec![])]),
            Err(StrategyError::EmptySubPeriod { .. })
        ));
        assert!(matches!(
            TemporalDataset::new(vec![
                period("2002-08", 1, vec![vec![0.0]]),
                period("2002-07", 2, vec![vec![0.0]]),
            ]),
            Err(StrategyError::UnorderedLabels { .. })
        ));
        assert!(matches!(
            TemporalDataset::new(vec![
                period("2002-07", 1, vec![vec![0.0]]),
                period("2002-08", 1, vec![vec![1.0]]),
            ]),
            Err(StrategyError::DuplicateId { id: 1 })
        ));
        assert!(matches!(
            TemporalDataset::new(vec![period("2002-07", 1, vec![vec![0.0], vec![0.0, 1.0]],)]),
            Err(StrategyError::DimensionMismatch { .. })
        ));
        let mut broken = period("2002-07", 1, vec![vec![0.0], vec![1.0]]);
        broken.ids.pop();
        assert!(matches!(
            TemporalDataset::new(vec![broken]),
            Err(StrategyError::IdPointMismatch { .. })
        ));
    }

    #[test]
    fn feature_vectors_group_by_label_in_chronological_order() {
        let mut records = Vec::new();
        for (nav_id, sub_period) in [
            (5u64, "2002-08"),
            (1, "2002-07"),
            (6, "2002-08"),
            (2, "2002-07"),
        ] {
            records.push(FeatureVector {
                nav_id,
                sub_period: sub_period.to_string(),
                values: [nav_id as f64; crate::features::N_VARIABLES],
            });
        }
        let dataset = TemporalDataset::from_feature_vectors(&records).unwrap();
        assert_eq!(dataset.labels(), vec!["2002-07", "2002-08"]);
        assert_eq!(dataset.periods()[0].ids, vec![1, 2]);
        assert_eq!(dataset.periods()[1].ids, vec![5, 6]);
        assert_eq!(dataset.dim(), crate::features::N_VARIABLES);
        assert_eq!(dataset.n_points(), 4);
    }

    /// With one sub-period, pooling is the identity, every strategy's first
    /// period uses the same seed, and carried prototypes never come into
    /// play — so all four strategies must agree bit-for-bit.
    #[test]
    fn single_sub_period_makes_all_strategies_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dataset = TemporalDataset::new(vec![period(
            "2002-07",
            1,
            two_blobs(&mut rng, 20, [0.0, 10.0]),
        )])
        .unwrap();
        let outcomes = run_all_strategies(&dataset, &config(2), CarryMode::default()).unwrap();
        let reference = &outcomes[0].periods[0];
        for outcome in &outcomes[1..] {
            assert_eq!(outcome.periods.len(), 1);
            let p = &outcome.periods[0];
            assert_eq!(p.partition.assignment(), reference.partition.assignment());
            assert_eq!(p.partition.inertia(), reference.partition.inertia());
            assert_eq!(p.prototypes, reference.prototypes);
        }
    }

    #[test]
    fn global_restriction_concatenates_back_to_the_pooled_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dataset = TemporalDataset::new(vec![
            period("2002-07", 1, two_blobs(&mut rng, 15, [0.0, 10.0])),
            period("2002-08", 100, two_blobs(&mut rng, 12, [0.5, 9.5])),
        ])
        .unwrap();
        let cfg = config(2);
        let outcome = cluster_global(&dataset, &cfg).unwrap();

        let (ids, points) = (
            dataset
                .periods()
                .iter()
                .flat_map(|p| p.ids.clone())
                .collect::<Vec<_>>(),
            dataset
                .periods()
                .iter()
                .flat_map(|p| p.points.clone())
                .collect::<Vec<_>>(),
        );
        let pooled = best_of(&ids, &points, &cfg).unwrap();

        let concatenated: Vec<usize> = outcome
            .periods
            .iter()
            .flat_map(|p| p.partition.assignment().to_vec())
            .collect();
        assert_eq!(concatenated, pooled.partition.assignment());

        // Both periods carry the shared pooled prototypes.
        assert_eq!(outcome.periods[0].prototypes, pooled.prototypes);
        assert_eq!(outcome.periods[1].prototypes, pooled.prototypes);

        // Per-period inertias sum to the pooled inertia.
        let total: f64 = outcome.periods.iter().map(|p| p.partition.inertia()).sum();
        assert!((total - pooled.partition.inertia()).abs() < 1e-9 * (1.0 + total.abs()));
    }

    #[test]
    fn independent_rejects_sub_periods_smaller_than_k() {
        let dataset = TemporalDataset::new(vec![
            period("2002-07", 1, vec![vec![0.0], vec![1.0], vec![2.0]]),
            period("2002-08", 10, vec![vec![0.0], vec![1.0]]),
        ])
        .unwrap();
        let err = cluster_independent(&dataset, &config(3)).unwrap_err();
        match err {
            StrategyError::UndersizedSubPeriod { label, n_points, k } => {
                assert_eq!(label, "2002-08");
                assert_eq!(n_points, 2);
                assert_eq!(k, 3);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn independent_periods_use_distinct_seeds() {
        // Identical point sets in both periods: fresh initializations mean
        // the optimizations are re-run, not copied; with well-separated
        // blobs both must still find the same two clusters.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points = two_blobs(&mut rng, 10, [0.0, 50.0]);
        let dataset = TemporalDataset::new(vec![
            period("2002-07", 1, points.clone()),
            period("2002-08", 100, points),
        ])
        .unwrap();
        let outcome = cluster_independent(&dataset, &config(2)).unwrap();
        let a = &outcome.periods[0].partition;
        let b = &outcome.periods[1].partition;
        // Same grouping (possibly relabeled): equal inertia either way.
        assert!((a.inertia() - b.inertia()).abs() < 1e-9);
    }

    /// After the first sub-period, the previous strategy is exactly one
    /// allocation against the carried prototypes plus a mean recomputation.
    #[test]
    fn previous_periods_after_the_first_are_single_allocations() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let dataset = TemporalDataset::new(vec![
            period("2002-07", 1, two_blobs(&mut rng, 15, [0.0, 10.0])),
            period("2002-08", 100, two_blobs(&mut rng, 15, [1.0, 11.0])),
        ])
        .unwrap();
        let cfg = config(2);
        let outcome = cluster_previous(&dataset, &cfg, CarryMode::Recompute).unwrap();

        let first = best_of(
            &dataset.periods()[0].ids,
            &dataset.periods()[0].points,
            &cfg,
        )
        .unwrap();
        assert_eq!(
            outcome.periods[0].partition.assignment(),
            first.partition.assignment()
        );

        let second = &dataset.periods()[1];
        let expected = allocate(&second.ids, &second.points, &first.prototypes).unwrap();
        assert_eq!(
            outcome.periods[1].partition.assignment(),
            expected.assignment()
        );
        assert_eq!(outcome.periods[1].partition.inertia(), expected.inertia());
        assert_eq!(outcome.periods[1].iterations, 0);

        let expected_means = represent(&second.points, &expected, &first.prototypes).unwrap();
        assert_eq!(outcome.periods[1].prototypes, expected_means.prototypes);
    }

    /// Hand-built 1-D drift: exact points make every allocation decidable by
    /// hand. Periods: {0, 10} blobs, then {0, 20}, then {0, 7}. Carrying
    /// recomputed means moves the second reference to 20, so a 7 is nearest
    /// the 0-cluster; freezing the first reference at {0, 10} keeps a 7
    /// nearest the 10-cluster.
    #[test]
    fn carry_mode_changes_where_borderline_points_go() {
        let jitter = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let blob = |center: f64| jitter.iter().map(|j| vec![center + j]).collect::<Vec<_>>();
        let two = |a: f64, b: f64| {
            let mut v = blob(a);
            v.extend(blob(b));
            v
        };
        let dataset = TemporalDataset::new(vec![
            period("p1", 0, two(0.0, 10.0)),
            period("p2", 100, two(0.0, 20.0)),
            period("p3", 200, two(0.0, 7.0)),
        ])
        .unwrap();
        let cfg = config(2);

        let recompute = cluster_previous(&dataset, &cfg, CarryMode::Recompute).unwrap();
        let frozen = cluster_previous(&dataset, &cfg, CarryMode::FreezeFirst).unwrap();

        // First two periods agree: the first is shared, and in the second
        // both references put 20-points with the 10-cluster.
        assert_eq!(
            recompute.periods[1].partition.assignment(),
            frozen.periods[1].partition.assignment()
        );

        // Third period: the zero-blob keeps its cluster either way; the
        // 7-blob joins it only when the carried reference moved to 20.
        let rec = recompute.periods[2].partition.assignment();
        let frz = frozen.periods[2].partition.assignment();
        assert_eq!(rec[0], rec[5], "recompute: 7-blob merges with 0-blob");
        assert_ne!(frz[0], frz[5], "freeze_first: 7-blob stays with 10-cluster");
    }

    /// Starting from identical carried prototypes, running to convergence
    /// can only improve on the single allocation pass.
    #[test]
    fn dependent_never_fits_worse_than_previous_from_the_same_carry() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        // Noisy, overlapping blobs so the allocation is not already optimal.
        let noise = Normal::new(0.0, 2.0).unwrap();
        let cloud = |centers: [f64; 3], rng: &mut ChaCha8Rng| {
            let mut points = Vec::new();
            for &c in &centers {
                for _ in 0..25 {
                    points.push(vec![c + noise.sample(rng), noise.sample(rng)]);
                }
            }
            points
        };
        let dataset = TemporalDataset::new(vec![
            period("p1", 0, cloud([0.0, 6.0, 12.0], &mut rng)),
            period("p2", 100, cloud([1.0, 7.0, 13.0], &mut rng)),
        ])
        .unwrap();
        let cfg = config(3);
        let previous = cluster_previous(&dataset, &cfg, CarryMode::Recompute).unwrap();
        let dependent = cluster_dependent(&dataset, &cfg).unwrap();

        // Identical first periods (same best_of call).
        assert_eq!(
            previous.periods[0].partition.assignment(),
            dependent.periods[0].partition.assignment()
        );
        // Both second periods start from the same carried prototypes; the
        // dependent one refines further.
        assert!(
            dependent.periods[1].partition.inertia()
                <= previous.periods[1].partition.inertia() + 1e-9
        );
    }

    /// On a stationary stream, each period described by the previous period's
    /// prototypes must agree with its own optimized partition: consecutive
    /// periods keep telling the same story.
    #[test]
    fn stationary_stream_keeps_consecutive_periods_in_agreement() {
        use crate::eval::corrected_rand;

        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let dataset = TemporalDataset::new(vec![
            period("p1", 0, two_blobs(&mut rng, 40, [0.0, 8.0])),
            period("p2", 100, two_blobs(&mut rng, 40, [0.0, 8.0])),
            period("p3", 200, two_blobs(&mut rng, 40, [0.0, 8.0])),
        ])
        .unwrap();
        let cfg = config(2);
        let previous = cluster_previous(&dataset, &cfg, CarryMode::Recompute).unwrap();
        let dependent = cluster_dependent(&dataset, &cfg).unwrap();
        for t in 1..dataset.periods().len() {
            let cr = corrected_rand(
                &previous.periods[t].partition,
                &dependent.periods[t].partition,
            )
            .unwrap();
            assert!(cr >= 0.9, "period {t}: consecutive-period agreement {cr}");
        }
    }

    #[test]
    fn strategies_are_deterministic_across_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let dataset = TemporalDataset::new(vec![
            period("p1", 0, two_blobs(&mut rng, 12, [0.0, 8.0])),
            period("p2", 100, two_blobs(&mut rng, 12, [1.0, 9.0])),
        ])
        .unwrap();
        let cfg = config(2);
        let a = run_all_strategies(&dataset, &cfg, CarryMode::default()).unwrap();
        let b = run_all_strategies(&dataset, &cfg, CarryMode::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Every strategy yields one outcome per sub-period, labeled and
        /// id-aligned with the dataset, with labels inside 0..k and finite
        /// non-negative inertia.
        #[test]
        fn strategy_outcomes_are_structurally_sound(
            seed in 0u64..1000,
            k in 1usize..4,
            n1 in 6usize..16,
            n2 in 6usize..16,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut make_points = |n: usize| -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| vec![rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)])
                    .collect()
            };
            let dataset = TemporalDataset::new(vec![
                period("p1", 0, make_points(n1)),
                period("p2", 1000, make_points(n2)),
            ]).unwrap();
            let cfg = ClusteringConfig::default()
                .with_k(k)
                .with_n_initializations(4)
                .with_max_iterations(25)
                .with_seed(seed);
            for outcome in run_all_strategies(&dataset, &cfg, CarryMode::default()).unwrap() {
                prop_assert_eq!(outcome.periods.len(), 2);
                for (expected, got) in dataset.periods().iter().zip(&outcome.periods) {
                    prop_assert_eq!(&got.label, &expected.label);
                    prop_assert_eq!(got.partition.item_ids(), expected.ids.as_slice());
                    prop_assert_eq!(got.partition.n_clusters(), k);
                    prop_assert!(got.partition.assignment().iter().all(|&l| l < k));
                    prop_assert!(got.partition.inertia().is_finite());
                    prop_assert!(got.partition.inertia() >= 0.0);
                    prop_assert_eq!(got.prototypes.k(), k);
                    prop_assert_eq!(got.prototypes.dim(), 2);
                }
            }
        }
    }
}
