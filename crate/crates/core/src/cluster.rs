//! Dynamic clustering of numeric profiles.
//!
//! The optimizer alternates two phases until the assignment stabilizes:
//!
//! * **allocation** — every point moves to its nearest prototype under squared
//!   Euclidean distance, ties broken toward the lowest cluster index;
//! * **representation** — every cluster's prototype is recomputed as the mean
//!   of its members; a cluster that lost all members keeps its previous
//!   prototype and is flagged, so cluster identities stay stable.
//!
//! [`run`] drives one optimization from a given initialization; [`best_of`]
//! repeats it from seeded random starts and keeps the lowest-inertia result.
//! All randomness flows through explicitly seeded ChaCha streams, so identical
//! inputs, configuration, and seed reproduce identical results bit for bit,
//! even though the restarts execute in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance used throughout the optimizer. There is deliberately no other
/// option; the constant exists so manifests can record it.
pub const DISTANCE: &str = "euclidean";

/// Errors raised by clustering operations.
#[derive(Debug, Error)]
pub enum ClusterError {
    /// `k` must be at least 1.
    #[error("number of clusters must be at least 1")]
    ZeroK,
    /// Prototype set was constructed from an empty vector list.
    #[error("cannot build prototypes from an empty vector list")]
    EmptyPrototypes,
    /// A vector's dimensionality disagrees with the first vector's.
    #[error("vector {index} has {found} components, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    /// A coordinate was NaN or infinite.
    #[error("vector {index} contains a non-finite coordinate")]
    NonFinite { index: usize },
    /// Fewer points than requested initial prototypes.
    #[error("{n_points} points are too few to draw {k} distinct initial prototypes")]
    TooFewPoints { n_points: usize, k: usize },
    /// Item ids and points must be parallel slices.
    #[error("{n_ids} item ids given for {n_points} points")]
    IdPointMismatch { n_ids: usize, n_points: usize },
    /// Item ids must be unique within a partition.
    #[error("duplicate item id {id}")]
    DuplicateId { id: u64 },
    /// An assignment label is out of range.
    #[error("assignment refers to cluster {label} but only {n_clusters} clusters exist")]
    LabelOutOfRange { label: usize, n_clusters: usize },
    /// Inertia must be a finite non-negative number.
    #[error("inertia must be finite and non-negative, got {value}")]
    InvalidInertia { value: f64 },
}

/// Rule deciding when the alternating optimization stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceRule {
    /// Stop when one more allocation pass changes no assignment.
    StableAssignments,
}

/// Settings for a multi-start clustering optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Number of clusters.
    pub k: usize,
    /// Upper bound on optimization iterations per run.
    pub max_iterations: usize,
    /// Number of seeded random restarts explored by [`best_of`].
    pub n_initializations: usize,
    /// Root seed for all randomness.
    pub seed: u64,
    /// Stopping rule.
    pub convergence: ConvergenceRule,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k: 10,
            max_iterations: 100,
            n_initializations: 100,
            seed: 42,
            convergence: ConvergenceRule::StableAssignments,
        }
    }
}

impl ClusteringConfig {
    /// Replaces the cluster count.
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    /// Replaces the iteration cap.
    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Replaces the restart count.
    pub fn with_n_initializations(mut self, n_initializations: usize) -> Self {
        self.n_initializations = n_initializations;
        self
    }

    /// Replaces the root seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// An ordered set of cluster prototypes of equal dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    vectors: Vec<Vec<f64>>,
}

impl Prototypes {
    /// Builds a prototype set, validating shape and finiteness.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, ClusterError> {
        if vectors.is_empty() {
            return Err(ClusterError::EmptyPrototypes);
        }
        let dim = vectors[0].len();
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(ClusterError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ClusterError::NonFinite { index });
            }
        }
        Ok(Prototypes { vectors })
    }

    /// Number of prototypes.
    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    /// Dimensionality of every prototype.
    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// All prototype vectors, in cluster order.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// A hard assignment of items to clusters, with its inertia.
///
/// Cluster labels run from `0` to `n_clusters - 1`; clusters may be empty
/// (their size is simply zero), which keeps label identities stable across
/// restrictions and carried prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    item_ids: Vec<u64>,
    assignment: Vec<usize>,
    n_clusters: usize,
    cluster_sizes: Vec<usize>,
    inertia: f64,
}

impl Partition {
    /// Builds a partition, validating ids, labels, and inertia.
    pub fn new(
        item_ids: Vec<u64>,
        assignment: Vec<usize>,
        n_clusters: usize,
        inertia: f64,
    ) -> Result<Self, ClusterError> {
        if n_clusters == 0 {
            return Err(ClusterError::ZeroK);
        }
        if item_ids.len() != assignment.len() {
            return Err(ClusterError::IdPointMismatch {
                n_ids: item_ids.len(),
                n_points: assignment.len(),
            });
        }
        if !inertia.is_finite() || inertia < 0.0 {
            return Err(ClusterError::InvalidInertia { value: inertia });
        }
        let mut seen = std::collections::HashSet::with_capacity(item_ids.len());
        for &id in &item_ids {
            if !seen.insert(id) {
                return Err(ClusterError::DuplicateId { id });
            }
        }
        let mut cluster_sizes = vec![0usize; n_clusters];
        for &label in &assignment {
            if label >= n_clusters {
                return Err(ClusterError::LabelOutOfRange { label, n_clusters });
            }
            cluster_sizes[label] += 1;
        }
        Ok(Partition {
            item_ids,
            assignment,
            n_clusters,
            cluster_sizes,
            inertia,
        })
    }

    /// Item ids, parallel to [`Partition::assignment`].
    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    /// Cluster label per item.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Number of clusters, including empty ones.
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Member count per cluster.
    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Sum of squared distances from each item to its prototype.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    /// Number of items.
    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    /// True when the partition holds no items.
    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    /// Labels of clusters that currently have no members.
    pub fn empty_clusters(&self) -> Vec<usize> {
        self.cluster_sizes
            .iter()
            .enumerate()
            .filter(|(_, &size)| size == 0)
            .map(|(label, _)| label)
            .collect()
    }
}

/// Output of the representation phase.
#[derive(Debug, Clone)]
pub struct Represented {
    /// Updated prototypes, one per cluster.
    pub prototypes: Prototypes,
    /// Clusters that had no members and therefore kept their previous
    /// prototype.
    pub empty_clusters: Vec<usize>,
}

/// How a single optimization run is initialized.
#[derive(Debug, Clone, Copy)]
pub enum Init<'a> {
    /// Draw `k` distinct data points (sampled without replacement) as the
    /// initial prototypes, using the given seed.
    Random { seed: u64 },
    /// Start from existing prototypes, e.g. carried over from an earlier
    /// sub-period.
    FromPrototypes(&'a Prototypes),
}

/// Result of one converged (or iteration-capped) optimization run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Final assignment.
    pub partition: Partition,
    /// Final prototypes.
    pub prototypes: Prototypes,
    /// Number of optimization iterations performed (allocation/representation
    /// rounds after the initial allocation).
    pub iterations: usize,
    /// Inertia after the initial allocation and after every iteration;
    /// non-increasing within floating-point tolerance.
    pub inertia_trace: Vec<f64>,
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn validate_points(points: &[Vec<f64>], dim: usize) -> Result<(), ClusterError> {
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(ClusterError::NonFinite { index });
        }
    }
    Ok(())
}

/// Allocation phase: assigns every point to its nearest prototype.
///
/// Ties go to the lowest cluster index. Returns the resulting partition with
/// its allocation inertia.
pub fn allocate(
    item_ids: &[u64],
    points: &[Vec<f64>],
    prototypes: &Prototypes,
) -> Result<Partition, ClusterError> {
    if item_ids.len() != points.len() {
        return Err(ClusterError::IdPointMismatch {
            n_ids: item_ids.len(),
            n_points: points.len(),
        });
    }
    validate_points(points, prototypes.dim())?;
    let mut assignment = Vec::with_capacity(points.len());
    let mut inertia = 0.0;
    for point in points {
        let mut best_label = 0usize;
        let mut best_distance = f64::INFINITY;
        for (label, proto) in prototypes.vectors().iter().enumerate() {
            let d = squared_distance(point, proto);
            if d < best_distance {
                best_distance = d;
                best_label = label;
            }
        }
        assignment.push(best_label);
        inertia += best_distance;
    }
    Partition::new(item_ids.to_vec(), assignment, prototypes.k(), inertia)
}

/// Representation phase: recomputes each prototype as its cluster mean.
///
/// A cluster with no members keeps its prototype from `previous` and is
/// reported in [`Represented::empty_clusters`].
pub fn represent(
    points: &[Vec<f64>],
    partition: &Partition,
    previous: &Prototypes,
) -> Result<Represented, ClusterError> {
    if points.len() != partition.len() {
        return Err(ClusterError::IdPointMismatch {
            n_ids: partition.len(),
            n_points: points.len(),
        });
    }
    validate_points(points, previous.dim())?;
    if partition.n_clusters() != previous.k() {
        return Err(ClusterError::LabelOutOfRange {
            label: partition.n_clusters() - 1,
            n_clusters: previous.k(),
        });
    }
    let k = previous.k();
    let dim = previous.dim();
    let mut sums = vec![vec![0.0f64; dim]; k];
    for (point, &label) in points.iter().zip(partition.assignment()) {
        let sum = &mut sums[label];
        for (s, x) in sum.iter_mut().zip(point.iter()) {
            *s += x;
        }
    }
    let mut empty_clusters = Vec::new();
    let mut vectors = Vec::with_capacity(k);
    for (label, sum) in sums.into_iter().enumerate() {
        let size = partition.cluster_sizes()[label];
        if size == 0 {
            empty_clusters.push(label);
            vectors.push(previous.vectors()[label].clone());
        } else {
            let inv = 1.0 / size as f64;
            vectors.push(sum.into_iter().map(|s| s * inv).collect());
        }
    }
    Ok(Represented {
        prototypes: Prototypes::new(vectors)?,
        empty_clusters,
    })
}

/// Draws `k` distinct data points (without replacement) as initial prototypes.
fn random_prototypes(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Prototypes, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints {
            n_points: points.len(),
            k,
        });
    }
    let chosen = rand::seq::index::sample(rng, points.len(), k);
    Prototypes::new(chosen.iter().map(|i| points[i].clone()).collect())
}

/// Runs one optimization to convergence (stable assignments) or until the
/// iteration cap.
///
/// The run is fully deterministic given its inputs; `Init::Random` draws the
/// starting prototypes from a dedicated ChaCha stream seeded by the given
/// seed.
pub fn run(
    item_ids: &[u64],
    points: &[Vec<f64>],
    k: usize,
    max_iterations: usize,
    init: Init<'_>,
) -> Result<RunOutcome, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    let prototypes = match init {
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_prototypes(points, k, &mut rng)?
        }
        Init::FromPrototypes(p) => {
            if p.k() != k {
                return Err(ClusterError::LabelOutOfRange {
                    label: k - 1,
                    n_clusters: p.k(),
                });
            }
            p.clone()
        }
    };
    run_from(item_ids, points, prototypes, max_iterations)
}

fn run_from(
    item_ids: &[u64],
    points: &[Vec<f64>],
    mut prototypes: Prototypes,
    max_iterations: usize,
) -> Result<RunOutcome, ClusterError> {
    let mut partition = allocate(item_ids, points, &prototypes)?;
    let mut inertia_trace = vec![partition.inertia()];
    let mut iterations = 0usize;
    while iterations < max_iterations {
        let represented = represent(points, &partition, &prototypes)?;
        let next = allocate(item_ids, points, &represented.prototypes)?;
        prototypes = represented.prototypes;
        iterations += 1;
        inertia_trace.push(next.inertia());
        let stable = next.assignment() == partition.assignment();
        partition = next;
        if stable {
            break;
        }
    }
    Ok(RunOutcome {
        partition,
        prototypes,
        iterations,
        inertia_trace,
    })
}

/// Multi-start optimization: runs `n_initializations` seeded random starts
/// and returns the run with the lowest final inertia.
///
/// Run `i` draws its start from ChaCha stream `i` of `config.seed`, restarts
/// execute in parallel, and ties on inertia resolve to the lowest run index,
/// so the result does not depend on thread scheduling.
pub fn best_of(
    item_ids: &[u64],
    points: &[Vec<f64>],
    config: &ClusteringConfig,
) -> Result<RunOutcome, ClusterError> {
    if config.n_initializations == 0 {
        return Err(ClusterError::EmptyPrototypes);
    }
    let outcomes: Vec<RunOutcome> = (0..config.n_initializations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let start = random_prototypes(points, config.k, &mut rng)?;
            run_from(item_ids, points, start, config.max_iterations)
        })
        .collect::<Result<_, _>>()?;
    let best_index = outcomes
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.partition
                .inertia()
                .partial_cmp(&b.partition.inertia())
                .expect("inertia is always finite")
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("at least one initialization");
    Ok(outcomes
        .into_iter()
        .nth(best_index)
        .expect("index in range"))
}

/// Convenience seed derivation used by temporal strategies: sub-period `p`
/// uses `seed + p` (wrapping), so a single-sub-period dataset reproduces the
/// root-seed optimization exactly.
pub fn period_seed(seed: u64, period_index: usize) -> u64 {
    seed.wrapping_add(period_index as u64)
}
