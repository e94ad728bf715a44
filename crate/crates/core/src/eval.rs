//! External comparison of two partitions over the same items.
//!
//! Both indices are computed from the contingency table of an *a priori*
//! partition (rows) against a *reached* partition (columns):
//!
//! * **F-measure** — for row cluster `i` and column cluster `j`, recall is
//!   `n_ij / n_i`, precision is `n_ij / n_.j`, and `F(i, j)` is their harmonic
//!   mean (0 when `n_ij = 0`). Each non-empty row keeps its best column match,
//!   and the overall score is the size-weighted mean of those best values.
//!   The measure is asymmetric: swapping the roles changes the result.
//! * **Corrected Rand** — the pair-counting agreement index corrected for
//!   chance, built from binomial pair counts of the table, its margins, and
//!   the total. It is symmetric, 1 for identical partitions, and close to 0
//!   for unrelated ones; values below roughly 0.05 indicate agreement at
//!   chance level.
//!
//! [`cr_pair_counting_oracle`] recomputes the corrected index by brute force
//! over all item pairs, taking an algebraic route that shares nothing with
//! [`corrected_rand`]; it exists so tests can cross-check the closed form.

use std::collections::HashMap;

use thiserror::Error;

use crate::cluster::Partition;

/// Largest item count accepted by the brute-force oracle (quadratic cost).
pub const ORACLE_MAX_ITEMS: usize = 5000;

/// Errors raised when comparing partitions.
#[derive(Debug, Error)]
pub enum EvalError {
    /// The two partitions must cover exactly the same items.
    #[error(
        "partitions cover different item sets ({n_left} vs {n_right} items; e.g. {examples:?})"
    )]
    ItemSetMismatch {
        n_left: usize,
        n_right: usize,
        examples: Vec<u64>,
    },
    /// At least two items are required for pair-based indices.
    #[error("at least 2 items are required, got {n}")]
    TooFewItems { n: usize },
    /// A partition with no items cannot be compared.
    #[error("cannot compare empty partitions")]
    EmptyPartition,
    /// Chance correction is undefined: both partitions are trivial (all one
    /// cluster, or all singletons) yet not identical.
    #[error("corrected Rand is degenerate for these partitions")]
    Degenerate,
    /// The brute-force oracle refuses large inputs.
    #[error("pair-counting oracle is limited to {max} items, got {n}")]
    OracleScale { n: usize, max: usize },
}

/// Cross-tabulation of two partitions of the same items.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sizes: Vec<u64>,
    col_sizes: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    /// Joint count of items in row cluster `i` and column cluster `j`.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    /// Row cluster sizes (a priori partition).
    pub fn row_sizes(&self) -> &[u64] {
        &self.row_sizes
    }

    /// Column cluster sizes (reached partition).
    pub fn col_sizes(&self) -> &[u64] {
        &self.col_sizes
    }

    /// Number of row clusters, including empty ones.
    pub fn n_rows(&self) -> usize {
        self.row_sizes.len()
    }

    /// Number of column clusters, including empty ones.
    pub fn n_cols(&self) -> usize {
        self.col_sizes.len()
    }

    /// Total number of items.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// True when rows and columns are in one-to-one correspondence, i.e. the
    /// two partitions are identical up to relabeling.
    pub fn is_identity(&self) -> bool {
        self.counts
            .iter()
            .zip(&self.row_sizes)
            .all(|(row, &size)| size == 0 || row.iter().filter(|&&c| c > 0).count() == 1)
            && (0..self.n_cols()).all(|j| {
                self.col_sizes[j] == 0 || self.counts.iter().filter(|row| row[j] > 0).count() == 1
            })
    }
}

/// Best column match of one row cluster, with its F value.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMatch {
    /// Row (a priori) cluster label.
    pub cluster: usize,
    /// Row cluster size.
    pub size: u64,
    /// Column (reached) cluster label achieving the best F value.
    pub best_match: usize,
    /// Harmonic mean of precision and recall for that match.
    pub f: f64,
}

/// F-measure of a reached partition against an a priori partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FMeasure {
    /// Size-weighted mean of the per-cluster best F values.
    pub overall: f64,
    /// Best match per non-empty a priori cluster, in label order.
    pub per_cluster: Vec<ClusterMatch>,
}

/// Builds the contingency table of `apriori` (rows) against `reached`
/// (columns). Fails unless both partitions cover exactly the same item ids.
pub fn contingency(
    apriori: &Partition,
    reached: &Partition,
) -> Result<ContingencyTable, EvalError> {
    if apriori.is_empty() || reached.is_empty() {
        return Err(EvalError::EmptyPartition);
    }
    let left: HashMap<u64, usize> = apriori
        .item_ids()
        .iter()
        .copied()
        .zip(apriori.assignment().iter().copied())
        .collect();
    let mut missing: Vec<u64> = Vec::new();
    let mut counts = vec![vec![0u64; reached.n_clusters()]; apriori.n_clusters()];
    let mut matched = 0usize;
    for (&id, &col) in reached.item_ids().iter().zip(reached.assignment().iter()) {
        match left.get(&id) {
            Some(&row) => {
                counts[row][col] += 1;
                matched += 1;
            }
            None => missing.push(id),
        }
    }
    if !missing.is_empty() || matched != apriori.len() {
        if missing.is_empty() {
            // Items of the a priori partition absent from the reached one.
            let right: std::collections::HashSet<u64> =
                reached.item_ids().iter().copied().collect();
            missing = apriori
                .item_ids()
                .iter()
                .copied()
                .filter(|id| !right.contains(id))
                .collect();
        }
        missing.sort_unstable();
        missing.truncate(5);
        return Err(EvalError::ItemSetMismatch {
            n_left: apriori.len(),
            n_right: reached.len(),
            examples: missing,
        });
    }
    let row_sizes: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
    let col_sizes: Vec<u64> = (0..reached.n_clusters())
        .map(|j| counts.iter().map(|row| row[j]).sum())
        .collect();
    Ok(ContingencyTable {
        counts,
        row_sizes,
        col_sizes,
        n: apriori.len() as u64,
    })
}

/// F-measure of `reached` evaluated against the a priori partition `apriori`.
///
/// Only non-empty a priori clusters appear in the per-cluster list; an empty
/// cluster is absent from the partition's content and carries zero weight.
pub fn f_measure(apriori: &Partition, reached: &Partition) -> Result<FMeasure, EvalError> {
    let table = contingency(apriori, reached)?;
    Ok(f_measure_from_table(&table))
}

/// F-measure computed from an existing contingency table.
pub fn f_measure_from_table(table: &ContingencyTable) -> FMeasure {
    let n = table.n() as f64;
    let mut per_cluster = Vec::new();
    let mut weighted = 0.0;
    for i in 0..table.n_rows() {
        let row_size = table.row_sizes()[i];
        if row_size == 0 {
            continue;
        }
        let mut best = 0.0f64;
        let mut best_match = 0usize;
        for j in 0..table.n_cols() {
            let joint = table.count(i, j);
            if joint == 0 {
                continue;
            }
            let recall = joint as f64 / row_size as f64;
            let precision = joint as f64 / table.col_sizes()[j] as f64;
            let f = 2.0 * precision * recall / (precision + recall);
            if f > best {
                best = f;
                best_match = j;
            }
        }
        weighted += row_size as f64 * best;
        per_cluster.push(ClusterMatch {
            cluster: i,
            size: row_size,
            best_match,
            f: best,
        });
    }
    FMeasure {
        overall: weighted / n,
        per_cluster,
    }
}

fn pairs(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Corrected Rand index between two partitions (symmetric in its arguments).
///
/// Both trivial cases — two single-cluster partitions, or two all-singleton
/// partitions — leave the chance correction undefined; they are identical
/// partitions, so the index is defined as 1. A degenerate denominator with
/// non-identical partitions is reported as an error.
pub fn corrected_rand(a: &Partition, b: &Partition) -> Result<f64, EvalError> {
    let table = contingency(a, b)?;
    corrected_rand_from_table(&table)
}

/// Corrected Rand index computed from an existing contingency table.
pub fn corrected_rand_from_table(table: &ContingencyTable) -> Result<f64, EvalError> {
    let n = table.n();
    if n < 2 {
        return Err(EvalError::TooFewItems { n: n as usize });
    }
    let joint: f64 = (0..table.n_rows())
        .map(|i| {
            (0..table.n_cols())
                .map(|j| pairs(table.count(i, j)))
                .sum::<f64>()
        })
        .sum();
    let rows: f64 = table.row_sizes().iter().map(|&s| pairs(s)).sum();
    let cols: f64 = table.col_sizes().iter().map(|&s| pairs(s)).sum();
    let total = pairs(n);
    let expected = rows * cols / total;
    let numerator = joint - expected;
    let denominator = 0.5 * (rows + cols) - expected;
    if denominator == 0.0 {
        if table.is_identity() {
            return Ok(1.0);
        }
        return Err(EvalError::Degenerate);
    }
    Ok(numerator / denominator)
}

/// Brute-force corrected Rand over all `n (n - 1) / 2` item pairs.
///
/// Counts, for every unordered pair of items, whether the pair shares a
/// cluster in each partition, then applies the pair-count form
/// `2 (ad - bc) / ((a + b)(b + d) + (a + c)(c + d))`. Deliberately
/// independent of the contingency-table computation; quadratic, so limited
/// to [`ORACLE_MAX_ITEMS`] items.
pub fn cr_pair_counting_oracle(a: &Partition, b: &Partition) -> Result<f64, EvalError> {
    let n = a.len();
    if n > ORACLE_MAX_ITEMS {
        return Err(EvalError::OracleScale {
            n,
            max: ORACLE_MAX_ITEMS,
        });
    }
    if n < 2 {
        return Err(EvalError::TooFewItems { n });
    }
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyPartition);
    }
    let by_id: HashMap<u64, usize> = b
        .item_ids()
        .iter()
        .copied()
        .zip(b.assignment().iter().copied())
        .collect();
    let mut labels = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (&id, &la) in a.item_ids().iter().zip(a.assignment().iter()) {
        match by_id.get(&id) {
            Some(&lb) => labels.push((la, lb)),
            None => missing.push(id),
        }
    }
    if !missing.is_empty() || b.len() != n {
        missing.sort_unstable();
        missing.truncate(5);
        return Err(EvalError::ItemSetMismatch {
            n_left: n,
            n_right: b.len(),
            examples: missing,
        });
    }
    let mut together_both = 0u64; // a
    let mut together_left = 0u64; // b
    let mut together_right = 0u64; // c
    let mut apart_both = 0u64; // d
    for i in 0..n {
        for j in (i + 1)..n {
            let same_a = labels[i].0 == labels[j].0;
            let same_b = labels[i].1 == labels[j].1;
            match (same_a, same_b) {
                (true, true) => together_both += 1,
                (true, false) => together_left += 1,
                (false, true) => together_right += 1,
                (false, false) => apart_both += 1,
            }
        }
    }
    let (a2, b2, c2, d2) = (
        together_both as f64,
        together_left as f64,
        together_right as f64,
        apart_both as f64,
    );
    let numerator = 2.0 * (a2 * d2 - b2 * c2);
    let denominator = (a2 + b2) * (b2 + d2) + (a2 + c2) * (c2 + d2);
    if denominator == 0.0 {
        // Both partitions trivial; identical means all pairs agree.
        if together_left == 0 && together_right == 0 {
            return Ok(1.0);
        }
        return Err(EvalError::Degenerate);
    }
    Ok(numerator / denominator)
}
