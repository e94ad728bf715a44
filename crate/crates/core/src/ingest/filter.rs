//! Keeping only navigations that look like genuine browsing.

use super::{IngestError, Navigation};

/// Minimum-activity rules: a navigation is kept only when it has enough
/// requests, lasts long enough, and is not implausibly fast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterRules {
    /// Minimum number of requests (default 10).
    pub min_requests: usize,
    /// Minimum total duration in seconds (default 60).
    pub min_duration_seconds: f64,
    /// Minimum seconds per request (default 4, i.e. at most 15 requests per
    /// minute).
    pub min_seconds_per_request: f64,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            min_requests: 10,
            min_duration_seconds: 60.0,
            min_seconds_per_request: 4.0,
        }
    }
}

/// Applies the minimum-activity rules, preserving order. The output is a
/// subsequence of the input; boundary values (exactly 10 requests, exactly
/// 60 seconds, exactly the ratio) are kept.
pub fn filter_navigations(navigations: Vec<Navigation>, rules: &FilterRules) -> Vec<Navigation> {
    navigations
        .into_iter()
        .filter(|nav| {
            let duration = nav.duration_seconds();
            nav.n_requests() >= rules.min_requests
                && duration >= rules.min_duration_seconds
                && duration / nav.n_requests() as f64 >= rules.min_seconds_per_request
        })
        .collect()
}

/// Empirical quantile by the nearest-rank rule: the smallest value whose rank
/// is at least `quantile * n`.
fn nearest_rank(sorted: &[f64], quantile: f64) -> f64 {
    let n = sorted.len();
    let rank = (quantile * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Optional outlier pass: drops navigations whose total duration or total
/// transferred bytes exceed the given empirical quantile of the input set
/// (computed by the nearest-rank rule). Off by default in the pipeline.
pub fn drop_extreme_navigations(
    navigations: Vec<Navigation>,
    quantile: f64,
) -> Result<Vec<Navigation>, IngestError> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(IngestError::InvalidQuantile { value: quantile });
    }
    if navigations.is_empty() {
        return Ok(navigations);
    }
    let mut durations: Vec<f64> = navigations
        .iter()
        .map(Navigation::duration_seconds)
        .collect();
    let mut sizes: Vec<f64> = navigations
        .iter()
        .map(|nav| nav.total_bytes() as f64)
        .collect();
    durations.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    sizes.sort_by(|a, b| a.partial_cmp(b).expect("sizes are finite"));
    let max_duration = nearest_rank(&durations, quantile);
    let max_size = nearest_rank(&sizes, quantile);
    Ok(navigations
        .into_iter()
        .filter(|nav| {
            nav.duration_seconds() <= max_duration && (nav.total_bytes() as f64) <= max_size
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RawRequest;
    use chrono::{TimeZone, Utc};

    /// A navigation with `n` requests spread evenly across `duration`
    /// seconds, transferring `bytes` per request.
    fn navigation(id: u64, n: usize, duration: i64, bytes: u64) -> Navigation {
        let requests: Vec<RawRequest> = (0..n)
            .map(|i| RawRequest {
                timestamp: Utc
                    .timestamp_opt(
                        1_026_000_000 + duration * i as i64 / (n as i64 - 1).max(1),
                        0,
                    )
                    .unwrap(),
                user_key: format!("user-{id}"),
                resource: "/r".to_string(),
                status: 200,
                bytes,
            })
            .collect();
        Navigation::new(id, requests).unwrap()
    }

    #[test]
    fn keeps_boundary_values_and_drops_rule_breakers() {
        let input = vec![
            navigation(1, 10, 60, 1),  // exactly at every boundary: kept
            navigation(2, 9, 600, 1),  // too few requests
            navigation(3, 12, 50, 1),  // too short
            navigation(4, 20, 60, 1),  // 3 s/request: implausibly fast
            navigation(5, 12, 120, 1), // comfortable: kept
        ];
        let kept = filter_navigations(input, &FilterRules::default());
        let ids: Vec<u64> = kept.iter().map(|nav| nav.id).collect();
        assert_eq!(ids, vec![1, 5]);
    }

    #[test]
    fn ratio_rule_means_at_most_fifteen_requests_per_minute() {
        // 16 requests in one minute -> 3.75 s/request -> dropped.
        let fast = navigation(1, 16, 60, 1);
        // 15 requests in one minute -> ~4.29 s/request -> kept.
        let ok = navigation(2, 15, 60, 1);
        let kept = filter_navigations(vec![fast, ok], &FilterRules::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, 2);
    }

    #[test]
    fn output_is_an_ordered_subsequence() {
        let input: Vec<Navigation> = (1..=8)
            .map(|id| navigation(id, 10 + id as usize, 300, 1))
            .collect();
        let kept = filter_navigations(input.clone(), &FilterRules::default());
        let mut last_index = 0usize;
        for nav in &kept {
            let index = input.iter().position(|n| n.id == nav.id).unwrap();
            assert!(index >= last_index);
            last_index = index;
            assert_eq!(&input[index], nav);
        }
    }

    #[test]
    fn extreme_navigations_are_dropped_by_quantile() {
        let mut input: Vec<Navigation> = (1..=99).map(|id| navigation(id, 10, 100, 10)).collect();
        input.push(navigation(100, 10, 100_000, 10)); // duration outlier
        let kept = drop_extreme_navigations(input, 0.99).unwrap();
        assert_eq!(kept.len(), 99);
        assert!(kept.iter().all(|nav| nav.id != 100));
    }

    #[test]
    fn size_outliers_are_also_dropped() {
        let mut input: Vec<Navigation> = (1..=99).map(|id| navigation(id, 10, 100, 10)).collect();
        input.push(navigation(100, 10, 100, 1_000_000)); // byte outlier
        let kept = drop_extreme_navigations(input, 0.99).unwrap();
        assert_eq!(kept.len(), 99);
        assert!(kept.iter().all(|nav| nav.id != 100));
    }

    #[test]
    fn quantile_one_keeps_everything() {
        let input: Vec<Navigation> = (1..=20)
            .map(|id| navigation(id, 10, 100 * id as i64, 10 * id))
            .collect();
        let kept = drop_extreme_navigations(input.clone(), 1.0).unwrap();
        assert_eq!(kept.len(), input.len());
    }

    #[test]
    fn invalid_quantiles_are_rejected() {
        assert!(drop_extreme_navigations(vec![], 0.0).is_err());
        assert!(drop_extreme_navigations(vec![], 1.5).is_err());
    }
}
