//! Grouping requests into per-user navigations.

use chrono::Duration;

use super::{Navigation, RawRequest};

/// Default session timeout: 30 minutes.
pub const DEFAULT_SESSION_TIMEOUT_SECS: i64 = 30 * 60;

/// Splits requests into navigations: per user, a navigation is a maximal run
/// of consecutive requests where each gap is at most `timeout` (a gap of
/// exactly the timeout stays in the same navigation; one second more splits).
///
/// Requests are ordered by (user key, timestamp), keeping input order for
/// exact ties. The resulting navigations are sorted by (start time, user key)
/// and numbered sequentially from 1, so identical input always produces
/// identical identifiers.
pub fn sessionize(mut requests: Vec<RawRequest>, timeout: Duration) -> Vec<Navigation> {
    requests.sort_by(|a, b| {
        a.user_key
            .cmp(&b.user_key)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    let mut navigations: Vec<Navigation> = Vec::new();
    let mut current: Vec<RawRequest> = Vec::new();
    for request in requests {
        let split = match current.last() {
            None => false,
            Some(previous) => {
                previous.user_key != request.user_key
                    || request.timestamp - previous.timestamp > timeout
            }
        };
        if split {
            let finished = std::mem::take(&mut current);
            navigations.push(Navigation::new(0, finished).expect("runs are non-empty"));
        }
        current.push(request);
    }
    if !current.is_empty() {
        navigations.push(Navigation::new(0, current).expect("runs are non-empty"));
    }
    navigations.sort_by(|a, b| a.start().cmp(&b.start()).then(a.user_key.cmp(&b.user_key)));
    for (index, navigation) in navigations.iter_mut().enumerate() {
        navigation.id = (index + 1) as u64;
    }
    navigations
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, TimeZone, Utc};
    use proptest::prelude::*;

    fn at(seconds: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_026_000_000 + seconds, 0).unwrap()
    }

    fn request(user: &str, seconds: i64) -> RawRequest {
        RawRequest {
            timestamp: at(seconds),
            user_key: user.to_string(),
            resource: "/r".to_string(),
            status: 200,
            bytes: 1,
        }
    }

    fn timeout() -> Duration {
        Duration::seconds(DEFAULT_SESSION_TIMEOUT_SECS)
    }

    #[test]
    fn gap_of_exactly_the_timeout_stays_in_one_navigation() {
        let navs = sessionize(vec![request("u", 0), request("u", 1800)], timeout());
        assert_eq!(navs.len(), 1);
        assert_eq!(navs[0].n_requests(), 2);
    }

    #[test]
    fn gap_of_one_second_past_the_timeout_splits() {
        let navs = sessionize(vec![request("u", 0), request("u", 1801)], timeout());
        assert_eq!(navs.len(), 2);
        assert_eq!(navs[0].id, 1);
        assert_eq!(navs[1].id, 2);
    }

    #[test]
    fn same_address_with_different_agents_is_two_users() {
        let navs = sessionize(
            vec![
                request("10.0.0.9 agent-one", 0),
                request("10.0.0.9 agent-two", 5),
                request("10.0.0.9 agent-one", 10),
            ],
            timeout(),
        );
        assert_eq!(navs.len(), 2);
        assert_eq!(navs[0].user_key, "10.0.0.9 agent-one");
        assert_eq!(navs[0].n_requests(), 2);
        assert_eq!(navs[1].user_key, "10.0.0.9 agent-two");
    }

    #[test]
    fn identifiers_follow_start_time_then_user_key() {
        let navs = sessionize(
            vec![request("bbb", 10), request("aaa", 10), request("ccc", 0)],
            timeout(),
        );
        let order: Vec<(&str, u64)> = navs.iter().map(|n| (n.user_key.as_str(), n.id)).collect();
        assert_eq!(order, vec![("ccc", 1), ("aaa", 2), ("bbb", 3)]);
    }

    #[test]
    fn interleaved_users_are_untangled() {
        let navs = sessionize(
            vec![
                request("a", 0),
                request("b", 1),
                request("a", 2),
                request("b", 3),
            ],
            timeout(),
        );
        assert_eq!(navs.len(), 2);
        assert!(navs.iter().all(|n| n.n_requests() == 2));
    }

    proptest! {
        /// Sessionization is a partition of the input into maximal runs:
        /// nothing is lost, every navigation is single-user and time-ordered
        /// with gaps within the timeout, and consecutive navigations of one
        /// user are separated by more than the timeout.
        #[test]
        fn sessionize_forms_maximal_single_user_runs(
            times in proptest::collection::vec((0usize..4, 0i64..20_000), 0..60),
        ) {
            let users = ["u0", "u1", "u2", "u3"];
            let input: Vec<RawRequest> = times
                .iter()
                .map(|&(u, t)| request(users[u], t))
                .collect();
            let navs = sessionize(input.clone(), timeout());

            let total: usize = navs.iter().map(Navigation::n_requests).sum();
            prop_assert_eq!(total, input.len());

            for nav in &navs {
                for pair in nav.requests.windows(2) {
                    prop_assert_eq!(&pair[0].user_key, &pair[1].user_key);
                    prop_assert!(pair[0].timestamp <= pair[1].timestamp);
                    prop_assert!(pair[1].timestamp - pair[0].timestamp <= timeout());
                }
                prop_assert!(nav.requests.iter().all(|r| r.user_key == nav.user_key));
            }

            // Maximality: per user, consecutive navigations are far apart.
            for user in users {
                let mut of_user: Vec<&Navigation> =
                    navs.iter().filter(|n| n.user_key == user).collect();
                of_user.sort_by_key(|n| n.start());
                for pair in of_user.windows(2) {
                    prop_assert!(pair[1].start() - pair[0].end() > timeout());
                }
            }

            // Identifiers are 1..=N in (start, user) order.
            let mut expected: Vec<u64> = (1..=navs.len() as u64).collect();
            let mut ids: Vec<u64> = navs.iter().map(|n| n.id).collect();
            prop_assert_eq!(&mut ids, &mut expected);
        }
    }
}
