use serde::Serialize;

use super::preference::Rankings;
use super::types::{Band, BsChannelPair, Matching, UserSubfilePair};

/// Pair-proposing deferred acceptance.
///
/// Every round, each unmatched pair with options left proposes to the first
/// of them; each option keeps its `quota` best applicants (tentatively held
/// ones included) and rejects the rest, which drop that option. Stops after
/// a round without rejections. `next` on every pair records how far down
/// its list it went.
pub fn deferred_acceptance(pairs: &mut [UserSubfilePair], options: &[BsChannelPair], rankings: &Rankings) -> Matching {
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); options.len()];
    let mut holder: Vec<Option<usize>> = vec![None; pairs.len()];
    let mut rounds = 0;
    let mut proposals = 0;
    let mut touched = vec![false; options.len()];
    loop {
        rounds += 1;
        let mut any_proposal = false;
        let mut touched_list = Vec::new();
        for (a, pair) in pairs.iter().enumerate() {
            if holder[a].is_some() {
                continue;
            }
            if let Some(&m) = pair.remaining().first() {
                held[m].push(a);
                proposals += 1;
                any_proposal = true;
                if !touched[m] {
                    touched[m] = true;
                    touched_list.push(m);
                }
            }
        }
        if !any_proposal {
            rounds -= 1;
            break;
        }
        let mut rejected = false;
        for m in touched_list {
            touched[m] = false;
            let rank = |a: usize| rankings.rank(m, pairs[a].id).unwrap_or(u32::MAX);
            held[m].sort_by_key(|&a| (rank(a), a));
            let quota = options[m].quota as usize;
            for &a in held[m].iter().skip(quota) {
                pairs[a].next += 1;
                holder[a] = None;
                rejected = true;
            }
            held[m].truncate(quota);
            for &a in &held[m] {
                holder[a] = Some(m);
            }
        }
        if !rejected {
            break;
        }
    }
    let mut matching = Matching::empty(pairs.len(), options.len());
    for (m, acc) in held.iter().enumerate() {
        for &a in acc {
            matching.assign(a, m);
        }
    }
    matching.rounds = rounds;
    matching.proposals = proposals;
    matching
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `(pair, option)` pairs that would both rather be matched together.
    pub blocking: Vec<(usize, usize)>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.blocking.is_empty()
    }
}

/// Finds blocking pairs: a pair strictly prefers an option (by more than
/// `tolerance` in expected utility) that has room for it or holds someone
/// it ranks lower.
pub fn verify_bayesian_stability(
    matching: &Matching,
    pairs: &[UserSubfilePair],
    options: &[BsChannelPair],
    rankings: &Rankings,
    tolerance: f64,
) -> StabilityReport {
    let mut blocking = Vec::new();
    for (a, pair) in pairs.iter().enumerate() {
        let current = matching.of_pair(a);
        let current_utility = current.and_then(|m| pair.utility_of(m)).unwrap_or(0.0);
        for (&m, &u) in pair.pref_list.iter().zip(&pair.pref_utilities) {
            if Some(m) == current || u <= current_utility + tolerance {
                continue;
            }
            let quota = options[m].quota as usize;
            if quota == 0 {
                continue;
            }
            let accepted = matching.accepted(m);
            let admits = accepted.len() < quota || {
                let mine = rankings.rank(m, pair.id).unwrap_or(u32::MAX);
                accepted.iter().any(|&b| mine < rankings.rank(m, pairs[b].id).unwrap_or(u32::MAX))
            };
            if admits {
                blocking.push((a, m));
            }
        }
    }
    StabilityReport { blocking }
}

/// Per-user `(alpha, beta)`: shares of the user's requested bits matched to
/// licensed and unlicensed options.
pub fn matching_to_allocation(
    matching: &Matching,
    pairs: &[UserSubfilePair],
    options: &[BsChannelPair],
    num_users: usize,
) -> Vec<(f64, f64)> {
    let mut requested = vec![0u64; num_users];
    let mut licensed = vec![0u64; num_users];
    let mut unlicensed = vec![0u64; num_users];
    for (a, pair) in pairs.iter().enumerate() {
        requested[pair.user] += pair.chunk_bits;
        match matching.of_pair(a).map(|m| options[m].band) {
            Some(Band::Licensed) => licensed[pair.user] += pair.chunk_bits,
            Some(Band::Unlicensed) => unlicensed[pair.user] += pair.chunk_bits,
            None => {}
        }
    }
    (0..num_users)
        .map(|i| {
            if requested[i] == 0 {
                (0.0, 0.0)
            } else {
                let r = requested[i] as f64;
                (licensed[i] as f64 / r, unlicensed[i] as f64 / r)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: usize, user: usize, pref: &[usize]) -> UserSubfilePair {
        UserSubfilePair {
            id,
            user,
            file: 0,
            chunk_index: id,
            chunk_bits: 10,
            type_index: 0,
            theta: 1.0,
            pref_list: pref.to_vec(),
            pref_utilities: (0..pref.len()).map(|i| (pref.len() - i) as f64).collect(),
            next: 0,
        }
    }

    fn options(quotas: &[u32], bands: &[Band]) -> Vec<BsChannelPair> {
        quotas
            .iter()
            .zip(bands)
            .enumerate()
            .map(|(id, (&quota, &band))| BsChannelPair { id, bs: 0, channel: id, band, quota })
            .collect()
    }

    #[test]
    fn ample_quota_gives_first_choices() {
        let mut pairs = vec![pair(0, 0, &[1, 0]), pair(1, 1, &[0, 1]), pair(2, 2, &[1])];
        let opts = options(&[3, 3], &[Band::Licensed, Band::Licensed]);
        let r = Rankings::from_orders(&[vec![0, 1, 2], vec![0, 1, 2]]);
        let m = deferred_acceptance(&mut pairs, &opts, &r);
        assert_eq!(m.assignment(), &[Some(1), Some(0), Some(1)]);
        assert_eq!(m.proposals, 3);
        assert!(verify_bayesian_stability(&m, &pairs, &opts, &r, 0.0).is_stable());
    }

    #[test]
    fn rejection_moves_down_the_list() {
        let mut pairs = vec![pair(0, 0, &[0, 1]), pair(1, 1, &[0, 1])];
        let opts = options(&[1, 1], &[Band::Licensed, Band::Unlicensed]);
        let r = Rankings::from_orders(&[vec![1, 0], vec![0, 1]]);
        let m = deferred_acceptance(&mut pairs, &opts, &r);
        assert_eq!(m.assignment(), &[Some(1), Some(0)]);
        assert_eq!(pairs[0].next, 1);
        m.validate(&opts).unwrap();
    }

    #[test]
    fn zero_quota_everywhere_is_stable() {
        let mut pairs = vec![pair(0, 0, &[0]), pair(1, 1, &[0])];
        let opts = options(&[0], &[Band::Licensed]);
        let r = Rankings::from_orders(&[vec![0, 1]]);
        let m = deferred_acceptance(&mut pairs, &opts, &r);
        assert_eq!(m.num_matched(), 0);
        assert!(verify_bayesian_stability(&m, &pairs, &opts, &r, 0.0).is_stable());
    }

    #[test]
    fn swapped_assignment_blocks() {
        let mut pairs = vec![pair(0, 0, &[0, 1]), pair(1, 1, &[0, 1])];
        let opts = options(&[1, 1], &[Band::Licensed, Band::Licensed]);
        let r = Rankings::from_orders(&[vec![0, 1], vec![0, 1]]);
        let m = deferred_acceptance(&mut pairs, &opts, &r);
        assert_eq!(m.assignment(), &[Some(0), Some(1)]);
        let swapped = Matching::from_assignment(vec![Some(1), Some(0)], &opts).unwrap();
        let report = verify_bayesian_stability(&swapped, &pairs, &opts, &r, 0.0);
        assert_eq!(report.blocking, vec![(0, 0)]);
    }

    #[test]
    fn allocation_counts_bits() {
        let pairs: Vec<_> = (0..10).map(|c| pair(c, 0, &[])).collect();
        let opts = options(&[10, 10], &[Band::Licensed, Band::Unlicensed]);
        let assign = (0..10).map(|c| Some(if c < 6 { 0 } else { 1 })).collect();
        let m = Matching::from_assignment(assign, &opts).unwrap();
        assert_eq!(matching_to_allocation(&m, &pairs, &opts, 1), vec![(0.6, 0.4)]);
        let all_l = Matching::from_assignment(vec![Some(0); 10], &opts).unwrap();
        assert_eq!(matching_to_allocation(&all_l, &pairs, &opts, 1), vec![(1.0, 0.0)]);
        let none = Matching::empty(10, 2);
        assert_eq!(matching_to_allocation(&none, &pairs, &opts, 2), vec![(0.0, 0.0), (0.0, 0.0)]);
    }
}
