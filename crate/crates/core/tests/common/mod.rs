//! Brute-force stability oracle shared by the integration tests.
#![allow(dead_code)]

use lteu_core::matching::{Band, BsChannelPair, UserSubfilePair};

pub fn pair(id: usize, pref: Vec<usize>, utilities: Vec<f64>) -> UserSubfilePair {
    UserSubfilePair {
        id,
        user: id,
        file: 0,
        chunk_index: 0,
        chunk_bits: 1,
        type_index: 0,
        theta: 1.0,
        pref_list: pref,
        pref_utilities: utilities,
        next: 0,
    }
}

/// Every quota-respecting matching where each pair sits on an option it
/// finds acceptable, or nowhere.
pub fn all_matchings(pairs: &[UserSubfilePair], options: &[BsChannelPair]) -> Vec<Vec<Option<usize>>> {
    let mut out = vec![vec![]];
    for p in pairs {
        let mut next = Vec::new();
        for partial in &out {
            let mut choices = vec![None];
            choices.extend(p.pref_list.iter().map(|&m| Some(m)));
            for c in choices {
                let mut v: Vec<Option<usize>> = partial.clone();
                v.push(c);
                next.push(v);
            }
        }
        out = next;
    }
    out.retain(|assign| {
        options.iter().all(|o| assign.iter().filter(|&&m| m == Some(o.id)).count() <= o.quota as usize)
    });
    out
}

/// Textbook stability: no pair and option that both gain from deviating.
pub fn is_stable(assign: &[Option<usize>], pairs: &[UserSubfilePair], options: &[BsChannelPair], order: &[Vec<usize>]) -> bool {
    let pos = |m: usize, a: usize| order[m].iter().position(|&x| x == a).unwrap();
    for (a, p) in pairs.iter().enumerate() {
        let cur = assign[a].map_or(-1.0, |m| p.pref_list.len() as f64 - p.pref_list.iter().position(|&x| x == m).unwrap() as f64);
        for (i, &m) in p.pref_list.iter().enumerate() {
            let u = p.pref_list.len() as f64 - i as f64;
            if u <= cur {
                continue;
            }
            let holders: Vec<usize> = (0..pairs.len()).filter(|&b| assign[b] == Some(m)).collect();
            if holders.len() < options[m].quota as usize || holders.iter().any(|&b| pos(m, a) < pos(m, b)) {
                return false;
            }
        }
    }
    true
}

pub fn options(quotas: &[u32]) -> Vec<BsChannelPair> {
    quotas
        .iter()
        .enumerate()
        .map(|(id, &quota)| BsChannelPair { id, bs: id, channel: 0, band: Band::Licensed, quota })
        .collect()
}

