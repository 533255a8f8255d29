use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Licensed,
    Unlicensed,
}

/// A base station on one channel of one band, admitting up to `quota` chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsChannelPair {
    pub id: usize,
    pub bs: usize,
    pub channel: usize,
    pub band: Band,
    pub quota: u32,
}

/// One chunk of one user's file, proposing on the user's behalf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSubfilePair {
    pub id: usize,
    pub user: usize,
    pub file: usize,
    pub chunk_index: usize,
    pub chunk_bits: u64,
    pub type_index: usize,
    pub theta: f64,
    /// Acceptable options, best first.
    pub pref_list: Vec<usize>,
    /// Expected utility of each entry of `pref_list`.
    pub pref_utilities: Vec<f64>,
    /// Start of the suffix of `pref_list` not yet rejected.
    pub next: usize,
}

impl UserSubfilePair {
    pub fn remaining(&self) -> &[usize] {
        &self.pref_list[self.next.min(self.pref_list.len())..]
    }

    /// Position of `option` in the preference list.
    pub fn rank_of(&self, option: usize) -> Option<usize> {
        self.pref_list.iter().position(|&m| m == option)
    }

    pub fn utility_of(&self, option: usize) -> Option<f64> {
        self.rank_of(option).map(|i| self.pref_utilities[i])
    }

    pub fn set_preferences(&mut self, ranked: Vec<(usize, f64)>) {
        let (ids, utilities) = ranked.into_iter().unzip();
        self.pref_list = ids;
        self.pref_utilities = utilities;
        self.next = 0;
    }
}

/// Priority of a pair at the option it proposes to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityAssignment {
    pub class: u8,
    pub phi: u8,
    pub priority_coeff: f64,
    /// Set when promotion is suppressed against a same-class, same-type rival.
    pub epsilon: u8,
}

/// One-to-many assignment of pairs to options.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    assignment: Vec<Option<usize>>,
    accepted: Vec<Vec<usize>>,
    pub rounds: usize,
    pub proposals: usize,
}

#[derive(Serialize, Deserialize)]
struct MatchingDocument {
    num_options: usize,
    assignment: BTreeMap<usize, usize>,
    unmatched: Vec<usize>,
}

impl Matching {
    pub fn empty(num_pairs: usize, num_options: usize) -> Self {
        Matching { assignment: vec![None; num_pairs], accepted: vec![Vec::new(); num_options], rounds: 0, proposals: 0 }
    }

    /// Builds a matching from an explicit assignment, checking quotas.
    pub fn from_assignment(assignment: Vec<Option<usize>>, options: &[BsChannelPair]) -> Result<Self> {
        let mut accepted = vec![Vec::new(); options.len()];
        for (a, m) in assignment.iter().enumerate() {
            if let Some(m) = *m {
                accepted
                    .get_mut(m)
                    .ok_or_else(|| Error::Feasibility(format!("pair {a} matched to unknown option {m}")))?
                    .push(a);
            }
        }
        for (m, acc) in accepted.iter().enumerate() {
            if acc.len() > options[m].quota as usize {
                return Err(Error::Feasibility(format!(
                    "option {m} holds {} pairs over quota {}",
                    acc.len(),
                    options[m].quota
                )));
            }
        }
        Ok(Matching { assignment, accepted, rounds: 0, proposals: 0 })
    }

    pub(crate) fn assign(&mut self, pair: usize, option: usize) {
        self.assignment[pair] = Some(option);
        self.accepted[option].push(pair);
    }

    pub fn num_pairs(&self) -> usize {
        self.assignment.len()
    }

    pub fn of_pair(&self, pair: usize) -> Option<usize> {
        self.assignment[pair]
    }

    pub fn accepted(&self, option: usize) -> &[usize] {
        &self.accepted[option]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn unmatched(&self) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, m)| m.is_none()).map(|(a, _)| a).collect()
    }

    pub fn num_matched(&self) -> usize {
        self.assignment.iter().filter(|m| m.is_some()).count()
    }

    /// Mutual consistency and quota check.
    pub fn validate(&self, options: &[BsChannelPair]) -> Result<()> {
        if self.accepted.len() != options.len() {
            return Err(Error::Feasibility("matching covers a different option set".into()));
        }
        for (m, acc) in self.accepted.iter().enumerate() {
            if acc.len() > options[m].quota as usize {
                return Err(Error::Feasibility(format!("option {m} exceeds its quota")));
            }
            if let Some(&a) = acc.iter().find(|&&a| self.assignment.get(a) != Some(&Some(m))) {
                return Err(Error::Feasibility(format!("option {m} holds pair {a} not matched to it")));
            }
        }
        for (a, m) in self.assignment.iter().enumerate() {
            if let Some(m) = *m {
                if !self.accepted[m].contains(&a) {
                    return Err(Error::Feasibility(format!("pair {a} is missing from option {m}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = MatchingDocument {
            num_options: self.accepted.len(),
            assignment: self.assignment.iter().enumerate().filter_map(|(a, m)| m.map(|m| (a, m))).collect(),
            unmatched: self.unmatched(),
        };
        serde_json::to_string_pretty(&doc).expect("matching serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MatchingDocument = serde_json::from_str(text)?;
        let num_pairs = doc.assignment.keys().chain(&doc.unmatched).map(|&a| a + 1).max().unwrap_or(0);
        let mut m = Matching::empty(num_pairs, doc.num_options);
        for (a, o) in doc.assignment {
            if o >= doc.num_options {
                return Err(Error::Parse(format!("option {o} out of range")));
            }
            if m.assignment[a].is_some() {
                return Err(Error::Parse(format!("pair {a} listed twice")));
            }
            m.assign(a, o);
        }
        for &a in &doc.unmatched {
            if m.assignment[a].is_some() {
                return Err(Error::Parse(format!("pair {a} both matched and unmatched")));
            }
        }
        for acc in &mut m.accepted {
            acc.sort_unstable();
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(quotas: &[u32]) -> Vec<BsChannelPair> {
        quotas
            .iter()
            .enumerate()
            .map(|(id, &q)| BsChannelPair { id, bs: 0, channel: id, band: Band::Licensed, quota: q })
            .collect()
    }

    #[test]
    fn quota_enforced_on_construction() {
        assert!(Matching::from_assignment(vec![Some(0), Some(0)], &opts(&[1])).is_err());
        assert!(Matching::from_assignment(vec![Some(0), None], &opts(&[1])).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let m = Matching::from_assignment(vec![Some(1), None, Some(0), Some(1)], &opts(&[1, 2])).unwrap();
        let back = Matching::from_json(&m.to_json()).unwrap();
        assert_eq!(back.assignment(), m.assignment());
        back.validate(&opts(&[1, 2])).unwrap();
    }

    #[test]
    fn remaining_is_suffix() {
        let mut a = UserSubfilePair {
            id: 0,
            user: 0,
            file: 0,
            chunk_index: 0,
            chunk_bits: 1,
            type_index: 0,
            theta: 1.0,
            pref_list: vec![],
            pref_utilities: vec![],
            next: 0,
        };
        a.set_preferences(vec![(3, 2.0), (1, 1.0)]);
        assert_eq!(a.remaining(), &[3, 1]);
        a.next = 1;
        assert_eq!(a.remaining(), &[1]);
        a.next = 2;
        assert!(a.remaining().is_empty());
    }
}
