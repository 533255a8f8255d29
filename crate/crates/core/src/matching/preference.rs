use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::{Band, BsChannelPair, PriorityAssignment, UserSubfilePair};
use crate::config::LogBase;
use crate::contract::{serving_cost, TypeGrid};
use crate::error::{Error, Result};
use crate::net::{GainMatrix, Link, PowerSolver};

/// A file one user wants delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileRequest {
    pub user: usize,
    pub file: usize,
    pub size_bits: u64,
}

/// Splits every file into chunks of `chunk_bits`; the last chunk carries the
/// remainder unless `pad` rounds it up to a full chunk.
pub fn chunk_files(requests: &[FileRequest], chunk_bits: u64, pad: bool) -> Result<Vec<UserSubfilePair>> {
    if chunk_bits == 0 {
        return Err(Error::config("chunk size must be positive"));
    }
    let mut out = Vec::new();
    for r in requests {
        let n = r.size_bits.div_ceil(chunk_bits);
        for c in 0..n {
            let bits = if pad { chunk_bits } else { chunk_bits.min(r.size_bits - c * chunk_bits) };
            out.push(UserSubfilePair {
                id: out.len(),
                user: r.user,
                file: r.file,
                chunk_index: c as usize,
                chunk_bits: bits,
                type_index: 0,
                theta: 0.0,
                pref_list: Vec::new(),
                pref_utilities: Vec::new(),
                next: 0,
            });
        }
    }
    Ok(out)
}

/// Chunks an option can admit: nominal capacity over the per-chunk demand.
pub fn nominal_quota(bandwidth_hz: f64, snr_db: f64, base: LogBase, demand_bps: f64) -> u32 {
    if demand_bps <= 0.0 {
        return u32::MAX;
    }
    let snr = 10f64.powf(snr_db / 10.0);
    let q = (bandwidth_hz * base.log1p(snr) / demand_bps).floor();
    q.clamp(0.0, u32::MAX as f64) as u32
}

/// Ranks `candidates` by descending expected utility, dropping options worth
/// less than staying unmatched; ties go to the lower option id.
pub fn user_preference_list<F>(candidates: &[usize], mut expected_utility: F) -> Vec<(usize, f64)>
where
    F: FnMut(usize) -> f64,
{
    let mut ranked: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&m| (m, expected_utility(m)))
        .filter(|&(_, u)| u >= 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Priority class of `pair` when proposing to `target`.
///
/// Class 1: the target is the pair's first and only remaining preference and
/// is licensed. Class 2: the target is the last licensed option left.
/// Class 3: any other case.
pub fn classify_priority(
    pair: &UserSubfilePair,
    target: usize,
    options: &[BsChannelPair],
    coeffs: [f64; 3],
) -> Result<PriorityAssignment> {
    let remaining = pair.remaining();
    if !remaining.contains(&target) {
        return Err(Error::ContractViolation(format!(
            "option {target} is not among pair {}'s remaining preferences",
            pair.id
        )));
    }
    Ok(classify_remaining(pair.pref_list.first().copied(), remaining, target, options, coeffs))
}

fn classify_remaining(
    first: Option<usize>,
    remaining: &[usize],
    target: usize,
    options: &[BsChannelPair],
    coeffs: [f64; 3],
) -> PriorityAssignment {
    let licensed = |m: usize| options[m].band == Band::Licensed;
    let other_licensed = remaining.iter().any(|&m| m != target && licensed(m));
    let class = if !licensed(target) || other_licensed {
        3
    } else if remaining.len() == 1 && first == Some(target) {
        1
    } else {
        2
    };
    PriorityAssignment {
        class,
        phi: other_licensed as u8,
        priority_coeff: coeffs[class as usize - 1],
        epsilon: 0,
    }
}

/// Base-station utility of serving a pair: its price minus the power cost
/// of serving `user` given every other link in `links`.
pub fn bs_gamma(
    price: f64,
    user: usize,
    links: &[Link],
    gains: &GainMatrix,
    solver: &PowerSolver,
    cost_per_watt: f64,
) -> Result<f64> {
    let cost = if links.iter().any(|l| l.user == user) {
        serving_cost(user, links, gains, solver, cost_per_watt)?
    } else {
        0.0
    };
    Ok(price - cost)
}

/// Promotion `cost / (theta * eta)` granted to a pair by its priority.
pub fn promotion(cost: f64, theta: f64, priority_coeff: f64) -> Result<f64> {
    let denom = theta * priority_coeff;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::config(format!("promotion undefined for theta={theta}, eta={priority_coeff}")));
    }
    Ok(cost / denom)
}

/// Monte-Carlo base-station utility `E[eps gamma] + (1 - eps) E[gamma + G]`
/// of a pair whose owner is `user`, over type profiles of everyone else.
/// `gamma_and_cost` maps a type profile to the pair's gamma and cost.
#[allow(clippy::too_many_arguments)]
pub fn bs_utility<F>(
    user: usize,
    pair: &UserSubfilePair,
    priority: &PriorityAssignment,
    grid: &TypeGrid,
    num_users: usize,
    samples: usize,
    seed: u64,
    mut gamma_and_cost: F,
) -> Result<f64>
where
    F: FnMut(&[usize]) -> (f64, f64),
{
    assert!(samples >= 1, "at least one sample is required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profile = vec![0; num_users];
    let (mut gamma_sum, mut promo_sum) = (0.0, 0.0);
    for _ in 0..samples {
        for (i, slot) in profile.iter_mut().enumerate() {
            *slot = if i == user { pair.type_index } else { grid.sample_index(rng.gen()) };
        }
        let (gamma, cost) = gamma_and_cost(&profile);
        gamma_sum += gamma;
        promo_sum += promotion(cost, pair.theta, priority.priority_coeff)?;
    }
    let n = samples as f64;
    let eps = priority.epsilon as f64;
    Ok(gamma_sum / n + (1.0 - eps) * promo_sum / n)
}

/// What an option knows about one applicant when ranking it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApplicantScore {
    pub pair: usize,
    pub user: usize,
    pub chunk_index: usize,
    pub class: u8,
    pub type_index: usize,
    /// Expected gamma.
    pub gamma: f64,
    /// Expected promotion.
    pub promotion: f64,
}

impl ApplicantScore {
    pub fn psi(&self) -> f64 {
        self.gamma + self.promotion
    }

    fn tie_key(&self) -> (usize, usize, usize) {
        (self.user, self.chunk_index, self.pair)
    }
}

/// Orders applicants best first.
///
/// Applicants are ranked by `gamma + promotion`; among applicants sharing
/// both priority class and type, promotion is suppressed, so each such group
/// is re-sorted by `gamma` within the positions it occupies. Remaining ties
/// go to the lower user id, then the lower chunk index.
pub fn rank_applicants(scores: &[ApplicantScore]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&scores[i], &scores[j]);
        b.psi().total_cmp(&a.psi()).then(a.tie_key().cmp(&b.tie_key()))
    });
    let mut groups: HashMap<(u8, usize), Vec<usize>> = HashMap::new();
    for (slot, &i) in order.iter().enumerate() {
        groups.entry((scores[i].class, scores[i].type_index)).or_default().push(slot);
    }
    let mut out = order.clone();
    for slots in groups.values().filter(|s| s.len() > 1) {
        let mut members: Vec<usize> = slots.iter().map(|&s| order[s]).collect();
        members.sort_by(|&i, &j| {
            let (a, b) = (&scores[i], &scores[j]);
            b.gamma.total_cmp(&a.gamma).then(a.tie_key().cmp(&b.tie_key()))
        });
        for (&slot, &i) in slots.iter().zip(&members) {
            out[slot] = i;
        }
    }
    out.into_iter().map(|i| scores[i].pair).collect()
}

/// Static applicant ranks at every option, lower is better.
#[derive(Debug, Clone, Default)]
pub struct Rankings {
    ranks: Vec<HashMap<usize, u32>>,
}

impl Rankings {
    /// Ranks from explicit best-first orders, one per option.
    pub fn from_orders(orders: &[Vec<usize>]) -> Self {
        Rankings {
            ranks: orders
                .iter()
                .map(|o| o.iter().enumerate().map(|(r, &a)| (a, r as u32)).collect())
                .collect(),
        }
    }

    /// Scores every (pair, option) on each pair's preference list and ranks
    /// the applicants of each option.
    pub fn build<F>(pairs: &[UserSubfilePair], options: &[BsChannelPair], coeffs: [f64; 3], mut score: F) -> Result<Self>
    where
        F: FnMut(&UserSubfilePair, &BsChannelPair, &PriorityAssignment) -> Result<(f64, f64)>,
    {
        let mut applicants: Vec<Vec<ApplicantScore>> = vec![Vec::new(); options.len()];
        for pair in pairs {
            // A pair proposes to each option with everything after it still
            // remaining, so its class there is fixed in advance.
            for (pos, &m) in pair.pref_list.iter().enumerate() {
                let priority =
                    classify_remaining(pair.pref_list.first().copied(), &pair.pref_list[pos..], m, options, coeffs);
                let (gamma, promo) = score(pair, &options[m], &priority)?;
                applicants[m].push(ApplicantScore {
                    pair: pair.id,
                    user: pair.user,
                    chunk_index: pair.chunk_index,
                    class: priority.class,
                    type_index: pair.type_index,
                    gamma,
                    promotion: promo,
                });
            }
        }
        let orders: Vec<Vec<usize>> = applicants.iter().map(|a| rank_applicants(a)).collect();
        Ok(Self::from_orders(&orders))
    }

    pub fn num_options(&self) -> usize {
        self.ranks.len()
    }

    pub fn rank(&self, option: usize, pair: usize) -> Option<u32> {
        self.ranks.get(option).and_then(|r| r.get(&pair).copied())
    }
}
