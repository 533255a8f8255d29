use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::channel::GainMatrix;
use crate::config::LogBase;
use crate::error::{Error, Result};

/// One downlink transmission: `bs` serves `user` on `channel` and must
/// deliver `rate_bps` over `bandwidth_hz` while it is active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub user: usize,
    pub bs: usize,
    pub channel: usize,
    pub rate_bps: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSolver {
    /// Noise power spectral density in W/Hz.
    pub noise_psd_w_hz: f64,
    pub log_base: LogBase,
    /// Relative change between sweeps at which the iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub power_cap_w: Option<f64>,
}

impl PowerSolver {
    pub fn new(noise_psd_w_hz: f64, log_base: LogBase) -> Self {
        PowerSolver {
            noise_psd_w_hz,
            log_base,
            tolerance: 1e-9,
            max_iterations: 10_000,
            power_cap_w: None,
        }
    }

    pub fn with_power_cap(mut self, cap: Option<f64>) -> Self {
        self.power_cap_w = cap;
        self
    }
}

/// Converged transmit powers, one per link.
///
/// A base station serving several links on the same channel time-shares
/// it, so the interference it causes is the mean power over those links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    links: Vec<Link>,
    powers: Vec<f64>,
    noise_psd_w_hz: f64,
    log_base: LogBase,
    iterations: usize,
    /// Mean power per channel and base station, sorted by base station.
    channel_power: BTreeMap<usize, Vec<(usize, f64)>>,
}

impl PowerProfile {
    pub fn empty(noise_psd_w_hz: f64, log_base: LogBase) -> Self {
        PowerProfile {
            links: Vec::new(),
            powers: Vec::new(),
            noise_psd_w_hz,
            log_base,
            iterations: 0,
            channel_power: BTreeMap::new(),
        }
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn log_base(&self) -> LogBase {
        self.log_base
    }

    pub fn noise(&self, bandwidth_hz: f64) -> f64 {
        self.noise_psd_w_hz * bandwidth_hz
    }

    /// Power of the first link from `bs` to `user`, if any.
    pub fn power(&self, bs: usize, user: usize) -> Option<f64> {
        self.links
            .iter()
            .position(|l| l.bs == bs && l.user == user)
            .map(|i| self.powers[i])
    }

    /// Association indicator: whether `bs` serves `user` on any channel.
    pub fn is_associated(&self, bs: usize, user: usize) -> bool {
        self.links.iter().any(|l| l.bs == bs && l.user == user)
    }

    /// Time-averaged power radiated by `bs` on `channel`.
    pub fn channel_power(&self, bs: usize, channel: usize) -> f64 {
        self.channel_power
            .get(&channel)
            .and_then(|v| v.iter().find(|(b, _)| *b == bs))
            .map_or(0.0, |&(_, p)| p)
    }

    /// Co-channel interference at `user` from every base station other than
    /// `serving_bs` transmitting on `channel`.
    pub fn interference(&self, gains: &GainMatrix, user: usize, serving_bs: usize, channel: usize) -> f64 {
        self.channel_power.get(&channel).map_or(0.0, |v| {
            v.iter()
                .filter(|(bs, _)| *bs != serving_bs)
                .map(|&(bs, p)| gains.bs[bs][user] * p)
                .sum()
        })
    }

    /// Largest relative violation of the power equation over uncapped links.
    pub fn max_relative_residual(&self, gains: &GainMatrix, cap: Option<f64>) -> f64 {
        self.links
            .iter()
            .zip(&self.powers)
            .filter(|(_, &p)| cap.is_none_or(|c| p < c))
            .map(|(l, &p)| {
                let target = required_power(self, gains, l);
                if target == 0.0 && p == 0.0 {
                    0.0
                } else {
                    (target - p).abs() / target.abs().max(p.abs())
                }
            })
            .fold(0.0, f64::max)
    }

    fn refresh_channel_power(&mut self) {
        let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for (l, &p) in self.links.iter().zip(&self.powers) {
            let e = acc.entry((l.bs, l.channel)).or_insert((0.0, 0));
            e.0 += p;
            e.1 += 1;
        }
        self.channel_power.clear();
        for ((bs, channel), (sum, n)) in acc {
            self.channel_power.entry(channel).or_default().push((bs, sum / n as f64));
        }
    }
}

fn required_power(profile: &PowerProfile, gains: &GainMatrix, link: &Link) -> f64 {
    let snr = profile.log_base.expm1(link.rate_bps / link.bandwidth_hz);
    if snr == 0.0 {
        return 0.0;
    }
    let i = profile.interference(gains, link.user, link.bs, link.channel);
    snr * (profile.noise(link.bandwidth_hz) + i) / gains.bs[link.bs][link.user]
}

/// Solves the coupled power equations
/// `p_l = (exp(r_l / w_l) - 1) (noise + I_l(p)) / g_l` for every link by
/// Jacobi iteration from zero power.
///
/// The iteration is monotone, so it either converges to the least fixed
/// point or grows without bound; the latter is reported as
/// [`Error::Infeasible`]. With a power cap the projected iteration always
/// converges.
pub fn solve_power_profile(links: &[Link], gains: &GainMatrix, solver: &PowerSolver) -> Result<PowerProfile> {
    for l in links {
        if !(l.rate_bps >= 0.0 && l.bandwidth_hz > 0.0) {
            return Err(Error::config(format!("invalid link demand {l:?}")));
        }
    }
    let mut profile = PowerProfile {
        links: links.to_vec(),
        powers: vec![0.0; links.len()],
        noise_psd_w_hz: solver.noise_psd_w_hz,
        log_base: solver.log_base,
        iterations: 0,
        channel_power: BTreeMap::new(),
    };
    if links.is_empty() {
        return Ok(profile);
    }
    let snr: Vec<f64> = links.iter().map(|l| solver.log_base.expm1(l.rate_bps / l.bandwidth_hz)).collect();

    let mut residual = f64::INFINITY;
    for iter in 1..=solver.max_iterations {
        profile.refresh_channel_power();
        let mut next = Vec::with_capacity(links.len());
        let mut change: f64 = 0.0;
        for (idx, l) in links.iter().enumerate() {
            let p = if snr[idx] == 0.0 {
                0.0
            } else {
                let i = profile.interference(gains, l.user, l.bs, l.channel);
                let raw = snr[idx] * (profile.noise(l.bandwidth_hz) + i) / gains.bs[l.bs][l.user];
                solver.power_cap_w.map_or(raw, |c| raw.min(c))
            };
            let old = profile.powers[idx];
            if p > 0.0 {
                change = change.max((p - old).abs() / p);
            }
            next.push(p);
        }
        profile.powers = next;
        profile.iterations = iter;
        residual = change;
        if profile.powers.iter().any(|p| !p.is_finite() || *p > 1e100) {
            break;
        }
        if change <= solver.tolerance {
            profile.refresh_channel_power();
            return Ok(profile);
        }
    }
    Err(Error::Infeasible { iterations: profile.iterations, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn solver(noise: f64) -> PowerSolver {
        PowerSolver::new(noise, LogBase::Natural)
    }

    #[test]
    fn zero_demand_zero_power() {
        let gains = GainMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.3, 1.0]], vec![]);
        let links = [
            Link { user: 0, bs: 0, channel: 0, rate_bps: 0.0, bandwidth_hz: 1.0 },
            Link { user: 1, bs: 1, channel: 0, rate_bps: 0.0, bandwidth_hz: 1.0 },
        ];
        let p = solve_power_profile(&links, &gains, &solver(1.0)).unwrap();
        assert_eq!(p.powers(), &[0.0, 0.0]);
    }

    #[test]
    fn single_link_closed_form() {
        let gains = GainMatrix::from_rows(vec![vec![1.0]], vec![]);
        let links = [Link { user: 0, bs: 0, channel: 0, rate_bps: 1.0, bandwidth_hz: 1.0 }];
        let p = solve_power_profile(&links, &gains, &solver(1.0)).unwrap();
        assert!((p.powers()[0] - (E - 1.0)).abs() < 1e-12);
    }

    /// Cramer's rule on the 2x2 linear system, independent of the iteration.
    fn two_by_two_oracle(g: [[f64; 2]; 2], a: [f64; 2], noise: f64) -> [f64; 2] {
        // p0 g00 - a0 g10 p1 = a0 noise ; -a1 g01 p0 + p1 g11 = a1 noise
        let (m00, m01, m10, m11) = (g[0][0], -a[0] * g[1][0], -a[1] * g[0][1], g[1][1]);
        let (b0, b1) = (a[0] * noise, a[1] * noise);
        let det = m00 * m11 - m01 * m10;
        [(b0 * m11 - m01 * b1) / det, (m00 * b1 - m10 * b0) / det]
    }

    #[test]
    fn coupled_pair_matches_linear_solution() {
        // gains[bs][user]
        let g = [[0.8, 0.1], [0.2, 0.9]];
        let gains = GainMatrix::from_rows(vec![g[0].to_vec(), g[1].to_vec()], vec![]);
        let (r0, r1, w, noise) = (0.7, 1.1, 1.0, 0.5);
        let links = [
            Link { user: 0, bs: 0, channel: 3, rate_bps: r0, bandwidth_hz: w },
            Link { user: 1, bs: 1, channel: 3, rate_bps: r1, bandwidth_hz: w },
        ];
        let p = solve_power_profile(&links, &gains, &solver(noise)).unwrap();
        let expect = two_by_two_oracle(g, [r0.exp_m1(), r1.exp_m1()], noise);
        for (got, want) in p.powers().iter().zip(expect) {
            assert!((got / want - 1.0).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(p.max_relative_residual(&gains, None) <= 1e-8);
    }

    #[test]
    fn different_channels_do_not_interfere() {
        let gains = GainMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![]);
        let links = [
            Link { user: 0, bs: 0, channel: 0, rate_bps: 1.0, bandwidth_hz: 1.0 },
            Link { user: 1, bs: 1, channel: 1, rate_bps: 1.0, bandwidth_hz: 1.0 },
        ];
        let p = solve_power_profile(&links, &gains, &solver(1.0)).unwrap();
        assert!(p.powers().iter().all(|&x| (x - (E - 1.0)).abs() < 1e-12));
    }

    #[test]
    fn unsupportable_demands_are_infeasible() {
        // Equal cross and direct gains with SINR targets above 1 cannot be met.
        let gains = GainMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![]);
        let links = [
            Link { user: 0, bs: 0, channel: 0, rate_bps: 2.0, bandwidth_hz: 1.0 },
            Link { user: 1, bs: 1, channel: 0, rate_bps: 2.0, bandwidth_hz: 1.0 },
        ];
        let err = solve_power_profile(&links, &gains, &solver(1.0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn cap_makes_unsupportable_demands_converge() {
        let gains = GainMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![]);
        let links = [
            Link { user: 0, bs: 0, channel: 0, rate_bps: 2.0, bandwidth_hz: 1.0 },
            Link { user: 1, bs: 1, channel: 0, rate_bps: 2.0, bandwidth_hz: 1.0 },
        ];
        let s = solver(1.0).with_power_cap(Some(5.0));
        let p = solve_power_profile(&links, &gains, &s).unwrap();
        assert!(p.powers().iter().all(|&x| x == 5.0));
    }

    #[test]
    fn time_shared_links_average_power() {
        let gains = GainMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.1, 0.1]], vec![]);
        let links = [
            Link { user: 0, bs: 0, channel: 0, rate_bps: 1.0, bandwidth_hz: 1.0 },
            Link { user: 1, bs: 0, channel: 0, rate_bps: 1.0, bandwidth_hz: 1.0 },
        ];
        let p = solve_power_profile(&links, &gains, &solver(1.0)).unwrap();
        let mean = (p.powers()[0] + p.powers()[1]) / 2.0;
        assert!((p.channel_power(0, 0) - mean).abs() < 1e-15);
        assert_eq!(p.interference(&gains, 0, 1, 0), gains.bs[0][0] * mean);
    }
}
