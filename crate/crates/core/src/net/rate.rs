use rand::Rng;

use super::channel::{dbm_to_watts, GainMatrix};
use super::power::PowerProfile;
use super::scene::NetworkScene;
use crate::config::{LogBase, ScenarioParams};
use crate::stats::{Estimate, Running};

/// `w log(1 + sinr)` in the configured logarithm base.
pub fn shannon_rate(bandwidth_hz: f64, sinr: f64, base: LogBase) -> f64 {
    bandwidth_hz * base.log1p(sinr)
}

/// Licensed-band rate of link `link` in `profile`, with interference
/// summed over every other base station active on the same resource block.
pub fn licensed_rate(profile: &PowerProfile, gains: &GainMatrix, link: usize) -> f64 {
    let l = profile.links()[link];
    let p = profile.powers()[link];
    if p == 0.0 {
        return 0.0;
    }
    let i = profile.interference(gains, l.user, l.bs, l.channel);
    let sinr = p * gains.bs[l.bs][l.user] / (profile.noise(l.bandwidth_hz) + i);
    shannon_rate(l.bandwidth_hz, sinr, profile.log_base())
}

/// Unlicensed-band rate with listen-before-talk: zero whenever the sensed
/// interference exceeds `threshold_w`.
pub fn unlicensed_rate(
    signal_w: f64,
    noise_w: f64,
    interference_w: f64,
    threshold_w: f64,
    bandwidth_hz: f64,
    base: LogBase,
) -> f64 {
    if interference_w > threshold_w {
        return 0.0;
    }
    shannon_rate(bandwidth_hz, signal_w / (noise_w + interference_w), base)
}

/// Independent Bernoulli on/off state of every access point in each slot.
pub fn sample_activity<R: Rng>(num_waps: usize, p_active: f64, slots: usize, rng: &mut R) -> Vec<Vec<bool>> {
    (0..slots).map(|_| (0..num_waps).map(|_| rng.gen_bool(p_active)).collect()).collect()
}

/// Network load seen by one user under a sampled profile of other users'
/// types: which base stations transmit unlicensed and the licensed powers
/// that set co-channel interference.
#[derive(Debug, Clone)]
pub struct LoadState {
    pub unlicensed_active: Vec<bool>,
    pub licensed: PowerProfile,
}

/// Per-scene radio constants and gains; every rate evaluation goes through it.
#[derive(Debug, Clone)]
pub struct RadioContext {
    pub gains: GainMatrix,
    pub wap_channels: Vec<usize>,
    pub noise_psd_w_hz: f64,
    pub licensed_rb_hz: f64,
    pub unlicensed_hz: f64,
    pub bs_unlicensed_power_w: f64,
    pub wap_power_w: f64,
    pub threshold_w: f64,
    pub log_base: LogBase,
    pub power_cap_w: Option<f64>,
}

/// One chunk's service: the band resources it would use, how many chunks
/// time-share them and the rate it is contracted for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkService {
    pub user: usize,
    pub bs: usize,
    pub licensed_rb: usize,
    pub unlicensed_channel: usize,
    pub licensed_load: u32,
    pub unlicensed_load: u32,
    pub target_bps: f64,
}

impl RadioContext {
    pub fn new(scene: &NetworkScene, params: &ScenarioParams) -> Self {
        RadioContext {
            gains: GainMatrix::from_scene(scene),
            wap_channels: scene.wap_channels.clone(),
            noise_psd_w_hz: dbm_to_watts(scene.noise_psd_dbm_hz),
            licensed_rb_hz: params.radio.licensed_rb_hz(scene.licensed_rbs),
            unlicensed_hz: params.radio.unlicensed_channel_hz,
            bs_unlicensed_power_w: params.radio.bs_unlicensed_power_w,
            wap_power_w: params.radio.wap_power_w,
            threshold_w: params.radio.interference_threshold(&params.scene),
            log_base: params.radio.log_base,
            power_cap_w: params.radio.power_cap_w,
        }
    }

    pub fn licensed_noise(&self) -> f64 {
        self.noise_psd_w_hz * self.licensed_rb_hz
    }

    pub fn unlicensed_noise(&self) -> f64 {
        self.noise_psd_w_hz * self.unlicensed_hz
    }

    /// Power needed on a licensed resource block to reach `rate_bps`
    /// against interference `interference_w`.
    pub fn licensed_power_for(&self, user: usize, bs: usize, rate_bps: f64, interference_w: f64) -> f64 {
        let snr = self.log_base.expm1(rate_bps / self.licensed_rb_hz);
        snr * (self.licensed_noise() + interference_w) / self.gains.bs[bs][user]
    }

    /// Per-chunk licensed rate: the base station power-controls the chunk
    /// to its target while time-sharing the block with `licensed_load - 1`
    /// others; only a power cap can leave it short.
    pub fn licensed_chunk_rate(&self, load: &PowerProfile, svc: &ChunkService) -> f64 {
        if svc.target_bps == 0.0 {
            return 0.0;
        }
        let n = svc.licensed_load.max(1) as f64;
        let i = load.interference(&self.gains, svc.user, svc.bs, svc.licensed_rb);
        let needed = self.licensed_power_for(svc.user, svc.bs, n * svc.target_bps, i);
        match self.power_cap_w {
            Some(cap) if needed > cap => {
                let sinr = cap * self.gains.bs[svc.bs][svc.user] / (self.licensed_noise() + i);
                (shannon_rate(self.licensed_rb_hz, sinr, self.log_base) / n).min(svc.target_bps)
            }
            _ => svc.target_bps,
        }
    }

    /// Interference sensed by `user` on unlicensed `channel` from every other
    /// active base station and every active access point on that channel.
    pub fn unlicensed_interference(
        &self,
        user: usize,
        serving_bs: usize,
        channel: usize,
        bs_active: &[bool],
        wifi_active: &[bool],
    ) -> f64 {
        let from_bs: f64 = bs_active
            .iter()
            .enumerate()
            .filter(|&(s, &on)| on && s != serving_bs)
            .map(|(s, _)| self.bs_unlicensed_power_w * self.gains.bs[s][user])
            .sum();
        from_bs + self.wifi_interference(user, channel, wifi_active)
    }

    pub fn wifi_interference(&self, user: usize, channel: usize, wifi_active: &[bool]) -> f64 {
        self.wap_channels
            .iter()
            .zip(wifi_active)
            .enumerate()
            .filter(|&(_, (&c, &on))| on && c == channel)
            .map(|(w, _)| self.wap_power_w * self.gains.wap[w][user])
            .sum()
    }

    /// Sum of unlicensed interference from all active base stations except
    /// the serving one; split out so callers can reuse it across channels.
    pub fn bs_unlicensed_interference(&self, user: usize, serving_bs: usize, bs_active: &[bool]) -> f64 {
        self.unlicensed_interference(user, serving_bs, usize::MAX, bs_active, &[])
    }

    /// Per-chunk unlicensed rate given the total sensed interference,
    /// capped at the chunk's target.
    pub fn unlicensed_chunk_rate_with(&self, svc: &ChunkService, interference_w: f64) -> f64 {
        if svc.target_bps == 0.0 {
            return 0.0;
        }
        let n = svc.unlicensed_load.max(1) as f64;
        let signal = self.bs_unlicensed_power_w * self.gains.bs[svc.bs][svc.user];
        let r = unlicensed_rate(
            signal,
            self.unlicensed_noise(),
            interference_w,
            self.threshold_w,
            self.unlicensed_hz,
            self.log_base,
        );
        (r / n).min(svc.target_bps)
    }

    pub fn unlicensed_chunk_rate(&self, svc: &ChunkService, bs_active: &[bool], wifi_active: &[bool]) -> f64 {
        let i = self.unlicensed_interference(svc.user, svc.bs, svc.unlicensed_channel, bs_active, wifi_active);
        self.unlicensed_chunk_rate_with(svc, i)
    }
}

/// Monte-Carlo estimate of a chunk's rate when a `licensed_share` of the
/// user's traffic rides the licensed band and `unlicensed_share` the
/// unlicensed band. Sample `t` pairs load state `t mod |loads|` with
/// activity slot `t`, so the estimate has `|activity|` terms.
pub fn expected_rate(
    ctx: &RadioContext,
    svc: &ChunkService,
    licensed_share: f64,
    unlicensed_share: f64,
    loads: &[LoadState],
    activity: &[Vec<bool>],
) -> Estimate {
    assert!(!loads.is_empty() && !activity.is_empty(), "sample sets must be non-empty");
    let mut acc = Running::default();
    if licensed_share == 0.0 && unlicensed_share == 0.0 {
        activity.iter().for_each(|_| acc.push(0.0));
        return acc.estimate();
    }
    for (t, slot) in activity.iter().enumerate() {
        let load = &loads[t % loads.len()];
        let lic = if licensed_share > 0.0 { ctx.licensed_chunk_rate(&load.licensed, svc) } else { 0.0 };
        let unl = if unlicensed_share > 0.0 {
            ctx.unlicensed_chunk_rate(svc, &load.unlicensed_active, slot)
        } else {
            0.0
        };
        acc.push(licensed_share * lic + unlicensed_share * unl);
    }
    acc.estimate()
}
