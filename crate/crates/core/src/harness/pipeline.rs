use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, is_maximizer, Metrics, UserOutcome};
use super::scenario::Mechanism;
use crate::config::{LicensedReuse, ScenarioParams};
use crate::contract::{price_menu, valuation, Contract, ContractMenu, ExpectedQuantities, TypeGrid, ValuationParams};
use crate::error::Result;
use crate::matching::{
    chunk_files, deferred_acceptance, nominal_quota, promotion, user_preference_list, verify_bayesian_stability, Band,
    BsChannelPair, FileRequest, Matching, Rankings, UserSubfilePair,
};
use crate::net::{
    generate_scene, sample_activity, solve_power_profile, ChunkService, Link, NetworkScene, PowerProfile, PowerSolver,
    RadioContext,
};
use crate::stats::{mix_seed, Running};

const STREAM_SCENE: u64 = 1;
const STREAM_TYPES: u64 = 2;
const STREAM_LOADS: u64 = 3;
const STREAM_ACTIVITY: u64 = 4;
const STREAM_REALIZED: u64 = 5;
const STREAM_RANDOM: u64 = 6;

const LICENSED: usize = 0;
const UNLICENSED: usize = 1;

fn band_index(band: Band) -> usize {
    match band {
        Band::Licensed => LICENSED,
        Band::Unlicensed => UNLICENSED,
    }
}

/// Everything one replication produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub metrics: Metrics,
    pub users: Vec<UserOutcome>,
    pub menu: Vec<Contract>,
    pub expected: ExpectedQuantities,
    /// Expected valuations before ironing.
    pub raw_v_bar: Vec<f64>,
    pub ironed: bool,
    pub num_pairs: usize,
    pub num_options: usize,
    pub proposals: usize,
    pub rounds: usize,
    pub blocking_pairs: usize,
    /// Share of users whose realized utility peaks at their own type's contract.
    pub own_contract_fraction: f64,
}

impl ReplicationOutcome {
    pub fn contract_menu(&self) -> ContractMenu {
        ContractMenu { contracts: self.menu.clone() }
    }
}

/// Scene-derived option sets and radio constants.
struct Network {
    scene: NetworkScene,
    ctx: RadioContext,
    options: Vec<BsChannelPair>,
    bs_options: Vec<[Vec<usize>; 2]>,
    candidates: Vec<Vec<usize>>,
    user_options: Vec<[Vec<usize>; 2]>,
    reuse: LicensedReuse,
    solver: PowerSolver,
}

impl Network {
    fn build(scene: NetworkScene, params: &ScenarioParams) -> Self {
        let ctx = RadioContext::new(&scene, params);
        let radio = &params.radio;
        let demand = params.chunk_rate_demand();
        let quota_l = radio.quota_override_licensed.unwrap_or_else(|| {
            nominal_quota(ctx.licensed_rb_hz, radio.quota_snr_db_licensed, radio.log_base, demand)
        });
        let quota_u = radio.quota_override_unlicensed.unwrap_or_else(|| {
            nominal_quota(ctx.unlicensed_hz, radio.quota_snr_db_unlicensed, radio.log_base, demand)
        });
        let num_bs = scene.num_bs();
        let mut options = Vec::new();
        let mut bs_options = vec![[Vec::new(), Vec::new()]; num_bs];
        for (s, slots) in bs_options.iter_mut().enumerate() {
            let rbs: Vec<usize> = match radio.licensed_reuse {
                LicensedReuse::Partitioned => (s..scene.licensed_rbs).step_by(num_bs).collect(),
                LicensedReuse::Full => (0..scene.licensed_rbs).collect(),
            };
            for rb in rbs {
                slots[LICENSED].push(options.len());
                options.push(BsChannelPair { id: options.len(), bs: s, channel: rb, band: Band::Licensed, quota: quota_l });
            }
            for c in 0..scene.unlicensed_channels {
                slots[UNLICENSED].push(options.len());
                options.push(BsChannelPair { id: options.len(), bs: s, channel: c, band: Band::Unlicensed, quota: quota_u });
            }
        }
        let candidates: Vec<Vec<usize>> = (0..scene.num_users()).map(|i| scene.candidate_bs(i)).collect();
        let user_options = candidates
            .iter()
            .map(|cands| {
                let mut out = [Vec::new(), Vec::new()];
                for &s in cands {
                    for b in [LICENSED, UNLICENSED] {
                        out[b].extend_from_slice(&bs_options[s][b]);
                    }
                }
                out
            })
            .collect();
        let solver = PowerSolver::new(ctx.noise_psd_w_hz, ctx.log_base).with_power_cap(radio.power_cap_w);
        Network { scene, ctx, options, bs_options, candidates, user_options, reuse: radio.licensed_reuse, solver }
    }

    fn num_users(&self) -> usize {
        self.candidates.len()
    }

    fn bs_unlicensed_active(&self, load: &[u32]) -> Vec<bool> {
        self.bs_options.iter().map(|o| o[UNLICENSED].iter().any(|&m| load[m] > 0)).collect()
    }
}

/// Nominal network state under one type profile.
struct LoadSample {
    option_load: Vec<u32>,
    bs_active: Vec<bool>,
    licensed: PowerProfile,
}

/// Per-type chunk split and contract terms.
struct Plan {
    grid: TypeGrid,
    rates: Vec<f64>,
    alpha: Vec<f64>,
    eta_v: f64,
    kf: usize,
    licensed_chunks: Vec<usize>,
    demand: f64,
}

impl Plan {
    fn new(params: &ScenarioParams) -> Result<Self> {
        let grid = TypeGrid::from_params(&params.types)?;
        let m = &params.matching;
        let kf = m.file_size_bits.div_ceil(m.chunk_size_bits) as usize;
        let alpha = params.types.licensed_share();
        let licensed_chunks = alpha.iter().map(|a| (a * kf as f64).round() as usize).collect();
        Ok(Plan {
            grid,
            rates: params.types.required_rates(),
            alpha,
            eta_v: params.types.eta_v,
            kf,
            licensed_chunks,
            demand: params.chunk_rate_demand(),
        })
    }

    fn vparams(&self, k: usize) -> ValuationParams {
        ValuationParams::new(self.eta_v, self.rates[k])
    }

    fn chunks(&self, k: usize, band: usize) -> usize {
        if band == LICENSED {
            self.licensed_chunks[k]
        } else {
            self.kf - self.licensed_chunks[k]
        }
    }

    /// Valuation of contract `k` at service factors `(sl, su)`.
    fn contract_valuation(&self, k: usize, sl: f64, su: f64) -> f64 {
        self.user_valuation(k, k, sl, su)
    }

    /// Valuation a type-`k` user puts on the service of contract `j`,
    /// measured against its own rate requirement.
    fn user_valuation(&self, k: usize, j: usize, sl: f64, su: f64) -> f64 {
        let r = self.rates[j] * (self.alpha[j] * sl + (1.0 - self.alpha[j]) * su);
        valuation(r, &self.vparams(k))
    }
}

fn load_sample(net: &Network, plan: &Plan, profile: &[usize]) -> Result<LoadSample> {
    let mut expected = vec![0.0; net.options.len()];
    for (i, &k) in profile.iter().enumerate() {
        for b in [LICENSED, UNLICENSED] {
            let opts = &net.user_options[i][b];
            let n = plan.chunks(k, b);
            if n > 0 && !opts.is_empty() {
                let share = n as f64 / opts.len() as f64;
                for &m in opts {
                    expected[m] += share;
                }
            }
        }
    }
    let option_load: Vec<u32> = expected
        .iter()
        .zip(&net.options)
        .map(|(&x, o)| if x > 0.0 { (x.ceil() as u32).min(o.quota.max(1)) } else { 0 })
        .collect();
    let bs_active = net.bs_unlicensed_active(&option_load);
    let licensed = match net.reuse {
        LicensedReuse::Partitioned => PowerProfile::empty(net.ctx.noise_psd_w_hz, net.ctx.log_base),
        LicensedReuse::Full => {
            // One representative link per busy block: the lowest-id user
            // whose nearest base station owns it.
            let mut rep = vec![None; net.scene.num_bs()];
            for (i, c) in net.candidates.iter().enumerate() {
                rep[c[0]].get_or_insert(i);
            }
            let links: Vec<Link> = net
                .options
                .iter()
                .filter(|o| o.band == Band::Licensed && option_load[o.id] > 0)
                .filter_map(|o| {
                    rep[o.bs].map(|user| Link {
                        user,
                        bs: o.bs,
                        channel: o.channel,
                        rate_bps: option_load[o.id] as f64 * plan.demand,
                        bandwidth_hz: net.ctx.licensed_rb_hz,
                    })
                })
                .collect();
            solve_power_profile(&links, &net.ctx.gains, &net.solver)?
        }
    };
    Ok(LoadSample { option_load, bs_active, licensed })
}

/// WiFi interference at `user` per unlicensed channel, one row per slot.
fn wifi_by_channel(net: &Network, user: usize, activity: &[Vec<bool>]) -> Vec<Vec<f64>> {
    let channels = net.scene.unlicensed_channels;
    activity
        .iter()
        .map(|slot| {
            let mut row = vec![0.0; channels];
            for (w, (&c, &on)) in net.ctx.wap_channels.iter().zip(slot).enumerate() {
                if on {
                    row[c] += net.ctx.wap_power_w * net.ctx.gains.wap[w][user];
                }
            }
            row
        })
        .collect()
}

fn service(net: &Network, user: usize, m: usize, load: u32, target: f64) -> ChunkService {
    let o = &net.options[m];
    ChunkService {
        user,
        bs: o.bs,
        licensed_rb: o.channel,
        unlicensed_channel: o.channel,
        licensed_load: load.max(1),
        unlicensed_load: load.max(1),
        target_bps: target,
    }
}

/// Expected delivered fraction of the chunk-rate demand on every option a
/// user can reach, indexed like `user_options`.
fn expected_factors(net: &Network, plan: &Plan, loads: &[LoadSample], activity: &[Vec<bool>]) -> Vec<[Vec<f64>; 2]> {
    let demand = plan.demand;
    (0..net.num_users())
        .map(|i| {
            if demand <= 0.0 {
                return [vec![1.0; net.user_options[i][0].len()], vec![1.0; net.user_options[i][1].len()]];
            }
            // Slot t pairs with load sample t mod |loads|.
            let weights: Vec<f64> = (0..loads.len())
                .map(|j| (activity.len() + loads.len() - 1 - j) / loads.len())
                .map(|c| c as f64 / activity.len() as f64)
                .collect();
            let lic = net.user_options[i][LICENSED]
                .iter()
                .map(|&m| {
                    loads
                        .iter()
                        .zip(&weights)
                        .map(|(l, w)| {
                            let svc = service(net, i, m, l.option_load[m], demand);
                            w * net.ctx.licensed_chunk_rate(&l.licensed, &svc) / demand
                        })
                        .sum()
                })
                .collect();
            let wifi = wifi_by_channel(net, i, activity);
            let bs_interference: Vec<Vec<f64>> = net.candidates[i]
                .iter()
                .map(|&s| loads.iter().map(|l| net.ctx.bs_unlicensed_interference(i, s, &l.bs_active)).collect())
                .collect();
            let unl = net.user_options[i][UNLICENSED]
                .iter()
                .map(|&m| {
                    let o = &net.options[m];
                    let ci = net.candidates[i].iter().position(|&s| s == o.bs).unwrap();
                    let mut acc = 0.0;
                    for (t, row) in wifi.iter().enumerate() {
                        let j = t % loads.len();
                        let svc = service(net, i, m, loads[j].option_load[m], demand);
                        acc += net.ctx.unlicensed_chunk_rate_with(&svc, bs_interference[ci][j] + row[o.channel]);
                    }
                    acc / (activity.len() as f64 * demand)
                })
                .collect();
            [lic, unl]
        })
        .collect()
}

/// Mean factor over the nearest base station's options in each band.
fn nearest_factors(net: &Network, factors: &[[Vec<f64>; 2]]) -> Vec<(f64, f64)> {
    (0..net.num_users())
        .map(|i| {
            let nearest = net.candidates[i][0];
            let mean = |b: usize| {
                let n = net.bs_options[nearest][b].len();
                if n == 0 {
                    0.0
                } else {
                    // The nearest base station's options come first.
                    factors[i][b][..n].iter().sum::<f64>() / n as f64
                }
            };
            (mean(LICENSED), mean(UNLICENSED))
        })
        .collect()
}

struct Allocation {
    matching: Matching,
    pairs: Vec<UserSubfilePair>,
    blocking_pairs: usize,
}

fn build_pairs(net: &Network, plan: &Plan, params: &ScenarioParams, types: &[usize]) -> Result<(Vec<UserSubfilePair>, Vec<usize>)> {
    let requests: Vec<FileRequest> =
        (0..net.num_users()).map(|user| FileRequest { user, file: 0, size_bits: params.matching.file_size_bits }).collect();
    let mut pairs = chunk_files(&requests, params.matching.chunk_size_bits, params.matching.pad_last_chunk)?;
    let bands = pairs
        .iter_mut()
        .map(|p| {
            let k = types[p.user];
            p.type_index = k;
            p.theta = plan.grid.theta(k);
            if p.chunk_index < plan.licensed_chunks[k] {
                LICENSED
            } else {
                UNLICENSED
            }
        })
        .collect();
    Ok((pairs, bands))
}

#[allow(clippy::too_many_arguments)]
fn bayesian_matching(
    net: &Network,
    plan: &Plan,
    params: &ScenarioParams,
    types: &[usize],
    prices: &[f64],
    factors: &[[Vec<f64>; 2]],
    loads: &[LoadSample],
) -> Result<Allocation> {
    let (mut pairs, pair_band) = build_pairs(net, plan, params, types)?;
    let kf = plan.kf as f64;
    // Chunks of one user in one band share a preference list.
    let prefs: Vec<[Vec<(usize, f64)>; 2]> = (0..net.num_users())
        .map(|i| {
            let k = types[i];
            [LICENSED, UNLICENSED].map(|b| {
                let opts = &net.user_options[i][b];
                user_preference_list(opts, |m| {
                    let j = opts.iter().position(|&x| x == m).unwrap();
                    let r = plan.rates[k] * factors[i][b][j];
                    (plan.grid.theta(k) * valuation(r, &plan.vparams(k)) - prices[k]) / kf
                })
            })
        })
        .collect();
    for (p, &b) in pairs.iter_mut().zip(&pair_band) {
        p.set_preferences(prefs[p.user][b].clone());
    }

    let cpw = params.radio.cost_per_watt;
    let cost = |user: usize, k: usize, o: &BsChannelPair| -> f64 {
        match o.band {
            Band::Licensed => {
                let i = loads.iter().map(|l| l.licensed.interference(&net.ctx.gains, user, o.bs, o.channel)).sum::<f64>()
                    / loads.len() as f64;
                net.ctx.licensed_power_for(user, o.bs, o.quota as f64 * plan.rates[k], i) * cpw
            }
            Band::Unlicensed => net.ctx.bs_unlicensed_power_w * cpw,
        }
    };
    let rankings = Rankings::build(&pairs, &net.options, params.matching.priority_coeffs, |pair, option, prio| {
        let c = cost(pair.user, pair.type_index, option);
        let gamma = prices[pair.type_index] / kf - c;
        Ok((gamma, promotion(c, pair.theta, prio.priority_coeff)?))
    })?;
    let matching = deferred_acceptance(&mut pairs, &net.options, &rankings);
    let blocking_pairs = verify_bayesian_stability(&matching, &pairs, &net.options, &rankings, 0.0).blocking.len();
    Ok(Allocation { matching, pairs, blocking_pairs })
}

fn random_matching(net: &Network, plan: &Plan, params: &ScenarioParams, types: &[usize], seed: u64) -> Result<Allocation> {
    let (pairs, _) = build_pairs(net, plan, params, types)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_RANDOM));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let mut held = vec![0u32; net.options.len()];
    let mut assignment = vec![None; pairs.len()];
    for a in order {
        let opts = &net.user_options[pairs[a].user];
        let open: Vec<usize> = opts[LICENSED].iter().chain(&opts[UNLICENSED]).copied().filter(|&m| held[m] < net.options[m].quota).collect();
        if let Some(&m) = open.choose(&mut rng) {
            held[m] += 1;
            assignment[a] = Some(m);
        }
    }
    let matching = Matching::from_assignment(assignment, &net.options)?;
    Ok(Allocation { matching, pairs, blocking_pairs: 0 })
}

/// Delivered rate and demand factor of every matched chunk.
struct Realized {
    rate: Vec<f64>,
    factor: Vec<f64>,
    factor_se: Vec<f64>,
}

fn realize(net: &Network, plan: &Plan, params: &ScenarioParams, alloc: &Allocation, seed: u64) -> Result<Realized> {
    let options = &net.options;
    let load: Vec<u32> = (0..options.len()).map(|m| alloc.matching.accepted(m).len() as u32).collect();
    let bs_active = net.bs_unlicensed_active(&load);
    let licensed = match net.reuse {
        LicensedReuse::Partitioned => PowerProfile::empty(net.ctx.noise_psd_w_hz, net.ctx.log_base),
        LicensedReuse::Full => {
            let links: Vec<Link> = alloc
                .pairs
                .iter()
                .enumerate()
                .filter_map(|(a, p)| {
                    let m = alloc.matching.of_pair(a)?;
                    let o = &options[m];
                    (o.band == Band::Licensed).then(|| Link {
                        user: p.user,
                        bs: o.bs,
                        channel: o.channel,
                        rate_bps: load[m] as f64 * plan.rates[p.type_index],
                        bandwidth_hz: net.ctx.licensed_rb_hz,
                    })
                })
                .collect();
            solve_power_profile(&links, &net.ctx.gains, &net.solver)?
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_REALIZED));
    let activity = sample_activity(
        net.scene.num_waps(),
        params.radio.wifi_activity,
        params.monte_carlo.realized_slots,
        &mut rng,
    );
    let demand = plan.demand;
    let mut out = Realized { rate: vec![0.0; alloc.pairs.len()], factor: vec![0.0; alloc.pairs.len()], factor_se: vec![0.0; alloc.pairs.len()] };
    let mut wifi_cache: Option<(usize, Vec<Vec<f64>>)> = None;
    for (a, p) in alloc.pairs.iter().enumerate() {
        let Some(m) = alloc.matching.of_pair(a) else { continue };
        let o = &options[m];
        let target = plan.rates[p.type_index];
        let svc = service(net, p.user, m, load[m], target);
        match o.band {
            Band::Licensed => {
                out.rate[a] = net.ctx.licensed_chunk_rate(&licensed, &svc);
                out.factor[a] = if demand > 0.0 {
                    net.ctx.licensed_chunk_rate(&licensed, &ChunkService { target_bps: demand, ..svc }) / demand
                } else {
                    1.0
                };
            }
            Band::Unlicensed => {
                if wifi_cache.as_ref().map(|c| c.0) != Some(p.user) {
                    wifi_cache = Some((p.user, wifi_by_channel(net, p.user, &activity)));
                }
                let wifi = &wifi_cache.as_ref().unwrap().1;
                let bs_i = net.ctx.bs_unlicensed_interference(p.user, o.bs, &bs_active);
                let mut rate = Running::default();
                let mut factor = Running::default();
                let at_demand = ChunkService { target_bps: demand, ..svc };
                for row in wifi {
                    let i = bs_i + row[o.channel];
                    rate.push(net.ctx.unlicensed_chunk_rate_with(&svc, i));
                    if demand > 0.0 {
                        factor.push(net.ctx.unlicensed_chunk_rate_with(&at_demand, i) / demand);
                    }
                }
                out.rate[a] = rate.estimate().mean;
                if demand > 0.0 {
                    let f = factor.estimate();
                    out.factor[a] = f.mean;
                    out.factor_se[a] = f.stderr;
                } else {
                    out.factor[a] = 1.0;
                }
            }
        }
    }
    Ok(out)
}

/// Mean cost of serving one file under each type's contract: licensed
/// chunks at the nearest base station's full-load power, unlicensed chunks
/// at the fixed unlicensed power.
fn expected_costs(net: &Network, plan: &Plan, cost_per_watt: f64) -> Vec<f64> {
    let n = net.num_users();
    (0..plan.grid.len())
        .map(|k| {
            if n == 0 {
                return 0.0;
            }
            let licensed: f64 = (0..n)
                .map(|i| {
                    let s = net.candidates[i][0];
                    net.bs_options[s][LICENSED].first().map_or(0.0, |&m| {
                        let q = net.options[m].quota as f64;
                        net.ctx.licensed_power_for(i, s, q * plan.rates[k], 0.0)
                    })
                })
                .sum::<f64>()
                / n as f64;
            let per_file = plan.chunks(k, LICENSED) as f64 * licensed
                + plan.chunks(k, UNLICENSED) as f64 * net.ctx.bs_unlicensed_power_w;
            per_file * cost_per_watt
        })
        .collect()
}

/// Runs one replication of `mechanism` at `params` from `seed`.
/// The topology a replication with `seed` runs on.
pub fn replication_scene(params: &ScenarioParams, seed: u64) -> Result<NetworkScene> {
    generate_scene(&params.scene, mix_seed(seed, STREAM_SCENE))
}

pub fn run_replication(params: &ScenarioParams, mechanism: Mechanism, seed: u64) -> Result<ReplicationOutcome> {
    params.validate()?;
    let plan = Plan::new(params)?;
    let k_types = plan.grid.len();
    let scene = replication_scene(params, seed)?;
    let net = Network::build(scene, params);
    let n = net.num_users();

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_TYPES));
    let types: Vec<usize> = (0..n).map(|_| plan.grid.sample_index(rng.gen())).collect();

    let profiles: Vec<Vec<usize>> = match mechanism {
        Mechanism::CompleteInfo => vec![types.clone()],
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_LOADS));
            (0..params.monte_carlo.type_samples)
                .map(|_| (0..n).map(|_| plan.grid.sample_index(rng.gen())).collect())
                .collect()
        }
    };
    let loads = profiles.iter().map(|p| load_sample(&net, &plan, p)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_ACTIVITY));
    let activity = sample_activity(net.scene.num_waps(), params.radio.wifi_activity, params.monte_carlo.activity_slots, &mut rng);
    let factors = expected_factors(&net, &plan, &loads, &activity);
    let nearest = nearest_factors(&net, &factors);

    let raw_v_bar: Vec<f64> = (0..k_types)
        .map(|k| {
            if n == 0 {
                return plan.vparams(k).v_offset;
            }
            nearest.iter().map(|&(sl, su)| plan.contract_valuation(k, sl, su)).sum::<f64>() / n as f64
        })
        .collect();
    let (v_bar, optimal) = price_menu(&raw_v_bar, &plan.grid)?;
    let ironed = v_bar != raw_v_bar;
    let prices = match mechanism {
        Mechanism::Uniform => vec![optimal.iter().sum::<f64>() / k_types as f64; k_types],
        _ => optimal,
    };
    let menu: Vec<Contract> = (0..k_types)
        .map(|k| Contract { alpha: plan.alpha[k], beta: 1.0 - plan.alpha[k], price: prices[k] })
        .collect();

    let alloc = match mechanism {
        Mechanism::Random => random_matching(&net, &plan, params, &types, seed)?,
        _ => bayesian_matching(&net, &plan, params, &types, &prices, &factors, &loads)?,
    };
    let realized = realize(&net, &plan, params, &alloc, seed)?;

    // Per-user aggregation over chunks.
    let mut requested = vec![0u64; n];
    let mut bits = vec![[0u64; 3]; n];
    let mut weighted_rate = vec![0.0; n];
    let mut served_bits = vec![[0u64; 2]; n];
    let mut band_factor = vec![[0.0; 2]; n];
    let mut unl_se = vec![0.0f64; n];
    for (a, p) in alloc.pairs.iter().enumerate() {
        let i = p.user;
        requested[i] += p.chunk_bits;
        match alloc.matching.of_pair(a).map(|m| net.options[m].band) {
            Some(band) => {
                let slot = band_index(band);
                bits[i][slot] += p.chunk_bits;
                weighted_rate[i] += p.chunk_bits as f64 * realized.rate[a];
                served_bits[i][slot] += p.chunk_bits;
                band_factor[i][slot] += p.chunk_bits as f64 * realized.factor[a];
                unl_se[i] = unl_se[i].max(realized.factor_se[a]);
            }
            None => bits[i][2] += p.chunk_bits,
        }
    }
    let mut own_best = 0usize;
    let users: Vec<UserOutcome> = (0..n)
        .map(|i| {
            let k = types[i];
            let req = requested[i];
            let rate = if req > 0 { weighted_rate[i] / req as f64 } else { 0.0 };
            let matched = bits[i][LICENSED] + bits[i][UNLICENSED];
            let payment = if req > 0 { prices[k] * matched as f64 / req as f64 } else { 0.0 };
            let utility = plan.grid.theta(k) * valuation(rate, &plan.vparams(k)) - payment;

            // Service quality seen on each band; expected factors stand in
            // for a band that served nothing.
            let factor = |b: usize, fallback: f64| {
                if served_bits[i][b] > 0 {
                    band_factor[i][b] / served_bits[i][b] as f64
                } else {
                    fallback
                }
            };
            let (sl, su) = (factor(LICENSED, nearest[i].0), factor(UNLICENSED, nearest[i].1));
            let at = |su: f64| -> Vec<f64> {
                (0..k_types).map(|j| plan.grid.theta(k) * plan.contract_valuation(j, sl, su) - prices[j]).collect()
            };
            let base = at(su);
            let tol = at(su + 3.0 * unl_se[i]).iter().zip(&base).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if is_maximizer(&base, k, tol + 1e-12 * base.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                own_best += 1;
            }
            UserOutcome {
                type_index: k,
                required_rate_bps: plan.rates[k],
                rate_bps: rate,
                utility,
                licensed_bits: bits[i][LICENSED],
                offloaded_bits: bits[i][UNLICENSED],
                unmatched_bits: bits[i][2],
            }
        })
        .collect();

    let c_bar = expected_costs(&net, &plan, params.radio.cost_per_watt);
    let expected = ExpectedQuantities::new(&plan.grid, v_bar, prices, c_bar)?;
    Ok(ReplicationOutcome {
        metrics: compute_metrics(&users, k_types),
        users,
        menu,
        expected,
        raw_v_bar,
        ironed,
        num_pairs: alloc.pairs.len(),
        num_options: net.options.len(),
        proposals: alloc.matching.proposals,
        rounds: alloc.matching.rounds,
        blocking_pairs: alloc.blocking_pairs,
        own_contract_fraction: if n == 0 { 1.0 } else { own_best as f64 / n as f64 },
    })
}
