use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use lteu_core::config::SceneParams;
use lteu_core::harness::{run_replication, Mechanism};
use lteu_core::matching::{deferred_acceptance, Band, BsChannelPair, Rankings, UserSubfilePair};
use lteu_core::net::{generate_scene, solve_power_profile, GainMatrix, Link, PowerSolver};
use lteu_core::{LogBase, ScenarioParams};

fn power_solve(c: &mut Criterion) {
    let scene = generate_scene(&SceneParams::default(), 1).unwrap();
    let gains = GainMatrix::from_scene(&scene);
    // One link per base station to its first attached user, all on block 0.
    let links: Vec<Link> = (0..scene.num_bs())
        .filter_map(|s| (0..scene.num_users()).find(|&u| scene.nearest_bs(u) == Some(s)).map(|u| (s, u)))
        .map(|(s, u)| Link { user: u, bs: s, channel: 0, rate_bps: 0.5e6, bandwidth_hz: 8.33e6 })
        .collect();
    let solver = PowerSolver::new(lteu_core::net::dbm_to_watts(-174.0), LogBase::Natural);
    c.bench_function("power_solve_cochannel", |b| b.iter(|| solve_power_profile(black_box(&links), &gains, &solver).unwrap()));
}

fn matching(c: &mut Criterion) {
    let (np, no) = (2000, 60);
    let options: Vec<BsChannelPair> =
        (0..no).map(|id| BsChannelPair { id, bs: id / 3, channel: id % 3, band: Band::Licensed, quota: 30 }).collect();
    let pairs: Vec<UserSubfilePair> = (0..np)
        .map(|id| UserSubfilePair {
            id,
            user: id / 10,
            file: 0,
            chunk_index: id % 10,
            chunk_bits: 1,
            type_index: 0,
            theta: 1.0,
            pref_list: (0..8).map(|j| (id * 7 + j * 13) % no).collect(),
            pref_utilities: (0..8).map(|j| (8 - j) as f64).collect(),
            next: 0,
        })
        .collect();
    let orders: Vec<Vec<usize>> = (0..no).map(|m| (0..np).map(|a| (a * 31 + m * 17) % np).collect()).collect();
    let rankings = Rankings::from_orders(&orders);
    c.bench_function("deferred_acceptance_2000x60", |b| {
        b.iter_batched(|| pairs.clone(), |mut p| deferred_acceptance(&mut p, &options, &rankings), BatchSize::LargeInput)
    });
}

fn replication(c: &mut Criterion) {
    let mut group = c.benchmark_group("replication");
    group.sample_size(10);
    for users in [200, 1000] {
        let mut params = ScenarioParams::default();
        params.scene.num_users = users;
        group.bench_function(format!("proposed_{users}_users"), |b| {
            b.iter(|| run_replication(black_box(&params), Mechanism::Proposed, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, power_solve, matching, replication);
criterion_main!(benches);
