use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pipeline::{run_replication, ReplicationOutcome};
use super::scenario::{Mechanism, Scenario};
use crate::config::ScenarioParams;
use crate::error::{Error, Result};
use crate::stats::{mix_seed, Estimate};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Seed of one replication; shared by every mechanism so comparisons are paired.
pub fn replication_seed(base_seed: u64, sweep_value: usize, replication: usize) -> u64 {
    mix_seed(mix_seed(base_seed, sweep_value as u64), replication as u64)
}

/// Git-style content hash: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

/// Metrics of one replication at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub sweep_value: usize,
    pub replication: usize,
    pub seed: u64,
    pub mean_rate_bps: f64,
    pub qos_fraction: f64,
    pub mean_user_utility: f64,
    pub offloaded_bits: Vec<u64>,
    pub licensed_bits: Vec<u64>,
    pub unmatched_bits: Vec<u64>,
    pub requested_bits: Vec<u64>,
    pub own_contract_fraction: f64,
    pub prices: Vec<f64>,
    pub ironed: bool,
    pub num_pairs: usize,
    pub num_options: usize,
    pub proposals: usize,
    pub rounds: usize,
    pub blocking_pairs: usize,
}

impl ExperimentRecord {
    pub fn from_outcome(sweep_value: usize, replication: usize, seed: u64, o: &ReplicationOutcome) -> Self {
        let m = &o.metrics;
        ExperimentRecord {
            sweep_value,
            replication,
            seed,
            mean_rate_bps: m.mean_rate_bps,
            qos_fraction: m.qos_fraction,
            mean_user_utility: m.mean_user_utility,
            offloaded_bits: m.offloaded_bits.clone(),
            licensed_bits: m.licensed_bits.clone(),
            unmatched_bits: m.unmatched_bits.clone(),
            requested_bits: m.requested_bits.clone(),
            own_contract_fraction: o.own_contract_fraction,
            prices: o.expected.pi_bar.clone(),
            ironed: o.ironed,
            num_pairs: o.num_pairs,
            num_options: o.num_options,
            proposals: o.proposals,
            rounds: o.rounds,
            blocking_pairs: o.blocking_pairs,
        }
    }

    pub fn offloaded_traffic(&self) -> u64 {
        self.offloaded_bits.iter().sum()
    }

    pub fn licensed_traffic(&self) -> u64 {
        self.licensed_bits.iter().sum()
    }

    pub fn unmatched_traffic(&self) -> u64 {
        self.unmatched_bits.iter().sum()
    }

    pub fn conserves_traffic(&self) -> bool {
        (0..self.requested_bits.len()).all(|k| {
            self.offloaded_bits[k].checked_add(self.licensed_bits[k]).and_then(|s| s.checked_add(self.unmatched_bits[k]))
                == Some(self.requested_bits[k])
        })
    }

    /// Named scalar metrics, per-type traffic included.
    pub fn scalars(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("mean_rate_bps".to_string(), self.mean_rate_bps),
            ("qos_fraction".to_string(), self.qos_fraction),
            ("mean_user_utility".to_string(), self.mean_user_utility),
            ("offloaded_traffic_bits".to_string(), self.offloaded_traffic() as f64),
            ("licensed_traffic_bits".to_string(), self.licensed_traffic() as f64),
            ("unmatched_traffic_bits".to_string(), self.unmatched_traffic() as f64),
            ("own_contract_fraction".to_string(), self.own_contract_fraction),
            ("proposals".to_string(), self.proposals as f64),
            ("blocking_pairs".to_string(), self.blocking_pairs as f64),
        ];
        for (k, (&off, &lic)) in self.offloaded_bits.iter().zip(&self.licensed_bits).enumerate() {
            out.push((format!("offloaded_traffic_bits_type{}", k + 1), off as f64));
            out.push((format!("licensed_traffic_bits_type{}", k + 1), lic as f64));
        }
        out
    }

    pub fn hash(&self) -> String {
        content_hash(serde_json::to_string(self).expect("records serialize").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub sweep_value: usize,
    pub replication: usize,
    pub seed: u64,
    pub error: String,
}

/// Mean and standard error of every metric at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub sweep_value: usize,
    pub replications: usize,
    pub metrics: BTreeMap<String, Estimate>,
}

impl SweepSummary {
    pub fn get(&self, metric: &str) -> Option<Estimate> {
        self.metrics.get(metric).copied()
    }

    pub fn mean(&self, metric: &str) -> f64 {
        self.get(metric).map_or(f64::NAN, |e| e.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<ReplicationFailure>,
}

impl ExperimentResult {
    pub fn summary(&self) -> Vec<SweepSummary> {
        self.scenario
            .params
            .experiment
            .sweep_values
            .iter()
            .map(|&v| {
                let recs: Vec<&ExperimentRecord> = self.records.iter().filter(|r| r.sweep_value == v).collect();
                let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for r in &recs {
                    for (name, x) in r.scalars() {
                        samples.entry(name).or_default().push(x);
                    }
                }
                SweepSummary {
                    sweep_value: v,
                    replications: recs.len(),
                    metrics: samples.into_iter().map(|(k, xs)| (k, Estimate::from_samples(&xs))).collect(),
                }
            })
            .collect()
    }

    /// One row per sweep point and metric.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sweep_value", "metric", "mean", "stderr", "seed"])?;
        let seed = self.scenario.params.experiment.base_seed.to_string();
        for s in self.summary() {
            for (name, e) in &s.metrics {
                w.write_record([s.sweep_value.to_string(), name.clone(), e.mean.to_string(), e.stderr.to_string(), seed.clone()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn manifest(&self) -> Manifest {
        Manifest::new(&self.scenario, &self.records)
    }

    /// Writes `<mechanism>.csv`, `<mechanism>_records.json` and
    /// `<mechanism>_manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let name = self.scenario.mechanism.name();
        let csv_path = dir.join(format!("{name}.csv"));
        fs::write(&csv_path, self.to_csv()?)?;
        let records_path = dir.join(format!("{name}_records.json"));
        fs::write(&records_path, serde_json::to_string_pretty(&self.records)?)?;
        let manifest_path = dir.join(format!("{name}_manifest.json"));
        fs::write(&manifest_path, self.manifest().to_json())?;
        Ok(vec![csv_path, records_path, manifest_path])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sweep_value: usize,
    pub replication: usize,
    pub seed: u64,
    pub record_hash: String,
}

/// Provenance for an experiment: the full scenario, its content hash and
/// the seed and hash of every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub mechanism: Mechanism,
    pub config_hash: String,
    pub scenario: ScenarioParams,
    pub records: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(scenario: &Scenario, records: &[ExperimentRecord]) -> Self {
        Manifest {
            format_version: MANIFEST_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            mechanism: scenario.mechanism,
            config_hash: content_hash(scenario.params.to_toml_string().as_bytes()),
            scenario: scenario.params.clone(),
            records: records
                .iter()
                .map(|r| ManifestEntry {
                    sweep_value: r.sweep_value,
                    replication: r.replication,
                    seed: r.seed,
                    record_hash: r.hash(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifests serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported manifest version {}", m.format_version)));
        }
        if content_hash(m.scenario.to_toml_string().as_bytes()) != m.config_hash {
            return Err(Error::Parse("manifest scenario does not match its hash".into()));
        }
        Ok(m)
    }

    pub fn scenario(&self) -> Scenario {
        Scenario { params: self.scenario.clone(), mechanism: self.mechanism }
    }

    /// Reruns entry `index` from its seed.
    pub fn replay(&self, index: usize) -> Result<ExperimentRecord> {
        let e = &self.records[index];
        let scenario = self.scenario();
        let outcome = run_replication(&scenario.params_at(e.sweep_value), self.mechanism, e.seed)?;
        Ok(ExperimentRecord::from_outcome(e.sweep_value, e.replication, e.seed, &outcome))
    }
}

/// Runs every replication at every sweep point in parallel; results are
/// ordered by sweep value, then replication.
pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentResult> {
    scenario.params.validate()?;
    let exp = &scenario.params.experiment;
    let tasks: Vec<(usize, usize)> =
        exp.sweep_values.iter().flat_map(|&v| (0..exp.replications).map(move |r| (v, r))).collect();
    let outcomes: Vec<(usize, usize, u64, Result<ReplicationOutcome>)> = tasks
        .par_iter()
        .map(|&(v, r)| {
            let seed = replication_seed(exp.base_seed, v, r);
            (v, r, seed, run_replication(&scenario.params_at(v), scenario.mechanism, seed))
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (v, r, seed, outcome) in outcomes {
        match outcome {
            Ok(o) => records.push(ExperimentRecord::from_outcome(v, r, seed, &o)),
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => failures.push(ReplicationFailure { sweep_value: v, replication: r, seed, error: e.to_string() }),
        }
    }
    Ok(ExperimentResult { scenario: scenario.clone(), records, failures })
}

pub fn run_proposed(scenario: &Scenario) -> Result<ExperimentResult> {
    run_experiment(&scenario.with_mechanism(Mechanism::Proposed))
}

pub fn run_complete_information(scenario: &Scenario) -> Result<ExperimentResult> {
    run_experiment(&scenario.with_mechanism(Mechanism::CompleteInfo))
}

pub fn run_uniform_pricing(scenario: &Scenario) -> Result<ExperimentResult> {
    run_experiment(&scenario.with_mechanism(Mechanism::Uniform))
}

pub fn run_random_allocation(scenario: &Scenario) -> Result<ExperimentResult> {
    run_experiment(&scenario.with_mechanism(Mechanism::Random))
}

/// Whether a curve sampled at increasing `xs` has flattened past `knee`:
/// every slope from `knee` on is at most `threshold` times the steepest
/// slope before it.
pub fn has_flattened(xs: &[usize], values: &[f64], knee: usize, threshold: f64) -> bool {
    assert_eq!(xs.len(), values.len(), "one value per sweep point");
    let slopes: Vec<(usize, usize, f64)> = xs
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| (x[0], x[1], (v[1] - v[0]) / (x[1] as f64 - x[0] as f64)))
        .collect();
    let early = slopes.iter().filter(|s| s.1 <= knee).map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let late: Vec<f64> = slopes.iter().filter(|s| s.0 >= knee).map(|s| s.2).collect();
    early > 0.0 && !late.is_empty() && late.iter().all(|&s| s <= threshold * early)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_style_hash() {
        // `printf 'hello\n' | git hash-object --stdin` under SHA-256 object format.
        assert_eq!(
            content_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn seeds_are_paired_and_distinct() {
        assert_eq!(replication_seed(1, 200, 0), replication_seed(1, 200, 0));
        assert_ne!(replication_seed(1, 200, 0), replication_seed(1, 200, 1));
        assert_ne!(replication_seed(1, 200, 0), replication_seed(1, 300, 0));
    }

    #[test]
    fn flattening_rule() {
        let xs = [200, 400, 600, 800, 1000];
        assert!(has_flattened(&xs, &[0.0, 10.0, 18.0, 19.0, 19.5], 600, 0.25));
        assert!(!has_flattened(&xs, &[0.0, 10.0, 20.0, 30.0, 40.0], 600, 0.25));
        assert!(!has_flattened(&xs, &[0.0, 10.0, 18.0, 23.0, 24.0], 600, 0.25));
        // No point past the knee.
        assert!(!has_flattened(&xs[..3], &[0.0, 10.0, 18.0], 600, 0.25));
    }
}
