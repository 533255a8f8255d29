//! Scenario configuration.
//!
//! Scenarios are keyed TOML documents. Every key is optional; omitted keys
//! take the defaults below, which follow the reference deployment (20 BSs,
//! 10 WiFi access points, 200 users in a 1 km square, 12 unlicensed
//! channels, 120 licensed resource blocks, 1 GHz total bandwidth,
//! -174 dBm/Hz noise, path-loss exponent 3, 50 Mbit files).
//!
//! ```toml
//! [scene]
//! num_bs = 20
//! num_waps = 10
//! num_users = 200
//! area_side_m = 1000.0
//! path_loss_exponent = 3.0
//! noise_psd_dbm_hz = -174.0
//! licensed_rbs = 120
//! unlicensed_channels = 12
//! bs_range_m = 200.0
//! wap_range_m = 90.0
//!
//! [radio]
//! total_bandwidth_hz = 1e9
//! unlicensed_channel_hz = 20e6
//! bs_unlicensed_power_w = 0.01
//! wap_power_w = 0.1
//! wifi_activity = 0.5
//! # interference_threshold_w = ...   (default: one WAP at wap_range_m)
//! # power_cap_w = ...                (default: uncapped)
//! log_base = "natural"               # or "binary"
//! licensed_reuse = "partitioned"     # or "full"
//! quota_snr_db_licensed = 0.0
//! quota_snr_db_unlicensed = 0.0
//! # chunk_rate_demand_bps = ...      (default: highest required rate)
//! # quota_override_licensed = 8
//! # quota_override_unlicensed = 19
//! cost_per_watt = 1.0
//!
//! [types]
//! rate_preset = "table"              # or "gbps" for the 200..650 Mbps classes
//! # required_rates_bps = [...]
//! # thetas = [...]                   (default: 1, 2, ..., K)
//! # probs = [...]                    (default: uniform)
//! # lower_bound = ...                (default: lowest theta)
//! # only_type = 3                    (1-based; population of a single type)
//! eta_v = 1e-12
//! # licensed_share = [...]           (default: linear from 0 to 1)
//!
//! [matching]
//! file_size_bits = 50000000
//! chunk_size_bits = 5000000
//! pad_last_chunk = false
//! priority_coeffs = [1.0, 2.0, 4.0]
//!
//! [monte_carlo]
//! type_samples = 16
//! activity_slots = 200
//! realized_slots = 200
//!
//! [experiment]
//! sweep_variable = "num_users"       # or "num_bs"
//! sweep_values = [200, 300, 400, 500, 600, 700, 800, 900, 1000]
//! replications = 20
//! base_seed = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Required rates (bit/s) of the six QoS classes in the reference table.
pub const TABLE_RATES_BPS: [f64; 6] = [0.0, 0.2e6, 0.4e6, 0.5e6, 0.6e6, 0.7e6];

/// The alternative six classes quoted in the experiment narrative
/// (200..650 Mbps). Shipped as a preset; it conflicts with the table.
pub const NARRATIVE_RATES_BPS: [f64; 6] = [200e6, 250e6, 350e6, 450e6, 550e6, 650e6];

/// Minimum transmitter-receiver distance for the path-loss law, in meters.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Binary,
}

impl LogBase {
    pub fn log1p(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln_1p(),
            LogBase::Binary => x.ln_1p() / std::f64::consts::LN_2,
        }
    }

    /// Inverse of `log1p`: the SINR needed for a spectral efficiency.
    pub fn expm1(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.exp_m1(),
            LogBase::Binary => (x * std::f64::consts::LN_2).exp_m1(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LicensedReuse {
    /// Resource blocks are split round-robin across base stations.
    #[default]
    Partitioned,
    /// Every base station may use every resource block.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RatePreset {
    #[default]
    Table,
    Gbps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub num_bs: usize,
    pub num_waps: usize,
    pub num_users: usize,
    pub area_side_m: f64,
    pub path_loss_exponent: f64,
    pub noise_psd_dbm_hz: f64,
    pub licensed_rbs: usize,
    pub unlicensed_channels: usize,
    pub bs_range_m: f64,
    pub wap_range_m: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            num_bs: 20,
            num_waps: 10,
            num_users: 200,
            area_side_m: 1000.0,
            path_loss_exponent: 3.0,
            noise_psd_dbm_hz: -174.0,
            licensed_rbs: 120,
            unlicensed_channels: 12,
            bs_range_m: 200.0,
            wap_range_m: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub total_bandwidth_hz: f64,
    pub unlicensed_channel_hz: f64,
    pub bs_unlicensed_power_w: f64,
    pub wap_power_w: f64,
    pub wifi_activity: f64,
    pub interference_threshold_w: Option<f64>,
    pub power_cap_w: Option<f64>,
    pub log_base: LogBase,
    pub licensed_reuse: LicensedReuse,
    pub quota_snr_db_licensed: f64,
    pub quota_snr_db_unlicensed: f64,
    pub chunk_rate_demand_bps: Option<f64>,
    pub quota_override_licensed: Option<u32>,
    pub quota_override_unlicensed: Option<u32>,
    pub cost_per_watt: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            total_bandwidth_hz: 1e9,
            unlicensed_channel_hz: 20e6,
            bs_unlicensed_power_w: 0.01,
            wap_power_w: 0.1,
            wifi_activity: 0.5,
            interference_threshold_w: None,
            power_cap_w: None,
            log_base: LogBase::Natural,
            licensed_reuse: LicensedReuse::Partitioned,
            quota_snr_db_licensed: 0.0,
            quota_snr_db_unlicensed: 0.0,
            chunk_rate_demand_bps: None,
            quota_override_licensed: None,
            quota_override_unlicensed: None,
            cost_per_watt: 1.0,
        }
    }
}

impl RadioParams {
    pub fn licensed_rb_hz(&self, licensed_rbs: usize) -> f64 {
        self.total_bandwidth_hz / licensed_rbs.max(1) as f64
    }

    /// Listen-before-talk threshold: explicit, or just below the power a
    /// single active access point delivers at its communication range.
    pub fn interference_threshold(&self, scene: &SceneParams) -> f64 {
        self.interference_threshold_w.unwrap_or_else(|| {
            let d = scene.wap_range_m.max(MIN_DISTANCE_M);
            0.999 * self.wap_power_w * d.powf(-scene.path_loss_exponent)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypeParams {
    pub rate_preset: RatePreset,
    pub required_rates_bps: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
    pub lower_bound: Option<f64>,
    pub only_type: Option<usize>,
    pub eta_v: f64,
    pub licensed_share: Option<Vec<f64>>,
}

impl Default for TypeParams {
    fn default() -> Self {
        TypeParams {
            rate_preset: RatePreset::Table,
            required_rates_bps: None,
            thetas: None,
            probs: None,
            lower_bound: None,
            only_type: None,
            eta_v: 1e-12,
            licensed_share: None,
        }
    }
}

impl TypeParams {
    pub fn required_rates(&self) -> Vec<f64> {
        match (&self.required_rates_bps, self.rate_preset) {
            (Some(r), _) => r.clone(),
            (None, RatePreset::Table) => TABLE_RATES_BPS.to_vec(),
            (None, RatePreset::Gbps) => NARRATIVE_RATES_BPS.to_vec(),
        }
    }

    pub fn num_types(&self) -> usize {
        self.required_rates().len()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.thetas
            .clone()
            .unwrap_or_else(|| (1..=self.num_types()).map(|k| k as f64).collect())
    }

    /// Type probabilities; a single-type population is a point mass.
    pub fn probs(&self) -> Vec<f64> {
        let k = self.num_types();
        if let Some(only) = self.only_type {
            return (1..=k).map(|t| if t == only { 1.0 } else { 0.0 }).collect();
        }
        self.probs.clone().unwrap_or_else(|| vec![1.0 / k as f64; k])
    }

    /// Licensed traffic share per type; the remainder goes unlicensed.
    pub fn licensed_share(&self) -> Vec<f64> {
        let k = self.num_types();
        self.licensed_share.clone().unwrap_or_else(|| {
            if k == 1 {
                vec![1.0]
            } else {
                (0..k).map(|t| t as f64 / (k - 1) as f64).collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingParams {
    pub file_size_bits: u64,
    pub chunk_size_bits: u64,
    pub pad_last_chunk: bool,
    pub priority_coeffs: [f64; 3],
}

impl Default for MatchingParams {
    fn default() -> Self {
        MatchingParams {
            file_size_bits: 50_000_000,
            chunk_size_bits: 5_000_000,
            pad_last_chunk: false,
            priority_coeffs: [1.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloParams {
    pub type_samples: usize,
    pub activity_slots: usize,
    pub realized_slots: usize,
}

impl Default for MonteCarloParams {
    fn default() -> Self {
        MonteCarloParams { type_samples: 16, activity_slots: 200, realized_slots: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    #[default]
    NumUsers,
    NumBs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            sweep_variable: SweepVariable::NumUsers,
            sweep_values: vec![200, 300, 400, 500, 600, 700, 800, 900, 1000],
            replications: 20,
            base_seed: 1,
        }
    }
}

/// Everything needed to regenerate a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub scene: SceneParams,
    pub radio: RadioParams,
    pub types: TypeParams,
    pub matching: MatchingParams,
    pub monte_carlo: MonteCarloParams,
    pub experiment: ExperimentParams,
}

impl ScenarioParams {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: ScenarioParams =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario parameters always serialize")
    }

    /// Stable text form used for hashing and manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario parameters always serialize")
    }

    /// Chunk-rate demand used by the quota rule.
    pub fn chunk_rate_demand(&self) -> f64 {
        self.radio.chunk_rate_demand_bps.unwrap_or_else(|| {
            self.types.required_rates().into_iter().fold(0.0, f64::max)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scene;
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        positive(s.area_side_m, "scene.area_side_m")?;
        positive(s.path_loss_exponent, "scene.path_loss_exponent")?;
        positive(s.bs_range_m, "scene.bs_range_m")?;
        positive(s.wap_range_m, "scene.wap_range_m")?;
        if s.num_bs == 0 {
            return Err(Error::config("scene.num_bs must be at least 1"));
        }
        if !s.noise_psd_dbm_hz.is_finite() {
            return Err(Error::config("scene.noise_psd_dbm_hz must be finite"));
        }

        let r = &self.radio;
        positive(r.total_bandwidth_hz, "radio.total_bandwidth_hz")?;
        positive(r.unlicensed_channel_hz, "radio.unlicensed_channel_hz")?;
        positive(r.cost_per_watt, "radio.cost_per_watt")?;
        if r.bs_unlicensed_power_w < 0.0 || r.wap_power_w < 0.0 {
            return Err(Error::config("radio powers must be non-negative"));
        }
        if !(0.0..=1.0).contains(&r.wifi_activity) {
            return Err(Error::config("radio.wifi_activity must lie in [0, 1]"));
        }
        if let Some(cap) = r.power_cap_w {
            positive(cap, "radio.power_cap_w")?;
        }
        if let Some(th) = r.interference_threshold_w {
            positive(th, "radio.interference_threshold_w")?;
        }

        let t = &self.types;
        let rates = t.required_rates();
        let k = rates.len();
        if k == 0 {
            return Err(Error::config("at least one user type is required"));
        }
        if rates.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::config("required rates must be non-negative"));
        }
        for (name, len) in [
            ("types.thetas", t.thetas().len()),
            ("types.probs", t.probs().len()),
            ("types.licensed_share", t.licensed_share().len()),
        ] {
            if len != k {
                return Err(Error::config(format!("{name} has {len} entries, expected {k}")));
            }
        }
        if t.licensed_share().iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config("types.licensed_share entries must lie in [0, 1]"));
        }
        if let Some(only) = t.only_type {
            if only == 0 || only > k {
                return Err(Error::config(format!("types.only_type must be in 1..={k}")));
            }
        }
        positive(t.eta_v, "types.eta_v")?;

        let m = &self.matching;
        if m.chunk_size_bits == 0 {
            return Err(Error::config("matching.chunk_size_bits must be positive"));
        }
        let c = m.priority_coeffs;
        if !(c[0] > 0.0 && c[0] < c[1] && c[1] < c[2]) {
            return Err(Error::config(
                "matching.priority_coeffs must be positive and strictly increasing",
            ));
        }

        let mc = &self.monte_carlo;
        if mc.type_samples == 0 || mc.activity_slots == 0 || mc.realized_slots == 0 {
            return Err(Error::config("monte_carlo sample counts must be at least 1"));
        }

        let e = &self.experiment;
        if e.replications == 0 {
            return Err(Error::config("experiment.replications must be at least 1"));
        }
        if e.sweep_values.is_empty() {
            return Err(Error::config("experiment.sweep_values must be non-empty"));
        }
        if e.sweep_variable == SweepVariable::NumBs && e.sweep_values.contains(&0) {
            return Err(Error::config("a base-station sweep cannot contain 0"));
        }

        // Builds the type grid, which checks ordering and normalization.
        crate::contract::TypeGrid::from_params(t)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioParams::default().validate().unwrap();
    }

    #[test]
    fn empty_document_is_default() {
        let p = ScenarioParams::from_toml_str("").unwrap();
        assert_eq!(p, ScenarioParams::default());
    }

    #[test]
    fn toml_round_trip() {
        let p = ScenarioParams::default();
        let back = ScenarioParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn zero_replications_rejected() {
        let err = ScenarioParams::from_toml_str("[experiment]\nreplications = 0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let err = ScenarioParams::from_toml_str("[scene]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn threshold_triggers_at_wap_range() {
        let p = ScenarioParams::default();
        let th = p.radio.interference_threshold(&p.scene);
        let at_range = p.radio.wap_power_w * 90f64.powf(-3.0);
        assert!(at_range > th);
        assert!(p.radio.wap_power_w * 91f64.powf(-3.0) < th);
    }

    #[test]
    fn log_base_inverse() {
        for base in [LogBase::Natural, LogBase::Binary] {
            let x = 0.37;
            assert!((base.log1p(base.expm1(x)) - x).abs() < 1e-12);
        }
    }
}
