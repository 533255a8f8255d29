use serde::{Deserialize, Serialize};

/// What one user ended up with in a replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub type_index: usize,
    pub required_rate_bps: f64,
    pub rate_bps: f64,
    pub utility: f64,
    pub licensed_bits: u64,
    pub offloaded_bits: u64,
    pub unmatched_bits: u64,
}

impl UserOutcome {
    pub fn requested_bits(&self) -> u64 {
        self.licensed_bits + self.offloaded_bits + self.unmatched_bits
    }

    /// Rates are compared with a relative slack of one part in 10^9 to
    /// absorb rounding in the chunk-weighted sum.
    pub fn meets_qos(&self) -> bool {
        self.rate_bps >= self.required_rate_bps * (1.0 - 1e-9)
    }
}

/// Per-replication metrics; traffic is in bits, split by type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub num_users: usize,
    pub mean_rate_bps: f64,
    pub qos_fraction: f64,
    pub mean_user_utility: f64,
    pub offloaded_bits: Vec<u64>,
    pub licensed_bits: Vec<u64>,
    pub unmatched_bits: Vec<u64>,
    pub requested_bits: Vec<u64>,
}

impl Metrics {
    pub fn total_offloaded(&self) -> u64 {
        self.offloaded_bits.iter().sum()
    }

    pub fn total_licensed(&self) -> u64 {
        self.licensed_bits.iter().sum()
    }

    pub fn total_unmatched(&self) -> u64 {
        self.unmatched_bits.iter().sum()
    }

    pub fn total_requested(&self) -> u64 {
        self.requested_bits.iter().sum()
    }

    /// Every requested bit is licensed, offloaded or unmatched, per type.
    pub fn conserves_traffic(&self) -> bool {
        (0..self.requested_bits.len()).all(|k| {
            self.offloaded_bits[k].checked_add(self.licensed_bits[k]).and_then(|s| s.checked_add(self.unmatched_bits[k]))
                == Some(self.requested_bits[k])
        })
    }
}

/// Aggregates user outcomes; with no users every metric is zero.
pub fn compute_metrics(users: &[UserOutcome], num_types: usize) -> Metrics {
    let n = users.len();
    let mut m = Metrics {
        num_users: n,
        mean_rate_bps: 0.0,
        qos_fraction: 0.0,
        mean_user_utility: 0.0,
        offloaded_bits: vec![0; num_types],
        licensed_bits: vec![0; num_types],
        unmatched_bits: vec![0; num_types],
        requested_bits: vec![0; num_types],
    };
    if n == 0 {
        return m;
    }
    for u in users {
        m.offloaded_bits[u.type_index] += u.offloaded_bits;
        m.licensed_bits[u.type_index] += u.licensed_bits;
        m.unmatched_bits[u.type_index] += u.unmatched_bits;
        m.requested_bits[u.type_index] += u.requested_bits();
    }
    m.mean_rate_bps = users.iter().map(|u| u.rate_bps).sum::<f64>() / n as f64;
    m.qos_fraction = users.iter().filter(|u| u.meets_qos()).count() as f64 / n as f64;
    m.mean_user_utility = users.iter().map(|u| u.utility).sum::<f64>() / n as f64;
    m
}

/// Whether entry `own` is within `tolerance` of the largest entry.
pub fn is_maximizer(values: &[f64], own: usize, tolerance: f64) -> bool {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values[own] >= best - tolerance
}
