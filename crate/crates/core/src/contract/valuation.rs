use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::TypeGrid;
use crate::error::{Error, Result};
use crate::net::{solve_power_profile, GainMatrix, Link, PowerSolver};
use crate::stats::{Estimate, Running};

/// Concave quadratic valuation peaking at the required rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationParams {
    pub eta_v: f64,
    pub r_req: f64,
    pub v_offset: f64,
}

impl ValuationParams {
    /// Offset chosen so that a zero rate is worth nothing.
    pub fn new(eta_v: f64, r_req: f64) -> Self {
        ValuationParams { eta_v, r_req, v_offset: eta_v * r_req * r_req }
    }

    pub fn with_offset(eta_v: f64, r_req: f64, v_offset: f64) -> Self {
        ValuationParams { eta_v, r_req, v_offset }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_v > 0.0 && self.r_req >= 0.0 && self.v_offset.is_finite()) {
            return Err(Error::config(format!("invalid valuation parameters {self:?}")));
        }
        Ok(())
    }
}

/// `v_offset - eta_v (rate - r_req)^2`, floored at zero.
pub fn valuation(rate_bps: f64, params: &ValuationParams) -> f64 {
    let d = rate_bps - params.r_req;
    (params.v_offset - params.eta_v * d * d).max(0.0)
}

/// Monte-Carlo expected valuation of `user` holding type `type_index`.
///
/// Every other user's type is drawn independently from the grid prior;
/// `rate_of` maps a full type profile to the rate `user` receives and the
/// result is fed through [`valuation`].
#[allow(clippy::too_many_arguments)]
pub fn expected_valuation<F>(
    user: usize,
    type_index: usize,
    grid: &TypeGrid,
    num_users: usize,
    samples: usize,
    seed: u64,
    params: &ValuationParams,
    mut rate_of: F,
) -> Estimate
where
    F: FnMut(&[usize]) -> f64,
{
    assert!(samples >= 1, "at least one sample is required");
    assert!(user < num_users && type_index < grid.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profile = vec![0; num_users];
    let mut acc = Running::default();
    for _ in 0..samples {
        for (i, slot) in profile.iter_mut().enumerate() {
            *slot = if i == user { type_index } else { grid.sample_index(rng.gen()) };
        }
        acc.push(valuation(rate_of(&profile), params));
    }
    acc.estimate()
}

/// Cost of serving `user`: its converged transmit power summed over its
/// links, times `cost_per_watt`.
pub fn serving_cost(
    user: usize,
    links: &[Link],
    gains: &GainMatrix,
    solver: &PowerSolver,
    cost_per_watt: f64,
) -> Result<f64> {
    let profile = solve_power_profile(links, gains, solver)?;
    let power: f64 = profile
        .links()
        .iter()
        .zip(profile.powers())
        .filter(|(l, _)| l.user == user)
        .map(|(_, p)| p)
        .sum();
    Ok(power * cost_per_watt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LogBase;

    #[test]
    fn peak_at_required_rate() {
        let p = ValuationParams::new(1e-12, 0.5e6);
        assert_eq!(valuation(0.5e6, &p), p.v_offset);
        assert!(valuation(0.4e6, &p) < p.v_offset);
        assert_eq!(valuation(0.0, &p), 0.0);
    }

    #[test]
    fn symmetric_about_peak() {
        let p = ValuationParams::new(2e-12, 0.6e6);
        let d = 0.05e6;
        assert!((valuation(0.6e6 + d, &p) - valuation(0.6e6 - d, &p)).abs() < 1e-15);
    }

    #[test]
    fn clamped_at_zero() {
        let p = ValuationParams::new(1e-12, 0.2e6);
        assert_eq!(valuation(1e6, &p), 0.0);
    }

    #[test]
    fn declined_contract_worth_zero() {
        let g = TypeGrid::new(vec![1.0, 2.0], vec![0.5, 0.5], None).unwrap();
        let p = ValuationParams::new(1e-12, 0.7e6);
        let e = expected_valuation(0, 1, &g, 4, 50, 3, &p, |_| 0.0);
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let gains = GainMatrix::from_rows(vec![vec![1e-6]], vec![]);
        let links = [Link { user: 0, bs: 0, channel: 0, rate_bps: 0.0, bandwidth_hz: 1e6 }];
        let solver = PowerSolver::new(1e-20, LogBase::Natural);
        assert_eq!(serving_cost(0, &links, &gains, &solver, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn isolated_link_cost_closed_form() {
        let g = 1e-6;
        let (r, w, n0, cpw) = (2e6, 1e6, 1e-20, 3.0);
        let gains = GainMatrix::from_rows(vec![vec![g]], vec![]);
        let links = [Link { user: 0, bs: 0, channel: 0, rate_bps: r, bandwidth_hz: w }];
        let solver = PowerSolver::new(n0, LogBase::Natural);
        let expected = ((r / w).exp() - 1.0) * n0 * w / g * cpw;
        let got = serving_cost(0, &links, &gains, &solver, cpw).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }
}
