use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ScenarioParams, SweepVariable};
use crate::error::{Error, Result};

/// How contracts are priced and chunks allocated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// Optimal menu under incomplete information, Bayesian matching.
    Proposed,
    /// Optimal menu and matching computed from the realized type profile.
    CompleteInfo,
    /// Every type pays the mean of the optimal prices.
    Uniform,
    /// Optimal menu, chunks placed uniformly at random on options with room.
    Random,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Mechanism::Proposed, Mechanism::CompleteInfo, Mechanism::Uniform, Mechanism::Random];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Proposed => "proposed",
            Mechanism::CompleteInfo => "complete-info",
            Mechanism::Uniform => "uniform",
            Mechanism::Random => "random",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown mechanism {s:?}")))
    }
}

/// A parameter set plus the mechanism to run it under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub mechanism: Mechanism,
}

impl Scenario {
    pub fn new(params: ScenarioParams, mechanism: Mechanism) -> Result<Self> {
        params.validate()?;
        Ok(Scenario { params, mechanism })
    }

    /// Defaults: 20 base stations, 10 access points, users swept 200 to 1000.
    pub fn defaults(mechanism: Mechanism) -> Self {
        Scenario { params: ScenarioParams::default(), mechanism }
    }

    /// Population made only of type `k` (1-based).
    pub fn single_type(k: usize, mechanism: Mechanism) -> Result<Self> {
        let mut params = ScenarioParams::default();
        params.types.only_type = Some(k);
        Self::new(params, mechanism)
    }

    pub fn with_mechanism(&self, mechanism: Mechanism) -> Self {
        Scenario { params: self.params.clone(), mechanism }
    }

    /// Parameters at one point of the sweep.
    pub fn params_at(&self, sweep_value: usize) -> ScenarioParams {
        let mut p = self.params.clone();
        match p.experiment.sweep_variable {
            SweepVariable::NumUsers => p.scene.num_users = sweep_value,
            SweepVariable::NumBs => p.scene.num_bs = sweep_value,
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mechanism_names_round_trip() {
        for m in Mechanism::ALL {
            assert_eq!(m.name().parse::<Mechanism>().unwrap(), m);
        }
        assert!("auction".parse::<Mechanism>().is_err());
    }

    #[test]
    fn sweep_overrides_parameter() {
        let s = Scenario::defaults(Mechanism::Proposed);
        assert_eq!(s.params_at(700).scene.num_users, 700);
        let mut s = s;
        s.params.experiment.sweep_variable = SweepVariable::NumBs;
        assert_eq!(s.params_at(40).scene.num_bs, 40);
    }

    #[test]
    fn single_type_preset() {
        let s = Scenario::single_type(3, Mechanism::Proposed).unwrap();
        assert_eq!(s.params.types.probs(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(Scenario::single_type(9, Mechanism::Proposed).is_err());
    }
}
