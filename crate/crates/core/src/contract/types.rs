use serde::{Deserialize, Serialize};

use crate::config::TypeParams;
use crate::error::{Error, Result};

/// Discrete willingness-to-pay types with their prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeGrid {
    types: Vec<f64>,
    probs: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl TypeGrid {
    /// Grid with support `[lower, upper]`; `lower` may sit below the first
    /// type, `upper` defaults to the last.
    pub fn new(types: Vec<f64>, probs: Vec<f64>, lower: Option<f64>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::config("type grid needs at least one type"));
        }
        if types.len() != probs.len() {
            return Err(Error::config(format!(
                "type grid has {} types but {} probabilities",
                types.len(),
                probs.len()
            )));
        }
        if types.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("types must be finite"));
        }
        if types.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("types must be strictly increasing"));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::config("type probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("type probabilities sum to {total}, not 1")));
        }
        let first = types[0];
        let lower = lower.unwrap_or(first);
        if !(lower.is_finite() && lower <= first) {
            return Err(Error::config(format!(
                "type lower bound {lower} must not exceed the first type {first}"
            )));
        }
        let upper = *types.last().unwrap();
        Ok(TypeGrid { types, probs, lower, upper })
    }

    pub fn from_params(params: &TypeParams) -> Result<Self> {
        Self::new(params.thetas(), params.probs(), params.lower_bound)
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[f64] {
        &self.types
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.types[k]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Draws a type index from the prior given a uniform variate in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // Rounding can leave `acc` a hair under 1; fall back to the last
        // type with positive mass.
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Performance-reward bundle: shares of the user's traffic carried on the
/// licensed and unlicensed bands and the price paid for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub alpha: f64,
    pub beta: f64,
    pub price: f64,
}

impl Contract {
    pub const DECLINED: Contract = Contract { alpha: 0.0, beta: 0.0, price: 0.0 };

    pub fn new(alpha: f64, beta: f64, price: f64) -> Result<Self> {
        let c = Contract { alpha, beta, price };
        c.validate()?;
        Ok(c)
    }

    pub fn is_declined(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.alpha) || !unit(self.beta) {
            return Err(Error::ContractViolation(format!(
                "shares must lie in [0, 1], got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.alpha + self.beta > 1.0 + 1e-12 {
            return Err(Error::ContractViolation(format!(
                "alpha + beta = {} exceeds 1",
                self.alpha + self.beta
            )));
        }
        if !(self.price >= 0.0 && self.price.is_finite()) {
            return Err(Error::ContractViolation(format!("price {} must be non-negative", self.price)));
        }
        Ok(())
    }
}

/// One row of the exported menu; `type` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuEntry {
    #[serde(rename = "type")]
    pub type_index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub price: f64,
}

/// Contract menu indexed by type.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContractMenu {
    pub contracts: Vec<Contract>,
}

impl ContractMenu {
    pub fn new(contracts: Vec<Contract>) -> Result<Self> {
        for c in &contracts {
            c.validate()?;
        }
        Ok(ContractMenu { contracts })
    }

    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }

    pub fn get(&self, k: usize) -> &Contract {
        &self.contracts[k]
    }

    pub fn prices(&self) -> Vec<f64> {
        self.contracts.iter().map(|c| c.price).collect()
    }

    pub fn entries(&self) -> Vec<MenuEntry> {
        self.contracts
            .iter()
            .enumerate()
            .map(|(k, c)| MenuEntry { type_index: k + 1, alpha: c.alpha, beta: c.beta, price: c.price })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries()).expect("menu entries always serialize")
    }

    /// Parses a menu; entries may come in any order but must cover types
    /// `1..=K` exactly once.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut entries: Vec<MenuEntry> = serde_json::from_str(text)?;
        entries.sort_by_key(|e| e.type_index);
        for (k, e) in entries.iter().enumerate() {
            if e.type_index != k + 1 {
                return Err(Error::Parse(format!(
                    "menu must list types 1..={} exactly once",
                    entries.len()
                )));
            }
        }
        Self::new(entries.iter().map(|e| Contract { alpha: e.alpha, beta: e.beta, price: e.price }).collect())
    }
}

/// Per-type expected valuation, price, utility and serving cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedQuantities {
    pub thetas: Vec<f64>,
    pub v_bar: Vec<f64>,
    pub pi_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub c_bar: Vec<f64>,
}

impl ExpectedQuantities {
    /// Fills in `u_bar = theta * v_bar - pi_bar`.
    pub fn new(grid: &TypeGrid, v_bar: Vec<f64>, pi_bar: Vec<f64>, c_bar: Vec<f64>) -> Result<Self> {
        let k = grid.len();
        for (name, len) in [("v_bar", v_bar.len()), ("pi_bar", pi_bar.len()), ("c_bar", c_bar.len())] {
            if len != k {
                return Err(Error::config(format!("{name} has {len} entries, expected {k}")));
            }
        }
        if v_bar.iter().chain(&pi_bar).any(|x| !x.is_finite()) {
            return Err(Error::Feasibility("expected valuations and prices must be finite".into()));
        }
        let u_bar = grid.types().iter().zip(&v_bar).zip(&pi_bar).map(|((t, v), p)| t * v - p).collect();
        Ok(ExpectedQuantities { thetas: grid.types().to_vec(), v_bar, pi_bar, u_bar, c_bar })
    }

    pub fn len(&self) -> usize {
        self.v_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_bar.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_unsorted_types() {
        assert!(TypeGrid::new(vec![2.0, 1.0], vec![0.5, 0.5], None).is_err());
        assert!(TypeGrid::new(vec![1.0, 1.0], vec![0.5, 0.5], None).is_err());
    }

    #[test]
    fn grid_rejects_bad_probs() {
        assert!(TypeGrid::new(vec![1.0, 2.0], vec![0.5, 0.6], None).is_err());
        assert!(TypeGrid::new(vec![1.0, 2.0], vec![1.5, -0.5], None).is_err());
    }

    #[test]
    fn grid_lower_bound() {
        let g = TypeGrid::new(vec![1.0, 2.0], vec![0.5, 0.5], None).unwrap();
        assert_eq!(g.lower(), 1.0);
        assert_eq!(g.upper(), 2.0);
        assert!(TypeGrid::new(vec![1.0, 2.0], vec![0.5, 0.5], Some(1.5)).is_err());
        assert_eq!(TypeGrid::new(vec![1.0, 2.0], vec![0.5, 0.5], Some(0.5)).unwrap().lower(), 0.5);
    }

    #[test]
    fn default_params_grid() {
        let g = TypeGrid::from_params(&TypeParams::default()).unwrap();
        assert_eq!(g.types(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn sampling_respects_point_mass() {
        let g = TypeGrid::new(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0], None).unwrap();
        for u in [0.0, 0.3, 0.999_999_999] {
            assert_eq!(g.sample_index(u), 1);
        }
    }

    #[test]
    fn contract_invariants() {
        assert!(Contract::new(0.5, 0.5, 1.0).is_ok());
        assert!(Contract::new(0.7, 0.5, 1.0).is_err());
        assert!(Contract::new(-0.1, 0.5, 1.0).is_err());
        assert!(Contract::new(0.1, 0.5, -1.0).is_err());
        assert!(Contract::DECLINED.is_declined());
    }

    #[test]
    fn menu_json_round_trip() {
        let menu = ContractMenu::new(vec![
            Contract { alpha: 0.0, beta: 1.0, price: 0.0 },
            Contract { alpha: 1.0, beta: 0.0, price: 0.25 },
        ])
        .unwrap();
        let text = menu.to_json();
        assert!(text.contains("\"type\": 1"));
        assert_eq!(ContractMenu::from_json(&text).unwrap(), menu);
    }

    #[test]
    fn menu_json_requires_every_type() {
        let text = r#"[{"type": 2, "alpha": 0, "beta": 1, "price": 0}]"#;
        assert!(matches!(ContractMenu::from_json(text), Err(Error::Parse(_))));
    }
}
