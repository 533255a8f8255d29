use serde::Serialize;

use super::pricing::rent_integrals;
use super::types::{ContractMenu, ExpectedQuantities, TypeGrid};

/// Relative tolerance for incentive compatibility.
pub const EPS_IC: f64 = 1e-6;
/// Relative tolerance for individual rationality.
pub const EPS_IR: f64 = 1e-6;
/// Relative tolerance for the envelope identity.
pub const EPS_ENV: f64 = 1e-8;

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Expected valuation of contract `j`; a declined contract delivers nothing.
fn contract_value(menu: &ContractMenu, expected: &ExpectedQuantities, j: usize) -> f64 {
    if menu.get(j).is_declined() {
        0.0
    } else {
        expected.v_bar[j]
    }
}

fn utility(menu: &ContractMenu, expected: &ExpectedQuantities, k: usize, j: usize) -> f64 {
    expected.thetas[k] * contract_value(menu, expected, j) - menu.get(j).price
}

/// Absolute tolerance: `eps` times the largest truthful utility, with a
/// rounding floor scaled by the largest gross value.
fn tolerance(menu: &ContractMenu, expected: &ExpectedQuantities, eps: f64) -> f64 {
    let k = menu.len();
    let utilities: Vec<f64> = (0..k).map(|i| utility(menu, expected, i, i)).collect();
    let gross: Vec<f64> = (0..k).map(|i| expected.thetas[i] * contract_value(menu, expected, i)).collect();
    eps * max_abs(&utilities) + 1e-14 * max_abs(&gross)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcViolation {
    pub true_type: usize,
    pub reported_type: usize,
    pub truthful_utility: f64,
    pub deviation_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TibsReport {
    pub pairs_checked: usize,
    pub tolerance: f64,
    pub violations: Vec<IcViolation>,
}

impl TibsReport {
    pub fn is_satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Truth-telling check over every ordered pair of types.
pub fn check_tibs(menu: &ContractMenu, expected: &ExpectedQuantities) -> TibsReport {
    let k = menu.len();
    assert_eq!(k, expected.len(), "menu and expectations must cover the same types");
    let tol = tolerance(menu, expected, EPS_IC);
    let mut violations = Vec::new();
    for t in 0..k {
        let truthful = utility(menu, expected, t, t);
        for r in (0..k).filter(|&r| r != t) {
            let deviation = utility(menu, expected, t, r);
            if deviation > truthful + tol {
                violations.push(IcViolation {
                    true_type: t,
                    reported_type: r,
                    truthful_utility: truthful,
                    deviation_utility: deviation,
                });
            }
        }
    }
    TibsReport { pairs_checked: k * k, tolerance: tol, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IirReport {
    pub utilities: Vec<f64>,
    pub tolerance: f64,
    /// Types whose expected utility is negative beyond tolerance.
    pub violations: Vec<usize>,
}

impl IirReport {
    pub fn is_satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Participation check: every type expects non-negative utility.
pub fn check_iir(menu: &ContractMenu, expected: &ExpectedQuantities) -> IirReport {
    let k = menu.len();
    assert_eq!(k, expected.len(), "menu and expectations must cover the same types");
    let tol = tolerance(menu, expected, EPS_IR);
    let utilities: Vec<f64> = (0..k).map(|t| utility(menu, expected, t, t)).collect();
    let violations = utilities.iter().enumerate().filter(|(_, &u)| u < -tol).map(|(t, _)| t).collect();
    IirReport { utilities, tolerance: tol, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub prices_ordered: bool,
    pub valuations_ordered: bool,
    /// Adjacent pairs `(k, k + 1)` where price and valuation order disagree.
    pub sign_mismatches: Vec<usize>,
}

impl OrderingReport {
    pub fn is_satisfied(&self) -> bool {
        self.prices_ordered && self.valuations_ordered && self.sign_mismatches.is_empty()
    }
}

fn chain_ordered(values: &[f64], tol: f64) -> bool {
    values.first().is_none_or(|&v| v >= -tol) && values.windows(2).all(|w| w[1] >= w[0] - tol)
}

/// Checks `0 <= pi_1 <= ... <= pi_K`, `0 <= v_1 <= ... <= v_K`, and that on
/// each adjacent pair the price order matches the valuation order.
pub fn check_ordering(expected: &ExpectedQuantities) -> OrderingReport {
    let tol_p = EPS_IC * max_abs(&expected.pi_bar);
    let tol_v = EPS_IC * max_abs(&expected.v_bar);
    let sign_mismatches = (0..expected.len().saturating_sub(1))
        .filter(|&k| {
            let dp = expected.pi_bar[k + 1] - expected.pi_bar[k];
            let dv = expected.v_bar[k + 1] - expected.v_bar[k];
            ((dp >= -tol_p) != (dv >= -tol_v)) || ((dp <= tol_p) != (dv <= tol_v))
        })
        .collect();
    OrderingReport {
        prices_ordered: chain_ordered(&expected.pi_bar, tol_p),
        valuations_ordered: chain_ordered(&expected.v_bar, tol_v),
        sign_mismatches,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    /// Expected valuation nondecreasing in type.
    pub monotone: bool,
    /// Utilities follow the envelope `u_k = u(lower) + integral of v_bar`.
    pub envelope: bool,
    /// The lowest possible type keeps non-negative utility.
    pub bottom_rent_nonnegative: bool,
    pub bottom_rent: f64,
    pub max_envelope_error: f64,
}

impl Theorem1Report {
    pub fn is_satisfied(&self) -> bool {
        self.monotone && self.envelope && self.bottom_rent_nonnegative
    }
}

/// The three sufficient conditions for a truthful, participating menu,
/// each reported separately.
pub fn check_theorem1(expected: &ExpectedQuantities, grid: &TypeGrid) -> Theorem1Report {
    let v = &expected.v_bar;
    let u = &expected.u_bar;
    let tol_v = EPS_IC * max_abs(v);
    let monotone = v.windows(2).all(|w| w[1] >= w[0] - tol_v);

    let rents = rent_integrals(v, grid);
    // The lowest type takes the first contract, which it values as type 1 does.
    let bottom_rent = u[0] - (grid.theta(0) - grid.lower()) * v[0];
    let max_envelope_error = u
        .iter()
        .zip(&rents)
        .map(|(uk, ik)| (uk - (bottom_rent + ik)).abs())
        .fold(0.0, f64::max);
    let scale = max_abs(u).max(max_abs(&rents));
    let envelope = max_envelope_error <= EPS_ENV * scale + 1e-15 * scale.max(f64::MIN_POSITIVE);
    let bottom_rent_nonnegative = bottom_rent >= -EPS_IR * scale;
    Theorem1Report { monotone, envelope, bottom_rent_nonnegative, bottom_rent, max_envelope_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{optimal_prices, Contract};

    fn setup(v: &[f64], prices: Option<Vec<f64>>) -> (TypeGrid, ContractMenu, ExpectedQuantities) {
        let k = v.len();
        let grid = TypeGrid::new((1..=k).map(|t| t as f64).collect(), vec![1.0 / k as f64; k], None).unwrap();
        let prices = prices.unwrap_or_else(|| optimal_prices(v, &grid).unwrap());
        let menu = ContractMenu::new(
            (0..k)
                .map(|t| {
                    let a = if k > 1 { t as f64 / (k - 1) as f64 } else { 1.0 };
                    Contract { alpha: a, beta: 1.0 - a, price: prices[t] }
                })
                .collect(),
        )
        .unwrap();
        let exp = ExpectedQuantities::new(&grid, v.to_vec(), prices, vec![0.0; k]).unwrap();
        (grid, menu, exp)
    }

    #[test]
    fn optimal_menu_passes_everything() {
        let (grid, menu, exp) = setup(&[0.0, 0.04, 0.16, 0.25, 0.36, 0.49], None);
        assert!(check_tibs(&menu, &exp).is_satisfied());
        assert!(check_iir(&menu, &exp).is_satisfied());
        assert!(check_ordering(&exp).is_satisfied());
        assert!(check_theorem1(&exp, &grid).is_satisfied());
    }

    #[test]
    fn uniform_price_breaks_truth_telling() {
        let (_, menu, exp) = setup(&[0.1, 0.3], Some(vec![0.2, 0.2]));
        let report = check_tibs(&menu, &exp);
        assert!(!report.is_satisfied());
        assert_eq!(report.violations[0].true_type, 0);
        assert_eq!(report.violations[0].reported_type, 1);
    }

    #[test]
    fn single_type_is_vacuous() {
        let (_, menu, exp) = setup(&[0.3], None);
        let r = check_tibs(&menu, &exp);
        assert!(r.is_satisfied());
        assert_eq!(r.pairs_checked, 1);
    }

    #[test]
    fn inflated_bottom_price_violates_participation() {
        let (_, mut menu, exp) = setup(&[0.1, 0.2, 0.3], None);
        menu.contracts[0].price += 1.0;
        assert_eq!(check_iir(&menu, &exp).violations, vec![0]);
    }

    #[test]
    fn declined_contract_is_rational() {
        let grid = TypeGrid::new(vec![1.0], vec![1.0], None).unwrap();
        let menu = ContractMenu::new(vec![Contract::DECLINED]).unwrap();
        let exp = ExpectedQuantities::new(&grid, vec![0.7], vec![0.0], vec![0.0]).unwrap();
        let r = check_iir(&menu, &exp);
        assert!(r.is_satisfied());
        assert_eq!(r.utilities, vec![0.0]);
    }

    #[test]
    fn constant_chain_is_ordered() {
        let (_, _, exp) = setup(&[0.2, 0.2, 0.2], None);
        assert!(check_ordering(&exp).is_satisfied());
    }

    #[test]
    fn swapped_prices_flagged() {
        let (_, _, mut exp) = setup(&[0.1, 0.2, 0.3], None);
        exp.pi_bar.swap(1, 2);
        let r = check_ordering(&exp);
        assert!(!r.prices_ordered);
        assert!(!r.is_satisfied());
    }

    #[test]
    fn perturbed_utility_breaks_envelope() {
        let (grid, _, mut exp) = setup(&[0.1, 0.2, 0.3, 0.4], None);
        exp.u_bar[2] *= 1.1;
        let r = check_theorem1(&exp, &grid);
        assert!(r.monotone && r.bottom_rent_nonnegative);
        assert!(!r.envelope);
    }

    #[test]
    fn negative_bottom_rent_flagged() {
        let (grid, _, mut exp) = setup(&[0.1, 0.2, 0.3], None);
        for u in exp.u_bar.iter_mut() {
            *u -= 0.05;
        }
        let r = check_theorem1(&exp, &grid);
        assert!(r.envelope);
        assert!(!r.bottom_rent_nonnegative);
    }
}
