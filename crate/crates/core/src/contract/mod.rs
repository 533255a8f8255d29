//! Screening contracts: user types, valuations, the optimal price menu and
//! the incentive-compatibility and participation checks.

mod checks;
mod pricing;
mod types;
mod valuation;

pub use checks::{
    check_iir, check_ordering, check_theorem1, check_tibs, IcViolation, IirReport, OrderingReport,
    Theorem1Report, TibsReport, EPS_ENV, EPS_IC, EPS_IR,
};
pub use pricing::{iron, optimal_prices, price_menu, rent_integrals};
pub use types::{Contract, ContractMenu, ExpectedQuantities, MenuEntry, TypeGrid};
pub use valuation::{expected_valuation, serving_cost, valuation, ValuationParams};
