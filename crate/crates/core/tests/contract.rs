use lteu_core::contract::{
    check_iir, check_ordering, check_theorem1, check_tibs, expected_valuation, optimal_prices, price_menu,
    valuation, Contract, ContractMenu, ExpectedQuantities, TypeGrid, ValuationParams,
};
use proptest::prelude::*;

fn menu_for(prices: &[f64]) -> ContractMenu {
    let k = prices.len();
    ContractMenu::new(
        prices
            .iter()
            .enumerate()
            .map(|(t, &p)| {
                let a = if k > 1 { t as f64 / (k - 1) as f64 } else { 1.0 };
                Contract { alpha: a, beta: 1.0 - a, price: p }
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn valuation_matches_hand_calculation() {
    // 0.5 Mbps target, 0.3 Mbps delivered: 1e-12 * 0.5e6^2 - 1e-12 * 0.2e6^2.
    let p = ValuationParams::new(1e-12, 0.5e6);
    assert!((valuation(0.3e6, &p) - 0.21).abs() < 1e-12);
}

#[test]
fn single_type_expectation_is_deterministic() {
    let grid = TypeGrid::new(vec![2.0], vec![1.0], None).unwrap();
    let p = ValuationParams::new(1e-12, 0.7e6);
    let e = expected_valuation(0, 0, &grid, 3, 25, 11, &p, |_| 0.45e6);
    assert_eq!(e.mean, valuation(0.45e6, &p));
    assert_eq!(e.stderr, 0.0);
}

#[test]
fn expectation_agrees_with_enumeration() {
    // Two users; user 0's rate depends on how demanding user 1 is.
    let grid = TypeGrid::new(vec![1.0, 2.0], vec![0.3, 0.7], None).unwrap();
    let p = ValuationParams::new(1e-12, 0.6e6);
    let rate = |profile: &[usize]| if profile[1] == 0 { 0.55e6 } else { 0.3e6 };
    let exact: f64 = [0usize, 1]
        .iter()
        .map(|&o| grid.probs()[o] * valuation(rate(&[1, o]), &p))
        .sum();
    let est = expected_valuation(0, 1, &grid, 2, 20_000, 5, &p, rate);
    assert!(
        (est.mean - exact).abs() <= 3.0 * est.stderr,
        "estimate {} +- {} vs exact {exact}",
        est.mean,
        est.stderr
    );
}

#[test]
fn linear_valuation_prices_match_fine_quadrature() {
    let types = vec![1.0, 1.7, 3.2, 4.0];
    let grid = TypeGrid::new(types.clone(), vec![0.25; 4], Some(0.6)).unwrap();
    let (a, b) = (0.05, 0.11);
    let v: Vec<f64> = types.iter().map(|t| a + b * t).collect();
    let prices = optimal_prices(&v, &grid).unwrap();

    // Midpoint rule with a million panels; below the first type the
    // valuation is held flat.
    let v_at = |x: f64| if x < types[0] { a + b * types[0] } else { a + b * x };
    let integral = |hi: f64| {
        let n = 1_000_000;
        let h = (hi - 0.6) / n as f64;
        (0..n).map(|i| v_at(0.6 + (i as f64 + 0.5) * h)).sum::<f64>() * h
    };
    for (k, &t) in types.iter().enumerate() {
        let oracle = t * v[k] - integral(t);
        assert!((prices[k] - oracle).abs() < 1e-9, "type {k}: {} vs {oracle}", prices[k]);
    }
}

#[test]
fn uniqueness_of_optimal_prices() {
    // Raising any set of prices by more than the downward slack breaks
    // truth-telling or the lowest type's participation.
    let v = [0.02, 0.1, 0.13, 0.3];
    for k in 1..=v.len() {
        let grid = TypeGrid::new((1..=k).map(|t| t as f64).collect(), vec![1.0 / k as f64; k], None).unwrap();
        let v = &v[..k];
        let base = optimal_prices(v, &grid).unwrap();
        let slack = (1..k)
            .map(|j| 0.5 * (grid.theta(j) - grid.theta(j - 1)) * (v[j] - v[j - 1]))
            .fold(0.0, f64::max);
        let delta = 2.0 * slack + 1e-3;
        for mask in 1..3usize.pow(k as u32) {
            let mut prices = base.clone();
            let mut m = mask;
            for p in prices.iter_mut() {
                *p += (m % 3) as f64 * delta;
                m /= 3;
            }
            let menu = menu_for(&prices);
            let exp = ExpectedQuantities::new(&grid, v.to_vec(), prices, vec![0.0; k]).unwrap();
            let feasible = check_tibs(&menu, &exp).is_satisfied() && check_iir(&menu, &exp).is_satisfied();
            assert!(!feasible, "K={k} mask {mask} stayed feasible");
        }
    }
}

fn monotone_instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..=7).prop_flat_map(|k| {
        (
            prop::collection::vec(0.01f64..2.0, k),
            prop::collection::vec(0.0f64..0.5, k),
            0.0f64..1.0,
        )
            .prop_map(|(gaps, incs, low_frac)| {
                let mut t = 0.0;
                let types: Vec<f64> = gaps.iter().map(|g| {
                    t += g;
                    t
                })
                .collect();
                let mut acc = 0.0;
                let v: Vec<f64> = incs.iter().map(|d| {
                    acc += d;
                    acc
                })
                .collect();
                (types.clone(), v, types[0] * low_frac)
            })
    })
}

proptest! {
    #[test]
    fn optimal_menus_are_feasible((types, v, lower) in monotone_instance()) {
        let k = types.len();
        let grid = TypeGrid::new(types, vec![1.0 / k as f64; k], Some(lower)).unwrap();
        let prices = optimal_prices(&v, &grid).unwrap();
        let menu = menu_for(&prices);
        let exp = ExpectedQuantities::new(&grid, v, prices, vec![0.0; k]).unwrap();
        prop_assert!(check_tibs(&menu, &exp).is_satisfied());
        prop_assert!(check_iir(&menu, &exp).is_satisfied());
        prop_assert!(check_ordering(&exp).is_satisfied());
        let t1 = check_theorem1(&exp, &grid);
        prop_assert!(t1.is_satisfied());
        prop_assert!(t1.bottom_rent.abs() <= 1e-12 * exp.u_bar.iter().fold(1.0, |m: f64, u| m.max(u.abs())));
    }

    #[test]
    fn envelope_differences_are_trapezoids((types, v, lower) in monotone_instance()) {
        let k = types.len();
        let grid = TypeGrid::new(types.clone(), vec![1.0 / k as f64; k], Some(lower)).unwrap();
        let prices = optimal_prices(&v, &grid).unwrap();
        let exp = ExpectedQuantities::new(&grid, v.clone(), prices, vec![0.0; k]).unwrap();
        for j in 1..k {
            let du = exp.u_bar[j] - exp.u_bar[j - 1];
            let trap = 0.5 * (types[j] - types[j - 1]) * (v[j] + v[j - 1]);
            prop_assert!((du - trap).abs() <= 1e-12 * (1.0 + trap.abs()));
        }
    }

    #[test]
    fn ironing_restores_feasibility(raw in prop::collection::vec(0.0f64..1.0, 1..8)) {
        let k = raw.len();
        let grid = TypeGrid::new((1..=k).map(|t| t as f64).collect(), vec![1.0 / k as f64; k], None).unwrap();
        let (ironed, prices) = price_menu(&raw, &grid).unwrap();
        prop_assert!(ironed.windows(2).all(|w| w[0] <= w[1]));
        let menu = menu_for(&prices);
        let exp = ExpectedQuantities::new(&grid, ironed, prices, vec![0.0; k]).unwrap();
        prop_assert!(check_tibs(&menu, &exp).is_satisfied());
        prop_assert!(check_iir(&menu, &exp).is_satisfied());
    }
}
