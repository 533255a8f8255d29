use super::types::TypeGrid;
use crate::error::{Error, Result};

/// Nondecreasing least-squares fit by pool-adjacent-violators, with every
/// type weighted equally.
pub fn iron(values: &[f64]) -> Vec<f64> {
    // Each block holds (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 <= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
        }
    }
    blocks.into_iter().flat_map(|(s, n)| std::iter::repeat_n(s / n as f64, n)).collect()
}

/// `I_k`, the integral of the piecewise-linear `v_bar` from the grid's lower
/// bound up to each type, by the trapezoid rule. Below the first type
/// `v_bar` is held at its first value.
pub fn rent_integrals(v_bar: &[f64], grid: &TypeGrid) -> Vec<f64> {
    assert_eq!(v_bar.len(), grid.len(), "one valuation per type");
    let t = grid.types();
    let mut out = Vec::with_capacity(t.len());
    let mut acc = (t[0] - grid.lower()) * v_bar[0];
    out.push(acc);
    for k in 1..t.len() {
        acc += 0.5 * (t[k] - t[k - 1]) * (v_bar[k] + v_bar[k - 1]);
        out.push(acc);
    }
    out
}

fn monotone_tolerance(v_bar: &[f64]) -> f64 {
    1e-12 * v_bar.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Revenue-maximizing prices `pi_k = theta_k v_k - I_k`, which leave the
/// lowest type zero rent and every higher type its information rent.
///
/// `v_bar` must already be nondecreasing; see [`price_menu`] for the ironed
/// variant.
pub fn optimal_prices(v_bar: &[f64], grid: &TypeGrid) -> Result<Vec<f64>> {
    if v_bar.len() != grid.len() {
        return Err(Error::config(format!(
            "{} valuations for {} types",
            v_bar.len(),
            grid.len()
        )));
    }
    if v_bar.iter().any(|v| !v.is_finite()) {
        return Err(Error::Feasibility("expected valuations must be finite".into()));
    }
    let tol = monotone_tolerance(v_bar);
    if let Some(k) = v_bar.windows(2).position(|w| w[1] < w[0] - tol) {
        return Err(Error::Feasibility(format!(
            "expected valuation decreases between types {} and {}",
            k + 1,
            k + 2
        )));
    }
    let rents = rent_integrals(v_bar, grid);
    Ok(grid
        .types()
        .iter()
        .zip(v_bar)
        .zip(&rents)
        .map(|((t, v), i)| {
            let p = t * v - i;
            // Cancellation can leave a constant chain a rounding error below zero.
            if p < 0.0 && p > -1e-12 * (t * v).abs().max(f64::MIN_POSITIVE) {
                0.0
            } else {
                p
            }
        })
        .collect())
}

/// Irons `v_bar` and prices the result; returns the ironed valuations and
/// the prices.
pub fn price_menu(v_bar: &[f64], grid: &TypeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let ironed = iron(v_bar);
    let prices = optimal_prices(&ironed, grid)?;
    Ok((ironed, prices))
}
