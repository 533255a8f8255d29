use serde::{Deserialize, Serialize};

use super::scene::{NetworkScene, Point};
use crate::config::MIN_DISTANCE_M;

/// Deterministic path-loss power gain `max(d, d_min)^(-exponent)`.
pub fn channel_gain(tx: Point, rx: Point, exponent: f64) -> f64 {
    tx.distance(&rx).max(MIN_DISTANCE_M).powf(-exponent)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise power in Watts over `bandwidth_hz`.
pub fn noise_power(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(psd_dbm_hz) * bandwidth_hz
}

/// Linear power gains from every transmitter to every user.
///
/// The licensed and unlicensed bands share the path-loss law, so `bs`
/// serves both; `wap` holds the access-point-to-user gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    pub bs: Vec<Vec<f64>>,
    pub wap: Vec<Vec<f64>>,
}

impl GainMatrix {
    pub fn from_scene(scene: &NetworkScene) -> Self {
        let row = |tx: &Point| -> Vec<f64> {
            scene
                .user_positions
                .iter()
                .map(|rx| channel_gain(*tx, *rx, scene.path_loss_exponent))
                .collect()
        };
        GainMatrix {
            bs: scene.bs_positions.iter().map(row).collect(),
            wap: scene.wap_positions.iter().map(row).collect(),
        }
    }

    /// Builds a gain matrix directly; rows are transmitters, columns users.
    pub fn from_rows(bs: Vec<Vec<f64>>, wap: Vec<Vec<f64>>) -> Self {
        GainMatrix { bs, wap }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_distance() {
        assert_eq!(channel_gain(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 3.0), 1.0);
    }

    #[test]
    fn ten_meters() {
        let g = channel_gain(Point::new(0.0, 0.0), Point::new(6.0, 8.0), 3.0);
        assert!((g - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_clamp() {
        let p = Point::new(4.0, 4.0);
        assert_eq!(channel_gain(p, p, 3.0), MIN_DISTANCE_M.powf(-3.0));
    }

    #[test]
    fn gain_decreases_with_distance() {
        let o = Point::new(0.0, 0.0);
        let gains: Vec<f64> =
            (1..50).map(|d| channel_gain(o, Point::new(d as f64 * 3.0, 0.0), 3.0)).collect();
        assert!(gains.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn noise_floor() {
        // -174 dBm/Hz over 1 Hz is 10^-20.4 W.
        assert!((noise_power(-174.0, 1.0) / 10f64.powf(-20.4) - 1.0).abs() < 1e-12);
    }
}
