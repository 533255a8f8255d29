use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SceneParams;
use crate::error::{Error, Result};

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions of base stations, WiFi access points and users, plus the
/// radio resources they share. Immutable once generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScene {
    pub bs_positions: Vec<Point>,
    pub wap_positions: Vec<Point>,
    /// Unlicensed channel each access point operates on.
    pub wap_channels: Vec<usize>,
    pub user_positions: Vec<Point>,
    pub area_side: f64,
    pub path_loss_exponent: f64,
    pub noise_psd_dbm_hz: f64,
    pub licensed_rbs: usize,
    pub unlicensed_channels: usize,
    pub bs_range: f64,
    pub wap_range: f64,
}

/// Versioned JSON wrapper for exported scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub version: u32,
    pub seed: u64,
    pub scene: NetworkScene,
}

impl SceneDocument {
    pub fn new(scene: NetworkScene, seed: u64) -> Self {
        SceneDocument { version: SCENE_FORMAT_VERSION, seed, scene }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SceneDocument = serde_json::from_str(text)?;
        if doc.version != SCENE_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported scene format version {} (expected {SCENE_FORMAT_VERSION})",
                doc.version
            )));
        }
        doc.scene.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

impl NetworkScene {
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn num_waps(&self) -> usize {
        self.wap_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area_side > 0.0) {
            return Err(Error::config("area side must be positive"));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::config("path loss exponent must be positive"));
        }
        let inside = |p: &Point| {
            (0.0..=self.area_side).contains(&p.x) && (0.0..=self.area_side).contains(&p.y)
        };
        let all = self.bs_positions.iter().chain(&self.wap_positions).chain(&self.user_positions);
        if let Some(p) = all.into_iter().find(|p| !inside(p)) {
            return Err(Error::config(format!("position ({}, {}) lies outside the area", p.x, p.y)));
        }
        if self.wap_channels.len() != self.wap_positions.len() {
            return Err(Error::config("every access point needs a channel"));
        }
        if self.wap_channels.iter().any(|&c| c >= self.unlicensed_channels) {
            return Err(Error::config("access point channel out of range"));
        }
        Ok(())
    }

    /// Base station with the strongest path gain (nearest), ties to the lower id.
    pub fn nearest_bs(&self, user: usize) -> Option<usize> {
        let u = self.user_positions[user];
        self.bs_positions
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| u.distance(a).total_cmp(&u.distance(b)))
            .map(|(s, _)| s)
    }

    /// Base stations within communication range, nearest first. A user out
    /// of every BS's range still gets its nearest BS.
    pub fn candidate_bs(&self, user: usize) -> Vec<usize> {
        let u = self.user_positions[user];
        let mut within: Vec<(f64, usize)> = self
            .bs_positions
            .iter()
            .enumerate()
            .map(|(s, p)| (u.distance(p), s))
            .filter(|&(d, _)| d <= self.bs_range)
            .collect();
        within.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if within.is_empty() {
            return self.nearest_bs(user).into_iter().collect();
        }
        within.into_iter().map(|(_, s)| s).collect()
    }
}

fn uniform_points(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<Point> {
    (0..n).map(|_| Point::new(rng.gen_range(0.0..=side), rng.gen_range(0.0..=side))).collect()
}

/// Drops base stations, access points and users uniformly at random in the
/// square. Deterministic for a given seed.
pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<NetworkScene> {
    if !(params.area_side_m.is_finite() && params.area_side_m > 0.0) {
        return Err(Error::config("area side must be positive"));
    }
    if !(params.path_loss_exponent > 0.0) {
        return Err(Error::config("path loss exponent must be positive"));
    }
    if params.num_bs == 0 {
        return Err(Error::config("at least one base station is required"));
    }
    if params.num_waps > 0 && params.unlicensed_channels == 0 {
        return Err(Error::config("access points need at least one unlicensed channel"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = params.area_side_m;
    let bs_positions = uniform_points(&mut rng, params.num_bs, side);
    let wap_positions = uniform_points(&mut rng, params.num_waps, side);
    let wap_channels =
        (0..params.num_waps).map(|_| rng.gen_range(0..params.unlicensed_channels)).collect();
    let user_positions = uniform_points(&mut rng, params.num_users, side);
    Ok(NetworkScene {
        bs_positions,
        wap_positions,
        wap_channels,
        user_positions,
        area_side: side,
        path_loss_exponent: params.path_loss_exponent,
        noise_psd_dbm_hz: params.noise_psd_dbm_hz,
        licensed_rbs: params.licensed_rbs,
        unlicensed_channels: params.unlicensed_channels,
        bs_range: params.bs_range_m,
        wap_range: params.wap_range_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cardinalities() {
        let p = SceneParams::default();
        let s = generate_scene(&p, 3).unwrap();
        assert_eq!((s.num_bs(), s.num_waps(), s.num_users()), (20, 10, 200));
        s.validate().unwrap();
    }

    #[test]
    fn empty_population_is_valid() {
        let p = SceneParams { num_users: 0, ..SceneParams::default() };
        let s = generate_scene(&p, 3).unwrap();
        assert!(s.user_positions.is_empty());
        s.validate().unwrap();
    }

    #[test]
    fn same_seed_same_scene() {
        let p = SceneParams::default();
        assert_eq!(generate_scene(&p, 11).unwrap(), generate_scene(&p, 11).unwrap());
        assert_ne!(generate_scene(&p, 11).unwrap(), generate_scene(&p, 12).unwrap());
    }

    #[test]
    fn bad_area_is_config_error() {
        let p = SceneParams { area_side_m: 0.0, ..SceneParams::default() };
        assert!(matches!(generate_scene(&p, 0), Err(Error::Config(_))));
    }

    #[test]
    fn scene_document_round_trip() {
        let s = generate_scene(&SceneParams { num_users: 5, ..SceneParams::default() }, 9).unwrap();
        let doc = SceneDocument::new(s, 9);
        assert_eq!(SceneDocument::from_json(&doc.to_json()).unwrap(), doc);
    }

    #[test]
    fn scene_document_rejects_other_versions() {
        let s = generate_scene(&SceneParams { num_users: 1, ..SceneParams::default() }, 9).unwrap();
        let mut doc = SceneDocument::new(s, 9);
        doc.version = 99;
        assert!(matches!(SceneDocument::from_json(&doc.to_json()), Err(Error::Parse(_))));
    }

    #[test]
    fn out_of_range_user_falls_back_to_nearest() {
        let mut s = generate_scene(&SceneParams { num_users: 1, ..SceneParams::default() }, 1).unwrap();
        s.bs_range = 1e-6;
        assert_eq!(s.candidate_bs(0), vec![s.nearest_bs(0).unwrap()]);
    }
}
