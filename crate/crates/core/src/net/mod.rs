//! Radio model: scene geometry, path-loss gains, the coupled power fixed
//! point and achievable rates on licensed and unlicensed bands.

mod channel;
mod power;
mod rate;
mod scene;

pub use channel::{channel_gain, dbm_to_watts, noise_power, GainMatrix};
pub use power::{solve_power_profile, Link, PowerProfile, PowerSolver};
pub use rate::{
    expected_rate, licensed_rate, sample_activity, shannon_rate, unlicensed_rate, ChunkService,
    LoadState, RadioContext,
};
pub use scene::{generate_scene, NetworkScene, Point, SceneDocument, SCENE_FORMAT_VERSION};
