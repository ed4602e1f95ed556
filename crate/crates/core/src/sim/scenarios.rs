//! Scenario files shipped with the crate.

use crate::error::Result;
use crate::sim::config::ScenarioConfig;

/// Three vessels and three aerial vehicles spread evenly around one circle.
pub const CIRCULAR_6: &str = include_str!("../../scenarios/circular_6.json");
/// Five vessels and five aerial vehicles on offset figure-eight paths.
pub const LISSAJOUS_10: &str = include_str!("../../scenarios/lissajous_10.json");

pub fn circular_6() -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(CIRCULAR_6)
}

pub fn lissajous_10() -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(LISSAJOUS_10)
}

/// Looks up a bundled scenario by file stem.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "circular_6" => Some(CIRCULAR_6),
        "lissajous_10" => Some(LISSAJOUS_10),
        _ => None,
    }
}
