//! Scenario files shipped with the crate.

use super::config::Scenario;
use crate::error::{GeoError, Result};

/// `(name, TOML text)` of every shipped scenario.
pub const SHIPPED: &[(&str, &str)] = &[
    ("ch2_asteroid", include_str!("../../scenarios/ch2_asteroid.toml")),
    ("ch2_force_obs", include_str!("../../scenarios/ch2_force_obs.toml")),
    ("ch3_finite_time", include_str!("../../scenarios/ch3_finite_time.toml")),
    ("ch3_finite_time_noisy", include_str!("../../scenarios/ch3_finite_time_noisy.toml")),
    ("ch4_lgvi_h0005", include_str!("../../scenarios/ch4_lgvi_h0005.toml")),
    ("ch4_lgvi_h001", include_str!("../../scenarios/ch4_lgvi_h001.toml")),
    ("ch4_lgvi_h005", include_str!("../../scenarios/ch4_lgvi_h005.toml")),
    ("ch5_case1", include_str!("../../scenarios/ch5_case1.toml")),
    ("ch5_case2", include_str!("../../scenarios/ch5_case2.toml")),
    ("ch5_case3", include_str!("../../scenarios/ch5_case3.toml")),
    ("ch6_bias", include_str!("../../scenarios/ch6_bias.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

/// Parses a shipped scenario by name.
pub fn shipped(name: &str) -> Result<Scenario> {
    let (_, text) = SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| GeoError::Config(format!("no shipped scenario `{name}`")))?;
    Scenario::from_toml_str(text)
}
