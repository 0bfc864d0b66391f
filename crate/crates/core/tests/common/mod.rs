#![allow(dead_code)]

use gridfreq::model::{GeneratorGroup, ScenarioConfig};
use gridfreq::scenario::parse_config;

/// H = 5 s, R = 0.05, no deadband, headroom equal to capacity.
pub fn group(name: &str, capacity_mw: f64) -> GeneratorGroup {
    let text = format!(
        "name = \"{name}\"\ncapacity_mw = {capacity_mw:?}\ninertia_s = 5.0\ndroop = 0.05\nheadroom_mw = {capacity_mw:?}\n"
    );
    toml::from_str(&text).unwrap()
}

/// 75 GW system losing 2.75 GW at t = 1 s, one 60 GW group.
pub fn ercot_like() -> ScenarioConfig {
    let mut cfg = parse_config(
        r#"
pv_penetration = 0.0
wind_penetration = 0.0
governor_ratio = 1.0
fleet = []

[system]
p_sys_mw = 75000.0
d_load = 1.0
ufls_threshold_hz = 59.3

[contingency]
magnitude_mw = 2750.0
time_s = 1.0

[sim]
horizon_s = 60.0
"#,
        "ercot_like",
    )
    .unwrap();
    cfg.fleet = vec![group("g", 60_000.0)];
    cfg
}
