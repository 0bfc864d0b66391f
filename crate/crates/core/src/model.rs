//! Domain types, per-unit helpers and fleet construction.
//!
//! A [`ScenarioConfig`] is the declarative description of one experiment.
//! [`build_fleet`] turns its generator template into the synchronous fleet
//! that is actually online: renewables displace synchronous capacity (and
//! with it inertia and governor headroom), and governors are switched on in
//! largest-first order until the requested governor ratio is met.
//!
//! Power quantities inside the dynamics are per unit on the system base
//! `S_base`, which defaults to the total load `P_sys`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result, ValidationErrors};
use crate::governor::{DeadbandStyle, FrlParams};
use crate::storage::StorageUnit;
use crate::tactics::TacticSpec;

fn default_f_nominal() -> f64 {
    60.0
}

fn default_true() -> bool {
    true
}

fn default_t_gov() -> f64 {
    0.5
}

fn default_t_lead() -> f64 {
    3.0
}

fn default_t_lag() -> f64 {
    10.0
}

fn default_settle_window() -> [f64; 2] {
    [20.0, 52.0]
}

fn default_dt() -> f64 {
    0.005
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    #[serde(default = "default_f_nominal")]
    pub f_nominal_hz: f64,
    /// Total system load.
    pub p_sys_mw: f64,
    /// System power base; `None` means `p_sys_mw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_base_mva: Option<f64>,
    /// Load damping, pu power per pu frequency.
    pub d_load: f64,
    pub ufls_threshold_hz: f64,
}

impl SystemParams {
    pub fn s_base(&self) -> f64 {
        self.s_base_mva.unwrap_or(self.p_sys_mw)
    }
}

/// An aggregated block of synchronous machines sharing one governor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorGroup {
    pub name: String,
    pub capacity_mw: f64,
    /// Inertia constant on the group's own capacity base.
    pub inertia_s: f64,
    #[serde(default = "default_true")]
    pub governor_enabled: bool,
    /// Governor droop, pu.
    pub droop: f64,
    /// One-sided deadband half-width.
    #[serde(default)]
    pub deadband_hz: f64,
    #[serde(default)]
    pub deadband_style: DeadbandStyle,
    #[serde(default = "default_t_gov")]
    pub t_gov_s: f64,
    /// Lead (numerator) time constant of the reheat lead-lag.
    #[serde(default = "default_t_lead")]
    pub t_lead_s: f64,
    /// Lag (denominator) time constant of the reheat lead-lag.
    #[serde(default = "default_t_lag")]
    pub t_lag_s: f64,
    /// Maximum sustained governor increase.
    pub headroom_mw: f64,
}

impl GeneratorGroup {
    /// Stored kinetic energy at nominal speed, MW·s.
    pub fn kinetic_energy_mws(&self) -> f64 {
        self.inertia_s * self.capacity_mw
    }

    pub fn headroom_pu(&self) -> f64 {
        self.headroom_mw / self.capacity_mw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contingency {
    pub magnitude_mw: f64,
    pub time_s: f64,
    /// Kinetic energy lost with the tripped unit. Zero keeps the inertia
    /// sum unchanged (pure power-balance step).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub removed_inertia_mws: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMode {
    /// Single lumped swing equation at the centre of inertia.
    #[default]
    Coi,
    /// One swing equation per group, linearised synchronising coupling.
    Multimachine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub horizon_s: f64,
    #[serde(default)]
    pub network_mode: NetworkMode,
    /// Synchronising coefficients K_ij, pu torque per rad on the system base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<Vec<f64>>>,
    /// Settling-frequency averaging window, seconds after the contingency.
    #[serde(default = "default_settle_window")]
    pub settle_window_s: [f64; 2],
}

/// Full declarative description of one experiment.
///
/// `tactics` is a library of named overrides that `compare` and `sweep`
/// apply on top of this base; it has no effect on a plain simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub pv_penetration: f64,
    pub wind_penetration: f64,
    pub governor_ratio: f64,
    pub system: SystemParams,
    pub contingency: Contingency,
    pub sim: SimSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frl: Option<FrlParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub storage: Vec<StorageUnit>,
    pub fleet: Vec<GeneratorGroup>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tactics: BTreeMap<String, TacticSpec>,
}

impl ScenarioConfig {
    pub fn renewable_share(&self) -> f64 {
        self.pv_penetration + self.wind_penetration
    }

    pub fn contingency_pu(&self) -> f64 {
        self.contingency.magnitude_mw / self.system.s_base()
    }
}

/// The synchronous fleet online for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fleet {
    pub groups: Vec<GeneratorGroup>,
    pub s_base_mva: f64,
    /// System inertia constant on `s_base_mva`.
    pub h_sys_s: f64,
}

impl Fleet {
    pub fn from_groups(groups: Vec<GeneratorGroup>, s_base_mva: f64) -> Self {
        let h_sys_s = system_inertia(&groups, s_base_mva);
        Self {
            groups,
            s_base_mva,
            h_sys_s,
        }
    }

    pub fn synchronous_capacity_mw(&self) -> f64 {
        self.groups.iter().map(|g| g.capacity_mw).sum()
    }

    pub fn enabled_capacity_mw(&self) -> f64 {
        self.groups
            .iter()
            .filter(|g| g.governor_enabled)
            .map(|g| g.capacity_mw)
            .sum()
    }

    /// Fraction of synchronous capacity with governors in service.
    pub fn governor_share(&self) -> f64 {
        let total = self.synchronous_capacity_mw();
        if total > 0.0 {
            self.enabled_capacity_mw() / total
        } else {
            0.0
        }
    }
}

/// `Σ H_i·S_i / S_base`.
pub fn system_inertia(groups: &[GeneratorGroup], s_base_mva: f64) -> f64 {
    groups.iter().map(|g| g.kinetic_energy_mws()).sum::<f64>() / s_base_mva
}

pub fn to_pu(value_mw: f64, base_mva: f64) -> Result<f64> {
    if !(base_mva > 0.0) {
        return Err(Error::NonPositiveBase(base_mva));
    }
    Ok(value_mw / base_mva)
}

pub fn from_pu(value_pu: f64, base_mva: f64) -> Result<f64> {
    if !(base_mva > 0.0) {
        return Err(Error::NonPositiveBase(base_mva));
    }
    Ok(value_pu * base_mva)
}

/// Build the online synchronous fleet for a scenario.
pub fn build_fleet(config: &ScenarioConfig) -> Result<Fleet> {
    let config = validate_scenario(config)?;
    let scale = 1.0 - config.renewable_share();
    let mut groups: Vec<GeneratorGroup> = config
        .fleet
        .iter()
        .map(|g| GeneratorGroup {
            capacity_mw: g.capacity_mw * scale,
            headroom_mw: g.headroom_mw * scale,
            ..g.clone()
        })
        .collect();

    let capacities: Vec<f64> = groups.iter().map(|g| g.capacity_mw).collect();
    let enabled = assign_governors(&capacities, config.governor_ratio)?;
    for (group, on) in groups.iter_mut().zip(enabled) {
        group.governor_enabled = on;
    }
    Ok(Fleet::from_groups(groups, config.system.s_base()))
}

/// Largest-first governor assignment. Ties keep template order. A group is
/// switched on when doing so moves the enabled share closer to `ratio`.
pub fn assign_governors(capacities: &[f64], ratio: f64) -> Result<Vec<bool>> {
    let total: f64 = capacities.iter().sum();
    let mut order: Vec<usize> = (0..capacities.len()).collect();
    order.sort_by(|&a, &b| capacities[b].total_cmp(&capacities[a]).then(a.cmp(&b)));

    let mut enabled = vec![false; capacities.len()];
    let mut share = 0.0;
    for i in order {
        let next = share + capacities[i] / total;
        if (next - ratio).abs() < (share - ratio).abs() {
            enabled[i] = true;
            share = next;
        }
    }

    let largest = capacities.iter().cloned().fold(0.0, f64::max) / total;
    let residual = (share - ratio).abs();
    if residual > largest + 1e-12 {
        return Err(Error::GovernorRatio {
            target: ratio,
            achieved: share,
            residual,
        });
    }
    Ok(enabled)
}

/// Check every invariant of a scenario, reporting all violations at once.
pub fn validate_scenario(config: &ScenarioConfig) -> Result<&ScenarioConfig> {
    let mut errs = Vec::new();
    collect_errors(config, &mut errs);
    for (name, tactic) in &config.tactics {
        let derived = tactic.apply(config);
        let mut sub = Vec::new();
        collect_errors(&derived, &mut sub);
        errs.extend(
            sub.into_iter()
                .map(|e| FieldError::new(format!("tactics.{name}/{}", e.path), e.message)),
        );
    }
    if errs.is_empty() {
        Ok(config)
    } else {
        Err(Error::Invalid(ValidationErrors(errs)))
    }
}

struct Check<'a> {
    errs: &'a mut Vec<FieldError>,
}

impl Check<'_> {
    fn require(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.errs.push(FieldError::new(path, message));
        }
    }

    fn finite(&mut self, value: f64, path: &str) -> bool {
        let ok = value.is_finite();
        self.require(ok, path, format!("must be finite, got {value}"));
        ok
    }

    fn positive(&mut self, value: f64, path: &str) {
        if self.finite(value, path) {
            self.require(value > 0.0, path, format!("must be > 0, got {value}"));
        }
    }

    fn non_negative(&mut self, value: f64, path: &str) {
        if self.finite(value, path) {
            self.require(value >= 0.0, path, format!("must be >= 0, got {value}"));
        }
    }
}

fn collect_errors(config: &ScenarioConfig, errs: &mut Vec<FieldError>) {
    let mut c = Check { errs };
    let sys = &config.system;
    c.positive(sys.f_nominal_hz, "system.f_nominal_hz");
    c.positive(sys.p_sys_mw, "system.p_sys_mw");
    if let Some(base) = sys.s_base_mva {
        c.positive(base, "system.s_base_mva");
    }
    c.non_negative(sys.d_load, "system.d_load");
    if c.finite(sys.ufls_threshold_hz, "system.ufls_threshold_hz") {
        c.require(
            sys.ufls_threshold_hz > 0.0 && sys.ufls_threshold_hz < sys.f_nominal_hz,
            "system.ufls_threshold_hz",
            format!(
                "must lie in (0, {}), got {}",
                sys.f_nominal_hz, sys.ufls_threshold_hz
            ),
        );
    }

    c.non_negative(config.pv_penetration, "pv_penetration");
    c.non_negative(config.wind_penetration, "wind_penetration");
    let share = config.renewable_share();
    c.require(
        share < 1.0,
        "pv_penetration",
        format!("pv_penetration + wind_penetration must be < 1, got {share}"),
    );
    if c.finite(config.governor_ratio, "governor_ratio") {
        c.require(
            (0.0..=1.0).contains(&config.governor_ratio),
            "governor_ratio",
            format!("must lie in [0, 1], got {}", config.governor_ratio),
        );
    }

    let cont = &config.contingency;
    c.positive(cont.magnitude_mw, "contingency.magnitude_mw");
    c.non_negative(cont.time_s, "contingency.time_s");
    c.non_negative(cont.removed_inertia_mws, "contingency.removed_inertia_mws");
    let total_inertia: f64 = config.fleet.iter().map(|g| g.kinetic_energy_mws()).sum::<f64>()
        * (1.0 - share);
    c.require(
        cont.removed_inertia_mws < total_inertia || cont.removed_inertia_mws == 0.0,
        "contingency.removed_inertia_mws",
        format!(
            "must be below the online kinetic energy {total_inertia} MW·s, got {}",
            cont.removed_inertia_mws
        ),
    );

    let sim = &config.sim;
    c.positive(sim.dt_s, "sim.dt_s");
    c.positive(sim.horizon_s, "sim.horizon_s");
    c.require(
        sim.horizon_s > sim.dt_s,
        "sim.horizon_s",
        format!("must exceed dt_s ({}), got {}", sim.dt_s, sim.horizon_s),
    );
    c.require(
        sim.dt_s <= 0.25,
        "sim.dt_s",
        format!(
            "must leave at least two samples in the 0.5 s ROCOF window, got {}",
            sim.dt_s
        ),
    );
    let [w0, w1] = sim.settle_window_s;
    c.non_negative(w0, "sim.settle_window_s");
    c.require(
        w1 > w0,
        "sim.settle_window_s",
        format!("window end must exceed start, got [{w0}, {w1}]"),
    );
    c.require(
        cont.time_s + w1 <= sim.horizon_s + 1e-9,
        "sim.horizon_s",
        format!(
            "must cover the settling window (contingency at {} s + {w1} s), got {}",
            cont.time_s, sim.horizon_s
        ),
    );

    c.require(!config.fleet.is_empty(), "fleet", "at least one generator group is required");
    for (i, g) in config.fleet.iter().enumerate() {
        let p = |f: &str| format!("fleet[{i}].{f}");
        c.positive(g.capacity_mw, &p("capacity_mw"));
        c.positive(g.inertia_s, &p("inertia_s"));
        c.positive(g.droop, &p("droop"));
        c.non_negative(g.deadband_hz, &p("deadband_hz"));
        c.positive(g.t_gov_s, &p("t_gov_s"));
        c.positive(g.t_lag_s, &p("t_lag_s"));
        c.non_negative(g.t_lead_s, &p("t_lead_s"));
        if c.finite(g.headroom_mw, &p("headroom_mw")) {
            c.require(
                g.headroom_mw >= 0.0 && g.headroom_mw <= g.capacity_mw,
                p("headroom_mw"),
                format!("must lie in [0, capacity_mw], got {}", g.headroom_mw),
            );
        }
    }

    if let Some(k) = &sim.coupling {
        let n = config.fleet.len();
        let square = k.len() == n && k.iter().all(|row| row.len() == n);
        c.require(
            square,
            "sim.coupling",
            format!("must be a {n}x{n} matrix matching the fleet"),
        );
        if square {
            for (i, row) in k.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if i != j {
                        c.non_negative(v, &format!("sim.coupling[{i}][{j}]"));
                    }
                }
            }
        }
    }

    if let Some(frl) = &config.frl {
        frl.validate(sys.f_nominal_hz, "frl", c.errs);
    }
    for (i, unit) in config.storage.iter().enumerate() {
        unit.validate(sys.f_nominal_hz, &format!("storage[{i}]"), c.errs);
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn ten_groups() -> ScenarioConfig {
        let mut cfg = small_config();
        cfg.system.p_sys_mw = 100_000.0;
        cfg.fleet = (0..10).map(|i| group(&format!("g{i}"), 10_000.0)).collect();
        cfg
    }

    #[test]
    fn penetration_scales_capacity_and_inertia() {
        let mut cfg = ten_groups();
        let template = build_fleet(&cfg).unwrap();
        cfg.pv_penetration = 0.65;
        cfg.wind_penetration = 0.15;
        let fleet = build_fleet(&cfg).unwrap();
        assert_eq!(fleet.groups.len(), 10);
        for g in &fleet.groups {
            assert!((g.capacity_mw - 2000.0).abs() < 1e-9);
        }
        assert!((fleet.h_sys_s - 0.2 * template.h_sys_s).abs() < 1e-12);
    }

    #[test]
    fn zero_penetration_full_ratio_is_identity() {
        let cfg = ten_groups();
        let fleet = build_fleet(&cfg).unwrap();
        assert_eq!(fleet.groups, cfg.fleet);
    }

    #[test]
    fn ratio_enables_largest_first() {
        let mut cfg = ten_groups();
        cfg.governor_ratio = 0.3;
        let fleet = build_fleet(&cfg).unwrap();
        let on: Vec<bool> = fleet.groups.iter().map(|g| g.governor_enabled).collect();
        assert_eq!(on.iter().filter(|&&b| b).count(), 3);
        assert_eq!(&on[..3], &[true, true, true]);

        let caps = [1.0, 5.0, 2.0, 2.0];
        assert_eq!(assign_governors(&caps, 0.5).unwrap(), vec![false, true, false, false]);
        assert_eq!(assign_governors(&caps, 0.7).unwrap(), vec![false, true, true, false]);
        assert_eq!(assign_governors(&caps, 0.0).unwrap(), vec![false; 4]);
    }

    #[test]
    fn ercot_like_config_validates() {
        let cfg = small_config();
        assert!(validate_scenario(&cfg).is_ok());
    }

    #[test]
    fn validation_reports_every_violation() {
        let mut cfg = small_config();
        cfg.pv_penetration = 1.2;
        cfg.sim.dt_s = 0.0;
        cfg.fleet[0].headroom_mw = -1.0;
        let Err(Error::Invalid(errs)) = validate_scenario(&cfg) else {
            panic!("expected validation failure");
        };
        assert!(errs.has_path("pv_penetration"), "{errs}");
        assert!(errs.has_path("sim.dt_s"), "{errs}");
        assert!(errs.has_path("fleet[0].headroom_mw"), "{errs}");
    }

    #[test]
    fn coupling_shape_is_checked() {
        let mut cfg = small_config();
        cfg.sim.coupling = Some(vec![vec![0.0, 1.0]]);
        let Err(Error::Invalid(errs)) = validate_scenario(&cfg) else {
            panic!("expected validation failure");
        };
        assert!(errs.has_path("sim.coupling"));
    }

    #[test]
    fn per_unit_conversion() {
        assert!((to_pu(2750.0, 75_000.0).unwrap() - 0.036_666_666_666_666_67).abs() < 1e-15);
        assert_eq!(to_pu(0.0, 123.0).unwrap(), 0.0);
        assert_eq!(to_pu(75_000.0, 75_000.0).unwrap(), 1.0);
        assert!(matches!(to_pu(1.0, 0.0), Err(Error::NonPositiveBase(_))));
        assert!(matches!(from_pu(1.0, -5.0), Err(Error::NonPositiveBase(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pu_round_trip(x in -1e7f64..1e7, base in 1.0f64..1e6) {
                let back = to_pu(from_pu(x, base).unwrap(), base).unwrap();
                prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
            }

            #[test]
            fn uniform_template_inertia_scales_linearly(n in 1usize..20, p in 0.0f64..0.95) {
                let mut cfg = small_config();
                cfg.fleet = (0..n).map(|i| group(&format!("g{i}"), 5000.0)).collect();
                let h0 = build_fleet(&cfg).unwrap().h_sys_s;
                cfg.pv_penetration = p;
                let h = build_fleet(&cfg).unwrap().h_sys_s;
                prop_assert!((h - (1.0 - p) * h0).abs() <= 1e-12 * h0);
            }

            #[test]
            fn governor_share_within_one_group(caps in proptest::collection::vec(1.0f64..100.0, 1..15), ratio in 0.0f64..=1.0) {
                let on = assign_governors(&caps, ratio).unwrap();
                let total: f64 = caps.iter().sum();
                let share: f64 = caps.iter().zip(&on).filter(|(_, &b)| b).map(|(c, _)| c).sum::<f64>() / total;
                let largest = caps.iter().cloned().fold(0.0, f64::max) / total;
                prop_assert!((share - ratio).abs() <= largest / 2.0 + 1e-12);
            }
        }
    }
}
