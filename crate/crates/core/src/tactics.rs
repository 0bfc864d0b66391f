//! Mitigation tactics as sparse overrides on a base scenario, and the
//! side-by-side comparison of their metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_scenario, ScenarioRun};
use crate::error::{Error, Result};
use crate::governor::FrlParams;
use crate::metrics::FrequencyMetrics;
use crate::model::ScenarioConfig;
use crate::storage::StorageUnit;

pub const BASELINE: &str = "baseline";

/// One tactic. Each kind can only touch the fields it owns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TacticSpec {
    Baseline,
    /// Governor droop on every group.
    Sg1 { droop: f64 },
    /// Governor deadband on every group.
    Sg2 { deadband_hz: f64 },
    /// Share of synchronous capacity with governors in service.
    Sg3 { governor_ratio: f64 },
    /// Fast responsive load relay.
    Frl(FrlParams),
    /// Battery storage (replaces any storage on the base).
    Es1 { storage: Vec<StorageUnit> },
    /// Supercapacitor storage (replaces any storage on the base).
    Es2 { storage: Vec<StorageUnit> },
}

impl TacticSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Sg1 { .. } => "sg1",
            Self::Sg2 { .. } => "sg2",
            Self::Sg3 { .. } => "sg3",
            Self::Frl(_) => "frl",
            Self::Es1 { .. } => "es1",
            Self::Es2 { .. } => "es2",
        }
    }

    /// The base scenario with this tactic's overrides applied.
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self {
            Self::Baseline => {}
            Self::Sg1 { droop } => cfg.fleet.iter_mut().for_each(|g| g.droop = *droop),
            Self::Sg2 { deadband_hz } => {
                cfg.fleet.iter_mut().for_each(|g| g.deadband_hz = *deadband_hz)
            }
            Self::Sg3 { governor_ratio } => cfg.governor_ratio = *governor_ratio,
            Self::Frl(params) => cfg.frl = Some(params.clone()),
            Self::Es1 { storage } | Self::Es2 { storage } => cfg.storage = storage.clone(),
        }
        cfg
    }
}

/// Resolve tactic names against the scenario's library. `baseline` is
/// always available.
pub fn resolve_tactics(base: &ScenarioConfig, names: &[String]) -> Result<Vec<(String, TacticSpec)>> {
    names
        .iter()
        .map(|name| {
            if let Some(spec) = base.tactics.get(name) {
                Ok((name.clone(), spec.clone()))
            } else if name == BASELINE {
                Ok((name.clone(), TacticSpec::Baseline))
            } else {
                Err(Error::UnknownTactic(name.clone()))
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub tactic: String,
    pub kind: &'static str,
    pub metrics: FrequencyMetrics,
    pub run: ScenarioRun,
}

/// Run the baseline and every tactic. The baseline row comes first, the
/// rest keep the order given; duplicates of the baseline are dropped.
pub fn run_compare(base: &ScenarioConfig, tactics: &[(String, TacticSpec)]) -> Result<Vec<CompareRow>> {
    let mut rows: Vec<(String, TacticSpec)> = vec![(BASELINE.to_string(), TacticSpec::Baseline)];
    for (name, spec) in tactics {
        if name == BASELINE && *spec == TacticSpec::Baseline {
            continue;
        }
        if rows.iter().any(|(n, _)| n == name) {
            return Err(Error::Input(format!("tactic `{name}` listed twice")));
        }
        rows.push((name.clone(), spec.clone()));
    }
    rows.par_iter()
        .map(|(name, spec)| {
            let cfg = spec.apply(base);
            let run = run_scenario(&cfg).map_err(|e| Error::Tactic {
                name: name.clone(),
                source: Box::new(e),
            })?;
            Ok(CompareRow {
                tactic: name.clone(),
                kind: spec.kind(),
                metrics: run.metrics,
                run,
            })
        })
        .collect()
}
