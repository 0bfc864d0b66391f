//! Full-factorial parameter sweeps over field-path overrides.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::run_scenario;
use crate::error::{Error, Result};
use crate::model::ScenarioConfig;
use crate::output::{format_cell, metric_value, write_table, METRIC_NAMES};
use crate::scenario::{load_scenario, parse_toml, read_file};
use crate::tactics::resolve_tactics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted field path, e.g. `storage[0].duration_s` or `fleet[*].droop`.
    pub field: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Scenario file (relative to the sweep file) or bundled scenario name.
    pub scenario: String,
    /// Tactic from the scenario's library applied before the axes.
    #[serde(default)]
    pub tactic: Option<String>,
    #[serde(rename = "axis")]
    pub axes: Vec<Axis>,
    pub metrics: Vec<String>,
}

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Input("a sweep needs at least one [[axis]]".into()));
        }
        if let Some(a) = self.axes.iter().find(|a| a.values.is_empty()) {
            return Err(Error::Input(format!("axis `{}` has no values", a.field)));
        }
        if let Some(m) = self.metrics.iter().find(|m| !METRIC_NAMES.contains(&m.as_str())) {
            return Err(Error::Input(format!(
                "unknown metric `{m}` (expected one of {})",
                METRIC_NAMES.join(", ")
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub values: Vec<toml::Value>,
    pub metrics: Vec<Option<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub fields: Vec<String>,
    pub metrics: Vec<String>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn column(&self, metric: &str) -> Option<Vec<Option<f64>>> {
        let i = self.metrics.iter().position(|m| m == metric)?;
        Some(self.cells.iter().map(|c| c.metrics[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = self.fields.clone();
        header.extend(self.metrics.iter().cloned());
        header.push("error".into());
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                let mut r: Vec<String> = c.values.iter().map(value_text).collect();
                r.extend(c.metrics.iter().map(|v| format_cell(*v)));
                r.push(c.error.clone().unwrap_or_default());
                r
            })
            .collect();
        write_table(path, &header, &rows)
    }
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Integer(i) => i.to_string(),
        other => other.to_string(),
    }
}

/// Every combination of axis values, first axis outermost.
fn grid(axes: &[Axis]) -> Vec<Vec<toml::Value>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

/// Evaluate the grid. Each cell is independent; failures land in `error`.
pub fn run_sweep(base: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepTable> {
    spec.check()?;
    let base = match &spec.tactic {
        Some(name) => resolve_tactics(base, std::slice::from_ref(name))?[0].1.apply(base),
        None => base.clone(),
    };
    let fields: Vec<String> = spec.axes.iter().map(|a| a.field.clone()).collect();
    let cells = grid(&spec.axes)
        .into_par_iter()
        .map(|values| {
            let overrides: Vec<(String, toml::Value)> =
                fields.iter().cloned().zip(values.iter().cloned()).collect();
            let outcome = crate::scenario::apply_overrides(&base, &overrides)
                .and_then(|cfg| run_scenario(&cfg));
            match outcome {
                Ok(run) => SweepCell {
                    metrics: spec
                        .metrics
                        .iter()
                        .map(|m| metric_value(&run.metrics, m).expect("checked metric name"))
                        .collect(),
                    values,
                    error: None,
                },
                Err(e) => SweepCell {
                    metrics: vec![None; spec.metrics.len()],
                    values,
                    error: Some(e.to_string().replace('\n', " ")),
                },
            }
        })
        .collect();
    Ok(SweepTable {
        fields,
        metrics: spec.metrics.clone(),
        cells,
    })
}

/// Parse a sweep file and load its base scenario.
pub fn load_sweep(path: &Path) -> Result<(SweepSpec, ScenarioConfig)> {
    let spec: SweepSpec = parse_toml(&read_file(path)?, &path.display().to_string())?;
    let candidate: PathBuf = path.parent().unwrap_or(Path::new(".")).join(&spec.scenario);
    let base = if candidate.exists() {
        load_scenario(&candidate.to_string_lossy())?
    } else {
        load_scenario(&spec.scenario)?
    };
    Ok((spec, base))
}

/// Run on a dedicated pool of `jobs` threads (0 = rayon default).
pub fn run_sweep_with_jobs(base: &ScenarioConfig, spec: &SweepSpec, jobs: usize) -> Result<SweepTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_sweep(base, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::small_config;

    fn spec(axes: Vec<Axis>) -> SweepSpec {
        SweepSpec {
            scenario: "unused".into(),
            tactic: None,
            axes,
            metrics: vec!["nadir_hz".into(), "settling_hz".into()],
        }
    }

    #[test]
    fn grid_is_full_factorial_in_order() {
        let g = grid(&[
            Axis {
                field: "a".into(),
                values: vec![1.into(), 2.into()],
            },
            Axis {
                field: "b".into(),
                values: vec![10.into(), 20.into(), 30.into()],
            },
        ]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec![toml::Value::from(1), toml::Value::from(20)]);
    }

    #[test]
    fn single_cell_equals_simulate() {
        let base = small_config();
        let s = spec(vec![Axis {
            field: "fleet[0].droop".into(),
            values: vec![0.05.into()],
        }]);
        let table = run_sweep(&base, &s).unwrap();
        let direct = run_scenario(&base).unwrap();
        assert_eq!(table.cells.len(), 1);
        assert_eq!(table.cells[0].metrics[0], Some(direct.metrics.nadir_hz));
        assert_eq!(table.cells[0].metrics[1], Some(direct.metrics.settling_hz));
    }

    #[test]
    fn bad_cell_does_not_spoil_others() {
        let base = small_config();
        let s = spec(vec![Axis {
            field: "fleet[0].droop".into(),
            values: vec![0.05.into(), (-1.0).into(), 0.03.into()],
        }]);
        let table = run_sweep(&base, &s).unwrap();
        assert!(table.cells[0].error.is_none());
        assert!(table.cells[1].error.as_deref().unwrap().contains("droop"));
        assert_eq!(table.cells[1].metrics, vec![None, None]);
        assert!(table.cells[2].metrics[1] > table.cells[0].metrics[1]);
    }

    #[test]
    fn job_count_does_not_change_results() {
        let base = small_config();
        let s = spec(vec![Axis {
            field: "fleet[0].droop".into(),
            values: vec![0.03.into(), 0.04.into(), 0.05.into(), 0.06.into()],
        }]);
        let one = run_sweep_with_jobs(&base, &s, 1).unwrap();
        let four = run_sweep_with_jobs(&base, &s, 4).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn spec_checks() {
        assert!(spec(vec![]).check().is_err());
        let mut s = spec(vec![Axis {
            field: "x".into(),
            values: vec![1.into()],
        }]);
        assert!(s.check().is_ok());
        s.metrics.push("wobble".into());
        assert!(s.check().is_err());
    }
}
