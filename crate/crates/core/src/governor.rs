//! Turbine-governor response, fast responsive load relays and UFLS monitoring.
//!
//! The governor is a TGOV1-style reduction:
//!
//! ```text
//! Δf ──► deadband ──► −1/(R·f_N) ──► 1/(1+s·T_g) ──► (1+s·T_2)/(1+s·T_3) ──► clamp[0, headroom]
//! ```
//!
//! Output is in pu of the group's own capacity. Only under-frequency
//! response is modelled, so the clamp floor is zero.

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::model::GeneratorGroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadbandStyle {
    /// Outside the band the band edge is subtracted (continuous).
    #[default]
    Offset,
    /// Outside the band the raw deviation passes unchanged.
    Step,
}

/// Which side of the deadband the input sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DeadbandBranch {
    #[default]
    Inside,
    Below,
    Above,
}

impl DeadbandBranch {
    pub fn classify(deviation_hz: f64, deadband_hz: f64) -> Self {
        if deviation_hz < -deadband_hz {
            Self::Below
        } else if deviation_hz > deadband_hz {
            Self::Above
        } else {
            Self::Inside
        }
    }
}

/// Deadband output with the branch given explicitly.
///
/// The integrator freezes the branch over a step so that the right-hand
/// side stays smooth inside the Runge-Kutta stages.
pub fn deadband_on_branch(
    deviation_hz: f64,
    deadband_hz: f64,
    style: DeadbandStyle,
    branch: DeadbandBranch,
) -> f64 {
    match (branch, style) {
        (DeadbandBranch::Inside, _) => 0.0,
        (DeadbandBranch::Below, DeadbandStyle::Offset) => deviation_hz + deadband_hz,
        (DeadbandBranch::Above, DeadbandStyle::Offset) => deviation_hz - deadband_hz,
        (_, DeadbandStyle::Step) => deviation_hz,
    }
}

pub fn apply_deadband(deviation_hz: f64, deadband_hz: f64, style: DeadbandStyle) -> f64 {
    let branch = DeadbandBranch::classify(deviation_hz, deadband_hz);
    deadband_on_branch(deviation_hz, deadband_hz, style, branch)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GovernorState {
    /// Output of the first-order governor lag, pu of group capacity.
    pub lag: f64,
    /// Internal state of the lead-lag block.
    pub leadlag: f64,
    pub branch: DeadbandBranch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorRates {
    pub d_lag: f64,
    pub d_leadlag: f64,
    /// Mechanical power deviation after the clamp, pu of group capacity.
    pub mech_power: f64,
}

/// Lead-lag output followed by the headroom clamp.
pub fn governor_output(lag: f64, leadlag: f64, group: &GeneratorGroup) -> f64 {
    let ratio = group.t_lead_s / group.t_lag_s;
    let y = ratio * lag + (1.0 - ratio) * leadlag;
    y.clamp(0.0, group.headroom_pu())
}

/// State derivatives and clamped output for one governor.
///
/// `speed_dev` is Δω in pu; the deadband branch is taken from `gov`.
pub fn governor_derivatives(
    gov: &GovernorState,
    speed_dev: f64,
    group: &GeneratorGroup,
    f_nominal_hz: f64,
) -> GovernorRates {
    let df = speed_dev * f_nominal_hz;
    let eff = deadband_on_branch(df, group.deadband_hz, group.deadband_style, gov.branch);
    let raw = -eff / (group.droop * f_nominal_hz);
    GovernorRates {
        d_lag: (raw - gov.lag) / group.t_gov_s,
        d_leadlag: (gov.lag - gov.leadlag) / group.t_lag_s,
        mech_power: governor_output(gov.lag, gov.leadlag, group),
    }
}

fn default_reset() -> bool {
    true
}

/// Fast responsive load: a block tripped by a definite-time
/// under-frequency relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrlParams {
    pub block_mw: f64,
    pub threshold_hz: f64,
    pub delay_s: f64,
    /// Clear the relay timer if frequency recovers before the delay expires.
    #[serde(default = "default_reset")]
    pub reset_on_recovery: bool,
}

impl FrlParams {
    pub(crate) fn validate(&self, f_nominal_hz: f64, prefix: &str, errs: &mut Vec<FieldError>) {
        if !(self.block_mw > 0.0 && self.block_mw.is_finite()) {
            errs.push(FieldError::new(
                format!("{prefix}.block_mw"),
                format!("must be > 0, got {}", self.block_mw),
            ));
        }
        if !(self.threshold_hz > 0.0 && self.threshold_hz < f_nominal_hz) {
            errs.push(FieldError::new(
                format!("{prefix}.threshold_hz"),
                format!("must lie in (0, {f_nominal_hz}), got {}", self.threshold_hz),
            ));
        }
        if !(self.delay_s >= 0.0 && self.delay_s.is_finite()) {
            errs.push(FieldError::new(
                format!("{prefix}.delay_s"),
                format!("must be >= 0, got {}", self.delay_s),
            ));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FrlState {
    pub armed_time: Option<f64>,
    pub tripped: bool,
    pub trip_time: Option<f64>,
}

const TIMER_EPS: f64 = 1e-9;

/// Advance the relay at one step boundary; returns the load relief in MW.
pub fn frl_update(state: &mut FrlState, f_coi_hz: f64, t: f64, params: &FrlParams) -> f64 {
    if !state.tripped {
        if f_coi_hz < params.threshold_hz {
            state.armed_time.get_or_insert(t);
        } else if params.reset_on_recovery {
            state.armed_time = None;
        }
        if let Some(armed) = state.armed_time {
            if t - armed >= params.delay_s - TIMER_EPS {
                state.tripped = true;
                state.trip_time = Some(t);
            }
        }
    }
    if state.tripped {
        params.block_mw
    } else {
        0.0
    }
}

/// First time the series reaches `threshold_hz`, linearly interpolated.
///
/// A sample exactly at the threshold counts as the crossing.
pub fn ufls_crossing(times: &[f64], freqs: &[f64], threshold_hz: f64) -> Option<f64> {
    let k = freqs.iter().position(|&f| f <= threshold_hz)?;
    if k == 0 || freqs[k] == threshold_hz {
        return Some(times[k]);
    }
    let (f0, f1) = (freqs[k - 1], freqs[k]);
    let frac = (f0 - threshold_hz) / (f0 - f1);
    Some(times[k - 1] + frac * (times[k] - times[k - 1]))
}
