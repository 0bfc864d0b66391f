//! Battery and supercapacitor frequency support.
//!
//! Two controllers drive an aggregated storage unit:
//!
//! * droop: deviation → offset deadband → low-pass `1/(1+s·T_f)` →
//!   gain `P_max/(droop·f_N)`, discharge only;
//! * step: latch when frequency falls below a threshold, estimate ROCOF by
//!   least squares over a window anchored at the trigger, then after the
//!   ride-through delay inject `α·2·H·|ROCOF|/f_N·P_sys`.
//!
//! Commands are sampled at step boundaries and held for the step, so the
//! delivered energy is exactly the sum of held powers times `dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::governor::{apply_deadband, DeadbandStyle};

fn default_one() -> u32 {
    1
}

fn default_filter() -> f64 {
    0.1
}

fn default_window() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageUnit {
    pub name: String,
    pub p_max_mw: f64,
    pub e_limit_mws: f64,
    /// Installation count; output is aggregated, so this is metadata.
    #[serde(default = "default_one")]
    pub n_locations: u32,
    #[serde(default)]
    pub withdrawal_ramp_s: f64,
    pub controller: StorageController,
}

impl StorageUnit {
    pub fn discharge_duration_s(&self) -> f64 {
        self.e_limit_mws / self.p_max_mw
    }

    pub(crate) fn validate(&self, f_nominal_hz: f64, prefix: &str, errs: &mut Vec<FieldError>) {
        let mut need = |ok: bool, field: &str, msg: String| {
            if !ok {
                errs.push(FieldError::new(format!("{prefix}.{field}"), msg));
            }
        };
        need(
            self.p_max_mw > 0.0 && self.p_max_mw.is_finite(),
            "p_max_mw",
            format!("must be > 0, got {}", self.p_max_mw),
        );
        need(
            self.e_limit_mws > 0.0 && !self.e_limit_mws.is_nan(),
            "e_limit_mws",
            format!("must be > 0, got {}", self.e_limit_mws),
        );
        need(
            self.withdrawal_ramp_s >= 0.0 && self.withdrawal_ramp_s.is_finite(),
            "withdrawal_ramp_s",
            format!("must be >= 0, got {}", self.withdrawal_ramp_s),
        );
        match &self.controller {
            StorageController::Droop(c) => {
                need(
                    c.droop > 0.0 && c.droop.is_finite(),
                    "controller.droop",
                    format!("must be > 0, got {}", c.droop),
                );
                need(
                    c.deadband_hz >= 0.0 && c.deadband_hz.is_finite(),
                    "controller.deadband_hz",
                    format!("must be >= 0, got {}", c.deadband_hz),
                );
                need(
                    c.filter_time_s > 0.0 && c.filter_time_s.is_finite(),
                    "controller.filter_time_s",
                    format!("must be > 0, got {}", c.filter_time_s),
                );
            }
            StorageController::Step(c) => {
                need(
                    c.threshold_hz > 0.0 && c.threshold_hz < f_nominal_hz,
                    "controller.threshold_hz",
                    format!("must lie in (0, {f_nominal_hz}), got {}", c.threshold_hz),
                );
                need(
                    c.delay_s >= 0.0 && c.delay_s.is_finite(),
                    "controller.delay_s",
                    format!("must be >= 0, got {}", c.delay_s),
                );
                need(
                    c.alpha > 0.0 && c.alpha <= 1.0,
                    "controller.alpha",
                    format!("must lie in (0, 1], got {}", c.alpha),
                );
                need(
                    c.rocof_window_s > 0.0 && c.rocof_window_s.is_finite(),
                    "controller.rocof_window_s",
                    format!("must be > 0, got {}", c.rocof_window_s),
                );
                need(
                    c.h_sys_assumed_s > 0.0 && c.h_sys_assumed_s.is_finite(),
                    "controller.h_sys_assumed_s",
                    format!("must be > 0, got {}", c.h_sys_assumed_s),
                );
                need(
                    c.p_sys_assumed_mw > 0.0 && c.p_sys_assumed_mw.is_finite(),
                    "controller.p_sys_assumed_mw",
                    format!("must be > 0, got {}", c.p_sys_assumed_mw),
                );
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StorageController {
    Droop(DroopCtl),
    Step(StepCtl),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroopCtl {
    pub droop: f64,
    pub deadband_hz: f64,
    #[serde(default = "default_filter")]
    pub filter_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepCtl {
    pub threshold_hz: f64,
    /// Fault ride-through delay between trigger and injection.
    pub delay_s: f64,
    /// Step magnitude as a fraction of the estimated contingency.
    pub alpha: f64,
    #[serde(default = "default_window")]
    pub rocof_window_s: f64,
    /// System inertia the controller believes in (may differ from the fleet).
    pub h_sys_assumed_s: f64,
    pub p_sys_assumed_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopCommand {
    /// Time derivative of the filtered deviation, Hz/s.
    pub filter_rate: f64,
    pub power_mw: f64,
}

/// Droop controller evaluated at a filter state (`filtered_hz`, Hz deviation).
pub fn droop_command(
    ctl: &DroopCtl,
    filtered_hz: f64,
    f_coi_hz: f64,
    f_nominal_hz: f64,
    p_max_mw: f64,
) -> DroopCommand {
    let input = apply_deadband(f_coi_hz - f_nominal_hz, ctl.deadband_hz, DeadbandStyle::Offset);
    let power = -filtered_hz * p_max_mw / (ctl.droop * f_nominal_hz);
    DroopCommand {
        filter_rate: (input - filtered_hz) / ctl.filter_time_s,
        power_mw: power.clamp(0.0, p_max_mw),
    }
}

/// Least-squares slope of frequency against time.
pub fn estimate_rocof(times: &[f64], freqs: &[f64]) -> Result<f64> {
    if times.len() != freqs.len() {
        return Err(Error::RocofWindow(format!(
            "{} times vs {} frequencies",
            times.len(),
            freqs.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::RocofWindow(format!(
            "{} sample(s), need at least 2",
            times.len()
        )));
    }
    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let f_mean = freqs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, f) in times.iter().zip(freqs) {
        let dt = t - t_mean;
        sxy += dt * (f - f_mean);
        sxx += dt * dt;
    }
    if !(sxx > 0.0) {
        return Err(Error::RocofWindow("samples span zero time".into()));
    }
    Ok(sxy / sxx)
}

/// `α·2·H·|ROCOF|/f_N·P_sys`, clamped to `[0, P_max]`. Rising frequency
/// produces no step.
pub fn step_magnitude_mw(ctl: &StepCtl, rocof_hz_s: f64, f_nominal_hz: f64, p_max_mw: f64) -> f64 {
    let decline = (-rocof_hz_s).max(0.0);
    let p = ctl.alpha * 2.0 * ctl.h_sys_assumed_s * decline / f_nominal_hz * ctl.p_sys_assumed_mw;
    p.clamp(0.0, p_max_mw)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub enum StepLatch {
    #[default]
    Armed,
    Triggered {
        time: f64,
        times: Vec<f64>,
        freqs: Vec<f64>,
    },
    Issued {
        trigger_time: f64,
        time: f64,
        rocof_hz_s: f64,
        p_step_mw: f64,
    },
}

/// Transition reported by [`step_command`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepTransition {
    Triggered,
    Issued { rocof_hz_s: f64, p_step_mw: f64 },
}

const TIMER_EPS: f64 = 1e-9;

/// Advance the step controller at one boundary and return its command.
///
/// The ROCOF window starts at the trigger and spans `rocof_window_s`; the
/// step is issued once both the ride-through delay and the window have
/// elapsed.
pub fn step_command(
    ctl: &StepCtl,
    latch: &mut StepLatch,
    f_coi_hz: f64,
    t: f64,
    f_nominal_hz: f64,
    p_max_mw: f64,
) -> (f64, Option<StepTransition>) {
    let mut transition = None;
    if matches!(latch, StepLatch::Armed) && f_coi_hz < ctl.threshold_hz {
        *latch = StepLatch::Triggered {
            time: t,
            times: Vec::new(),
            freqs: Vec::new(),
        };
        transition = Some(StepTransition::Triggered);
    }
    if let StepLatch::Triggered { time, times, freqs } = latch {
        let trigger = *time;
        if t <= trigger + ctl.rocof_window_s + TIMER_EPS {
            times.push(t);
            freqs.push(f_coi_hz);
        }
        let wait = ctl.delay_s.max(ctl.rocof_window_s);
        if t - trigger >= wait - TIMER_EPS {
            // window always holds >= 2 samples once rocof_window_s >= dt
            let rocof = estimate_rocof(times, freqs).unwrap_or(0.0);
            let p_step = step_magnitude_mw(ctl, rocof, f_nominal_hz, p_max_mw);
            *latch = StepLatch::Issued {
                trigger_time: trigger,
                time: t,
                rocof_hz_s: rocof,
                p_step_mw: p_step,
            };
            transition = Some(StepTransition::Issued {
                rocof_hz_s: rocof,
                p_step_mw: p_step,
            });
        }
    }
    let power = match latch {
        StepLatch::Issued { p_step_mw, .. } => *p_step_mw,
        _ => 0.0,
    };
    (power, transition)
}

/// Energy bookkeeping for one storage unit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyState {
    pub energy_used_mws: f64,
    /// Start of withdrawal: (time, power level at that moment).
    pub withdrawal: Option<(f64, f64)>,
    pub depleted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyUpdate {
    pub delivered_mw: f64,
    /// Set on the boundary where withdrawal begins.
    pub exhausted_now: bool,
}

/// Deliver `commanded_mw` for one step of length `dt` subject to the
/// energy limit. Withdrawal starts early enough that the ramp to zero
/// still fits inside the remaining energy.
pub fn energy_update(
    unit: &StorageUnit,
    state: &mut EnergyState,
    commanded_mw: f64,
    t: f64,
    dt: f64,
) -> EnergyUpdate {
    let commanded = commanded_mw.clamp(0.0, unit.p_max_mw);
    let remaining = (unit.e_limit_mws - state.energy_used_mws).max(0.0);
    let tol = unit.e_limit_mws * 1e-12;
    let ramp = unit.withdrawal_ramp_s;
    let mut exhausted_now = false;

    if state.withdrawal.is_none()
        && !state.depleted
        && commanded > 0.0
        && remaining <= commanded * ramp / 2.0 + tol
    {
        state.withdrawal = Some((t, commanded));
        exhausted_now = true;
    }

    let target = match state.withdrawal {
        _ if state.depleted => 0.0,
        None => commanded,
        Some((t0, p0)) => {
            if ramp > 0.0 {
                (p0 * (1.0 - (t - t0) / ramp)).max(0.0)
            } else {
                0.0
            }
        }
    };
    let delivered = target.min(remaining / dt);
    if state.withdrawal.is_some() && delivered <= 0.0 {
        state.depleted = true;
    }
    state.energy_used_mws += delivered * dt;
    EnergyUpdate {
        delivered_mw: delivered,
        exhausted_now,
    }
}

/// Runtime state of one storage unit.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StorageState {
    pub energy: EnergyState,
    pub latch: StepLatch,
    /// Power held over the current step.
    pub output_mw: f64,
}
