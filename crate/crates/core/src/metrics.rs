//! COI frequency and primary-frequency-response metrics.

use serde::Serialize;

use crate::dynamics::Trace;
use crate::error::{Error, Result};
use crate::governor::ufls_crossing;
use crate::model::ScenarioConfig;
use crate::storage::estimate_rocof;

/// ROCOF is measured over this long after the contingency.
pub const ROCOF_WINDOW_S: f64 = 0.5;

const EPS_T: f64 = 1e-9;

/// Inertia-weighted mean frequency `Σ H_i·f_i / Σ H_i`.
pub fn coi_frequency(freqs_hz: &[f64], weights_mws: &[f64]) -> Result<f64> {
    if freqs_hz.is_empty() || freqs_hz.len() != weights_mws.len() {
        return Err(Error::Input(format!(
            "coi_frequency needs equal non-empty inputs, got {} frequencies and {} weights",
            freqs_hz.len(),
            weights_mws.len()
        )));
    }
    if let Some(w) = weights_mws.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::Input(format!("inertia weight must be positive, got {w}")));
    }
    // deviations from the first entry keep a single machine (or equal
    // frequencies) exact
    let f_ref = freqs_hz[0];
    let (num, den) = freqs_hz
        .iter()
        .zip(weights_mws)
        .fold((0.0, 0.0), |(n, d), (f, w)| (n + (f - f_ref) * w, d + w));
    Ok(f_ref + num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsParams {
    pub delta_p_mw: f64,
    pub contingency_time_s: f64,
    /// Averaging window in seconds after the contingency.
    pub settle_window_s: [f64; 2],
    pub ufls_threshold_hz: f64,
}

impl MetricsParams {
    pub fn for_scenario(config: &ScenarioConfig) -> Self {
        Self {
            delta_p_mw: config.contingency.magnitude_mw,
            contingency_time_s: config.contingency.time_s,
            settle_window_s: config.sim.settle_window_s,
            ufls_threshold_hz: config.system.ufls_threshold_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyMetrics {
    /// Starting frequency at the contingency instant.
    pub f0_hz: f64,
    pub nadir_hz: f64,
    /// Absolute trace time of the nadir.
    pub nadir_time_s: f64,
    pub ufls_time_s: Option<f64>,
    pub rocof_hz_per_s: f64,
    pub settling_hz: f64,
    /// Frequency response, MW per 0.1 Hz; absent without a net decline.
    pub fr_mw_per_0p1hz: Option<f64>,
    /// Nadir-based frequency response, MW per 0.1 Hz.
    pub frn_mw_per_0p1hz: Option<f64>,
}

impl FrequencyMetrics {
    pub fn fr_mw_per_hz(&self) -> Option<f64> {
        self.fr_mw_per_0p1hz.map(|v| v * 10.0)
    }

    pub fn frn_mw_per_hz(&self) -> Option<f64> {
        self.frn_mw_per_0p1hz.map(|v| v * 10.0)
    }
}

pub fn compute_metrics(trace: &Trace, params: &MetricsParams) -> Result<FrequencyMetrics> {
    metrics_from_series(&trace.times, &trace.f_coi, params)
}

/// Metrics from a uniformly or non-uniformly sampled COI frequency series.
pub fn metrics_from_series(
    times: &[f64],
    freqs: &[f64],
    params: &MetricsParams,
) -> Result<FrequencyMetrics> {
    if times.len() != freqs.len() || times.is_empty() {
        return Err(Error::Input("trace series must be non-empty and equal length".into()));
    }
    let tc = params.contingency_time_s;
    let k0 = times
        .iter()
        .position(|&t| t >= tc - EPS_T)
        .ok_or_else(|| Error::TraceCoverage {
            what: format!("the contingency time {tc} s"),
        })?;
    let f0 = freqs[k0];

    let mut kmin = k0;
    for k in k0..freqs.len() {
        if freqs[k] < freqs[kmin] {
            kmin = k;
        }
    }
    let nadir_hz = freqs[kmin];
    let nadir_time_s = refine_minimum_time(times, freqs, kmin, k0);

    let (wt, wf): (Vec<f64>, Vec<f64>) = times[k0..]
        .iter()
        .zip(&freqs[k0..])
        .take_while(|(t, _)| **t <= tc + ROCOF_WINDOW_S + EPS_T)
        .map(|(t, f)| (*t, *f))
        .unzip();
    let rocof = estimate_rocof(&wt, &wf)?;

    let [w0, w1] = params.settle_window_s;
    let settling_hz = window_mean(times, freqs, tc + w0, tc + w1)?;

    let per_0p1 = |dev: f64| (dev > 0.0).then(|| params.delta_p_mw * 0.1 / dev);
    Ok(FrequencyMetrics {
        f0_hz: f0,
        nadir_hz,
        nadir_time_s,
        ufls_time_s: ufls_crossing(times, freqs, params.ufls_threshold_hz),
        rocof_hz_per_s: rocof,
        settling_hz,
        fr_mw_per_0p1hz: per_0p1(f0 - settling_hz),
        frn_mw_per_0p1hz: per_0p1(f0 - nadir_hz),
    })
}

/// Vertex of the parabola through the minimum sample and its neighbours,
/// kept within half a sample of the discrete argmin.
fn refine_minimum_time(times: &[f64], freqs: &[f64], k: usize, first: usize) -> f64 {
    if k <= first || k + 1 >= freqs.len() {
        return times[k];
    }
    let (a, b, c) = (freqs[k - 1], freqs[k], freqs[k + 1]);
    let curvature = a - 2.0 * b + c;
    if !(curvature > 0.0) {
        return times[k];
    }
    let h = 0.5 * (times[k + 1] - times[k - 1]);
    let offset = (0.5 * (a - c) / curvature).clamp(-0.5, 0.5);
    times[k] + offset * h
}

fn interpolate(times: &[f64], freqs: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&x| x < t);
    if k == 0 {
        return freqs[0];
    }
    if k >= times.len() {
        return freqs[times.len() - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    freqs[k - 1] + w * (freqs[k] - freqs[k - 1])
}

/// Time average over `[a, b]` by the trapezoidal rule on the linear
/// interpolant of the samples.
fn window_mean(times: &[f64], freqs: &[f64], a: f64, b: f64) -> Result<f64> {
    let last = *times.last().unwrap();
    if a < times[0] - EPS_T || b > last + EPS_T {
        return Err(Error::TraceCoverage {
            what: format!("the settling window [{a}, {b}] s (trace spans [{}, {last}] s)", times[0]),
        });
    }
    let b = b.min(last);
    let mut pts = vec![(a, interpolate(times, freqs, a))];
    pts.extend(
        times
            .iter()
            .zip(freqs)
            .filter(|(t, _)| **t > a && **t < b)
            .map(|(t, f)| (*t, *f)),
    );
    pts.push((b, interpolate(times, freqs, b)));
    let f_ref = pts[0].1;
    let area: f64 = pts
        .windows(2)
        .map(|w| 0.5 * ((w[0].1 - f_ref) + (w[1].1 - f_ref)) * (w[1].0 - w[0].0))
        .sum();
    Ok(f_ref + area / (b - a))
}
