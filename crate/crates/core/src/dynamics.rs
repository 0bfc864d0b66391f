//! Fixed-step integration of the swing / governor / controller state.
//!
//! Continuous states advance by classical RK4. Everything discrete
//! (contingency, deadband branches, relay timers, storage latches, held
//! storage power, energy exhaustion) is evaluated once at each step
//! boundary and held constant inside the step.
//!
//! All powers inside the right-hand side are pu on the system base.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::governor::{
    frl_update, governor_derivatives, governor_output, DeadbandBranch, FrlState, GovernorState,
};
use crate::metrics::{coi_frequency, compute_metrics, FrequencyMetrics, MetricsParams};
use crate::model::{build_fleet, Fleet, NetworkMode, ScenarioConfig};
use crate::storage::{
    droop_command, energy_update, step_command, StepTransition, StorageController, StorageState,
};

const EPS_T: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Contingency,
    FrlTrip,
    StepTrigger,
    StepIssue,
    StorageExhausted,
    UflsCrossing,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Contingency => "contingency",
            Self::FrlTrip => "frl_trip",
            Self::StepTrigger => "step_trigger",
            Self::StepIssue => "step_issue",
            Self::StorageExhausted => "storage_exhausted",
            Self::UflsCrossing => "ufls_crossing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub time_s: f64,
    pub kind: EventKind,
    pub detail: String,
}

/// Sampled simulation output on a uniform grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub f_coi: Vec<f64>,
    pub group_names: Vec<String>,
    /// `group_freqs[i][k]`: frequency of group `i` at sample `k`.
    pub group_freqs: Vec<Vec<f64>>,
    /// Governor mechanical power deviation per group, MW.
    pub governor_mw: Vec<Vec<f64>>,
    pub storage_names: Vec<String>,
    /// Delivered storage power per unit, MW.
    pub storage_mw: Vec<Vec<f64>>,
    /// Load relief from fast responsive load, MW (present iff FRL configured).
    pub frl_relief_mw: Option<Vec<f64>>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// Full dynamic state: continuous vector plus discrete/held quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimState {
    pub step_index: u64,
    pub t: f64,
    /// Continuous states, laid out by [`Layout`].
    pub x: Vec<f64>,
    pub branches: Vec<DeadbandBranch>,
    pub storage: Vec<StorageState>,
    pub frl: Option<FrlState>,
    pub frl_relief_mw: f64,
    pub contingency_applied: bool,
    /// Net load-side imbalance ΔP_L (contingency minus load relief), pu.
    pub load_imbalance_pu: f64,
    /// Multiplier on all inertia after the contingency.
    pub inertia_scale: f64,
    pub ufls_crossed: bool,
    pub events: Vec<Event>,
}

/// Index map into the continuous state vector.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    groups: usize,
    speeds: usize,
    angles: usize,
    storage: usize,
}

impl Layout {
    fn new(mode: NetworkMode, groups: usize, storage: usize) -> Self {
        let (speeds, angles) = match mode {
            NetworkMode::Coi => (1, 0),
            NetworkMode::Multimachine => (groups, groups),
        };
        Self {
            groups,
            speeds,
            angles,
            storage,
        }
    }

    pub fn len(&self) -> usize {
        self.speeds + self.angles + 2 * self.groups + self.storage
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn speed(&self, group: usize) -> usize {
        if self.speeds == 1 {
            0
        } else {
            group
        }
    }

    pub fn angle(&self, group: usize) -> usize {
        self.speeds + group
    }

    pub fn lag(&self, group: usize) -> usize {
        self.speeds + self.angles + 2 * group
    }

    pub fn leadlag(&self, group: usize) -> usize {
        self.lag(group) + 1
    }

    pub fn filter(&self, unit: usize) -> usize {
        self.speeds + self.angles + 2 * self.groups + unit
    }
}

/// Inertial and net-power sides of the lumped swing equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBalance {
    /// `2·H·dΔω/dt`, pu.
    pub inertial: f64,
    /// `ΣΔP_m + P_storage − ΔP_L − D·Δω`, pu.
    pub net: f64,
}

/// Immutable plant description derived from a fleet and a scenario.
pub struct Simulator<'a> {
    fleet: &'a Fleet,
    config: &'a ScenarioConfig,
    layout: Layout,
    f_nominal: f64,
    s_base: f64,
    dt: f64,
    /// `H_i·S_i`, MW·s.
    weights_mws: Vec<f64>,
    /// `H_i·S_i / S_base`.
    inertia_pu: Vec<f64>,
    /// Load-allocation weights, proportional to capacity.
    shares: Vec<f64>,
    coupling: Vec<Vec<f64>>,
    h_sys: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(fleet: &'a Fleet, config: &'a ScenarioConfig) -> Result<Self> {
        crate::model::validate_scenario(config)?;
        let n = fleet.groups.len();
        if n != config.fleet.len() {
            return Err(Error::Input(format!(
                "fleet has {n} groups but the scenario template has {}",
                config.fleet.len()
            )));
        }
        let s_base = fleet.s_base_mva;
        let weights_mws: Vec<f64> = fleet.groups.iter().map(|g| g.kinetic_energy_mws()).collect();
        let total_cap = fleet.synchronous_capacity_mw();
        let coupling = config
            .sim
            .coupling
            .clone()
            .unwrap_or_else(|| vec![vec![0.0; n]; n]);
        Ok(Self {
            fleet,
            config,
            layout: Layout::new(config.sim.network_mode, n, config.storage.len()),
            f_nominal: config.system.f_nominal_hz,
            s_base,
            dt: config.sim.dt_s,
            inertia_pu: weights_mws.iter().map(|w| w / s_base).collect(),
            weights_mws,
            shares: fleet.groups.iter().map(|g| g.capacity_mw / total_cap).collect(),
            coupling,
            h_sys: fleet.h_sys_s,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mode(&self) -> NetworkMode {
        self.config.sim.network_mode
    }

    pub fn steps(&self) -> u64 {
        (self.config.sim.horizon_s / self.dt - 1e-9).ceil() as u64
    }

    /// Pre-contingency equilibrium: every deviation zero.
    pub fn initial_state(&self) -> Result<SimState> {
        let state = SimState {
            step_index: 0,
            t: 0.0,
            x: vec![0.0; self.layout.len()],
            branches: vec![DeadbandBranch::Inside; self.fleet.groups.len()],
            storage: vec![StorageState::default(); self.config.storage.len()],
            frl: self.config.frl.as_ref().map(|_| FrlState::default()),
            frl_relief_mw: 0.0,
            contingency_applied: false,
            load_imbalance_pu: 0.0,
            inertia_scale: 1.0,
            ufls_crossed: false,
            events: Vec::new(),
        };
        let residual = self
            .derivatives(&state.x, &state)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt();
        if !(residual < 1e-14) {
            return Err(Error::Equilibrium { residual });
        }
        Ok(state)
    }

    pub fn group_frequency(&self, x: &[f64], group: usize) -> f64 {
        self.f_nominal * (1.0 + x[self.layout.speed(group)])
    }

    pub fn coi_frequency(&self, x: &[f64]) -> f64 {
        match self.mode() {
            NetworkMode::Coi => self.f_nominal * (1.0 + x[0]),
            NetworkMode::Multimachine => {
                let f: Vec<f64> = (0..self.fleet.groups.len())
                    .map(|i| self.group_frequency(x, i))
                    .collect();
                coi_frequency(&f, &self.weights_mws).expect("validated positive inertia")
            }
        }
    }

    /// Governor mechanical power deviation of one group, pu on the system base.
    fn mech_power_pu(&self, x: &[f64], group: usize) -> f64 {
        let g = &self.fleet.groups[group];
        if !g.governor_enabled {
            return 0.0;
        }
        let lag = x[self.layout.lag(group)];
        let ll = x[self.layout.leadlag(group)];
        governor_output(lag, ll, g) * g.capacity_mw / self.s_base
    }

    fn storage_pu(&self, state: &SimState) -> f64 {
        state.storage.iter().map(|s| s.output_mw).sum::<f64>() / self.s_base
    }

    /// Right-hand side with discrete inputs taken from `held`.
    pub fn derivatives(&self, x: &[f64], held: &SimState) -> Vec<f64> {
        let lay = &self.layout;
        let mut dx = vec![0.0; x.len()];
        let mut mech = vec![0.0; self.fleet.groups.len()];

        for (i, g) in self.fleet.groups.iter().enumerate() {
            if !g.governor_enabled {
                continue;
            }
            let gov = GovernorState {
                lag: x[lay.lag(i)],
                leadlag: x[lay.leadlag(i)],
                branch: held.branches[i],
            };
            let rates = governor_derivatives(&gov, x[lay.speed(i)], g, self.f_nominal);
            dx[lay.lag(i)] = rates.d_lag;
            dx[lay.leadlag(i)] = rates.d_leadlag;
            mech[i] = rates.mech_power * g.capacity_mw / self.s_base;
        }

        let injection = self.storage_pu(held);
        let d_load = self.config.system.d_load;
        match self.mode() {
            NetworkMode::Coi => {
                let w = x[0];
                let net = mech.iter().sum::<f64>() + injection - held.load_imbalance_pu - d_load * w;
                dx[0] = net / (2.0 * self.h_sys * held.inertia_scale);
            }
            NetworkMode::Multimachine => {
                let n = self.fleet.groups.len();
                for i in 0..n {
                    let w = x[lay.speed(i)];
                    let di = x[lay.angle(i)];
                    let sync: f64 = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| self.coupling[i][j] * (di - x[lay.angle(j)]))
                        .sum();
                    let a = self.shares[i];
                    let electrical = sync + a * (held.load_imbalance_pu - injection);
                    let h = self.inertia_pu[i] * held.inertia_scale;
                    dx[lay.speed(i)] = (mech[i] - electrical - a * d_load * w) / (2.0 * h);
                    dx[lay.angle(i)] = 2.0 * PI * self.f_nominal * w;
                }
            }
        }

        if self.config.storage.iter().any(|u| matches!(u.controller, StorageController::Droop(_))) {
            let f_coi = self.coi_frequency(x);
            for (j, unit) in self.config.storage.iter().enumerate() {
                if let StorageController::Droop(ctl) = &unit.controller {
                    let cmd = droop_command(ctl, x[lay.filter(j)], f_coi, self.f_nominal, unit.p_max_mw);
                    dx[lay.filter(j)] = cmd.filter_rate;
                }
            }
        }
        dx
    }

    /// Lumped swing-equation balance at the current state (coi mode).
    pub fn power_balance(&self, state: &SimState) -> PowerBalance {
        let dx = self.derivatives(&state.x, state);
        let w = state.x[0];
        let mech: f64 = (0..self.fleet.groups.len()).map(|i| self.mech_power_pu(&state.x, i)).sum();
        PowerBalance {
            inertial: 2.0 * self.h_sys * state.inertia_scale * dx[0],
            net: mech + self.storage_pu(state) - state.load_imbalance_pu
                - self.config.system.d_load * w,
        }
    }

    /// Evaluate every discrete transition at the boundary `state.t`.
    pub fn update_discrete(&self, state: &mut SimState) {
        let t = state.t;
        let f_coi = self.coi_frequency(&state.x);
        let cont = &self.config.contingency;

        if !state.contingency_applied && t >= cont.time_s - EPS_T {
            state.contingency_applied = true;
            if cont.removed_inertia_mws > 0.0 {
                let total: f64 = self.weights_mws.iter().sum();
                state.inertia_scale = 1.0 - cont.removed_inertia_mws / total;
            }
            state.events.push(Event {
                time_s: t,
                kind: EventKind::Contingency,
                detail: format!("generation loss {} MW", cont.magnitude_mw),
            });
        }

        for (i, g) in self.fleet.groups.iter().enumerate() {
            let df = state.x[self.layout.speed(i)] * self.f_nominal;
            state.branches[i] = DeadbandBranch::classify(df, g.deadband_hz);
        }

        if let (Some(params), Some(frl)) = (&self.config.frl, state.frl.as_mut()) {
            let was = frl.tripped;
            state.frl_relief_mw = frl_update(frl, f_coi, t, params);
            if frl.tripped && !was {
                state.events.push(Event {
                    time_s: t,
                    kind: EventKind::FrlTrip,
                    detail: format!("relief {} MW", params.block_mw),
                });
            }
        }

        let contingency_pu = if state.contingency_applied {
            cont.magnitude_mw / self.s_base
        } else {
            0.0
        };
        state.load_imbalance_pu = contingency_pu - state.frl_relief_mw / self.s_base;

        if !state.ufls_crossed && f_coi <= self.config.system.ufls_threshold_hz {
            state.ufls_crossed = true;
            state.events.push(Event {
                time_s: t,
                kind: EventKind::UflsCrossing,
                detail: format!("f_coi {f_coi} Hz"),
            });
        }

        for (j, unit) in self.config.storage.iter().enumerate() {
            let st = &mut state.storage[j];
            let commanded = match &unit.controller {
                StorageController::Droop(ctl) => {
                    let filt = state.x[self.layout.filter(j)];
                    droop_command(ctl, filt, f_coi, self.f_nominal, unit.p_max_mw).power_mw
                }
                StorageController::Step(ctl) => {
                    let (p, tr) =
                        step_command(ctl, &mut st.latch, f_coi, t, self.f_nominal, unit.p_max_mw);
                    match tr {
                        Some(StepTransition::Triggered) => state.events.push(Event {
                            time_s: t,
                            kind: EventKind::StepTrigger,
                            detail: format!("{}: f_coi {f_coi} Hz", unit.name),
                        }),
                        Some(StepTransition::Issued {
                            rocof_hz_s,
                            p_step_mw,
                        }) => state.events.push(Event {
                            time_s: t,
                            kind: EventKind::StepIssue,
                            detail: format!("{}: rocof {rocof_hz_s} Hz/s, step {p_step_mw} MW", unit.name),
                        }),
                        None => {}
                    }
                    p
                }
            };
            let up = energy_update(unit, &mut st.energy, commanded, t, self.dt);
            st.output_mw = up.delivered_mw;
            if up.exhausted_now {
                state.events.push(Event {
                    time_s: t,
                    kind: EventKind::StorageExhausted,
                    detail: format!("{}: used {} MW·s", unit.name, st.energy.energy_used_mws),
                });
            }
        }
    }

    /// One RK4 step of the continuous states with discrete inputs held.
    pub fn integrate(&self, state: &mut SimState) -> Result<()> {
        let h = self.dt;
        let x0 = &state.x;
        let stage = |k: &[f64], s: f64| -> Vec<f64> {
            x0.iter().zip(k).map(|(x, d)| x + s * d).collect()
        };
        let k1 = self.derivatives(x0, state);
        let k2 = self.derivatives(&stage(&k1, h / 2.0), state);
        let k3 = self.derivatives(&stage(&k2, h / 2.0), state);
        let k4 = self.derivatives(&stage(&k3, h), state);
        let next: Vec<f64> = (0..x0.len())
            .map(|i| x0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        state.step_index += 1;
        state.t = state.step_index as f64 * h;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: state.t });
        }
        state.x = next;
        Ok(())
    }

    /// Boundary events followed by one integration step.
    pub fn step(&self, state: &mut SimState) -> Result<()> {
        self.update_discrete(state);
        self.integrate(state)
    }

    fn empty_trace(&self, capacity: usize) -> Trace {
        let n = self.fleet.groups.len();
        let m = self.config.storage.len();
        Trace {
            times: Vec::with_capacity(capacity),
            f_coi: Vec::with_capacity(capacity),
            group_names: self.fleet.groups.iter().map(|g| g.name.clone()).collect(),
            group_freqs: vec![Vec::with_capacity(capacity); n],
            governor_mw: vec![Vec::with_capacity(capacity); n],
            storage_names: self.config.storage.iter().map(|u| u.name.clone()).collect(),
            storage_mw: vec![Vec::with_capacity(capacity); m],
            frl_relief_mw: self.config.frl.as_ref().map(|_| Vec::with_capacity(capacity)),
            events: Vec::new(),
        }
    }

    fn record(&self, trace: &mut Trace, state: &SimState) {
        trace.times.push(state.t);
        trace.f_coi.push(self.coi_frequency(&state.x));
        for (i, g) in self.fleet.groups.iter().enumerate() {
            trace.group_freqs[i].push(self.group_frequency(&state.x, i));
            trace.governor_mw[i].push(self.mech_power_pu(&state.x, i) * self.s_base);
            let _ = g;
        }
        for (j, st) in state.storage.iter().enumerate() {
            trace.storage_mw[j].push(st.output_mw);
        }
        if let Some(relief) = trace.frl_relief_mw.as_mut() {
            relief.push(state.frl_relief_mw);
        }
    }

    pub fn run(&self) -> Result<Trace> {
        let steps = self.steps();
        let mut state = self.initial_state()?;
        let mut trace = self.empty_trace(steps as usize + 1);
        for k in 0..=steps {
            self.update_discrete(&mut state);
            self.record(&mut trace, &state);
            if k == steps {
                break;
            }
            self.integrate(&mut state)?;
        }
        trace.events = std::mem::take(&mut state.events);
        Ok(trace)
    }
}

/// Simulate one scenario on an already-built fleet.
pub fn simulate(fleet: &Fleet, config: &ScenarioConfig) -> Result<Trace> {
    Simulator::new(fleet, config)?.run()
}

/// Fleet, trace and metrics of one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub fleet: Fleet,
    pub trace: Trace,
    pub metrics: FrequencyMetrics,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let fleet = build_fleet(config)?;
    let trace = simulate(&fleet, config)?;
    let metrics = compute_metrics(&trace, &MetricsParams::for_scenario(config))?;
    Ok(ScenarioRun {
        fleet,
        trace,
        metrics,
    })
}
