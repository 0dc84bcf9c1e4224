//! Fixed-step closed-loop scenarios.
//!
//! The converter advances at the buck step `dt` while the controller samples
//! at its own, coarser period. The panel is treated as quasi-static: at every
//! converter step its voltage is the one at which it delivers the current the
//! converter draws, `u * i_L`.

use alloc::vec::Vec;

use libm::{ceil, fabs, floor, round, sqrt};

use crate::buck::{self, BuckParams, BuckState, DutyCycle};
use crate::controllers::{
    ampo_ann_step, ampo_step, cpoa_step, ControllerConfig, ControllerKind, ControllerState, Measurement,
};
use crate::error::{Error, Result};
use crate::inverter::{simulate_rl_load, InverterSample, RlLoad, SinePwm};
use crate::neural::{train_estimators, MppNetworks, NeuralConfig, DEFAULT_SEED};
use crate::pv_model::{EnvConditions, PanelAt, PanelParams, ORACLE_SWEEP_POINTS};

/// Power band around the oracle MPP that counts as settled.
pub const SETTLE_BAND: f64 = 0.02;
/// Consecutive in-band samples needed to count as settled.
pub const SETTLE_SAMPLES: usize = 50;
/// Trailing fraction of a segment used for steady-state statistics.
pub const STEADY_FRACTION: f64 = 0.2;

pub const STC_DURATION: f64 = 0.5;
pub const STEP_DURATION: f64 = 1.0;
pub const STEP_TIME: f64 = 0.5;

/// Conditions from `start` until the next segment (or the end of the
/// profile), moving linearly from `from` to `to`. Equal endpoints give a
/// constant segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSegment {
    pub start: f64,
    pub from: EnvConditions,
    pub to: EnvConditions,
}

impl ProfileSegment {
    pub fn constant(start: f64, env: EnvConditions) -> Self {
        ProfileSegment {
            start,
            from: env,
            to: env,
        }
    }

    pub fn ramp(start: f64, from: EnvConditions, to: EnvConditions) -> Self {
        ProfileSegment { start, from, to }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProfile {
    /// [s]
    pub duration: f64,
    pub segments: Vec<ProfileSegment>,
}

impl ScenarioProfile {
    pub fn new(duration: f64, segments: Vec<ProfileSegment>) -> Result<Self> {
        let p = ScenarioProfile { duration, segments };
        p.validate()?;
        Ok(p)
    }

    /// 1000 W/m², 25 °C throughout.
    pub fn stc() -> Self {
        ScenarioProfile {
            duration: STC_DURATION,
            segments: alloc::vec![ProfileSegment::constant(0.0, EnvConditions::stc())],
        }
    }

    /// 500 W/m² stepping to 1000 W/m² at 0.5 s, 25 °C.
    pub fn step_irradiance() -> Self {
        ScenarioProfile {
            duration: STEP_DURATION,
            segments: alloc::vec![
                ProfileSegment::constant(0.0, EnvConditions::from_celsius(500.0, 25.0)),
                ProfileSegment::constant(STEP_TIME, EnvConditions::stc()),
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "stc" => Some(Self::stc()),
            "step_irradiance" => Some(Self::step_irradiance()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidInput("profile duration must be finite and >= 0"));
        }
        let first = self
            .segments
            .first()
            .ok_or(Error::InvalidInput("profile needs at least one segment"))?;
        if first.start != 0.0 {
            return Err(Error::InvalidInput("first profile segment must start at 0"));
        }
        if self.segments.windows(2).any(|w| !(w[1].start > w[0].start)) {
            return Err(Error::InvalidInput("segment start times must be strictly increasing"));
        }
        if self.segments.len() > 1 && self.segments.last().unwrap().start >= self.duration {
            return Err(Error::InvalidInput("every segment must start before the profile ends"));
        }
        for s in &self.segments {
            s.from.validate()?;
            s.to.validate()?;
        }
        Ok(())
    }

    /// Conditions at time `t`. Segments are right-continuous: at a switch
    /// instant the new segment applies.
    pub fn eval(&self, t: f64) -> Result<EnvConditions> {
        if !(t >= 0.0 && t <= self.duration) {
            return Err(Error::OutOfRange {
                t,
                duration: self.duration,
            });
        }
        let k = self.segments.partition_point(|s| s.start <= t).max(1) - 1;
        let seg = &self.segments[k];
        if seg.from == seg.to {
            return Ok(seg.from);
        }
        let end = self.segments.get(k + 1).map_or(self.duration, |s| s.start);
        let span = end - seg.start;
        let f = if span > 0.0 { (t - seg.start) / span } else { 0.0 };
        Ok(EnvConditions::new(
            seg.from.g + f * (seg.to.g - seg.from.g),
            seg.from.t + f * (seg.to.t - seg.from.t),
        ))
    }
}

pub fn profile_eval(p: &ScenarioProfile, t: f64) -> Result<EnvConditions> {
    p.eval(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub panel: PanelParams,
    pub buck: BuckParams,
    /// `kind` is ignored; the controller is chosen per run.
    pub controller: ControllerConfig,
    pub neural: NeuralConfig,
    /// Duty before the first controller decision.
    pub initial_duty: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            panel: PanelParams::default(),
            buck: BuckParams::default(),
            controller: ControllerConfig::default(),
            neural: NeuralConfig::default(),
            initial_duty: 0.0,
            seed: DEFAULT_SEED,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.panel.validate()?;
        self.buck.validate()?;
        if self.buck.dt > self.buck.max_stable_dt() {
            return Err(Error::UnstableStep {
                dt: self.buck.dt,
                limit: self.buck.max_stable_dt(),
            });
        }
        self.controller.validate()?;
        if !(0.0..=1.0).contains(&self.initial_duty) {
            return Err(Error::InvalidInput("initial duty must lie in [0, 1]"));
        }
        self.steps_per_tick().map(|_| ())
    }

    /// Converter steps per controller period; the period must be a whole
    /// multiple of `dt`.
    pub fn steps_per_tick(&self) -> Result<usize> {
        let ratio = self.controller.sample_period_s / self.buck.dt;
        let n = round(ratio);
        if n < 1.0 || fabs(ratio - n) > 1e-6 * n {
            return Err(Error::InvalidInput(
                "controller period must be a whole multiple of the buck step",
            ));
        }
        Ok(n as usize)
    }
}

/// One controller-period sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub g: f64,
    /// Cell temperature [K].
    pub t_cell: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    pub p_pv: f64,
    /// Duty applied over the period ending at `t`.
    pub duty: f64,
    pub v_out: f64,
    pub i_l: f64,
    pub p_mpp_oracle: f64,
}

impl TraceRow {
    pub const HEADER: [&'static str; 10] = [
        "t",
        "g",
        "t_cell",
        "v_pv",
        "i_pv",
        "p_pv",
        "duty",
        "v_out",
        "i_l",
        "p_mpp_oracle",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.t,
            self.g,
            self.t_cell,
            self.v_pv,
            self.i_pv,
            self.p_pv,
            self.duty,
            self.v_out,
            self.i_l,
            self.p_mpp_oracle,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub kind: ControllerKind,
    /// Controller period [s].
    pub period: f64,
    pub rows: Vec<TraceRow>,
}

/// Panel quantities for one set of conditions, reused while they hold.
struct PanelCache {
    env: EnvConditions,
    panel: PanelAt,
    v_oc: Option<f64>,
    p_mpp: Option<f64>,
}

impl PanelCache {
    fn new(params: &PanelParams, env: EnvConditions) -> Self {
        PanelCache {
            env,
            panel: PanelAt::new(params, env),
            v_oc: None,
            p_mpp: None,
        }
    }

    fn update(&mut self, params: &PanelParams, env: EnvConditions) {
        if env != self.env {
            *self = PanelCache::new(params, env);
        }
    }

    fn v_oc(&mut self) -> Result<f64> {
        if let Some(v) = self.v_oc {
            return Ok(v);
        }
        let v = self.panel.open_circuit_voltage()?;
        self.v_oc = Some(v);
        Ok(v)
    }

    fn p_mpp(&mut self) -> Result<f64> {
        if let Some(p) = self.p_mpp {
            return Ok(p);
        }
        let p = if self.env.g > 0.0 {
            self.panel.mpp(ORACLE_SWEEP_POINTS)?.p
        } else {
            0.0
        };
        self.p_mpp = Some(p);
        Ok(p)
    }
}

/// Panel voltage and current when the converter draws `u * i_L`. A demand
/// beyond the short-circuit current pins the panel at `V = 0`.
pub fn coupled_operating_point(panel: &PanelAt, u: DutyCycle, state: BuckState) -> Result<(f64, f64)> {
    let demand = u.value() * state.i_l;
    let v = panel.voltage_at_current(demand)?;
    if v < 0.0 {
        Ok((0.0, panel.current(0.0)?))
    } else {
        Ok((v, demand))
    }
}

/// Runs one controller over `profile`. `networks` is only used by the
/// neural-assisted controller, which trains its own when none are given.
pub fn run_scenario(
    profile: &ScenarioProfile,
    kind: ControllerKind,
    config: &SimConfig,
    networks: Option<&MppNetworks>,
) -> Result<SimTrace> {
    profile.validate()?;
    config.validate()?;
    let period = config.controller.sample_period_s;
    let mut trace = SimTrace {
        kind,
        period,
        rows: Vec::new(),
    };
    if profile.duration == 0.0 {
        return Ok(trace);
    }

    let trained;
    let networks = match (kind, networks) {
        (ControllerKind::AmpoAnn, None) => {
            trained = train_estimators(&config.panel, &config.neural, config.seed)?.networks();
            Some(&trained)
        }
        (_, n) => n,
    };

    let steps = config.steps_per_tick()?;
    let dt = config.buck.dt;
    let ticks = floor(profile.duration / period + 1e-9) as usize;
    trace.rows.reserve(ticks + 1);

    let ctrl_cfg = ControllerConfig {
        kind,
        ..config.controller
    };
    let mut ctrl = ControllerState::new(&ctrl_cfg, config.initial_duty, config.buck.r);
    let mut duty = ctrl.duty();
    let mut state = BuckState::default();
    let mut cache = PanelCache::new(&config.panel, profile.eval(0.0)?);

    for k in 0..=ticks {
        let t = k as f64 * period;
        let tick = |cache: &mut PanelCache| -> Result<(TraceRow, Measurement)> {
            cache.update(&config.panel, profile.eval(t.min(profile.duration))?);
            let (v, i) = coupled_operating_point(&cache.panel, duty, state)?;
            let m = Measurement::new(v, i);
            let row = TraceRow {
                t,
                g: cache.env.g,
                t_cell: cache.env.t,
                v_pv: m.v_pv,
                i_pv: m.i_pv,
                p_pv: m.p_pv,
                duty: duty.value(),
                v_out: state.v_out,
                i_l: state.i_l,
                p_mpp_oracle: cache.p_mpp()?,
            };
            Ok((row, m))
        };
        let (row, m) = tick(&mut cache).map_err(|e| e.at(t))?;
        trace.rows.push(row);

        let (next_duty, next_ctrl) = match kind {
            ControllerKind::Cpoa => cpoa_step(&m, &ctrl),
            ControllerKind::Ampo => ampo_step(&m, &ctrl),
            ControllerKind::AmpoAnn => {
                let nets = networks.ok_or(Error::NotTrained)?;
                let est = nets.estimate(cache.env);
                let v_oc = cache.v_oc().map_err(|e| e.at(t))?;
                ampo_ann_step(&m, &est, v_oc, &ctrl).map_err(|e| e.at(t))?
            }
        };
        duty = next_duty;
        ctrl = next_ctrl;

        if k == ticks {
            break;
        }
        for j in 0..steps {
            let ts = (t + j as f64 * dt).min(profile.duration);
            let advance = |cache: &mut PanelCache| -> Result<BuckState> {
                cache.update(&config.panel, profile.eval(ts)?);
                let (v_in, _) = coupled_operating_point(&cache.panel, duty, state)?;
                buck::step(state, duty, v_in, dt, &config.buck)
            };
            state = advance(&mut cache).map_err(|e| e.at(ts))?;
        }
    }
    Ok(trace)
}

/// Time at which the power first enters the settle band and stays there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SettleTime {
    Settled(f64),
    NotSettled,
}

impl SettleTime {
    pub fn seconds(self) -> Option<f64> {
        match self {
            SettleTime::Settled(t) => Some(t),
            SettleTime::NotSettled => None,
        }
    }
}

impl core::fmt::Display for SettleTime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SettleTime::Settled(t) => write!(f, "{t}"),
            SettleTime::NotSettled => f.write_str("NotSettled"),
        }
    }
}

/// Statistics over one run of rows with identical conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMetrics {
    pub start: f64,
    pub end: f64,
    pub g: f64,
    pub t_cell: f64,
    pub samples: usize,
    pub p_mpp: f64,
    /// Measured from the segment start.
    pub settle_time: SettleTime,
    /// Mean power over the trailing fifth of the segment.
    pub steady_state_power: f64,
    /// Population standard deviation of power over the same window.
    pub chatter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Measured from the first row.
    pub settle_time: SettleTime,
    pub tracking_efficiency: f64,
    /// Chatter of the final segment.
    pub chatter: f64,
    /// Steady-state power of the final segment.
    pub steady_state_power: f64,
    pub segments: Vec<SegmentMetrics>,
}

fn settle_time(rows: &[TraceRow]) -> SettleTime {
    let mut run = 0;
    for (k, r) in rows.iter().enumerate() {
        if fabs(r.p_pv - r.p_mpp_oracle) <= SETTLE_BAND * r.p_mpp_oracle {
            run += 1;
            if run == SETTLE_SAMPLES {
                return SettleTime::Settled(rows[k + 1 - SETTLE_SAMPLES].t - rows[0].t);
            }
        } else {
            run = 0;
        }
    }
    SettleTime::NotSettled
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, sqrt(var))
}

fn segment_metrics(rows: &[TraceRow]) -> SegmentMetrics {
    let n = rows.len();
    let tail = (ceil(n as f64 * STEADY_FRACTION) as usize).clamp(1, n);
    let (mean, std) = mean_std(rows[n - tail..].iter().map(|r| r.p_pv));
    SegmentMetrics {
        start: rows[0].t,
        end: rows[n - 1].t,
        g: rows[0].g,
        t_cell: rows[0].t_cell,
        samples: n,
        p_mpp: rows[0].p_mpp_oracle,
        settle_time: settle_time(rows),
        steady_state_power: mean,
        chatter: std,
    }
}

/// Settle time, tracking efficiency, and per-segment steady-state power and
/// chatter. Segments are maximal runs of rows with identical `(g, t_cell)`;
/// ramps therefore produce one-sample segments, which are left out.
pub fn compute_metrics(trace: &SimTrace) -> Result<Metrics> {
    let rows = &trace.rows;
    if rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut segments = Vec::new();
    let mut begin = 0;
    for k in 1..=rows.len() {
        let split = k == rows.len() || rows[k].g != rows[begin].g || rows[k].t_cell != rows[begin].t_cell;
        if split {
            if k - begin > 1 || rows.len() == 1 {
                segments.push(segment_metrics(&rows[begin..k]));
            }
            begin = k;
        }
    }
    let harvested: f64 = rows.iter().map(|r| r.p_pv).sum();
    let available: f64 = rows.iter().map(|r| r.p_mpp_oracle).sum();
    let tracking_efficiency = if available > 0.0 { harvested / available } else { 1.0 };
    let last = segments
        .last()
        .copied()
        .unwrap_or_else(|| segment_metrics(&rows[rows.len() - 1..]));
    Ok(Metrics {
        settle_time: settle_time(rows),
        tracking_efficiency,
        chatter: last.chatter,
        steady_state_power: last.steady_state_power,
        segments,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub kind: ControllerKind,
    pub metrics: Metrics,
    pub trace: SimTrace,
}

fn run_one(
    profile: &ScenarioProfile,
    kind: ControllerKind,
    config: &SimConfig,
    networks: Option<&MppNetworks>,
) -> Result<ComparisonRow> {
    let trace = run_scenario(profile, kind, config, networks)?;
    let metrics = compute_metrics(&trace)?;
    Ok(ComparisonRow { kind, metrics, trace })
}

/// Runs every controller on the same profile and configuration. With the
/// `std` feature the runs execute on separate threads; results keep the
/// order of `kinds` either way.
pub fn run_comparison(
    profile: &ScenarioProfile,
    kinds: &[ControllerKind],
    config: &SimConfig,
    networks: Option<&MppNetworks>,
) -> Result<Vec<ComparisonRow>> {
    if kinds.is_empty() {
        return Err(Error::InvalidInput("no controllers to compare"));
    }
    profile.validate()?;
    config.validate()?;
    let trained;
    let networks = match networks {
        None if kinds.contains(&ControllerKind::AmpoAnn) => {
            trained = train_estimators(&config.panel, &config.neural, config.seed)?.networks();
            Some(&trained)
        }
        n => n,
    };

    #[cfg(feature = "std")]
    {
        std::thread::scope(|scope| {
            let handles: Vec<_> = kinds
                .iter()
                .map(|&kind| scope.spawn(move || run_one(profile, kind, config, networks)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
                .collect()
        })
    }
    #[cfg(not(feature = "std"))]
    {
        kinds
            .iter()
            .map(|&kind| run_one(profile, kind, config, networks))
            .collect()
    }
}

/// Open-loop inverter fed from the converter output recorded in `trace`,
/// holding each sampled `v_out` until the next row.
pub fn run_inverter(
    trace: &SimTrace,
    pwm: &SinePwm,
    load: &RlLoad,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<InverterSample>> {
    let rows = &trace.rows;
    if rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let duration = rows[rows.len() - 1].t;
    let u_dc = |t: f64| {
        let k = rows.partition_point(|r| r.t <= t).max(1) - 1;
        rows[k].v_out
    };
    simulate_rl_load(u_dc, pwm, load, duration, dt, sample_every)
}
