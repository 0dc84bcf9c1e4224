//! MPPT controllers acting on the buck duty cycle.
//!
//! All three strategies are pure state machines: a step consumes the latest
//! panel measurement and the previous [`ControllerState`] and returns the new
//! duty together with the next state.
//!
//! Raising the duty of a buck stage lowers the resistance the panel sees
//! (`R / u²` at equilibrium) and therefore lowers the panel voltage. A move
//! that should raise the operating voltage is a duty decrease.

use libm::{fabs, sqrt};

use crate::buck::DutyCycle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ControllerKind {
    /// Classic perturb and observe.
    Cpoa,
    /// Sign-based adaptive perturb and observe.
    Ampo,
    /// Adaptive perturb and observe seeded by neural MPP estimates.
    AmpoAnn,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Cpoa, ControllerKind::Ampo, ControllerKind::AmpoAnn];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Cpoa => "cpoa",
            ControllerKind::Ampo => "ampo",
            ControllerKind::AmpoAnn => "ampo_ann",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ControllerKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl core::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Duty perturbation step.
    pub gamma: f64,
    pub sample_period_s: f64,
    /// Dead band applied to both power [W] and voltage [V] differences.
    pub dead_band: f64,
}

/// The neural variant refines around its feedforward point with
/// `gamma / FINE_STEP_DIVISOR`.
pub const FINE_STEP_DIVISOR: f64 = 5.0;

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kind: ControllerKind::Ampo,
            gamma: 0.01,
            sample_period_s: 1e-3,
            dead_band: 1e-6,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidInput("controller gamma must lie in (0, 1]"));
        }
        if !(self.sample_period_s > 0.0) {
            return Err(Error::InvalidInput("controller sample period must be > 0"));
        }
        if !(self.dead_band >= 0.0) {
            return Err(Error::InvalidInput("controller dead band must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub v_pv: f64,
    pub i_pv: f64,
    pub p_pv: f64,
}

impl Measurement {
    pub fn new(v_pv: f64, i_pv: f64) -> Self {
        Measurement {
            v_pv,
            i_pv,
            p_pv: v_pv * i_pv,
        }
    }
}

/// Neural estimate of the maximum power point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MppEstimate {
    pub v_mpp: f64,
    pub i_mpp: f64,
    /// Some input lay outside the training range by more than 20 %.
    pub extrapolated: bool,
}

/// Three-valued sign with a symmetric dead band.
pub fn sign3(x: f64, dead_band: f64) -> i8 {
    if x > dead_band {
        1
    } else if x < -dead_band {
        -1
    } else {
        0
    }
}

/// Sign of the secant slope `ΔP/ΔV`, formed as `sign(ΔP) * sign(ΔV)`.
pub fn slope_sign(dp: f64, dv: f64, dead_band: f64) -> i8 {
    sign3(dp, dead_band) * sign3(dv, dead_band)
}

/// Adaptive P&O decision from two consecutive slope signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    /// Both signs -1: operating voltage above the MPP, duty below it.
    Left,
    /// Signs disagree or one is zero: at the MPP, hold.
    Hold,
    /// Both signs +1: operating voltage below the MPP, duty above it.
    Right,
}

impl Delta {
    pub fn value(self) -> i8 {
        match self {
            Delta::Left => -2,
            Delta::Hold => 0,
            Delta::Right => 2,
        }
    }
}

pub fn ampo_delta(previous: i8, current: i8) -> Delta {
    match (previous, current) {
        (-1, -1) => Delta::Left,
        (1, 1) => Delta::Right,
        _ => Delta::Hold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub kind: ControllerKind,
    pub u_ctrl: f64,
    pub gamma: f64,
    pub dead_band: f64,
    pub prev_p: f64,
    pub prev_v: f64,
    /// Whether `prev_p` / `prev_v` hold a real measurement.
    pub primed: bool,
    pub prev_delta_sign: i8,
    /// Whether `prev_delta_sign` came from a measurement. Without one the
    /// current sign is used alone.
    pub sign_known: bool,
    /// Last duty perturbation direction of the classic P&O.
    pub direction: i8,
    /// Duty implied by the last applied neural estimate.
    pub feedforward: Option<f64>,
    /// Converter load resistance, used to map an MPP estimate to a duty.
    pub load_r: f64,
}

impl ControllerState {
    pub fn new(config: &ControllerConfig, initial_duty: f64, load_r: f64) -> Self {
        ControllerState {
            kind: config.kind,
            u_ctrl: DutyCycle::new(initial_duty).value(),
            gamma: config.gamma,
            dead_band: config.dead_band,
            prev_p: 0.0,
            prev_v: 0.0,
            primed: false,
            prev_delta_sign: 0,
            sign_known: false,
            direction: 1,
            feedforward: None,
            load_r,
        }
    }

    pub fn duty(&self) -> DutyCycle {
        DutyCycle::new(self.u_ctrl)
    }

    fn remember(mut self, m: &Measurement) -> Self {
        self.prev_p = m.p_pv;
        self.prev_v = m.v_pv;
        self.primed = true;
        self
    }

    fn nudge(mut self, du: f64) -> Self {
        self.u_ctrl = DutyCycle::new(self.u_ctrl + du).value();
        self
    }
}

/// Classic P&O: keep the last duty direction while power rises, reverse it
/// when power falls, stay put when the power change is inside the dead band.
/// The first call only probes in the initial direction.
pub fn cpoa_step(m: &Measurement, s: &ControllerState) -> (DutyCycle, ControllerState) {
    debug_assert_eq!(s.kind, ControllerKind::Cpoa);
    let mut next = *s;
    if !s.primed {
        next = next.nudge(s.gamma * s.direction as f64).remember(m);
        return (next.duty(), next);
    }
    match sign3(m.p_pv - s.prev_p, s.dead_band) {
        1 => next = next.nudge(s.gamma * s.direction as f64),
        -1 => {
            next.direction = -s.direction;
            next = next.nudge(s.gamma * next.direction as f64);
        }
        _ => {}
    }
    let next = next.remember(m);
    (next.duty(), next)
}

fn ampo_core(m: &Measurement, s: &ControllerState, step: f64) -> ControllerState {
    let current = slope_sign(m.p_pv - s.prev_p, m.v_pv - s.prev_v, s.dead_band);
    let mut next = *s;
    let previous = if s.sign_known { s.prev_delta_sign } else { current };
    match ampo_delta(previous, current) {
        // climbing in voltage by `current` means moving the duty the other way
        Delta::Left | Delta::Right => next = next.nudge(-step * current as f64),
        Delta::Hold => {}
    }
    next.prev_delta_sign = current;
    next.sign_known = true;
    next.remember(m)
}

/// Adaptive P&O. The slope sign `sign(ΔP)·sign(ΔV)` locates the operating
/// point relative to the MPP; two agreeing signs move the duty one step
/// towards it, disagreeing or zero signs hold it. The first call probes with
/// a duty increase since there is no history to compare against.
pub fn ampo_step(m: &Measurement, s: &ControllerState) -> (DutyCycle, ControllerState) {
    debug_assert_eq!(s.kind, ControllerKind::Ampo);
    if !s.primed {
        let next = s.nudge(s.gamma).remember(m);
        return (next.duty(), next);
    }
    let next = ampo_core(m, s, s.gamma);
    (next.duty(), next)
}

/// Duty that places the converter at equilibrium on the estimated MPP:
/// `u = v_out / v_in` with `v_out = sqrt(P R)` from output power balance.
pub fn feedforward_duty(est: &MppEstimate, load_r: f64) -> f64 {
    if est.v_mpp <= 0.0 {
        return 1.0;
    }
    let p = (est.v_mpp * est.i_mpp).max(0.0);
    DutyCycle::new(sqrt(p * load_r) / est.v_mpp).value()
}

/// Neural-assisted adaptive P&O. Whenever the estimate moves the
/// feedforward duty by more than one fine step, the duty jumps there and the
/// sign history restarts; otherwise the adaptive law runs with step
/// `gamma / 5`.
pub fn ampo_ann_step(
    m: &Measurement,
    est: &MppEstimate,
    v_oc: f64,
    s: &ControllerState,
) -> Result<(DutyCycle, ControllerState)> {
    debug_assert_eq!(s.kind, ControllerKind::AmpoAnn);
    if !(est.v_mpp >= 0.0 && est.v_mpp <= v_oc) {
        return Err(Error::EstimateOutOfRange { v_mpp: est.v_mpp, v_oc });
    }
    let fine = s.gamma / FINE_STEP_DIVISOR;
    let u_ff = feedforward_duty(est, s.load_r);
    let jump = match s.feedforward {
        None => true,
        Some(prev) => fabs(u_ff - prev) > fine,
    };
    let next = if jump {
        let mut next = *s;
        next.u_ctrl = u_ff;
        next.feedforward = Some(u_ff);
        next.prev_delta_sign = 0;
        next.sign_known = false;
        next.remember(m)
    } else if !s.primed {
        s.remember(m)
    } else {
        ampo_core(m, s, fine)
    };
    Ok((next.duty(), next))
}
