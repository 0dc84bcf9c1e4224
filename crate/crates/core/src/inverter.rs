//! Three-phase two-level voltage-source inverter, ideal switches.
//!
//! Leg `i` is tied to the upper rail when `c_i = 1`, giving a leg-to-midpoint
//! voltage of `(c_i - 1/2) u_dc`. Phase voltages of a balanced star load are
//! the legs minus the neutral shift `u_no = (u_ao + u_bo + u_co) / 3`, which
//! collapses to `u_dc / 3 * M * c` with `M = [[2,-1,-1],[-1,2,-1],[-1,-1,2]]`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{exp, fabs, floor, sin};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SwitchState {
    pub c_a: bool,
    pub c_b: bool,
    pub c_c: bool,
}

impl SwitchState {
    pub const fn new(c_a: bool, c_b: bool, c_c: bool) -> Self {
        SwitchState { c_a, c_b, c_c }
    }

    /// From three binary digits; anything other than 0/1 is rejected.
    pub fn from_bits(c_a: u8, c_b: u8, c_c: u8) -> Result<Self> {
        let bit = |b: u8| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::InvalidInput("switch state must be 0 or 1")),
        };
        Ok(SwitchState::new(bit(c_a)?, bit(c_b)?, bit(c_c)?))
    }

    /// The eight switch combinations, `(0,0,0)` first.
    pub fn all() -> [SwitchState; 8] {
        core::array::from_fn(|k| SwitchState::new(k & 4 != 0, k & 2 != 0, k & 1 != 0))
    }

    fn as_f64(self) -> [f64; 3] {
        [self.c_a, self.c_b, self.c_c].map(|c| if c { 1.0 } else { 0.0 })
    }
}

/// Leg-to-DC-midpoint voltages `(u_ao, u_bo, u_co)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegVoltages(pub [f64; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseVoltages {
    pub u_an: f64,
    pub u_bn: f64,
    pub u_cn: f64,
}

impl PhaseVoltages {
    pub fn as_array(&self) -> [f64; 3] {
        [self.u_an, self.u_bn, self.u_cn]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineVoltages {
    pub u_ab: f64,
    pub u_bc: f64,
    pub u_ca: f64,
}

pub fn leg_voltages(s: SwitchState, u_dc: f64) -> LegVoltages {
    LegVoltages(s.as_f64().map(|c| (c - 0.5) * u_dc))
}

pub fn neutral_voltage(legs: LegVoltages) -> f64 {
    let [a, b, c] = legs.0;
    (a + b + c) / 3.0
}

pub fn line_voltages(legs: LegVoltages) -> LineVoltages {
    let [a, b, c] = legs.0;
    LineVoltages {
        u_ab: a - b,
        u_bc: b - c,
        u_ca: c - a,
    }
}

pub fn phase_voltages(s: SwitchState, u_dc: f64) -> PhaseVoltages {
    const M: [[f64; 3]; 3] = [[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]];
    let c = s.as_f64();
    let row = |r: &[f64; 3]| u_dc / 3.0 * (r[0] * c[0] + r[1] * c[1] + r[2] * c[2]);
    PhaseVoltages {
        u_an: row(&M[0]),
        u_bn: row(&M[1]),
        u_cn: row(&M[2]),
    }
}

/// Sine-triangle modulator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SinePwm {
    /// Modulation index in `[0, 1]`.
    pub m: f64,
    /// Fundamental frequency [Hz].
    pub f_out: f64,
    /// Carrier frequency [Hz], at least ten times `f_out`.
    pub f_carrier: f64,
}

impl Default for SinePwm {
    fn default() -> Self {
        SinePwm {
            m: 0.8,
            f_out: 50.0,
            f_carrier: 5000.0,
        }
    }
}

impl SinePwm {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.m) {
            return Err(Error::InvalidInput("modulation index must lie in [0, 1]"));
        }
        if !(self.f_out > 0.0 && self.f_carrier >= 10.0 * self.f_out) {
            return Err(Error::InvalidInput("carrier must be at least 10x the output frequency"));
        }
        Ok(())
    }
}

/// Switch state at time `t`: each phase compares its 120°-shifted sine
/// reference against one shared triangular carrier in `[-1, 1]`.
pub fn sine_pwm_switch(t: f64, m: f64, f_out: f64, f_carrier: f64) -> Result<SwitchState> {
    SinePwm { m, f_out, f_carrier }.validate()?;
    let phase = t * f_carrier - floor(t * f_carrier);
    let carrier = 4.0 * fabs(phase - 0.5) - 1.0;
    let reference = |k: f64| m * sin(2.0 * PI * f_out * t - k * 2.0 * PI / 3.0);
    Ok(SwitchState::new(
        reference(0.0) >= carrier,
        reference(1.0) >= carrier,
        reference(2.0) >= carrier,
    ))
}

/// Balanced star-connected series R-L load.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RlLoad {
    pub r: f64,
    pub l: f64,
}

impl Default for RlLoad {
    fn default() -> Self {
        RlLoad { r: 10.0, l: 10e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterSample {
    pub t: f64,
    pub phase: PhaseVoltages,
    pub i_a: f64,
    pub i_b: f64,
    pub i_c: f64,
}

/// Open-loop inverter driving an R-L load. Switch states are sampled at every
/// `dt`; the load currents advance with the exact exponential update for a
/// constant applied voltage. One sample is kept every `sample_every` steps.
pub fn simulate_rl_load<F>(
    u_dc: F,
    pwm: &SinePwm,
    load: &RlLoad,
    duration: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<InverterSample>>
where
    F: Fn(f64) -> f64,
{
    pwm.validate()?;
    if !(load.r > 0.0 && load.l > 0.0 && dt > 0.0 && duration >= 0.0 && sample_every > 0) {
        return Err(Error::InvalidInput(
            "R-L simulation needs r, l, dt > 0 and sample_every >= 1",
        ));
    }
    let decay = exp(-load.r * dt / load.l);
    let gain = (1.0 - decay) / load.r;
    let steps = floor(duration / dt + 1e-9) as usize;
    let mut i = [0.0f64; 3];
    let mut out = Vec::with_capacity(steps / sample_every + 1);
    for n in 0..=steps {
        let t = n as f64 * dt;
        let s = sine_pwm_switch(t, pwm.m, pwm.f_out, pwm.f_carrier)?;
        let phase = phase_voltages(s, u_dc(t));
        if n % sample_every == 0 {
            out.push(InverterSample {
                t,
                phase,
                i_a: i[0],
                i_b: i[1],
                i_c: i[2],
            });
        }
        let u = phase.as_array();
        for k in 0..3 {
            i[k] = i[k] * decay + gain * u[k];
        }
    }
    Ok(out)
}
