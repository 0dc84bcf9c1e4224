//! Averaged (state-space) buck converter model.
//!
//! State `x = (i_L, v_out)` obeys
//!
//! ```text
//! di_L/dt   = k1 u v_in - k1 v_out
//! dv_out/dt = k2 i_L    - k3 v_out
//! ```
//!
//! with `k1 = 1/L`, `k2 = 1/C`, `k3 = 1/(R C)`. Integration is classical RK4
//! at a fixed step with `u` and `v_in` held over the step.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BuckParams {
    /// Inductance [H].
    pub l: f64,
    /// Output capacitance [F].
    pub c: f64,
    /// Load resistance [Ω].
    pub r: f64,
    /// Integration step [s].
    pub dt: f64,
}

impl Default for BuckParams {
    fn default() -> Self {
        BuckParams {
            l: 1e-3,
            c: 470e-6,
            r: 6.0,
            dt: 1e-5,
        }
    }
}

impl BuckParams {
    pub fn validate(&self) -> Result<()> {
        if self.l > 0.0 && self.c > 0.0 && self.r > 0.0 && self.dt > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput("buck parameters require l, c, r, dt > 0"))
        }
    }

    #[inline]
    pub fn k1(&self) -> f64 {
        1.0 / self.l
    }

    #[inline]
    pub fn k2(&self) -> f64 {
        1.0 / self.c
    }

    #[inline]
    pub fn k3(&self) -> f64 {
        1.0 / (self.r * self.c)
    }

    /// Largest admissible step: a tenth of the faster of `L/R` and `R C`.
    pub fn max_stable_dt(&self) -> f64 {
        0.1 * (self.l / self.r).min(self.r * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuckState {
    /// Inductor current [A].
    pub i_l: f64,
    /// Output voltage [V], never negative.
    pub v_out: f64,
}

/// Duty cycle, saturated into `[0, 1]` on construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct DutyCycle(f64);

impl DutyCycle {
    pub fn new(u: f64) -> Self {
        if u.is_nan() {
            DutyCycle(0.0)
        } else {
            DutyCycle(u.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for DutyCycle {
    fn from(u: f64) -> Self {
        DutyCycle::new(u)
    }
}

/// Time derivatives `(di_L/dt, dv_out/dt)`.
#[inline]
pub fn derivatives(state: BuckState, u: DutyCycle, v_in: f64, params: &BuckParams) -> (f64, f64) {
    let k1 = params.k1();
    (
        k1 * u.value() * v_in - k1 * state.v_out,
        params.k2() * state.i_l - params.k3() * state.v_out,
    )
}

/// One RK4 step of length `dt`.
pub fn step(state: BuckState, u: DutyCycle, v_in: f64, dt: f64, params: &BuckParams) -> Result<BuckState> {
    let limit = params.max_stable_dt();
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::UnstableStep { dt, limit });
    }
    let at = |s: BuckState, k: (f64, f64), h: f64| BuckState {
        i_l: s.i_l + h * k.0,
        v_out: s.v_out + h * k.1,
    };
    let f = |s| derivatives(s, u, v_in, params);
    let k1 = f(state);
    let k2 = f(at(state, k1, 0.5 * dt));
    let k3 = f(at(state, k2, 0.5 * dt));
    let k4 = f(at(state, k3, dt));
    let next = BuckState {
        i_l: state.i_l + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        v_out: state.v_out + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    };
    Ok(BuckState {
        i_l: next.i_l,
        v_out: next.v_out.max(0.0),
    })
}

/// Steady state of the averaged model: `(u v_in / R, u v_in)`.
pub fn equilibrium(u: DutyCycle, v_in: f64, params: &BuckParams) -> BuckState {
    let v_out = u.value() * v_in;
    BuckState {
        i_l: v_out / params.r,
        v_out,
    }
}
