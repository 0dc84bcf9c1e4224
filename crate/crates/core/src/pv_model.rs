//! Single-diode photovoltaic panel.
//!
//! The terminal current `I` at voltage `V` satisfies
//!
//! ```text
//! I = I_ph - I_s * (exp((V + R_s I) / (a V_t)) - 1) - (V + R_s I) / R_sh
//! ```
//!
//! with `V_t = n_s k T / q`. The equation is implicit in `I` and is solved by
//! damped Newton iteration. Photo-current and saturation current follow the
//! usual crystalline-silicon irradiance/temperature scaling.

use libm::{exp, fabs, log};

use crate::error::{Error, Result};

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge [C].
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
/// Reference irradiance [W/m²].
pub const G_REF: f64 = 1000.0;
/// Reference cell temperature, 25 °C [K].
pub const T_REF: f64 = 298.15;
/// Silicon bandgap [eV].
pub const BANDGAP_SI: f64 = 1.12;

const NEWTON_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 100;

/// Sweep resolution of [`mpp_oracle`].
pub const ORACLE_SWEEP_POINTS: usize = 2000;
/// Golden-section stopping width of [`mpp_oracle`] [V].
pub const ORACLE_V_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PanelParams {
    /// Photo-current at reference conditions [A].
    pub i_ph_ref: f64,
    /// Diode saturation current at reference conditions [A].
    pub i_s_ref: f64,
    /// Diode ideality factor.
    pub a: f64,
    /// Series resistance [Ω].
    pub r_s: f64,
    /// Shunt resistance [Ω].
    pub r_sh: f64,
    /// Cells in series.
    pub n_s: u32,
    /// Short-circuit current temperature coefficient [A/K].
    pub k_i: f64,
    /// Reference irradiance [W/m²].
    pub g_ref: f64,
    /// Reference temperature [K].
    pub t_ref: f64,
    /// Bandgap energy [eV].
    pub e_g: f64,
}

/// Default short-circuit temperature coefficient, about 0.065 %/K of 4.75 A.
pub const DEFAULT_K_I: f64 = 0.0031;
/// Default ideality used to seed calibration; the remaining four unknowns are
/// fitted to the STC targets.
pub const DEFAULT_IDEALITY: f64 = 1.3;
pub const DEFAULT_CELLS: u32 = 36;

/// Shipped STC targets for [`calibrate`].
pub const DEFAULT_TARGET_V: f64 = 26.0;
pub const DEFAULT_TARGET_P: f64 = 111.0;
pub const DEFAULT_V_OC: f64 = 32.0;
pub const DEFAULT_I_SC: f64 = 4.75;

impl Default for PanelParams {
    /// Output of [`calibrate`] on the default targets (26 V, 111 W,
    /// V_oc = 32 V, I_sc = 4.75 A), frozen so construction cannot fail.
    fn default() -> Self {
        PanelParams {
            i_ph_ref: 4.777_502_837_988_463,
            i_s_ref: 1.226_721_953_944_653_2e-11,
            a: DEFAULT_IDEALITY,
            r_s: 0.537_766_877_259_872_6,
            r_sh: 92.877_421_466_482_02,
            n_s: DEFAULT_CELLS,
            k_i: DEFAULT_K_I,
            g_ref: G_REF,
            t_ref: T_REF,
            e_g: BANDGAP_SI,
        }
    }
}

impl PanelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_s >= 0.0
            && self.r_sh > 0.0
            && self.a > 0.0
            && self.n_s >= 1
            && self.i_ph_ref > 0.0
            && self.i_s_ref > 0.0
            && self.g_ref > 0.0
            && self.t_ref > 0.0
            && self.e_g >= 0.0
            && [self.i_ph_ref, self.i_s_ref, self.a, self.r_s, self.r_sh, self.k_i]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "panel parameters require r_s >= 0, r_sh > 0, a > 0, n_s >= 1, i_ph_ref > 0, i_s_ref > 0",
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConditions {
    /// Irradiance [W/m²].
    pub g: f64,
    /// Cell temperature [K].
    pub t: f64,
}

impl EnvConditions {
    pub const fn new(g: f64, t: f64) -> Self {
        EnvConditions { g, t }
    }

    pub fn from_celsius(g: f64, t_c: f64) -> Self {
        EnvConditions { g, t: t_c + 273.15 }
    }

    /// 1000 W/m², 25 °C.
    pub const fn stc() -> Self {
        EnvConditions { g: G_REF, t: T_REF }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g >= 0.0 && self.t > 0.0 && self.g.is_finite() && self.t.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("environment requires g >= 0 and t > 0"))
        }
    }
}

/// A point on the panel curve. `p` is always `v * i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub v: f64,
    pub i: f64,
    pub p: f64,
}

impl OperatingPoint {
    pub fn new(v: f64, i: f64) -> Self {
        OperatingPoint { v, i, p: v * i }
    }

    /// Rebuilds a point from stored parts, rejecting a power that is not
    /// exactly `v * i` or a negative voltage.
    pub fn from_parts(v: f64, i: f64, p: f64) -> Result<Self> {
        if v < 0.0 {
            return Err(Error::InvalidInput("operating point voltage must be >= 0"));
        }
        if p != v * i {
            return Err(Error::InvalidInput("operating point power must equal v * i"));
        }
        Ok(OperatingPoint { v, i, p })
    }
}

/// Photo-current, saturation current and panel thermal voltage at `env`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sources {
    pub i_ph: f64,
    pub i_s: f64,
    pub v_t: f64,
}

pub fn effective_sources(params: &PanelParams, env: EnvConditions) -> Sources {
    let t = env.t;
    let i_ph = (env.g / params.g_ref) * (params.i_ph_ref + params.k_i * (t - params.t_ref));
    let ratio = t / params.t_ref;
    let arrhenius = ELECTRON_CHARGE * params.e_g / (params.a * BOLTZMANN);
    let i_s = params.i_s_ref * ratio * ratio * ratio * exp(arrhenius * (1.0 / params.t_ref - 1.0 / t));
    let v_t = params.n_s as f64 * BOLTZMANN * t / ELECTRON_CHARGE;
    Sources { i_ph, i_s, v_t }
}

/// Diode-equation residual `f(I) = I_ph - I_s (e^x - 1) - (V + R_s I)/R_sh - I`.
pub fn residual(params: &PanelParams, env: EnvConditions, v: f64, i: f64) -> f64 {
    PanelAt::new(params, env).residual(v, i)
}

/// Panel parameters bound to one environment, with the scaled sources
/// precomputed. All curve queries go through this.
#[derive(Debug, Clone, Copy)]
pub struct PanelAt {
    pub i_ph: f64,
    pub i_s: f64,
    /// Modified thermal voltage `a * V_t`.
    pub a_vt: f64,
    pub r_s: f64,
    pub r_sh: f64,
}

impl PanelAt {
    pub fn new(params: &PanelParams, env: EnvConditions) -> Self {
        let s = effective_sources(params, env);
        PanelAt {
            i_ph: s.i_ph,
            i_s: s.i_s,
            a_vt: params.a * s.v_t,
            r_s: params.r_s,
            r_sh: params.r_sh,
        }
    }

    #[inline]
    pub fn residual(&self, v: f64, i: f64) -> f64 {
        let x = v + self.r_s * i;
        self.i_ph - self.i_s * (exp(x / self.a_vt) - 1.0) - x / self.r_sh - i
    }

    /// Damped Newton on the residual in `I`, starting from `I = I_ph`.
    pub fn current(&self, v: f64) -> Result<f64> {
        let mut i = self.i_ph;
        let mut f = self.residual(v, i);
        for _ in 0..NEWTON_MAX_ITER {
            if fabs(f) < NEWTON_TOL {
                return Ok(i);
            }
            let e = exp((v + self.r_s * i) / self.a_vt);
            let df = -self.i_s * e * self.r_s / self.a_vt - self.r_s / self.r_sh - 1.0;
            let mut step = -f / df;
            let mut trial = i + step;
            let mut f_trial = self.residual(v, trial);
            let mut halvings = 0;
            while !(fabs(f_trial) < fabs(f)) && halvings < 40 {
                step *= 0.5;
                trial = i + step;
                f_trial = self.residual(v, trial);
                halvings += 1;
            }
            i = trial;
            f = f_trial;
        }
        if fabs(f) < NEWTON_TOL {
            Ok(i)
        } else {
            Err(Error::NonConvergence {
                iterations: NEWTON_MAX_ITER,
                residual: f,
            })
        }
    }

    pub fn power(&self, v: f64) -> Result<f64> {
        Ok(v * self.current(v)?)
    }

    /// Terminal voltage at which the panel delivers current `i`.
    ///
    /// With `x = V + R_s I` the equation is explicit in `I` and strictly
    /// decreasing in `x`, so a bracketed Newton iteration on `x` is used.
    /// The result may be negative when `i` exceeds the short-circuit current.
    pub fn voltage_at_current(&self, i: f64) -> Result<f64> {
        let g = |x: f64| self.i_ph - self.i_s * (exp(x / self.a_vt) - 1.0) - x / self.r_sh - i;
        let dg = |x: f64| -self.i_s * exp(x / self.a_vt) / self.a_vt - 1.0 / self.r_sh;

        // g(lo) > 0 > g(hi)
        let mut lo = -(fabs(i) + fabs(self.i_ph) + 1.0) * self.r_sh;
        let mut hi = self.a_vt * log((fabs(self.i_ph) + fabs(i) + self.i_s) / self.i_s + 1.0) + 1.0;
        while g(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut x = if self.i_ph - i > 0.0 {
            let guess = self.a_vt * log((self.i_ph - i) / self.i_s + 1.0);
            guess.clamp(lo, hi)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..NEWTON_MAX_ITER * 2 {
            let gx = g(x);
            if fabs(gx) < NEWTON_TOL {
                return Ok(x - self.r_s * i);
            }
            if gx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = x - gx / dg(x);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            x = next;
        }
        let gx = g(x);
        if fabs(gx) < NEWTON_TOL {
            Ok(x - self.r_s * i)
        } else {
            Err(Error::NonConvergence {
                iterations: NEWTON_MAX_ITER * 2,
                residual: gx,
            })
        }
    }

    pub fn open_circuit_voltage(&self) -> Result<f64> {
        self.voltage_at_current(0.0)
    }

    pub fn short_circuit_current(&self) -> Result<f64> {
        self.current(0.0)
    }

    /// See [`mpp_oracle`].
    pub fn mpp(&self, sweep_points: usize) -> Result<OperatingPoint> {
        let v_oc = self.open_circuit_voltage()?;
        if v_oc <= 0.0 || sweep_points < 3 {
            return Ok(OperatingPoint::new(0.0, self.current(0.0)?));
        }
        let n = sweep_points;
        let dv = v_oc / (n - 1) as f64;
        let mut best_k = 0;
        let mut best_p = f64::NEG_INFINITY;
        for k in 0..n {
            let p = self.power(k as f64 * dv)?;
            if p > best_p {
                best_p = p;
                best_k = k;
            }
        }
        let lo = best_k.saturating_sub(1) as f64 * dv;
        let hi = ((best_k + 1).min(n - 1)) as f64 * dv;
        let v_star = golden_max(|v| self.power(v), lo, hi, ORACLE_V_TOL)?;
        let refined = OperatingPoint::new(v_star, self.current(v_star)?);
        if refined.p >= best_p {
            Ok(refined)
        } else {
            let v = best_k as f64 * dv;
            Ok(OperatingPoint::new(v, self.current(v)?))
        }
    }
}

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
fn golden_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    // 1/phi
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn solve_current(params: &PanelParams, env: EnvConditions, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::InvalidInput("panel voltage must be >= 0"));
    }
    PanelAt::new(params, env).current(v)
}

pub fn power_at(params: &PanelParams, env: EnvConditions, v: f64) -> Result<f64> {
    Ok(v * solve_current(params, env, v)?)
}

pub fn open_circuit_voltage(params: &PanelParams, env: EnvConditions) -> Result<f64> {
    PanelAt::new(params, env).open_circuit_voltage()
}

/// Maximum power point by a 2000-point sweep of `[0, V_oc]` followed by
/// golden-section refinement of the bracketing interval to 1e-4 V.
pub fn mpp_oracle(params: &PanelParams, env: EnvConditions) -> Result<OperatingPoint> {
    mpp_oracle_with(params, env, ORACLE_SWEEP_POINTS)
}

pub fn mpp_oracle_with(params: &PanelParams, env: EnvConditions, sweep_points: usize) -> Result<OperatingPoint> {
    if !(env.g > 0.0) {
        return Err(Error::InvalidInput("MPP oracle requires g > 0"));
    }
    PanelAt::new(params, env).mpp(sweep_points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub ideality: f64,
    pub n_s: u32,
    pub k_i: f64,
    pub e_g: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            ideality: DEFAULT_IDEALITY,
            n_s: DEFAULT_CELLS,
            k_i: DEFAULT_K_I,
            e_g: BANDGAP_SI,
        }
    }
}

/// Measured STC characteristics of a parameter set: MPP, V_oc and I_sc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StcCharacteristics {
    pub mpp: OperatingPoint,
    pub v_oc: f64,
    pub i_sc: f64,
}

pub fn stc_characteristics(params: &PanelParams) -> Result<StcCharacteristics> {
    let env = EnvConditions::new(params.g_ref, params.t_ref);
    let panel = PanelAt::new(params, env);
    Ok(StcCharacteristics {
        mpp: panel.mpp(ORACLE_SWEEP_POINTS)?,
        v_oc: panel.open_circuit_voltage()?,
        i_sc: panel.short_circuit_current()?,
    })
}

pub fn calibrate(target: OperatingPoint, v_oc: f64, i_sc: f64) -> Result<PanelParams> {
    calibrate_with(target, v_oc, i_sc, &CalibrationOptions::default())
}

/// Fits `i_ph_ref`, `i_s_ref`, `r_s`, `r_sh` at the given ideality so that at
/// STC the curve passes through `(0, i_sc)`, `(v_oc, 0)` and `target`, with
/// zero power slope at `target`. Newton iteration on four equations,
/// followed by a check of the oracle MPP against all targets at 1 %.
pub fn calibrate_with(target: OperatingPoint, v_oc: f64, i_sc: f64, opts: &CalibrationOptions) -> Result<PanelParams> {
    let (vm, im) = (target.v, target.i);
    if !(vm > 0.0 && vm < v_oc && im > 0.0 && im < i_sc) {
        return Err(Error::InvalidInput(
            "calibration target must satisfy 0 < v < v_oc and 0 < i < i_sc",
        ));
    }
    let v_t = opts.n_s as f64 * BOLTZMANN * T_REF / ELECTRON_CHARGE;
    let a_vt = opts.ideality * v_t;

    // unknowns: i_ph, ln i_s, r_s, ln r_sh
    let equations = |x: &[f64; 4]| -> [f64; 4] {
        let (i_ph, i_s, r_s, r_sh) = (x[0], exp(x[1]), x[2], exp(x[3]));
        let diode = |xv: f64| i_s * (exp(xv / a_vt) - 1.0);
        let xm = vm + r_s * im;
        let cond = i_s / a_vt * exp(xm / a_vt) + 1.0 / r_sh;
        [
            i_ph - diode(i_sc * r_s) - i_sc * r_s / r_sh - i_sc,
            i_ph - diode(v_oc) - v_oc / r_sh,
            i_ph - diode(xm) - xm / r_sh - im,
            // dI/dV = -I/V at the MPP, scaled to amperes
            (-cond / (1.0 + r_s * cond) + im / vm) * vm,
        ]
    };
    let norm = |e: &[f64; 4]| e.iter().map(|v| v * v).sum::<f64>();

    let mut x = [i_sc, log(i_sc / exp(v_oc / a_vt)), 0.3, log(200.0)];
    let mut e = equations(&x);
    for _ in 0..200 {
        if norm(&e) < 1e-26 {
            break;
        }
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let h = 1e-7 * (1.0 + fabs(x[j]));
            let mut xp = x;
            let mut xm_ = x;
            xp[j] += h;
            xm_[j] -= h;
            let ep = equations(&xp);
            let em = equations(&xm_);
            for i in 0..4 {
                jac[i][j] = (ep[i] - em[i]) / (2.0 * h);
            }
        }
        let Some(dx) = solve4(jac, [-e[0], -e[1], -e[2], -e[3]]) else {
            break;
        };
        let mut scale = 1.0;
        let current = norm(&e);
        loop {
            let trial = core::array::from_fn(|k| x[k] + scale * dx[k]);
            let et = equations(&trial);
            let nt = norm(&et);
            if nt.is_finite() && nt < current {
                x = trial;
                e = et;
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                break;
            }
        }
        if scale < 1e-12 {
            break;
        }
    }

    let params = PanelParams {
        i_ph_ref: x[0],
        i_s_ref: exp(x[1]),
        a: opts.ideality,
        r_s: x[2],
        r_sh: exp(x[3]),
        n_s: opts.n_s,
        k_i: opts.k_i,
        g_ref: G_REF,
        t_ref: T_REF,
        e_g: opts.e_g,
    };
    if params.validate().is_err() {
        return Err(Error::CalibrationFailure {
            residual: f64::INFINITY,
        });
    }
    let got = stc_characteristics(&params).map_err(|_| Error::CalibrationFailure {
        residual: f64::INFINITY,
    })?;
    let rel = |a: f64, b: f64| fabs(a - b) / fabs(b);
    let residual = rel(got.mpp.p, target.p)
        .max(rel(got.mpp.v, vm))
        .max(rel(got.v_oc, v_oc))
        .max(rel(got.i_sc, i_sc));
    if residual > 0.01 || !residual.is_finite() {
        return Err(Error::CalibrationFailure { residual });
    }
    Ok(params)
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| fabs(a[i][col]).total_cmp(&fabs(a[j][col])))?;
        if fabs(a[pivot][col]) < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// The shipped default calibration target: 26 V, 111 W.
pub fn default_target() -> OperatingPoint {
    OperatingPoint::new(DEFAULT_TARGET_V, DEFAULT_TARGET_P / DEFAULT_TARGET_V)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stc_panel() -> PanelAt {
        PanelAt::new(&PanelParams::default(), EnvConditions::stc())
    }

    #[test]
    fn reference_conditions_are_fixed_points() {
        let p = PanelParams::default();
        let s = effective_sources(&p, EnvConditions::stc());
        assert_eq!(s.i_ph, p.i_ph_ref);
        assert_eq!(s.i_s, p.i_s_ref);
    }

    #[test]
    fn half_irradiance_halves_photocurrent() {
        let p = PanelParams::default();
        let s = effective_sources(&p, EnvConditions::new(500.0, T_REF));
        assert_eq!(s.i_ph, 0.5 * p.i_ph_ref);
    }

    #[test]
    fn saturation_current_grows_with_temperature() {
        let p = PanelParams::default();
        let hot = effective_sources(&p, EnvConditions::new(1000.0, 323.15));
        assert!(hot.i_s > p.i_s_ref);
        // independent evaluation of the scaling law at 50 °C
        let expected = p.i_s_ref
            * (323.15f64 / 298.15).powi(3)
            * ((1.602176634e-19 * 1.12 / (p.a * 1.380649e-23)) * (1.0 / 298.15 - 1.0 / 323.15)).exp();
        assert!((hot.i_s - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn short_circuit_current_matches_closed_form() {
        let panel = stc_panel();
        let i = panel.current(0.0).unwrap();
        // at V = 0 the diode term is ~1e-9 A, so I ~ i_ph * r_sh / (r_sh + r_s)
        let approx = panel.i_ph * panel.r_sh / (panel.r_sh + panel.r_s);
        assert!((i - approx).abs() < 1e-6, "{i} vs {approx}");
    }

    #[test]
    fn current_at_26_volts_is_near_target() {
        let i = solve_current(&PanelParams::default(), EnvConditions::stc(), 26.0).unwrap();
        assert!((i - 111.0 / 26.0).abs() / (111.0 / 26.0) < 0.01, "{i}");
        let p = power_at(&PanelParams::default(), EnvConditions::stc(), 26.0).unwrap();
        assert!((p - 111.0).abs() < 1.11, "{p}");
    }

    #[test]
    fn open_circuit_matches_bisection() {
        let params = PanelParams::default();
        let env = EnvConditions::stc();
        // bisection on I(v) = 0 through the forward solver
        let (mut lo, mut hi) = (0.0, 60.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if solve_current(&params, env, mid).unwrap() > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v_oc = open_circuit_voltage(&params, env).unwrap();
        assert!((v_oc - 0.5 * (lo + hi)).abs() < 1e-8);
        assert!(solve_current(&params, env, v_oc).unwrap().abs() < 1e-9);
        assert!(power_at(&params, env, v_oc).unwrap().abs() < 1e-6);
        assert_eq!(power_at(&params, env, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_voltage_is_rejected() {
        assert!(matches!(
            solve_current(&PanelParams::default(), EnvConditions::stc(), -1.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn voltage_at_current_inverts_current() {
        let panel = stc_panel();
        for k in 0..=40 {
            let v = 32.0 * k as f64 / 40.0;
            let i = panel.current(v).unwrap();
            let back = panel.voltage_at_current(i).unwrap();
            assert!((back - v).abs() < 1e-6, "v={v} back={back}");
        }
        // beyond short circuit the terminal voltage goes negative
        let i_sc = panel.short_circuit_current().unwrap();
        assert!(panel.voltage_at_current(i_sc + 0.1).unwrap() < 0.0);
        assert!(panel.voltage_at_current(-0.1).unwrap() > panel.open_circuit_voltage().unwrap());
    }

    #[test]
    fn oracle_at_stc_hits_targets() {
        let mpp = mpp_oracle(&PanelParams::default(), EnvConditions::stc()).unwrap();
        assert!((mpp.v - 26.0).abs() / 26.0 < 0.01, "{mpp:?}");
        assert!((mpp.p - 111.0).abs() / 111.0 < 0.01, "{mpp:?}");
        assert_eq!(mpp.p, mpp.v * mpp.i);
    }

    #[test]
    fn oracle_at_half_irradiance_is_frozen_model_value() {
        // The model gives ~52.6 W here; see the README note on the 500 W/m² case.
        let mpp = mpp_oracle(&PanelParams::default(), EnvConditions::new(500.0, T_REF)).unwrap();
        assert!((mpp.p - 52.60).abs() < 0.05, "{mpp:?}");
    }

    #[test]
    fn oracle_is_resolution_independent() {
        let params = PanelParams::default();
        let env = EnvConditions::from_celsius(700.0, 40.0);
        let a = mpp_oracle_with(&params, env, 2000).unwrap();
        let b = mpp_oracle_with(&params, env, 4000).unwrap();
        assert!((a.v - b.v).abs() < 1e-3);
    }

    #[test]
    fn oracle_rejects_dark_panel() {
        assert!(mpp_oracle(&PanelParams::default(), EnvConditions::new(0.0, T_REF)).is_err());
    }

    #[test]
    fn calibration_reproduces_frozen_default() {
        let p = calibrate(default_target(), DEFAULT_V_OC, DEFAULT_I_SC).unwrap();
        let d = PanelParams::default();
        for (a, b) in [
            (p.i_ph_ref, d.i_ph_ref),
            (p.i_s_ref, d.i_s_ref),
            (p.r_s, d.r_s),
            (p.r_sh, d.r_sh),
        ] {
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
        }
        let got = stc_characteristics(&p).unwrap();
        assert!((got.mpp.p - 111.0).abs() <= 1.1);
    }

    #[test]
    fn calibration_is_a_fixed_point() {
        let p = PanelParams::default();
        let got = stc_characteristics(&p).unwrap();
        let again = calibrate(got.mpp, got.v_oc, got.i_sc).unwrap();
        for (a, b) in [
            (again.i_ph_ref, p.i_ph_ref),
            (again.i_s_ref, p.i_s_ref),
            (again.r_s, p.r_s),
            (again.r_sh, p.r_sh),
        ] {
            assert!((a - b).abs() / b.abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn infeasible_calibration_target_is_rejected() {
        let bad = OperatingPoint::new(33.0, 3.0);
        assert!(calibrate(bad, 32.0, 4.75).is_err());
        let bad = OperatingPoint::new(26.0, 5.0);
        assert!(calibrate(bad, 32.0, 4.75).is_err());
    }

    #[test]
    fn operating_point_checks_consistency() {
        assert!(OperatingPoint::from_parts(2.0, 3.0, 6.0).is_ok());
        assert!(OperatingPoint::from_parts(2.0, 3.0, 6.5).is_err());
        assert!(OperatingPoint::from_parts(-1.0, 3.0, -3.0).is_err());
    }
}
