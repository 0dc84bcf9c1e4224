use mppt_core::buck::*;
use proptest::prelude::*;

fn run(mut s: BuckState, u: f64, v_in: f64, dt: f64, n: usize, p: &BuckParams) -> BuckState {
    for _ in 0..n {
        s = step(s, DutyCycle::new(u), v_in, dt, p).unwrap();
    }
    s
}

/// Underdamped series-RLC step response from rest: `(i_L, v_out)` at `t`.
fn rlc_step(p: &BuckParams, v: f64, t: f64) -> (f64, f64) {
    let alpha = 1.0 / (2.0 * p.r * p.c);
    let w0 = 1.0 / (p.l * p.c).sqrt();
    let wd = (w0 * w0 - alpha * alpha).sqrt();
    let e = (-alpha * t).exp();
    let v_out = v * (1.0 - e * ((wd * t).cos() + alpha / wd * (wd * t).sin()));
    let dv = v * e * (alpha * alpha / wd + wd) * (wd * t).sin();
    (p.c * dv + v_out / p.r, v_out)
}

#[test]
fn matches_analytic_rlc_step() {
    let p = BuckParams::default();
    let mut s = BuckState::default();
    for k in 1..=2800 {
        s = step(s, DutyCycle::new(1.0), 26.0, p.dt, &p).unwrap();
        if k % 200 == 0 {
            let (i, v) = rlc_step(&p, 26.0, k as f64 * p.dt);
            assert!((s.v_out - v).abs() < 1e-6, "v at step {k}: {} vs {v}", s.v_out);
            assert!((s.i_l - i).abs() < 1e-6, "i at step {k}: {} vs {i}", s.i_l);
        }
    }
    // 2800 steps = 28 ms, five envelope time constants of 2RC
    assert!((s.v_out - 26.0).abs() / 26.0 < 0.01);
}

#[test]
fn richardson_ratio_is_sixteen() {
    let p = BuckParams::default();
    let h = 1.6e-5;
    assert!(h <= p.max_stable_dt());
    let start = BuckState { i_l: 0.5, v_out: 2.0 };
    let horizon_steps = 64;
    let x1 = run(start, 0.7, 26.0, h, horizon_steps, &p);
    let x2 = run(start, 0.7, 26.0, h / 2.0, 2 * horizon_steps, &p);
    let x4 = run(start, 0.7, 26.0, h / 4.0, 4 * horizon_steps, &p);
    let d = |a: BuckState, b: BuckState| ((a.i_l - b.i_l).powi(2) + (a.v_out - b.v_out).powi(2)).sqrt();
    let ratio = d(x1, x2) / d(x2, x4);
    assert!((ratio - 16.0).abs() <= 4.0, "ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn converges_to_equilibrium(u in 0.05..=1.0f64, v_in in 5.0..=35.0f64) {
        let p = BuckParams::default();
        let tau = 2.0 * p.r * p.c;
        let n = (10.0 * tau / p.dt).ceil() as usize;
        let s = run(BuckState::default(), u, v_in, p.dt, n, &p);
        let eq = equilibrium(DutyCycle::new(u), v_in, &p);
        prop_assert!((s.v_out - eq.v_out).abs() <= 1e-3 * eq.v_out);
        prop_assert!((s.i_l - eq.i_l).abs() <= 1e-3 * eq.i_l);
    }

    #[test]
    fn equilibrium_balances_power(u in 0.0..=1.0f64, v_in in 0.0..=40.0f64, r in 0.5..=50.0f64) {
        let p = BuckParams { r, ..BuckParams::default() };
        let eq = equilibrium(DutyCycle::new(u), v_in, &p);
        let p_in = v_in * u * eq.i_l;
        let p_out = eq.v_out * eq.v_out / r;
        prop_assert!((p_in - p_out).abs() <= 1e-9 * p_out.max(1e-300));
    }

    #[test]
    fn out_of_range_duty_saturates(i_l in -5.0..5.0f64, v_out in 0.0..30.0f64, over in 1.0..3.0f64) {
        let p = BuckParams::default();
        let s = BuckState { i_l, v_out };
        prop_assert_eq!(step(s, DutyCycle::new(over), 26.0, p.dt, &p), step(s, DutyCycle::new(1.0), 26.0, p.dt, &p));
        prop_assert_eq!(step(s, DutyCycle::new(-over), 26.0, p.dt, &p), step(s, DutyCycle::new(0.0), 26.0, p.dt, &p));
    }

    #[test]
    fn output_voltage_never_negative(i_l in -20.0..0.0f64, v_out in 0.0..0.5f64) {
        let p = BuckParams::default();
        let s = step(BuckState { i_l, v_out }, DutyCycle::new(0.0), 0.0, p.dt, &p).unwrap();
        prop_assert!(s.v_out >= 0.0);
    }
}
