use mppt_core::pv_model::*;
use proptest::prelude::*;

fn params() -> PanelParams {
    PanelParams::default()
}

/// Operating envelope: 200..1000 W/m², 15..75 °C.
fn env_strategy() -> impl Strategy<Value = EnvConditions> {
    (200.0..=1000.0f64, 15.0..=75.0f64).prop_map(|(g, c)| EnvConditions::from_celsius(g, c))
}

fn figure_conditions() -> Vec<EnvConditions> {
    let mut out: Vec<_> = (0..=8)
        .map(|k| EnvConditions::from_celsius(200.0 + 100.0 * k as f64, 25.0))
        .collect();
    out.extend((0..=10).map(|k| EnvConditions::from_celsius(1000.0, 25.0 + 5.0 * k as f64)));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn newton_residual_below_tolerance(env in env_strategy(), frac in 0.0..=1.0f64) {
        let p = params();
        let v_oc = open_circuit_voltage(&p, env).unwrap();
        let v = frac * v_oc;
        let i = solve_current(&p, env, v).unwrap();
        prop_assert!(residual(&p, env, v, i).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn current_decreases_with_voltage(env in env_strategy(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let p = params();
        let v_oc = open_circuit_voltage(&p, env).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let i_lo = solve_current(&p, env, lo * v_oc).unwrap();
        let i_hi = solve_current(&p, env, hi * v_oc).unwrap();
        prop_assert!(i_hi < i_lo);
    }

    #[test]
    fn current_is_zero_at_open_circuit(env in env_strategy()) {
        let p = params();
        let v_oc = open_circuit_voltage(&p, env).unwrap();
        prop_assert!(solve_current(&p, env, v_oc).unwrap().abs() < 1e-9);
    }

    #[test]
    fn photocurrent_scales_with_irradiance(g in 50.0..=1200.0f64, c in 0.0..=80.0f64) {
        let p = params();
        let half = effective_sources(&p, EnvConditions::from_celsius(g, c));
        let full = effective_sources(&p, EnvConditions::from_celsius(2.0 * g, c));
        prop_assert!((full.i_ph - 2.0 * half.i_ph).abs() <= 1e-12 * full.i_ph);
        prop_assert_eq!(full.i_s, half.i_s);
    }

    #[test]
    fn warmer_cells_lose_voltage_and_gain_current(g in 200.0..=1000.0f64, c in 15.0..=70.0f64) {
        let p = params();
        let cool = EnvConditions::from_celsius(g, c);
        let warm = EnvConditions::from_celsius(g, c + 5.0);
        prop_assert!(open_circuit_voltage(&p, warm).unwrap() < open_circuit_voltage(&p, cool).unwrap());
        prop_assert!(solve_current(&p, warm, 0.0).unwrap() > solve_current(&p, cool, 0.0).unwrap());
    }

    #[test]
    fn oracle_matches_dense_grid(env in env_strategy()) {
        let p = params();
        let v_oc = open_circuit_voltage(&p, env).unwrap();
        let n = 10_000;
        let (v_best, p_best) = (0..=n)
            .map(|k| {
                let v = v_oc * k as f64 / n as f64;
                (v, v * solve_current(&p, env, v).unwrap())
            })
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let op = mpp_oracle(&p, env).unwrap();
        prop_assert!((op.v - v_best).abs() < 0.05, "oracle {} grid {}", op.v, v_best);
        prop_assert!(op.p >= p_best - 1e-9);
        prop_assert_eq!(op.p, op.v * op.i);
    }
}

#[test]
fn power_curve_is_unimodal_for_figure_conditions() {
    let p = params();
    for env in figure_conditions() {
        let v_oc = open_circuit_voltage(&p, env).unwrap();
        let powers: Vec<f64> = (0..500)
            .map(|k| power_at(&p, env, v_oc * k as f64 / 499.0).unwrap())
            .collect();
        let peak = powers
            .iter()
            .enumerate()
            .fold(0, |best, (k, &v)| if v > powers[best] { k } else { best });
        assert!(
            powers[..=peak].windows(2).all(|w| w[1] > w[0]),
            "rising side at {env:?}"
        );
        assert!(
            powers[peak..].windows(2).all(|w| w[1] < w[0]),
            "falling side at {env:?}"
        );
    }
}

#[test]
fn mpp_power_orders_with_conditions() {
    let p = params();
    let by_g: Vec<f64> = (0..=8)
        .map(|k| {
            mpp_oracle(&p, EnvConditions::from_celsius(200.0 + 100.0 * k as f64, 25.0))
                .unwrap()
                .p
        })
        .collect();
    assert!(by_g.windows(2).all(|w| w[1] > w[0]));
    let by_t: Vec<f64> = (0..=10)
        .map(|k| {
            mpp_oracle(&p, EnvConditions::from_celsius(1000.0, 25.0 + 5.0 * k as f64))
                .unwrap()
                .p
        })
        .collect();
    assert!(by_t.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn stc_characteristics_hit_datasheet_targets() {
    let s = stc_characteristics(&params()).unwrap();
    assert!((s.mpp.v - 26.0).abs() / 26.0 < 0.01);
    assert!((s.mpp.p - 111.0).abs() / 111.0 < 0.01);
    assert!((s.v_oc - 32.0).abs() / 32.0 < 0.01);
    assert!((s.i_sc - 4.75).abs() / 4.75 < 0.01);
}
