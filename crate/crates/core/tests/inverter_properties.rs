use mppt_core::inverter::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn phase_voltages_sum_to_zero_on_the_third_levels(u_dc in 0.0..1000.0f64) {
        let levels = [0.0, 1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0, -2.0 / 3.0].map(|f| f * u_dc);
        for s in SwitchState::all() {
            let ph = phase_voltages(s, u_dc).as_array();
            prop_assert!(ph.iter().sum::<f64>().abs() <= 1e-12 * u_dc.max(1.0));
            for v in ph {
                prop_assert!(levels.iter().any(|l| (v - l).abs() <= 1e-12 * u_dc.max(1.0)), "{} not a level", v);
            }
        }
    }

    #[test]
    fn leg_minus_neutral_is_phase(u_dc in 0.0..1000.0f64) {
        for s in SwitchState::all() {
            let legs = leg_voltages(s, u_dc);
            let n = neutral_voltage(legs);
            let ph = phase_voltages(s, u_dc).as_array();
            for (lk, pk) in legs.0.iter().zip(ph) {
                prop_assert!((lk - n - pk).abs() <= 1e-12 * u_dc.max(1.0));
            }
        }
    }

    #[test]
    fn line_voltages_telescope(a in -500.0..500.0f64, b in -500.0..500.0f64, c in -500.0..500.0f64) {
        let l = line_voltages(LegVoltages([a, b, c]));
        prop_assert!((l.u_ab + l.u_bc + l.u_ca).abs() <= 1e-12 * 500.0);
    }
}
