use kzquench::protocols::{make_nloai_with, Branch, ZetaRegime};
use kzquench::scaling::fit_power_law;
use kzquench::{make_linear, make_nloai, make_oai, AlphaPolicy, CriticalData, QuenchProtocol};
use proptest::prelude::*;

const ISING: CriticalData = CriticalData::ISING;

fn interior(p: &QuenchProtocol, u: f64) -> f64 {
    let (a, b) = p.window();
    (a + u * (b - a)).clamp(a, b)
}

fn arb_protocol() -> impl Strategy<Value = QuenchProtocol> {
    (
        0usize..3,
        1.5f64..4.0,
        10.0f64..3000.0,
        0.05f64..0.9,
        1.1f64..5.0,
        0.0f64..0.9,
    )
        .prop_map(|(kind, r, tau, zeta_frac, g_i, g_f)| {
            let zeta = zeta_frac * tau;
            match kind {
                0 => make_linear(tau, g_i, g_f, ISING).unwrap(),
                1 => make_oai(tau, zeta, g_i, g_f, ISING).unwrap(),
                _ => make_nloai(tau, zeta, r, g_i, g_f, ISING).unwrap(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn central_difference_matches_rate(
        tau in 50.0f64..2000.0,
        zeta_frac in 0.02f64..0.5,
        r in prop::sample::select(vec![1.0, 2.0, 3.0]),
        u in 0.01f64..0.99,
    ) {
        let p = make_nloai(tau, zeta_frac * tau, r, 2.0, 0.0, ISING).unwrap();
        let t = interior(&p, u);
        let h = 1e-4;
        let (a, b) = p.window();
        prop_assume!(t - h > a && t + h < b);
        let fd = (p.epsilon(t + h).unwrap() - p.epsilon(t - h).unwrap()) / (2.0 * h);
        prop_assert!((p.epsilon_dot(t).unwrap() - fd).abs() <= 1e-6);
    }

    #[test]
    fn epsilon_is_monotone_with_sign_of_minus_t(p in arb_protocol()) {
        let ts: Vec<f64> = (0..=400).map(|k| interior(&p, k as f64 / 400.0)).collect();
        let eps: Vec<f64> = ts.iter().map(|&t| p.epsilon(t).unwrap()).collect();
        prop_assert!(eps.windows(2).all(|w| w[1] < w[0]));
        for (&t, &e) in ts.iter().zip(&eps) {
            if t != 0.0 {
                prop_assert_eq!(e.signum(), -t.signum());
            }
        }
        prop_assert_eq!(p.epsilon(0.0).unwrap(), 0.0);
        prop_assert!(ts.iter().all(|&t| p.epsilon_dot(t).unwrap() <= 0.0));
    }

    #[test]
    fn endpoints_reproduce_couplings(p in arb_protocol()) {
        prop_assert!((p.g_of_t(p.t_i()).unwrap() - p.g_i()).abs() < 1e-12);
        prop_assert!((p.g_of_t(p.t_f()).unwrap() - p.g_f()).abs() < 1e-12);
        prop_assert!(p.t_i() < 0.0 && p.t_f() > 0.0);
    }

    #[test]
    fn total_time_below_bound(p in arb_protocol()) {
        prop_assert!(p.total_time() < p.time_bound());
        if let Some(theta) = p.theta() {
            prop_assert!(-theta <= p.t_i() && p.t_f() <= theta);
        }
    }

    #[test]
    fn auxiliary_identity_holds_everywhere(
        tau in 20.0f64..5000.0,
        zeta_frac in 0.01f64..0.9,
        r in 1.0f64..4.0,
        u in 0.0f64..1.0,
    ) {
        let zeta = zeta_frac * tau;
        let p = make_nloai(tau, zeta, r, 3.0, 0.0, ISING).unwrap();
        let t = interior(&p, u);
        let ts = p.timescales(t, Branch::Auxiliary).unwrap();
        prop_assert!((ts.drive / ts.relax - zeta).abs() < 1e-9 * zeta.max(1.0));
    }

    #[test]
    fn nloai_with_unit_exponent_is_oai(tau in 20.0f64..5000.0, zeta_frac in 0.01f64..0.9) {
        let zeta = zeta_frac * tau;
        let o = make_oai(tau, zeta, 2.0, 0.0, ISING).unwrap();
        let n = make_nloai(tau, zeta, 1.0, 2.0, 0.0, ISING).unwrap();
        prop_assert!((o.t_i() - n.t_i()).abs() < 1e-12 * tau);
        for k in 0..=200 {
            let t = interior(&o, k as f64 / 200.0);
            prop_assert!((o.epsilon(t).unwrap() - n.epsilon(t).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn large_zeta_reduces_to_linear_ramp() {
    let tau = 200.0;
    let mut sups = Vec::new();
    for &zeta in &[1e4, 1e6, 1e8] {
        let p = make_nloai_with(tau, zeta, 1.0, 2.0, 0.0, ISING, ZetaRegime::Unrestricted).unwrap();
        let sup = (0..=100)
            .map(|k| -150.0 + 3.0 * k as f64)
            .map(|t| (p.epsilon(t).unwrap() + t / tau).abs())
            .fold(0.0, f64::max);
        sups.push(sup);
    }
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
    assert!(sups[2] < 1e-3, "{sups:?}");
}

#[test]
fn fixed_zeta_total_time_grows_as_square_root() {
    let policy = AlphaPolicy::constant(0.05);
    let points: Vec<(f64, f64)> = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0]
        .iter()
        .map(|&tau| {
            let p = make_oai(tau, policy.zeta(tau), 2.0, 0.0, ISING).unwrap();
            (tau, p.total_time())
        })
        .collect();
    let fit = fit_power_law(&points).unwrap();
    assert!(
        (fit.exponent - 0.5).abs() < 0.01,
        "slope = {}",
        fit.exponent
    );
}

#[test]
fn rate_at_crossing() {
    let o = make_oai(200.0, 32.0, 2.0, 0.0, ISING).unwrap();
    assert!((o.epsilon_dot(0.0).unwrap() + 1.0 / 200.0).abs() < 1e-15);
    let n = make_nloai(100.0, 80.0, 2.0, 5.0, 0.0, ISING).unwrap();
    assert_eq!(n.epsilon_dot(0.0).unwrap(), 0.0);
    let h = 1e-7;
    let left = (n.g_of_t(0.0).unwrap() - n.g_of_t(-h).unwrap()) / h;
    let right = (n.g_of_t(h).unwrap() - n.g_of_t(0.0).unwrap()) / h;
    assert!((left - right).abs() < 1e-6);
}

#[test]
fn linear_drive_timescale_is_abs_t() {
    let p = make_linear(300.0, 2.0, 0.0, ISING).unwrap();
    for k in 1..50 {
        let t = -290.0 + 12.0 * k as f64;
        if t == 0.0 {
            continue;
        }
        let ts = p.timescales(t, Branch::Full).unwrap();
        assert!((ts.drive - t.abs()).abs() < 1e-12 * t.abs().max(1.0));
    }
}
