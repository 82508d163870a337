use carleman_core::bootstrap::HermiteFunction;
use carleman_core::mollifier::{
    build_invisible_carleman, build_invisible_sobolev, carleman_params, carleman_schedule, sobolev_schedule,
    tameness_diagnostic, FunctionModel, LogChain, MollifierMode, NormKind, K_MAX, TAMENESS_MIN_WINDOW,
};
use carleman_core::pwpoly::iterated_box;
use carleman_core::weights::{kappa, WeightSequence, DEFAULT_KAPPA_TOL, DEFAULT_N_MAX};
use carleman_core::Error;
use proptest::prelude::*;

/// The halving schedule written out term by term.
fn schedule_oracle(k: usize, p: f64, eps: f64) -> Vec<f64> {
    let e = 1.0 / (1.0 - p);
    let kk = (k + 1) as f64;
    let mut a: Vec<f64> = Vec::new();
    for l in 1..=k + 1 {
        let v = if l == 1 {
            (eps.powf(p) / (2.0 * kk)).powf(e).min(eps / 2.0)
        } else {
            let prod: f64 = a.iter().product();
            (eps.powf(p) * prod.powf(p) / (2f64.powi(l as i32) * kk))
                .powf(e)
                .min(a[l - 2] / 2.0)
        };
        a.push(v);
    }
    a
}

#[test]
fn sobolev_schedule_examples() {
    let plan = sobolev_schedule(0, 0.5, 0.1).unwrap();
    assert_eq!(plan.a.len(), 1);
    assert!((plan.a[0] - 0.025).abs() < 1e-15);
    let plan = sobolev_schedule(1, 0.5, 0.1).unwrap();
    assert_eq!(plan.a.len(), 2);
    assert!((plan.a[0] - 0.00625).abs() < 1e-15);
    assert_eq!(plan.mode, MollifierMode::Sobolev { k: 1 });
}

#[test]
fn sobolev_schedule_matches_formula() {
    for k in 0..6 {
        for p in [0.2, 0.5, 0.9] {
            for eps in [1.0, 0.1, 0.003] {
                let plan = sobolev_schedule(k, p, eps).unwrap();
                let want = schedule_oracle(k, p, eps);
                for (x, y) in plan.log_a.iter().zip(&want) {
                    if *y < 1e-300 {
                        break;
                    }
                    assert!((x - y.ln()).abs() < 1e-10 * y.ln().abs().max(1.0), "k {k} p {p} eps {eps}: {x} vs {y}");
                }
            }
        }
    }
}

#[test]
fn sobolev_schedule_rejects_bad_input() {
    assert!(matches!(sobolev_schedule(1, 0.0, 0.1), Err(Error::InvalidParameter(_))));
    assert!(matches!(sobolev_schedule(1, 1.0, 0.1), Err(Error::InvalidParameter(_))));
    assert!(matches!(sobolev_schedule(1, 0.5, 0.0), Err(Error::InvalidParameter(_))));
    assert!(matches!(sobolev_schedule(1, 0.5, f64::NAN), Err(Error::InvalidParameter(_))));
}

#[test]
fn deep_schedules_stay_in_log_domain() {
    let plan = sobolev_schedule(12, 0.9, 0.01).unwrap();
    assert_eq!(plan.log_a.len(), 13);
    assert!(plan.log_a.iter().all(|x| x.is_finite()));
    assert!(plan.log_a.windows(2).all(|w| w[1] <= w[0] - std::f64::consts::LN_2));
    // past f64 range the linear widths read as zero
    assert_eq!(plan.a[1], 0.0);
    assert!(plan.support_len <= 0.01);
}

#[test]
fn sobolev_examples_pass() {
    for (k, p, eps) in [(2, 0.5, 0.1), (0, 0.9, 0.5)] {
        let m = build_invisible_sobolev(k, p, eps).unwrap();
        let c = &m.certificates;
        assert!(c.all_pass, "({k},{p},{eps}) {c:?}");
        assert!((m.phi.mass() - 1.0).abs() < 1e-12);
        let (lo, hi) = m.phi.support().unwrap();
        assert!(lo >= 0.0 && hi <= eps);
        assert!(c.quasinorm.measured < eps.powf(p));
    }
}

#[test]
fn sobolev_grid_all_pass() {
    let mut passed = 0;
    for k in 0..=3 {
        for p in [0.3, 0.5, 0.8] {
            for eps in [0.1, 0.01] {
                let m = build_invisible_sobolev(k, p, eps).unwrap();
                let c = &m.certificates;
                assert!((c.mass.measured - 1.0).abs() <= 1e-10);
                assert!(c.support.measured <= eps);
                assert!(c.quasinorm.measured < eps.powf(p));
                assert!(c.first_failure().is_none());
                passed += c.all_pass as usize;
            }
        }
    }
    assert_eq!(passed, 24);
}

#[test]
fn sobolev_per_order_bound() {
    for k in 0..=3 {
        for p in [0.3, 0.5, 0.8] {
            let eps = 0.1;
            let m = build_invisible_sobolev(k, p, eps).unwrap();
            let per = eps.powf(p) / (k + 1) as f64;
            assert_eq!(m.certificates.orders.len(), k + 1);
            for o in &m.certificates.orders {
                if m.materialized == k + 1 {
                    // independent quadrature of the same derivative
                    let d = m.phi.derivative(o.n).unwrap();
                    assert!(d.is_regular());
                    let direct = d.regular.lp_quasinorm(p, 1e-12).unwrap();
                    assert!((direct - o.lp_p).abs() <= 1e-6 * direct, "{direct} vs {}", o.lp_p);
                }
                assert!(o.lp_p - per <= 1e-12, "k {k} p {p} n {}: {} > {per}", o.n, o.lp_p);
            }
        }
    }
}

#[test]
fn sobolev_phi_is_nonnegative() {
    for k in 0..=3 {
        let m = build_invisible_sobolev(k, 0.5, 0.1).unwrap();
        let min = m
            .phi
            .sample(2001)
            .iter()
            .map(|&(_, y)| y)
            .fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12);
        assert!(m.certificates.nonnegative.pass);
    }
}

#[test]
fn phi_is_the_iterated_box() {
    let m = build_invisible_sobolev(2, 0.5, 0.1).unwrap();
    let direct = iterated_box(&m.plan.a).unwrap();
    for x in [0.0, 1e-4, 1e-3, 5e-3, 0.01] {
        assert!((m.phi.eval(x) - direct.eval(x)).abs() <= 1e-9 * direct.sup_norm());
    }
}

#[test]
fn carleman_params_rules() {
    let m = WeightSequence::exp_char(1.0, 0.5).unwrap();
    let cp = carleman_params(&m, 0.5).unwrap();
    assert!(cp.r > 0.0 && cp.r <= 0.5);
    assert!(cp.rho > 0.0);
    if cp.delta.is_infinite() {
        assert_eq!((cp.r, cp.rho), (0.25, 1.0));
    } else {
        assert!((cp.rho - (cp.delta - 1.0) / 4.0).abs() < 1e-12);
        // (p - r) ≥ (1+ρ)p/δ
        assert!(0.5 - cp.r >= (1.0 + cp.rho) * 0.5 / cp.delta - 1e-12);
    }
    let g = WeightSequence::gevrey(1.5).unwrap();
    assert!(matches!(carleman_params(&g, 0.5), Err(Error::NotApplicable(_))));
    assert!(matches!(
        carleman_params(&WeightSequence::sobolev(2), 0.5),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn carleman_schedule_invariants() {
    let m = WeightSequence::exp_char(1.0, 0.5).unwrap();
    let plan = carleman_schedule(&m, 0.5, 0.5, K_MAX).unwrap();
    let data = plan.carleman.as_ref().unwrap();
    assert!(data.trials.last().unwrap().accepted);
    assert!(data.log_b[0] >= 0.0);
    assert!(plan.support_len <= 0.5);
    // strictly decreasing widths
    assert!(plan.log_a.windows(2).all(|w| w[1] < w[0]));
    // a_l = c_l α_l
    for (l, (&la, &lal)) in plan.log_a.iter().zip(&data.log_alpha).enumerate() {
        assert!((la - (data.c[l].ln() + lal)).abs() < 1e-9);
    }
    // Σ_{j>n} a_j ≤ c · α_{n+1}
    let a: Vec<f64> = plan.log_a.iter().map(|x| x.exp()).collect();
    for n in 0..a.len().min(20) {
        let tail: f64 = a[n + 1..].iter().sum::<f64>() + plan.tail_bound;
        assert!(tail <= data.c_sum * data.log_alpha[n + 1].exp() * (1.0 + 1e-9));
    }
}

#[test]
fn carleman_expchar_passes() {
    let m = WeightSequence::exp_char(1.0, 0.5).unwrap();
    let moll = build_invisible_carleman(&m, 0.5, 0.5, K_MAX, 6).unwrap();
    let c = &moll.certificates;
    assert!(c.all_pass, "{:?}", c.first_failure());
    assert!(c.support.measured <= 0.5);
    assert!((c.mass.measured - 1.0).abs() <= 1e-10);
    assert_eq!(c.orders.len(), 7);
    assert_eq!(c.tameness_decreasing, Some(true));
    assert!(c.tameness.decreasing_tail());
    match moll.plan.mode {
        MollifierMode::Carleman { k, .. } => assert!(k <= K_MAX),
        _ => panic!("wrong mode"),
    }
    // expchar's κ terms are identically one, so it is routed through its minorant
    let data = moll.plan.carleman.as_ref().unwrap();
    assert!(data.minorant.is_some());
}

#[test]
fn carleman_short_check_keeps_a_full_tameness_window() {
    let m = WeightSequence::exp_char(1.0, 0.5).unwrap().shift(1);
    let moll = build_invisible_carleman(&m, 0.5, 0.1, K_MAX, 2).unwrap();
    let c = &moll.certificates;
    assert_eq!(c.orders.len(), 3);
    assert_eq!(c.tameness.points.len(), TAMENESS_MIN_WINDOW + 1);
    assert!(c.all_pass, "{:?}", c.first_failure());
}

#[test]
fn carleman_order_certificates_agree_with_quadrature() {
    let m = WeightSequence::exp_char(1.0, 0.5).unwrap();
    let moll = build_invisible_carleman(&m, 0.5, 0.5, K_MAX, 3).unwrap();
    let chain = moll.plan.chain().unwrap();
    for o in &moll.certificates.orders {
        if o.kind == NormKind::Computed {
            let on = chain.lp_derivative(o.n, 0.5).unwrap();
            assert!((on.log_value - o.log_lp_p).abs() < 1e-9);
        }
        assert!(o.log_lp_p <= o.log_target + 1e-9);
    }
}

#[test]
fn carleman_rejects_coupled_sequences() {
    let g = WeightSequence::gevrey(2.0).unwrap();
    assert!(kappa(&g, 0.5, DEFAULT_KAPPA_TOL, DEFAULT_N_MAX).unwrap().is_finite());
    assert!(matches!(
        build_invisible_carleman(&g, 0.5, 0.5, K_MAX, 4),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn tameness_of_box_spline_tends_to_zero() {
    let widths: Vec<f64> = (1..=6).map(|l| 0.5f64.powi(l)).collect();
    let chain = LogChain::from_widths(&widths).unwrap();
    let w = tameness_diagnostic(FunctionModel::Chain(&chain), 0.5, 0, 4).unwrap();
    assert!(!w.points.is_empty());
    // (1-p)^n log(2^n / a_1⋯a_{n+1}) bounds each value
    for t in &w.points {
        let n = t.n;
        let log_bound = n as f64 * 2f64.ln() + (1..=n + 1).map(|l| l as f64 * 2f64.ln()).sum::<f64>();
        assert!(t.value <= 0.5f64.powi(n as i32) * log_bound + 1e-9);
    }
    let last = w.points.last().unwrap().value;
    let first_pos = w.points.iter().map(|t| t.value).fold(f64::NEG_INFINITY, f64::max);
    assert!(last < first_pos);
}

#[test]
fn tameness_of_gaussian_tends_to_zero() {
    let g = HermiteFunction::gaussian();
    let w = tameness_diagnostic(FunctionModel::Hermite(&g), 0.5, 0, 20).unwrap();
    assert_eq!(w.points.len(), 21);
    assert!(w.points[0].value.abs() < 1e-12);
    let tail = &w.points[10..];
    assert!(tail.iter().all(|t| t.value.abs() < 0.05));
    assert!(w.points[20].value.abs() < w.points[10].value.abs());
}

#[test]
fn tameness_rejects_bad_p() {
    let g = HermiteFunction::gaussian();
    assert!(tameness_diagnostic(FunctionModel::Hermite(&g), 1.0, 0, 4).is_err());
}

#[test]
fn plan_json_round_trip() {
    let plan = sobolev_schedule(3, 0.5, 0.1).unwrap();
    let s = serde_json::to_string(&plan).unwrap();
    let back: carleman_core::mollifier::MollifierPlan = serde_json::from_str(&s).unwrap();
    assert_eq!(back, plan);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schedule_invariants(k in 0usize..6, p in 0.1f64..0.9, le in -3.0f64..0.0) {
        let eps = 10f64.powf(le);
        if let Ok(plan) = sobolev_schedule(k, p, eps) {
            prop_assert_eq!(plan.log_a.len(), k + 1);
            prop_assert!(plan.log_a.iter().all(|x| x.is_finite()));
            prop_assert!(plan.log_a.windows(2).all(|w| w[1] <= w[0] - std::f64::consts::LN_2 + 1e-12));
            prop_assert!(plan.a.iter().sum::<f64>() <= eps);
            prop_assert!(plan.support_len <= eps);
        }
    }

    #[test]
    fn sobolev_certificates_hold(k in 0usize..4, p in 0.2f64..0.85, le in -2.0f64..0.0) {
        let eps = 10f64.powf(le);
        let m = build_invisible_sobolev(k, p, eps).unwrap();
        prop_assert!(m.certificates.all_pass);
        prop_assert!(m.certificates.quasinorm.measured < eps.powf(p));
    }
}
