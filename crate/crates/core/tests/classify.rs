use carleman_core::classify::{
    classify, classify_grid, quasianalyticity_witness, theta_strictness_witness, ClassifyOptions, Phase, QaVerdict,
    DIAG_HI, DIAG_LO,
};
use carleman_core::mollifier::{tameness_diagnostic, FunctionModel};
use carleman_core::weights::{Confidence, KappaStatus, Quasianalyticity, TailRule, WeightSequence};
use carleman_core::Error;

fn ln_fact(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `log N_{n,θ}` by direct summation of the defining series.
fn log_n_oracle(log_m: impl Fn(usize) -> f64, p: f64, theta: f64, n: usize) -> f64 {
    let q = 1.0 - p;
    theta * q.powi(-(n as i32)) + (1..=3000).map(|j| q.powi(j as i32 - 1) * p * log_m(n + j)).sum::<f64>()
}

fn families() -> Vec<(&'static str, WeightSequence)> {
    vec![
        ("const", WeightSequence::constant(1.0).unwrap()),
        ("gevrey 1.5", WeightSequence::gevrey(1.5).unwrap()),
        ("gevrey 2", WeightSequence::gevrey(2.0).unwrap()),
        ("expchar 1", WeightSequence::exp_char(1.0, 0.5).unwrap()),
        ("sobolev 2", WeightSequence::sobolev(2)),
    ]
}

fn expected_phase(name: &str, p: f64) -> Phase {
    match name {
        "sobolev 2" => Phase::SobolevDegenerate,
        // κ terms are ((1-p)/(1-p_M))^j with p_M = 0.5
        "expchar 1" if p <= 0.5 => Phase::Disconnected,
        _ => Phase::CoupledSmooth,
    }
}

#[test]
fn phase_matrix() {
    let opts = ClassifyOptions::default();
    for (name, m) in families() {
        for p in [0.3, 0.5, 0.8] {
            let r = classify(&m, p, 0.0, &opts).unwrap();
            assert_eq!(r.phase, expected_phase(name, p), "{name} p {p}");
            match r.phase {
                Phase::CoupledSmooth => assert_eq!(r.kappa.as_ref().unwrap().status, KappaStatus::Finite),
                Phase::Disconnected => {
                    assert_eq!(r.kappa.as_ref().unwrap().status, KappaStatus::Diverged);
                    assert_eq!(r.regularity.p_regular, Some(true));
                    assert_eq!(r.quasianalytic.verdict, QaVerdict::NotApplicable);
                }
                Phase::SobolevDegenerate => assert_eq!(r.quasianalytic.verdict, QaVerdict::NotApplicable),
                Phase::Inconclusive => panic!("{name} p {p} inconclusive"),
            }
        }
    }
}

#[test]
fn spec_examples() {
    let opts = ClassifyOptions::default();
    let g = WeightSequence::gevrey(1.5).unwrap();
    let r = classify(&g, 0.5, 0.1, &opts).unwrap();
    assert_eq!(r.phase, Phase::CoupledSmooth);
    assert_eq!(r.quasianalytic.verdict, QaVerdict::No);

    let e = WeightSequence::exp_char(1.0, 0.5).unwrap();
    assert_eq!(classify(&e, 0.5, 0.0, &opts).unwrap().phase, Phase::Disconnected);

    let s = WeightSequence::sobolev(2);
    for theta in [0.0, 0.5, 3.0] {
        assert_eq!(classify(&s, 0.5, theta, &opts).unwrap().phase, Phase::SobolevDegenerate);
    }
}

#[test]
fn positive_theta_is_never_quasianalytic() {
    let opts = ClassifyOptions::default();
    let mut fams = families();
    fams.push(("factorial", WeightSequence::factorial()));
    for (name, m) in fams {
        for p in [0.3, 0.5, 0.8] {
            for theta in [0.01, 0.1, 1.0] {
                let r = classify(&m, p, theta, &opts).unwrap();
                if r.kappa.as_ref().is_some_and(|k| k.is_finite()) {
                    assert_eq!(r.quasianalytic.verdict, QaVerdict::No, "{name} p {p} theta {theta}");
                }
            }
        }
    }
}

#[test]
fn zero_theta_defers_to_n() {
    let opts = ClassifyOptions::default();
    let cases = [
        (WeightSequence::constant(1.0).unwrap(), Quasianalyticity::Quasianalytic),
        (WeightSequence::gevrey(1.5).unwrap(), Quasianalyticity::NonQuasianalytic),
        (WeightSequence::factorial(), Quasianalyticity::Quasianalytic),
    ];
    for (m, want) in cases {
        let r = classify(&m, 0.5, 0.0, &opts).unwrap();
        assert_eq!(r.quasianalytic.verdict, QaVerdict::Deferred);
        assert_eq!(r.quasianalytic.of_n.as_ref().unwrap().verdict, want, "{:?}", m.family);
    }
}

#[test]
fn n_prefix_matches_series() {
    let opts = ClassifyOptions::default();
    let g = WeightSequence::gevrey(1.5).unwrap();
    for theta in [0.0, 0.2] {
        let r = classify(&g, 0.5, theta, &opts).unwrap();
        assert_eq!(r.n_prefix.len(), opts.n_prefix);
        for (n, &v) in r.n_prefix.iter().enumerate() {
            let want = log_n_oracle(|k| 1.5 * ln_fact(k), 0.5, theta, n);
            assert!((v - want).abs() < 1e-9 * want.abs().max(1.0), "n {n}: {v} vs {want}");
        }
    }
}

#[test]
fn shift_consistency() {
    let opts = ClassifyOptions::default();
    let mut fams = families();
    fams.push(("factorial", WeightSequence::factorial()));
    for (name, m) in fams {
        for p in [0.3, 0.5, 0.8] {
            for theta in [0.0, 0.2] {
                let base = classify(&m, p, theta, &opts).unwrap();
                let decisive = base
                    .kappa
                    .as_ref()
                    .is_some_and(|k| k.status != KappaStatus::Inconclusive);
                if !decisive {
                    continue;
                }
                let shifted = classify(&m.shift(1), p, theta / (1.0 - p), &opts).unwrap();
                assert_eq!(shifted.phase, base.phase, "{name} p {p} theta {theta}");
            }
        }
    }
}

#[test]
fn tables_carry_heuristic_confidence() {
    let vals: Vec<f64> = (0..60).map(|n| 1.5 * ln_fact(n)).collect();
    let m = WeightSequence::table(vals, TailRule::LogLinear).unwrap();
    let r = classify(&m, 0.5, 0.1, &ClassifyOptions::default()).unwrap();
    assert_eq!(r.phase, Phase::CoupledSmooth);
    assert_eq!(r.quasianalytic.verdict, QaVerdict::No);
    assert_eq!(r.quasianalytic.confidence, Some(Confidence::Heuristic));
}

#[test]
fn grid_keeps_order() {
    let g = WeightSequence::gevrey(2.0).unwrap();
    let ps: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    // at p = 0.1 the κ series needs more than the default 200 terms
    let opts = ClassifyOptions {
        n_max: 600,
        ..ClassifyOptions::default()
    };
    let rs = classify_grid(&g, &ps, 0.0, &opts).unwrap();
    assert_eq!(rs.len(), 9);
    for (r, p) in rs.iter().zip(&ps) {
        assert_eq!(r.p, *p);
        assert_eq!(r.phase, Phase::CoupledSmooth);
    }
    assert!(classify_grid(&g, &[], 0.0, &ClassifyOptions::default()).unwrap().is_empty());
}

#[test]
fn classify_rejects_bad_parameters() {
    let g = WeightSequence::gevrey(2.0).unwrap();
    let opts = ClassifyOptions::default();
    assert!(matches!(classify(&g, 0.0, 0.0, &opts), Err(Error::InvalidParameter(_))));
    assert!(matches!(classify(&g, 0.5, -0.1, &opts), Err(Error::InvalidParameter(_))));
}

#[test]
fn report_json_round_trip() {
    let r = classify(&WeightSequence::gevrey(1.5).unwrap(), 0.5, 0.0, &ClassifyOptions::default()).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    let back: carleman_core::classify::RegimeReport = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
}

#[test]
fn quasianalyticity_witness_example() {
    let g = WeightSequence::gevrey(1.5).unwrap();
    let w = quasianalyticity_witness(&g, 0.5, 1.0, 14, 6).unwrap();
    assert!(w.all_pass);
    assert!((0.8..=1.2).contains(&w.theta_hat()), "theta hat {}", w.theta_hat());
    assert!(w.rho < 1.0);
    assert!(w.support_len.is_finite() && w.support_len > 0.0);
    assert!((w.mass.measured - 1.0).abs() <= 1e-10);
    assert!(w.orders.iter().all(|o| o.pass));
    assert_eq!(w.tameness.points.first().unwrap().n, DIAG_LO);
    assert_eq!(w.tameness.points.last().unwrap().n, DIAG_HI);
}

#[test]
fn witness_widths_follow_the_associated_sequence() {
    let (p, tp) = (0.5, 1.0);
    let g = WeightSequence::gevrey(1.5).unwrap();
    let w = quasianalyticity_witness(&g, p, tp, 64, 6).unwrap();
    let lm = |k: usize| 1.5 * ln_fact(k);
    for n in 0..10 {
        let want = log_n_oracle(lm, p, tp, n);
        assert!((w.log_n[n] - want).abs() < 1e-9 * want.abs().max(1.0));
    }
    // a_1 ⋯ a_{n+1} = 1/N_n
    let mut prod = 0.0;
    for n in 0..10 {
        prod += w.log_a[n];
        assert!((prod + w.log_n[n]).abs() < 1e-9 * w.log_n[n].abs().max(1.0));
    }
    // support = Σ a_n, finite, within the geometric bound
    let listed: f64 = w.log_a.iter().map(|x| x.exp()).sum();
    assert!(listed <= w.support_len && w.support_len <= listed + w.tail_bound * (1.0 + 1e-12));
    assert!(w.support_len <= w.log_a[0].exp() + w.log_a[1].exp() / (1.0 - w.rho));
}

#[test]
fn witness_ratio_factor() {
    // a_{n+1}/a_n ≤ e^{-θ' p² (1-p)^{-n}} from log-convexity of M
    let g = WeightSequence::gevrey(1.5).unwrap();
    for (p, tp) in [(0.5, 1.0), (0.3, 0.5)] {
        let w = quasianalyticity_witness(&g, p, tp, 64, 6).unwrap();
        let q = 1.0 - p;
        for (i, r) in w.ratios.iter().enumerate().skip(1) {
            let n = (i + 1) as i32;
            let bound = -tp * p * p * q.powi(-n);
            assert!(r.ln() <= bound + 1e-9 * bound.abs(), "p {p} n {n}: {} > {bound}", r.ln());
        }
        if p == 0.5 {
            assert!(w.ratios_monotone);
        }
    }
}

#[test]
fn witness_errors() {
    let e = WeightSequence::exp_char(1.0, 0.5).unwrap();
    assert!(matches!(quasianalyticity_witness(&e, 0.5, 1.0, 14, 6), Err(Error::NotApplicable(_))));
    assert!(matches!(
        quasianalyticity_witness(&WeightSequence::sobolev(2), 0.5, 1.0, 14, 6),
        Err(Error::NotApplicable(_))
    ));
    let g = WeightSequence::gevrey(1.5).unwrap();
    assert!(matches!(quasianalyticity_witness(&g, 0.5, 0.0, 14, 6), Err(Error::InvalidParameter(_))));
    let bumpy = WeightSequence::table(vec![0.0, 3.0, 3.0, 9.0, 12.0, 15.0], TailRule::LogLinear).unwrap();
    assert!(matches!(quasianalyticity_witness(&bumpy, 0.5, 1.0, 14, 6), Err(Error::NotLogConvex { .. })));
}

#[test]
fn theta_strictness_example() {
    let g = WeightSequence::gevrey(1.5).unwrap();
    let r = theta_strictness_witness(&g, 0.5, 0.0, 1.0).unwrap();
    assert!(r.pass);
    assert!(r.theta_hat >= 0.8);
    assert!(r.theta_lower.unwrap() <= r.theta_hat);
    assert!(r.theta_lower.unwrap() > r.theta + r.margin);
    assert_eq!(r.margin, 0.25);
    assert_eq!(r.window, (DIAG_LO, DIAG_HI));
}

#[test]
fn theta_strictness_rejects_equal_indices() {
    let g = WeightSequence::gevrey(1.5).unwrap();
    assert!(matches!(theta_strictness_witness(&g, 0.5, 1.0, 1.0), Err(Error::InvalidParameter(_))));
    assert!(matches!(theta_strictness_witness(&g, 0.5, 2.0, 1.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn theta_margin_stabilises_along_windows() {
    let g = WeightSequence::gevrey(1.5).unwrap();
    let r = theta_strictness_witness(&g, 0.5, 0.0, 1.0).unwrap();
    let chain = r.witness.chain().unwrap();
    let gaps: Vec<f64> = [(6, 12), (10, 18), (14, 24)]
        .iter()
        .map(|&(lo, hi)| {
            let w = tameness_diagnostic(FunctionModel::Chain(&chain), 0.5, lo, hi).unwrap();
            assert!(w.theta_hat > r.theta + r.margin);
            (w.theta_hat - 1.0).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{gaps:?}");
}
