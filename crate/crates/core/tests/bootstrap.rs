use carleman_core::bootstrap::{
    bootstrap_chain_check, bootstrap_step_check, hermite_derivative_sup, hermite_l, hermite_l_pow, hermite_lp,
    hermite_lp_growth, sup_control_bound, verify_sup_control, window_quasinorm, HermiteFunction,
};
use carleman_core::mollifier::{build_invisible_sobolev, FunctionModel};
use carleman_core::pwpoly::{iterated_box, PiecewisePoly};
use carleman_core::weights::{WeightSequence, DEFAULT_KAPPA_TOL};
use carleman_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ln_fact(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `e^{-x²} (L^n q)(x)` with `L^n q` expanded in monomials and Horner.
fn hermite_oracle(q: &[f64], n: usize, x: f64) -> f64 {
    let c = hermite_l_pow(q, n);
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v) * (-x * x).exp()
}

fn grid_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    (0..=steps)
        .map(|i| f(lo + (hi - lo) * i as f64 / steps as f64).abs())
        .fold(0.0, f64::max)
}

fn random_chain(rng: &mut ChaCha8Rng, min_len: usize) -> Vec<f64> {
    let k = rng.gen_range(min_len..=6);
    (0..k).map(|_| rng.gen_range(0.05..1.0)).collect()
}

#[test]
fn hermite_l_examples() {
    assert_eq!(hermite_l(&[1.0]), vec![0.0, -2.0]);
    assert_eq!(hermite_l(&[0.0, 1.0]), vec![1.0, 0.0, -2.0]);
    // L² 1 = L(-2x) = -2 + 4x²
    assert_eq!(hermite_l_pow(&[1.0], 2), vec![-2.0, 0.0, 4.0]);
}

#[test]
fn hermite_l_coefficient_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let d = rng.gen_range(0..=10);
        let q: Vec<f64> = (0..=d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let m = q.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let lq = hermite_l(&q);
        assert!(lq.len() <= d + 2);
        let bound = (d as f64 + 2.0) * m;
        assert!(lq.iter().all(|c| c.abs() <= bound * (1.0 + 1e-15)));
    }
}

#[test]
fn derivative_matches_monomial_expansion() {
    for q in [vec![1.0], vec![0.0, 1.0], vec![-1.0, 0.0, 1.0], vec![0.3, -1.2, 0.0, 0.5]] {
        let f = HermiteFunction::new(q.clone()).unwrap();
        for n in 0..=6 {
            for x in [-2.5, -1.0, -0.3, 0.0, 0.7, 1.9] {
                let want = hermite_oracle(&q, n, x);
                let got = f.derivative_at(n, x);
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "q {q:?} n {n} x {x}");
            }
        }
    }
}

#[test]
fn derivative_matches_finite_difference() {
    let f = HermiteFunction::new(vec![0.5, 1.0, -0.25]).unwrap();
    let h = 1e-5;
    for n in 0..4 {
        for x in [-1.3, 0.2, 0.9] {
            let fd = (f.derivative_at(n, x + h) - f.derivative_at(n, x - h)) / (2.0 * h);
            assert!((fd - f.derivative_at(n + 1, x)).abs() < 1e-6);
        }
    }
}

#[test]
fn sup_examples() {
    let g = HermiteFunction::gaussian();
    let s0 = hermite_derivative_sup(&g, 0).unwrap();
    assert!((s0.measured - 1.0).abs() < 1e-14);
    assert!(s0.bound >= 1.0);
    let s1 = hermite_derivative_sup(&g, 1).unwrap();
    let want = 2f64.sqrt() * (-0.5f64).exp();
    assert!((s1.measured - want).abs() < 1e-12);
    assert!((s1.measured - 0.8578).abs() < 1e-4);
    let bound = 6.0 * 0.5f64.sqrt() * (-0.5f64).exp();
    assert!((s1.bound - bound).abs() < 1e-12);
    assert!((s1.bound - 2.573).abs() < 1e-3);
    assert!((s1.argmax.abs() - 0.5f64.sqrt()).abs() < 1e-8);
}

#[test]
fn sup_matches_dense_grid_and_bound() {
    for q in [vec![1.0], vec![0.0, 1.0], vec![-1.0, 0.0, 1.0], vec![2.0, -1.0, 0.0, 0.0, 0.5]] {
        let f = HermiteFunction::new(q.clone()).unwrap();
        for n in [0, 1, 2, 5, 9] {
            let s = hermite_derivative_sup(&f, n).unwrap();
            let grid = grid_max(|x| f.derivative_at(n, x), -8.0, 8.0, 160_000);
            assert!(s.measured >= grid * (1.0 - 1e-12), "q {q:?} n {n}");
            assert!(s.measured <= grid * (1.0 + 1e-6), "q {q:?} n {n}");
            assert!(s.measured <= s.bound);
        }
    }
}

#[test]
fn sup_bound_holds_to_order_twenty() {
    for q in [vec![1.0], vec![0.0, 1.0], vec![-1.0, 0.0, 1.0]] {
        let f = HermiteFunction::new(q).unwrap();
        for n in 0..=20 {
            let s = hermite_derivative_sup(&f, n).unwrap();
            assert!(s.measured <= s.bound, "n {n}");
        }
    }
}

#[test]
fn hermite_tameness_tends_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = vec![vec![1.0], vec![0.0, 1.0], vec![-1.0, 0.0, 1.0]];
    for _ in 0..3 {
        let d = rng.gen_range(1..=10);
        cases.push((0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    for q in cases {
        let f = HermiteFunction::new(q.clone()).unwrap();
        let v: Vec<f64> = (0..=20)
            .map(|n| 0.5f64.powi(n) * hermite_derivative_sup(&f, n as usize).unwrap().measured.ln())
            .collect();
        assert!(v[20].abs() < 0.05, "q {q:?}: {}", v[20]);
        assert!(v[20].abs() < v[10].abs().max(1e-3), "q {q:?}");
    }
}

#[test]
fn sup_rejects_high_order() {
    let g = HermiteFunction::gaussian();
    assert!(matches!(hermite_derivative_sup(&g, 41), Err(Error::InvalidParameter(_))));
}

#[test]
fn zero_hermite_function() {
    let z = HermiteFunction::new(vec![0.0, 0.0]).unwrap();
    assert!(z.is_zero());
    assert_eq!(hermite_derivative_sup(&z, 3).unwrap().measured, 0.0);
    assert_eq!(hermite_lp(&z, 2, 0.5).unwrap(), 0.0);
}

#[test]
fn non_finite_coefficients_rejected() {
    assert_eq!(HermiteFunction::new(vec![1.0, f64::NAN]), Err(Error::NonFiniteCoefficient));
}

#[test]
fn gaussian_lp() {
    let g = HermiteFunction::gaussian();
    for p in [0.3, 0.5, 0.8] {
        let want = (std::f64::consts::PI / p).sqrt();
        assert!((hermite_lp(&g, 0, p).unwrap() - want).abs() < 1e-9 * want);
    }
}

#[test]
fn hermite_lp_matches_riemann_sum() {
    let f = HermiteFunction::new(vec![-1.0, 0.0, 1.0]).unwrap();
    for n in [1, 3] {
        let h = 1e-4;
        let steps = (20.0 / h) as usize;
        let riemann: f64 = (0..steps)
            .map(|i| f.derivative_at(n, -10.0 + (i as f64 + 0.5) * h).abs().powf(0.5) * h)
            .sum();
        let got = hermite_lp(&f, n, 0.5).unwrap();
        assert!((got - riemann).abs() < 1e-5 * riemann, "n {n}: {got} vs {riemann}");
    }
}

#[test]
fn lp_growth_fit() {
    let g = HermiteFunction::gaussian();
    let growth = hermite_lp_growth(&g, 0.5, 0, 12).unwrap();
    assert_eq!(growth.points.len(), 13);
    assert!(growth.sigma <= 1.6, "sigma {}", growth.sigma);
    assert!(growth.sigma > 0.0);
    for pt in &growth.points {
        assert!((pt.norm - pt.lp_p.powf(2.0)).abs() <= 1e-12 * pt.norm);
    }
    assert!(hermite_lp_growth(&g, 0.5, 4, 4).is_err());
    assert!(hermite_lp_growth(&g, 1.0, 0, 4).is_err());
}

#[test]
fn gevrey_window_norm_is_finite() {
    let g = HermiteFunction::gaussian();
    let m = WeightSequence::gevrey(1.5).unwrap();
    let w = window_quasinorm(FunctionModel::Hermite(&g), &m, 0.5, 16).unwrap();
    assert!(w.value.is_finite() && w.value > 0.0);
    // the window value is a max over orders, so it grows with the window
    let w8 = window_quasinorm(FunctionModel::Hermite(&g), &m, 0.5, 8).unwrap();
    assert!(w8.value <= w.value);
}

#[test]
fn step_check_triangle() {
    let tri = iterated_box(&[1.0, 1.0]).unwrap();
    let s = bootstrap_step_check(FunctionModel::Piecewise(&tri), 0.5).unwrap();
    assert!((s.lhs - 1.0).abs() < 1e-15);
    // |f'| = 1 on [0,2]
    assert!((s.rhs - 2.0).abs() < 1e-12);
    assert!(s.pass && s.slack > 0.0);
}

#[test]
fn step_check_zero() {
    let z = PiecewisePoly::zero();
    let s = bootstrap_step_check(FunctionModel::Piecewise(&z), 0.5).unwrap();
    assert_eq!((s.lhs, s.rhs), (0.0, 0.0));
    assert!(s.pass);
}

#[test]
fn step_check_random_box_splines() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let w = random_chain(&mut rng, 2);
        let f = iterated_box(&w).unwrap();
        for p in [0.3, 0.5, 0.8] {
            let s = bootstrap_step_check(FunctionModel::Piecewise(&f), p).unwrap();
            assert!(s.slack >= -1e-9, "{w:?} p {p}: {}", s.slack);
            assert!(s.pass);
        }
    }
}

#[test]
fn step_check_rejects_bad_p() {
    let tri = iterated_box(&[1.0, 1.0]).unwrap();
    assert!(bootstrap_step_check(FunctionModel::Piecewise(&tri), 1.0).is_err());
}

#[test]
fn chain_check_examples() {
    let w: Vec<f64> = (0..8).map(|i| 1.0 - 0.1 * i as f64).collect();
    let f = iterated_box(&w).unwrap();
    let c = bootstrap_chain_check(FunctionModel::Piecewise(&f), 0.5, 3).unwrap();
    assert!(c.pass && c.log_slack >= -1e-9);
    assert_eq!(c.levels.len(), 4);

    let step = bootstrap_step_check(FunctionModel::Piecewise(&f), 0.5).unwrap();
    let one = bootstrap_chain_check(FunctionModel::Piecewise(&f), 0.5, 1).unwrap();
    assert!((one.log_rhs - step.rhs.ln()).abs() < 1e-12);
    assert!((one.log_lhs - step.lhs.ln()).abs() < 1e-12);

    let g = HermiteFunction::gaussian();
    let h = bootstrap_chain_check(FunctionModel::Hermite(&g), 0.5, 5).unwrap();
    assert!(h.pass);
}

#[test]
fn chain_check_levels_never_loosen() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let w = random_chain(&mut rng, 4);
        let f = iterated_box(&w).unwrap();
        for p in [0.3, 0.5, 0.8] {
            let c = bootstrap_chain_check(FunctionModel::Piecewise(&f), p, w.len() - 2).unwrap();
            assert!(c.levels.windows(2).all(|l| l[1] >= l[0] - 1e-9), "{w:?} p {p}");
            assert!(c.pass);
        }
    }
}

#[test]
fn chain_check_hermite_corpus() {
    for q in [vec![1.0], vec![0.0, 1.0], vec![-1.0, 0.0, 1.0]] {
        let f = HermiteFunction::new(q.clone()).unwrap();
        for n in 1..=5 {
            for p in [0.3, 0.5, 0.8] {
                let c = bootstrap_chain_check(FunctionModel::Hermite(&f), p, n).unwrap();
                assert!(c.log_slack >= -1e-9, "q {q:?} n {n} p {p}");
            }
        }
    }
}

#[test]
fn chain_check_stops_at_singular_part() {
    let f = iterated_box(&[1.0, 0.5]).unwrap();
    assert!(matches!(
        bootstrap_chain_check(FunctionModel::Piecewise(&f), 0.5, 2),
        Err(Error::DistributionalDerivative { .. })
    ));
    assert!(bootstrap_chain_check(FunctionModel::Piecewise(&f), 0.5, 0).is_err());
}

#[test]
fn sup_control_examples() {
    let one = WeightSequence::constant(1.0).unwrap();
    for k in 0..6 {
        let b = sup_control_bound(&one, 0.5, 0.0, k, DEFAULT_KAPPA_TOL).unwrap();
        assert_eq!(b.log_rhs, 0.0);
    }
    let b = sup_control_bound(&one, 0.5, 1.0, 2, DEFAULT_KAPPA_TOL).unwrap();
    assert!((b.log_rhs - 4.0).abs() < 1e-15);
}

#[test]
fn sup_control_gevrey_matches_formula() {
    let m = WeightSequence::gevrey(1.5).unwrap();
    let (p, q, k) = (0.5f64, 0.5f64, 3usize);
    let kap: f64 = (1..=2000).map(|j| q.powi(j as i32) * 1.5 * ln_fact(j)).sum();
    let sum: f64 = (1..=k).map(|j| q.powi(j as i32 - k as i32 - 1) * p * 1.5 * ln_fact(j)).sum();
    let want = p * q.powi(-(k as i32) - 1) * kap - sum;
    let b = sup_control_bound(&m, p, 0.0, k, DEFAULT_KAPPA_TOL).unwrap();
    assert!((b.log_rhs - want).abs() < 1e-9, "{} vs {want}", b.log_rhs);
    assert!(b.error < 1e-9);
}

#[test]
fn sup_control_shift_identity() {
    for m in [WeightSequence::gevrey(1.5).unwrap(), WeightSequence::constant(2.0).unwrap()] {
        for p in [0.3, 0.5] {
            for theta in [0.0, 0.3] {
                for k in 0..=4 {
                    let up = sup_control_bound(&m, p, theta, k + 1, DEFAULT_KAPPA_TOL).unwrap();
                    let sh = sup_control_bound(&m.shift(1), p, theta / (1.0 - p), k, DEFAULT_KAPPA_TOL).unwrap();
                    let tol = 1e-9 * up.log_rhs.abs().max(1.0) + up.error + sh.error;
                    assert!((up.log_rhs - sh.log_rhs).abs() <= tol, "k {k} p {p}");
                }
            }
        }
    }
}

#[test]
fn sup_control_errors() {
    let e = WeightSequence::exp_char(1.0, 0.5).unwrap();
    assert_eq!(sup_control_bound(&e, 0.5, 0.0, 1, DEFAULT_KAPPA_TOL), Err(Error::DivergentKappa));
    assert_eq!(
        sup_control_bound(&WeightSequence::sobolev(2), 0.5, 0.0, 1, DEFAULT_KAPPA_TOL),
        Err(Error::DivergentKappa)
    );
    let g = WeightSequence::gevrey(1.5).unwrap();
    assert!(sup_control_bound(&g, 0.5, -1.0, 1, DEFAULT_KAPPA_TOL).is_err());
}

#[test]
fn verify_sup_control_hermite_gevrey() {
    let g = HermiteFunction::gaussian();
    let m = WeightSequence::gevrey(1.5).unwrap();
    for k in 0..=2 {
        let c = verify_sup_control(FunctionModel::Hermite(&g), &m, 0.5, 0.0, k, 16).unwrap();
        assert!(c.pass, "k {k}: slack {}", c.log_slack);
        assert!(c.window_lower_bound && !c.degenerate);
    }
}

#[test]
fn verify_sup_control_zero_function() {
    let z = PiecewisePoly::zero();
    let m = WeightSequence::gevrey(1.5).unwrap();
    let c = verify_sup_control(FunctionModel::Piecewise(&z), &m, 0.5, 0.0, 0, 4).unwrap();
    assert!(c.pass);
    assert_eq!(c.lhs, 0.0);
}

#[test]
fn verify_sup_control_invisible_mollifier_under_sobolev() {
    let moll = build_invisible_sobolev(2, 0.5, 0.1).unwrap();
    let m = WeightSequence::sobolev(2);
    let c = verify_sup_control(FunctionModel::Piecewise(&moll.phi), &m, 0.5, 0.0, 1, 1).unwrap();
    assert!(c.pass && c.degenerate);
}

#[test]
fn hermite_json_round_trip() {
    let f = HermiteFunction::new(vec![0.25, -1.0, 3.0]).unwrap();
    let s = serde_json::to_string(&f).unwrap();
    let back: HermiteFunction = serde_json::from_str(&s).unwrap();
    assert_eq!(back, f);
    assert!(serde_json::from_str::<HermiteFunction>(r#"{"q":[]}"#).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l_coefficient_bound(q in prop::collection::vec(-5.0f64..5.0, 1..11)) {
        let m = q.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let d = q.len() - 1;
        let lq = hermite_l(&q);
        prop_assert!(lq.iter().all(|c| c.abs() <= (d as f64 + 2.0) * m * (1.0 + 1e-15)));
    }

    #[test]
    fn step_inequality_on_box_chains(
        w in prop::collection::vec(0.05f64..1.0, 2..6),
        p in 0.1f64..0.95,
    ) {
        let f = iterated_box(&w).unwrap();
        let s = bootstrap_step_check(FunctionModel::Piecewise(&f), p).unwrap();
        prop_assert!(s.slack >= -1e-9);
    }
}
