use carleman_core::pwpoly::{
    box_fn, chain_difference_measure, grid_oracle_convolve, iterated_box, uniform_grid, AtomicMeasure,
    PiecewisePoly, DEFAULT_LP_TOL,
};
use carleman_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn triangle() -> PiecewisePoly {
    box_fn(1.0).unwrap().convolve_box(1.0).unwrap()
}

/// Cardinal quadratic B-spline on [0,3].
fn bspline2(x: f64) -> f64 {
    if (0.0..1.0).contains(&x) {
        x * x / 2.0
    } else if (1.0..2.0).contains(&x) {
        (-2.0 * x * x + 6.0 * x - 3.0) / 2.0
    } else if (2.0..3.0).contains(&x) {
        (3.0 - x) * (3.0 - x) / 2.0
    } else {
        0.0
    }
}

/// Brute-force midpoint integral of |f|^p for cross-checks.
fn riemann_lp(f: &PiecewisePoly, p: f64, h: f64) -> f64 {
    let (lo, hi) = f.support().unwrap();
    let n = ((hi - lo) / h).ceil() as usize;
    let dx = (hi - lo) / n as f64;
    (0..n).map(|i| f.eval(lo + (i as f64 + 0.5) * dx).abs().powf(p) * dx).sum()
}

#[test]
fn box_examples() {
    let b = box_fn(1.0).unwrap();
    assert_eq!(b.eval(0.5), 1.0);
    assert_eq!(b.support(), Some((0.0, 1.0)));
    let h = box_fn(0.5).unwrap();
    assert_eq!(h.eval(0.25), 2.0);
    assert!(close(box_fn(0.01).unwrap().mass(), 1.0, 1e-15));
    assert!(matches!(box_fn(0.0), Err(Error::NonPositiveWidth(_))));
    assert!(matches!(box_fn(-1.0), Err(Error::NonPositiveWidth(_))));
}

#[test]
fn triangle_and_quadratic_spline() {
    let t = triangle();
    assert_eq!(t.support(), Some((0.0, 2.0)));
    assert!(close(t.eval(1.0), 1.0, 1e-15));
    assert!(close(t.eval(0.5), 0.5, 1e-15));
    assert!(close(t.eval(1.5), 0.5, 1e-15));
    let q = t.convolve_box(1.0).unwrap();
    assert!(close(q.eval(1.5), 0.75, 1e-15));
    for x in uniform_grid(-0.5, 3.5, 400) {
        assert!(close(q.eval(x), bspline2(x), 1e-14), "x = {x}");
    }
}

#[test]
fn convolution_raises_degree_by_one_and_keeps_mass() {
    let mut f = box_fn(0.7).unwrap();
    for (k, a) in [0.3, 1.1, 0.05, 0.6, 0.9].into_iter().enumerate() {
        let g = f.convolve_box(a).unwrap();
        assert_eq!(g.degree(), f.degree() + 1, "step {k}");
        f = g;
    }
    assert!(close(f.mass(), 1.0, 1e-14));
}

#[test]
fn iterated_box_support_and_sup() {
    let phi = iterated_box(&[1.0, 0.5, 0.25]).unwrap();
    assert_eq!(phi.support(), Some((0.0, 1.75)));
    assert!(phi.sup_norm() <= 1.0 + 1e-15);
    assert!(close(iterated_box(&[1.0, 1.0]).unwrap().sup_norm(), 1.0, 1e-15));
    assert!(iterated_box(&[]).is_err());
}

#[test]
fn derivative_examples() {
    let d1 = triangle().derivative(1).unwrap();
    assert!(d1.is_regular());
    assert!(close(d1.regular.eval(0.5), 1.0, 1e-14));
    assert!(close(d1.regular.eval(1.5), -1.0, 1e-14));

    let d2 = triangle().derivative(2).unwrap();
    let atoms: Vec<(f64, f64)> = d2.singular.atoms().iter().map(|a| (a.location, a.mass)).collect();
    assert_eq!(atoms.len(), 3);
    for ((x, m), (ex, em)) in atoms.iter().zip([(0.0, 1.0), (1.0, -2.0), (2.0, 1.0)]) {
        assert!(close(*x, ex, 1e-15) && close(*m, em, 1e-13));
    }
    assert!(d2.regular.sup_norm() < 1e-13);

    let db = box_fn(1.0).unwrap().derivative(1).unwrap();
    let atoms: Vec<(f64, f64)> = db.singular.atoms().iter().map(|a| (a.location, a.mass)).collect();
    assert_eq!(atoms, vec![(0.0, 1.0), (1.0, -1.0)]);

    assert!(matches!(
        box_fn(1.0).unwrap().derivative(2),
        Err(Error::DistributionalDerivative { order: 1 })
    ));
}

#[test]
fn chain_derivatives_below_smoothness_have_no_atoms() {
    let w = [0.9, 0.4, 0.3, 0.2, 0.1];
    let phi = iterated_box(&w).unwrap();
    for n in 0..w.len() {
        assert!(phi.derivative(n).unwrap().is_regular(), "n = {n}");
    }
    assert!(!phi.derivative(w.len()).unwrap().is_regular());
}

#[test]
fn derivative_of_box_convolution_is_scaled_difference() {
    let f = iterated_box(&[0.6, 0.35]).unwrap();
    let a = 0.2;
    let g = f.convolve_box(a).unwrap();
    let dg = g.derivative(1).unwrap();
    assert!(dg.is_regular());
    let diff = AtomicMeasure::new(vec![(0.0, 1.0 / a), (a, -1.0 / a)]).unwrap();
    let expect = diff.convolve_pw(&f).unwrap();
    let gap = dg.regular.sub(&expect).sup_norm();
    assert!(gap < 1e-11, "gap {gap}");
}

#[test]
fn sup_norm_examples() {
    assert!(close(triangle().sup_norm(), 1.0, 1e-15));
    assert!(close(box_fn(0.25).unwrap().sup_norm(), 4.0, 1e-15));
    assert!(close(iterated_box(&[1.0, 1.0, 1.0]).unwrap().sup_norm(), 0.75, 1e-14));
    // interior maximum of a cubic
    let c = PiecewisePoly::from_global_poly(0.0, 2.0, &[0.0, 3.0, 0.0, -1.0]).unwrap();
    assert!(close(c.sup_norm(), 2.0, 1e-13));
}

#[test]
fn lp_examples() {
    let v = box_fn(0.5).unwrap().lp_quasinorm(0.5, DEFAULT_LP_TOL).unwrap();
    assert!(close(v, 0.5f64.powf(0.5), 1e-9));
    let t = triangle().lp_quasinorm(0.5, DEFAULT_LP_TOL).unwrap();
    assert!(close(t, 4.0 / 3.0, 1e-9), "{t}");
    for p in [0.1, 0.3, 0.8] {
        let a: f64 = 0.37;
        let v = box_fn(a).unwrap().lp_quasinorm(p, DEFAULT_LP_TOL).unwrap();
        assert!(close(v, a.powf(1.0 - p), 1e-12));
    }
    assert!(triangle().lp_quasinorm(0.0, 1e-10).is_err());
    assert!(triangle().lp_quasinorm(1.5, 1e-10).is_err());
}

#[test]
fn lp_of_random_cubic_matches_riemann() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = PiecewisePoly::from_global_poly(0.0, 1.0, &c).unwrap();
        let exact = f.lp_quasinorm(0.7, DEFAULT_LP_TOL).unwrap();
        let oracle = riemann_lp(&f, 0.7, 1e-6);
        assert!(close(exact, oracle, 1e-6), "{exact} vs {oracle}");
    }
}

#[test]
fn lp_with_interior_double_root() {
    // (x - 1/2)^2 on [0,1], p = 0.25: ∫|x-1/2|^{1/2} = 2·(2/3)(1/2)^{3/2}
    let f = PiecewisePoly::from_global_poly(0.0, 1.0, &[0.25, -1.0, 1.0]).unwrap();
    let v = f.lp_quasinorm(0.25, 1e-12).unwrap();
    let exact = 2.0 * (2.0 / 3.0) * 0.5f64.powf(1.5);
    assert!(close(v, exact, 1e-9), "{v} vs {exact}");
}

#[test]
fn lp_p_one_is_exact_absolute_integral() {
    let f = PiecewisePoly::from_global_poly(-1.0, 2.0, &[-0.5, 1.0, 0.0, -0.3]).unwrap();
    let v = f.lp_quasinorm(1.0, 1e-10).unwrap();
    let oracle = riemann_lp(&f, 1.0, 1e-6);
    assert!(close(v, oracle, 1e-9));
    let t = triangle().lp_quasinorm(1.0, 1e-10).unwrap();
    assert!(close(t, 1.0, 1e-12));
}

#[test]
fn atomic_examples() {
    let mu = AtomicMeasure::new(vec![(0.0, 1.0), (1.0, -1.0)]).unwrap();
    assert!(close(mu.lp(0.5), 2.0, 1e-15));
    assert_eq!(AtomicMeasure::empty().lp(0.5), 0.0);
    let n = 5;
    let c: f64 = 0.3;
    let many = AtomicMeasure::new((0..1 << n).map(|i| (i as f64, c)).collect()).unwrap();
    assert!(close(many.lp(0.4), 32.0 * c.powf(0.4), 1e-13));
    let merged = AtomicMeasure::new(vec![(1.0, 2.0), (0.0, 1.0), (1.0, -2.0)]).unwrap();
    assert_eq!(merged.len(), 1);
    assert_eq!(merged.atoms()[0].location, 0.0);
}

#[test]
fn atomic_convolution_examples() {
    let f = iterated_box(&[0.5, 0.3]).unwrap();
    let same = AtomicMeasure::dirac(0.0).convolve_pw(&f).unwrap();
    assert!(same.sub(&f).sup_norm() < 1e-15);

    let a = 0.4;
    let d = AtomicMeasure::new(vec![(a, 1.0 / a), (0.0, -1.0 / a)]).unwrap();
    let g = d.convolve_pw(&box_fn(1.0).unwrap()).unwrap();
    for x in uniform_grid(-0.4987, 2.0013, 250) {
        let expect = (box_fn(1.0).unwrap().eval(x - a) - box_fn(1.0).unwrap().eval(x)) / a;
        assert!(close(g.eval(x), expect, 1e-13));
    }

    let h = iterated_box(&[0.3, 0.2, 0.2]).unwrap();
    let diff = AtomicMeasure::new(vec![(0.0, 1.0), (1.0, -1.0)]).unwrap();
    for p in [0.3, 0.5, 0.8] {
        let lhs = diff.convolve_pw(&h).unwrap().lp_quasinorm(p, 1e-10).unwrap();
        let rhs = 2.0 * h.lp_quasinorm(p, 1e-10).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-9));
    }
}

#[test]
fn chain_derivative_equals_atoms_times_remainder() {
    let w = [0.8, 0.5, 0.3, 0.2];
    let phi = iterated_box(&w).unwrap();
    for n in 1..w.len() {
        let d = chain_difference_measure(&w[..n]).unwrap();
        let rest = iterated_box(&w[n..]).unwrap();
        let via_atoms = d.convolve_pw(&rest).unwrap();
        let direct = phi.derivative(n).unwrap();
        let gap = if direct.is_regular() {
            direct.regular.sub(&via_atoms).sup_norm()
        } else {
            0.0
        };
        assert!(gap < 1e-9 * via_atoms.sup_norm(), "n = {n}, gap {gap}");
    }
}

#[test]
fn grid_oracle_examples() {
    let b = box_fn(1.0).unwrap();
    let xs = uniform_grid(0.0, 2.0, 999);
    let h = 1e-4;
    for (x, v) in grid_oracle_convolve(&b, &b, h, &xs) {
        assert!(close(v, triangle().eval(x), 1e-3), "x = {x}");
    }
    let f = iterated_box(&[0.4, 0.3]).unwrap();
    let a = 0.25;
    let exact = f.convolve_box(a).unwrap();
    let lip = 1.0 / (0.4 * 0.3);
    let xs = uniform_grid(-0.1, 1.1, 500);
    for (x, v) in grid_oracle_convolve(&f, &box_fn(a).unwrap(), h, &xs) {
        assert!((v - exact.eval(x)).abs() < 5.0 * h * lip);
    }
    let g = box_fn(a).unwrap();
    let fg = grid_oracle_convolve(&f, &g, h, &xs);
    let gf = grid_oracle_convolve(&g, &f, h, &xs);
    for ((_, u), (_, v)) in fg.iter().zip(gf.iter()) {
        assert!((u - v).abs() < 5.0 * h * lip);
    }
}

#[test]
fn primitive_and_integral() {
    let f = iterated_box(&[0.5, 0.25]).unwrap();
    let (prim, tail) = f.primitive();
    assert!(close(tail, 1.0, 1e-15));
    assert!(close(prim.eval(0.375), f.integral_on(-1.0, 0.375), 1e-15));
    assert!(close(f.integral_on(0.1, 0.6), prim.eval(0.6) - prim.eval(0.1), 1e-15));
}

#[test]
fn json_round_trip() {
    let f = iterated_box(&[0.5, 0.25, 0.125]).unwrap();
    let s = serde_json::to_string(&f).unwrap();
    let g: PiecewisePoly = serde_json::from_str(&s).unwrap();
    assert_eq!(f, g);
    let bad = r#"{"breakpoints":[1.0,0.0],"pieces":[[1.0]]}"#;
    assert!(serde_json::from_str::<PiecewisePoly>(bad).is_err());
    let mu = AtomicMeasure::new(vec![(0.0, 1.0), (2.0, -0.5)]).unwrap();
    let back: AtomicMeasure = serde_json::from_str(&serde_json::to_string(&mu).unwrap()).unwrap();
    assert_eq!(mu, back);
}

fn widths_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 1..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn support_is_sum_of_widths(w in widths_strategy()) {
        let phi = iterated_box(&w).unwrap();
        let (lo, hi) = phi.support().unwrap();
        let total: f64 = w.iter().sum();
        prop_assert_eq!(lo, 0.0);
        prop_assert!((hi - total).abs() <= 1e-14 * total);
        prop_assert!((phi.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_is_nonnegative_and_bounded(w in widths_strategy()) {
        let phi = iterated_box(&w).unwrap();
        let (mn, mx) = phi.extrema();
        prop_assert!(mn >= -1e-12);
        let a1 = w.iter().cloned().fold(0.0, f64::max);
        prop_assert!(mx <= 1.0 / a1 * (1.0 + 1e-12));
    }

    #[test]
    fn p_triangle_inequality(w1 in widths_strategy(), w2 in widths_strategy(), p in 0.2f64..1.0) {
        let f = iterated_box(&w1).unwrap();
        let g = iterated_box(&w2).unwrap().translate(0.3).scale(-0.7);
        let lhs = f.add(&g).lp_quasinorm(p, 1e-10).unwrap();
        let rhs = f.lp_quasinorm(p, 1e-10).unwrap() + g.lp_quasinorm(p, 1e-10).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-8));
    }

    #[test]
    fn sup_norm_dominates_samples(w in widths_strategy()) {
        let phi = iterated_box(&w).unwrap();
        let s = phi.sup_norm();
        for (_, v) in phi.sample(400) {
            prop_assert!(v.abs() <= s * (1.0 + 1e-12));
        }
    }
}
