use rayon::prelude::*;

use super::PiecewisePoly;
use crate::numerics::CompensatedSum;

/// `n + 1` equally spaced points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Midpoint Riemann sum for `(f * g)(x) = ∫ f(x - t) g(t) dt` over the
/// support of `g` with step at most `h`, evaluated at each point of `xs`.
/// The grid is split at every breakpoint of the integrand, so no cell
/// straddles a jump. Test-only cross-check for the exact convolvers.
pub fn grid_oracle_convolve(f: &PiecewisePoly, g: &PiecewisePoly, h: f64, xs: &[f64]) -> Vec<(f64, f64)> {
    let Some((g0, g1)) = g.support() else {
        return xs.iter().map(|&x| (x, 0.0)).collect();
    };
    if f.is_zero() {
        return xs.iter().map(|&x| (x, 0.0)).collect();
    }
    xs.par_iter()
        .map(|&x| {
            let mut cuts: Vec<f64> = g
                .breakpoints()
                .iter()
                .copied()
                .chain(f.breakpoints().iter().map(|b| x - b))
                .filter(|&t| t > g0 && t < g1)
                .chain([g0, g1])
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut s = CompensatedSum::new();
            for w in cuts.windows(2) {
                let steps = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
                let dt = (w[1] - w[0]) / steps as f64;
                for i in 0..steps {
                    let t = w[0] + (i as f64 + 0.5) * dt;
                    s.add(f.eval(x - t) * g.eval(t) * dt);
                }
            }
            (x, s.value())
        })
        .collect()
}

/// The plain version: one uniform grid on the support of `g`, blind to
/// the breakpoints of `f`. Its error near a jump of size `J` is up to
/// `h·J·‖g‖∞`.
pub fn uniform_oracle_convolve(f: &PiecewisePoly, g: &PiecewisePoly, h: f64, xs: &[f64]) -> Vec<(f64, f64)> {
    let Some((g0, g1)) = g.support() else {
        return xs.iter().map(|&x| (x, 0.0)).collect();
    };
    let steps = ((g1 - g0) / h).ceil().max(1.0) as usize;
    let dt = (g1 - g0) / steps as f64;
    let nodes: Vec<(f64, f64)> = (0..steps)
        .map(|i| {
            let t = g0 + (i as f64 + 0.5) * dt;
            (t, g.eval(t) * dt)
        })
        .collect();
    xs.par_iter()
        .map(|&x| {
            let mut s = CompensatedSum::new();
            for &(t, w) in &nodes {
                s.add(f.eval(x - t) * w);
            }
            (x, s.value())
        })
        .collect()
}
