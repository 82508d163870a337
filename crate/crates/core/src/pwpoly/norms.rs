use rayon::prelude::*;

use super::PiecewisePoly;
use crate::error::{Error, Result};
use crate::numerics::{adaptive_gl, compensated_sum, CompensatedSum};
use crate::poly;

pub const DEFAULT_LP_TOL: f64 = 1e-10;
const MESH_DEPTH: u32 = 60;
const INNER_DEPTH: u32 = 30;

impl PiecewisePoly {
    /// `∫ |f|^p` for `0 < p ≤ 1`.
    pub fn lp_quasinorm(&self, p: f64, tol: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("p = {p} outside (0,1]")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        let parts: Vec<Result<f64>> = (0..self.pieces.len())
            .into_par_iter()
            .map(|i| piece_lp(&self.pieces[i], self.width(i), p, tol))
            .collect();
        let mut s = CompensatedSum::new();
        for r in parts {
            s.add(r?);
        }
        Ok(s.value())
    }
}

fn piece_lp(c: &[f64], w: f64, p: f64, tol: f64) -> Result<f64> {
    let scale = poly::abs_bound(c, w);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let zero_tol = 1e-13 * scale;
    // below this an integral is indistinguishable from cancellation noise
    let floor = 1e-3 * tol * w * scale.powf(p);
    let mut knots = vec![0.0];
    knots.extend(poly::real_roots(c, 0.0, w, zero_tol));
    knots.push(w);
    let mut parts = Vec::with_capacity(knots.len());
    for seg in knots.windows(2) {
        let (l, r) = (seg[0], seg[1]);
        if r <= l {
            continue;
        }
        if p == 1.0 {
            let anti = poly::antiderivative(c);
            parts.push((poly::eval(&anti, r) - poly::eval(&anti, l)).abs());
            continue;
        }
        let zl = poly::eval(c, l).abs() <= zero_tol;
        let zr = poly::eval(c, r).abs() <= zero_tol;
        let v = match (zl, zr) {
            (false, false) => smooth_lp(c, l, r, p, tol, floor * (r - l) / w)?,
            (true, false) => graded_lp(c, l, r, p, tol, floor, false)?,
            (false, true) => graded_lp(c, l, r, p, tol, floor, true)?,
            (true, true) => {
                let m = 0.5 * (l + r);
                graded_lp(c, l, m, p, tol, floor, false)? + graded_lp(c, m, r, p, tol, floor, true)?
            }
        };
        parts.push(v);
    }
    Ok(compensated_sum(parts))
}

fn smooth_lp(c: &[f64], l: f64, r: f64, p: f64, tol: f64, floor: f64) -> Result<f64> {
    let f = |t: f64| poly::eval(c, t).abs().powf(p);
    let out = adaptive_gl(&f, l, r, tol, floor, INNER_DEPTH);
    if !out.converged {
        return Err(Error::QuadratureNonConvergence {
            value: out.value,
            error: out.error_estimate,
        });
    }
    Ok(out.value)
}

/// Geometric mesh (ratio 1/2) toward a zero of `c` at `l` (or at `r` when
/// `toward_right`). The untouched remainder is bounded by its length
/// times the coefficient bound of `|c|^p` there.
fn graded_lp(
    c: &[f64],
    l: f64,
    r: f64,
    p: f64,
    tol: f64,
    floor: f64,
    toward_right: bool,
) -> Result<f64> {
    let local: Vec<f64> = if toward_right {
        // t ↦ c(r - t)
        let shifted = poly::taylor_shift(c, r);
        shifted
            .iter()
            .enumerate()
            .map(|(j, &x)| if j % 2 == 1 { -x } else { x })
            .collect()
    } else {
        poly::taylor_shift(c, l)
    };
    let len = r - l;
    let mut total = CompensatedSum::new();
    let mut h = len;
    for _ in 0..MESH_DEPTH {
        let lo = 0.5 * h;
        total.add(smooth_lp(&local, lo, h, p, tol, floor * (h - lo) / len)?);
        h = lo;
        let rem = h * poly::abs_bound(&local, h).powf(p);
        if rem <= tol * total.value() || rem <= floor || h <= f64::MIN_POSITIVE {
            return Ok(total.value());
        }
    }
    let rem = h * poly::abs_bound(&local, h).powf(p);
    Err(Error::QuadratureNonConvergence {
        value: total.value(),
        error: rem,
    })
}
