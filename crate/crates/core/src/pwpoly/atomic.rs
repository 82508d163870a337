use serde::{Deserialize, Serialize};

use super::{merge_breaks, scale_of, PiecewisePoly, BREAK_TOL};
use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, CompensatedSum};
use crate::poly;

/// Masses below this are dropped after coalescing.
pub const MASS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Finite sum of weighted Dirac masses with strictly increasing locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtomic")]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawAtomic {
    atoms: Vec<Atom>,
}

impl TryFrom<RawAtomic> for AtomicMeasure {
    type Error = Error;
    fn try_from(raw: RawAtomic) -> Result<Self> {
        AtomicMeasure::new(raw.atoms.into_iter().map(|a| (a.location, a.mass)).collect())
    }
}

impl AtomicMeasure {
    /// Sorts, coalesces equal locations and drops negligible masses.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|(x, m)| !x.is_finite() || !m.is_finite()) {
            return Err(Error::InvalidParameter("non-finite atom".into()));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<(f64, CompensatedSum)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match out.last_mut() {
                Some((y, s)) if *y == x => s.add(m),
                _ => {
                    let mut s = CompensatedSum::new();
                    s.add(m);
                    out.push((x, s));
                }
            }
        }
        Ok(Self {
            atoms: out
                .into_iter()
                .map(|(x, s)| Atom {
                    location: x,
                    mass: s.value(),
                })
                .filter(|a| a.mass.abs() >= MASS_FLOOR)
                .collect(),
        })
    }

    pub(crate) fn from_sorted_unchecked(atoms: Vec<(f64, f64)>) -> Self {
        Self {
            atoms: atoms
                .into_iter()
                .filter(|(_, m)| m.abs() >= MASS_FLOOR)
                .map(|(location, mass)| Atom { location, mass })
                .collect(),
        }
    }

    pub fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn dirac(x: f64) -> Self {
        Self::from_sorted_unchecked(vec![(x, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.mass))
    }

    /// `Σ |b_j|^p`.
    pub fn lp(&self, p: f64) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.mass.abs().powf(p)))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_sorted_unchecked(self.atoms.iter().map(|a| (a.location, a.mass * c)).collect())
    }

    /// Atomic-by-atomic convolution; coalesces coinciding locations.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        for a in &self.atoms {
            for b in &other.atoms {
                atoms.push((a.location + b.location, a.mass * b.mass));
            }
        }
        Self::new(atoms).expect("finite atoms stay finite")
    }

    /// `Σ_j b_j f(· - x_j)`, exact.
    pub fn convolve_pw(&self, f: &PiecewisePoly) -> Result<PiecewisePoly> {
        if self.is_empty() || f.is_zero() {
            return Ok(PiecewisePoly::zero());
        }
        let (s0, s1) = f.support().unwrap();
        let lo = self.atoms[0].location + s0;
        let hi = self.atoms.last().unwrap().location + s1;
        let tol = BREAK_TOL * scale_of(&[lo, hi]);
        let mut shifted: Vec<f64> = Vec::with_capacity(self.len() * f.breakpoints.len());
        for a in &self.atoms {
            shifted.extend(f.breakpoints.iter().map(|x| x + a.location));
        }
        let breaks = merge_breaks(&shifted, &[], tol);
        let deg = f.degree();
        let locs: Vec<f64> = self.atoms.iter().map(|a| a.location).collect();
        let pieces: Vec<Vec<f64>> = breaks
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                // atoms with x_j ∈ [m - s1, m - s0] can reach m
                let first = locs.partition_point(|&x| x < m - s1);
                let last = locs.partition_point(|&x| x <= m - s0);
                let mut acc = vec![0.0; deg + 1];
                for a in &self.atoms[first..last] {
                    if let Some(i) = f.locate(m - a.location) {
                        let sh = poly::taylor_shift(&f.pieces[i], w[0] - a.location - f.breakpoints[i]);
                        poly::add_into(&mut acc, &sh, a.mass);
                    }
                }
                acc
            })
            .collect();
        Ok(PiecewisePoly {
            breakpoints: breaks,
            pieces,
        })
    }
}

/// `Π_{l≤n} (δ_0 - δ_{a_l})/a_l`, the measure with
/// `Φ_{1,k}^{(n)} = D_n * Φ_{n+1,k}`.
pub fn chain_difference_measure(widths: &[f64]) -> Result<AtomicMeasure> {
    let mut mu = AtomicMeasure::dirac(0.0);
    for &a in widths {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonPositiveWidth(a));
        }
        let step = AtomicMeasure::from_sorted_unchecked(vec![(0.0, 1.0 / a), (a, -1.0 / a)]);
        mu = mu.convolve(&step);
    }
    Ok(mu)
}

/// A piecewise polynomial plus a finite atomic part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributional {
    pub regular: PiecewisePoly,
    pub singular: AtomicMeasure,
}

impl Distributional {
    pub fn is_regular(&self) -> bool {
        self.singular.is_empty()
    }
}
