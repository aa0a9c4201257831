//! Piecewise polynomials on dyadic cells of the time domain, stored in the
//! per-cell orthonormal Legendre basis. These are the building blocks of the
//! linear and product nets and of the Holder approximation-error routine.
//! All inner products between two such functions are computed exactly.

use serde::{Deserialize, Serialize};

use crate::domain::TimeDomain;
use crate::error::{IpsError, Result};

pub const MAX_POLY_DEGREE: usize = 3;

/// Piecewise polynomial of degree at most `degree` on `2^depth` equal cells
/// of a time domain, with coefficients in the orthonormal Legendre basis of
/// each cell: the basis function of degree `j` on a cell of width `w` is
/// `sqrt((2j+1)/w) * P_j(u)` with `u` the cell coordinate in `[-1, 1]`.
///
/// The coefficient vector is therefore the function's coordinates in an
/// orthonormal basis of `L^2(T, Lebesgue)`: norms and inner products of
/// same-shape functions are plain Euclidean operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicPoly {
    cells: usize,
    degree: usize,
    /// `cells * (degree + 1)` coefficients, cell-major.
    coeffs: Vec<f64>,
}

fn legendre_u_monomials(j: usize) -> [f64; 4] {
    match j {
        0 => [1.0, 0.0, 0.0, 0.0],
        1 => [0.0, 1.0, 0.0, 0.0],
        2 => [-0.5, 0.0, 1.5, 0.0],
        3 => [0.0, -1.5, 0.0, 2.5],
        _ => unreachable!("degree capped at {MAX_POLY_DEGREE}"),
    }
}

impl DyadicPoly {
    pub fn new(depth: u32, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if degree > MAX_POLY_DEGREE {
            return Err(IpsError::InvalidParameter(format!(
                "polynomial degree {degree} exceeds {MAX_POLY_DEGREE}"
            )));
        }
        let cells = 1usize << depth;
        if coeffs.len() != cells * (degree + 1) {
            return Err(IpsError::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                cells * (degree + 1),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(IpsError::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(Self { cells, degree, coeffs })
    }

    pub fn zero(depth: u32, degree: usize) -> Result<Self> {
        let cells = 1usize << depth;
        Self::new(depth, degree, vec![0.0; cells * (degree + 1)])
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn cell_width(&self, domain: &TimeDomain) -> f64 {
        domain.length() / self.cells as f64
    }

    fn cell_of(&self, t: f64, domain: &TimeDomain) -> usize {
        let rel = (t - domain.t_min) / domain.length();
        ((rel * self.cells as f64) as usize).min(self.cells - 1)
    }

    pub fn eval(&self, t: f64, domain: &TimeDomain) -> f64 {
        let cell = self.cell_of(t, domain);
        let w = self.cell_width(domain);
        let mid = domain.t_min + (cell as f64 + 0.5) * w;
        let u = (2.0 * (t - mid) / w).clamp(-1.0, 1.0);
        let mut acc = 0.0;
        for j in 0..=self.degree {
            let c = self.coeffs[cell * (self.degree + 1) + j];
            if c != 0.0 {
                let m = legendre_u_monomials(j);
                let p = m[0] + u * (m[1] + u * (m[2] + u * m[3]));
                acc += c * ((2 * j + 1) as f64 / w).sqrt() * p;
            }
        }
        acc
    }

    /// Monomial coefficients of this function restricted to the interval
    /// `[lo, hi]` (which must lie inside a single cell), in the local
    /// coordinate `v = 2(t - mid(lo,hi)) / (hi - lo)`.
    fn monomials_on(&self, lo: f64, hi: f64, domain: &TimeDomain) -> [f64; 4] {
        let cell = self.cell_of(0.5 * (lo + hi), domain);
        let w = self.cell_width(domain);
        let mid = domain.t_min + (cell as f64 + 0.5) * w;
        // u = alpha + beta * v on [lo, hi].
        let piece_mid = 0.5 * (lo + hi);
        let alpha = 2.0 * (piece_mid - mid) / w;
        let beta = (hi - lo) / w;
        let mut out = [0.0; 4];
        for j in 0..=self.degree {
            let c = self.coeffs[cell * (self.degree + 1) + j] * ((2 * j + 1) as f64 / w).sqrt();
            if c == 0.0 {
                continue;
            }
            let m = legendre_u_monomials(j);
            // Substitute u = alpha + beta v into sum m[k] u^k.
            let mut powers = [[0.0; 4]; 4];
            powers[0][0] = 1.0;
            for k in 1..4 {
                // (alpha + beta v)^k from (alpha + beta v)^{k-1}
                for d in 0..k {
                    powers[k][d] += powers[k - 1][d] * alpha;
                    powers[k][d + 1] += powers[k - 1][d] * beta;
                }
            }
            for k in 0..4 {
                if m[k] != 0.0 {
                    for d in 0..4 {
                        out[d] += c * m[k] * powers[k][d];
                    }
                }
            }
        }
        out
    }

    /// Exact `L^2(T)` inner product with another dyadic polynomial on the
    /// same domain (depths may differ).
    pub fn inner(&self, other: &Self, domain: &TimeDomain) -> f64 {
        if self.cells == other.cells && self.degree == other.degree {
            return self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum();
        }
        let fine = self.cells.max(other.cells);
        let w = domain.length() / fine as f64;
        let mut acc = 0.0;
        for k in 0..fine {
            let lo = domain.t_min + k as f64 * w;
            let hi = lo + w;
            let a = self.monomials_on(lo, hi, domain);
            let b = other.monomials_on(lo, hi, domain);
            // Product polynomial (degree <= 6) integrated over v in [-1, 1],
            // then scaled by dt/dv = w/2. Odd powers vanish.
            let mut prod = [0.0; 7];
            for i in 0..4 {
                for j in 0..4 {
                    prod[i + j] += a[i] * b[j];
                }
            }
            let mut integral = 0.0;
            let mut d = 0;
            while d <= 6 {
                integral += 2.0 * prod[d] / (d as f64 + 1.0);
                d += 2;
            }
            acc += integral * w / 2.0;
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn dist_sq(&self, other: &Self, domain: &TimeDomain) -> f64 {
        if self.cells == other.cells && self.degree == other.degree {
            return self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
        (self.norm_sq() + other.norm_sq() - 2.0 * self.inner(other, domain)).max(0.0)
    }

    /// `integral f dt` over the domain.
    pub fn integral(&self, domain: &TimeDomain) -> f64 {
        let w = self.cell_width(domain);
        (0..self.cells)
            .map(|cell| self.coeffs[cell * (self.degree + 1)] * w.sqrt())
            .sum()
    }

    /// Exact supremum of `|f|` over the domain.
    pub fn sup_abs(&self, domain: &TimeDomain) -> f64 {
        let w = self.cell_width(domain);
        let mut best: f64 = 0.0;
        for cell in 0..self.cells {
            let lo = domain.t_min + cell as f64 * w;
            let m = self.monomials_on(lo, lo + w, domain);
            let eval = |v: f64| (m[0] + v * (m[1] + v * (m[2] + v * m[3]))).abs();
            best = best.max(eval(-1.0)).max(eval(1.0));
            // Critical points: m1 + 2 m2 v + 3 m3 v^2 = 0.
            let (a, b, c) = (3.0 * m[3], 2.0 * m[2], m[1]);
            if a.abs() < 1e-300 {
                if b.abs() > 1e-300 {
                    let v = -c / b;
                    if (-1.0..=1.0).contains(&v) {
                        best = best.max(eval(v));
                    }
                }
            } else {
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    for v in [(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)] {
                        if (-1.0..=1.0).contains(&v) {
                            best = best.max(eval(v));
                        }
                    }
                }
            }
        }
        best
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= factor;
        }
        out
    }
}
