//! L2 projection error onto dyadic piecewise polynomials on the unit cube,
//! for smoothness classes in one or two variables.

use crate::error::{IpsError, Result};
use crate::poly::{DyadicPoly, MAX_POLY_DEGREE};

/// Target function on [0,1] or [0,1]^2.
pub enum TargetFn<'a> {
    One(&'a dyn Fn(f64) -> f64),
    Two(&'a dyn Fn(f64, f64) -> f64),
}

const MAX_DEPTH_1D: u32 = 12;
const MAX_DEPTH_2D: u32 = 6;
const PANELS_PER_CELL: usize = 8;
const GAUSS_ORDER: usize = 12;

/// L2 distance from `f` to its projection on piecewise polynomials of the
/// given degree over the dyadic partition at the given depth.
pub fn holder_approx_error(f: &TargetFn, depth: u32, degree: usize) -> Result<f64> {
    check_degree(degree)?;
    match f {
        TargetFn::One(g) => {
            check_depth(depth, MAX_DEPTH_1D)?;
            let proj = project_unit_interval(*g, depth, degree)?;
            Ok(residual_1d(*g, &proj, depth, degree))
        }
        TargetFn::Two(g) => {
            check_depth(depth, MAX_DEPTH_2D)?;
            Ok(error_2d(*g, depth, degree))
        }
    }
}

/// L2-orthogonal projection of `f` on dyadic piecewise polynomials of the
/// unit interval (the polynomial's own basis convention).
pub fn project_unit_interval(
    f: &dyn Fn(f64) -> f64,
    depth: u32,
    degree: usize,
) -> Result<DyadicPoly> {
    check_degree(degree)?;
    check_depth(depth, MAX_DEPTH_1D)?;
    let cells = 1usize << depth;
    let w = 1.0 / cells as f64;
    let (gx, gw) = gauss_rule(GAUSS_ORDER);
    let mut coeffs = vec![0.0; cells * (degree + 1)];
    for cell in 0..cells {
        let a = cell as f64 * w;
        let mut c = [0.0; MAX_POLY_DEGREE + 1];
        integrate_cell(&gx, &gw, a, w, |t, weight| {
            let fv = f(t);
            let u = 2.0 * (t - a) / w - 1.0;
            for (j, cj) in c.iter_mut().take(degree + 1).enumerate() {
                *cj += weight * fv * basis(j, u, w);
            }
        });
        coeffs[cell * (degree + 1)..(cell + 1) * (degree + 1)].copy_from_slice(&c[..=degree]);
    }
    DyadicPoly::new(depth, degree, coeffs)
}

fn residual_1d(f: &dyn Fn(f64) -> f64, proj: &DyadicPoly, depth: u32, degree: usize) -> f64 {
    let cells = 1usize << depth;
    let w = 1.0 / cells as f64;
    let (gx, gw) = gauss_rule(GAUSS_ORDER);
    let coeffs = proj.coeffs();
    let mut err_sq = 0.0;
    for cell in 0..cells {
        let a = cell as f64 * w;
        let local = &coeffs[cell * (degree + 1)..(cell + 1) * (degree + 1)];
        integrate_cell(&gx, &gw, a, w, |t, weight| {
            let u = 2.0 * (t - a) / w - 1.0;
            let mut p = 0.0;
            for (j, cj) in local.iter().enumerate() {
                p += cj * basis(j, u, w);
            }
            let r = f(t) - p;
            err_sq += weight * r * r;
        });
    }
    err_sq.max(0.0).sqrt()
}

fn error_2d(f: &dyn Fn(f64, f64) -> f64, depth: u32, degree: usize) -> f64 {
    let cells = 1usize << depth;
    let w = 1.0 / cells as f64;
    let (gx, gw) = gauss_rule(GAUSS_ORDER);
    let dim = degree + 1;
    let mut err_sq = 0.0;
    for cx in 0..cells {
        let ax = cx as f64 * w;
        for cy in 0..cells {
            let ay = cy as f64 * w;
            let mut c = vec![0.0; dim * dim];
            integrate_cell_2d(&gx, &gw, ax, ay, w, |x, y, weight| {
                let fv = f(x, y);
                let ux = 2.0 * (x - ax) / w - 1.0;
                let uy = 2.0 * (y - ay) / w - 1.0;
                for i in 0..dim {
                    for j in 0..dim {
                        c[i * dim + j] += weight * fv * basis(i, ux, w) * basis(j, uy, w);
                    }
                }
            });
            integrate_cell_2d(&gx, &gw, ax, ay, w, |x, y, weight| {
                let ux = 2.0 * (x - ax) / w - 1.0;
                let uy = 2.0 * (y - ay) / w - 1.0;
                let mut p = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        p += c[i * dim + j] * basis(i, ux, w) * basis(j, uy, w);
                    }
                }
                let r = f(x, y) - p;
                err_sq += weight * r * r;
            });
        }
    }
    err_sq.max(0.0).sqrt()
}

/// Orthonormal basis member on a cell of width `w`, in the local coordinate
/// `u` on [-1, 1] (matches the dyadic polynomial's evaluation convention).
fn basis(j: usize, u: f64, w: f64) -> f64 {
    ((2 * j + 1) as f64 / w).sqrt() * legendre(j, u)
}

fn legendre(j: usize, u: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => u,
        2 => 1.5 * u * u - 0.5,
        3 => u * (2.5 * u * u - 1.5),
        _ => unreachable!("degree capped at {MAX_POLY_DEGREE}"),
    }
}

fn integrate_cell(gx: &[f64], gw: &[f64], a: f64, w: f64, mut visit: impl FnMut(f64, f64)) {
    let pw = w / PANELS_PER_CELL as f64;
    for p in 0..PANELS_PER_CELL {
        let pa = a + p as f64 * pw;
        for (&x, &gwi) in gx.iter().zip(gw) {
            visit(pa + 0.5 * (x + 1.0) * pw, gwi * 0.5 * pw);
        }
    }
}

fn integrate_cell_2d(
    gx: &[f64],
    gw: &[f64],
    ax: f64,
    ay: f64,
    w: f64,
    mut visit: impl FnMut(f64, f64, f64),
) {
    let panels = 4;
    let pw = w / panels as f64;
    for px in 0..panels {
        let pax = ax + px as f64 * pw;
        for py in 0..panels {
            let pay = ay + py as f64 * pw;
            for (&x, &gwx) in gx.iter().zip(gw) {
                let tx = pax + 0.5 * (x + 1.0) * pw;
                for (&y, &gwy) in gx.iter().zip(gw) {
                    let ty = pay + 0.5 * (y + 1.0) * pw;
                    visit(tx, ty, gwx * gwy * 0.25 * pw * pw);
                }
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_n(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_n(n, x);
        let wgt = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = wgt;
        weights[n - 1 - i] = wgt;
    }
    (nodes, weights)
}

fn legendre_n(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_POLY_DEGREE {
        return Err(IpsError::InvalidParameter(format!(
            "projection degree {degree} exceeds {MAX_POLY_DEGREE}"
        )));
    }
    Ok(())
}

fn check_depth(depth: u32, cap: u32) -> Result<()> {
    if depth > cap {
        return Err(IpsError::InvalidParameter(format!(
            "projection depth {depth} exceeds cap {cap}"
        )));
    }
    Ok(())
}
