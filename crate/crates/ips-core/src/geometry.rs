//! Hellinger-type geometry on intensities and the joint `L2` metric on
//! square-root functions.
//!
//! The reference measure is `M = mu (x) nu_n` with `mu` Lebesgue (or a point
//! mass) on the time domain and `nu_n` the empirical covariate measure, so
//!
//! * `d2(f, g)^2 = n^{-1} sum_i integral (f - g)^2 dmu`,
//! * `H^2(s, s') = (2n)^{-1} sum_i integral (sqrt(s) - sqrt(s'))^2 dmu`,
//!
//! and `2 H^2(s, s') = d2(sqrt(s), sqrt(s'))^2`. Parametric pairs are
//! resolved in closed form; everything else falls back to quadrature on the
//! context's rule.

use crate::domain::{CovariateSet, Partition, TimeDomain};
use crate::error::{IpsError, Result};
use crate::quadrature::QuadratureRule;
use crate::surface::{CovCurve, EvalCtx, IntensitySurface, SqrtFunction, TimeCurve, TimeLaw};

/// Squared joint `L2` distance between two square-root functions.
pub fn l2_dist_sq_joint(f: &SqrtFunction, g: &SqrtFunction, ctx: &EvalCtx) -> Result<f64> {
    if ctx.domain.point_mass {
        return Ok(generic_dist_sq(f, g, ctx));
    }
    if let (Some((pa, la)), Some((pb, lb))) = (as_piecewise(f, ctx.n()), as_piecewise(g, ctx.n()))
    {
        return piecewise_dist_sq(&pa, &la, &pb, &lb, ctx);
    }
    if let (Some((l1, t1)), Some((l2, t2))) = (as_exp_modulated(f), as_exp_modulated(g)) {
        if let Some(v) = exp_modulated_dist_sq(l1, &t1, l2, &t2, ctx)? {
            return Ok(v);
        }
    }
    if let (
        SqrtFunction::Product { kappa: k1, time: u1, cov: v1 },
        SqrtFunction::Product { kappa: k2, time: u2, cov: v2 },
    ) = (f, g)
    {
        let tuu = time_inner(u1, u1, ctx.domain, ctx.quad)?;
        let tvv = time_inner(u2, u2, ctx.domain, ctx.quad)?;
        let tuv = time_inner(u1, u2, ctx.domain, ctx.quad)?;
        let cuu = cov_inner(v1, v1, ctx.covariates);
        let cvv = cov_inner(v2, v2, ctx.covariates);
        let cuv = cov_inner(v1, v2, ctx.covariates);
        let d = k1 * k1 * tuu * cuu + k2 * k2 * tvv * cvv - 2.0 * k1 * k2 * tuv * cuv;
        return Ok(d.max(0.0));
    }
    Ok(generic_dist_sq(f, g, ctx))
}

/// Joint `L2` distance between two square-root functions.
pub fn l2_dist_joint(f: &SqrtFunction, g: &SqrtFunction, ctx: &EvalCtx) -> Result<f64> {
    Ok(l2_dist_sq_joint(f, g, ctx)?.sqrt())
}

/// Squared Hellinger distance between two intensities.
pub fn hellinger_sq(s: &IntensitySurface, sp: &IntensitySurface, ctx: &EvalCtx) -> Result<f64> {
    if !ctx.domain.point_mass {
        if let (Some(a), Some(b)) = (nonneg_sqrt(s), nonneg_sqrt(sp)) {
            return Ok(0.5 * l2_dist_sq_joint(&a, &b, ctx)?);
        }
    }
    let per_i = |i: usize| {
        ctx.quad.integrate(|t| {
            let d = s.sqrt_at(t, i, ctx) - sp.sqrt_at(t, i, ctx);
            d * d
        })
    };
    let mean = if intensity_covariate_free(s) && intensity_covariate_free(sp) {
        per_i(0)
    } else {
        let n = ctx.n();
        (0..n).map(per_i).sum::<f64>() / n as f64
    };
    Ok(0.5 * mean)
}

/// Hellinger distance between two intensities.
pub fn hellinger(s: &IntensitySurface, sp: &IntensitySurface, ctx: &EvalCtx) -> Result<f64> {
    Ok(hellinger_sq(s, sp, ctx)?.sqrt())
}

/// `integral u v dmu` over the time domain.
pub fn time_inner(
    u: &TimeCurve,
    v: &TimeCurve,
    domain: &TimeDomain,
    quad: &QuadratureRule,
) -> Result<f64> {
    use TimeCurve::*;
    let (a, b) = (domain.t_min, domain.t_max);
    match (u, v) {
        (Constant(x), Constant(y)) => Ok(x * y * domain.length()),
        (Constant(x), Law(l)) | (Law(l), Constant(x)) => Ok(x * l.integral(a, b)?),
        (Law(l1), Law(l2)) => match l1.cross_integral(l2, a, b) {
            Some(c) => Ok(c),
            None => Ok(quad.integrate(|t| l1.eval(t) * l2.eval(t))),
        },
        (Poly(p), Poly(q)) => Ok(p.inner(q, domain)),
        (Constant(x), Poly(p)) | (Poly(p), Constant(x)) => Ok(x * p.integral(domain)),
        _ => Ok(quad.integrate(|t| u.eval(t, domain) * v.eval(t, domain))),
    }
}

/// `n^{-1} sum_i h(x_i) g(x_i)` under the empirical covariate measure.
pub fn cov_inner(h: &CovCurve, g: &CovCurve, covariates: &CovariateSet) -> f64 {
    let n = covariates.n();
    (0..n)
        .map(|i| h.eval(i, covariates) * g.eval(i, covariates))
        .sum::<f64>()
        / n as f64
}

/// `integral (u - v)^2 dmu` between time curves.
pub fn l2_dist_time_sq(
    u: &TimeCurve,
    v: &TimeCurve,
    domain: &TimeDomain,
    quad: &QuadratureRule,
) -> Result<f64> {
    if let (TimeCurve::Poly(p), TimeCurve::Poly(q)) = (u, v) {
        return Ok(p.dist_sq(q, domain));
    }
    if let (TimeCurve::Law(l1), TimeCurve::Law(l2)) = (u, v) {
        if l1 == l2 {
            return Ok(0.0);
        }
        if let Some(c) = l1.cross_integral(l2, domain.t_min, domain.t_max) {
            let d = l1.square_integral(domain.t_min, domain.t_max)?
                + l2.square_integral(domain.t_min, domain.t_max)?
                - 2.0 * c;
            return Ok(d.max(0.0));
        }
    }
    Ok(quad.integrate(|t| {
        let d = u.eval(t, domain) - v.eval(t, domain);
        d * d
    }))
}

/// `n^{-1} sum_i (h - g)^2(x_i)` between covariate curves.
pub fn l2_dist_cov_sq(h: &CovCurve, g: &CovCurve, covariates: &CovariateSet) -> f64 {
    let n = covariates.n();
    (0..n)
        .map(|i| {
            let d = h.eval(i, covariates) - g.eval(i, covariates);
            d * d
        })
        .sum::<f64>()
        / n as f64
}

/// Squared joint distance between `kappa u v` and `kappa' u' v'` for
/// unit-norm factors, from the factor distances alone.
pub fn product_l2_dist_sq(kappa: f64, kappa_p: f64, dt_sq: f64, dx_sq: f64) -> f64 {
    let dk = kappa - kappa_p;
    dk * dk + kappa * kappa_p * (dt_sq + dx_sq - 0.5 * dt_sq * dx_sq)
}

/// Rescale a time curve to unit `L2(mu)` norm.
pub fn normalize_time(
    curve: &TimeCurve,
    domain: &TimeDomain,
    quad: &QuadratureRule,
) -> Result<TimeCurve> {
    let nsq = curve.norm_sq(domain, quad)?;
    if nsq <= 0.0 || !nsq.is_finite() {
        return Err(IpsError::ZeroNorm);
    }
    Ok(curve.scaled(1.0 / nsq.sqrt()))
}

/// Rescale a covariate curve to unit `L2(nu_n)` norm.
pub fn normalize_cov(curve: &CovCurve, covariates: &CovariateSet) -> Result<CovCurve> {
    let nsq = cov_inner(curve, curve, covariates);
    if nsq <= 0.0 || !nsq.is_finite() {
        return Err(IpsError::ZeroNorm);
    }
    Ok(curve.scaled(1.0 / nsq.sqrt()))
}

/// Whether a candidate's value at `(t, x_i)` is independent of `i`.
pub fn covariate_free(f: &SqrtFunction) -> bool {
    match f {
        SqrtFunction::Constant { .. } | SqrtFunction::TimeLaw(_) => true,
        SqrtFunction::ProductExp { theta, .. } => theta.iter().all(|v| *v == 0.0),
        SqrtFunction::PiecewiseLaw { partition, .. } => partition.num_segments() == 1,
        SqrtFunction::Grid { .. } => false,
        SqrtFunction::Product { cov, .. } => matches!(cov, CovCurve::Constant(_)),
    }
}

/// Whether an intensity's value at `(t, x_i)` is independent of `i`.
pub fn intensity_covariate_free(s: &IntensitySurface) -> bool {
    match s {
        IntensitySurface::Constant { .. }
        | IntensitySurface::PowerLaw { .. }
        | IntensitySurface::ExpDecay { .. } => true,
        IntensitySurface::ProductExp { theta, .. } => theta.iter().all(|v| *v == 0.0),
        IntensitySurface::PiecewiseParam { partition, .. } => partition.num_segments() == 1,
        IntensitySurface::Grid { .. } => false,
        IntensitySurface::Product { cov, .. } => matches!(cov, CovCurve::Constant(_)),
        IntensitySurface::SquareOf(g) => covariate_free(g),
    }
}

/// The intensity's non-negative square root as a candidate function, when it
/// stays inside the representable families.
fn nonneg_sqrt(s: &IntensitySurface) -> Option<SqrtFunction> {
    match s {
        IntensitySurface::Constant { level } => {
            Some(SqrtFunction::Constant { level: level.sqrt() })
        }
        IntensitySurface::PowerLaw { scale, exponent } => Some(SqrtFunction::TimeLaw(
            TimeLaw::Power { scale: scale.sqrt(), exponent: exponent / 2.0 },
        )),
        IntensitySurface::ExpDecay { scale, rate, half_power: 0 } => Some(
            SqrtFunction::TimeLaw(TimeLaw::ExpDecay {
                scale: scale.sqrt(),
                rate: rate / 2.0,
                half_power: 0,
            }),
        ),
        IntensitySurface::ExpDecay { .. } => None,
        IntensitySurface::ProductExp { law, theta } => {
            let half_theta: Vec<f64> = theta.iter().map(|v| v / 2.0).collect();
            match *law {
                TimeLaw::Power { scale, exponent } => Some(SqrtFunction::ProductExp {
                    law: TimeLaw::Power { scale: scale.sqrt(), exponent: exponent / 2.0 },
                    theta: half_theta,
                }),
                TimeLaw::ExpDecay { scale, rate, half_power: 0 } => {
                    Some(SqrtFunction::ProductExp {
                        law: TimeLaw::ExpDecay {
                            scale: scale.sqrt(),
                            rate: rate / 2.0,
                            half_power: 0,
                        },
                        theta: half_theta,
                    })
                }
                TimeLaw::ExpDecay { .. } => None,
            }
        }
        IntensitySurface::PiecewiseParam { partition, sqrt_laws } => {
            Some(SqrtFunction::PiecewiseLaw {
                partition: partition.clone(),
                laws: sqrt_laws.iter().map(abs_law).collect(),
            })
        }
        IntensitySurface::Grid { rows } => Some(SqrtFunction::Grid {
            rows: rows
                .iter()
                .map(|r| r.iter().map(|v| v.sqrt()).collect())
                .collect(),
        }),
        IntensitySurface::Product { .. } => None,
        IntensitySurface::SquareOf(g) => abs_canonical(g),
    }
}

fn abs_law(law: &TimeLaw) -> TimeLaw {
    law.with_scale(law.scale().abs())
}

/// `|g|` as a representable function; both law families have constant sign on
/// the domain, so flipping the scale is exact.
fn abs_canonical(g: &SqrtFunction) -> Option<SqrtFunction> {
    match g {
        SqrtFunction::Constant { level } => Some(SqrtFunction::Constant { level: level.abs() }),
        SqrtFunction::TimeLaw(law) => Some(SqrtFunction::TimeLaw(abs_law(law))),
        SqrtFunction::ProductExp { law, theta } => Some(SqrtFunction::ProductExp {
            law: abs_law(law),
            theta: theta.clone(),
        }),
        SqrtFunction::PiecewiseLaw { partition, laws } => Some(SqrtFunction::PiecewiseLaw {
            partition: partition.clone(),
            laws: laws.iter().map(abs_law).collect(),
        }),
        SqrtFunction::Grid { rows } => Some(SqrtFunction::Grid {
            rows: rows
                .iter()
                .map(|r| r.iter().map(|v| v.abs()).collect())
                .collect(),
        }),
        SqrtFunction::Product { .. } => None,
    }
}

/// Per-segment law representation over an index partition, when available.
fn as_piecewise(f: &SqrtFunction, n: usize) -> Option<(Partition, Vec<TimeLaw>)> {
    match f {
        SqrtFunction::Constant { level } => Some((
            Partition::whole(n),
            vec![TimeLaw::Power { scale: *level, exponent: 0.0 }],
        )),
        SqrtFunction::TimeLaw(law) => Some((Partition::whole(n), vec![law.clone()])),
        SqrtFunction::PiecewiseLaw { partition, laws } if partition.n() == n => {
            Some((partition.clone(), laws.clone()))
        }
        _ => None,
    }
}

fn as_exp_modulated(f: &SqrtFunction) -> Option<(&TimeLaw, Vec<f64>)> {
    match f {
        SqrtFunction::TimeLaw(law) => Some((law, Vec::new())),
        SqrtFunction::ProductExp { law, theta } => Some((law, theta.clone())),
        _ => None,
    }
}

fn piecewise_dist_sq(
    pa: &Partition,
    la: &[TimeLaw],
    pb: &Partition,
    lb: &[TimeLaw],
    ctx: &EvalCtx,
) -> Result<f64> {
    let n = pa.n();
    debug_assert_eq!(pb.n(), n);
    let mut acc = 0.0;
    let (mut pos, mut ia, mut ib) = (0usize, 0usize, 0usize);
    while pos < n {
        let end_a = pa.segment(ia).end;
        let end_b = pb.segment(ib).end;
        let end = end_a.min(end_b);
        acc += (end - pos) as f64 * law_pair_dist_sq(&la[ia], &lb[ib], ctx)?;
        pos = end;
        if pos == end_a {
            ia += 1;
        }
        if pos == end_b {
            ib += 1;
        }
    }
    Ok(acc / n as f64)
}

/// `integral (u - v)^2 dmu` between two time laws on the context domain.
pub fn law_pair_dist_sq(u: &TimeLaw, v: &TimeLaw, ctx: &EvalCtx) -> Result<f64> {
    if u == v {
        return Ok(0.0);
    }
    let (a, b) = (ctx.domain.t_min, ctx.domain.t_max);
    match u.cross_integral(v, a, b) {
        Some(c) => Ok((u.square_integral(a, b)? + v.square_integral(a, b)? - 2.0 * c).max(0.0)),
        None => Ok(ctx.quad.integrate(|t| {
            let d = u.eval(t) - v.eval(t);
            d * d
        })),
    }
}

fn exp_modulated_dist_sq(
    l1: &TimeLaw,
    t1: &[f64],
    l2: &TimeLaw,
    t2: &[f64],
    ctx: &EvalCtx,
) -> Result<Option<f64>> {
    let (a, b) = (ctx.domain.t_min, ctx.domain.t_max);
    let cross = match l1.cross_integral(l2, a, b) {
        Some(c) => c,
        None => return Ok(None),
    };
    let sq1 = l1.square_integral(a, b)?;
    let sq2 = l2.square_integral(a, b)?;
    let n = ctx.n();
    let mut acc = 0.0;
    for i in 0..n {
        let e1 = if t1.is_empty() { 0.0 } else { ctx.covariates.dot(i, t1) };
        let e2 = if t2.is_empty() { 0.0 } else { ctx.covariates.dot(i, t2) };
        acc += sq1 * (2.0 * e1).exp() + sq2 * (2.0 * e2).exp() - 2.0 * cross * (e1 + e2).exp();
    }
    Ok(Some((acc / n as f64).max(0.0)))
}

fn generic_dist_sq(f: &SqrtFunction, g: &SqrtFunction, ctx: &EvalCtx) -> f64 {
    let per_i = |i: usize| {
        ctx.quad.integrate(|t| {
            let d = f.eval(t, i, ctx) - g.eval(t, i, ctx);
            d * d
        })
    };
    if covariate_free(f) && covariate_free(g) {
        per_i(0)
    } else {
        let n = ctx.n();
        (0..n).map(per_i).sum::<f64>() / n as f64
    }
}

/// Closed-form distances for the parametric families, derived independently
/// of the quadrature and law machinery; used as test oracles and for
/// net-spacing calculations.
pub mod closed_form {
    /// `integral_0^1 (g_b - g_{b'})^2 dt` for the unit-norm power roots
    /// `g_b(t) = sqrt(2b + 1) t^b`, `b > -1/2`.
    pub fn power_sqrt_dist_sq(b: f64, bp: f64) -> f64 {
        let d = b - bp;
        let s = (2.0 * b + 1.0).sqrt() + (2.0 * bp + 1.0).sqrt();
        4.0 * d * d / ((1.0 + b + bp) * s * s)
    }

    /// Unit-norm scale for `t^{k/2} e^{-bt}` on `[0, inf)`:
    /// `(2b)^{(k+1)/2} / sqrt(k!)`.
    pub fn exp_family_normalizer(b: f64, k: u8) -> f64 {
        let mut fact = 1.0;
        for j in 2..=(k as u64) {
            fact *= j as f64;
        }
        (2.0 * b).powf((k as f64 + 1.0) / 2.0) / fact.sqrt()
    }

    /// `H^2` between the unit-norm laws `c_b t^{k/2} e^{-bt}` on `[0, inf)`:
    /// `1 - (2 sqrt(b b'))^{k+1} / (b + b')^{k+1}`.
    pub fn exp_family_hellinger_sq(b: f64, bp: f64, k: u8) -> f64 {
        1.0 - (2.0 * (b * bp).sqrt() / (b + bp)).powi(k as i32 + 1)
    }

    /// `integral_0^1 (t1 t^{t2} - t1' t^{t2'})^2 dt` for power-law roots.
    pub fn duane_sqrt_dist_sq(th1: f64, th2: f64, th1p: f64, th2p: f64) -> f64 {
        th1 * th1 / (2.0 * th2 + 1.0) + th1p * th1p / (2.0 * th2p + 1.0)
            - 2.0 * th1 * th1p / (th2 + th2p + 1.0)
    }

    /// `integral_0^inf (t^{k/2} e^{-th t} - t^{k/2} e^{-th' t})^2 dt` for
    /// `k in {0, 1}`.
    pub fn exp_decay_sqrt_dist_sq(th: f64, thp: f64, k: u8) -> f64 {
        let d = th - thp;
        let s = th + thp;
        match k {
            0 => d * d / (2.0 * th * thp * s),
            1 => (th * th + 4.0 * th * thp + thp * thp) * d * d
                / (4.0 * th * th * thp * thp * s * s),
            _ => panic!("k must be 0 or 1"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::DyadicPoly;

    fn ctx_parts(n: usize) -> (TimeDomain, CovariateSet, QuadratureRule) {
        let dom = TimeDomain::unit();
        let quad = QuadratureRule::for_domain(&dom).unwrap();
        (dom, CovariateSet::unit_grid_1d(n).unwrap(), quad)
    }

    #[test]
    fn flat_vs_linear_hellinger_is_one_twelfth() {
        let (dom, cov, quad) = ctx_parts(5);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let u = IntensitySurface::PowerLaw { scale: 1.0, exponent: 0.0 };
        let v = IntensitySurface::PowerLaw { scale: 1.0, exponent: 1.0 };
        let h2 = hellinger_sq(&u, &v, &ctx).unwrap();
        assert!((h2 - 1.0 / 12.0).abs() < 1e-12, "H^2 = {h2}");
    }

    #[test]
    fn hellinger_diagonal_and_symmetry() {
        let (dom, cov, quad) = ctx_parts(4);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let u = IntensitySurface::ProductExp {
            law: TimeLaw::Power { scale: 2.0, exponent: 1.0 },
            theta: vec![0.7],
        };
        let v = IntensitySurface::ExpDecay { scale: 1.5, rate: 2.0, half_power: 0 };
        assert_eq!(hellinger_sq(&u, &u, &ctx).unwrap(), 0.0);
        let uv = hellinger_sq(&u, &v, &ctx).unwrap();
        let vu = hellinger_sq(&v, &u, &ctx).unwrap();
        assert_eq!(uv, vu);
        assert!(uv > 0.0);
    }

    #[test]
    fn two_h_sq_equals_root_distance_sq_across_paths() {
        // Hellinger through the generic intensity path must agree with the
        // joint L2 distance of the explicit roots.
        let (dom, cov, quad) = ctx_parts(6);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let time = normalize_time(
            &TimeCurve::Law(TimeLaw::Power { scale: 1.0, exponent: 1.0 }),
            &dom,
            &quad,
        )
        .unwrap();
        let cov_curve = normalize_cov(
            &CovCurve::LogLinear { theta: vec![0.5], scale: 1.0 },
            &cov,
        )
        .unwrap();
        let g1 = SqrtFunction::Product { kappa: 1.3, time, cov: cov_curve };
        let g2 = SqrtFunction::TimeLaw(TimeLaw::Power { scale: 1.0, exponent: 0.5 });
        let h2 = hellinger_sq(&g1.square(), &g2.square(), &ctx).unwrap();
        let d2 = l2_dist_sq_joint(&g1, &g2, &ctx).unwrap();
        assert!((2.0 * h2 - d2).abs() < 1e-9, "2H^2 = {}, d^2 = {}", 2.0 * h2, d2);
    }

    #[test]
    fn hellinger_ignores_root_sign() {
        let (dom, cov, quad) = ctx_parts(4);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let pos = IntensitySurface::PiecewiseParam {
            partition: Partition::split_at(2, 4).unwrap(),
            sqrt_laws: vec![
                TimeLaw::Power { scale: 1.0, exponent: 0.0 },
                TimeLaw::Power { scale: 2.0, exponent: 1.0 },
            ],
        };
        let neg = IntensitySurface::PiecewiseParam {
            partition: Partition::split_at(2, 4).unwrap(),
            sqrt_laws: vec![
                TimeLaw::Power { scale: 1.0, exponent: 0.0 },
                TimeLaw::Power { scale: -2.0, exponent: 1.0 },
            ],
        };
        let flat = IntensitySurface::Constant { level: 1.0 };
        let a = hellinger_sq(&pos, &flat, &ctx).unwrap();
        let b = hellinger_sq(&neg, &flat, &ctx).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn triangle_inequality_on_sample_functions() {
        let (dom, cov, quad) = ctx_parts(8);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let fns = vec![
            SqrtFunction::Constant { level: 1.0 },
            SqrtFunction::TimeLaw(TimeLaw::Power { scale: 2.0, exponent: 0.8 }),
            SqrtFunction::ProductExp {
                law: TimeLaw::Power { scale: 1.0, exponent: 0.3 },
                theta: vec![0.4],
            },
            SqrtFunction::PiecewiseLaw {
                partition: Partition::split_at(4, 8).unwrap(),
                laws: vec![
                    TimeLaw::Power { scale: 0.5, exponent: 0.0 },
                    TimeLaw::ExpDecay { scale: 1.0, rate: 1.0, half_power: 0 },
                ],
            },
        ];
        for a in &fns {
            for b in &fns {
                for c in &fns {
                    let ab = l2_dist_joint(a, b, &ctx).unwrap();
                    let bc = l2_dist_joint(b, c, &ctx).unwrap();
                    let ac = l2_dist_joint(a, c, &ctx).unwrap();
                    assert!(ac <= ab + bc + 1e-12);
                }
            }
        }
    }

    #[test]
    fn product_identity_matches_direct_distance() {
        let (dom, cov, quad) = ctx_parts(16);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let u1 = normalize_time(
            &TimeCurve::Law(TimeLaw::Power { scale: 1.0, exponent: 1.0 }),
            &dom,
            &quad,
        )
        .unwrap();
        let u2 = normalize_time(
            &TimeCurve::Law(TimeLaw::ExpDecay { scale: 1.0, rate: 0.8, half_power: 0 }),
            &dom,
            &quad,
        )
        .unwrap();
        let v1 = normalize_cov(&CovCurve::LogLinear { theta: vec![0.9], scale: 1.0 }, &cov)
            .unwrap();
        let v2 = normalize_cov(&CovCurve::Constant(1.0), &cov).unwrap();
        let (k1, k2) = (1.7, 0.45);
        let f = SqrtFunction::Product { kappa: k1, time: u1.clone(), cov: v1.clone() };
        let g = SqrtFunction::Product { kappa: k2, time: u2.clone(), cov: v2.clone() };
        let direct = l2_dist_sq_joint(&f, &g, &ctx).unwrap();
        let dt_sq = l2_dist_time_sq(&u1, &u2, &dom, &quad).unwrap();
        let dx_sq = l2_dist_cov_sq(&v1, &v2, &cov);
        let via_identity = product_l2_dist_sq(k1, k2, dt_sq, dx_sq);
        assert!(
            (direct - via_identity).abs() < 1e-9,
            "direct {direct} vs identity {via_identity}"
        );
    }

    #[test]
    fn closed_form_power_pair_matches_machinery() {
        let (dom, cov, quad) = ctx_parts(3);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        for (b, bp) in [(0.0, 1.0), (0.5, 2.0), (-0.3, 0.7), (1.25, 1.25)] {
            let ga = TimeLaw::Power { scale: 1.0, exponent: b }.normalized(0.0, 1.0).unwrap();
            let gb = TimeLaw::Power { scale: 1.0, exponent: bp }.normalized(0.0, 1.0).unwrap();
            let d2 = l2_dist_sq_joint(
                &SqrtFunction::TimeLaw(ga),
                &SqrtFunction::TimeLaw(gb),
                &ctx,
            )
            .unwrap();
            let oracle = closed_form::power_sqrt_dist_sq(b, bp);
            assert!((d2 - oracle).abs() < 1e-12, "b={b} b'={bp}: {d2} vs {oracle}");
        }
    }

    #[test]
    fn closed_form_exp_family_matches_truncated_machinery() {
        for k in [0u8, 1] {
            for (b, bp) in [(1.0, 2.0), (0.7, 0.7), (3.0, 0.5)] {
                let na = closed_form::exp_family_normalizer(b, k);
                let nb = closed_form::exp_family_normalizer(bp, k);
                let la = TimeLaw::ExpDecay { scale: na, rate: b, half_power: k };
                let lb = TimeLaw::ExpDecay { scale: nb, rate: bp, half_power: k };
                // Unit norms on the full half-line.
                assert!((la.square_integral(0.0, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
                let cross = la.cross_integral(&lb, 0.0, f64::INFINITY).unwrap();
                let h2 = 0.5 * (2.0 - 2.0 * cross);
                let oracle = closed_form::exp_family_hellinger_sq(b, bp, k);
                assert!((h2 - oracle).abs() < 1e-12, "k={k} b={b} b'={bp}");
            }
        }
    }

    #[test]
    fn closed_form_duane_and_decay_match_quadrature() {
        let dom = TimeDomain::unit();
        let quad = QuadratureRule::for_domain(&dom).unwrap();
        let (t1, t2, t1p, t2p) = (1.4, 0.6, 0.9, 1.1);
        let numeric = quad.integrate(|t| {
            let d = t1 * t.powf(t2) - t1p * t.powf(t2p);
            d * d
        });
        let oracle = closed_form::duane_sqrt_dist_sq(t1, t2, t1p, t2p);
        // Fractional powers limit Simpson near 0; the oracle is exact.
        assert!((numeric - oracle).abs() < 1e-7);

        for k in [0u8, 1] {
            let (th, thp) = (1.3, 2.2);
            let la = TimeLaw::ExpDecay { scale: 1.0, rate: th, half_power: k };
            let lb = TimeLaw::ExpDecay { scale: 1.0, rate: thp, half_power: k };
            let exact = la.square_integral(0.0, f64::INFINITY).unwrap()
                + lb.square_integral(0.0, f64::INFINITY).unwrap()
                - 2.0 * la.cross_integral(&lb, 0.0, f64::INFINITY).unwrap();
            let oracle = closed_form::exp_decay_sqrt_dist_sq(th, thp, k);
            assert!((exact - oracle).abs() < 1e-12, "k={k}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn exp_modulated_path_agrees_with_generic() {
        let (dom, cov, quad) = ctx_parts(20);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let f = SqrtFunction::ProductExp {
            law: TimeLaw::Power { scale: 1.2, exponent: 0.5 },
            theta: vec![0.8],
        };
        let g = SqrtFunction::ProductExp {
            law: TimeLaw::Power { scale: 0.9, exponent: 1.5 },
            theta: vec![-0.3],
        };
        let fast = l2_dist_sq_joint(&f, &g, &ctx).unwrap();
        let slow = generic_dist_sq(&f, &g, &ctx);
        assert!((fast - slow).abs() < 1e-9, "fast {fast} vs generic {slow}");
        assert_eq!(l2_dist_sq_joint(&f, &f, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn piecewise_path_agrees_with_generic() {
        let (dom, cov, quad) = ctx_parts(10);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let f = SqrtFunction::PiecewiseLaw {
            partition: Partition::new(vec![0, 3, 7], 10).unwrap(),
            laws: vec![
                TimeLaw::Power { scale: 1.0, exponent: 0.0 },
                TimeLaw::Power { scale: 2.0, exponent: 1.0 },
                TimeLaw::Power { scale: 0.5, exponent: 2.0 },
            ],
        };
        let g = SqrtFunction::PiecewiseLaw {
            partition: Partition::split_at(5, 10).unwrap(),
            laws: vec![
                TimeLaw::Power { scale: 1.5, exponent: 1.0 },
                TimeLaw::ExpDecay { scale: 1.0, rate: 2.0, half_power: 0 },
            ],
        };
        let fast = l2_dist_sq_joint(&f, &g, &ctx).unwrap();
        let slow = generic_dist_sq(&f, &g, &ctx);
        assert!((fast - slow).abs() < 1e-9, "fast {fast} vs generic {slow}");
    }

    #[test]
    fn grid_roundtrip_preserves_distance() {
        let (dom, cov, quad) = ctx_parts(3);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let f = SqrtFunction::TimeLaw(TimeLaw::Power { scale: 1.0, exponent: 1.0 });
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| quad.nodes().iter().map(|&t| f.eval(t, i, &ctx)).collect())
            .collect();
        let g = SqrtFunction::Grid { rows };
        let d = l2_dist_sq_joint(&f, &g, &ctx).unwrap();
        assert!(d < 1e-12, "tabulated copy at distance {d}");
    }

    #[test]
    fn point_mass_distance_is_pointwise() {
        let dom = TimeDomain::point_mass(1.0);
        let quad = QuadratureRule::for_domain(&dom).unwrap();
        let cov = CovariateSet::trivial(2).unwrap();
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let f = SqrtFunction::Constant { level: 3.0 };
        let g = SqrtFunction::TimeLaw(TimeLaw::Power { scale: 1.0, exponent: 1.0 });
        // (3 - 1)^2 at the atom.
        assert!((l2_dist_sq_joint(&f, &g, &ctx).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn poly_time_inner_is_exact() {
        let dom = TimeDomain::unit();
        let quad = QuadratureRule::for_domain(&dom).unwrap();
        let p = DyadicPoly::new(1, 1, vec![1.0, 0.5, -0.25, 2.0]).unwrap();
        let u = TimeCurve::Poly(p.clone());
        let self_inner = time_inner(&u, &u, &dom, &quad).unwrap();
        assert!((self_inner - p.norm_sq()).abs() < 1e-15);
        let c = TimeCurve::Constant(2.0);
        let ci = time_inner(&c, &u, &dom, &quad).unwrap();
        assert!((ci - 2.0 * p.integral(&dom)).abs() < 1e-12);
    }

    #[test]
    fn normalization_rejects_zero() {
        let (dom, cov, quad) = ctx_parts(3);
        assert!(normalize_time(&TimeCurve::Constant(0.0), &dom, &quad).is_err());
        assert!(normalize_cov(&CovCurve::Constant(0.0), &cov).is_err());
    }
}
