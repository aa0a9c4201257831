//! Intensity surfaces on `T x X` and their square roots.
//!
//! An [`IntensitySurface`] is a non-negative function `s(t, x)` evaluated at
//! `(t, x_i)` through an [`EvalCtx`]. Estimation candidates are stored on the
//! square-root scale as [`SqrtFunction`]s (possibly signed; the associated
//! intensity is the square), and any candidate can be lifted back to an
//! intensity with [`IntensitySurface::SquareOf`].

use serde::{Deserialize, Serialize};

use crate::domain::{CovariateSet, Partition, TimeDomain};
use crate::error::{IpsError, Result};
use crate::poly::DyadicPoly;
use crate::quadrature::QuadratureRule;

/// Shared evaluation context: domain, covariates and the quadrature rule
/// (grid surfaces are tabulated on its nodes).
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx<'a> {
    pub domain: &'a TimeDomain,
    pub covariates: &'a CovariateSet,
    pub quad: &'a QuadratureRule,
}

impl<'a> EvalCtx<'a> {
    pub fn new(
        domain: &'a TimeDomain,
        covariates: &'a CovariateSet,
        quad: &'a QuadratureRule,
    ) -> Self {
        Self { domain, covariates, quad }
    }

    pub fn n(&self) -> usize {
        self.covariates.n()
    }
}

/// Parametric time laws `t -> scale * t^b` and `t -> scale * t^{k/2} e^{-bt}`
/// used by the reliability-growth families (scale may be signed on the
/// square-root scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeLaw {
    /// `scale * t^exponent`
    Power { scale: f64, exponent: f64 },
    /// `scale * t^{half_power/2} * exp(-rate * t)`, `half_power` in `{0, 1}`
    ExpDecay { scale: f64, rate: f64, half_power: u8 },
}

impl TimeLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeLaw::Power { scale, exponent } => {
                if !scale.is_finite() || !exponent.is_finite() {
                    return Err(IpsError::InvalidParameter("power law parameters must be finite".into()));
                }
            }
            TimeLaw::ExpDecay { scale, rate, half_power } => {
                if !scale.is_finite() || !rate.is_finite() || *rate < 0.0 {
                    return Err(IpsError::InvalidParameter(
                        "exp-decay law needs finite scale and rate >= 0".into(),
                    ));
                }
                if *half_power > 1 {
                    return Err(IpsError::InvalidParameter("half_power must be 0 or 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeLaw::Power { scale, exponent } => {
                if exponent == 0.0 {
                    scale
                } else {
                    scale * t.powf(exponent)
                }
            }
            TimeLaw::ExpDecay { scale, rate, half_power } => {
                let root = if half_power == 1 { t.sqrt() } else { 1.0 };
                scale * root * (-rate * t).exp()
            }
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            TimeLaw::Power { scale, .. } | TimeLaw::ExpDecay { scale, .. } => scale,
        }
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        let mut law = self.clone();
        match &mut law {
            TimeLaw::Power { scale: s, .. } | TimeLaw::ExpDecay { scale: s, .. } => *s = scale,
        }
        law
    }

    /// `integral law(t) dt` over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        match *self {
            TimeLaw::Power { scale, exponent } => power_integral(a, b, exponent).map(|v| scale * v),
            TimeLaw::ExpDecay { scale, rate, half_power } => {
                Ok(scale * exp_monomial_integral(a, b, half_power as f64 / 2.0, rate))
            }
        }
    }

    /// `integral law(t)^2 dt` over `[a, b]`.
    pub fn square_integral(&self, a: f64, b: f64) -> Result<f64> {
        match *self {
            TimeLaw::Power { scale, exponent } => {
                power_integral(a, b, 2.0 * exponent).map(|v| scale * scale * v)
            }
            TimeLaw::ExpDecay { scale, rate, half_power } => {
                Ok(scale * scale * exp_monomial_integral(a, b, half_power as f64, 2.0 * rate))
            }
        }
    }

    /// `integral law(t) * other(t) dt` over `[a, b]`, when a closed form
    /// exists (same family).
    pub fn cross_integral(&self, other: &Self, a: f64, b: f64) -> Option<f64> {
        match (self, other) {
            (
                TimeLaw::Power { scale: s1, exponent: e1 },
                TimeLaw::Power { scale: s2, exponent: e2 },
            ) => power_integral(a, b, e1 + e2).ok().map(|v| s1 * s2 * v),
            (
                TimeLaw::ExpDecay { scale: s1, rate: r1, half_power: k1 },
                TimeLaw::ExpDecay { scale: s2, rate: r2, half_power: k2 },
            ) => Some(
                s1 * s2 * exp_monomial_integral(a, b, (k1 + k2) as f64 / 2.0, r1 + r2),
            ),
            _ => None,
        }
    }

    /// Supremum of `|law|` over `[a, b]`; infinite for negative exponents at
    /// `a = 0`.
    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        match *self {
            TimeLaw::Power { scale, exponent } => {
                let s = scale.abs();
                if exponent == 0.0 {
                    s
                } else if exponent > 0.0 {
                    s * b.powf(exponent)
                } else if a > 0.0 {
                    s * a.powf(exponent)
                } else {
                    f64::INFINITY
                }
            }
            TimeLaw::ExpDecay { scale, rate, half_power } => {
                let s = scale.abs();
                let f = |t: f64| {
                    if !t.is_finite() {
                        return if rate > 0.0 {
                            0.0
                        } else if half_power == 1 {
                            f64::INFINITY
                        } else {
                            1.0
                        };
                    }
                    let root = if half_power == 1 { t.sqrt() } else { 1.0 };
                    root * (-rate * t).exp()
                };
                let mut best = f(a).max(f(b));
                if half_power == 1 && rate > 0.0 {
                    let t_star = 1.0 / (2.0 * rate);
                    if t_star > a && t_star < b {
                        best = best.max(f(t_star));
                    }
                }
                s * best
            }
        }
    }

    /// Rescale so that the squared law integrates to 1 over `[a, b]`
    /// (preserving the sign of the current scale).
    pub fn normalized(&self, a: f64, b: f64) -> Result<Self> {
        let sq = self.square_integral(a, b)?;
        if sq <= 0.0 || !sq.is_finite() {
            return Err(IpsError::ZeroNorm);
        }
        Ok(self.with_scale(self.scale() / sq.sqrt()))
    }
}

fn power_integral(a: f64, b: f64, exponent: f64) -> Result<f64> {
    if exponent <= -1.0 && a <= 0.0 {
        return Err(IpsError::DivergentIntegral(format!(
            "t^{exponent} is not integrable near 0"
        )));
    }
    let p = exponent + 1.0;
    if p == 0.0 {
        Ok((b / a).ln())
    } else {
        let lower = if a == 0.0 { 0.0 } else { a.powf(p) };
        Ok((b.powf(p) - lower) / p)
    }
}

/// `integral_a^b t^p e^{-c t} dt` for `p in {0, 1/2, 1}` and `c >= 0`;
/// `b` may be infinite when `c > 0`.
fn exp_monomial_integral(a: f64, b: f64, p: f64, c: f64) -> f64 {
    if c == 0.0 {
        let q = p + 1.0;
        return (b.powf(q) - a.powf(q)) / q;
    }
    if p == 0.0 {
        let at_b = if b.is_finite() { (-c * b).exp() } else { 0.0 };
        ((-c * a).exp() - at_b) / c
    } else if p == 1.0 {
        let f = |t: f64| (t / c + 1.0 / (c * c)) * (-c * t).exp();
        let at_b = if b.is_finite() { f(b) } else { 0.0 };
        f(a) - at_b
    } else {
        debug_assert_eq!(p, 0.5);
        use statrs::function::erf::erf;
        let erf_scale = std::f64::consts::PI.sqrt() / (2.0 * c.powf(1.5));
        let f = |t: f64| {
            if t.is_finite() {
                erf_scale * erf((c * t).sqrt()) - t.sqrt() * (-c * t).exp() / c
            } else {
                erf_scale
            }
        };
        f(b) - f(a)
    }
}

/// Scalar function of time used inside separable surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeCurve {
    Constant(f64),
    Law(TimeLaw),
    /// Piecewise polynomial on dyadic cells of the domain.
    Poly(DyadicPoly),
    /// Piecewise-linear interpolation through `(ts, values)`.
    Nodes { ts: Vec<f64>, values: Vec<f64> },
}

impl TimeCurve {
    pub fn eval(&self, t: f64, domain: &TimeDomain) -> f64 {
        match self {
            TimeCurve::Constant(v) => *v,
            TimeCurve::Law(law) => law.eval(t),
            TimeCurve::Poly(p) => p.eval(t, domain),
            TimeCurve::Nodes { ts, values } => interp_linear(ts, values, t),
        }
    }

    /// `integral curve dt` over the domain.
    pub fn integral(&self, domain: &TimeDomain, quad: &QuadratureRule) -> Result<f64> {
        match self {
            TimeCurve::Constant(v) => Ok(v * domain.length()),
            TimeCurve::Law(law) => law.integral(domain.t_min, domain.t_max),
            TimeCurve::Poly(p) => Ok(p.integral(domain)),
            TimeCurve::Nodes { .. } => Ok(quad.integrate(|t| self.eval(t, domain))),
        }
    }

    /// `integral curve^2 dt` over the domain.
    pub fn norm_sq(&self, domain: &TimeDomain, quad: &QuadratureRule) -> Result<f64> {
        match self {
            TimeCurve::Constant(v) => Ok(v * v * domain.length()),
            TimeCurve::Law(law) => law.square_integral(domain.t_min, domain.t_max),
            TimeCurve::Poly(p) => Ok(p.norm_sq()),
            TimeCurve::Nodes { .. } => Ok(quad.integrate(|t| {
                let v = self.eval(t, domain);
                v * v
            })),
        }
    }

    pub fn sup_abs(&self, domain: &TimeDomain) -> f64 {
        match self {
            TimeCurve::Constant(v) => v.abs(),
            TimeCurve::Law(law) => law.sup_abs(domain.t_min, domain.t_max),
            TimeCurve::Poly(p) => p.sup_abs(domain),
            TimeCurve::Nodes { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            TimeCurve::Constant(v) => TimeCurve::Constant(v * factor),
            TimeCurve::Law(law) => TimeCurve::Law(law.with_scale(law.scale() * factor)),
            TimeCurve::Poly(p) => TimeCurve::Poly(p.scaled(factor)),
            TimeCurve::Nodes { ts, values } => TimeCurve::Nodes {
                ts: ts.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }
}

fn interp_linear(ts: &[f64], values: &[f64], t: f64) -> f64 {
    debug_assert_eq!(ts.len(), values.len());
    match ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(j) => values[j],
        Err(0) => values[0],
        Err(j) if j == ts.len() => values[j - 1],
        Err(j) => {
            let a = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
            values[j - 1] * (1.0 - a) + values[j] * a
        }
    }
}

/// Scalar function of the covariate, evaluated per process index under the
/// empirical measure `nu_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovCurve {
    Constant(f64),
    /// `scale * exp(<theta, x>)`
    LogLinear { theta: Vec<f64>, scale: f64 },
    /// One value per process index.
    PerIndex(Vec<f64>),
}

impl CovCurve {
    pub fn eval(&self, i: usize, covariates: &CovariateSet) -> f64 {
        match self {
            CovCurve::Constant(v) => *v,
            CovCurve::LogLinear { theta, scale } => scale * covariates.dot(i, theta).exp(),
            CovCurve::PerIndex(values) => values[i],
        }
    }

    /// `n^{-1} sum_i curve(x_i)^2`.
    pub fn norm_sq(&self, covariates: &CovariateSet) -> f64 {
        let n = covariates.n();
        (0..n).map(|i| {
            let v = self.eval(i, covariates);
            v * v
        }).sum::<f64>() / n as f64
    }

    pub fn sup_abs(&self, covariates: &CovariateSet) -> f64 {
        (0..covariates.n()).fold(0.0f64, |m, i| m.max(self.eval(i, covariates).abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            CovCurve::Constant(v) => CovCurve::Constant(v * factor),
            CovCurve::LogLinear { theta, scale } => {
                CovCurve::LogLinear { theta: theta.clone(), scale: scale * factor }
            }
            CovCurve::PerIndex(values) => {
                CovCurve::PerIndex(values.iter().map(|v| v * factor).collect())
            }
        }
    }
}

/// Square root of an intensity: the scale on which all distances, nets and
/// tests operate. Values may be signed; the intensity is the square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SqrtFunction {
    Constant { level: f64 },
    /// `g(t, x) = law(t)`
    TimeLaw(TimeLaw),
    /// `g(t, x) = law(t) * exp(<theta, x>)`
    ProductExp { law: TimeLaw, theta: Vec<f64> },
    /// `g(t, x_i) = law_{seg(i)}(t)` over an interval partition of the
    /// process indices.
    PiecewiseLaw { partition: Partition, laws: Vec<TimeLaw> },
    /// Tabulated values, one row per process, on the quadrature nodes.
    Grid { rows: Vec<Vec<f64>> },
    /// `kappa * f(t) * h(x)` with unit-norm factors (`||f||_t = ||h||_x = 1`
    /// up to 1e-8) and `kappa >= 0`.
    Product { kappa: f64, time: TimeCurve, cov: CovCurve },
}

impl SqrtFunction {
    pub fn eval(&self, t: f64, i: usize, ctx: &EvalCtx) -> f64 {
        match self {
            SqrtFunction::Constant { level } => *level,
            SqrtFunction::TimeLaw(law) => law.eval(t),
            SqrtFunction::ProductExp { law, theta } => {
                law.eval(t) * ctx.covariates.dot(i, theta).exp()
            }
            SqrtFunction::PiecewiseLaw { partition, laws } => {
                laws[partition.segment_of(i)].eval(t)
            }
            SqrtFunction::Grid { rows } => ctx.quad.interpolate(&rows[i], t),
            SqrtFunction::Product { kappa, time, cov } => {
                kappa * time.eval(t, ctx.domain) * cov.eval(i, ctx.covariates)
            }
        }
    }

    /// The intensity `g^2` as a surface.
    pub fn square(&self) -> IntensitySurface {
        IntensitySurface::SquareOf(Box::new(self.clone()))
    }

    /// Canonical structural descriptor; two candidates are the same function
    /// exactly when their descriptors are equal.
    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).expect("sqrt function serializes")
    }

    /// 64-bit hash of the descriptor, used for tie-break coins and summaries.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.descriptor().as_bytes())
    }

    /// Validity of the stored representation (unit-norm product factors,
    /// partition/law agreement, finite grid values).
    pub fn validate(&self, ctx: &EvalCtx) -> Result<()> {
        match self {
            SqrtFunction::Constant { level } => {
                if !level.is_finite() {
                    return Err(IpsError::InvalidParameter("level must be finite".into()));
                }
            }
            SqrtFunction::TimeLaw(law) => law.validate()?,
            SqrtFunction::ProductExp { law, theta } => {
                law.validate()?;
                if theta.len() != ctx.covariates.dim() {
                    return Err(IpsError::CovariateDimMismatch(theta.len(), ctx.covariates.dim()));
                }
            }
            SqrtFunction::PiecewiseLaw { partition, laws } => {
                if partition.n() != ctx.n() {
                    return Err(IpsError::InvalidPartition(format!(
                        "partition over {} processes, context has {}",
                        partition.n(),
                        ctx.n()
                    )));
                }
                if laws.len() != partition.num_segments() {
                    return Err(IpsError::InvalidPartition(
                        "one law per segment required".into(),
                    ));
                }
                for law in laws {
                    law.validate()?;
                }
            }
            SqrtFunction::Grid { rows } => {
                if rows.len() != ctx.n() {
                    return Err(IpsError::DegenerateInput("one grid row per process".into()));
                }
                for row in rows {
                    if row.len() != ctx.quad.len() {
                        return Err(IpsError::MismatchedDomains(
                            "grid rows must match the quadrature nodes".into(),
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(IpsError::InvalidParameter("grid values must be finite".into()));
                    }
                }
            }
            SqrtFunction::Product { kappa, time, cov } => {
                if !kappa.is_finite() || *kappa < 0.0 {
                    return Err(IpsError::InvalidParameter("kappa must be finite and >= 0".into()));
                }
                if *kappa > 0.0 {
                    let nt = time.norm_sq(ctx.domain, ctx.quad)?;
                    let nc = cov.norm_sq(ctx.covariates);
                    if (nt - 1.0).abs() > 1e-8 * nt.max(1.0) || (nc - 1.0).abs() > 1e-8 * nc.max(1.0)
                    {
                        return Err(IpsError::InvalidParameter(format!(
                            "product factors must have unit norm (got {nt}, {nc})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Non-negative intensity surface `s(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IntensitySurface {
    Constant { level: f64 },
    /// `scale * t^exponent`, `scale >= 0`
    PowerLaw { scale: f64, exponent: f64 },
    /// `scale * t^{half_power/2} * exp(-rate t)`, `scale >= 0`
    ExpDecay { scale: f64, rate: f64, half_power: u8 },
    /// `law(t) * exp(<theta, x>)` (law must be non-negative on the domain)
    ProductExp { law: TimeLaw, theta: Vec<f64> },
    /// Piecewise parametric on the square-root scale:
    /// `sqrt(s_i(t)) = law_{seg(i)}(t)`.
    PiecewiseParam { partition: Partition, sqrt_laws: Vec<TimeLaw> },
    /// Tabulated non-negative values per process on the quadrature nodes.
    Grid { rows: Vec<Vec<f64>> },
    /// Separable intensity `kappa * u(t) * v(x)` (all factors non-negative).
    Product { kappa: f64, time: TimeCurve, cov: CovCurve },
    /// The square of a candidate square-root function.
    SquareOf(Box<SqrtFunction>),
}

impl IntensitySurface {
    pub fn eval(&self, t: f64, i: usize, ctx: &EvalCtx) -> f64 {
        match self {
            IntensitySurface::Constant { level } => *level,
            IntensitySurface::PowerLaw { scale, exponent } => {
                TimeLaw::Power { scale: *scale, exponent: *exponent }.eval(t)
            }
            IntensitySurface::ExpDecay { scale, rate, half_power } => {
                TimeLaw::ExpDecay { scale: *scale, rate: *rate, half_power: *half_power }.eval(t)
            }
            IntensitySurface::ProductExp { law, theta } => {
                law.eval(t) * ctx.covariates.dot(i, theta).exp()
            }
            IntensitySurface::PiecewiseParam { partition, sqrt_laws } => {
                let v = sqrt_laws[partition.segment_of(i)].eval(t);
                v * v
            }
            IntensitySurface::Grid { rows } => ctx.quad.interpolate(&rows[i], t),
            IntensitySurface::Product { kappa, time, cov } => {
                kappa * time.eval(t, ctx.domain) * cov.eval(i, ctx.covariates)
            }
            IntensitySurface::SquareOf(g) => {
                let v = g.eval(t, i, ctx);
                v * v
            }
        }
    }

    /// `sqrt(s(t, x_i))`, always non-negative.
    pub fn sqrt_at(&self, t: f64, i: usize, ctx: &EvalCtx) -> f64 {
        match self {
            IntensitySurface::PiecewiseParam { partition, sqrt_laws } => {
                sqrt_laws[partition.segment_of(i)].eval(t).abs()
            }
            IntensitySurface::SquareOf(g) => g.eval(t, i, ctx).abs(),
            _ => self.eval(t, i, ctx).sqrt(),
        }
    }

    /// `integral s(t, x_i) dmu(t)`: closed form for parametric tags,
    /// quadrature for grids. Point-mass domains evaluate at the atom.
    pub fn integral_i(&self, i: usize, ctx: &EvalCtx) -> Result<f64> {
        if ctx.domain.point_mass {
            let v = self.eval(ctx.domain.t_min, i, ctx);
            if !v.is_finite() {
                return Err(IpsError::DivergentIntegral(
                    "intensity not finite at the point-mass atom".into(),
                ));
            }
            return Ok(v);
        }
        let (a, b) = (ctx.domain.t_min, ctx.domain.t_max);
        match self {
            IntensitySurface::Constant { level } => Ok(level * (b - a)),
            IntensitySurface::PowerLaw { scale, exponent } => {
                TimeLaw::Power { scale: *scale, exponent: *exponent }.integral(a, b)
            }
            IntensitySurface::ExpDecay { scale, rate, half_power } => {
                TimeLaw::ExpDecay { scale: *scale, rate: *rate, half_power: *half_power }
                    .integral(a, b)
            }
            IntensitySurface::ProductExp { law, theta } => {
                Ok(law.integral(a, b)? * ctx.covariates.dot(i, theta).exp())
            }
            IntensitySurface::PiecewiseParam { partition, sqrt_laws } => {
                sqrt_laws[partition.segment_of(i)].square_integral(a, b)
            }
            IntensitySurface::Grid { rows } => Ok(ctx.quad.integrate_values(&rows[i])),
            IntensitySurface::Product { kappa, time, cov } => {
                Ok(kappa * cov.eval(i, ctx.covariates) * time.integral(ctx.domain, ctx.quad)?)
            }
            IntensitySurface::SquareOf(g) => match &**g {
                SqrtFunction::Constant { level } => Ok(level * level * (b - a)),
                SqrtFunction::TimeLaw(law) => law.square_integral(a, b),
                SqrtFunction::ProductExp { law, theta } => {
                    Ok(law.square_integral(a, b)? * (2.0 * ctx.covariates.dot(i, theta)).exp())
                }
                SqrtFunction::PiecewiseLaw { partition, laws } => {
                    laws[partition.segment_of(i)].square_integral(a, b)
                }
                SqrtFunction::Grid { rows } => {
                    Ok(ctx.quad.integrate_values(
                        &rows[i].iter().map(|v| v * v).collect::<Vec<_>>(),
                    ))
                }
                SqrtFunction::Product { kappa, time, cov } => {
                    let c = cov.eval(i, ctx.covariates);
                    Ok(kappa * kappa * c * c * time.norm_sq(ctx.domain, ctx.quad)?)
                }
            },
        }
    }

    /// Mean over processes of the per-process integrals (the total expected
    /// count divided by `n`).
    pub fn mean_integral(&self, ctx: &EvalCtx) -> Result<f64> {
        let n = ctx.n();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.integral_i(i, ctx)?;
        }
        Ok(acc / n as f64)
    }

    /// Finite upper bound of `s(., x_i)` on the domain, `None` when the
    /// surface is unbounded there (power laws with negative exponent near 0).
    pub fn sup_i(&self, i: usize, ctx: &EvalCtx) -> Option<f64> {
        let (a, b) = (ctx.domain.t_min, ctx.domain.t_max);
        let fin = |v: f64| if v.is_finite() { Some(v) } else { None };
        match self {
            IntensitySurface::Constant { level } => Some(*level),
            IntensitySurface::PowerLaw { scale, exponent } => {
                fin(TimeLaw::Power { scale: *scale, exponent: *exponent }.sup_abs(a, b))
            }
            IntensitySurface::ExpDecay { scale, rate, half_power } => fin(
                TimeLaw::ExpDecay { scale: *scale, rate: *rate, half_power: *half_power }
                    .sup_abs(a, b),
            ),
            IntensitySurface::ProductExp { law, theta } => {
                fin(law.sup_abs(a, b) * ctx.covariates.dot(i, theta).exp())
            }
            IntensitySurface::PiecewiseParam { partition, sqrt_laws } => {
                let s = sqrt_laws[partition.segment_of(i)].sup_abs(a, b);
                fin(s * s)
            }
            IntensitySurface::Grid { rows } => {
                Some(rows[i].iter().fold(0.0f64, |m, v| m.max(*v)))
            }
            IntensitySurface::Product { kappa, time, cov } => fin(
                kappa * time.sup_abs(ctx.domain) * cov.eval(i, ctx.covariates).abs(),
            ),
            IntensitySurface::SquareOf(g) => {
                let s = match &**g {
                    SqrtFunction::Constant { level } => level.abs(),
                    SqrtFunction::TimeLaw(law) => law.sup_abs(a, b),
                    SqrtFunction::ProductExp { law, theta } => {
                        law.sup_abs(a, b) * ctx.covariates.dot(i, theta).exp()
                    }
                    SqrtFunction::PiecewiseLaw { partition, laws } => {
                        laws[partition.segment_of(i)].sup_abs(a, b)
                    }
                    SqrtFunction::Grid { rows } => {
                        rows[i].iter().fold(0.0f64, |m, v| m.max(v.abs()))
                    }
                    SqrtFunction::Product { kappa, time, cov } => {
                        kappa * time.sup_abs(ctx.domain) * cov.eval(i, ctx.covariates).abs()
                    }
                };
                fin(s * s)
            }
        }
    }

    /// Basic parameter validation (finiteness, sign constraints).
    pub fn validate(&self, ctx: &EvalCtx) -> Result<()> {
        let nonneg = |v: f64, what: &str| {
            if !v.is_finite() || v < 0.0 {
                Err(IpsError::InvalidParameter(format!("{what} must be finite and >= 0")))
            } else {
                Ok(())
            }
        };
        match self {
            IntensitySurface::Constant { level } => nonneg(*level, "level"),
            IntensitySurface::PowerLaw { scale, exponent } => {
                nonneg(*scale, "scale")?;
                if !exponent.is_finite() {
                    return Err(IpsError::InvalidParameter("exponent must be finite".into()));
                }
                Ok(())
            }
            IntensitySurface::ExpDecay { scale, rate, half_power } => {
                nonneg(*scale, "scale")?;
                TimeLaw::ExpDecay { scale: *scale, rate: *rate, half_power: *half_power }
                    .validate()
            }
            IntensitySurface::ProductExp { law, theta } => {
                law.validate()?;
                if law.scale() < 0.0 {
                    return Err(IpsError::InvalidParameter(
                        "intensity time law must be non-negative".into(),
                    ));
                }
                if theta.len() != ctx.covariates.dim() {
                    return Err(IpsError::CovariateDimMismatch(theta.len(), ctx.covariates.dim()));
                }
                Ok(())
            }
            IntensitySurface::PiecewiseParam { partition, sqrt_laws } => {
                if partition.n() != ctx.n() {
                    return Err(IpsError::InvalidPartition(format!(
                        "partition over {} processes, context has {}",
                        partition.n(),
                        ctx.n()
                    )));
                }
                if sqrt_laws.len() != partition.num_segments() {
                    return Err(IpsError::InvalidPartition("one law per segment required".into()));
                }
                for law in sqrt_laws {
                    law.validate()?;
                }
                Ok(())
            }
            IntensitySurface::Grid { rows } => {
                if rows.len() != ctx.n() {
                    return Err(IpsError::DegenerateInput("one grid row per process".into()));
                }
                for row in rows {
                    if row.len() != ctx.quad.len() {
                        return Err(IpsError::MismatchedDomains(
                            "grid rows must match the quadrature nodes".into(),
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        return Err(IpsError::InvalidParameter(
                            "grid intensities must be finite and >= 0".into(),
                        ));
                    }
                }
                Ok(())
            }
            IntensitySurface::Product { kappa, .. } => nonneg(*kappa, "kappa"),
            IntensitySurface::SquareOf(g) => g.validate(ctx),
        }
    }

    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).expect("intensity surface serializes")
    }

    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.descriptor().as_bytes())
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
