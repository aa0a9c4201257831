//! Candidate nets: finite discretizations of intensity classes with a
//! declared covering radius `eta_bar`, a metric-dimension bound and a
//! complexity weight, plus the solvers that turn dimension bounds into
//! critical radii.
//!
//! Four builders are provided: coefficient lattices for linear classes,
//! ring-of-spheres nets for separable products, parameter grids for
//! log-linear (Cox) reliability families, and per-partition collections for
//! change-point classes. Each builder declares the radius it was asked to
//! cover; `certify_covering` and `certify_cardinality` check the declared
//! guarantees empirically on sampled class members.

pub mod holder;
pub mod lambert;
pub mod profiles;

use crate::domain::{binomial_u128, ln_binomial, Partition, TimeDomain};
use crate::error::{IpsError, Result};
use crate::geometry::{l2_dist_joint, law_pair_dist_sq};
use crate::poly::DyadicPoly;
use crate::surface::{CovCurve, EvalCtx, SqrtFunction, TimeCurve, TimeLaw};
use crate::testing::TestConstants;
use self::lambert::lambert_w0;
use self::profiles::{LipschitzProfile, ProfileFamily};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::SQRT_2;

/// Hard cap on the number of candidates in a single net.
pub const NET_CARDINALITY_CAP: usize = 1_000_000;
/// Hard cap on the total number of candidates across a collection.
pub const COLLECTION_CANDIDATE_CAP: usize = 100_000;

const MAX_TIME_DEPTH: u32 = 12;
const MAX_TIME_DEGREE: usize = 3;
const DEDUP_SCALE: f64 = 1e9;

/// Declared bound `eta -> D(eta)` on the local metric dimension of a net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DimensionBound {
    Constant(f64),
    /// `D(eta) = 2 alpha + 2 beta ln(1/eta)` for `eta < 1`, constant `2 alpha` above.
    LogForm { alpha: f64, beta: f64 },
    /// Entropy sum over parameter blocks, see [`robust_dimension`].
    Robust { k: f64, r: Vec<f64>, alpha: Vec<f64>, rho: Vec<f64>, dims: Vec<usize> },
}

impl DimensionBound {
    pub fn validate(&self) -> Result<()> {
        match self {
            DimensionBound::Constant(d) => {
                if !d.is_finite() || *d <= 0.0 {
                    return Err(IpsError::InvalidParameter(
                        "constant dimension bound must be positive".into(),
                    ));
                }
            }
            DimensionBound::LogForm { alpha, beta } => {
                if !alpha.is_finite() || !beta.is_finite() || *alpha <= 0.0 || *beta < 0.0 {
                    return Err(IpsError::InvalidParameter(
                        "log-form dimension bound needs alpha > 0 and beta >= 0".into(),
                    ));
                }
            }
            DimensionBound::Robust { k, r, alpha, rho, dims } => {
                robust_dimension(1.0, *k, r, alpha, rho, dims)?;
            }
        }
        Ok(())
    }

    /// Evaluate the bound at radius `eta`.
    pub fn at(&self, eta: f64) -> f64 {
        match self {
            DimensionBound::Constant(d) => *d,
            DimensionBound::LogForm { alpha, beta } => {
                if eta < 1.0 {
                    2.0 * alpha + 2.0 * beta * (1.0 / eta).ln()
                } else {
                    2.0 * alpha
                }
            }
            DimensionBound::Robust { k, r, alpha, rho, dims } => {
                robust_dimension_value(eta, *k, r, alpha, rho, dims)
            }
        }
    }
}

/// Dimension bound of a robust parameter class at radius `eta`:
/// `1/2 v 1/4 sum_j ln(1 + 2 (k R_j / eta)^{1/alpha_j} rho_j) dim_j`.
pub fn robust_dimension(
    eta: f64,
    k: f64,
    r: &[f64],
    alpha: &[f64],
    rho: &[f64],
    dims: &[usize],
) -> Result<f64> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(IpsError::InvalidParameter("radius must be positive".into()));
    }
    if !k.is_finite() || k <= 0.0 {
        return Err(IpsError::InvalidParameter("scale k must be positive".into()));
    }
    if r.is_empty() || r.len() != alpha.len() || r.len() != rho.len() || r.len() != dims.len() {
        return Err(IpsError::InvalidParameter(
            "robust dimension blocks must be non-empty and aligned".into(),
        ));
    }
    for j in 0..r.len() {
        if !(r[j] > 0.0 && alpha[j] > 0.0 && rho[j] > 0.0) || dims[j] == 0 {
            return Err(IpsError::InvalidParameter(format!(
                "robust dimension block {j} needs positive R, alpha, rho and dim"
            )));
        }
    }
    Ok(robust_dimension_value(eta, k, r, alpha, rho, dims))
}

fn robust_dimension_value(
    eta: f64,
    k: f64,
    r: &[f64],
    alpha: &[f64],
    rho: &[f64],
    dims: &[usize],
) -> f64 {
    let sum: f64 = (0..r.len())
        .map(|j| (1.0 + 2.0 * (k * r[j] / eta).powf(1.0 / alpha[j]) * rho[j]).ln() * dims[j] as f64)
        .sum();
    (0.25 * sum).max(0.5)
}

/// Critical radius `eta_V = inf { eta > 0 : D(eta) / eta^2 <= n }`.
///
/// Constant bounds solve exactly, log-form bounds via the Lambert function,
/// anything else by bisection. The returned point always satisfies the
/// feasibility condition.
pub fn eta_solver(dim: &DimensionBound, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(IpsError::InvalidParameter("need at least one process".into()));
    }
    dim.validate()?;
    let nf = n as f64;
    let eta = match dim {
        DimensionBound::Constant(d) => (d / nf).sqrt(),
        DimensionBound::LogForm { alpha, beta } => {
            if *beta == 0.0 {
                (2.0 * alpha / nf).sqrt()
            } else {
                let z = (2.0 * alpha / beta).exp() * nf / beta;
                let closed = if z.is_finite() {
                    Some((beta / nf * lambert_w0(z)?).sqrt())
                } else {
                    None
                };
                match closed {
                    Some(e) if e < 1.0 => e,
                    _ => eta_solver_bisect(|e| dim.at(e), n)?,
                }
            }
        }
        DimensionBound::Robust { .. } => eta_solver_bisect(|e| dim.at(e), n)?,
    };
    Ok(nudge_feasible(dim, nf, eta))
}

fn nudge_feasible(dim: &DimensionBound, nf: f64, mut eta: f64) -> f64 {
    for _ in 0..32 {
        if dim.at(eta) <= nf * eta * eta {
            break;
        }
        eta += eta * 1e-15 + f64::MIN_POSITIVE;
    }
    eta
}

/// Bisection fallback for [`eta_solver`] on an arbitrary dimension bound.
/// Returns the right endpoint of the final bracket, so feasibility
/// `dim_fn(eta) <= n eta^2` holds at the returned radius.
pub fn eta_solver_bisect(dim_fn: impl Fn(f64) -> f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(IpsError::InvalidParameter("need at least one process".into()));
    }
    let nf = n as f64;
    let excess = |e: f64| dim_fn(e) - nf * e * e;
    let mut hi = 1.0_f64;
    let mut tries = 0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 2000 {
            return Err(IpsError::NonConvergence("no feasible radius found".into()));
        }
    }
    let mut lo = 0.5 * hi;
    while excess(lo) <= 0.0 {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(hi);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Critical radius of a weighted net:
/// `max(21 sqrt(3/(5a)) eta_V, sqrt(21 Delta / (n a)))`.
pub fn radius_from_weight(
    eta_v: f64,
    weight: f64,
    n: usize,
    constants: &TestConstants,
) -> Result<f64> {
    constants.validate()?;
    if !eta_v.is_finite() || eta_v <= 0.0 {
        return Err(IpsError::InvalidParameter("eta_V must be positive".into()));
    }
    if !weight.is_finite() || weight < 0.0 {
        return Err(IpsError::InvalidParameter("weight must be non-negative".into()));
    }
    if n == 0 {
        return Err(IpsError::InvalidParameter("need at least one process".into()));
    }
    let a = constants.a;
    let geometric = 21.0 * (3.0 / (5.0 * a)).sqrt() * eta_v;
    let complexity = (21.0 * weight / (n as f64 * a)).sqrt();
    Ok(geometric.max(complexity))
}

/// A finite net over an intensity class with its declared guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateNet {
    pub label: String,
    pub candidates: Vec<SqrtFunction>,
    /// Declared covering radius of the net over its class.
    pub eta_bar: f64,
    pub dim_bound: DimensionBound,
    /// Complexity weight `Delta`; collections must keep `sum exp(-Delta) <= 1`.
    pub weight: f64,
}

impl CandidateNet {
    pub fn new(
        label: impl Into<String>,
        candidates: Vec<SqrtFunction>,
        eta_bar: f64,
        dim_bound: DimensionBound,
        weight: f64,
    ) -> Result<Self> {
        let label = label.into();
        if candidates.is_empty() {
            return Err(IpsError::DegenerateInput(format!("net {label} has no candidates")));
        }
        if candidates.len() > NET_CARDINALITY_CAP {
            return Err(IpsError::NetCapExceeded {
                label,
                got: candidates.len(),
                cap: NET_CARDINALITY_CAP,
            });
        }
        if !eta_bar.is_finite() || eta_bar <= 0.0 {
            return Err(IpsError::InvalidParameter("net radius must be positive".into()));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(IpsError::InvalidParameter("net weight must be non-negative".into()));
        }
        dim_bound.validate()?;
        Ok(Self { label, candidates, eta_bar, dim_bound, weight })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_radius(mut self, eta_bar: f64) -> Self {
        self.eta_bar = eta_bar;
        self
    }
}

/// Index set of a linear coefficient class: dyadic piecewise polynomials in
/// time, or piecewise-constant blocks of process indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearSpace {
    Time { depth: u32, degree: usize },
    Covariate { blocks: usize },
}

impl LinearSpace {
    /// Smallest-degree dyadic time space with `dim = 2^depth (degree + 1)`.
    pub fn time_of_dim(dim: usize) -> Result<Self> {
        for degree in 0..=MAX_TIME_DEGREE {
            let q = degree + 1;
            if dim % q == 0 && (dim / q).is_power_of_two() {
                return Ok(LinearSpace::Time { depth: (dim / q).trailing_zeros(), degree });
            }
        }
        Err(IpsError::InvalidParameter(format!(
            "no dyadic time space of dimension {dim} with degree <= {MAX_TIME_DEGREE}"
        )))
    }

    pub fn dim(&self, n: usize) -> Result<usize> {
        match *self {
            LinearSpace::Time { depth, degree } => {
                if degree > MAX_TIME_DEGREE {
                    return Err(IpsError::InvalidParameter(format!(
                        "polynomial degree is capped at {MAX_TIME_DEGREE}"
                    )));
                }
                if depth > MAX_TIME_DEPTH {
                    return Err(IpsError::InvalidParameter(format!(
                        "dyadic depth is capped at {MAX_TIME_DEPTH}"
                    )));
                }
                Ok((1usize << depth) * (degree + 1))
            }
            LinearSpace::Covariate { blocks } => {
                if blocks == 0 || blocks > n {
                    return Err(IpsError::InvalidParameter(format!(
                        "covariate blocks must lie in 1..={n}, got {blocks}"
                    )));
                }
                Ok(blocks)
            }
        }
    }

    fn axis_tag(&self) -> &'static str {
        match self {
            LinearSpace::Time { .. } => "t",
            LinearSpace::Covariate { .. } => "x",
        }
    }
}

fn unit_time_constant(domain: &TimeDomain) -> TimeCurve {
    TimeCurve::Constant(1.0 / domain.measure().sqrt())
}

fn time_factor(space: &LinearSpace, unit_coeffs: &[f64]) -> Result<TimeCurve> {
    match *space {
        LinearSpace::Time { depth, degree } => {
            Ok(TimeCurve::Poly(DyadicPoly::new(depth, degree, unit_coeffs.to_vec())?))
        }
        LinearSpace::Covariate { .. } => {
            Err(IpsError::InvalidParameter("expected a time space".into()))
        }
    }
}

fn cov_factor(space: &LinearSpace, unit_coeffs: &[f64], n: usize) -> Result<CovCurve> {
    match *space {
        LinearSpace::Covariate { blocks } => {
            if blocks == 1 {
                return Ok(CovCurve::Constant(unit_coeffs[0]));
            }
            let mut values = vec![0.0; n];
            for (j, c) in unit_coeffs.iter().enumerate() {
                let lo = j * n / blocks;
                let hi = (j + 1) * n / blocks;
                let scale = (n as f64 / (hi - lo) as f64).sqrt();
                for v in &mut values[lo..hi] {
                    *v = c * scale;
                }
            }
            Ok(CovCurve::PerIndex(values))
        }
        LinearSpace::Time { .. } => {
            Err(IpsError::InvalidParameter("expected a covariate space".into()))
        }
    }
}

fn member_from_coeffs(space: &LinearSpace, coeffs: &[f64], ctx: &EvalCtx) -> Result<SqrtFunction> {
    let kappa = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    if kappa == 0.0 {
        return Ok(SqrtFunction::Product {
            kappa: 0.0,
            time: unit_time_constant(ctx.domain),
            cov: CovCurve::Constant(1.0),
        });
    }
    let unit: Vec<f64> = coeffs.iter().map(|c| c / kappa).collect();
    Ok(match space {
        LinearSpace::Time { .. } => SqrtFunction::Product {
            kappa,
            time: time_factor(space, &unit)?,
            cov: CovCurve::Constant(1.0),
        },
        LinearSpace::Covariate { .. } => SqrtFunction::Product {
            kappa,
            time: unit_time_constant(ctx.domain),
            cov: cov_factor(space, &unit, ctx.n())?,
        },
    })
}

fn grid_1d(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    if hi - lo <= 0.0 {
        return vec![lo];
    }
    let steps = ((hi - lo) / spacing - 1e-9).ceil().max(1.0) as usize;
    (0..=steps).map(|j| lo + (hi - lo) * j as f64 / steps as f64).collect()
}

fn box_lattice(dim: usize, radius: f64, spacing: f64, label: &str) -> Result<Vec<Vec<f64>>> {
    let axis = grid_1d(0.0, radius, spacing);
    let total = (axis.len() as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if total > NET_CARDINALITY_CAP as u128 {
        return Err(IpsError::NetCapExceeded {
            label: label.to_string(),
            got: total.min(usize::MAX as u128) as usize,
            cap: NET_CARDINALITY_CAP,
        });
    }
    let mut points = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; dim];
    loop {
        points.push(idx.iter().map(|&j| axis[j]).collect());
        let mut d = 0;
        loop {
            if d == dim {
                return Ok(points);
            }
            idx[d] += 1;
            if idx[d] < axis.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

struct LatticeWalk {
    spacing: f64,
    kmax: i64,
    hi_sq: f64,
}

fn walk_lattice(
    walk: &LatticeWalk,
    dim: usize,
    point: &mut Vec<f64>,
    prefix_sq: f64,
    leaf: &mut dyn FnMut(&[f64], f64) -> Result<()>,
) -> Result<()> {
    if point.len() == dim {
        return leaf(point, prefix_sq);
    }
    for k in -walk.kmax..=walk.kmax {
        let v = k as f64 * walk.spacing;
        let s = prefix_sq + v * v;
        if s > walk.hi_sq + 1e-12 {
            continue;
        }
        point.push(v);
        walk_lattice(walk, dim, point, s, leaf)?;
        point.pop();
    }
    Ok(())
}

fn dedup_key(point: &[f64]) -> Vec<i64> {
    point.iter().map(|v| (v * DEDUP_SCALE).round() as i64).collect()
}

/// Unit-sphere net: lattice of spacing `delta / sqrt(dim)` intersected with
/// the shell `[1 - delta/2, 1 + delta/2]`, normalized and deduplicated. With
/// `half` only points whose first nonzero coordinate is positive survive.
fn sphere_net(dim: usize, delta: f64, half: bool, label: &str) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || !delta.is_finite() || delta <= 0.0 {
        return Err(IpsError::InvalidParameter("sphere net needs dim >= 1 and delta > 0".into()));
    }
    let spacing = delta / (dim as f64).sqrt();
    let hi = 1.0 + 0.5 * delta;
    let lo = (1.0 - 0.5 * delta).max(0.0);
    let walk = LatticeWalk { spacing, kmax: (hi / spacing).floor() as i64, hi_sq: hi * hi };
    let lo_sq = lo * lo;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut seen: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut point = Vec::with_capacity(dim);
    walk_lattice(&walk, dim, &mut point, 0.0, &mut |p, norm_sq| {
        if norm_sq < lo_sq - 1e-12 || norm_sq == 0.0 {
            return Ok(());
        }
        if half {
            match p.iter().find(|v| **v != 0.0) {
                Some(v) if *v > 0.0 => {}
                _ => return Ok(()),
            }
        }
        let norm = norm_sq.sqrt();
        let unit: Vec<f64> = p.iter().map(|v| v / norm).collect();
        if seen.insert(dedup_key(&unit)) {
            out.push(unit);
            if out.len() > NET_CARDINALITY_CAP {
                return Err(IpsError::NetCapExceeded {
                    label: label.to_string(),
                    got: out.len(),
                    cap: NET_CARDINALITY_CAP,
                });
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Lattice of the given spacing covering the centered ball, with outside
/// points clamped onto the boundary (clamping never increases distances to
/// targets inside the ball).
fn ball_lattice(dim: usize, radius: f64, spacing: f64, label: &str) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || !radius.is_finite() || radius <= 0.0 || !spacing.is_finite() || spacing <= 0.0 {
        return Err(IpsError::InvalidParameter(
            "ball lattice needs dim >= 1, radius > 0 and spacing > 0".into(),
        ));
    }
    let reach = radius + 0.5 * spacing * (dim as f64).sqrt();
    let walk = LatticeWalk { spacing, kmax: (reach / spacing).floor() as i64, hi_sq: reach * reach };
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut seen: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut point = Vec::with_capacity(dim);
    walk_lattice(&walk, dim, &mut point, 0.0, &mut |p, norm_sq| {
        let norm = norm_sq.sqrt();
        let clamped: Vec<f64> = if norm > radius {
            p.iter().map(|v| v * radius / norm).collect()
        } else {
            p.to_vec()
        };
        if seen.insert(dedup_key(&clamped)) {
            out.push(clamped);
            if out.len() > NET_CARDINALITY_CAP {
                return Err(IpsError::NetCapExceeded {
                    label: label.to_string(),
                    got: out.len(),
                    cap: NET_CARDINALITY_CAP,
                });
            }
        }
        Ok(())
    })?;
    Ok(out)
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

fn ring_count(kappa_max: f64, eta: f64) -> usize {
    ((SQRT_2 * kappa_max / eta) - 1e-9).ceil().max(1.0) as usize
}

/// Coefficient lattice over the box `[0, radius_box]^dim` of a linear space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearNetSpec {
    pub space: LinearSpace,
    /// Half-width of the coefficient box (per coordinate).
    pub radius_box: f64,
    /// Covering radius the lattice is built for.
    pub eta: f64,
}

pub fn build_linear_net(spec: &LinearNetSpec, ctx: &EvalCtx) -> Result<CandidateNet> {
    if !spec.radius_box.is_finite() || spec.radius_box <= 0.0 {
        return Err(IpsError::InvalidParameter("coefficient box radius must be positive".into()));
    }
    if !spec.eta.is_finite() || spec.eta <= 0.0 {
        return Err(IpsError::InvalidParameter("net radius must be positive".into()));
    }
    if matches!(spec.space, LinearSpace::Time { .. }) && ctx.domain.point_mass {
        return Err(IpsError::InvalidParameter("time polynomials need an interval domain".into()));
    }
    let dim = spec.space.dim(ctx.n())?;
    let spacing = spec.eta.min(2.0 * spec.eta / (dim as f64).sqrt());
    let label = format!("linear-{}{}-eta{}", spec.space.axis_tag(), dim, spec.eta);
    let points = box_lattice(dim, spec.radius_box, spacing, &label)?;
    let mut candidates = Vec::with_capacity(points.len());
    for p in &points {
        candidates.push(member_from_coeffs(&spec.space, p, ctx)?);
    }
    CandidateNet::new(label, candidates, spec.eta, DimensionBound::Constant(dim as f64), 0.0)
}

/// Uniform draw from the coefficient box of a linear class.
pub fn sample_linear_member<R: Rng + ?Sized>(
    spec: &LinearNetSpec,
    ctx: &EvalCtx,
    rng: &mut R,
) -> Result<SqrtFunction> {
    let dim = spec.space.dim(ctx.n())?;
    let coeffs: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * spec.radius_box).collect();
    member_from_coeffs(&spec.space, &coeffs, ctx)
}

/// Ring-of-spheres net for separable products `kappa f(t) h(x)` with
/// unit-norm factors and amplitude `kappa <= kappa_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductNetSpec {
    pub time_space: LinearSpace,
    pub cov_space: LinearSpace,
    pub eta: f64,
    /// Amplitude bound of the class; must be set explicitly.
    pub kappa_max: Option<f64>,
}

fn product_dims(spec: &ProductNetSpec, ctx: &EvalCtx) -> Result<(usize, usize)> {
    if !matches!(spec.time_space, LinearSpace::Time { .. }) {
        return Err(IpsError::InvalidParameter("time_space must be a Time space".into()));
    }
    if !matches!(spec.cov_space, LinearSpace::Covariate { .. }) {
        return Err(IpsError::InvalidParameter("cov_space must be a Covariate space".into()));
    }
    if ctx.domain.point_mass {
        return Err(IpsError::InvalidParameter("time polynomials need an interval domain".into()));
    }
    Ok((spec.time_space.dim(ctx.n())?, spec.cov_space.dim(ctx.n())?))
}

pub fn build_product_net(spec: &ProductNetSpec, ctx: &EvalCtx) -> Result<CandidateNet> {
    let kappa_max = spec.kappa_max.ok_or_else(|| {
        IpsError::InvalidParameter("product nets need an explicit amplitude bound kappa_max".into())
    })?;
    if !kappa_max.is_finite() || kappa_max <= 0.0 {
        return Err(IpsError::InvalidParameter("kappa_max must be positive".into()));
    }
    if !spec.eta.is_finite() || spec.eta <= 0.0 {
        return Err(IpsError::InvalidParameter("net radius must be positive".into()));
    }
    let (d1, d2) = product_dims(spec, ctx)?;
    let label = format!("product-t{}x{}-eta{}", d1, d2, spec.eta);
    let mut candidates = Vec::new();
    for k in 1..=ring_count(kappa_max, spec.eta) {
        let kappa = (k as f64 * spec.eta / SQRT_2).min(kappa_max);
        let delta = 1.0 / (SQRT_2 * k as f64);
        let tpoints = sphere_net(d1, delta, true, &label)?;
        let xpoints = sphere_net(d2, delta, false, &label)?;
        let add = tpoints.len().checked_mul(xpoints.len()).unwrap_or(usize::MAX);
        if candidates.len().saturating_add(add) > NET_CARDINALITY_CAP {
            return Err(IpsError::NetCapExceeded {
                label,
                got: candidates.len().saturating_add(add),
                cap: NET_CARDINALITY_CAP,
            });
        }
        for tc in &tpoints {
            for xc in &xpoints {
                candidates.push(SqrtFunction::Product {
                    kappa,
                    time: time_factor(&spec.time_space, tc)?,
                    cov: cov_factor(&spec.cov_space, xc, ctx.n())?,
                });
            }
        }
    }
    let dim_bound = DimensionBound::Constant(1.4 * (d1 + d2 + 1) as f64);
    CandidateNet::new(label, candidates, spec.eta, dim_bound, 0.0)
}

/// Random member of the product class: uniform amplitude in `(0, kappa_max]`
/// and independent uniform unit factors.
pub fn sample_product_member<R: Rng + ?Sized>(
    spec: &ProductNetSpec,
    ctx: &EvalCtx,
    rng: &mut R,
) -> Result<SqrtFunction> {
    let kappa_max = spec.kappa_max.ok_or_else(|| {
        IpsError::InvalidParameter("product nets need an explicit amplitude bound kappa_max".into())
    })?;
    let (d1, d2) = product_dims(spec, ctx)?;
    let kappa = (1.0 - rng.gen::<f64>()) * kappa_max;
    let t = random_unit(d1, rng);
    let x = random_unit(d2, rng);
    Ok(SqrtFunction::Product {
        kappa,
        time: time_factor(&spec.time_space, &t)?,
        cov: cov_factor(&spec.cov_space, &x, ctx.n())?,
    })
}

/// Parameter grid for the log-linear reliability class
/// `a u_b(t) e^{<theta, x>} / ||e^{<theta, .>}||` with `b` in `b_range`,
/// `theta` supported on the given coordinates inside the `rho_theta`-ball,
/// and amplitude `a <= a_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxNetSpec {
    pub profile: LipschitzProfile,
    pub b_range: (f64, f64),
    /// Strictly increasing covariate coordinates carrying `theta`.
    pub support: Vec<usize>,
    pub rho_theta: f64,
    pub a_max: f64,
    pub eta: f64,
}

impl CoxNetSpec {
    fn checked(&self, ctx: &EvalCtx) -> Result<()> {
        self.profile.validate_range(self.b_range.0, self.b_range.1)?;
        if !self.a_max.is_finite() || self.a_max <= 0.0 {
            return Err(IpsError::InvalidParameter("a_max must be positive".into()));
        }
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(IpsError::InvalidParameter("net radius must be positive".into()));
        }
        if self.support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IpsError::InvalidParameter(
                "support indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = self.support.last() {
            if last >= ctx.covariates.dim() {
                return Err(IpsError::InvalidParameter(format!(
                    "support index {last} outside covariate dimension {}",
                    ctx.covariates.dim()
                )));
            }
        }
        if !self.support.is_empty() {
            if !self.rho_theta.is_finite() || self.rho_theta <= 0.0 {
                return Err(IpsError::InvalidParameter("rho_theta must be positive".into()));
            }
            if !ctx.covariates.in_unit_ball() {
                return Err(IpsError::InvalidParameter(
                    "covariates must lie in the unit ball for a log-linear lattice".into(),
                ));
            }
        }
        Ok(())
    }
}

fn cox_time_factor(profile: &LipschitzProfile, b: f64, domain: &TimeDomain) -> Result<TimeLaw> {
    let base = match profile.family {
        ProfileFamily::Power => TimeLaw::Power { scale: 1.0, exponent: b },
        ProfileFamily::ExpFamily { k } => TimeLaw::ExpDecay { scale: 1.0, rate: b, half_power: k },
    };
    base.normalized(domain.t_min, domain.t_max)
}

fn cox_candidate(
    spec: &CoxNetSpec,
    amplitude: f64,
    b: f64,
    theta_sub: &[f64],
    ctx: &EvalCtx,
) -> Result<SqrtFunction> {
    let mut theta = vec![0.0; ctx.covariates.dim()];
    for (slot, v) in spec.support.iter().zip(theta_sub) {
        theta[*slot] = *v;
    }
    let n = ctx.n();
    let norm_sq =
        (0..n).map(|i| (2.0 * ctx.covariates.dot(i, &theta)).exp()).sum::<f64>() / n as f64;
    let law = cox_time_factor(&spec.profile, b, ctx.domain)?;
    let scale = amplitude / norm_sq.sqrt();
    Ok(SqrtFunction::ProductExp { law: law.with_scale(law.scale() * scale), theta })
}

pub fn build_cox_net(spec: &CoxNetSpec, ctx: &EvalCtx) -> Result<CandidateNet> {
    spec.checked(ctx)?;
    let (r, big_r) = spec.b_range;
    let m = spec.support.len();
    let family_tag = match spec.profile.family {
        ProfileFamily::Power => "pow".to_string(),
        ProfileFamily::ExpFamily { k } => format!("exp{k}"),
    };
    let support_tag = if spec.support.is_empty() {
        "none".to_string()
    } else {
        spec.support.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("_")
    };
    let label = format!("cox-{family_tag}-m{support_tag}-eta{}", spec.eta);
    let mut candidates = Vec::new();
    for k in 1..=ring_count(spec.a_max, spec.eta) {
        let amplitude = (k as f64 * spec.eta / SQRT_2).min(spec.a_max);
        let delta = 1.0 / (SQRT_2 * k as f64);
        let budget = delta / SQRT_2;
        let b_grid = grid_1d(r, big_r, 2.0 * budget / spec.profile.rho_upper(r));
        let theta_grid: Vec<Vec<f64>> = if m == 0 {
            vec![Vec::new()]
        } else {
            let s = budget * (-3.0 * spec.rho_theta).exp() / (m as f64).sqrt();
            ball_lattice(m, spec.rho_theta, s, &label)?
        };
        let add = b_grid.len().checked_mul(theta_grid.len()).unwrap_or(usize::MAX);
        if candidates.len().saturating_add(add) > NET_CARDINALITY_CAP {
            return Err(IpsError::NetCapExceeded {
                label,
                got: candidates.len().saturating_add(add),
                cap: NET_CARDINALITY_CAP,
            });
        }
        for b in &b_grid {
            for th in &theta_grid {
                candidates.push(cox_candidate(spec, amplitude, *b, th, ctx)?);
            }
        }
    }
    let count = candidates.len();
    let shape = 1.0
        + spec.rho_theta * m as f64
        + (1.0 + spec.profile.rho_upper(r) / spec.profile.rho_lower(big_r)).ln();
    let dim_value = shape.max(0.5).max((count as f64).ln() / 4.0);
    let weight = 1.0 + m as f64 + ln_binomial(ctx.covariates.dim(), m);
    CandidateNet::new(label, candidates, spec.eta, DimensionBound::Constant(dim_value), weight)
}

/// Random member of the log-linear class: uniform amplitude and rate,
/// `theta` uniform in the supported ball.
pub fn sample_cox_member<R: Rng + ?Sized>(
    spec: &CoxNetSpec,
    ctx: &EvalCtx,
    rng: &mut R,
) -> Result<SqrtFunction> {
    spec.checked(ctx)?;
    let (r, big_r) = spec.b_range;
    let amplitude = (1.0 - rng.gen::<f64>()) * spec.a_max;
    let b = rng.gen_range(r..=big_r);
    let m = spec.support.len();
    let theta_sub: Vec<f64> = if m == 0 {
        Vec::new()
    } else {
        let radius = spec.rho_theta * rng.gen::<f64>().powf(1.0 / m as f64);
        random_unit(m, rng).into_iter().map(|v| v * radius).collect()
    };
    cox_candidate(spec, amplitude, b, &theta_sub, ctx)
}

/// Complexity weight of a truncated parameter box `(r, R, rho)` inside an
/// exhaustion by boxes: `Delta_W + ln(2 R^2) + ln(2 r^2) + ln(2 rho^2)`.
pub fn cox_exhaustion_weight(delta_w: f64, r: f64, big_r: f64, rho: f64) -> f64 {
    delta_w + (2.0 * big_r * big_r).ln() + (2.0 * r * r).ln() + (2.0 * rho * rho).ln()
}

/// Change-point collection: one net per interval partition of the process
/// indices (at most `max_segments` segments), each net holding every
/// per-segment assignment of the given laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointSpec {
    /// Per-segment law grid, ordered so consecutive entries are metric
    /// neighbours (row-major for parameter lattices).
    pub laws: Vec<TimeLaw>,
    pub max_segments: usize,
}

fn changepoint_radius(spec: &ChangepointSpec, ctx: &EvalCtx) -> Result<f64> {
    let mut worst = 0.0_f64;
    for pair in spec.laws.windows(2) {
        worst = worst.max(law_pair_dist_sq(&pair[0], &pair[1], ctx)?);
    }
    let eta = worst.sqrt();
    Ok(if eta > 0.0 { eta } else { 1e-12 })
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k > m {
        return Vec::new();
    }
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        while i > 0 && c[i - 1] == m - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        c[i - 1] += 1;
        for d in i..k {
            c[d] = c[d - 1] + 1;
        }
    }
}

pub fn build_changepoint_collection(
    spec: &ChangepointSpec,
    ctx: &EvalCtx,
) -> Result<Vec<CandidateNet>> {
    let n = ctx.n();
    let g = spec.laws.len();
    if g == 0 {
        return Err(IpsError::DegenerateInput("need at least one segment law".into()));
    }
    for law in &spec.laws {
        law.validate()?;
    }
    if spec.max_segments == 0 || spec.max_segments > n {
        return Err(IpsError::InvalidParameter(format!(
            "max_segments must lie in 1..={n}, got {}",
            spec.max_segments
        )));
    }
    let mut total: u128 = 0;
    for j in 1..=spec.max_segments {
        let per = (g as u128).checked_pow(j as u32).unwrap_or(u128::MAX);
        total = total.saturating_add(binomial_u128(n - 1, j - 1).saturating_mul(per));
    }
    if total > COLLECTION_CANDIDATE_CAP as u128 {
        return Err(IpsError::CandidateCapExceeded {
            got: total.min(usize::MAX as u128) as usize,
            cap: COLLECTION_CANDIDATE_CAP,
        });
    }

    let eta_bar = changepoint_radius(spec, ctx)?;
    let mut nets = Vec::new();
    for j in 1..=spec.max_segments {
        let weight = j as f64 + ln_binomial(n - 1, j - 1);
        let dim = DimensionBound::Constant((j as f64 * (g as f64).ln() / 4.0).max(0.5));
        for breaks in combinations(n - 1, j - 1) {
            let mut starts = Vec::with_capacity(j);
            starts.push(0);
            starts.extend(breaks.iter().map(|b| b + 1));
            let partition = Partition::new(starts, n)?;
            let label = format!(
                "cp-{}",
                partition.starts().iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
            );
            let mut candidates = Vec::new();
            let mut assign = vec![0usize; j];
            'assignments: loop {
                candidates.push(SqrtFunction::PiecewiseLaw {
                    partition: partition.clone(),
                    laws: assign.iter().map(|&a| spec.laws[a].clone()).collect(),
                });
                let mut d = j;
                while d > 0 {
                    d -= 1;
                    assign[d] += 1;
                    if assign[d] < g {
                        continue 'assignments;
                    }
                    assign[d] = 0;
                }
                break;
            }
            nets.push(CandidateNet::new(label, candidates, eta_bar, dim.clone(), weight)?);
        }
    }
    Ok(nets)
}

/// Random member of a change-point class over a fixed partition: each
/// segment interpolates between a random adjacent pair of grid laws.
pub fn sample_changepoint_member<R: Rng + ?Sized>(
    spec: &ChangepointSpec,
    partition: &Partition,
    rng: &mut R,
) -> Result<SqrtFunction> {
    let g = spec.laws.len();
    if g == 0 {
        return Err(IpsError::DegenerateInput("need at least one segment law".into()));
    }
    let laws = (0..partition.num_segments())
        .map(|_| {
            if g == 1 {
                spec.laws[0].clone()
            } else {
                let i = rng.gen_range(0..g - 1);
                interpolate_law(&spec.laws[i], &spec.laws[i + 1], rng.gen::<f64>())
            }
        })
        .collect();
    Ok(SqrtFunction::PiecewiseLaw { partition: partition.clone(), laws })
}

fn interpolate_law(a: &TimeLaw, b: &TimeLaw, lambda: f64) -> TimeLaw {
    let lerp = |x: f64, y: f64| x + lambda * (y - x);
    match (a, b) {
        (
            TimeLaw::Power { scale: s0, exponent: e0 },
            TimeLaw::Power { scale: s1, exponent: e1 },
        ) => TimeLaw::Power { scale: lerp(*s0, *s1), exponent: lerp(*e0, *e1) },
        (
            TimeLaw::ExpDecay { scale: s0, rate: r0, half_power: k0 },
            TimeLaw::ExpDecay { scale: s1, rate: r1, half_power: k1 },
        ) if k0 == k1 => {
            TimeLaw::ExpDecay { scale: lerp(*s0, *s1), rate: lerp(*r0, *r1), half_power: *k0 }
        }
        _ => {
            if lambda < 0.5 {
                a.clone()
            } else {
                b.clone()
            }
        }
    }
}

/// Result of an empirical covering check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringReport {
    pub samples: usize,
    pub worst_dist: f64,
    pub eta_bar: f64,
    pub ok: bool,
}

/// Check that every probe member lies within `eta_bar` of some candidate.
pub fn certify_covering(
    net: &CandidateNet,
    members: &[SqrtFunction],
    ctx: &EvalCtx,
) -> Result<CoveringReport> {
    if members.is_empty() {
        return Err(IpsError::DegenerateInput("need at least one probe member".into()));
    }
    let mut worst = 0.0_f64;
    for member in members {
        let mut best = f64::INFINITY;
        for cand in &net.candidates {
            let d = l2_dist_joint(member, cand, ctx)?;
            if d < best {
                best = d;
            }
        }
        worst = worst.max(best);
    }
    Ok(CoveringReport {
        samples: members.len(),
        worst_dist: worst,
        eta_bar: net.eta_bar,
        ok: worst <= net.eta_bar * (1.0 + 1e-9),
    })
}

/// Result of an empirical local-cardinality check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CardinalityReport {
    pub centers: usize,
    pub worst_count: usize,
    pub bound: f64,
    pub ok: bool,
}

/// Check the local cardinality claim at `x = 2`: balls of radius
/// `2 eta_bar` around the given centers hold at most `exp(4 D(eta_bar))`
/// candidates.
pub fn certify_cardinality(
    net: &CandidateNet,
    centers: &[SqrtFunction],
    ctx: &EvalCtx,
) -> Result<CardinalityReport> {
    if centers.is_empty() {
        return Err(IpsError::DegenerateInput("need at least one center".into()));
    }
    let expo = 4.0 * net.dim_bound.at(net.eta_bar);
    let bound = if expo > 700.0 { f64::INFINITY } else { expo.exp() };
    let radius = 2.0 * net.eta_bar * (1.0 + 1e-12);
    let mut worst = 0usize;
    for center in centers {
        let mut count = 0usize;
        for cand in &net.candidates {
            if l2_dist_joint(center, cand, ctx)? <= radius {
                count += 1;
            }
        }
        worst = worst.max(count);
    }
    Ok(CardinalityReport { centers: centers.len(), worst_count: worst, bound, ok: (worst as f64) <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::CovariateSet;
    use crate::quadrature::QuadratureRule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_fixture(n: usize) -> (TimeDomain, CovariateSet, QuadratureRule) {
        let domain = TimeDomain::unit();
        let covariates = CovariateSet::unit_grid_1d(n).unwrap();
        let quad = QuadratureRule::for_domain(&domain).unwrap();
        (domain, covariates, quad)
    }

    fn open_fixture(n: usize) -> (TimeDomain, CovariateSet, QuadratureRule) {
        let domain = TimeDomain::open_unit();
        let covariates = CovariateSet::unit_grid_1d(n).unwrap();
        let quad = QuadratureRule::for_domain(&domain).unwrap();
        (domain, covariates, quad)
    }

    #[test]
    fn linear_lattice_matches_pinned_kappas() {
        let (domain, covariates, quad) = unit_fixture(3);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = LinearNetSpec {
            space: LinearSpace::Time { depth: 0, degree: 0 },
            radius_box: 1.0,
            eta: 0.25,
        };
        let net = build_linear_net(&spec, &ctx).unwrap();
        assert_eq!(net.len(), 5);
        let mut kappas: Vec<f64> = net
            .candidates
            .iter()
            .map(|c| match c {
                SqrtFunction::Product { kappa, .. } => *kappa,
                other => panic!("expected product members, got {other:?}"),
            })
            .collect();
        kappas.sort_by(f64::total_cmp);
        for (got, want) in kappas.iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
            assert!((got - want).abs() < 1e-12, "kappa {got} != {want}");
        }
        assert!(net.label.starts_with("linear-t1-"));
        assert_eq!(net.dim_bound, DimensionBound::Constant(1.0));
        assert_eq!(net.weight, 0.0);
    }

    #[test]
    fn linear_nets_cover_random_members() {
        let (domain, covariates, quad) = unit_fixture(6);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        let time_spec = LinearNetSpec {
            space: LinearSpace::Time { depth: 1, degree: 1 },
            radius_box: 1.0,
            eta: 0.6,
        };
        let net = build_linear_net(&time_spec, &ctx).unwrap();
        assert_eq!(net.len(), 81);
        let members: Vec<SqrtFunction> = (0..200)
            .map(|_| sample_linear_member(&time_spec, &ctx, &mut rng).unwrap())
            .collect();
        let report = certify_covering(&net, &members, &ctx).unwrap();
        assert!(report.ok, "worst {} exceeds radius {}", report.worst_dist, report.eta_bar);

        let cov_spec = LinearNetSpec {
            space: LinearSpace::Covariate { blocks: 2 },
            radius_box: 1.0,
            eta: 0.8,
        };
        let net = build_linear_net(&cov_spec, &ctx).unwrap();
        assert_eq!(net.len(), 9);
        let members: Vec<SqrtFunction> = (0..100)
            .map(|_| sample_linear_member(&cov_spec, &ctx, &mut rng).unwrap())
            .collect();
        let report = certify_covering(&net, &members, &ctx).unwrap();
        assert!(report.ok, "worst {} exceeds radius {}", report.worst_dist, report.eta_bar);
    }

    #[test]
    fn linear_net_rejects_oversized_lattice() {
        let (domain, covariates, quad) = unit_fixture(3);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = LinearNetSpec {
            space: LinearSpace::Time { depth: 2, degree: 0 },
            radius_box: 1.0,
            eta: 1e-3,
        };
        match build_linear_net(&spec, &ctx) {
            Err(IpsError::NetCapExceeded { cap, .. }) => assert_eq!(cap, NET_CARDINALITY_CAP),
            other => panic!("expected NetCapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn time_space_factors_dimension() {
        assert_eq!(
            LinearSpace::time_of_dim(1).unwrap(),
            LinearSpace::Time { depth: 0, degree: 0 }
        );
        assert_eq!(
            LinearSpace::time_of_dim(2).unwrap(),
            LinearSpace::Time { depth: 1, degree: 0 }
        );
        assert_eq!(
            LinearSpace::time_of_dim(3).unwrap(),
            LinearSpace::Time { depth: 0, degree: 2 }
        );
        assert_eq!(
            LinearSpace::time_of_dim(4).unwrap(),
            LinearSpace::Time { depth: 2, degree: 0 }
        );
        assert_eq!(
            LinearSpace::time_of_dim(12).unwrap(),
            LinearSpace::Time { depth: 2, degree: 2 }
        );
        assert!(LinearSpace::time_of_dim(5).is_err());
        assert!(LinearSpace::time_of_dim(0).is_err());
    }

    #[test]
    fn product_net_shape_and_determinism() {
        let (domain, covariates, quad) = unit_fixture(6);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = ProductNetSpec {
            time_space: LinearSpace::Time { depth: 1, degree: 0 },
            cov_space: LinearSpace::Covariate { blocks: 3 },
            eta: 0.8,
            kappa_max: Some(1.0),
        };
        let net = build_product_net(&spec, &ctx).unwrap();
        assert_eq!(net.label, "product-t2x3-eta0.8");
        match net.dim_bound {
            DimensionBound::Constant(v) => assert!((v - 8.4).abs() < 1e-12),
            ref other => panic!("expected constant bound, got {other:?}"),
        }
        let mut kappas: Vec<f64> = net
            .candidates
            .iter()
            .map(|c| match c {
                SqrtFunction::Product { kappa, .. } => *kappa,
                other => panic!("expected product members, got {other:?}"),
            })
            .collect();
        kappas.sort_by(f64::total_cmp);
        kappas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(kappas.len(), 2);
        assert!((kappas[0] - 0.8 / SQRT_2).abs() < 1e-12);
        assert!((kappas[1] - 1.0).abs() < 1e-12);

        let again = build_product_net(&spec, &ctx).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn product_net_degenerate_single_ring() {
        let (domain, covariates, quad) = unit_fixture(3);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = ProductNetSpec {
            time_space: LinearSpace::Time { depth: 0, degree: 0 },
            cov_space: LinearSpace::Covariate { blocks: 1 },
            eta: 2.0,
            kappa_max: Some(1.0),
        };
        let net = build_product_net(&spec, &ctx).unwrap();
        assert_eq!(net.len(), 2);
        let mut cov_values = Vec::new();
        for cand in &net.candidates {
            match cand {
                SqrtFunction::Product { kappa, time: TimeCurve::Poly(p), cov: CovCurve::Constant(c) } => {
                    assert!((kappa - 1.0).abs() < 1e-12);
                    assert_eq!(p.coeffs(), &[1.0]);
                    cov_values.push(*c);
                }
                other => panic!("unexpected candidate {other:?}"),
            }
        }
        cov_values.sort_by(f64::total_cmp);
        assert!((cov_values[0] + 1.0).abs() < 1e-12 && (cov_values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_net_covers_random_members() {
        let (domain, covariates, quad) = unit_fixture(4);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = ProductNetSpec {
            time_space: LinearSpace::Time { depth: 1, degree: 0 },
            cov_space: LinearSpace::Covariate { blocks: 2 },
            eta: 0.8,
            kappa_max: Some(1.0),
        };
        let net = build_product_net(&spec, &ctx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let members: Vec<SqrtFunction> = (0..150)
            .map(|_| sample_product_member(&spec, &ctx, &mut rng).unwrap())
            .collect();
        let report = certify_covering(&net, &members, &ctx).unwrap();
        assert!(report.ok, "worst {} exceeds radius {}", report.worst_dist, report.eta_bar);
    }

    #[test]
    fn product_net_requires_amplitude_bound() {
        let (domain, covariates, quad) = unit_fixture(4);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = ProductNetSpec {
            time_space: LinearSpace::Time { depth: 0, degree: 0 },
            cov_space: LinearSpace::Covariate { blocks: 1 },
            eta: 0.5,
            kappa_max: None,
        };
        assert!(matches!(build_product_net(&spec, &ctx), Err(IpsError::InvalidParameter(_))));
    }

    #[test]
    fn cox_net_weight_counts_support_choices() {
        let domain = TimeDomain::open_unit();
        let covariates =
            CovariateSet::new(vec![vec![0.1, 0.05, -0.02, 0.0, 0.08]; 4]).unwrap();
        let quad = QuadratureRule::for_domain(&domain).unwrap();
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = CoxNetSpec {
            profile: LipschitzProfile::powerlaw(),
            b_range: (0.5, 1.5),
            support: vec![0, 2],
            rho_theta: 0.5,
            a_max: 1.0,
            eta: 1.0,
        };
        let net = build_cox_net(&spec, &ctx).unwrap();
        assert!((net.weight - 5.302585092994046).abs() < 1e-12);
        assert!(net.label.starts_with("cox-pow-m0_2-"));
    }

    #[test]
    fn cox_net_without_support_fixes_theta_at_zero() {
        let (domain, covariates, quad) = open_fixture(5);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = CoxNetSpec {
            profile: LipschitzProfile::powerlaw(),
            b_range: (0.5, 1.5),
            support: Vec::new(),
            rho_theta: 0.0,
            a_max: 1.0,
            eta: 0.9,
        };
        let net = build_cox_net(&spec, &ctx).unwrap();
        assert!((net.weight - 1.0).abs() < 1e-12);
        for cand in &net.candidates {
            match cand {
                SqrtFunction::ProductExp { theta, .. } => {
                    assert!(theta.iter().all(|v| *v == 0.0));
                }
                other => panic!("expected log-linear members, got {other:?}"),
            }
        }
    }

    #[test]
    fn cox_net_covers_random_members() {
        let (domain, covariates, quad) = open_fixture(5);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = CoxNetSpec {
            profile: LipschitzProfile::powerlaw(),
            b_range: (0.5, 1.5),
            support: vec![0],
            rho_theta: 0.3,
            a_max: 1.0,
            eta: 0.9,
        };
        let net = build_cox_net(&spec, &ctx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let members: Vec<SqrtFunction> = (0..100)
            .map(|_| sample_cox_member(&spec, &ctx, &mut rng).unwrap())
            .collect();
        let report = certify_covering(&net, &members, &ctx).unwrap();
        assert!(report.ok, "worst {} exceeds radius {}", report.worst_dist, report.eta_bar);
    }

    #[test]
    fn cox_net_requires_unit_ball_covariates() {
        let domain = TimeDomain::open_unit();
        let covariates = CovariateSet::new(vec![vec![2.0]; 3]).unwrap();
        let quad = QuadratureRule::for_domain(&domain).unwrap();
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = CoxNetSpec {
            profile: LipschitzProfile::powerlaw(),
            b_range: (0.5, 1.5),
            support: vec![0],
            rho_theta: 0.3,
            a_max: 1.0,
            eta: 0.9,
        };
        assert!(matches!(build_cox_net(&spec, &ctx), Err(IpsError::InvalidParameter(_))));
    }

    #[test]
    fn changepoint_collection_enumerates_partitions() {
        let (domain, covariates, quad) = open_fixture(4);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let profile = LipschitzProfile::powerlaw();
        let spec = ChangepointSpec {
            laws: vec![profile.member(0.5).unwrap(), profile.member(1.0).unwrap()],
            max_segments: 4,
        };
        let nets = build_changepoint_collection(&spec, &ctx).unwrap();
        assert_eq!(nets.len(), 8);
        assert_eq!(nets[0].label, "cp-0");
        assert!((nets[0].weight - 1.0).abs() < 1e-12);
        assert_eq!(nets[0].len(), 2);
        assert!((nets[1].weight - (2.0 + 3.0_f64.ln())).abs() < 1e-12);
        let mass: f64 = nets.iter().map(|v| (-v.weight).exp()).sum();
        assert!(mass <= 1.0, "weight mass {mass} exceeds 1");
        for net in &nets {
            let segments = match &net.candidates[0] {
                SqrtFunction::PiecewiseLaw { partition, .. } => partition.num_segments(),
                other => panic!("expected piecewise members, got {other:?}"),
            };
            assert_eq!(net.len(), 2usize.pow(segments as u32));
            assert!((net.eta_bar - nets[0].eta_bar).abs() < 1e-15);
        }

        let expected = law_pair_dist_sq(&spec.laws[0], &spec.laws[1], &ctx).unwrap().sqrt();
        assert!((nets[0].eta_bar - expected).abs() < 1e-12);

        let target = nets.iter().find(|net| net.label == "cp-0-2").unwrap();
        let partition = match &target.candidates[0] {
            SqrtFunction::PiecewiseLaw { partition, .. } => partition.clone(),
            other => panic!("expected piecewise members, got {other:?}"),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let members: Vec<SqrtFunction> = (0..50)
            .map(|_| sample_changepoint_member(&spec, &partition, &mut rng).unwrap())
            .collect();
        let report = certify_covering(target, &members, &ctx).unwrap();
        assert!(report.ok, "worst {} exceeds radius {}", report.worst_dist, report.eta_bar);
    }

    #[test]
    fn changepoint_weight_matches_binomial_count() {
        let (domain, covariates, quad) = open_fixture(5);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let profile = LipschitzProfile::powerlaw();
        let spec = ChangepointSpec {
            laws: vec![profile.member(0.5).unwrap(), profile.member(1.0).unwrap()],
            max_segments: 2,
        };
        let nets = build_changepoint_collection(&spec, &ctx).unwrap();
        assert_eq!(nets.len(), 5);
        assert!((nets[1].weight - 3.386294361119891).abs() < 1e-12);
    }

    #[test]
    fn changepoint_collection_respects_candidate_cap() {
        let (domain, covariates, quad) = open_fixture(40);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let profile = LipschitzProfile::powerlaw();
        let spec = ChangepointSpec {
            laws: vec![
                profile.member(0.5).unwrap(),
                profile.member(0.75).unwrap(),
                profile.member(1.0).unwrap(),
            ],
            max_segments: 12,
        };
        match build_changepoint_collection(&spec, &ctx) {
            Err(IpsError::CandidateCapExceeded { cap, .. }) => {
                assert_eq!(cap, COLLECTION_CANDIDATE_CAP)
            }
            other => panic!("expected CandidateCapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn eta_solver_matches_closed_forms() {
        let eta = eta_solver(&DimensionBound::Constant(2.0), 100).unwrap();
        assert!((eta * eta - 0.02).abs() < 1e-15);
        assert!(2.0 <= 100.0 * eta * eta * (1.0 + 1e-12));
        let eta = eta_solver(&DimensionBound::Constant(0.5), 50).unwrap();
        assert!((eta * eta - 0.01).abs() < 1e-15);

        let lf = DimensionBound::LogForm { alpha: 1.0, beta: 1.0 };
        let closed = eta_solver(&lf, 100).unwrap();
        assert!((closed - 0.22352726393382671).abs() < 1e-9);
        let bisected = eta_solver_bisect(|e| lf.at(e), 100).unwrap();
        assert!((closed - bisected).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let alpha = 0.2 + 2.0 * rng.gen::<f64>();
            let beta = 0.1 + rng.gen::<f64>();
            let n = rng.gen_range(30..2000);
            let lf = DimensionBound::LogForm { alpha, beta };
            let closed = eta_solver(&lf, n).unwrap();
            let bisected = eta_solver_bisect(|e| lf.at(e), n).unwrap();
            assert!(
                (closed - bisected).abs() < 1e-9 * (1.0 + closed),
                "alpha {alpha} beta {beta} n {n}: {closed} vs {bisected}"
            );
            assert!(lf.at(closed) <= n as f64 * closed * closed * (1.0 + 1e-12));
        }

        let rb = DimensionBound::Robust {
            k: 1.0,
            r: vec![1.0, 0.5],
            alpha: vec![1.0, 0.5],
            rho: vec![2.0, 3.0],
            dims: vec![2, 1],
        };
        let eta = eta_solver(&rb, 200).unwrap();
        assert!(rb.at(eta) <= 200.0 * eta * eta * (1.0 + 1e-12));
        let shrunk = eta * (1.0 - 1e-6);
        assert!(rb.at(shrunk) > 200.0 * shrunk * shrunk);
    }

    #[test]
    fn radius_from_weight_matches_examples() {
        let calibrated = TestConstants::calibrated();
        let r = radius_from_weight(0.1, 1.0, 100, &calibrated).unwrap();
        assert!((r - 2.300434741521698).abs() < 1e-12);
        let r0 = radius_from_weight(0.1, 0.0, 100, &calibrated).unwrap();
        assert!((r0 - 2.300434741521698).abs() < 1e-12);
        let heavy = radius_from_weight(0.1, 300.0, 100, &calibrated).unwrap();
        assert!((heavy - 126.0_f64.sqrt()).abs() < 1e-12);

        let paper = TestConstants::paper_faithful();
        assert!(radius_from_weight(0.1, 1.0, 100, &paper).unwrap() > r);
        assert!(radius_from_weight(0.2, 1.0, 100, &calibrated).unwrap() > r);
        assert!(radius_from_weight(0.1, 0.0, 0, &calibrated).is_err());
    }

    #[test]
    fn robust_dimension_matches_examples() {
        let v = robust_dimension(2.0, 1.0, &[1.0], &[1.0], &[1.0], &[1]).unwrap();
        assert_eq!(v, 0.5);
        let v = robust_dimension(0.1, 1.0, &[1.0], &[0.5], &[3.0], &[2]).unwrap();
        assert!((v - 3.199297467267604).abs() < 1e-12);

        let mut last = f64::INFINITY;
        for eta in [0.05, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let v = robust_dimension(eta, 1.0, &[1.0, 2.0], &[1.0, 0.7], &[1.0, 2.0], &[1, 3])
                .unwrap();
            assert!(v <= last);
            last = v;
        }

        assert!(robust_dimension(0.0, 1.0, &[1.0], &[1.0], &[1.0], &[1]).is_err());
        assert!(robust_dimension(1.0, 0.0, &[1.0], &[1.0], &[1.0], &[1]).is_err());
        assert!(robust_dimension(1.0, 1.0, &[1.0, 2.0], &[1.0], &[1.0], &[1]).is_err());
        assert!(robust_dimension(1.0, 1.0, &[1.0], &[1.0], &[-1.0], &[1]).is_err());
    }

    #[test]
    fn exhaustion_weights_stay_summable() {
        assert!((cox_exhaustion_weight(1.0, 1.0, 1.0, 1.0) - 3.0794415416798357).abs() < 1e-12);
        let mut mass = 0.0;
        for j in 1..=30 {
            for r in 1..=20 {
                for big_r in 1..=20 {
                    for rho in 1..=20 {
                        mass += (-cox_exhaustion_weight(
                            j as f64,
                            r as f64,
                            big_r as f64,
                            rho as f64,
                        ))
                        .exp();
                    }
                }
            }
        }
        assert!(mass <= 1.0, "exhaustion mass {mass} exceeds 1");
    }

    #[test]
    fn candidate_net_roundtrips_and_validates() {
        let (domain, covariates, quad) = unit_fixture(3);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = LinearNetSpec {
            space: LinearSpace::Time { depth: 0, degree: 1 },
            radius_box: 1.0,
            eta: 0.5,
        };
        let net = build_linear_net(&spec, &ctx).unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: CandidateNet = serde_json::from_str(&json).unwrap();
        assert_eq!(net, back);

        assert!(CandidateNet::new("empty", Vec::new(), 1.0, DimensionBound::Constant(1.0), 0.0)
            .is_err());
        let one = net.candidates[0].clone();
        assert!(
            CandidateNet::new("bad", vec![one.clone()], 0.0, DimensionBound::Constant(1.0), 0.0)
                .is_err()
        );
        assert!(
            CandidateNet::new("bad", vec![one.clone()], 1.0, DimensionBound::Constant(1.0), -1.0)
                .is_err()
        );
        assert!(
            CandidateNet::new("bad", vec![one], 1.0, DimensionBound::Constant(0.0), 0.0).is_err()
        );
    }

    #[test]
    fn cardinality_stays_below_declared_bound() {
        let (domain, covariates, quad) = unit_fixture(4);
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let spec = LinearNetSpec {
            space: LinearSpace::Time { depth: 0, degree: 0 },
            radius_box: 1.0,
            eta: 0.25,
        };
        let net = build_linear_net(&spec, &ctx).unwrap();
        let centers: Vec<SqrtFunction> = net.candidates.iter().take(3).cloned().collect();
        let report = certify_cardinality(&net, &centers, &ctx).unwrap();
        assert!(report.ok, "count {} exceeds bound {}", report.worst_count, report.bound);
        assert!(report.worst_count >= 1);

        let pspec = ProductNetSpec {
            time_space: LinearSpace::Time { depth: 1, degree: 0 },
            cov_space: LinearSpace::Covariate { blocks: 2 },
            eta: 0.8,
            kappa_max: Some(1.0),
        };
        let pnet = build_product_net(&pspec, &ctx).unwrap();
        let centers: Vec<SqrtFunction> = pnet.candidates.iter().take(5).cloned().collect();
        let report = certify_cardinality(&pnet, &centers, &ctx).unwrap();
        assert!(report.ok);
    }
}
