//! Self-checking verification suites: closed-form identities against
//! independent quadrature, assumption brackets, the radius solver,
//! concentration and test-error bounds against Monte Carlo tails, and
//! empirical net certification. Failures are reported in the returned
//! table, never thrown.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ips_core::geometry::{
    self, closed_form, hellinger_sq, l2_dist_sq_joint, law_pair_dist_sq, product_l2_dist_sq,
    time_inner,
};
use ips_core::nets::profiles::{duane_dist_bound, exp_decay_dist_bound, LipschitzProfile};
use ips_core::nets::{
    build_changepoint_collection, build_cox_net, build_linear_net, build_product_net,
    certify_cardinality, certify_covering, eta_solver, eta_solver_bisect, sample_changepoint_member,
    sample_cox_member, sample_linear_member, sample_product_member, CandidateNet, ChangepointSpec,
    CoxNetSpec, DimensionBound, LinearNetSpec, LinearSpace, ProductNetSpec,
};
use ips_core::simulate::simulate;
use ips_core::testing::{
    bennett_tail_bound, claim1_bounds, run_test, test_statistic, TestConstants, TestOutcome,
};
use ips_core::{
    CovariateSet, EvalCtx, IntensitySurface, QuadratureRule, Result, SqrtFunction, TimeDomain,
    TimeLaw,
};

use crate::scenario::mix_seed;

/// Per-family tolerances; `tampered` shrinks every numeric tolerance to
/// the given value, a negative control that must flip checks to failing.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Hand-derived pinned values.
    pub pinned: f64,
    /// Algebraic identities evaluated two ways.
    pub identity: f64,
    /// Closed forms against independent quadrature.
    pub closed_form: f64,
    /// Bracket and box-bound inequalities (slack for rounding).
    pub bracket: f64,
    /// Closed-form solver against bisection.
    pub solver: f64,
    /// Relative slack on certified covering radii.
    pub covering: f64,
    /// Monte Carlo slack in standard errors.
    pub sigma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pinned: 1e-12,
            identity: 1e-9,
            closed_form: 1e-6,
            bracket: 1e-9,
            solver: 1e-9,
            covering: 1e-9,
            sigma: 3.0,
        }
    }
}

impl Tolerances {
    pub fn tampered(value: f64) -> Self {
        Self {
            pinned: value,
            identity: value,
            closed_form: value,
            bracket: value,
            solver: value,
            covering: value,
            ..Self::default()
        }
    }
}

/// One check: passes when `measured <= bound`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub note: String,
}

impl CheckRow {
    fn le(suite: &str, name: &str, measured: f64, bound: f64, note: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        out.push_str(&format!(
            "{:<4} {:<13} {:<name_w$} {:>13} {:>13}  note\n",
            "ok", "suite", "name", "measured", "bound"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<4} {:<13} {:<name_w$} {:>13.4e} {:>13.4e}  {}\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.suite,
                r.name,
                r.measured,
                r.bound,
                r.note
            ));
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        out.push_str(&format!("{} checks, {} failed\n", self.rows.len(), failed));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Identities,
    Concentration,
    Covering,
    All,
}

pub fn verify(suite: Suite, tol: &Tolerances) -> Result<VerifyReport> {
    let mut rows = Vec::new();
    if matches!(suite, Suite::Identities | Suite::All) {
        rows.extend(identity_checks(tol)?);
        rows.extend(bracket_checks(tol)?);
        rows.extend(solver_checks(tol)?);
    }
    if matches!(suite, Suite::Concentration | Suite::All) {
        rows.extend(concentration_checks(tol)?);
        rows.extend(test_error_checks(tol)?);
    }
    if matches!(suite, Suite::Covering | Suite::All) {
        rows.extend(covering_checks(tol)?);
    }
    Ok(VerifyReport { rows })
}

/// Composite Simpson rule, the oracle quadrature used by every closed-form
/// check; independent of the node-table rule the library integrates with.
fn fine_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, half_panels: usize) -> f64 {
    let m = 2 * half_panels;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for j in 1..m {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + j as f64 * h);
    }
    acc * h / 3.0
}

/// `integral_0^1 (s1 t^{b1} - s2 t^{b2})^2 dt` via the substitution
/// `t = u^12`, which removes the endpoint singularity for `b > -5/12`.
fn power_pair_dist_sq_numeric(s1: f64, b1: f64, s2: f64, b2: f64) -> f64 {
    fine_simpson(
        |u| {
            if u == 0.0 {
                return 0.0;
            }
            let d = s1 * u.powf(12.0 * b1) - s2 * u.powf(12.0 * b2);
            12.0 * u.powi(11) * d * d
        },
        0.0,
        1.0,
        10_000,
    )
}

/// `integral_0^inf (s1 t^{k/2} e^{-b1 t} - s2 t^{k/2} e^{-b2 t})^2 dt`,
/// truncated where the envelope is below 1e-60.
fn decay_pair_dist_sq_numeric(s1: f64, b1: f64, s2: f64, b2: f64, k: u8) -> f64 {
    let t_max = 80.0 / b1.min(b2);
    fine_simpson(
        |t| {
            let p = t.powf(k as f64 / 2.0);
            let d = s1 * p * (-b1 * t).exp() - s2 * p * (-b2 * t).exp();
            d * d
        },
        0.0,
        t_max,
        30_000,
    )
}

/// Closed `L2` distance between `a1 t^{k/2} e^{-b1 t}` and
/// `a2 t^{k/2} e^{-b2 t}` on `[0, inf)`, from `int t^j e^{-st} = j!/s^{j+1}`.
fn decay_pair_dist_sq_exact(a1: f64, b1: f64, a2: f64, b2: f64, k: u8) -> f64 {
    let moment = |s: f64| match k {
        0 => 1.0 / s,
        1 => 1.0 / (s * s),
        _ => unreachable!("half_power is 0 or 1"),
    };
    a1 * a1 * moment(2.0 * b1) + a2 * a2 * moment(2.0 * b2) - 2.0 * a1 * a2 * moment(b1 + b2)
}

/// Composite two-point Gauss rule between consecutive cuts; exact for
/// piecewise cubics and never evaluates on a cut, where the integrand
/// may jump.
fn gauss2_piecewise(f: impl Fn(f64) -> f64, cuts: &[f64], panels_per_cell: usize) -> f64 {
    let off_scale = 0.5 / 3.0_f64.sqrt();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let h = (w[1] - w[0]) / panels_per_cell as f64;
        let off = h * off_scale;
        for p in 0..panels_per_cell {
            let mid = w[0] + h * (p as f64 + 0.5);
            acc += 0.5 * h * (f(mid - off) + f(mid + off));
        }
    }
    acc
}

fn unit_ctx(n: usize) -> Result<(TimeDomain, CovariateSet, QuadratureRule)> {
    let domain = TimeDomain::unit();
    let covariates = CovariateSet::unit_grid_1d(n)?;
    let quad = QuadratureRule::for_domain(&domain)?;
    Ok((domain, covariates, quad))
}

pub fn identity_checks(tol: &Tolerances) -> Result<Vec<CheckRow>> {
    const SUITE: &str = "identities";
    let mut rows = Vec::new();
    let (domain, covariates, quad) = unit_ctx(12)?;
    let ctx = EvalCtx::new(&domain, &covariates, &quad);

    // Product-distance identity: the factorized formula against a raw
    // per-process quadrature of the squared difference.
    let spec = ProductNetSpec {
        time_space: LinearSpace::Time { depth: 1, degree: 1 },
        cov_space: LinearSpace::Covariate { blocks: 2 },
        eta: 0.5,
        kappa_max: Some(2.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[41]));
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let f = sample_product_member(&spec, &ctx, &mut rng)?;
        let g = sample_product_member(&spec, &ctx, &mut rng)?;
        let (SqrtFunction::Product { kappa: kf, time: uf, cov: vf },
             SqrtFunction::Product { kappa: kg, time: ug, cov: vg }) = (&f, &g)
        else {
            unreachable!("product sampler returns product members");
        };
        let nt_f = time_inner(uf, uf, &domain, &quad)?.sqrt();
        let nt_g = time_inner(ug, ug, &domain, &quad)?.sqrt();
        let nc_f = geometry::cov_inner(vf, vf, &covariates).sqrt();
        let nc_g = geometry::cov_inner(vg, vg, &covariates).sqrt();
        let uf_hat = geometry::normalize_time(uf, &domain, &quad)?;
        let ug_hat = geometry::normalize_time(ug, &domain, &quad)?;
        let vf_hat = geometry::normalize_cov(vf, &covariates)?;
        let vg_hat = geometry::normalize_cov(vg, &covariates)?;
        let dt_sq = geometry::l2_dist_time_sq(&uf_hat, &ug_hat, &domain, &quad)?;
        let dx_sq = geometry::l2_dist_cov_sq(&vf_hat, &vg_hat, &covariates);
        let identity = product_l2_dist_sq(kf * nt_f * nc_f, kg * nt_g * nc_g, dt_sq, dx_sq);
        let n = ctx.n();
        // The factors may jump across dyadic cell boundaries, so the raw
        // oracle integrates cell by cell with interior nodes only.
        let cuts = [0.0, 0.25, 0.5, 0.75, 1.0];
        let raw = (0..n)
            .map(|i| {
                gauss2_piecewise(
                    |t| {
                        let d = f.eval(t, i, &ctx) - g.eval(t, i, &ctx);
                        d * d
                    },
                    &cuts,
                    16,
                )
            })
            .sum::<f64>()
            / n as f64;
        worst = worst.max((identity - raw).abs());
        worst = worst.max((identity - l2_dist_sq_joint(&f, &g, &ctx)?).abs());
    }
    rows.push(CheckRow::le(
        SUITE,
        "product-distance-identity",
        worst,
        tol.identity,
        "100 random factor quadruples, three evaluations",
    ));

    rows.push(CheckRow::le(
        SUITE,
        "power-distance-pinned",
        (closed_form::power_sqrt_dist_sq(0.0, 1.5) - 0.4).abs(),
        tol.pinned,
        "b=0, b'=1.5",
    ));
    rows.push(CheckRow::le(
        SUITE,
        "exp-family-distance-pinned",
        (2.0 * closed_form::exp_family_hellinger_sq(1.0, 4.0, 0) - 0.4).abs(),
        tol.pinned,
        "b=1, b'=4, k=0",
    ));

    // Unit-norm power-law roots: closed form vs Simpson and vs the law
    // engine, on an 11-point exponent grid.
    let grid: Vec<f64> = (0..11).map(|j| -0.3 + 0.3 * j as f64).collect();
    let mut worst_simpson = 0.0_f64;
    let mut worst_engine = 0.0_f64;
    for (i, &b) in grid.iter().enumerate() {
        for &bp in &grid[i + 1..] {
            let closed = closed_form::power_sqrt_dist_sq(b, bp);
            let (s1, s2) = ((2.0 * b + 1.0).sqrt(), (2.0 * bp + 1.0).sqrt());
            let numeric = power_pair_dist_sq_numeric(s1, b, s2, bp);
            worst_simpson = worst_simpson.max((closed - numeric).abs());
            let u = TimeLaw::Power { scale: s1, exponent: b };
            let v = TimeLaw::Power { scale: s2, exponent: bp };
            worst_engine = worst_engine.max((closed - law_pair_dist_sq(&u, &v, &ctx)?).abs());
        }
    }
    rows.push(CheckRow::le(
        SUITE,
        "power-closed-vs-simpson",
        worst_simpson,
        tol.closed_form,
        "55 exponent pairs in [-0.3, 2.7]",
    ));
    rows.push(CheckRow::le(
        SUITE,
        "power-closed-vs-engine",
        worst_engine,
        tol.identity,
        "same pairs through the law tables",
    ));

    // Exponential-family roots on [0, inf): 2 H^2 in closed form vs Simpson.
    for k in [0u8, 1] {
        let grid: Vec<f64> = (0..8).map(|j| 0.6 + 0.45 * j as f64).collect();
        let mut worst = 0.0_f64;
        for (i, &b) in grid.iter().enumerate() {
            for &bp in &grid[i + 1..] {
                let closed = 2.0 * closed_form::exp_family_hellinger_sq(b, bp, k);
                let (c1, c2) = (
                    closed_form::exp_family_normalizer(b, k),
                    closed_form::exp_family_normalizer(bp, k),
                );
                let numeric = decay_pair_dist_sq_numeric(c1, b, c2, bp, k);
                worst = worst.max((closed - numeric).abs());
            }
        }
        rows.push(CheckRow::le(
            SUITE,
            &format!("exp-family-closed-vs-simpson-k{k}"),
            worst,
            tol.closed_form,
            "28 rate pairs in [0.6, 3.75]",
        ));
    }

    // Two-parameter reliability families: closed forms vs Simpson on
    // random parameter pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[42]));
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let (t1, t1p) = (rng.gen_range(0.3..1.6), rng.gen_range(0.3..1.6));
        let (t2, t2p) = (rng.gen_range(0.3..1.5), rng.gen_range(0.3..1.5));
        let closed = closed_form::duane_sqrt_dist_sq(t1, t2, t1p, t2p);
        let numeric = fine_simpson(
            |u| {
                if u == 0.0 {
                    return 0.0;
                }
                let t = u.powi(4);
                let d = t1 * t.powf(t2) - t1p * t.powf(t2p);
                4.0 * u.powi(3) * d * d
            },
            0.0,
            1.0,
            10_000,
        );
        worst = worst.max((closed - numeric).abs());
    }
    rows.push(CheckRow::le(
        SUITE,
        "duane-closed-vs-simpson",
        worst,
        tol.closed_form,
        "50 random parameter pairs",
    ));

    for k in [0u8, 1] {
        let mut worst = 0.0_f64;
        for _ in 0..25 {
            let (b, bp) = (rng.gen_range(0.5..2.5), rng.gen_range(0.5..2.5));
            let closed = closed_form::exp_decay_sqrt_dist_sq(b, bp, k);
            let numeric = decay_pair_dist_sq_numeric(1.0, b, 1.0, bp, k);
            worst = worst.max((closed - numeric).abs());
        }
        rows.push(CheckRow::le(
            SUITE,
            &format!("exp-decay-closed-vs-simpson-k{k}"),
            worst,
            tol.closed_form,
            "25 random rate pairs",
        ));
    }

    // Self-test rows for the library quadrature itself; a tampered
    // tolerance must flip these.
    rows.push(CheckRow::le(
        SUITE,
        "quadrature-control-sin-sq",
        (quad.integrate(|t| (2.0 * std::f64::consts::PI * t).sin().powi(2)) - 0.5).abs(),
        tol.identity,
        "int_0^1 sin^2(2 pi t) = 1/2",
    ));
    rows.push(CheckRow::le(
        SUITE,
        "quadrature-control-exp",
        (quad.integrate(f64::exp) - std::f64::consts::E + 1.0).abs(),
        tol.identity,
        "int_0^1 e^t = e - 1",
    ));
    Ok(rows)
}

pub fn bracket_checks(tol: &Tolerances) -> Result<Vec<CheckRow>> {
    const SUITE: &str = "brackets";
    let mut rows = Vec::new();

    // Lipschitz bracket rho_lower(b v b') |db| <= d(b, b') <=
    // rho_upper(b ^ b') |db| on parameter grids for both families.
    let families = [
        ("power-bracket", LipschitzProfile::powerlaw(), 0.55_f64, 0.09_f64),
        ("exp-family-bracket-k0", LipschitzProfile::expfamily(0)?, 0.8, 0.14),
        ("exp-family-bracket-k1", LipschitzProfile::expfamily(1)?, 0.8, 0.14),
    ];
    for (name, profile, lo, step) in families {
        let grid: Vec<f64> = (0..11).map(|j| lo + step * j as f64).collect();
        let mut worst = f64::NEG_INFINITY;
        let mut pairs = 0;
        for (i, &b) in grid.iter().enumerate() {
            for &bp in &grid[i + 1..] {
                let d = profile.normalized_distance(b, bp)?;
                let gap = (bp - b).abs();
                let lower = profile.rho_lower(b.max(bp)) * gap;
                let upper = profile.rho_upper(b.min(bp)) * gap;
                worst = worst.max(lower - d).max(d - upper);
                pairs += 1;
            }
        }
        rows.push(CheckRow::le(
            SUITE,
            name,
            worst,
            tol.bracket,
            format!("{pairs} grid pairs, worst bracket violation"),
        ));
    }

    // Box bounds for the two-parameter families on random pairs inside
    // their stated boxes.
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[43]));
    let (r1, r2) = (1.6, 2.0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let a = (rng.gen_range(-r1..r1), rng.gen_range(-0.5 + 1.0 / r2..1.5));
        let b = (rng.gen_range(-r1..r1), rng.gen_range(-0.5 + 1.0 / r2..1.5));
        let d = closed_form::duane_sqrt_dist_sq(a.0, a.1, b.0, b.1).max(0.0).sqrt();
        worst = worst.max(d - duane_dist_bound(a, b, r1, r2)?);
    }
    rows.push(CheckRow::le(
        SUITE,
        "duane-box-bound",
        worst,
        tol.bracket,
        "50 random pairs in [-1.6, 1.6] x [0, 1.5]",
    ));

    let (r1, r2) = (1.5, 2.5);
    for k in [0u8, 1] {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..50 {
            let a = (rng.gen_range(-r1..r1), rng.gen_range(1.0 / r2..2.0));
            let b = (rng.gen_range(-r1..r1), rng.gen_range(1.0 / r2..2.0));
            let d = decay_pair_dist_sq_exact(a.0, a.1, b.0, b.1, k).max(0.0).sqrt();
            worst = worst.max(d - exp_decay_dist_bound(a, b, r1, r2, k)?);
        }
        rows.push(CheckRow::le(
            SUITE,
            &format!("exp-decay-box-bound-k{k}"),
            worst,
            tol.bracket,
            "50 random pairs in [-1.5, 1.5] x [0.4, 2.0]",
        ));
    }
    Ok(rows)
}

pub fn solver_checks(tol: &Tolerances) -> Result<Vec<CheckRow>> {
    const SUITE: &str = "solver";
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[44]));
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let alpha = rng.gen_range(0.3..2.5);
        let beta = rng.gen_range(0.05..2.0);
        let n = rng.gen_range(40..1600);
        let dim = DimensionBound::LogForm { alpha, beta };
        let closed = eta_solver(&dim, n)?;
        let bisected = eta_solver_bisect(|e| dim.at(e), n)?;
        worst = worst.max((closed - bisected).abs());
    }
    rows.push(CheckRow::le(
        SUITE,
        "lambert-vs-bisection",
        worst,
        tol.solver,
        "20 random (alpha, beta, n) triples",
    ));

    let eta = eta_solver(&DimensionBound::Constant(2.0), 100)?;
    rows.push(CheckRow::le(
        SUITE,
        "constant-dim-pinned",
        (eta * eta - 0.02).abs(),
        tol.pinned,
        "D=2, n=100 gives eta^2 = 0.02",
    ));
    Ok(rows)
}

fn monte_carlo_slack(emp: f64, bound: f64, reps: usize, sigma: f64) -> f64 {
    let q = emp.max(bound.min(1.0)).clamp(1.0 / reps as f64, 1.0 - 1.0 / reps as f64);
    bound.min(1.0) + sigma * (q * (1.0 - q) / reps as f64).sqrt()
}

pub fn concentration_checks(tol: &Tolerances) -> Result<Vec<CheckRow>> {
    const SUITE: &str = "concentration";
    const REPS: usize = 10_000;
    let mut rows = Vec::new();

    let configs: Vec<(&str, usize, IntensitySurface, SqrtFunction)> = vec![
        (
            "const-on-const",
            25,
            IntensitySurface::Constant { level: 2.0 },
            SqrtFunction::Constant { level: 0.9 },
        ),
        (
            "power-on-power",
            25,
            IntensitySurface::PowerLaw { scale: 1.5, exponent: 1.0 },
            SqrtFunction::TimeLaw(TimeLaw::Power { scale: 0.8, exponent: 0.5 }),
        ),
        (
            "loglinear-on-loglinear",
            30,
            IntensitySurface::SquareOf(Box::new(SqrtFunction::ProductExp {
                law: TimeLaw::Power { scale: 1.1, exponent: 0.3 },
                theta: vec![0.4],
            })),
            SqrtFunction::ProductExp {
                law: TimeLaw::Power { scale: 0.7, exponent: 0.2 },
                theta: vec![0.2],
            },
        ),
    ];

    for (idx, (name, n, s, g)) in configs.iter().enumerate() {
        let (domain, covariates, quad) = unit_ctx(*n)?;
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        s.validate(&ctx)?;
        let nf = *n as f64;
        let mean_shift = (0..*n)
            .map(|i| quad.integrate(|t| g.eval(t, i, &ctx) * s.eval(t, i, &ctx)))
            .sum::<f64>()
            / nf;
        let upsilon = (0..*n)
            .map(|i| quad.integrate(|t| g.eval(t, i, &ctx).powi(2) * s.eval(t, i, &ctx)))
            .sum::<f64>()
            / nf;
        let rho = (0..*n)
            .map(|i| g.eval(domain.t_max, i, &ctx).abs())
            .fold(0.0_f64, f64::max);

        let mut excesses = Vec::with_capacity(REPS);
        for rep in 0..REPS {
            let obs = simulate(s, &ctx, mix_seed(&[7001, idx as u64, rep as u64]))?;
            excesses.push(obs.counting_integral(|t, i| g.eval(t, i, &ctx)) / nf - mean_shift);
        }
        for (tag, factor) in [("r-half", 0.5), ("r-one", 1.0), ("r-two", 2.0)] {
            let r = factor * upsilon / rho;
            let emp =
                excesses.iter().filter(|&&x| x >= r).count() as f64 / REPS as f64;
            let bound = bennett_tail_bound(rho, upsilon, r, *n)?;
            rows.push(CheckRow::le(
                SUITE,
                &format!("bennett-{name}-{tag}"),
                emp,
                monte_carlo_slack(emp, bound, REPS, tol.sigma),
                format!("tail bound {bound:.3e} over {REPS} replicates"),
            ));
        }
    }

    // Pinned mean bound for intensities 1 vs 4 under truth 1.
    let (domain, covariates, quad) = unit_ctx(8)?;
    let ctx = EvalCtx::new(&domain, &covariates, &quad);
    let one = IntensitySurface::Constant { level: 1.0 };
    let four = IntensitySurface::Constant { level: 4.0 };
    let (pinned_mean, _) = claim1_bounds(&one, &one, &four, &ctx)?;
    rows.push(CheckRow::le(
        SUITE,
        "mean-bound-pinned",
        (pinned_mean - (-0.14644660940672627)).abs(),
        tol.pinned,
        "s=f=1, f'=4",
    ));

    // The mean bound dominates the Monte Carlo mean of the statistic.
    const MEAN_REPS: usize = 4000;
    let mean_configs: Vec<(&str, IntensitySurface, IntensitySurface, IntensitySurface)> = vec![
        (
            "power-triple",
            IntensitySurface::PowerLaw { scale: 1.3, exponent: 0.8 },
            IntensitySurface::PowerLaw { scale: 1.1, exponent: 0.7 },
            IntensitySurface::PowerLaw { scale: 2.0, exponent: 1.4 },
        ),
        (
            "const-vs-power",
            IntensitySurface::Constant { level: 1.5 },
            IntensitySurface::Constant { level: 1.2 },
            IntensitySurface::PowerLaw { scale: 1.1, exponent: 0.5 },
        ),
    ];
    for (idx, (name, s, f, fp)) in mean_configs.iter().enumerate() {
        let (domain, covariates, quad) = unit_ctx(50)?;
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let (mean_bound, _) = claim1_bounds(s, f, fp, &ctx)?;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for rep in 0..MEAN_REPS {
            let obs = simulate(s, &ctx, mix_seed(&[7002, idx as u64, rep as u64]))?;
            let t = test_statistic(f, fp, &obs, &ctx)?;
            sum += t;
            sum_sq += t * t;
        }
        let mean = sum / MEAN_REPS as f64;
        let var = (sum_sq - sum * sum / MEAN_REPS as f64) / (MEAN_REPS - 1) as f64;
        let se = (var / MEAN_REPS as f64).sqrt();
        rows.push(CheckRow::le(
            SUITE,
            &format!("mean-bound-{name}"),
            mean,
            mean_bound + tol.sigma * se,
            format!("bound {mean_bound:.4e}, se {se:.2e}, {MEAN_REPS} replicates"),
        ));
    }
    Ok(rows)
}

pub fn test_error_checks(tol: &Tolerances) -> Result<Vec<CheckRow>> {
    const SUITE: &str = "test-error";
    const REPS: usize = 1000;
    let mut rows = Vec::new();

    // Truth equal to the null candidate, so the handicap bound applies at
    // every z; the alternative sits at H^2 = 0.125.
    let f = IntensitySurface::Constant { level: 1.0 };
    let fp = IntensitySurface::Constant { level: 2.25 };

    {
        let constants = TestConstants::paper_faithful();
        let n = 200;
        let (domain, covariates, quad) = unit_ctx(n)?;
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let h_sq = hellinger_sq(&f, &fp, &ctx)?;
        let mut accepts = [0usize; 3];
        let zs = [0.0, h_sq / 2.0, -h_sq / 2.0];
        for rep in 0..REPS {
            let obs = simulate(&f, &ctx, mix_seed(&[7003, rep as u64]))?;
            for (j, &z) in zs.iter().enumerate() {
                if run_test(&f, &fp, z, &obs, &constants, 0, &ctx)? == TestOutcome::AcceptFPrime {
                    accepts[j] += 1;
                }
            }
        }
        for (j, (tag, &z)) in ["z-zero", "z-plus", "z-minus"].iter().zip(&zs).enumerate() {
            let emp = accepts[j] as f64 / REPS as f64;
            let bound = (-(n as f64) * constants.a * (h_sq + z)).exp();
            rows.push(CheckRow::le(
                SUITE,
                &format!("paper-error-{tag}"),
                emp,
                monte_carlo_slack(emp, bound, REPS, tol.sigma),
                format!("exp(-na(H^2+z)) = {bound:.4e}"),
            ));
        }
    }

    {
        let constants = TestConstants::calibrated();
        let n = 250;
        let (domain, covariates, quad) = unit_ctx(n)?;
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let h_sq = hellinger_sq(&f, &fp, &ctx)?;
        let mut accepts = 0usize;
        for rep in 0..REPS {
            let obs = simulate(&f, &ctx, mix_seed(&[7004, rep as u64]))?;
            if run_test(&f, &fp, 0.0, &obs, &constants, 0, &ctx)? == TestOutcome::AcceptFPrime {
                accepts += 1;
            }
        }
        rows.push(CheckRow::le(
            SUITE,
            "calibrated-error-rate",
            accepts as f64 / REPS as f64,
            0.05,
            format!("n H^2 = {:.2}, requires error <= 5%", n as f64 * h_sq),
        ));
    }
    Ok(rows)
}

fn covering_rows(
    tol: &Tolerances,
    rows: &mut Vec<CheckRow>,
    net: &CandidateNet,
    probes: &[SqrtFunction],
    ctx: &EvalCtx,
) -> Result<()> {
    const SUITE: &str = "covering";
    let covering = certify_covering(net, probes, ctx)?;
    rows.push(CheckRow::le(
        SUITE,
        &format!("cover-{}", net.label),
        covering.worst_dist,
        covering.eta_bar * (1.0 + tol.covering),
        format!("{} candidates, {} probes", net.len(), probes.len()),
    ));
    let centers: Vec<SqrtFunction> = net
        .candidates
        .iter()
        .step_by((net.len() / 40).max(1))
        .take(40)
        .cloned()
        .collect();
    let cardinality = certify_cardinality(net, &centers, ctx)?;
    rows.push(CheckRow::le(
        SUITE,
        &format!("cardinality-{}", net.label),
        cardinality.worst_count as f64,
        cardinality.bound,
        format!("{} centers, balls of radius 2 eta", centers.len()),
    ));
    Ok(())
}

pub fn covering_checks(tol: &Tolerances) -> Result<Vec<CheckRow>> {
    const SUITE: &str = "covering";
    let mut rows = Vec::new();
    let (domain, covariates, quad) = unit_ctx(30)?;
    let ctx = EvalCtx::new(&domain, &covariates, &quad);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[45]));

    for eta in [0.5, 0.9] {
        let spec = LinearNetSpec {
            space: LinearSpace::Time { depth: 1, degree: 1 },
            radius_box: 1.2,
            eta,
        };
        let net = build_linear_net(&spec, &ctx)?;
        let probes: Vec<SqrtFunction> = (0..60)
            .map(|_| sample_linear_member(&spec, &ctx, &mut rng))
            .collect::<Result<_>>()?;
        covering_rows(tol, &mut rows, &net, &probes, &ctx)?;
    }

    let mut halved_control = None;
    for eta in [0.5, 0.9] {
        let spec = ProductNetSpec {
            time_space: LinearSpace::Time { depth: 1, degree: 0 },
            cov_space: LinearSpace::Covariate { blocks: 1 },
            eta,
            kappa_max: Some(1.5),
        };
        let net = build_product_net(&spec, &ctx)?;
        let probes: Vec<SqrtFunction> = (0..60)
            .map(|_| sample_product_member(&spec, &ctx, &mut rng))
            .collect::<Result<_>>()?;
        covering_rows(tol, &mut rows, &net, &probes, &ctx)?;
        if eta == 0.5 {
            halved_control = Some((net, probes));
        }
    }

    for eta in [0.35, 0.7] {
        let spec = CoxNetSpec {
            profile: LipschitzProfile::powerlaw(),
            b_range: (0.6, 1.4),
            support: vec![],
            rho_theta: 0.0,
            a_max: 1.5,
            eta,
        };
        let net = build_cox_net(&spec, &ctx)?;
        let probes: Vec<SqrtFunction> = (0..60)
            .map(|_| sample_cox_member(&spec, &ctx, &mut rng))
            .collect::<Result<_>>()?;
        covering_rows(tol, &mut rows, &net, &probes, &ctx)?;
    }
    {
        let spec = CoxNetSpec {
            profile: LipschitzProfile::expfamily(0)?,
            b_range: (0.8, 1.8),
            support: vec![0],
            rho_theta: 0.5,
            a_max: 1.5,
            eta: 0.5,
        };
        let net = build_cox_net(&spec, &ctx)?;
        let probes: Vec<SqrtFunction> = (0..60)
            .map(|_| sample_cox_member(&spec, &ctx, &mut rng))
            .collect::<Result<_>>()?;
        covering_rows(tol, &mut rows, &net, &probes, &ctx)?;
    }

    // Change-point nets at two law-grid spacings (the derived radius is
    // the worst adjacent law distance, so the spacing is the radius knob).
    let grids = [
        vec![
            TimeLaw::Power { scale: 1.0, exponent: 0.3 },
            TimeLaw::Power { scale: 2.2, exponent: 0.9 },
        ],
        vec![
            TimeLaw::Power { scale: 1.0, exponent: 0.3 },
            TimeLaw::Power { scale: 1.6, exponent: 0.6 },
            TimeLaw::Power { scale: 2.2, exponent: 0.9 },
        ],
    ];
    for laws in grids {
        let spec = ChangepointSpec { laws, max_segments: 2 };
        let nets = build_changepoint_collection(&spec, &ctx)?;
        for net in [&nets[0], &nets[15]] {
            let SqrtFunction::PiecewiseLaw { partition, .. } = &net.candidates[0] else {
                unreachable!("change-point nets hold piecewise laws");
            };
            let partition = partition.clone();
            let probes: Vec<SqrtFunction> = (0..60)
                .map(|_| sample_changepoint_member(&spec, &partition, &mut rng))
                .collect::<Result<_>>()?;
            covering_rows(tol, &mut rows, net, &probes, &ctx)?;
        }
    }

    // Negative control: halving the declared radius in metadata only must
    // make the covering check fail.
    let (net, probes) = halved_control.expect("product net built above");
    let halved = net.with_radius(0.25);
    let report = certify_covering(&halved, &probes, &ctx)?;
    rows.push(CheckRow {
        suite: SUITE.into(),
        name: "detects-understated-radius".into(),
        measured: report.worst_dist,
        bound: report.eta_bar,
        pass: !report.ok,
        note: "halved metadata radius must fail certification".into(),
    });
    Ok(rows)
}
