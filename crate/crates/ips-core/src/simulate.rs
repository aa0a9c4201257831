//! Exact simulation of covariate-indexed Poisson process collections.
//!
//! Each process is drawn independently: thinning against a finite dominating
//! level when the intensity is bounded, inversion of the cumulative intensity
//! for power laws with a singularity at 0. Streams are decorrelated per
//! process so a collection is reproducible from `(seed, i)` alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IpsError, Result};
use crate::surface::{EvalCtx, IntensitySurface};

/// Event times of one realized process, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSample {
    pub times: Vec<f64>,
}

impl ProcessSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// One observation of the full collection: `n` processes, index-aligned with
/// the covariate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub processes: Vec<ProcessSample>,
}

impl ObservationSet {
    pub fn n(&self) -> usize {
        self.processes.len()
    }

    pub fn total_events(&self) -> usize {
        self.processes.iter().map(|p| p.len()).sum()
    }

    /// `sum_i sum_{t in N_i} f(t, i)`, the integral of `f` against the
    /// collection's counting measures.
    pub fn counting_integral(&self, mut f: impl FnMut(f64, usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, p) in self.processes.iter().enumerate() {
            for &t in &p.times {
                acc += f(t, i);
            }
        }
        acc
    }
}

fn process_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Draw one realization of the collection under intensity `s`.
///
/// Bounded intensities are thinned against `sup_t s(t, x_i)`; power laws with
/// exponent in `(-1, 0)` are inverted exactly. Unbounded non-power surfaces
/// are rejected.
pub fn simulate(s: &IntensitySurface, ctx: &EvalCtx, seed: u64) -> Result<ObservationSet> {
    s.validate(ctx)?;
    let n = ctx.n();
    let plans: Vec<SimPlan> = (0..n).map(|i| plan_for(s, i, ctx)).collect::<Result<_>>()?;
    let processes: Vec<ProcessSample> = plans
        .into_par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let mut rng = process_rng(seed, i);
            run_plan(&plan, s, i, ctx, &mut rng)
        })
        .collect();
    Ok(ObservationSet { processes })
}

enum SimPlan {
    Empty,
    /// Poisson count at the atom with the given mean.
    PointMass { mean: f64 },
    /// Thinning against a constant dominating level.
    Thin { sup: f64, mass: f64 },
    /// Exact inversion of `Lambda(t) = a t^{b+1} / (b+1)` on `(0, t_max]`.
    InvertPower { scale: f64, exponent: f64, mass: f64 },
}

fn plan_for(s: &IntensitySurface, i: usize, ctx: &EvalCtx) -> Result<SimPlan> {
    if ctx.domain.point_mass {
        return Ok(SimPlan::PointMass { mean: s.integral_i(i, ctx)? });
    }
    let mass = s.integral_i(i, ctx)?;
    if !mass.is_finite() {
        return Err(IpsError::DivergentIntegral(
            "cumulative intensity must be finite to simulate".into(),
        ));
    }
    if mass == 0.0 {
        return Ok(SimPlan::Empty);
    }
    match s.sup_i(i, ctx) {
        Some(sup) => Ok(SimPlan::Thin { sup, mass }),
        None => match s {
            IntensitySurface::PowerLaw { scale, exponent } if *exponent > -1.0 => {
                Ok(SimPlan::InvertPower { scale: *scale, exponent: *exponent, mass })
            }
            _ => Err(IpsError::UnboundedIntensity(
                "no dominating level and no inversion rule for this surface".into(),
            )),
        },
    }
}

fn run_plan(
    plan: &SimPlan,
    s: &IntensitySurface,
    i: usize,
    ctx: &EvalCtx,
    rng: &mut ChaCha8Rng,
) -> ProcessSample {
    let times = match *plan {
        SimPlan::Empty => Vec::new(),
        SimPlan::PointMass { mean } => {
            let k = poisson_count(mean, rng);
            vec![ctx.domain.t_min; k]
        }
        SimPlan::Thin { sup, mass } => {
            let (a, b) = (ctx.domain.t_min, ctx.domain.t_max);
            let bound = sup.max(mass / (b - a));
            let k = poisson_count(bound * (b - a), rng);
            let mut times = Vec::with_capacity(k / 2 + 1);
            for _ in 0..k {
                let t = rng.gen_range(a..b);
                let u: f64 = rng.gen();
                if u * bound < s.eval(t, i, ctx) {
                    times.push(t);
                }
            }
            times.sort_by(|x, y| x.partial_cmp(y).unwrap());
            times
        }
        SimPlan::InvertPower { scale, exponent, mass } => {
            let k = poisson_count(mass, rng);
            let p = exponent + 1.0;
            let mut times: Vec<f64> = (0..k)
                .map(|_| {
                    let u: f64 = rng.gen();
                    // Lambda^{-1}(u * mass) with Lambda(t) = scale t^p / p.
                    (p * u * mass / scale).powf(1.0 / p)
                })
                .collect();
            times.sort_by(|x, y| x.partial_cmp(y).unwrap());
            times
        }
    };
    ProcessSample { times }
}

fn poisson_count(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CovariateSet, TimeDomain};
    use crate::quadrature::QuadratureRule;
    use crate::surface::TimeLaw;

    fn ctx_parts(n: usize) -> (TimeDomain, CovariateSet, QuadratureRule) {
        let dom = TimeDomain::unit();
        let quad = QuadratureRule::for_domain(&dom).unwrap();
        (dom, CovariateSet::unit_grid_1d(n).unwrap(), quad)
    }

    #[test]
    fn reproducible_and_stream_decorrelated() {
        let (dom, cov, quad) = ctx_parts(4);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let s = IntensitySurface::Constant { level: 20.0 };
        let a = simulate(&s, &ctx, 7).unwrap();
        let b = simulate(&s, &ctx, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.processes[0], a.processes[1]);
        let c = simulate(&s, &ctx, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_rate_count_statistics() {
        let (dom, cov, quad) = ctx_parts(400);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let s = IntensitySurface::Constant { level: 10.0 };
        let obs = simulate(&s, &ctx, 11).unwrap();
        let mean = obs.total_events() as f64 / 400.0;
        // Poisson(10) mean over 400 draws: SE = sqrt(10/400) = 0.158.
        assert!((mean - 10.0).abs() < 0.8, "mean count {mean}");
        for p in &obs.processes {
            for &t in &p.times {
                assert!((0.0..1.0).contains(&t));
            }
            assert!(p.times.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn thinned_linear_intensity_has_linear_cdf() {
        let (dom, cov, quad) = ctx_parts(2000);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let s = IntensitySurface::PowerLaw { scale: 12.0, exponent: 1.0 };
        let obs = simulate(&s, &ctx, 3).unwrap();
        let mut all: Vec<f64> = Vec::new();
        for p in &obs.processes {
            all.extend_from_slice(&p.times);
        }
        // P(T <= t) = t^2 under s(t) = c t; check the median ~ sqrt(1/2).
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = all[all.len() / 2];
        assert!((median - 0.5f64.sqrt()).abs() < 0.01, "median {median}");
        let mean_count = obs.total_events() as f64 / 2000.0;
        assert!((mean_count - 6.0).abs() < 0.2, "mean count {mean_count}");
    }

    #[test]
    fn singular_power_law_inverts_exactly() {
        let dom = TimeDomain::open_unit();
        let quad = QuadratureRule::for_domain(&dom).unwrap();
        let cov = CovariateSet::trivial(3000).unwrap();
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let s = IntensitySurface::PowerLaw { scale: 4.0, exponent: -0.5 };
        let obs = simulate(&s, &ctx, 5).unwrap();
        // mass = 4 * 2 * 1 = 8 per process.
        let mean_count = obs.total_events() as f64 / 3000.0;
        assert!((mean_count - 8.0).abs() < 0.25, "mean count {mean_count}");
        // P(T <= t) = sqrt(t): median at 0.25.
        let mut all: Vec<f64> = Vec::new();
        for p in &obs.processes {
            all.extend_from_slice(&p.times);
        }
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = all[all.len() / 2];
        assert!((median - 0.25).abs() < 0.01, "median {median}");
        assert!(all.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn covariate_modulated_rates_scale_with_x() {
        let (dom, cov, quad) = ctx_parts(1000);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let s = IntensitySurface::ProductExp {
            law: TimeLaw::Power { scale: 8.0, exponent: 0.0 },
            theta: vec![1.0],
        };
        let obs = simulate(&s, &ctx, 13).unwrap();
        // Compare realized counts in the low and high covariate halves.
        let half = 500;
        let low: usize = obs.processes[..half].iter().map(|p| p.len()).sum();
        let high: usize = obs.processes[half..].iter().map(|p| p.len()).sum();
        let expected_low: f64 = (0..half).map(|i| 8.0 * cov.row(i)[0].exp()).sum();
        let expected_high: f64 = (half..1000).map(|i| 8.0 * cov.row(i)[0].exp()).sum();
        assert!((low as f64 / expected_low - 1.0).abs() < 0.05);
        assert!((high as f64 / expected_high - 1.0).abs() < 0.05);
    }

    #[test]
    fn point_mass_domain_draws_counts_at_atom() {
        let dom = TimeDomain::point_mass(2.0);
        let quad = QuadratureRule::for_domain(&dom).unwrap();
        let cov = CovariateSet::trivial(500).unwrap();
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let s = IntensitySurface::Constant { level: 3.0 };
        let obs = simulate(&s, &ctx, 21).unwrap();
        assert!(obs.processes.iter().all(|p| p.times.iter().all(|&t| t == 2.0)));
        let mean = obs.total_events() as f64 / 500.0;
        assert!((mean - 3.0).abs() < 0.3, "mean count {mean}");
    }

    #[test]
    fn zero_intensity_yields_empty_processes() {
        let (dom, cov, quad) = ctx_parts(5);
        let ctx = EvalCtx::new(&dom, &cov, &quad);
        let s = IntensitySurface::Constant { level: 0.0 };
        let obs = simulate(&s, &ctx, 1).unwrap();
        assert_eq!(obs.total_events(), 0);
    }

    #[test]
    fn counting_integral_sums_over_events() {
        let obs = ObservationSet {
            processes: vec![
                ProcessSample { times: vec![0.25, 0.5] },
                ProcessSample { times: vec![0.75] },
            ],
        };
        let total = obs.counting_integral(|t, i| t + i as f64);
        assert!((total - (0.25 + 0.5 + 1.75)).abs() < 1e-15);
    }
}
