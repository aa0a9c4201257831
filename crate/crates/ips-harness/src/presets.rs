//! Ready-made scenarios: a parametric rate study, a nonparametric
//! (Lipschitz) rate study, a change-point recovery study, and a small
//! sanity scenario whose truth sits inside the net.

use crate::scenario::{
    BuilderSpec, CollectionSpec, CovariateSpec, EtaRule, NetSpec, Reweight, Scenario, TruthSpec,
};
use ips_core::nets::profiles::LipschitzProfile;
use ips_core::nets::LinearSpace;
use ips_core::selector::SelectionConfig;
use ips_core::surface::{CovCurve, TimeCurve};
use ips_core::{IntensitySurface, TimeDomain, TimeLaw};

/// Power-law truth inside a single log-linear net whose radius shrinks like
/// `1/sqrt(n)`: mean risk should decay at the parametric rate.
pub fn cox_rate(n_grid: Vec<usize>, replicates: usize) -> Scenario {
    Scenario {
        name: "cox-rate".into(),
        truth: TruthSpec::Surface {
            surface: IntensitySurface::PowerLaw { scale: 1.69, exponent: 1.6 },
        },
        domain: TimeDomain::unit(),
        covariates: CovariateSpec::Trivial,
        collection: CollectionSpec {
            nets: vec![NetSpec {
                builder: BuilderSpec::Cox {
                    profile: LipschitzProfile::powerlaw(),
                    b_range: (0.5, 1.2),
                    support: vec![],
                    rho_theta: 0.0,
                    a_max: 2.0,
                },
                eta: EtaRule::OverSqrtN { c: 2.0 },
            }],
            reweight: Reweight::Keep,
        },
        // Small epsilon keeps every score below the radius floor, so the
        // argmin tracks the test tournament instead of tie-breaking.
        config: SelectionConfig { epsilon: 0.01, ..Default::default() },
        replicates,
        n_grid,
        caps: Default::default(),
    }
}

/// Kinked increasing time profile under a ladder of dyadic polynomial
/// lattices: constants, then affine, then piecewise-affine at a fixed
/// radius. The constant rung carries the full profile variance while the
/// affine rung only pays the kink residual, so the selector climbs one
/// rung as `n` grows and the risk trend reflects the ladder's
/// bias/variance handoff.
pub fn lipschitz_product_rate(n_grid: Vec<usize>, replicates: usize) -> Scenario {
    let time = TimeCurve::Nodes { ts: vec![0.0, 0.37, 1.0], values: vec![0.25, 2.0, 3.4] };
    let rung = |depth: u32, degree: usize, eta: EtaRule| NetSpec {
        builder: BuilderSpec::Linear {
            space: LinearSpace::Time { depth, degree },
            radius_box: 1.4,
        },
        eta,
    };
    Scenario {
        name: "lipschitz-product-rate".into(),
        truth: TruthSpec::Surface {
            surface: IntensitySurface::Product {
                kappa: 0.55,
                time,
                cov: CovCurve::Constant(1.0),
            },
        },
        domain: TimeDomain::unit(),
        covariates: CovariateSpec::UnitGrid1d,
        collection: CollectionSpec {
            nets: vec![
                rung(0, 0, EtaRule::OverSqrtN { c: 1.5 }),
                rung(0, 1, EtaRule::DimOverN { c: 1.5 }),
                rung(1, 1, EtaRule::Fixed { value: 0.35 }),
            ],
            reweight: Reweight::Uniform,
        },
        config: SelectionConfig { epsilon: 0.2, ..Default::default() },
        replicates,
        n_grid,
        caps: Default::default(),
    }
}

/// Two well-separated power-law segments with the boundary at `n/2`; the
/// collection holds every 1- and 2-segment assignment of the two laws.
pub fn changepoint_recovery(n_grid: Vec<usize>, replicates: usize) -> Scenario {
    let laws = vec![
        TimeLaw::Power { scale: 1.0, exponent: 0.25 },
        TimeLaw::Power { scale: 2.6, exponent: 1.0 },
    ];
    Scenario {
        name: "changepoint-recovery".into(),
        truth: TruthSpec::PiecewiseRelative {
            fractions: vec![0.5],
            sqrt_laws: laws.clone(),
        },
        domain: TimeDomain::unit(),
        covariates: CovariateSpec::Trivial,
        collection: CollectionSpec {
            nets: vec![NetSpec {
                builder: BuilderSpec::Changepoint { laws, max_segments: 2 },
                eta: EtaRule::Derived,
            }],
            reweight: Reweight::Keep,
        },
        // The one-position breakpoint shift costs H^2(law, law') / n, which
        // is ~1e-3 at the largest n; epsilon must keep the radius floor
        // below that so neighboring breakpoints stay distinguishable.
        config: SelectionConfig { epsilon: 5e-4, ..Default::default() },
        replicates,
        n_grid,
        caps: Default::default(),
    }
}

/// Constant truth lying (up to rounding) on a small constant lattice.
pub fn truth_in_net_sanity(n_grid: Vec<usize>, replicates: usize) -> Scenario {
    Scenario {
        name: "truth-in-net".into(),
        truth: TruthSpec::Surface { surface: IntensitySurface::Constant { level: 1.44 } },
        domain: TimeDomain::unit(),
        covariates: CovariateSpec::Trivial,
        collection: CollectionSpec {
            nets: vec![NetSpec {
                builder: BuilderSpec::Linear {
                    space: LinearSpace::Time { depth: 0, degree: 0 },
                    radius_box: 2.0,
                },
                eta: EtaRule::Fixed { value: 0.4 },
            }],
            reweight: Reweight::Keep,
        },
        // Floor below the 0.4-spacing lattice gaps, so the exact truth
        // member wins on test outcomes rather than on the tie-break.
        config: SelectionConfig { epsilon: 0.1, ..Default::default() },
        replicates,
        n_grid,
        caps: Default::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_collection;
    use ips_core::selector::MATRIX_CAP;

    #[test]
    fn rate_scenarios_fit_the_selection_matrix() {
        for (scenario, grid) in [
            (cox_rate(vec![50, 200, 800], 1), vec![50usize, 200, 800]),
            (lipschitz_product_rate(vec![50, 200, 800], 1), vec![50, 200, 800]),
            (changepoint_recovery(vec![100, 200, 400], 1), vec![100, 200, 400]),
        ] {
            for n in grid {
                let bench = scenario.context_for(n).unwrap();
                let ctx = bench.ctx();
                let nets = build_collection(&scenario.collection, &ctx).unwrap();
                let total: usize = nets.iter().map(|net| net.candidates.len()).sum();
                assert!(
                    total <= MATRIX_CAP,
                    "{} at n={n}: {total} candidates exceed the matrix cap",
                    scenario.name
                );
                assert!(total >= 4, "{} at n={n}: only {total} candidates", scenario.name);
            }
        }
    }
}
