//! JSON-serializable scenario descriptions.
//!
//! A scenario fixes everything a benchmark run needs except the seed: the
//! ground truth, the covariate design, the candidate-collection recipe, the
//! selection config, the replicate count and the sample-size grid. Covariate
//! designs and net radii may depend on the sample size `n`, so one scenario
//! document drives a whole risk-versus-`n` study.

use ips_core::error::{IpsError, Result};
use ips_core::nets::profiles::LipschitzProfile;
use ips_core::nets::{
    build_changepoint_collection, build_cox_net, build_linear_net, build_product_net,
    CandidateNet, ChangepointSpec, CoxNetSpec, LinearNetSpec, LinearSpace, ProductNetSpec,
};
use ips_core::selector::{mix_collections, SelectionConfig};
use ips_core::{
    CovariateSet, EvalCtx, IntensitySurface, Partition, QuadratureRule, TimeDomain, TimeLaw,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Resource ceilings for desk-scale runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskCaps {
    pub max_n: usize,
    pub max_candidates: usize,
    pub max_replicates: usize,
}

impl Default for DeskCaps {
    fn default() -> Self {
        Self { max_n: 1000, max_candidates: 5000, max_replicates: 500 }
    }
}

/// One reproducible benchmark description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub truth: TruthSpec,
    pub domain: TimeDomain,
    pub covariates: CovariateSpec,
    pub collection: CollectionSpec,
    #[serde(default)]
    pub config: SelectionConfig,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub caps: DeskCaps,
}

/// Ground truth, possibly re-anchored to each sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthSpec {
    /// A fixed intensity surface used verbatim at every `n`.
    Surface { surface: IntensitySurface },
    /// Piecewise-parametric truth whose segment boundaries sit at fixed
    /// fractions of `n`: `fractions` are the interior boundaries in (0, 1),
    /// strictly increasing, and `sqrt_laws` has one more entry.
    PiecewiseRelative { fractions: Vec<f64>, sqrt_laws: Vec<TimeLaw> },
}

impl TruthSpec {
    pub fn materialize(&self, n: usize) -> Result<IntensitySurface> {
        match self {
            TruthSpec::Surface { surface } => Ok(surface.clone()),
            TruthSpec::PiecewiseRelative { fractions, sqrt_laws } => {
                if sqrt_laws.len() != fractions.len() + 1 {
                    return Err(IpsError::InvalidParameter(format!(
                        "piecewise truth needs {} laws for {} fractions, got {}",
                        fractions.len() + 1,
                        fractions.len(),
                        sqrt_laws.len()
                    )));
                }
                let mut starts = vec![0usize];
                for f in fractions {
                    if !(0.0 < *f && *f < 1.0) {
                        return Err(IpsError::InvalidParameter(format!(
                            "segment fraction {f} outside (0, 1)"
                        )));
                    }
                    let b = ((f * n as f64).round() as usize).clamp(1, n.saturating_sub(1));
                    starts.push(b);
                }
                if starts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(IpsError::DegenerateInput(format!(
                        "segment fractions collide at n = {n}"
                    )));
                }
                Ok(IntensitySurface::PiecewiseParam {
                    partition: Partition::new(starts, n)?,
                    sqrt_laws: sqrt_laws.clone(),
                })
            }
        }
    }
}

/// Covariate design, materialized per sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateSpec {
    /// Zero covariates of dimension 1 (covariate-free designs).
    Trivial,
    /// Evenly spaced grid `x_i = i/n` on (0, 1].
    #[serde(rename = "unit_grid_1d")]
    UnitGrid1d,
    /// Explicit rows; pins the scenario to `n = rows.len()`.
    Explicit { rows: Vec<Vec<f64>> },
    /// `n` points drawn uniformly from the unit ball, deterministic in
    /// `(seed, dim, n)`.
    UniformBall { dim: usize, seed: u64 },
}

impl CovariateSpec {
    pub fn build(&self, n: usize) -> Result<CovariateSet> {
        match self {
            CovariateSpec::Trivial => CovariateSet::trivial(n),
            CovariateSpec::UnitGrid1d => CovariateSet::unit_grid_1d(n),
            CovariateSpec::Explicit { rows } => {
                if rows.len() != n {
                    return Err(IpsError::DegenerateInput(format!(
                        "explicit covariates carry {} rows but n = {n}",
                        rows.len()
                    )));
                }
                CovariateSet::new(rows.clone())
            }
            CovariateSpec::UniformBall { dim, seed } => {
                if *dim == 0 {
                    return Err(IpsError::InvalidParameter(
                        "uniform-ball covariates need dim >= 1".into(),
                    ));
                }
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix_seed(&[*seed, *dim as u64, n as u64]));
                let rows = (0..n)
                    .map(|_| {
                        let dir: Vec<f64> =
                            (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let radius = rng.gen::<f64>().powf(1.0 / *dim as f64);
                        if norm == 0.0 {
                            vec![0.0; *dim]
                        } else {
                            dir.into_iter().map(|v| v / norm * radius).collect()
                        }
                    })
                    .collect();
                CovariateSet::new(rows)
            }
        }
    }
}

/// Candidate-collection recipe: net specs plus a weight policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionSpec {
    pub nets: Vec<NetSpec>,
    #[serde(default)]
    pub reweight: Reweight,
}

/// How builder-assigned complexity weights are adjusted so the collection
/// satisfies `sum exp(-Delta) <= 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Reweight {
    /// Keep the builders' weights verbatim.
    #[default]
    Keep,
    /// Give every net the weight `ln(total nets)`.
    Uniform,
    /// Add one offset per net spec to all nets that spec produced.
    Offsets { by_spec: Vec<f64> },
}

/// One net-builder invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub builder: BuilderSpec,
    #[serde(default)]
    pub eta: EtaRule,
}

/// Builder family and its parameters; covering radii live in [`EtaRule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BuilderSpec {
    Linear {
        space: LinearSpace,
        radius_box: f64,
    },
    Product {
        time_space: LinearSpace,
        cov_space: LinearSpace,
        kappa_max: f64,
    },
    Cox {
        profile: LipschitzProfile,
        b_range: (f64, f64),
        #[serde(default)]
        support: Vec<usize>,
        #[serde(default)]
        rho_theta: f64,
        a_max: f64,
    },
    Changepoint {
        laws: Vec<TimeLaw>,
        max_segments: usize,
    },
}

/// Covering-radius assignment, possibly depending on the sample size.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EtaRule {
    /// The builder derives the radius itself (change-point collections).
    #[default]
    Derived,
    Fixed { value: f64 },
    /// `eta = c / sqrt(n)`: parametric critical-radius scaling.
    OverSqrtN { c: f64 },
    /// `eta = c sqrt(dim / n)` with the builder's parameter dimension.
    DimOverN { c: f64 },
}

impl EtaRule {
    fn resolve(&self, dim: f64, n: usize) -> Result<f64> {
        let eta = match self {
            EtaRule::Derived => {
                return Err(IpsError::InvalidParameter(
                    "this builder needs an explicit radius rule".into(),
                ))
            }
            EtaRule::Fixed { value } => *value,
            EtaRule::OverSqrtN { c } => c / (n as f64).sqrt(),
            EtaRule::DimOverN { c } => c * (dim / n as f64).sqrt(),
        };
        if !eta.is_finite() || eta <= 0.0 {
            return Err(IpsError::InvalidParameter(format!("resolved net radius {eta} invalid")));
        }
        Ok(eta)
    }
}

impl NetSpec {
    /// Build the nets this spec describes for the given context.
    pub fn build(&self, ctx: &EvalCtx) -> Result<Vec<CandidateNet>> {
        let n = ctx.n();
        match &self.builder {
            BuilderSpec::Linear { space, radius_box } => {
                let eta = self.eta.resolve(space.dim(n)? as f64, n)?;
                let spec = LinearNetSpec { space: *space, radius_box: *radius_box, eta };
                Ok(vec![build_linear_net(&spec, ctx)?])
            }
            BuilderSpec::Product { time_space, cov_space, kappa_max } => {
                let dim = (time_space.dim(n)? + cov_space.dim(n)?) as f64;
                let eta = self.eta.resolve(dim, n)?;
                let spec = ProductNetSpec {
                    time_space: *time_space,
                    cov_space: *cov_space,
                    eta,
                    kappa_max: Some(*kappa_max),
                };
                Ok(vec![build_product_net(&spec, ctx)?])
            }
            BuilderSpec::Cox { profile, b_range, support, rho_theta, a_max } => {
                let eta = self.eta.resolve((2 + support.len()) as f64, n)?;
                let spec = CoxNetSpec {
                    profile: *profile,
                    b_range: *b_range,
                    support: support.clone(),
                    rho_theta: *rho_theta,
                    a_max: *a_max,
                    eta,
                };
                Ok(vec![build_cox_net(&spec, ctx)?])
            }
            BuilderSpec::Changepoint { laws, max_segments } => {
                if !matches!(self.eta, EtaRule::Derived) {
                    return Err(IpsError::InvalidParameter(
                        "change-point radii are derived from the law grid".into(),
                    ));
                }
                let spec = ChangepointSpec { laws: laws.clone(), max_segments: *max_segments };
                build_changepoint_collection(&spec, ctx)
            }
        }
    }
}

/// Build the full collection for one context and apply the weight policy.
pub fn build_collection(spec: &CollectionSpec, ctx: &EvalCtx) -> Result<Vec<CandidateNet>> {
    if spec.nets.is_empty() {
        return Err(IpsError::DegenerateInput("collection needs at least one net spec".into()));
    }
    let groups: Vec<Vec<CandidateNet>> =
        spec.nets.iter().map(|s| s.build(ctx)).collect::<Result<_>>()?;
    match &spec.reweight {
        Reweight::Keep => Ok(groups.into_iter().flatten().collect()),
        Reweight::Uniform => {
            let total: usize = groups.iter().map(Vec::len).sum();
            let weight = (total as f64).ln();
            Ok(groups.into_iter().flatten().map(|net| net.with_weight(weight)).collect())
        }
        Reweight::Offsets { by_spec } => {
            if by_spec.len() != groups.len() {
                return Err(IpsError::InvalidParameter(format!(
                    "got {} weight offsets for {} net specs",
                    by_spec.len(),
                    groups.len()
                )));
            }
            mix_collections(groups.into_iter().zip(by_spec.iter().copied()).collect())
        }
    }
}

/// Owned evaluation-context parts for one sample size.
pub struct BenchContext {
    pub domain: TimeDomain,
    pub covariates: CovariateSet,
    pub quad: QuadratureRule,
}

impl BenchContext {
    pub fn ctx(&self) -> EvalCtx<'_> {
        EvalCtx::new(&self.domain, &self.covariates, &self.quad)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(IpsError::InvalidParameter("scenario needs a name".into()));
        }
        if self.caps.max_n == 0 || self.caps.max_candidates == 0 || self.caps.max_replicates == 0
        {
            return Err(IpsError::InvalidParameter("caps must be positive".into()));
        }
        if self.replicates == 0 || self.replicates > self.caps.max_replicates {
            return Err(IpsError::InvalidParameter(format!(
                "replicates must lie in 1..={}, got {}",
                self.caps.max_replicates, self.replicates
            )));
        }
        if self.n_grid.is_empty() {
            return Err(IpsError::DegenerateInput("n_grid must not be empty".into()));
        }
        for &n in &self.n_grid {
            self.validate_n(n)?;
        }
        self.config.validate()?;
        Ok(())
    }

    /// Checks one sample size against the caps and the covariate layout.
    /// Applies both to the scenario's own `n_grid` and to CLI overrides.
    pub fn validate_n(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.caps.max_n {
            return Err(IpsError::InvalidParameter(format!(
                "sample size {n} outside 1..={}",
                self.caps.max_n
            )));
        }
        if let CovariateSpec::Explicit { rows } = &self.covariates {
            if rows.len() != n {
                return Err(IpsError::DegenerateInput(format!(
                    "explicit covariates pin n to {}, but got n = {n}",
                    rows.len()
                )));
            }
        }
        self.truth.materialize(n)?;
        Ok(())
    }

    pub fn context_for(&self, n: usize) -> Result<BenchContext> {
        Ok(BenchContext {
            domain: self.domain,
            covariates: self.covariates.build(n)?,
            quad: QuadratureRule::for_domain(&self.domain)?,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| IpsError::InvalidParameter(format!("scenario parse error: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios are serializable")
    }
}

/// Deterministic seed mixing (splitmix64 over the parts).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = h ^ p;
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn scenario_roundtrips_through_json() {
        let scenario = presets::cox_rate(vec![50, 200], 20);
        let text = scenario.to_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(scenario, back);
    }

    #[test]
    fn validation_enforces_desk_caps() {
        let mut scenario = presets::cox_rate(vec![50], 20);
        scenario.replicates = 501;
        assert!(scenario.validate().is_err());
        scenario.replicates = 20;
        scenario.n_grid = vec![1001];
        assert!(scenario.validate().is_err());
        scenario.n_grid = vec![0];
        assert!(scenario.validate().is_err());
    }

    #[test]
    fn explicit_covariates_pin_the_sample_size() {
        let mut scenario = presets::cox_rate(vec![3], 5);
        scenario.covariates = CovariateSpec::Explicit { rows: vec![vec![0.1], vec![0.2]] };
        assert!(scenario.validate().is_err());
        scenario.n_grid = vec![2];
        scenario.validate().unwrap();
        let covs = scenario.covariates.build(2).unwrap();
        assert_eq!(covs.rows(), &[vec![0.1], vec![0.2]]);
    }

    #[test]
    fn uniform_ball_covariates_are_deterministic_and_inside_the_ball() {
        let spec = CovariateSpec::UniformBall { dim: 3, seed: 9 };
        let a = spec.build(40).unwrap();
        let b = spec.build(40).unwrap();
        assert_eq!(a, b);
        assert!(a.in_unit_ball());
        let other = CovariateSpec::UniformBall { dim: 3, seed: 10 }.build(40).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn piecewise_relative_truth_moves_with_n() {
        let truth = TruthSpec::PiecewiseRelative {
            fractions: vec![0.5],
            sqrt_laws: vec![
                TimeLaw::Power { scale: 1.0, exponent: 0.25 },
                TimeLaw::Power { scale: 1.9, exponent: 0.55 },
            ],
        };
        for n in [100usize, 400] {
            let surface = truth.materialize(n).unwrap();
            let IntensitySurface::PiecewiseParam { partition, .. } = surface else {
                panic!("expected piecewise truth");
            };
            assert_eq!(partition.starts(), &[0, n / 2]);
        }
        let bad = TruthSpec::PiecewiseRelative {
            fractions: vec![0.5, 0.5000001],
            sqrt_laws: vec![
                TimeLaw::Power { scale: 1.0, exponent: 0.0 },
                TimeLaw::Power { scale: 1.5, exponent: 0.0 },
                TimeLaw::Power { scale: 2.0, exponent: 0.0 },
            ],
        };
        assert!(bad.materialize(100).is_err());
    }

    #[test]
    fn reweight_uniform_normalizes_the_collection() {
        let scenario = presets::lipschitz_product_rate(vec![50], 10);
        let bench = scenario.context_for(50).unwrap();
        let ctx = bench.ctx();
        let nets = build_collection(&scenario.collection, &ctx).unwrap();
        let sum: f64 = nets.iter().map(|net| (-net.weight).exp()).sum();
        assert!((sum - 1.0).abs() < 1e-9, "weight mass {sum}");
    }

    #[test]
    fn changepoint_specs_reject_explicit_radii() {
        let spec = NetSpec {
            builder: BuilderSpec::Changepoint {
                laws: vec![TimeLaw::Power { scale: 1.0, exponent: 0.0 }],
                max_segments: 1,
            },
            eta: EtaRule::Fixed { value: 0.3 },
        };
        let scenario = presets::cox_rate(vec![10], 1);
        let bench = scenario.context_for(10).unwrap();
        assert!(spec.build(&bench.ctx()).is_err());
    }

    #[test]
    fn mix_seed_separates_nearby_inputs() {
        let a = mix_seed(&[1, 2, 3]);
        let b = mix_seed(&[1, 2, 4]);
        let c = mix_seed(&[1, 3, 2]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }
}
