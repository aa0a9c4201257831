//! T-estimator selection over a collection of candidate nets.
//!
//! Every unordered pair of distinct candidates `(f, f')` is compared once by
//! the robust test with handicap `z = eta_bar(f')^2 - eta_bar(f)^2`, where
//! `eta_bar(f)` is the smallest radius among the nets containing `f`. The
//! candidates defeated at least once collect their worst squared Hellinger
//! distance to a defeater in `gamma`, and the winner is the candidate
//! minimizing `gamma(f) max eps * eta_bar(f)`; ties go to the smaller radius
//! and then to the lexicographically smaller descriptor, so the outcome never
//! depends on the order in which nets or candidates are listed.
//!
//! Duplicate candidates (equal structural descriptors) across nets are
//! unified before testing. Exact ties `T = b z` are broken by a coin that is
//! a pure function of the tie seed and the unordered pair, matching
//! [`crate::testing::run_test`] bit for bit.
//!
//! [`SelectionEngine`] separates the sample-independent work (pairwise
//! integral terms, Hellinger distances, handicaps) from the per-sample event
//! sums, so repeated selections against fresh observations of the same
//! collection only pay for the event terms. Pairwise tables are materialized
//! up to [`MATRIX_CAP`] candidates; larger collections are processed
//! streaming with the same outcome, minus the per-candidate rejection lists.
//! On piecewise-law and covariate-free candidates the decomposed statistic
//! reproduces [`crate::testing::test_statistic`] exactly; product-form
//! candidates use a regrouped summation that agrees up to float roundoff.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IpsError, Result};
use crate::geometry::{self, intensity_covariate_free};
use crate::nets::{CandidateNet, COLLECTION_CANDIDATE_CAP};
use crate::simulate::ObservationSet;
use crate::surface::{CovCurve, EvalCtx, IntensitySurface, SqrtFunction, TimeLaw};
use crate::testing::{tie_accepts_fprime, TestConstants};

/// Largest candidate count for which the pairwise tables (and the
/// per-candidate rejection lists) are materialized.
pub const MATRIX_CAP: usize = 2000;

/// Parameters of one selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Weight of the radius term in the objective, in `(0, 4]`.
    pub epsilon: f64,
    pub constants: TestConstants,
    /// Seed of the deterministic coin used on exact test ties.
    pub tie_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { epsilon: 1.0, constants: TestConstants::calibrated(), tie_seed: 0 }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if self.epsilon.is_finite() && self.epsilon > 0.0 && self.epsilon <= 4.0 {
            Ok(())
        } else {
            Err(IpsError::InvalidParameter("epsilon must lie in (0, 4]".into()))
        }
    }
}

/// Outcome of a selection run. Vectors are indexed by the unified candidate
/// universe; `descriptors` ties the indices back to concrete functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: SqrtFunction,
    pub chosen_index: usize,
    /// Label of the net that gives the chosen candidate its radius.
    pub chosen_net_label: String,
    /// Worst squared Hellinger distance to a defeater, zero when undefeated.
    pub gamma: Vec<f64>,
    /// Smallest containing-net radius per candidate.
    pub eta_bar_of: Vec<f64>,
    /// Defeaters per candidate; empty lists when the collection exceeded
    /// [`MATRIX_CAP`] and ran streaming.
    pub rejection_sets: Vec<Vec<usize>>,
    pub descriptors: Vec<String>,
    pub tests_run: usize,
}

impl SelectionResult {
    /// The selected intensity, the square of the chosen candidate.
    pub fn chosen_intensity(&self) -> IntensitySurface {
        self.chosen.square()
    }
}

/// Smallest radius among the nets of `collection` containing `f`, compared
/// by structural descriptor.
pub fn eta_bar_of(f: &SqrtFunction, collection: &[CandidateNet]) -> Result<f64> {
    let descriptor = f.descriptor();
    let mut best: Option<f64> = None;
    for net in collection {
        if net.candidates.iter().any(|c| c.descriptor() == descriptor) {
            best = Some(best.map_or(net.eta_bar, |b| b.min(net.eta_bar)));
        }
    }
    best.ok_or(IpsError::OrphanCandidate)
}

/// Merge collections, adding each collection's mixing weight to its nets.
/// The mixing weights must satisfy `sum exp(-delta) <= 1`. Selecting over the
/// result is identical to selecting over a hand-merged collection with the
/// shifted weights.
pub fn mix_collections(parts: Vec<(Vec<CandidateNet>, f64)>) -> Result<Vec<CandidateNet>> {
    let sum: f64 = parts.iter().map(|(_, delta)| (-delta).exp()).sum();
    if !(sum <= 1.0 + 1e-9) {
        return Err(IpsError::WeightSumExceeded { sum });
    }
    let mut merged = Vec::new();
    for (nets, delta) in parts {
        for mut net in nets {
            net.weight += delta;
            merged.push(net);
        }
    }
    Ok(merged)
}

/// Select from `collection` against one observed sample.
pub fn run_selection(
    collection: &[CandidateNet],
    obs: &ObservationSet,
    ctx: &EvalCtx,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    SelectionEngine::new(collection, ctx, config)?.select(obs, ctx)
}

/// The deduplicated candidate universe with per-candidate radii.
struct Universe {
    candidates: Vec<SqrtFunction>,
    descriptors: Vec<String>,
    /// Fingerprints of the squared candidates, the identities the pairwise
    /// tests see; used by the tie coin.
    fingerprints: Vec<u64>,
    eta_bars: Vec<f64>,
    /// Label of the radius-defining net per candidate.
    labels: Vec<String>,
}

impl Universe {
    fn len(&self) -> usize {
        self.candidates.len()
    }
}

fn build_universe(collection: &[CandidateNet]) -> Result<Universe> {
    if collection.is_empty() {
        return Err(IpsError::EmptyCollection);
    }
    let total: usize = collection.iter().map(CandidateNet::len).sum();
    if total > COLLECTION_CANDIDATE_CAP {
        return Err(IpsError::CandidateCapExceeded { got: total, cap: COLLECTION_CANDIDATE_CAP });
    }
    let mass: f64 = collection.iter().map(|net| (-net.weight).exp()).sum();
    if !(mass <= 1.0 + 1e-9) {
        return Err(IpsError::WeightSumExceeded { sum: mass });
    }
    let mut universe = Universe {
        candidates: Vec::new(),
        descriptors: Vec::new(),
        fingerprints: Vec::new(),
        eta_bars: Vec::new(),
        labels: Vec::new(),
    };
    let mut index: HashMap<String, usize> = HashMap::new();
    for net in collection {
        for cand in &net.candidates {
            let descriptor = cand.descriptor();
            match index.get(&descriptor) {
                Some(&k) => {
                    if net.eta_bar < universe.eta_bars[k] {
                        universe.eta_bars[k] = net.eta_bar;
                        universe.labels[k] = net.label.clone();
                    }
                }
                None => {
                    index.insert(descriptor.clone(), universe.len());
                    universe.fingerprints.push(cand.square().fingerprint());
                    universe.candidates.push(cand.clone());
                    universe.descriptors.push(descriptor);
                    universe.eta_bars.push(net.eta_bar);
                    universe.labels.push(net.label.clone());
                }
            }
        }
    }
    if universe.len() == 0 {
        return Err(IpsError::EmptyCollection);
    }
    Ok(universe)
}

/// Per-process law assignment of a piecewise candidate, as registry ids.
enum LawIds {
    Uniform(u32),
    PerProcess(Vec<u32>),
}

impl LawIds {
    fn at(&self, i: usize) -> u32 {
        match self {
            LawIds::Uniform(id) => *id,
            LawIds::PerProcess(ids) => ids[i],
        }
    }
}

/// Per-process amplitude of a separable candidate `|g(t, x_i)| = a_i u(t)`.
enum Scalars {
    Uniform(f64),
    PerProcess(Vec<f64>),
}

impl Scalars {
    fn at(&self, i: usize) -> f64 {
        match self {
            Scalars::Uniform(a) => *a,
            Scalars::PerProcess(v) => v[i],
        }
    }
}

/// Evaluation strategy for the sample-independent pair terms.
enum Repr {
    Piecewise(LawIds),
    Separable { time: usize, scalars: Scalars },
    Generic,
}

/// Candidate universe plus the tabulated pieces the pair terms are built
/// from: a law registry with the pairwise integral table, and node-tabulated
/// absolute time profiles for separable candidates.
struct EngineCore {
    universe: Universe,
    squares: Vec<IntensitySurface>,
    reprs: Vec<Repr>,
    law_len: usize,
    /// `integral sqrt((u^2+v^2)/2)(v-u) - (v^2-u^2) dmu` per ordered law pair.
    law_mu: Vec<f64>,
    /// `|u(t_k)|` on the quadrature nodes per registered time profile.
    time_values: Vec<Vec<f64>>,
    /// `integral u^2 dmu` per registered time profile.
    time_norms: Vec<f64>,
    n: usize,
    nodes_len: usize,
}

fn intern_law(laws: &mut Vec<TimeLaw>, keys: &mut HashMap<String, u32>, law: &TimeLaw) -> u32 {
    let key = format!("{law:?}");
    if let Some(&id) = keys.get(&key) {
        return id;
    }
    let id = laws.len() as u32;
    laws.push(law.clone());
    keys.insert(key, id);
    id
}

fn intern_time(
    values: &mut Vec<Vec<f64>>,
    keys: &mut HashMap<String, usize>,
    key: String,
    make: impl FnOnce() -> Vec<f64>,
) -> usize {
    if let Some(&id) = keys.get(&key) {
        return id;
    }
    let id = values.len();
    values.push(make());
    keys.insert(key, id);
    id
}

impl EngineCore {
    fn build(universe: Universe, ctx: &EvalCtx) -> Self {
        let n = ctx.n();
        let nodes = ctx.quad.nodes();
        let mut laws: Vec<TimeLaw> = Vec::new();
        let mut law_keys: HashMap<String, u32> = HashMap::new();
        let mut time_values: Vec<Vec<f64>> = Vec::new();
        let mut time_keys: HashMap<String, usize> = HashMap::new();
        let reprs: Vec<Repr> = universe
            .candidates
            .iter()
            .map(|cand| match cand {
                SqrtFunction::Constant { level } => Repr::Piecewise(LawIds::Uniform(intern_law(
                    &mut laws,
                    &mut law_keys,
                    &TimeLaw::Power { scale: *level, exponent: 0.0 },
                ))),
                SqrtFunction::TimeLaw(law) => {
                    Repr::Piecewise(LawIds::Uniform(intern_law(&mut laws, &mut law_keys, law)))
                }
                SqrtFunction::PiecewiseLaw { partition, laws: segment_laws }
                    if partition.n() == n =>
                {
                    if partition.num_segments() == 1 {
                        Repr::Piecewise(LawIds::Uniform(intern_law(
                            &mut laws,
                            &mut law_keys,
                            &segment_laws[0],
                        )))
                    } else {
                        let ids = (0..n)
                            .map(|i| {
                                intern_law(
                                    &mut laws,
                                    &mut law_keys,
                                    &segment_laws[partition.segment_of(i)],
                                )
                            })
                            .collect();
                        Repr::Piecewise(LawIds::PerProcess(ids))
                    }
                }
                SqrtFunction::ProductExp { law, theta } => {
                    let time = intern_time(
                        &mut time_values,
                        &mut time_keys,
                        format!("law:{law:?}"),
                        || nodes.iter().map(|&t| law.eval(t).abs()).collect(),
                    );
                    let scalars = if theta.iter().all(|v| *v == 0.0) {
                        Scalars::Uniform(1.0)
                    } else {
                        Scalars::PerProcess(
                            (0..n).map(|i| ctx.covariates.dot(i, theta).exp()).collect(),
                        )
                    };
                    Repr::Separable { time, scalars }
                }
                SqrtFunction::Product { kappa, time, cov } => {
                    let time = intern_time(
                        &mut time_values,
                        &mut time_keys,
                        format!("curve:{time:?}"),
                        || nodes.iter().map(|&t| time.eval(t, ctx.domain).abs()).collect(),
                    );
                    let scalars = match cov {
                        CovCurve::Constant(c) => Scalars::Uniform((kappa * c).abs()),
                        _ => Scalars::PerProcess(
                            (0..n).map(|i| (kappa * cov.eval(i, ctx.covariates)).abs()).collect(),
                        ),
                    };
                    Repr::Separable { time, scalars }
                }
                _ => Repr::Generic,
            })
            .collect();
        let law_len = laws.len();
        let mut law_mu = vec![0.0; law_len * law_len];
        for (u, lu) in laws.iter().enumerate() {
            for (v, lv) in laws.iter().enumerate() {
                if u == v {
                    continue;
                }
                law_mu[u * law_len + v] = ctx.quad.integrate(|t| {
                    let a = lu.eval(t).abs();
                    let b = lv.eval(t).abs();
                    (0.5 * (a * a + b * b)).sqrt() * (b - a) - (b * b - a * a)
                });
            }
        }
        let time_norms = time_values
            .iter()
            .map(|vals| {
                let squared: Vec<f64> = vals.iter().map(|v| v * v).collect();
                ctx.quad.integrate_values(&squared)
            })
            .collect();
        let squares = universe.candidates.iter().map(SqrtFunction::square).collect();
        Self {
            universe,
            squares,
            reprs,
            law_len,
            law_mu,
            time_values,
            time_norms,
            n,
            nodes_len: nodes.len(),
        }
    }

    /// Sample-independent terms of pair `(i, j)`: the integral part of the
    /// statistic (already divided by `2n`) and the squared Hellinger
    /// distance between the squared candidates.
    fn pair_mu_hsq(
        &self,
        i: usize,
        j: usize,
        ctx: &EvalCtx,
        scratch: &mut Vec<f64>,
    ) -> Result<(f64, f64)> {
        let nf = self.n as f64;
        match (&self.reprs[i], &self.reprs[j]) {
            (Repr::Piecewise(a), Repr::Piecewise(b)) => {
                let l = self.law_len;
                let mu_sum = match (a, b) {
                    (LawIds::Uniform(u), LawIds::Uniform(v)) => {
                        nf * self.law_mu[*u as usize * l + *v as usize]
                    }
                    _ => (0..self.n)
                        .map(|p| self.law_mu[a.at(p) as usize * l + b.at(p) as usize])
                        .sum(),
                };
                let hsq = geometry::hellinger_sq(&self.squares[i], &self.squares[j], ctx)?;
                Ok((mu_sum / (2.0 * nf), hsq))
            }
            (
                Repr::Separable { time: ta, scalars: sa },
                Repr::Separable { time: tb, scalars: sb },
            ) => {
                let ua = &self.time_values[*ta];
                let ub = &self.time_values[*tb];
                scratch.clear();
                scratch.extend(ua.iter().zip(ub).map(|(&u, &v)| u * v));
                let guv = ctx.quad.integrate_values(scratch);
                let (guu, gvv) = (self.time_norms[*ta], self.time_norms[*tb]);
                let groups: Vec<(f64, f64, f64)> = match (sa, sb) {
                    (Scalars::Uniform(a), Scalars::Uniform(b)) => vec![(*a, *b, nf)],
                    _ => {
                        let mut counts: BTreeMap<(u64, u64), u32> = BTreeMap::new();
                        for p in 0..self.n {
                            *counts
                                .entry((sa.at(p).to_bits(), sb.at(p).to_bits()))
                                .or_insert(0) += 1;
                        }
                        counts
                            .into_iter()
                            .map(|((ka, kb), c)| {
                                (f64::from_bits(ka), f64::from_bits(kb), c as f64)
                            })
                            .collect()
                    }
                };
                let mut mu_sum = 0.0;
                let mut h_sum = 0.0;
                for &(a, b, count) in &groups {
                    scratch.clear();
                    scratch.extend(ua.iter().zip(ub).map(|(&u, &v)| {
                        let x = a * u;
                        let y = b * v;
                        (0.5 * (x * x + y * y)).sqrt() * (y - x) - (y * y - x * x)
                    }));
                    mu_sum += count * ctx.quad.integrate_values(scratch);
                    h_sum += count * (a * a * guu + b * b * gvv - 2.0 * a * b * guv);
                }
                Ok((mu_sum / (2.0 * nf), (0.5 * (h_sum / nf)).max(0.0)))
            }
            _ => {
                let f = &self.squares[i];
                let g = &self.squares[j];
                let term = |p: usize| {
                    ctx.quad.integrate(|t| {
                        let a = f.sqrt_at(t, p, ctx);
                        let b = g.sqrt_at(t, p, ctx);
                        (0.5 * (a * a + b * b)).sqrt() * (b - a) - (b * b - a * a)
                    })
                };
                let mu_sum: f64 = if intensity_covariate_free(f) && intensity_covariate_free(g) {
                    nf * term(0)
                } else {
                    (0..self.n).map(term).sum()
                };
                let hsq = geometry::hellinger_sq(f, g, ctx)?;
                Ok((mu_sum / (2.0 * nf), hsq))
            }
        }
    }
}

/// Pairwise tables for collections within [`MATRIX_CAP`], packed in the
/// order of `list`.
struct PairData {
    list: Vec<(u32, u32)>,
    mu: Vec<f64>,
    hsq: Vec<f64>,
    bz: Vec<f64>,
}

impl PairData {
    fn build(core: &EngineCore, config: &SelectionConfig, ctx: &EvalCtx) -> Result<Self> {
        let m = core.universe.len();
        let mut list = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m as u32 {
            for j in i + 1..m as u32 {
                list.push((i, j));
            }
        }
        let eta = &core.universe.eta_bars;
        let rows: Vec<(f64, f64, f64)> = list
            .par_iter()
            .map_init(Vec::new, |scratch, &(i, j)| {
                let (i, j) = (i as usize, j as usize);
                let (mu, hsq) = core.pair_mu_hsq(i, j, ctx, scratch)?;
                let z = eta[j] * eta[j] - eta[i] * eta[i];
                Ok((mu, hsq, config.constants.b * z))
            })
            .collect::<Result<_>>()?;
        let mut mu = Vec::with_capacity(rows.len());
        let mut hsq = Vec::with_capacity(rows.len());
        let mut bz = Vec::with_capacity(rows.len());
        for (m_, h_, b_) in rows {
            mu.push(m_);
            hsq.push(h_);
            bz.push(b_);
        }
        Ok(Self { list, mu, hsq, bz })
    }
}

/// Candidate values at the observed events, one row per candidate, in the
/// event order of [`ObservationSet::counting_integral`].
struct EventTable {
    count: usize,
    values: Vec<f64>,
}

impl EventTable {
    fn build(obs: &ObservationSet, candidates: &[SqrtFunction], ctx: &EvalCtx) -> Self {
        let mut ts = Vec::with_capacity(obs.total_events());
        let mut idx = Vec::with_capacity(obs.total_events());
        for (i, p) in obs.processes.iter().enumerate() {
            for &t in &p.times {
                ts.push(t);
                idx.push(i);
            }
        }
        let count = ts.len();
        let mut values = vec![0.0; candidates.len() * count];
        if count > 0 {
            values
                .par_chunks_mut(count)
                .zip(candidates.par_iter())
                .for_each(|(row, cand)| {
                    for (slot, (&t, &i)) in row.iter_mut().zip(ts.iter().zip(&idx)) {
                        *slot = cand.eval(t, i, ctx).abs();
                    }
                });
        }
        Self { count, values }
    }

    fn row(&self, c: usize) -> &[f64] {
        &self.values[c * self.count..(c + 1) * self.count]
    }

    /// `sum_events (b - a) / sqrt(a^2 + b^2)` for the pair `(i, j)`.
    fn pair_sum(&self, i: usize, j: usize) -> f64 {
        let (ra, rb) = (self.row(i), self.row(j));
        let mut acc = 0.0;
        for (&a, &b) in ra.iter().zip(rb) {
            let denom = (a * a + b * b).sqrt();
            if denom != 0.0 {
                acc += (b - a) / denom;
            }
        }
        acc
    }
}

fn decide_j_wins(t: f64, bz: f64, fp_i: u64, fp_j: u64, tie_seed: u64) -> bool {
    if t > bz {
        true
    } else if t < bz {
        false
    } else {
        tie_accepts_fprime(fp_i, fp_j, tie_seed)
    }
}

/// Reusable selection state for one collection under one evaluation context.
///
/// Construction validates the collection, unifies duplicates, and computes
/// everything that does not depend on the sample; [`Self::select`] then costs
/// one event-table pass per observation.
pub struct SelectionEngine {
    core: EngineCore,
    config: SelectionConfig,
    pairs: Option<PairData>,
}

impl SelectionEngine {
    pub fn new(
        collection: &[CandidateNet],
        ctx: &EvalCtx,
        config: &SelectionConfig,
    ) -> Result<Self> {
        config.validate()?;
        let universe = build_universe(collection)?;
        for cand in &universe.candidates {
            cand.validate(ctx)?;
        }
        let core = EngineCore::build(universe, ctx);
        let pairs = if core.universe.len() <= MATRIX_CAP {
            Some(PairData::build(&core, config, ctx)?)
        } else {
            None
        };
        Ok(Self { core, config: config.clone(), pairs })
    }

    pub fn m(&self) -> usize {
        self.core.universe.len()
    }

    pub fn candidates(&self) -> &[SqrtFunction] {
        &self.core.universe.candidates
    }

    pub fn eta_bars(&self) -> &[f64] {
        &self.core.universe.eta_bars
    }

    /// Run the pairwise tests against `obs` and pick the winner. The context
    /// must be the one the engine was built with.
    pub fn select(&self, obs: &ObservationSet, ctx: &EvalCtx) -> Result<SelectionResult> {
        self.check_ctx(obs, ctx)?;
        let events = EventTable::build(obs, &self.core.universe.candidates, ctx);
        let (gamma, rejection_sets) = match &self.pairs {
            Some(pairs) => self.run_materialized(pairs, &events),
            None => (self.run_streaming(&events, ctx)?, vec![Vec::new(); self.m()]),
        };
        Ok(self.assemble(gamma, rejection_sets))
    }

    fn check_ctx(&self, obs: &ObservationSet, ctx: &EvalCtx) -> Result<()> {
        if obs.n() != self.core.n || ctx.n() != self.core.n {
            return Err(IpsError::DegenerateInput(format!(
                "selection engine was built for {} processes, observation has {} and context {}",
                self.core.n,
                obs.n(),
                ctx.n()
            )));
        }
        if ctx.quad.nodes().len() != self.core.nodes_len {
            return Err(IpsError::DegenerateInput(
                "selection engine was built with a different quadrature rule".into(),
            ));
        }
        Ok(())
    }

    fn run_materialized(&self, pairs: &PairData, events: &EventTable) -> (Vec<f64>, Vec<Vec<usize>>) {
        let m = self.m();
        let nf = self.core.n as f64;
        let fps = &self.core.universe.fingerprints;
        let seed = self.config.tie_seed;
        let winners: Vec<bool> = pairs
            .list
            .par_iter()
            .enumerate()
            .map(|(p, &(i, j))| {
                let t = pairs.mu[p] + events.pair_sum(i as usize, j as usize) / (SQRT_2 * nf);
                decide_j_wins(t, pairs.bz[p], fps[i as usize], fps[j as usize], seed)
            })
            .collect();
        let mut gamma = vec![0.0f64; m];
        let mut rejection_sets: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (p, &(i, j)) in pairs.list.iter().enumerate() {
            let (winner, loser) =
                if winners[p] { (j as usize, i as usize) } else { (i as usize, j as usize) };
            gamma[loser] = gamma[loser].max(pairs.hsq[p]);
            rejection_sets[loser].push(winner);
        }
        (gamma, rejection_sets)
    }

    fn run_streaming(&self, events: &EventTable, ctx: &EvalCtx) -> Result<Vec<f64>> {
        let m = self.m();
        let nf = self.core.n as f64;
        let eta = &self.core.universe.eta_bars;
        let fps = &self.core.universe.fingerprints;
        let seed = self.config.tie_seed;
        let b = self.config.constants.b;
        (0..m)
            .into_par_iter()
            .try_fold(
                || (vec![0.0f64; m], Vec::new()),
                |mut state, i| -> Result<(Vec<f64>, Vec<f64>)> {
                    for j in i + 1..m {
                        let (mu, hsq) = self.core.pair_mu_hsq(i, j, ctx, &mut state.1)?;
                        let t = mu + events.pair_sum(i, j) / (SQRT_2 * nf);
                        let bz = b * (eta[j] * eta[j] - eta[i] * eta[i]);
                        let loser =
                            if decide_j_wins(t, bz, fps[i], fps[j], seed) { i } else { j };
                        state.0[loser] = state.0[loser].max(hsq);
                    }
                    Ok(state)
                },
            )
            .map(|r| r.map(|(gamma, _)| gamma))
            .try_reduce(
                || vec![0.0; m],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x = x.max(y);
                    }
                    Ok(a)
                },
            )
    }

    fn assemble(&self, gamma: Vec<f64>, rejection_sets: Vec<Vec<usize>>) -> SelectionResult {
        let u = &self.core.universe;
        let m = u.len();
        let eps = self.config.epsilon;
        let score = |k: usize| gamma[k].max(eps * u.eta_bars[k]);
        let mut best = 0;
        for k in 1..m {
            let (sk, sb) = (score(k), score(best));
            let better = sk < sb
                || (sk == sb
                    && (u.eta_bars[k] < u.eta_bars[best]
                        || (u.eta_bars[k] == u.eta_bars[best]
                            && u.descriptors[k] < u.descriptors[best])));
            if better {
                best = k;
            }
        }
        SelectionResult {
            chosen: u.candidates[best].clone(),
            chosen_index: best,
            chosen_net_label: u.labels[best].clone(),
            gamma,
            eta_bar_of: u.eta_bars.clone(),
            rejection_sets,
            descriptors: u.descriptors.clone(),
            tests_run: m * (m - 1) / 2,
        }
    }

    #[cfg(test)]
    fn select_streaming_for_tests(
        &self,
        obs: &ObservationSet,
        ctx: &EvalCtx,
    ) -> Result<SelectionResult> {
        self.check_ctx(obs, ctx)?;
        let events = EventTable::build(obs, &self.core.universe.candidates, ctx);
        let gamma = self.run_streaming(&events, ctx)?;
        Ok(self.assemble(gamma, vec![Vec::new(); self.m()]))
    }
}
