//! Monte-Carlo risk benchmarks over a scenario's sample-size grid.
//!
//! For each `n` the harness builds the collection once, then simulates and
//! selects per replicate (replicate-level parallelism; results depend only
//! on the seeds, not on scheduling) and reports the exact Hellinger risk
//! `H^2(s, s_hat)` per replicate plus per-`n` aggregates. CSV rows carry 17
//! significant digits so reports round-trip losslessly; JSON uses serde's
//! shortest lossless float encoding.

use crate::scenario::{build_collection, mix_seed, Scenario};
use ips_core::error::{IpsError, Result};
use ips_core::geometry::hellinger_sq;
use ips_core::selector::{SelectionConfig, SelectionEngine};
use ips_core::simulate::simulate;
use ips_core::{IntensitySurface, SqrtFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::time::Instant;

/// Simulation seed of one replicate, mixed from the run seed, `n`, and the
/// replicate index.
pub fn replicate_seed(base: u64, n: usize, replicate: usize) -> u64 {
    mix_seed(&[base, n as u64, replicate as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub n: usize,
    pub replicate: usize,
    pub sim_seed: u64,
    pub risk: f64,
    pub chosen_label: String,
    pub chosen_descriptor: String,
    pub events: usize,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub replicates: usize,
    pub candidates: usize,
    pub mean_risk: f64,
    /// Sample standard deviation of the risks divided by `sqrt(replicates)`.
    pub std_error: f64,
    pub setup_ms: f64,
    pub mean_replicate_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub scenario: String,
    pub seed: u64,
    pub config: SelectionConfig,
    pub per_n: Vec<NSummary>,
    pub rows: Vec<ReplicateRow>,
}

#[derive(Serialize)]
struct RiskSummaryView<'a> {
    scenario: &'a str,
    seed: u64,
    config: &'a SelectionConfig,
    per_n: &'a [NSummary],
}

impl RiskReport {
    pub fn mean_risks(&self) -> Vec<(usize, f64)> {
        self.per_n.iter().map(|s| (s.n, s.mean_risk)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,replicate,sim_seed,risk,chosen_label,chosen_descriptor,events,runtime_ms\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.n,
                r.replicate,
                r.sim_seed,
                fmt_float(r.risk),
                csv_field(&r.chosen_label),
                csv_field(&r.chosen_descriptor),
                r.events,
                fmt_float(r.runtime_ms)
            ));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let view = RiskSummaryView {
            scenario: &self.scenario,
            seed: self.seed,
            config: &self.config,
            per_n: &self.per_n,
        };
        serde_json::to_string_pretty(&view).expect("reports are serializable")
    }

    /// The report with wall-clock fields removed: equal across reruns with
    /// the same seed, regardless of worker count.
    pub fn deterministic_view(&self) -> Value {
        let mut value = serde_json::to_value(self).expect("reports are serializable");
        strip_runtime(&mut value);
        value
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn strip_runtime(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|k, _| !matches!(k.as_str(), "runtime_ms" | "setup_ms" | "mean_replicate_ms"));
            for v in map.values_mut() {
                strip_runtime(v);
            }
        }
        Value::Array(items) => {
            for v in items {
                strip_runtime(v);
            }
        }
        _ => {}
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

struct ReplicateRecord {
    row: ReplicateRow,
    chosen: SqrtFunction,
}

struct GridBlock {
    summary: NSummary,
    records: Vec<ReplicateRecord>,
}

fn run_block(scenario: &Scenario, seed: u64, n: usize) -> Result<GridBlock> {
    let setup = Instant::now();
    let truth = scenario.truth.materialize(n)?;
    let bench = scenario.context_for(n)?;
    let ctx = bench.ctx();
    truth.validate(&ctx)?;
    let collection = build_collection(&scenario.collection, &ctx)?;
    let total: usize = collection.iter().map(|net| net.candidates.len()).sum();
    if total > scenario.caps.max_candidates {
        return Err(IpsError::CandidateCapExceeded { got: total, cap: scenario.caps.max_candidates });
    }
    let engine = SelectionEngine::new(&collection, &ctx, &scenario.config)?;
    let setup_ms = setup.elapsed().as_secs_f64() * 1e3;

    let records: Vec<ReplicateRecord> = (0..scenario.replicates)
        .into_par_iter()
        .map(|replicate| -> Result<ReplicateRecord> {
            let sim_seed = replicate_seed(seed, n, replicate);
            let clock = Instant::now();
            let obs = simulate(&truth, &ctx, sim_seed)?;
            let events = obs.total_events();
            let selection = engine.select(&obs, &ctx)?;
            let risk = hellinger_sq(&truth, &selection.chosen_intensity(), &ctx)?;
            Ok(ReplicateRecord {
                row: ReplicateRow {
                    n,
                    replicate,
                    sim_seed,
                    risk,
                    chosen_label: selection.chosen_net_label.clone(),
                    chosen_descriptor: selection.chosen.descriptor(),
                    events,
                    runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
                },
                chosen: selection.chosen,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let risks: Vec<f64> = records.iter().map(|r| r.row.risk).collect();
    let times: Vec<f64> = records.iter().map(|r| r.row.runtime_ms).collect();
    Ok(GridBlock {
        summary: NSummary {
            n,
            replicates: scenario.replicates,
            candidates: total,
            mean_risk: mean(&risks),
            std_error: std_error(&risks),
            setup_ms,
            mean_replicate_ms: mean(&times),
        },
        records,
    })
}

/// Simulate, select, and aggregate exact risks over the scenario's grid.
pub fn run_benchmark(scenario: &Scenario, seed: u64) -> Result<RiskReport> {
    scenario.validate()?;
    let mut per_n = Vec::with_capacity(scenario.n_grid.len());
    let mut rows = Vec::with_capacity(scenario.n_grid.len() * scenario.replicates);
    for &n in &scenario.n_grid {
        let block = run_block(scenario, seed, n)?;
        per_n.push(block.summary);
        rows.extend(block.records.into_iter().map(|r| r.row));
    }
    Ok(RiskReport {
        scenario: scenario.name.clone(),
        seed,
        config: scenario.config.clone(),
        per_n,
        rows,
    })
}

/// Least-squares slope of `log mean risk` against `log n`.
pub fn rate_slope(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(IpsError::DegenerateInput(format!(
            "rate fits need at least three sample sizes, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(_, risk)| !risk.is_finite() || risk <= 0.0) {
        return Err(IpsError::DegenerateInput("rate fits need positive mean risks".into()));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, r)| r.ln()).collect();
    let xbar = mean(&xs);
    let ybar = mean(&ys);
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return Err(IpsError::DegenerateInput("rate fits need distinct sample sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointRow {
    pub n: usize,
    pub replicate: usize,
    pub sim_seed: u64,
    pub risk: f64,
    /// Segment starts of the chosen partition (`[0]` for one segment).
    pub starts: Vec<usize>,
    /// `max |chosen - true|` over breakpoints, when the counts match.
    pub breakpoint_error: Option<usize>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointSummary {
    pub n: usize,
    pub replicates: usize,
    pub truth_starts: Vec<usize>,
    pub mean_risk: f64,
    pub std_error: f64,
    /// `mean risk * n / (|P0| * ln n)`: constant along the minimax rate.
    pub rate_ratio: f64,
    /// Fraction of replicates recovering the true segment count.
    pub exact_segment_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointReport {
    pub scenario: String,
    pub seed: u64,
    pub per_n: Vec<ChangepointSummary>,
    pub rows: Vec<ChangepointRow>,
}

#[derive(Serialize)]
struct ChangepointSummaryView<'a> {
    scenario: &'a str,
    seed: u64,
    per_n: &'a [ChangepointSummary],
}

impl ChangepointReport {
    /// Fraction of replicates at `n` that recover the segment count and
    /// place every breakpoint within `tol` indices of the truth.
    pub fn hit_rate(&self, n: usize, tol: usize) -> f64 {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.n == n).collect();
        if rows.is_empty() {
            return 0.0;
        }
        let hits = rows.iter().filter(|r| matches!(r.breakpoint_error, Some(e) if e <= tol)).count();
        hits as f64 / rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("n,replicate,sim_seed,risk,starts,breakpoint_error,runtime_ms\n");
        for r in &self.rows {
            let starts =
                r.starts.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
            let err = r.breakpoint_error.map_or(String::new(), |e| e.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n,
                r.replicate,
                r.sim_seed,
                fmt_float(r.risk),
                csv_field(&starts),
                err,
                fmt_float(r.runtime_ms)
            ));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let view = ChangepointSummaryView {
            scenario: &self.scenario,
            seed: self.seed,
            per_n: &self.per_n,
        };
        serde_json::to_string_pretty(&view).expect("reports are serializable")
    }

    pub fn deterministic_view(&self) -> Value {
        let mut value = serde_json::to_value(self).expect("reports are serializable");
        strip_runtime(&mut value);
        value
    }
}

/// Benchmark a change-point scenario and report partition recovery.
pub fn changepoint_report(scenario: &Scenario, seed: u64) -> Result<ChangepointReport> {
    scenario.validate()?;
    let mut per_n = Vec::with_capacity(scenario.n_grid.len());
    let mut rows = Vec::with_capacity(scenario.n_grid.len() * scenario.replicates);
    for &n in &scenario.n_grid {
        let truth = scenario.truth.materialize(n)?;
        let IntensitySurface::PiecewiseParam { partition: truth_partition, .. } = &truth else {
            return Err(IpsError::DegenerateInput(
                "change-point reports need a piecewise-parametric truth".into(),
            ));
        };
        let truth_starts = truth_partition.starts().to_vec();
        let truth_breaks = truth_partition.breakpoints().to_vec();
        let block = run_block(scenario, seed, n)?;
        let mut n_rows: Vec<ChangepointRow> = Vec::with_capacity(block.records.len());
        for record in block.records {
            let starts = match &record.chosen {
                SqrtFunction::PiecewiseLaw { partition, .. } => partition.starts().to_vec(),
                _ => vec![0],
            };
            let breaks = &starts[1..];
            let breakpoint_error = (breaks.len() == truth_breaks.len()).then(|| {
                breaks
                    .iter()
                    .zip(&truth_breaks)
                    .map(|(&b, &t)| b.abs_diff(t))
                    .max()
                    .unwrap_or(0)
            });
            n_rows.push(ChangepointRow {
                n,
                replicate: record.row.replicate,
                sim_seed: record.row.sim_seed,
                risk: record.row.risk,
                starts,
                breakpoint_error,
                runtime_ms: record.row.runtime_ms,
            });
        }
        let risks: Vec<f64> = n_rows.iter().map(|r| r.risk).collect();
        let exact = n_rows.iter().filter(|r| r.breakpoint_error.is_some()).count();
        let mean_risk = mean(&risks);
        per_n.push(ChangepointSummary {
            n,
            replicates: scenario.replicates,
            truth_starts,
            mean_risk,
            std_error: std_error(&risks),
            rate_ratio: mean_risk * n as f64
                / (truth_breaks.len() as f64 + 1.0)
                / (n as f64).ln(),
            exact_segment_rate: exact as f64 / n_rows.len() as f64,
        });
        rows.extend(n_rows);
    }
    Ok(ChangepointReport { scenario: scenario.name.clone(), seed, per_n, rows })
}
