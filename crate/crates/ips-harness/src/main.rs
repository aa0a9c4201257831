use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use ips_core::selector::{run_selection, SelectionConfig};
use ips_core::simulate::simulate;
use ips_core::testing::TestConstants;
use ips_harness::scenario::build_collection;
use ips_harness::verify::Tolerances;
use ips_harness::{changepoint_report, rate_slope, run_benchmark, verify, Scenario, Suite};

#[derive(Parser)]
#[command(name = "ips-harness", version, about = "Poisson-process estimation experiments")]
struct Cli {
    /// Worker threads for replicate-level parallelism (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstantsArg {
    Paper,
    Calibrated,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one sample from the scenario truth and write the events.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for events.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample size (default: first entry of the scenario n-grid).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Select an estimate from one simulated sample.
    Estimate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        constants: Option<ConstantsArg>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Monte Carlo risk study over the scenario n-grid.
    Benchmark {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for rows.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        constants: Option<ConstantsArg>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Change-point recovery study for a piecewise truth.
    Changepoint {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        constants: Option<ConstantsArg>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run the self-verification suites and print the pass/fail table.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Output directory for verify.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("worker pool already initialized")?;
    }
    match cli.command {
        Command::Simulate { scenario, seed, out, n } => {
            let scenario = load_scenario(&scenario)?;
            let n = n.unwrap_or(scenario.n_grid[0]);
            scenario.validate_n(n)?;
            let bench = scenario.context_for(n)?;
            let ctx = bench.ctx();
            let truth = scenario.truth.materialize(n)?;
            truth.validate(&ctx)?;
            let obs = simulate(&truth, &ctx, seed)?;
            let mut csv = String::from("process,time\n");
            for (i, process) in obs.processes.iter().enumerate() {
                for t in &process.times {
                    csv.push_str(&format!("{i},{t:.16e}\n"));
                }
            }
            println!(
                "scenario {}: n={n}, seed={seed}, {} events",
                scenario.name,
                obs.total_events()
            );
            if let Some(dir) = out {
                write_out(&dir, "events.csv", &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { scenario, seed, out, n, constants, epsilon } => {
            let mut scenario = load_scenario(&scenario)?;
            override_config(&mut scenario.config, constants, epsilon);
            let n = n.unwrap_or(scenario.n_grid[0]);
            let bench = scenario.context_for(n)?;
            let ctx = bench.ctx();
            let truth = scenario.truth.materialize(n)?;
            truth.validate(&ctx)?;
            let collection = build_collection(&scenario.collection, &ctx)?;
            let obs = simulate(&truth, &ctx, seed)?;
            let result = run_selection(&collection, &obs, &ctx, &scenario.config)?;
            let risk = ips_core::geometry::hellinger_sq(
                &truth,
                &result.chosen_intensity(),
                &ctx,
            )?;
            println!(
                "scenario {}: n={n}, seed={seed}, chose {} from net {}, H^2 risk {risk:.6e}",
                scenario.name,
                result.descriptors[result.chosen_index],
                result.chosen_net_label
            );
            if let Some(dir) = out {
                write_out(&dir, "selection.json", &serde_json::to_string_pretty(&result)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Benchmark { scenario, seed, out, constants, epsilon } => {
            let mut scenario = load_scenario(&scenario)?;
            override_config(&mut scenario.config, constants, epsilon);
            let report = run_benchmark(&scenario, seed)?;
            println!("scenario {}: seed={seed}", report.scenario);
            println!("{:>6} {:>6} {:>11} {:>14} {:>12}", "n", "reps", "candidates", "mean risk", "std error");
            for s in &report.per_n {
                println!(
                    "{:>6} {:>6} {:>11} {:>14.6e} {:>12.4e}",
                    s.n, s.replicates, s.candidates, s.mean_risk, s.std_error
                );
            }
            if report.per_n.len() >= 3 {
                println!("log-log risk slope: {:.4}", rate_slope(&report.mean_risks())?);
            }
            if let Some(dir) = out {
                write_out(&dir, "rows.csv", &report.to_csv())?;
                write_out(&dir, "summary.json", &report.summary_json())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Changepoint { scenario, seed, out, constants, epsilon } => {
            let mut scenario = load_scenario(&scenario)?;
            override_config(&mut scenario.config, constants, epsilon);
            let report = changepoint_report(&scenario, seed)?;
            println!("scenario {}: seed={seed}", report.scenario);
            println!(
                "{:>6} {:>6} {:>14} {:>11} {:>13} {:>13}",
                "n", "reps", "mean risk", "rate ratio", "exact segs", "hit rate +-5"
            );
            for s in &report.per_n {
                println!(
                    "{:>6} {:>6} {:>14.6e} {:>11.4} {:>13.3} {:>13.3}",
                    s.n,
                    s.replicates,
                    s.mean_risk,
                    s.rate_ratio,
                    s.exact_segment_rate,
                    report.hit_rate(s.n, 5)
                );
            }
            if let Some(dir) = out {
                write_out(&dir, "changepoint_rows.csv", &report.to_csv())?;
                write_out(&dir, "changepoint_summary.json", &report.summary_json())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, out } => {
            let report = verify(suite, &Tolerances::default())?;
            print!("{}", report.table());
            if let Some(dir) = out {
                write_out(&dir, "verify.json", &serde_json::to_string_pretty(&report)?)?;
            }
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    Ok(Scenario::from_json(&text)?)
}

fn override_config(
    config: &mut SelectionConfig,
    constants: Option<ConstantsArg>,
    epsilon: Option<f64>,
) {
    match constants {
        Some(ConstantsArg::Paper) => config.constants = TestConstants::paper_faithful(),
        Some(ConstantsArg::Calibrated) => config.constants = TestConstants::calibrated(),
        None => {}
    }
    if let Some(eps) = epsilon {
        config.epsilon = eps;
    }
}

fn write_out(dir: &Path, name: &str, content: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
