// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Benchmark CLI.
//!
//! `bench run` executes a scenario (built-in name or scenario file) and
//! writes `results.csv`, `report.txt`, and `transitions.log` into the
//! output directory. `bench report` re-renders a summary from an existing
//! `results.csv`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use deskpilot_bench::scenario::{builtin, builtin_names, parse_file, parse_mode, Scenario};
use deskpilot_bench::{csv, host, report, runner};

#[derive(Parser)]
#[command(name = "bench", about = "Scaling and pipeline benchmarks for the pilot runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write results.csv, report.txt, transitions.log.
    Run(RunArgs),
    /// Summarize an existing results.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Override the transport backend (in_process or tcp).
    #[arg(long)]
    backend: Option<String>,
    /// Override the rank counts, e.g. `1,2,4`.
    #[arg(long)]
    ranks: Option<String>,
    /// Override the scenario mode (weak, strong, heterogeneous, batch).
    #[arg(long)]
    mode: Option<String>,
    /// Override rows per rank (weak/pipeline modes).
    #[arg(long)]
    rows_per_rank: Option<usize>,
    /// Override total rows (strong mode).
    #[arg(long)]
    total_rows: Option<usize>,
    /// Override timing iterations per task.
    #[arg(long)]
    iterations: Option<usize>,
    /// Override the data seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Explicit TCP endpoints (`host:port` comma list), one per worker
    /// rank plus one for the master.
    #[arg(long)]
    endpoints: Option<String>,
    /// Rank cap; defaults to twice the logical core count.
    #[arg(long)]
    oversub_cap: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a results.csv produced by `bench run`.
    #[arg(long)]
    results: PathBuf,
    /// Optional directory to also write report.txt into.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    if let Some(s) = builtin(arg) {
        return Ok(s);
    }
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario file {}", path.display()))?;
        return parse_file(&text);
    }
    Err(anyhow!(
        "`{arg}` is neither a built-in scenario ({}) nor an existing file",
        builtin_names().join(", ")
    ))
}

fn apply_overrides(mut s: Scenario, args: &RunArgs) -> Result<Scenario> {
    if let Some(backend) = &args.backend {
        s.backend = backend.parse().map_err(|e: String| anyhow!(e))?;
    }
    if let Some(mode) = &args.mode {
        s.mode = parse_mode(mode)?;
    }
    if let Some(ranks) = &args.ranks {
        s.ranks = ranks
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(anyhow::Error::from))
            .collect::<Result<_>>()?;
    }
    if let Some(rows) = args.rows_per_rank {
        s.rows_per_rank = Some(rows);
    }
    if let Some(total) = args.total_rows {
        s.total_rows = Some(total);
    }
    if let Some(iters) = args.iterations {
        s.iterations = iters;
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(endpoints) = &args.endpoints {
        s.endpoints = endpoints.split(',').map(|e| e.trim().to_string()).collect();
    }
    s.validate()?;
    Ok(s)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let scenario = apply_overrides(load_scenario(&args.scenario)?, &args)?;
    let cap = args
        .oversub_cap
        .unwrap_or_else(|| host::default_oversubscription_cap(&host::detect()));

    let outcome = runner::run_scenario(&scenario, cap)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    std::fs::write(args.out.join("results.csv"), csv::to_csv(&outcome.records))?;
    let mut log = String::new();
    for e in &outcome.transitions {
        log.push_str(&e.log_line());
        log.push('\n');
    }
    std::fs::write(args.out.join("transitions.log"), log)?;
    let text = report::render(&outcome.summary);
    std::fs::write(args.out.join("report.txt"), &text)?;
    print!("{text}");
    println!("wrote {}", args.out.join("results.csv").display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.results)
        .with_context(|| format!("reading {}", args.results.display()))?;
    let records = csv::from_csv(&text)?;
    let rendered = report::render_records(&records);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &rendered)?;
    }
    print!("{rendered}");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    }
}
