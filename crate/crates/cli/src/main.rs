//! Command-line front end: single runs, parameter sweeps, and fixture
//! generation for the pooled ride-and-parcel fleet simulator.

mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use rpp_core::baseline::write_truck_plan;
use rpp_core::demand::{write_customer_dump, write_parcel_dump};
use rpp_core::event::{write_audit_csv, write_events_csv, write_rebalance_csv};
use rpp_core::kpi::{read_summary, write_report, SUMMARY_KEYS};
use rpp_core::SimConfig;

use scenario::{cell_demand, load_inputs, load_scenario, Cell, Inputs, Scenario};

#[derive(Parser)]
#[command(name = "rpp", version, about = "Ride-parcel-pooling fleet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario and write its outputs.
    Run {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the demand seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario's sweep grid, one subdirectory per cell.
    Sweep {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel cell executions.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write a named synthetic scenario input set.
    GenFixture {
        /// Fixture name: line4, line4_td, or grid<k> (e.g. grid10).
        name: String,
        /// Directory for the generated files.
        dir: PathBuf,
    },
}

/// Failures split by exit code: 2 for bad inputs, 3 for errors during or
/// after the simulation.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn validation<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Validation)
}

fn runtime<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
        } => cmd_run(&scenario, out, seed),
        Command::Sweep {
            scenario,
            out,
            jobs,
        } => cmd_sweep(&scenario, out, jobs),
        Command::GenFixture { name, dir } => cmd_gen_fixture(&name, &dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn cell_config(scenario: &Scenario, cell: &Cell) -> SimConfig {
    let mut cfg = scenario.cfg.clone();
    cfg.threshold = cell.threshold;
    cfg.parcel_share = cell.parcel_share;
    cfg.seed = cell.seed;
    cfg
}

/// Runs one parameter cell and writes every output file into `dir`.
fn run_cell(inputs: &Inputs, scenario: &Scenario, cell: &Cell, dir: &Path) -> Result<()> {
    let cfg = cell_config(scenario, cell);
    let demand = cell_demand(inputs, &cfg)?;
    let out = rpp_core::run(&cfg, &inputs.net, &demand, cell.strategy, cell.mode)
        .with_context(|| format!("simulating {}", cell.dir_name()))?;

    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_customer_dump(&dir.join("customers.csv"), &demand.customers, &inputs.net)?;
    write_parcel_dump(&dir.join("parcels.csv"), &demand.parcels, &inputs.net)?;
    write_events_csv(&dir.join("events.csv"), &out.events, &inputs.net)?;
    write_audit_csv(&dir.join("audit.csv"), &out.audit)?;
    write_rebalance_csv(&dir.join("rebalance.csv"), &out.rebalance_log, &inputs.net)?;
    if let Some(plan) = &out.truck_plan {
        write_truck_plan(&dir.join("truck_plan.csv"), plan, &inputs.net)?;
    }
    write_report(&out.kpi, &cfg, dir)?;
    Ok(())
}

fn print_cell_summary(dir: &Path) -> Result<()> {
    let summary = read_summary(&dir.join("summary.csv"))?;
    let get = |k: &str| summary.get(k).cloned().unwrap_or_default();
    println!(
        "served {} of {} customers, {} of {} parcel requests, {} fleet km -> {}",
        get("served_customers"),
        get("revealed_customers"),
        get("served_parcel_requests"),
        get("revealed_parcel_requests"),
        get("fleet_km"),
        dir.display()
    );
    Ok(())
}

fn cmd_run(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> CmdResult {
    let mut scenario = validation(load_scenario(path))?;
    if let Some(seed) = seed {
        scenario.cfg.seed = seed;
    }
    let inputs = validation(load_inputs(&scenario))?;
    let dir = out.unwrap_or_else(|| scenario.out.clone());
    let cell = Cell {
        threshold: scenario.cfg.threshold,
        parcel_share: scenario.cfg.parcel_share,
        strategy: scenario.strategy,
        mode: scenario.mode,
        seed: scenario.cfg.seed,
    };
    runtime(run_cell(&inputs, &scenario, &cell, &dir))?;
    runtime(print_cell_summary(&dir))?;
    Ok(())
}

fn cmd_sweep(path: &Path, out: Option<PathBuf>, jobs: usize) -> CmdResult {
    if jobs == 0 {
        return Err(Failure::Validation(anyhow!("--jobs must be at least 1")));
    }
    let mut scenario = validation(load_scenario(path))?;
    if let Some(out) = out {
        scenario.out = out;
    }
    let inputs = validation(load_inputs(&scenario))?;
    let cells = scenario.sweep.cells();

    let pool = runtime(
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building worker pool"),
    )?;
    let results: Vec<Result<bool>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let dir = scenario.out.join(cell.dir_name());
                if dir.join("summary.csv").is_file() {
                    return Ok(false);
                }
                run_cell(&inputs, &scenario, cell, &dir)?;
                Ok(true)
            })
            .collect()
    });
    let mut ran = 0;
    let mut skipped = 0;
    for (cell, result) in cells.iter().zip(results) {
        let fresh = runtime(result)?;
        if fresh {
            ran += 1;
        } else {
            skipped += 1;
        }
        println!(
            "cell {}: {}",
            cell.dir_name(),
            if fresh { "done" } else { "already complete" }
        );
    }
    runtime(write_index(&scenario.out, &cells))?;
    println!(
        "sweep complete: {} cells ({} run, {} already complete) -> {}",
        cells.len(),
        ran,
        skipped,
        scenario.out.display()
    );
    Ok(())
}

/// One row per cell with the full KPI summary, in sweep order.
fn write_index(out: &Path, cells: &[Cell]) -> Result<()> {
    let mut text = String::from("cell,threshold,parcel_share,strategy,mode,seed");
    for key in SUMMARY_KEYS {
        text.push(',');
        text.push_str(key);
    }
    text.push('\n');
    for cell in cells {
        let dir = out.join(cell.dir_name());
        let summary = read_summary(&dir.join("summary.csv"))
            .with_context(|| format!("reading summary for {}", cell.dir_name()))?;
        text.push_str(&format!(
            "{},{},{},{},{},{}",
            cell.dir_name(),
            cell.threshold,
            cell.parcel_share,
            cell.strategy,
            cell.mode,
            cell.seed
        ));
        for key in SUMMARY_KEYS {
            text.push(',');
            text.push_str(summary.get(*key).map(String::as_str).unwrap_or(""));
        }
        text.push('\n');
    }
    fs::write(out.join("index.csv"), text).context("writing index.csv")?;
    Ok(())
}

fn cmd_gen_fixture(name: &str, dir: &Path) -> CmdResult {
    let fixture = validation(
        rpp_core::fixture::by_name(name)
            .ok_or_else(|| anyhow!("unknown fixture `{name}` (try line4, line4_td, grid10)")),
    )?;
    runtime(
        fixture
            .write(dir)
            .with_context(|| format!("writing fixture to {}", dir.display())),
    )?;
    println!("wrote fixture {name} -> {}", dir.display());
    Ok(())
}
