use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use flashtco::trace::TraceFormat;
use flashtco_cli::*;

#[derive(Parser)]
#[command(
    name = "flashtco",
    version,
    about = "Trace-driven TCO modeling and workload placement for flash pools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the piecewise WAF curve to measured (seq_ratio, waf) samples.
    FitWaf {
        /// CSV with header `seq_ratio,waf`.
        #[arg(long)]
        samples: PathBuf,
        /// Comma-separated turning-point candidates (default 0.30..0.70).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Profile a block trace into a workload row.
    Profile {
        #[arg(long)]
        trace: PathBuf,
        /// Trace layout: `msr` or `simple`.
        #[arg(long, default_value = "msr")]
        layout: String,
        /// Workload id (defaults toace file stem).
        #[arg(long)]
        id: Option<String>,
        /// Arrival time stamped into the output row, days.
        #[arg(long, default_value_t = 0.0)]
        arrival: f64,
        /// Peak-throughput window, seconds.
        #[arg(long, default_value_t = 300.0)]
        window_secs: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay workload arrivals against a disk pool under one policy.
    Simulate {
        /// Workload CSV (see README for the schema).
        #[arg(long)]
        workloads: PathBuf,
        /// Disk pool JSON.
        #[arg(long)]
        pool: PathBuf,
        /// Simulation config JSON: policy, horizon, seed.
        #[arg(long)]
        policy: PathBuf,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// WAF model JSON applied to pool entries without one.
        #[arg(long)]
        waf_model: Option<PathBuf>,
        /// Uniform RAID conversion `mode:n` for entries without a stanza.
        #[arg(long)]
        raid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Provision a homogeneous pool and place a fully known workload set.
    OfflinePlan {
        #[arg(long)]
        workloads: PathBuf,
        /// Offline config JSON: thresholds, switch delta, disk spec.
        #[arg(long)]
        offline_config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate two or more simulation reports over the same workload set.
    Compare {
        #[arg(long, num_args = 2.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::FitWaf { samples, grid, out } => cmd_fit_waf(&samples, grid.as_deref(), &out),
        Command::Profile { trace, layout, id, arrival, window_secs, out } => {
            let layout = TraceFormat::from_str(&layout)
                .map_err(|e| CliError::Config(e.to_string()))?;
            cmd_profile(&trace, layout, id.as_deref(), arrival, window_secs, &out)
        }
        Command::Simulate { workloads, pool, policy, seed, waf_model, raid, out } => {
            cmd_simulate(
                &workloads,
                &pool,
                &policy,
                seed,
                waf_model.as_deref(),
                raid.as_deref(),
                &out,
            )
        }
        Command::OfflinePlan { workloads, offline_config, out } => {
            cmd_offline_plan(&workloads, &offline_config, &out)
        }
        Command::Compare { reports, out } => cmd_compare(&reports, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
