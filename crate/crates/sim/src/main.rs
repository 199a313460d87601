use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twoway_core::design::Scheme;
use twoway_sim::{aggregate, run_sweep, write_csv, write_json, RunOptions, SimError, SweepSpec};

#[derive(Parser)]
#[command(
    name = "twoway-sim",
    version,
    about = "Monte Carlo sweeps for two-way relay transceiver designs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per (scheme, point, trial).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the spec, summary and records as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Override master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Fill the wall_ms column (makes output run-dependent).
        #[arg(long)]
        record_timing: bool,
    },
    /// Check which schemes are dimensionally feasible at every sweep point.
    Doctor {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run {
            config,
            out,
            json,
            threads,
            seed,
            record_timing,
        } => {
            let mut spec = SweepSpec::from_path(&config)?;
            if let Some(s) = seed {
                spec.master_seed = s;
            }
            if threads == Some(0) {
                return Err(SimError::Config("--threads must be at least 1".into()));
            }
            let opts = RunOptions {
                threads,
                record_timing,
                ..Default::default()
            };
            let records = run_sweep(&spec, &opts)?;
            write_csv(BufWriter::new(File::create(&out)?), &spec, &records)?;
            if let Some(path) = json {
                write_json(BufWriter::new(File::create(&path)?), &spec, &records)?;
            }
            for row in aggregate(&records) {
                let rate = row
                    .mean_sum_rate
                    .zip(row.stderr_sum_rate)
                    .map(|(m, s)| format!("{m:.3} ± {s:.3}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{:<22} snr {:>6.2} dB  N_B {:>2}  feasible {:>4}/{:<4}  sum rate {rate}",
                    row.scheme.name(),
                    row.snr_db,
                    row.n_b,
                    row.feasible,
                    row.trials
                );
            }
            Ok(())
        }
        Command::Doctor { config } => {
            let spec = SweepSpec::from_path(&config)?;
            for p in spec.points() {
                let cfg = spec.config_at(&p);
                for &s in &spec.schemes {
                    let verdict = if s.dimensions_feasible(&cfg) {
                        "feasible"
                    } else {
                        match s {
                            Scheme::Proposed => "infeasible (needs N_B ≥ L and N_R ≥ L)",
                            Scheme::ChannelInversionNaive => "infeasible (needs N_B ≥ N_R ≥ L)",
                            Scheme::SdmaZf => "infeasible (needs N_R ≥ 2L and N_B ≥ L)",
                        }
                    };
                    println!("{:<22} snr {:>6.2} dB  N_B {:>2}  {verdict}", s.name(), p.snr_db, p.n_b);
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
