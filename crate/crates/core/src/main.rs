use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use wetsim::run::{execute, render_summary, write_outputs, RunOptions};
use wetsim::scenario::{load_scenario, Scenario};
use wetsim::schemes::Scheme;

#[derive(Parser)]
#[command(name = "wetsim", version, about = "Multi-point wireless energy transmission simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a scenario and write field maps, coverage curves and a summary.
    Run(RunArgs),
    /// Parse and validate a scenario without running it.
    Check {
        scenario: PathBuf,
    },
    /// Print a bundled scenario to stdout.
    Example {
        #[arg(value_parser = ["freespace", "room"])]
        which: String,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Comma-separated schemes, e.g. `sp1,mp,mpcsd`.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Comma-separated grid names.
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<String>>,
    #[arg(long)]
    max_order: Option<u32>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    p_req_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p_req_max: Option<f64>,
    #[arg(long)]
    p_req_step: Option<f64>,
    /// Check every MPCSD value against a direct time average.
    #[arg(long)]
    oracle_check: bool,
    /// Randomize the time-average window start (with --oracle-check).
    #[arg(long)]
    seed: Option<u64>,
    /// Do not print the summary.
    #[arg(long, short)]
    quiet: bool,
}

fn load(path: &PathBuf) -> Result<Scenario, ExitCode> {
    load_scenario(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Check { scenario } => match load(&scenario) {
            Ok(s) => {
                let points: usize = s.grids.iter().map(|g| g.len()).sum();
                println!(
                    "{}: ok ({} transmitters, {} grids, {} points)",
                    s.name,
                    s.transmitters.len(),
                    s.grids.len(),
                    points
                );
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Example { which } => {
            let text = match which.as_str() {
                "room" => wetsim::scenario::ROOM_SCENARIO,
                _ => wetsim::scenario::FREESPACE_SCENARIO,
            };
            print!("{text}");
            ExitCode::SUCCESS
        }
        Command::Run(args) => {
            let scenario = match load(&args.scenario) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let options = RunOptions {
                schemes: args.schemes,
                grids: args.grids,
                max_order: args.max_order,
                p_req_min_dbm: args.p_req_min,
                p_req_max_dbm: args.p_req_max,
                p_req_step_db: args.p_req_step,
                oracle_check: args.oracle_check,
                seed: args.seed,
            };
            let result = execute(&scenario, &options).and_then(|report| {
                write_outputs(&report, &args.out)?;
                Ok(report)
            });
            match result {
                Ok(report) => {
                    if !args.quiet {
                        print!("{}", render_summary(&report.summary));
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
