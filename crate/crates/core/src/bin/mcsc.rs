//! Command-line front end: scenario generation, offline solving, campaign
//! simulation, and taxi-trip ingestion.
//!
//! Exit codes: 0 success, 2 infeasible offline problem, 3 input or
//! validation error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mcsc_core::io::{self, ParamSetSpec, RegionFilter, ReportFormat};
use mcsc_core::offline::{self, GpScaConfig, UisrfcConfig};
use mcsc_core::online::OnlineAlgo;
use mcsc_core::quotes::build_quote_profile;
use mcsc_core::risk::{self, RiskEvalConfig, RiskMode};
use mcsc_core::sim::{self, CampaignConfig, CampaignMode, OfflineAlgo};
use mcsc_core::stats::RngStream;
use mcsc_core::Error;

#[derive(Parser)]
#[command(name = "mcsc", about = "Hybrid worker recruitment toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliOfflineAlgo {
    Esa,
    Uisrfc,
    GpSca,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliOnlineAlgo {
    Esa,
    Uisrfc,
    GpSca,
    Mcrs,
    Sqprefer,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliRiskMode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliMode {
    Hybrid,
    Online,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario from one of the stock parameter sets.
    Generate {
        /// Parameter set: 1 (fluctuant workers) or 2 (stable workers).
        #[arg(long, default_value_t = 1)]
        set: u32,
        #[arg(long)]
        tasks: usize,
        #[arg(long)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the long-term recruitment problem for a scenario file.
    SolveOffline {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = CliOfflineAlgo::Esa)]
        algo: CliOfflineAlgo,
        /// Convergence criterion of the convex route.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Iteration budget of the stochastic search.
        #[arg(long, default_value_t = 100_000)]
        iters: u64,
        #[arg(long, value_enum, default_value_t = CliRiskMode::Exact)]
        risk: CliRiskMode,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the solve summary (JSON) here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a trading campaign and write the report.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = CliMode::Hybrid)]
        mode: CliMode,
        #[arg(long, default_value_t = 300)]
        tradings: usize,
        #[arg(long, value_enum, default_value_t = CliOfflineAlgo::Esa)]
        offline_algo: CliOfflineAlgo,
        #[arg(long, value_enum, default_value_t = CliOnlineAlgo::Esa)]
        online_algo: CliOnlineAlgo,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        iters: u64,
        #[arg(long, value_enum, default_value_t = CliRiskMode::Exact)]
        risk: CliRiskMode,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = CliFormat::Csv)]
        format: CliFormat,
    },
    /// Build a scenario from a taxi-trip CSV.
    Ingest {
        #[arg(long)]
        trips: PathBuf,
        #[arg(long)]
        workers: usize,
        #[arg(long)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Region of interest as x_min,y_min,x_max,y_max.
        #[arg(long, value_parser = parse_region)]
        region: Option<RegionFilter>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_region(s: &str) -> Result<RegionFilter, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("invalid region: {e}"))?;
    if parts.len() != 4 {
        return Err("region needs exactly four comma-separated numbers".into());
    }
    Ok(RegionFilter { x_min: parts[0], y_min: parts[1], x_max: parts[2], y_max: parts[3] })
}

fn risk_config(mode: CliRiskMode, mc_samples: usize, seed: u64) -> RiskEvalConfig {
    RiskEvalConfig {
        mode: match mode {
            CliRiskMode::Exact => RiskMode::ExactEnumeration,
            CliRiskMode::Mc => RiskMode::MonteCarlo,
        },
        mc_samples,
        mc_seed: seed,
        ..RiskEvalConfig::default()
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { set, tasks, workers, seed, out } => {
            let spec = ParamSetSpec::by_id(set)?;
            let scenario = io::generate_scenario(&spec, tasks, workers, &RngStream::new(seed, 0))?;
            io::write_scenario(&scenario, &out)?;
            println!("wrote scenario with {workers} workers, {tasks} tasks to {}", out.display());
        }
        Command::SolveOffline { scenario, algo, eps, iters, risk, mc_samples, seed, out } => {
            let s = io::read_scenario(&scenario)?;
            let q = build_quote_profile(&s)?;
            let cfg = risk_config(risk, mc_samples, seed);
            let result = match algo {
                CliOfflineAlgo::Esa => offline::esa(&s, &q, &cfg)?,
                CliOfflineAlgo::Uisrfc => offline::uisrfc(
                    &s,
                    &q,
                    &cfg,
                    &UisrfcConfig { iterations: iters, rng: RngStream::new(seed, 1) },
                )?,
                CliOfflineAlgo::GpSca => offline::gp_sca_offline(
                    &s,
                    &q,
                    &GpScaConfig { eps, seed, ..GpScaConfig::default() },
                )?,
            };
            let report = risk::risk_report(&result.profile, &q, &s, &cfg)?;
            let summary = serde_json::json!({
                "objective": result.objective,
                "feasible": result.feasible,
                "iterations": result.iterations,
                "wall_time_s": result.wall_time_s,
                "contracts": offline::sign_contracts(&result, &q).map(|b| b.contracts).unwrap_or_default(),
                "task_quality_risk": report.task_quality_risk,
                "task_budget_risk": report.task_budget_risk,
            });
            let text = serde_json::to_string_pretty(&summary)?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
            if !result.feasible {
                return Err(Error::InfeasibleOffline);
            }
        }
        Command::Simulate {
            scenario,
            mode,
            tradings,
            offline_algo,
            online_algo,
            eps,
            iters,
            risk,
            mc_samples,
            seed,
            report,
            format,
        } => {
            let s = io::read_scenario(&scenario)?;
            let cfg = CampaignConfig {
                tradings,
                mode: match mode {
                    CliMode::Hybrid => CampaignMode::Hybrid,
                    CliMode::Online => CampaignMode::OnlineOnly,
                },
                offline_algo: match offline_algo {
                    CliOfflineAlgo::Esa => OfflineAlgo::Esa,
                    CliOfflineAlgo::Uisrfc => OfflineAlgo::Uisrfc { iterations: iters },
                    CliOfflineAlgo::GpSca => OfflineAlgo::GpSca { eps, max_outer: 200 },
                },
                online_algo: match online_algo {
                    CliOnlineAlgo::Esa => OnlineAlgo::Esa,
                    CliOnlineAlgo::Uisrfc => OnlineAlgo::Uisrfc { iterations: iters },
                    CliOnlineAlgo::GpSca => OnlineAlgo::GpSca { eps, max_outer: 200 },
                    CliOnlineAlgo::Mcrs => OnlineAlgo::Mcrs { iterations: iters },
                    CliOnlineAlgo::Sqprefer => OnlineAlgo::SqPrefer,
                },
                risk: risk_config(risk, mc_samples, seed),
                master_seed: seed,
            };
            let campaign = sim::run_campaign(&s, &cfg)?;
            let fmt = match format {
                CliFormat::Csv => ReportFormat::Csv,
                CliFormat::Json => ReportFormat::Json,
            };
            io::write_report(&campaign, fmt, &report)?;
            println!(
                "simulated {tradings} tradings; mean decision cost {:.4} ms; report at {}",
                campaign.mean_decision_ms,
                report.display()
            );
        }
        Command::Ingest { trips, workers, tasks, seed, region, out } => {
            let records = io::read_trips_csv(&trips)?;
            let scenario =
                io::ingest_trips(&records, tasks, workers, region, &RngStream::new(seed, 0))?;
            io::write_scenario(&scenario, &out)?;
            println!(
                "ingested {} trips into a {workers}-worker, {tasks}-task scenario at {}",
                records.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::InfeasibleOffline | Error::NoFeasibleInit { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
