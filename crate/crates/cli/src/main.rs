//! Scenario driver: `brenier-lab run <config>` and `brenier-lab validate <config>`.
//!
//! Exit codes: 0 when every asserted invariant holds, 1 when one fails,
//! 2 for configuration or I/O problems, 3 for numerical failures.

mod config;
mod output;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, ScenarioConfig};
use output::{json_bytes, write_atomic};

#[derive(Parser)]
#[command(version, about = "Brenier-map experiments on 1-log-concave measures")]
struct Cli {
    /// Print nothing but errors
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    /// Dot-path override such as `numerics.reg=1e-3` (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file
    Run {
        #[command(flatten)]
        args: ConfigArgs,
        /// Directory for reports; overrides `output.dir`
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check a config file without running it
    Validate {
        #[command(flatten)]
        args: ConfigArgs,
    },
}

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn load(args: &ConfigArgs) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(&args.config, &args.overrides).map_err(|e| {
        match &e {
            ConfigError::Io(m) => eprintln!("error: {m}"),
            ConfigError::Invalid(diags) => {
                for d in diags {
                    eprintln!("{}: {d}", args.config.display());
                }
            }
        }
        ExitCode::from(EXIT_CONFIG)
    })
}

fn validate(args: &ConfigArgs, quiet: bool) -> ExitCode {
    match load(args) {
        Ok(_) => {
            if !quiet {
                println!("{}: valid", args.config.display());
            }
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn run(args: &ConfigArgs, out_dir: Option<PathBuf>, quiet: bool) -> anyhow::Result<ExitCode> {
    let config = match load(args) {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let dir = out_dir
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    log::info!("running {} into {}", config.scenario, dir.display());
    let outcome = match scenarios::run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("numerical failure in stage '{}': {e}", e.stage());
            return Ok(ExitCode::from(EXIT_NUMERICAL));
        }
    };
    let passed = outcome.checks.iter().all(|c| c.passed);
    let report = json!({
        "scenario": config.scenario.to_string(),
        "version": brenier_lab::VERSION,
        "config": serde_json::to_value(&config)?,
        "results": outcome.results,
        "checks": serde_json::to_value(&outcome.checks)?,
        "passed": passed,
    });
    write_atomic(&dir.join("report.json"), &json_bytes(&report)?)?;
    for (name, bytes) in &outcome.tables {
        write_atomic(&dir.join(name), bytes)?;
    }
    let created = SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs();
    let metadata = json!({
        "created_unix": created,
        "version": brenier_lab::VERSION,
        "config_path": args.config.display().to_string(),
        "overrides": args.overrides,
    });
    write_atomic(&dir.join("metadata.json"), &json_bytes(&metadata)?)?;

    let total = outcome.checks.len();
    let ok = outcome.checks.iter().filter(|c| c.passed).count();
    if !quiet {
        println!(
            "{} {}: {ok}/{total} checks passed, report in {}",
            config.scenario,
            if passed { "PASS" } else { "FAIL" },
            dir.display()
        );
    }
    if let Some(bad) = outcome.checks.iter().find(|c| !c.passed) {
        eprintln!(
            "invariant '{}' violated: {:e} against limit {:e}",
            bad.id, bad.value, bad.limit
        );
        return Ok(ExitCode::from(EXIT_INVARIANT));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match &cli.command {
        Command::Validate { args } => validate(args, cli.quiet),
        Command::Run { args, out_dir } => match run(args, out_dir.clone(), cli.quiet) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
