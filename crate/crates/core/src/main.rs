use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use exergy_core::ledger::{export_chain, import_chain, LedgerError};
use exergy_core::sim::{
    load_scenario, replay_audit, run_simulation, write_csv, AuditError, MetricsSummary,
    ScenarioError,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_INVALID_CHAIN: u8 = 3;

#[derive(Parser)]
#[command(name = "exergy-sim", version, about = "Permissioned energy blockchain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write chain.jsonl, metrics.csv and summary.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of rounds.
        #[arg(long)]
        rounds: Option<u64>,
        /// Replay the exported chain, compare against the live run, and write
        /// per-block token snapshots.
        #[arg(long)]
        audit: bool,
    },
    /// Check a chain file's hash links.
    Validate {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Recompute balances and metrics from a chain file.
    Replay {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with a specific exit code.
#[derive(Debug)]
struct Exit(u8, String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.downcast_ref::<Exit>() {
                Some(Exit(code, msg)) => {
                    eprintln!("error: {msg}");
                    *code
                }
                None => {
                    eprintln!("error: {e:#}");
                    1
                }
            };
            ExitCode::from(code)
        }
    }
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn ledger_exit(e: LedgerError) -> anyhow::Error {
    match e {
        LedgerError::InvalidChain { .. } | LedgerError::Parse { .. } => {
            Exit(EXIT_INVALID_CHAIN, e.to_string()).into()
        }
        other => anyhow::Error::new(other),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { scenario, out, seed, rounds, audit } => {
            let mut config = load_scenario(&scenario).map_err(|e| match e {
                ScenarioError::Io(_) => anyhow::Error::new(e),
                _ => Exit(EXIT_VALIDATION, e.to_string()).into(),
            })?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(rounds) = rounds {
                config.rounds = rounds;
            }
            config.validate().map_err(|e| Exit(EXIT_VALIDATION, e.to_string()))?;
            let run = run_simulation(&config).context("simulation setup")?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let chain_path = out.join("chain.jsonl");
            export_chain(&run.chain, &chain_path)?;
            write_metrics(&out, &run.summary)?;
            println!(
                "{}: {} blocks finalized, tip {}",
                config.name,
                run.summary.chain.blocks_finalized,
                run.chain.tip_hash()
            );
            if audit {
                let replayed = import_chain(&chain_path).map_err(ledger_exit)?;
                let report = replay_audit(&replayed).map_err(audit_exit)?;
                let matches = report.summary.chain == run.summary.chain && report.token == run.token;
                fs::write(out.join("audit.json"), serde_json::to_string_pretty(&report)?)?;
                let mut snapshots = String::new();
                for snap in &report.snapshots {
                    snapshots.push_str(&serde_json::to_string(snap)?);
                    snapshots.push('\n');
                }
                fs::write(out.join("token_snapshots.jsonl"), snapshots)?;
                if !matches {
                    return Err(Exit(EXIT_VALIDATION, "replayed metrics differ from the live run".into()).into());
                }
                println!("audit: replay matches live run");
            }
            Ok(())
        }
        Command::Validate { chain } => {
            let chain = import_chain(&chain).map_err(ledger_exit)?;
            println!("valid: {} blocks, tip {}", chain.len(), chain.tip_hash());
            Ok(())
        }
        Command::Replay { chain, out } => {
            let chain = import_chain(&chain).map_err(ledger_exit)?;
            let report = replay_audit(&chain).map_err(audit_exit)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_metrics(&out, &report.summary)?;
            fs::write(out.join("balances.json"), serde_json::to_string_pretty(&report.token)?)?;
            println!("replayed {} blocks", report.summary.chain.blocks_finalized);
            Ok(())
        }
    }
}

fn audit_exit(e: AuditError) -> anyhow::Error {
    match e {
        AuditError::Ledger(l) => ledger_exit(l),
        AuditError::Replay(r) => Exit(EXIT_INVALID_CHAIN, r.to_string()).into(),
    }
}

fn write_metrics(out: &Path, summary: &MetricsSummary) -> Result<()> {
    let file = fs::File::create(out.join("metrics.csv"))?;
    write_csv(&summary.chain, file)?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}
