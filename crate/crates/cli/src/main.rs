use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmpc_cli::commands;
use cmpc_cli::config::{self, ClosedLoopConfig, DareConfig, RegionConfig, SynthConfig, VerifyConfig};
use cmpc_cli::CliError;

/// Contractive-terminal-set MPC experiments.
#[derive(Debug, Parser)]
#[command(name = "cmpc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML or JSON config file; defaults reproduce the cart-spring benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scalar first-order stability regions over (q, p) grids.
    Region1d,
    /// Proposed vs conventional closed loops (any configured plant).
    Cartspring,
    /// BMI terminal-weight synthesis followed by CLF verification.
    Synth,
    /// Certify a given terminal weight.
    Verify,
    /// Riccati terminal weight and LQR gain of the origin linearization.
    Dare,
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let path = cli.config.as_deref();
    let dir = cli.out_dir.as_path();
    match cli.command {
        Command::Region1d => {
            let cfg: RegionConfig = config::load(path, cli.seed)?;
            let out = commands::region1d(&cfg)?;
            let files = commands::write_region1d(&out, dir)?;
            if !out.summary.complementary {
                return Err(CliError::Failed("stability regions overlap".into()));
            }
            Ok(files)
        }
        Command::Cartspring => {
            let cfg: ClosedLoopConfig = config::load(path, cli.seed)?;
            let out = commands::cartspring(&cfg)?;
            let s = &out.summary;
            println!("J_run proposed     {:.4}", s.proposed.j_run);
            println!("J_run conventional {:.4}", s.conventional.j_run);
            commands::write_cartspring(&out, dir)
        }
        Command::Synth => {
            let cfg: SynthConfig = config::load(path, cli.seed)?;
            let out = commands::synth(&cfg)?;
            let files = commands::write_named(&out, dir, "synth.json")?;
            if !out.feasible {
                return Err(CliError::Failed(format!("BMI infeasible: {}", out.notes.join("; "))));
            }
            if out.verification.as_ref().is_some_and(|v| !v.clf_certificate.verified) {
                return Err(CliError::Failed("synthesized weight failed CLF verification".into()));
            }
            Ok(files)
        }
        Command::Verify => {
            let cfg: VerifyConfig = config::load(path, cli.seed)?;
            let out = commands::verify(&cfg)?;
            let files = commands::write_named(&out, dir, "verify.json")?;
            if !out.clf_certificate.verified {
                return Err(CliError::Failed("CLF certificate not verified".into()));
            }
            Ok(files)
        }
        Command::Dare => {
            let cfg: DareConfig = config::load(path, cli.seed)?;
            commands::write_named(&commands::dare(&cfg)?, dir, "dare.json")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
