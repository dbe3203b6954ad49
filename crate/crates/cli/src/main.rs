use std::path::PathBuf;
use std::process::ExitCode;

use bqf_cli::commands::{self, Outcome};
use bqf_cli::config::{
    ClusterCheckConfig, DensityProfileConfig, DomainClassifyConfig, KmsCheckConfig, LimitScanConfig,
    PhaseScanConfig, VerifyConfig,
};
use bqf_cli::output::{emit, render, Format, Header};
use bqf_cli::suite::SuiteOptions;
use bqf_cli::{echo, load_config, CliError, CliResult, Common};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "bqf", version, about = "Quasifree Bose gas: profiles, scans and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// JSON config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweep points.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Tolerance for subcommands that compare against one.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical density of the trapped gas along the first axis.
    DensityProfile,
    /// Trap states along a chemical-potential grid and the boundary limit.
    PhaseScan,
    /// Deviation of trapped from free two-point values as L grows.
    LimitScan,
    /// KMS boundary identity on a time grid.
    KmsCheck,
    /// Decay of correlations under the free dynamics.
    ClusterCheck,
    /// Domain verdicts of test functions for the boundary limit state.
    DomainClassify,
    /// Runs the verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated check groups.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Test hook: negate the symplectic term in the CCR and KMS checks.
    #[arg(long, hide = true)]
    inject_symplectic_flip: bool,
}

trait Tolerant {
    fn set_tol(&mut self, tol: f64) -> CliResult<()>;
}

macro_rules! tolerant {
    ($($t:ty),*) => {$(
        impl Tolerant for $t {
            fn set_tol(&mut self, tol: f64) -> CliResult<()> {
                if tol.is_nan() || tol <= 0.0 {
                    return Err(CliError::config("--tol must be positive"));
                }
                self.tol = tol;
                Ok(())
            }
        }
    )*};
}

macro_rules! intolerant {
    ($($t:ty),*) => {$(
        impl Tolerant for $t {
            fn set_tol(&mut self, _: f64) -> CliResult<()> {
                Err(CliError::config("--tol does not apply to this subcommand"))
            }
        }
    )*};
}

tolerant!(LimitScanConfig, KmsCheckConfig, ClusterCheckConfig);
intolerant!(DensityProfileConfig, PhaseScanConfig, DomainClassifyConfig, VerifyConfig);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bqf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let flags = cli.flags;
    match cli.command {
        Command::DensityProfile => execute("density-profile", &flags, keep, commands::density_profile),
        Command::PhaseScan => execute("phase-scan", &flags, keep, commands::phase_scan),
        Command::LimitScan => execute("limit-scan", &flags, keep, commands::limit_scan),
        Command::KmsCheck => execute("kms-check", &flags, keep, commands::kms_check),
        Command::ClusterCheck => execute("cluster-check", &flags, keep, commands::cluster_check),
        Command::DomainClassify => execute("domain-classify", &flags, keep, commands::domain_classify_cmd),
        Command::Verify(args) => execute(
            "verify",
            &flags,
            |cfg: &mut VerifyConfig| {
                if !args.only.is_empty() {
                    cfg.only = args.only.clone();
                }
                cfg.inject_symplectic_flip |= args.inject_symplectic_flip;
            },
            |cfg: &VerifyConfig| {
                commands::verify(&SuiteOptions {
                    only: cfg.only.clone(),
                    flip_symplectic: cfg.inject_symplectic_flip,
                })
            },
        ),
    }
}

fn keep<C>(_: &mut C) {}

fn execute<C, O, F>(command: &str, flags: &Flags, overrides: O, body: F) -> CliResult<()>
where
    C: DeserializeOwned + Serialize + Default + Tolerant,
    O: FnOnce(&mut C),
    F: FnOnce(&C) -> CliResult<Outcome>,
{
    let (mut cfg, common): (C, Common) = load_config(flags.config.as_deref())?;
    if let Some(tol) = flags.tol {
        cfg.set_tol(tol)?;
    }
    overrides(&mut cfg);
    let format = flags.format.or(common.format).unwrap_or_default();
    let out = flags.out.clone().or(common.out);
    if let Some(jobs) = flags.jobs.or(common.jobs) {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let outcome = body(&cfg)?;
    let header = Header {
        command: command.to_string(),
        config: echo(&cfg, format)?,
    };
    emit(&render(&header, &outcome.table, format)?, out.as_deref())?;
    match outcome.failure {
        Some(msg) => Err(CliError::Verification(msg)),
        None => Ok(()),
    }
}
