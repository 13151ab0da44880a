//! `finsler`: runs the finsler-core checks from a TOML run configuration and
//! writes CSV artifacts plus a `VERDICT` summary line.

mod commands;
mod run_config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use finsler_core::{Error, Result};

use commands::{Context, Outcome};
use run_config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "finsler", version, about = "Checks and artifacts for stationary Finsler spacetimes")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sampler seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Verdict threshold of the command; overrides `tol` in the config.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Values of L with a homogeneity check.
    Eval,
    /// Fundamental tensors and their signatures.
    Tensor,
    /// Lorentzian index over the cone, with large-τ witnesses.
    IndexCheck,
    /// Complete-lift residual of a vector field.
    KillingCheck,
    /// Static-splitting conditions and Frobenius integrability.
    StaticCheck,
    /// Optical metrics, their hypotheses and identities.
    Fermat,
    /// Causal classification by sign of L against F_B thresholds.
    Classify,
    /// Spacetime geodesic from initial data.
    Geodesic,
    /// Lightlike geodesic against the Fermat geodesic of its projection.
    LightlikeCheck,
    /// Boundary-value geodesic of an optical metric.
    Shoot,
    /// Forward or backward balls of an optical metric.
    Balls,
    /// Slices of a chronological future or past.
    Chrono,
    /// Sampled evidence for causal simplicity on a box.
    Evidence,
    /// Built-in metrics.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum ZooAction {
    /// Lists names, dimensions and parameters.
    List,
}

fn read_config(path: &Path) -> Result<(RunConfig, String, PathBuf)> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let rc = RunConfig::parse(&src)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((rc, src, dir))
}

fn execute(cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    if let Command::Zoo { action: ZooAction::List } = cli.command {
        return Ok((commands::zoo_list()?, cli.out.clone()));
    }
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let (rc, src, dir) = read_config(path)?;
    let lagrangian = rc.lagrangian(&src, &dir)?;
    let out = match (&cli.out, &rc.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) if o.is_relative() => dir.join(o),
        (None, Some(o)) => o.clone(),
        (None, None) => PathBuf::from("finsler-out"),
    };
    let ctx = Context { rc, lagrangian, seed: cli.seed, tol: cli.tol };
    let outcome = match cli.command {
        Command::Eval => commands::eval(&ctx),
        Command::Tensor => commands::tensor(&ctx),
        Command::IndexCheck => commands::index_check(&ctx),
        Command::KillingCheck => commands::killing_check(&ctx),
        Command::StaticCheck => commands::static_check(&ctx),
        Command::Fermat => commands::fermat(&ctx),
        Command::Classify => commands::classify(&ctx),
        Command::Geodesic => commands::geodesic(&ctx),
        Command::LightlikeCheck => commands::lightlike_check(&ctx),
        Command::Shoot => commands::shoot(&ctx),
        Command::Balls => commands::balls(&ctx),
        Command::Chrono => commands::chrono(&ctx),
        Command::Evidence => commands::evidence(&ctx),
        Command::Zoo { .. } => unreachable!(),
    }?;
    Ok((outcome, Some(out)))
}

fn write_artifacts(outcome: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (name, contents) in &outcome.files {
        let p = dir.join(name);
        std::fs::write(&p, contents).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    let mut report = outcome.lines.join("\n");
    report.push('\n');
    report.push_str(&outcome.verdict_line());
    report.push('\n');
    let p = dir.join(format!("{}_report.txt", outcome.name));
    std::fs::write(&p, report).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let (outcome, dir) = execute(cli)?;
    if let Some(dir) = dir {
        write_artifacts(&outcome, &dir)?;
    }
    for line in &outcome.lines {
        println!("{line}");
    }
    println!("{}", outcome.verdict_line());
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
