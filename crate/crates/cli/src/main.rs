use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use yieldopt_cli::{report, run, CliError, RunConfig, EXIT_NOT_CONVERGED};

#[derive(Parser)]
#[command(
    name = "yieldopt",
    version,
    about = "Yield estimation and optimization for a waveguide benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare yield estimators on one shared sample.
    Estimate(Common),
    /// Maximize the yield over the mean design.
    Optimize(Common),
    /// Compare analytic and difference-quotient yield gradients.
    Gradcheck(Common),
    /// Calibrate the hybrid safety factor.
    Calibrate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; built-in defaults if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use adaptive Newton-MC instead of a fixed sample size.
    #[arg(long)]
    adaptive: bool,
    /// Surrogate node budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Hybrid safety factor.
    #[arg(long)]
    safety: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.sample.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if self.adaptive {
            cfg.optimize.adaptive = true;
        }
        if let Some(b) = self.budget {
            cfg.surrogate.budget = b;
        }
        if let Some(s) = self.safety {
            cfg.estimate.safety = s;
            cfg.estimate.calibrate = false;
        }
        cfg.resolve()
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (name, common) = match &cli.command {
        Command::Estimate(c) => ("estimate", c),
        Command::Optimize(c) => ("optimize", c),
        Command::Gradcheck(c) => ("gradcheck", c),
        Command::Calibrate(c) => ("calibrate", c),
    };
    let cfg = common.config()?;
    let out = cfg.output.clone();
    let started = Instant::now();
    let mut files = vec![report::write_run_record(&out, name, &cfg)?];
    let mut code = 0;
    match cli.command {
        Command::Estimate(_) => {
            let rep = run::run_estimate(&cfg)?;
            files.extend(report::write_estimate(&out, &cfg, &rep)?);
        }
        Command::Optimize(_) => {
            let rep = run::run_optimize(&cfg)?;
            files.extend(report::write_optimize(&out, &rep)?);
            if !rep.state.converged {
                code = EXIT_NOT_CONVERGED;
            }
        }
        Command::Gradcheck(_) => {
            let rep = run::run_gradcheck(&cfg)?;
            files.extend(report::write_gradcheck(&out, &cfg, &rep)?);
            if !rep.passed() {
                code = EXIT_NOT_CONVERGED;
            }
        }
        Command::Calibrate(_) => {
            let rep = run::run_calibrate(&cfg)?;
            files.extend(report::write_calibrate(&out, &cfg, &rep)?);
        }
    }
    if let Ok(s) = std::fs::read_to_string(out.join("summary.txt")) {
        print!("{s}");
    }
    eprintln!("{name} finished in {:.2?}", started.elapsed());
    for f in files {
        eprintln!("  wrote {}", f.display());
    }
    Ok(code)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
