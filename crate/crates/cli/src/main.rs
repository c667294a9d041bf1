use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jensen_lab::bounds::Verdict;
use jensen_lab::harness::{
    approximations_csv, audit_csv, check_params, render, run_approximate, run_audit, run_defects, run_sweep,
    run_verify, sweep_csv, to_stable_json, ExperimentConfig, Format,
};
use jensen_lab::inequality::write_defects_csv;
use jensen_lab::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_REGIME: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Numerical checks of stability for the 3-variable Jensen rho-functional inequalities.
#[derive(Parser)]
#[command(name = "jensen-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the parameter condition of the configured family
    CheckParams(Common),
    /// Sample defects of the configured function
    Defect(Common),
    /// Compute the approximant at the plan points
    Approximate(Common),
    /// Verify the stability bound at the plan points
    Verify(Common),
    /// Compare printed, derived and observed stability constants
    Audit(Common),
    /// Run the configured parameter grid
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the sampling seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of sample points
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow a family to run with the other family's scheme
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config).map_err(|e| e.at("config"))?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(n) = self.points {
            cfg = cfg.with_points(n);
        }
        cfg.force |= self.force;
        Ok(cfg)
    }

    fn format(&self, default: Format) -> Format {
        match self.format {
            Some(OutFormat::Json) => Format::Json,
            Some(OutFormat::Csv) => Format::Csv,
            None => default,
        }
    }

    fn emit(&self, bytes: &[u8]) -> Result<(), Error> {
        match &self.out {
            Some(path) => fs::write(path, bytes)?,
            None => io::stdout().write_all(bytes)?,
        }
        Ok(())
    }
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::CheckParams(c) => {
            let cfg = c.load()?;
            let verdict = check_params(&cfg)?;
            let bytes = match c.format(Format::Json) {
                Format::Json => to_stable_json(&verdict)?,
                Format::Csv => format!(
                    "family,admissible,diagnostic\n{},{},\"{}\"\n",
                    cfg.params.family, verdict.admissible, verdict.diagnostic
                )
                .into_bytes(),
            };
            c.emit(&bytes)?;
            Ok(if verdict.admissible { 0 } else { EXIT_REGIME })
        }
        Command::Defect(c) => {
            let cfg = c.load()?;
            let samples = run_defects(&cfg)?;
            let bytes = match c.format(Format::Csv) {
                Format::Json => to_stable_json(&samples)?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_defects_csv(&mut buf, cfg.function.space(), cfg.params.family, &samples)?;
                    buf
                }
            };
            c.emit(&bytes)?;
            Ok(0)
        }
        Command::Approximate(c) => {
            let cfg = c.load()?;
            let reports = run_approximate(&cfg)?;
            let bytes = match c.format(Format::Json) {
                Format::Json => to_stable_json(&reports)?,
                Format::Csv => approximations_csv(&reports, cfg.function.space().dim())?,
            };
            c.emit(&bytes)?;
            let all = reports.iter().all(|r| r.converged);
            Ok(if all { 0 } else { EXIT_REGIME })
        }
        Command::Verify(c) => {
            let cfg = c.load()?;
            let report = run_verify(&cfg)?;
            c.emit(&render(&report, c.format(Format::Json))?)?;
            let s = &report.summary;
            eprintln!(
                "{} points, max violation {:e}, {} in {:.3}s",
                s.points,
                s.max_violation,
                if s.pass { "pass" } else { "FAIL" },
                s.runtime.as_secs_f64()
            );
            if report.cross_paired {
                eprintln!("note: cross-paired scheme {}", report.scheme);
            }
            Ok(if s.pass { 0 } else { EXIT_VIOLATION })
        }
        Command::Audit(c) => {
            let cfg = c.load()?;
            let a = run_audit(&cfg)?;
            let bytes = match c.format(Format::Json) {
                Format::Json => to_stable_json(&a)?,
                Format::Csv => audit_csv(&a)?,
            };
            c.emit(&bytes)?;
            let within = a.verdicts.get("empirical_le_derived") != Some(&Verdict::Fail);
            Ok(if within { 0 } else { EXIT_VIOLATION })
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let rows = run_sweep(&cfg)?;
            let bytes = match c.format(Format::Csv) {
                Format::Json => to_stable_json(&rows)?,
                Format::Csv => sweep_csv(&rows)?,
            };
            c.emit(&bytes)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_regime_failure() { EXIT_REGIME } else { EXIT_RUNTIME })
        }
    }
}
