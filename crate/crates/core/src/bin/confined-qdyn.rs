use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use confined_qdyn::harness::{emit_plots, load_config, refit_dir, run_experiment, RunManifest};
use confined_qdyn::oracles::validation_suite;
use confined_qdyn::Error;

#[derive(Parser)]
#[command(name = "confined-qdyn", version, about = "Strong-confinement dynamics near a plane curve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every oracle check; exit 0 iff all pass.
    Validate,
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refit rates from the CSVs in a run directory.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write SVG plots from the CSVs in a run directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn failure_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Io { .. } | Error::UnderResolved { .. } => 2,
        _ => 1,
    }
}

fn validate() -> Result<bool, Error> {
    let reports = validation_suite()?;
    println!("{:<36} {:>14} {:>14} {:>10} {:>10}  pass", "check", "measured", "reference", "abs_err", "tol");
    for r in &reports {
        println!(
            "{:<36} {:>14.6e} {:>14.6e} {:>10.2e} {:>10.2e}  {}",
            r.name, r.measured, r.reference, r.abs_err, r.tolerance, r.pass
        );
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn print_manifest(m: &RunManifest) {
    for s in &m.lambdas {
        println!("lambda = {:<6} steps {:>6}  {:.1} s  {}", s.lambda, s.steps, s.seconds, s.csv);
    }
    for r in &m.rates {
        match &r.fit {
            Some(f) => println!("rate {:<16} slope {:.6} r2 {:.4}", r.name, f.slope, f.r_squared),
            None => println!("rate {:<16} no fit: {}", r.name, r.note.as_deref().unwrap_or("")),
        }
    }
    for v in &m.verdicts {
        println!("{} {:<22} {}  {}", v.id, v.name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cmd: Command) -> Result<bool, Error> {
    match cmd {
        Command::Validate => validate(),
        Command::Run { config, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let manifest = run_experiment(&cfg)?;
            print_manifest(&manifest);
            Ok(manifest.all_pass())
        }
        Command::Fit { input } => {
            let report = refit_dir(&input)?;
            for r in &report.rates {
                match &r.fit {
                    Some(f) => println!(
                        "{} {:<16} slope {:.17e} intercept {:.17e} r2 {:.6}",
                        report.experiment.name(),
                        r.name,
                        f.slope,
                        f.intercept,
                        f.r_squared
                    ),
                    None => println!("{} {:<16} no fit: {}", report.experiment.name(), r.name, r.note.as_deref().unwrap_or("")),
                }
            }
            Ok(true)
        }
        Command::Plot { input } => {
            let report = emit_plots(&input)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}
