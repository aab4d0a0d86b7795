mod registry;
mod runner;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use registry::{geometry_label, Registry};
use runner::{Check, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Core(#[from] carnot_core::Error),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(name = "carnot", version, about = "Verify Burgers-type systems on step-2 Carnot groups")]
struct Cli {
    /// Register user scenarios from a JSON file (repeatable).
    #[arg(long = "scenarios", global = true, value_name = "FILE")]
    scenario_files: Vec<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered scenarios.
    List,
    /// Run one check on one scenario and write JSON, CSV and SVG outputs.
    Verify {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long)]
        tol: Option<f64>,
        /// Quadrature cells per axis or integration grid size.
        #[arg(long)]
        grid: Option<usize>,
        /// Characteristic step.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Hölder exponent.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, env = "CARNOT_OUT_DIR", default_value = "carnot-out")]
        out: PathBuf,
    },
}

fn write_outputs(dir: &Path, stem: &str, json: &str, csv: &str, svg: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let json_path = dir.join(format!("{stem}.json"));
    std::fs::write(&json_path, json)?;
    std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
    std::fs::write(dir.join(format!("{stem}.svg")), svg)?;
    Ok(json_path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut registry = Registry::bundled();
    for f in &cli.scenario_files {
        if let Err(e) = registry.register_file(f) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::List => {
            println!("{:<24} {:<20} {:>4}  anchor", "id", "geometry", "dim");
            for s in &registry.scenarios {
                println!("{:<24} {:<20} {:>4}  {}", s.id, geometry_label(&s.geometry), s.dim(), s.anchor);
            }
            ExitCode::SUCCESS
        }
        Command::Verify {
            scenario,
            check,
            tol,
            grid,
            step,
            seed,
            alpha,
            out,
        } => {
            let Some(s) = registry.get(&scenario) else {
                eprintln!("error: unknown scenario {scenario:?}; see `carnot list`");
                return ExitCode::from(2);
            };
            if let Err(e) = runner::applicable(check, s) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            let overrides = Overrides {
                tol,
                grid,
                step,
                seed,
                alpha,
            };
            let (report, csv, svg) = match runner::run(check, s, &overrides) {
                Ok(o) => (o.report, o.csv, o.svg),
                Err(CliError::Usage(msg)) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
                Err(e) => {
                    let r = carnot_core::VerificationReport::new(check.name(), tol.unwrap_or(f64::NAN))
                        .scenario(&s.id)
                        .seed(seed)
                        .note(e.to_string())
                        .finish();
                    (r, String::new(), svg::Plot::new(&e.to_string(), "", "").render())
                }
            };
            let json = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
            let stem = format!("{}-{}", s.id, check.name());
            match write_outputs(&out, &stem, &json, &csv, &svg) {
                Ok(path) => {
                    let status = if report.pass { "PASS" } else { "FAIL" };
                    println!("{status} {} {}: max deviation {:e} (tolerance {:e}) -> {}", s.id, check.name(), report.max_deviation(), report.tolerance, path.display());
                    for n in &report.notes {
                        println!("  note: {n}");
                    }
                    if report.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {}", CliError::from(e));
                    ExitCode::from(1)
                }
            }
        }
    }
}
