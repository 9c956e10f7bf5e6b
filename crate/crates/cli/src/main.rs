use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dbsde::convergence::{convergence_study, load_schedule, write_report};
use dbsde::runner::{execute, write_outcome};
use dbsde::{Experiment, ExperimentConfig, RunError};

/// Prices and hedges defaultable claims by solving stopped BSDEs.
#[derive(Debug, Parser)]
#[command(name = "dbsde", version)]
struct Cli {
    /// Directory for results when the config does not name one.
    #[arg(long, global = true, env = "DBSDE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write summary.json and nodes.csv.
    Run {
        config: PathBuf,
        /// Write here, ignoring the config and the default directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refine grid and path count against the closed form.
    Converge {
        config: PathBuf,
        /// JSON list of {"steps": N, "paths": P}.
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and report every violated invariant.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<Experiment, RunError> {
    ExperimentConfig::load(path)?.build()
}

/// `--out`, then the config's own directory, then `<base>/<name>` where the
/// base comes from `--output-dir` / `$DBSDE_OUTPUT_DIR` or is `results`.
fn resolve(out: Option<PathBuf>, base: Option<&Path>, exp: &Experiment) -> PathBuf {
    out.or_else(|| exp.outputs.dir.clone()).unwrap_or_else(|| {
        base.map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("results"))
            .join(&exp.name)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let base = cli.output_dir.as_deref();
    let result = match cli.command {
        Command::Run { config, out } => load(&config).and_then(|exp| {
            let dir = resolve(out, base, &exp);
            let outcome = execute(&exp)?;
            write_outcome(&exp, &outcome, &dir)?;
            let s = &outcome.summary;
            println!(
                "{}: y0 = {:.6} ± {:.6} (control variate {:.6} ± {:.6}) -> {}",
                s.name,
                s.y0.value,
                s.y0.std_error,
                s.y0_cv.value,
                s.y0_cv.std_error,
                dir.display()
            );
            Ok(())
        }),
        Command::Converge {
            config,
            schedule,
            out,
        } => load(&config).and_then(|exp| {
            let rows = load_schedule(&schedule)?;
            let dir = resolve(out, base, &exp);
            let report = convergence_study(&exp, &rows)?;
            write_report(&report, &dir)?;
            println!(
                "{}: {} rows, monotone error: {} -> {}",
                report.name,
                report.rows.len(),
                report.monotone_error,
                dir.display()
            );
            Ok(())
        }),
        Command::Validate { config } => load(&config).map(|_| {
            println!("{}", serde_json::json!({ "status": "ok" }));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::to_string(&e.record()).expect("error records serialise")
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
