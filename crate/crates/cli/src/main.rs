use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use cdme_cli::commands::{
    cmd_compare, cmd_simulate_mc, cmd_solve_cme, cmd_solve_hierarchy, cmd_transfer_check,
    CompareSettings, Experiment, TransferParams,
};
use cdme_cli::{CliError, CliResult, EXIT_COMPARISON_FAILED, EXIT_OK};
use clap::{Args, Parser, Subcommand};

/// Chemical diffusion master equation laboratory: coefficient hierarchy,
/// exact particle simulation and the integrated master equation.
#[derive(Parser)]
#[command(name = "cdme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the coefficient hierarchy and write laws, intensities and the generator.
    SolveHierarchy(RunArgs),
    /// Run the particle simulator to the last output time.
    SimulateMc(RunArgs),
    /// Solve the spatially integrated master equation and its stationary law.
    SolveCme(RunArgs),
    /// Cross-check all routes; exit 2 if any check fails.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Tolerance override, e.g. `--tol mass=1e-6` (repeatable).
        #[arg(long = "tol", value_name = "CHECK=VALUE", value_parser = parse_tol)]
        tolerances: Vec<(String, f64)>,
        /// Add DELTA to generator entry (ROW, COL) before the route check.
        #[arg(long, value_name = "ROW,COL,DELTA", value_parser = parse_perturb)]
        perturb_entry: Option<(usize, usize, f64)>,
    },
    /// Check that Gaussian smoothing maps Hermite polynomials to monomials.
    TransferCheck {
        #[arg(long, default_value_t = 8)]
        max_degree: usize,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        z_min: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        z_max: f64,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        /// Output directory (default: $CDME_OUTPUT_DIR, else `cdme-out`).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides $CDME_OUTPUT_DIR and the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    lambda_d: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn experiment(&self) -> CliResult<Experiment> {
        let mut exp = Experiment::load(&self.config)?;
        let c = &mut exp.config;
        if let Some(v) = self.lambda_d {
            c.model.lambda_d = v;
        }
        if let Some(v) = self.modes {
            c.truncation.modes = v;
        }
        if let Some(v) = self.max_degree {
            c.truncation.max_degree = v;
        }
        if let Some(v) = self.replicas {
            c.mc.replicas = v;
        }
        if let Some(v) = self.seed {
            c.mc.master_seed = v;
        }
        exp.revalidate()?;
        Ok(exp)
    }
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected CHECK=VALUE")?;
    let v: f64 = v.parse().map_err(|e| format!("bad tolerance {v:?}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_perturb(s: &str) -> Result<(usize, usize, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected ROW,COL,DELTA".into());
    }
    let r = parts[0].parse().map_err(|e| format!("bad row: {e}"))?;
    let c = parts[1].parse().map_err(|e| format!("bad col: {e}"))?;
    let d = parts[2].parse().map_err(|e| format!("bad delta: {e}"))?;
    Ok((r, c, d))
}

fn default_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| {
        std::env::var_os(cdme_cli::OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    })
    .unwrap_or_else(|| PathBuf::from("cdme-out"))
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::SolveHierarchy(args) => {
            let exp = args.experiment()?;
            let root = exp.output_root(args.output_dir.as_deref());
            cmd_solve_hierarchy(&exp, &root)?;
            println!("wrote {}", root.join("hierarchy").display());
        }
        Command::SimulateMc(args) => {
            let exp = args.experiment()?;
            let root = exp.output_root(args.output_dir.as_deref());
            cmd_simulate_mc(&exp, &root)?;
            println!("wrote {}", root.join("mc").display());
        }
        Command::SolveCme(args) => {
            let exp = args.experiment()?;
            let root = exp.output_root(args.output_dir.as_deref());
            cmd_solve_cme(&exp, &root)?;
            println!("wrote {}", root.join("cme").display());
        }
        Command::Compare {
            run,
            tolerances,
            perturb_entry,
        } => {
            let exp = run.experiment()?;
            let root = exp.output_root(run.output_dir.as_deref());
            let settings = CompareSettings {
                tolerance_overrides: tolerances.into_iter().collect::<BTreeMap<_, _>>(),
                perturb: perturb_entry,
            };
            let outcome = cmd_compare(&exp, &root, &settings)?;
            for (name, r) in &outcome.report.checks.reports {
                println!(
                    "{} {name}: {} = {:e} (tolerance {:e}){}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.metric,
                    r.value,
                    r.tolerance,
                    r.detail
                        .as_ref()
                        .map(|d| format!(" [{d}]"))
                        .unwrap_or_default()
                );
            }
            for (name, why) in &outcome.report.skipped {
                println!("SKIP {name}: {why}");
            }
            println!("report: {}", root.join("compare/report.json").display());
            if !outcome.report.all_pass {
                return Ok(EXIT_COMPARISON_FAILED);
            }
        }
        Command::TransferCheck {
            max_degree,
            points,
            z_min,
            z_max,
            tolerance,
            output_dir,
        } => {
            let params = TransferParams {
                max_degree,
                points,
                z_min,
                z_max,
            };
            let root = default_root(output_dir);
            let (report, _) = cmd_transfer_check(&root, &params, tolerance)?;
            println!(
                "{} transfer: max error {:e} (tolerance {:e})",
                if report.pass { "PASS" } else { "FAIL" },
                report.value,
                tolerance
            );
            if !report.pass {
                return Ok(EXIT_COMPARISON_FAILED);
            }
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(inner) = &e {
                if let Some(src) = std::error::Error::source(inner) {
                    eprintln!("  caused by: {src}");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
