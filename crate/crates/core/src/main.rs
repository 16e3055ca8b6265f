use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radial_blowup::experiments::{emit_results, run_scenario, ScenarioConfig, OUTPUT_DIR_ENV};
use radial_blowup::grid::RadialGrid;
use radial_blowup::initial_data::{verify_w0, InitialData, InitialDataParams, DEFAULT_VERIFY_TOL};

#[derive(Parser)]
#[command(name = "radial-blowup", version, about = "Radial blow-up experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output.dir` and the environment variable.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Build the blow-up initial data and check its properties on a grid.
    VerifyW0 {
        #[arg(long, default_value_t = 2.0)]
        chi: f64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long = "R", default_value_t = 1.0)]
        radius: f64,
        #[arg(long = "M", default_value_t = 8.0)]
        peak: f64,
        #[arg(long = "N", default_value_t = 1024)]
        cells: usize,
    },
}

fn output_dir(flag: Option<PathBuf>, cfg: &ScenarioConfig) -> PathBuf {
    flag.or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results").join(cfg.scenario.name()))
}

fn run(config: PathBuf, flag: Option<PathBuf>, workers: usize, quiet: bool) -> radial_blowup::Result<bool> {
    let text = std::fs::read_to_string(&config).map_err(|e| radial_blowup::Error::Io {
        path: config.display().to_string(),
        source: e,
    })?;
    let cfg = ScenarioConfig::parse(&text)?;
    let dir = output_dir(flag, &cfg);
    let out = run_scenario(&cfg, workers)?;
    let emitted = emit_results(&out, &cfg, &dir)?;
    if !quiet {
        println!("{} rows written to {}", out.rows.len(), emitted.dir.display());
        for row in out.flagged() {
            println!("run {}: flagged {}", row.run, row.flags);
        }
    }
    if let Some(e) = &out.error {
        eprintln!("scenario aborted: {e}");
    }
    Ok(out.complete() && out.flagged().is_empty())
}

fn verify(chi: f64, n: usize, radius: f64, peak: f64, cells: usize) -> radial_blowup::Result<bool> {
    let data = InitialData::new(InitialDataParams::new(chi, n, radius, peak)?)?;
    let grid = RadialGrid::new(n, radius, cells)?;
    let c = data.constants();
    println!("A = {:.12e}  lambda = {:.12e}  mu = {:.12e}", c.a, c.lambda, c.mu);
    let w0 = data.sample(&grid)?;
    let report = verify_w0(&w0, data.params(), &c, DEFAULT_VERIFY_TOL);
    for check in &report.checks {
        let status = if check.passed { "ok" } else { "FAILED" };
        println!("{:<20} {status:<6} margin {:.3e}", check.name, check.worst_margin);
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output_dir,
            workers,
            quiet,
        } => run(config, output_dir, workers, quiet),
        Command::VerifyW0 {
            chi,
            n,
            radius,
            peak,
            cells,
        } => verify(chi, n, radius, peak, cells),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
