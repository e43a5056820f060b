use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use raman_core::checks;
use raman_core::config::{load_config, Format, RunConfig, ScanConfig};
use raman_core::experiments::{
    power_dependence_check, run_delay_scan, run_density_scan, run_power_scan, ScanKind,
};
use raman_core::output::{serialize_results, Results};
use raman_core::propagation::PropagationOptions;
use raman_core::{Error, ErrorKind, Result};
use serde_json::json;

/// Coherence-enhanced Raman generation in a three-level vapor.
#[derive(Parser)]
#[command(name = "raman-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// One propagation through the cell; writes entry, exit and signal envelopes.
    Simulate,
    /// Efficiency versus mutual delay of the coupling pulses.
    DelayScan,
    /// Zero-delay efficiency versus atomic density, with a power-law fit.
    DensityScan,
    /// Zero-delay efficiency versus pulse power.
    PowerScan,
    /// Run the analytic single-atom oracles and print pass/fail.
    RabiCheck,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults to the reference experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated output formats: csv, json.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_format)]
    format: Option<Vec<Format>>,
    /// Scan worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Override the number of slices along the cell.
    #[arg(long, global = true)]
    nz: Option<usize>,
    /// Override the time step, ns.
    #[arg(long, global = true)]
    dt: Option<f64>,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    match s.trim() {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(format!("unknown format `{other}` (expected csv or json)")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Numerical => 2,
                ErrorKind::Io => 3,
            })
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(nz) = common.nz {
        config.grid.nz = nz;
    }
    if let Some(dt) = common.dt {
        config.grid.dt = dt;
    }
    if let Some(dir) = &common.out {
        config.output.dir = dir.clone();
    }
    if let Some(formats) = &common.format {
        config.output.formats = formats.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Scan values from the config's scan block, or the kind's defaults.
fn scan_values(config: &RunConfig, kind: ScanKind) -> Result<Vec<f64>> {
    match &config.scan {
        Some(scan) if scan.kind != kind => Err(Error::invalid(
            "scan.kind",
            format!(
                "config declares a {} scan but the command runs a {} scan",
                scan.kind.name(),
                kind.name()
            ),
        )),
        Some(scan) => scan.values(),
        None => ScanConfig::new(kind).values(),
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Command::RabiCheck = cli.command {
        let outcomes = checks::run_all()?;
        for outcome in &outcomes {
            println!("{outcome}");
        }
        return Ok(if outcomes.iter().all(|o| o.passed) {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(2)
        });
    }

    let config = load(&cli.common)?;
    let experiment = config.experiment()?;
    let (dir, formats) = (&config.output.dir, &config.output.formats);
    let threads = cli.common.threads;

    let written = match cli.command {
        Command::Simulate => {
            let options = PropagationOptions {
                snapshots: vec![0, config.grid.nz],
            };
            let sim = experiment.simulate(&options)?;
            println!("efficiency {:.6}", sim.efficiency);
            let summary = json!({ "efficiency": sim.efficiency, "window": sim.window });
            let written = serialize_results(
                &Results::Simulation {
                    run: &sim.run,
                    generated: Some(&sim.generated),
                    summary,
                },
                &config,
                dir,
                formats,
            )?;
            if let Some(report) = sim.run.convergence.as_ref().filter(|r| !r.converged) {
                report_files(&written);
                return Err(Error::Numerical(format!(
                    "peak signal changed by {:.2}% between nz = {} and nz = {}",
                    100.0 * report.relative_change,
                    report.nz_coarse,
                    report.nz
                )));
            }
            written
        }
        Command::DelayScan => {
            let scan = run_delay_scan(
                &scan_values(&config, ScanKind::Delay)?,
                &experiment,
                threads,
            )?;
            let best = scan.argmax();
            if let Some(b) = best {
                println!(
                    "maximum efficiency {:.6} at delay {} ns",
                    b.efficiency, b.param
                );
            }
            serialize_results(
                &Results::Scan {
                    scan: &scan,
                    summary: json!({ "argmax": best }),
                },
                &config,
                dir,
                formats,
            )?
        }
        Command::DensityScan => {
            let result = run_density_scan(
                &scan_values(&config, ScanKind::Density)?,
                &experiment,
                threads,
            )?;
            match &result.fit {
                Some(fit) => println!(
                    "intensity slope {:.4} (r^2 {:.4}), amplitude slope {:.4}",
                    fit.intensity.slope, fit.intensity.r_squared, fit.amplitude.slope
                ),
                None => println!("not enough points for a fit"),
            }
            let summary = json!({ "fit": result.fit });
            serialize_results(
                &Results::Scan {
                    scan: &result.scan,
                    summary,
                },
                &config,
                dir,
                formats,
            )?
        }
        Command::PowerScan => {
            let scan = run_power_scan(
                &scan_values(&config, ScanKind::Power)?,
                &experiment,
                threads,
            )?;
            let check = power_dependence_check(&scan);
            if let Some(c) = &check {
                println!(
                    "half power keeps {:.3}, 5% power keeps {:.3} of full-power efficiency",
                    c.half_power_ratio, c.low_power_ratio
                );
            }
            serialize_results(
                &Results::Scan {
                    scan: &scan,
                    summary: json!({ "check": check }),
                },
                &config,
                dir,
                formats,
            )?
        }
        Command::RabiCheck => unreachable!(),
    };
    report_files(&written);
    Ok(ExitCode::SUCCESS)
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}
