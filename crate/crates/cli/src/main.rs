use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optomotor_cli::commands::{
    run_evolve_command, run_g2_command, run_spectrum_command, CliError,
};
use optomotor_cli::config::{preset, preset_summary, OutputFormat, RunConfig, PRESET_NAMES};

#[derive(Parser)]
#[command(
    name = "optomotor",
    version,
    about = "Qubit + two-resonator optomechanical engine simulator: spectra, Lindblad dynamics, photon statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the lowest eigenvalues over the detuning and locate avoided crossings
    Spectrum(RunArgs),
    /// Integrate the dissipative dynamics and record coherence / imbalance series
    Evolve(RunArgs),
    /// Steady-state two-time coherence g2(tau) for both modes
    G2(RunArgs),
    /// List built-in presets, or print one as a TOML config
    Presets {
        /// Preset name to print in full
        name: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `presets`)
    #[arg(long)]
    preset: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated output formats: csv,json,svg
    #[arg(long)]
    format: Option<String>,
    /// Fock truncation of resonator 1
    #[arg(long)]
    n1: Option<usize>,
    /// Fock truncation of resonator 2
    #[arg(long)]
    n2: Option<usize>,
    /// Worker pool size (default: available processors)
    #[arg(long)]
    workers: Option<usize>,
    /// Number of levels to track in sweeps
    #[arg(long)]
    m_levels: Option<usize>,
    /// Detuning grid as lo:hi:points
    #[arg(long)]
    delta: Option<String>,
    /// Trajectory horizon in units of 1/omega2
    #[arg(long)]
    tmax: Option<f64>,
    /// Trajectory output points
    #[arg(long)]
    tpoints: Option<usize>,
    /// Skip the (n1+2, n2+2) truncation convergence rerun
    #[arg(long)]
    no_convergence_guard: bool,
}

fn parse_formats(spec: &str) -> Result<Vec<OutputFormat>, CliError> {
    spec.split(',')
        .map(|tok| match tok.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(CliError::Config(format!(
                "unknown output format {other:?} (expected csv, json, svg)"
            ))),
        })
        .collect()
}

fn parse_delta(spec: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "--delta expects lo:hi:points, got {spec:?}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Config(format!("bad delta lo {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Config(format!("bad delta hi {:?}", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Config(format!("bad delta points {:?}", parts[2])))?;
    Ok((lo, hi, points))
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = if let Some(name) = &args.preset {
        preset(name).map_err(CliError::Config)?
    } else if let Some(path) = &args.config {
        let body = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::from_toml(&body).map_err(CliError::Config)?
    } else {
        RunConfig::default()
    };
    // flags win over the config file / preset
    if let Some(n1) = args.n1 {
        cfg.layout.n1 = n1;
    }
    if let Some(n2) = args.n2 {
        cfg.layout.n2 = n2;
    }
    if let Some(m) = args.m_levels {
        cfg.sweep.m_levels = m;
    }
    if let Some(spec) = &args.delta {
        let (lo, hi, points) = parse_delta(spec)?;
        cfg.sweep.delta_lo = lo;
        cfg.sweep.delta_hi = hi;
        cfg.sweep.points = points;
    }
    if let Some(tmax) = args.tmax {
        cfg.trajectory.t_max = Some(tmax);
    }
    if let Some(tpoints) = args.tpoints {
        cfg.trajectory.points = tpoints;
    }
    if args.no_convergence_guard {
        cfg.trajectory.convergence_guard = false;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(spec) = &args.format {
        cfg.output.formats = parse_formats(spec)?;
    }
    if let Some(workers) = args.workers {
        // best effort; the global pool can only be sized once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Spectrum(args) => {
            let cfg = resolve_config(&args)?;
            let out_dir = PathBuf::from(&cfg.output.dir);
            let guard = cfg.trajectory.convergence_guard && !args.no_convergence_guard;
            let outcome = run_spectrum_command(&cfg, &out_dir, guard)?;
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            println!(
                "{} grid points, {} anticrossings",
                outcome.sweep.delta_grid.len(),
                outcome.reports.len()
            );
            if let Some(g) = &outcome.guard {
                println!("{}", g.meta_line());
            }
            Ok(())
        }
        Command::Evolve(args) => {
            let cfg = resolve_config(&args)?;
            let out_dir = PathBuf::from(&cfg.output.dir);
            let guard = cfg.trajectory.convergence_guard && !args.no_convergence_guard;
            let outcome = run_evolve_command(&cfg, &out_dir, guard)?;
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if let Some(g) = &outcome.guard {
                println!("{}", g.meta_line());
                if !g.converged() {
                    println!(
                        "warning: run flagged non-converged (drift {} > {})",
                        g.drift, g.threshold
                    );
                }
            }
            Ok(())
        }
        Command::G2(args) => {
            let cfg = resolve_config(&args)?;
            let out_dir = PathBuf::from(&cfg.output.dir);
            let outcome = run_g2_command(&cfg, &out_dir)?;
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Presets { name } => {
            match name {
                Some(name) => {
                    let cfg = preset(&name).map_err(CliError::Config)?;
                    print!("{}", cfg.to_toml());
                }
                None => {
                    for name in PRESET_NAMES {
                        println!("{}", preset_summary(name).map_err(CliError::Config)?);
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json_record());
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
