use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spectral_damage::driver::{DriverError, RunEnd, Simulation};
use spectral_damage::exec::Exec;
use spectral_damage::grid::GridSpec;
use spectral_damage::io::config::{MicroSource, RunConfig};
use spectral_damage::io::generate::{generate_rve_2d, generate_rve_3d_spheres};
use spectral_damage::io::microstructure::{write_microstructure, Encoding};
use spectral_damage::io::output::{CsvStream, Snapshot};
use spectral_damage::io::IoError;

#[derive(Parser)]
#[command(name = "sdamage", version, about = "FFT homogenization with non-local ductile damage")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(short = 'j', long, global = true)]
    threads: Option<usize>,
    /// More progress output; repeat for per-increment lines.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Suppress progress output.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Disc,
    Spheres,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an RVE and write it as a microstructure file.
    Generate {
        #[arg(value_enum)]
        kind: Kind,
        /// Grid cells, two or three values.
        #[arg(long, num_args = 2..=3, default_values_t = [64, 64])]
        cells: Vec<usize>,
        /// Cell edge length.
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        /// Inclusion volume fraction.
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        /// Number of spheres.
        #[arg(long, default_value_t = 30)]
        spheres: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the raw 8-bit encoding.
        #[arg(long)]
        binary: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a simulation.
    Run {
        config: PathBuf,
        /// Output directory, overriding the configuration.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validate a configuration and solve one increment at zero load.
    Check { config: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("{0}")]
    Usage(String),
}

fn set_threads(n: Option<usize>) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    if n.is_some_and(|n| n > 1) {
        eprintln!("built without the parallel feature; running on one thread");
    }
    Ok(())
}

fn generate(kind: Kind, cells: &[usize], length: f64, fraction: f64, spheres: usize, seed: u64) -> Result<spectral_damage::PhaseGrid, CliError> {
    let c = [cells[0], cells[1], cells.get(2).copied().unwrap_or(1)];
    let grid = GridSpec::new(c, [length; 3]).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(0.0..1.0).contains(&fraction) {
        return Err(CliError::Usage("fraction must lie in [0, 1)".into()));
    }
    Ok(match kind {
        Kind::Disc => generate_rve_2d(&grid, fraction),
        Kind::Spheres => generate_rve_3d_spheres(&grid, spheres, fraction, seed)?,
    })
}

fn setup(cfg: &RunConfig) -> Result<Simulation, CliError> {
    let micro = cfg.microstructure.build()?;
    micro.check_table(cfg.phases.len())?;
    Ok(Simulation::new(&micro, &cfg.phases, cfg.scheme, cfg.load.clone(), cfg.solver, Exec::default())?)
}

fn run(config: &Path, output: Option<PathBuf>, verbose: u8, quiet: bool) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(dir) = output {
        cfg.output.dir = dir;
    }
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| IoError::File { path: dir.display().to_string(), source })?;
    let mut sim = setup(&cfg)?;
    sim.progress = !quiet && verbose > 0;
    if !quiet {
        eprintln!(
            "grid {:?}, model {}, {} phases, scheme {}, output {}",
            sim.grid().cells(),
            sim.model_kind().name(),
            cfg.phases.len(),
            cfg.scheme.name(),
            dir.display()
        );
    }
    if let MicroSource::Disc { .. } | MicroSource::Spheres { .. } = cfg.microstructure {
        let micro = spectral_damage::PhaseGrid::new(sim.grid().clone(), sim.phases().to_vec())?;
        write_microstructure(&micro, &dir.join("microstructure.sdv"), Encoding::Binary)?;
    }
    let mut csv = CsvStream::create(&dir.join(&cfg.output.history))?;
    csv.append(&sim.history().records()[0])?;
    let every = cfg.output.snapshot_every;
    let snapshot = |sim: &Simulation, name: String| -> Result<(), DriverError> {
        Snapshot::of(sim)
            .write_vtk(sim.grid(), &format!("increment {} time {}", sim.history().len() - 1, sim.time()), &dir.join(name))
            .map_err(|e| DriverError::Output(e.to_string()))
    };
    let result = sim.run(|s| {
        let rec = s.history().last().expect("history has the committed increment");
        csv.append(rec).map_err(|e| DriverError::Output(e.to_string()))?;
        if every > 0 && rec.increment % every == 0 {
            snapshot(s, format!("snapshot_{:05}.vtk", rec.increment))?;
        }
        Ok(())
    });
    snapshot(&sim, "final.vtk".into())?;
    let end = result?;
    if !quiet {
        let last = sim.history().last().expect("history is never empty");
        let why = match end {
            RunEnd::Completed => "load history completed",
            RunEnd::StressDrop => "stress dropped below the stop fraction",
            RunEnd::MaxIncrements => "increment limit reached",
        };
        eprintln!(
            "{why}: {} increments, {} cutbacks, final t {:.5e}, max damage {:.4}",
            last.increment,
            sim.history().cutbacks,
            last.time,
            last.max_damage
        );
    }
    Ok(())
}

fn check(config: &Path, quiet: bool) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let sim = setup(&cfg)?;
    let report = sim.dry_run()?;
    if !quiet {
        println!(
            "configuration OK: grid {:?}, model {}, zero-load increment converged in {} staggered / {} Newton iterations",
            sim.grid().cells(),
            sim.model_kind().name(),
            report.staggered_iterations,
            report.newton_iterations
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = set_threads(cli.threads).and_then(|_| match cli.command {
        Command::Generate { kind, cells, length, fraction, spheres, seed, binary, output } => {
            generate(kind, &cells, length, fraction, spheres, seed).and_then(|g| {
                let enc = if binary { Encoding::Binary } else { Encoding::Ascii };
                write_microstructure(&g, &output, enc)?;
                if !cli.quiet {
                    eprintln!("wrote {} (inclusion fraction {:.4})", output.display(), g.fraction(1));
                }
                Ok(())
            })
        }
        Command::Run { config, output } => run(&config, output, cli.verbose, cli.quiet),
        Command::Check { config } => check(&config, cli.quiet),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
