use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtraj_core::snapshot::{read_snapshot, write_table};
use qtraj_core::TrajectoryBundle;
use qtraj_lab::analysis::compare_pictures;
use qtraj_lab::detector::DetectorRecord;
use qtraj_lab::finsler_check::check_scenario;
use qtraj_lab::fringe::fringe_analysis;
use qtraj_lab::{presets, run_scenario, LabError, Result, RunOptions, ScenarioConfig};

#[derive(Parser)]
#[command(name = "qtraj", version, about = "Wavefunction, Bohmian and geodesic pictures of one scattering run")]
struct Cli {
    /// Seed for every random draw (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path (run directory, or file for `convert`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or built-in preset.
    Run { config: String },
    /// Admissibility checks of Λ at states drawn from the initial packet.
    CheckFinsler {
        config: String,
        #[arg(long, default_value_t = 1000)]
        states: usize,
    },
    /// Re-derive the detector and equivalence analysis of a finished run.
    Analyze { run_dir: PathBuf },
    /// List the built-in scenarios.
    Presets,
    /// Write a binary snapshot as a plain-text table.
    Convert { snapshot: PathBuf },
}

fn load_config(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() {
        ScenarioConfig::load(path)
    } else if let Some(text) = presets::text(arg).filter(|_| !arg.contains('/')) {
        ScenarioConfig::parse(text)
    } else {
        Err(LabError::Config(format!("{arg}: no such file or preset")))
    }
}

fn stage(e: impl std::fmt::Display) -> LabError {
    LabError::stage("analyze", e)
}

fn analyze(dir: &Path) -> Result<()> {
    let sc = ScenarioConfig::load(&dir.join("config.cfg"))?.resolve()?;
    println!("scenario: {} ({})", sc.config.name, sc.id);
    let detector_path = dir.join("detector.tsv");
    if let (true, Some(setup)) = (detector_path.exists(), &sc.detector) {
        let (record, id) = DetectorRecord::read_tsv(BufReader::new(File::open(&detector_path)?))?;
        if id != sc.id {
            return Err(stage(format!("detector.tsv belongs to scenario {id}")));
        }
        let run = |dist: &[f64]| {
            fringe_analysis(&record, dist, setup.wavelength, &setup.d_candidates, setup.prominence, setup.expected_deg, setup.tolerance_deg)
        };
        println!("-- flux distribution --\n{}", run(&record.flux_distribution()));
        if !record.is_empty() {
            println!("-- trajectory crossings --\n{}", run(&record.count_distribution()));
        }
    }
    let (m, g) = (dir.join("trajectories/matched.tsv"), dir.join("trajectories/geodesic.tsv"));
    if m.exists() && g.exists() {
        let read = |p: &Path| -> Result<TrajectoryBundle> { TrajectoryBundle::read(BufReader::new(File::open(p)?)).map_err(stage) };
        let grid = qtraj_core::make_grid(sc.grid.clone()).map_err(stage)?;
        let eq = compare_pictures(&read(&m)?, &read(&g)?, grid.min_spacing())?;
        println!("geodesic vs matched bohmian, max deviation: {:.4e} grid spacings", eq.max_deviation);
        println!("geodesic reached t = {:.4} of {:.4}", eq.geodesic_end, eq.bohmian_end);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let sc = load_config(&config)?.resolve()?;
            let s = run_scenario(&sc, &RunOptions { seed: cli.seed, out: cli.out })?;
            print!("{}", s.report);
            println!("run directory: {}", s.dir.display());
        }
        Command::CheckFinsler { config, states } => {
            let sc = load_config(&config)?.resolve()?;
            let seed = cli.seed.unwrap_or(sc.config.trajectories.seed);
            println!("scenario: {} ({})", sc.config.name, sc.id);
            println!("{}", check_scenario(&sc, states, seed)?);
        }
        Command::Analyze { run_dir } => analyze(&run_dir)?,
        Command::Presets => {
            for name in presets::names() {
                let c = presets::load(name)?;
                println!("{name:22} {}", c.description);
            }
        }
        Command::Convert { snapshot } => {
            let s = read_snapshot(&snapshot).map_err(|e| LabError::stage("convert", e))?;
            match &cli.out {
                Some(p) => write_table(&s.field, &mut BufWriter::new(File::create(p)?)),
                None => write_table(&s.field, &mut BufWriter::new(io::stdout().lock())),
            }
            .map_err(|e| LabError::stage("convert", e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
