use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hfe_core::config::PipelineConfig;
use hfe_core::phantom::{generate_experiment, ExperimentSpec, Lesion};
use hfe_core::pipeline::{compare_model_dirs, run_until, Stage, REPORT_FILE};
use hfe_core::report::{to_json, ValidationReport};
use hfe_core::HfeError;

const EXIT_EXCLUDED: u8 = 2;
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hfe",
    version,
    about = "Homogenized FE vertebra models validated against DVC displacement grids"
)]
struct Cli {
    /// Exit with status 2 when any exclusion criterion fires.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit or load the grey-to-density calibration.
    Calibrate(StageArgs),
    /// Map calibrated densities onto the mesh elements.
    MapMaterials(StageArgs),
    /// Build DVC boundary conditions and solve.
    Solve(StageArgs),
    /// Compare FE and DVC displacements.
    Validate(StageArgs),
    /// Evaluate the exclusion criteria.
    Exclude(StageArgs),
    /// Propagate the displacement error to strains.
    PropagateError(StageArgs),
    /// Run every stage, including the optional clinical comparison.
    Pipeline(StageArgs),
    /// Generate a synthetic phantom experiment and its pipeline configuration.
    Phantom(PhantomArgs),
    /// Compare two solve output directories computed on the same mesh.
    CompareModels(CompareArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "hfe-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the grey volume header.
    #[arg(long)]
    volume: Option<PathBuf>,
    /// Override the calibration file.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Override the mesh file.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Override the loaded DVC grid.
    #[arg(long)]
    dvc: Option<PathBuf>,
    /// Override the trabecular mask header.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args)]
struct PhantomArgs {
    /// Experiment specification (TOML); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "hfe-phantom")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// DVC noise per component (mm).
    #[arg(long)]
    noise: Option<f64>,
    /// Upper platen shortening (mm).
    #[arg(long)]
    compression: Option<f64>,
    /// Spherical lesion as `x,y,z,radius,multiplier`.
    #[arg(long, value_parser = parse_lesion)]
    lesion: Option<Lesion>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Write the comparison JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_lesion(s: &str) -> Result<Lesion, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z, r, m] => Ok(Lesion {
            center: [*x, *y, *z],
            radius: *r,
            multiplier: *m,
        }),
        _ => Err("expected x,y,z,radius,multiplier".into()),
    }
}

fn load_config(args: &StageArgs) -> Result<PipelineConfig, HfeError> {
    let mut cfg = PipelineConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let paths = &mut cfg.paths;
    if let Some(p) = &args.volume {
        paths.volume = p.clone();
    }
    if let Some(p) = &args.calibration {
        paths.calibration = Some(p.clone());
        paths.calibration_samples = None;
    }
    if let Some(p) = &args.mesh {
        paths.mesh = p.clone();
    }
    if let Some(p) = &args.dvc {
        paths.dvc = p.clone();
    }
    if let Some(p) = &args.mask {
        paths.mask = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_stage(args: &StageArgs, last: Stage) -> Result<ValidationReport, HfeError> {
    let cfg = load_config(args)?;
    let report = run_until(&cfg, &args.out, last)?;
    println!("{}", args.out.join(REPORT_FILE).display());
    if let Some(c) = &report.comparison {
        for (axis, m) in &c.directions {
            if let Some(m) = m.metrics() {
                println!(
                    "{axis}: slope {:.4} R2 {:.4} RMSE {:.2} um ({:.2}%) n={}",
                    m.slope,
                    m.r2,
                    1e3 * m.rmse,
                    m.rmse_percent,
                    m.n_points
                );
            }
        }
    }
    if let Some(e) = &report.exclusion {
        println!("excluded: {}", e.excluded);
    }
    Ok(report)
}

fn phantom(args: &PhantomArgs) -> Result<(), HfeError> {
    let mut spec = match &args.config {
        Some(p) => ExperimentSpec::from_file(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(noise) = args.noise {
        spec.noise = noise;
        spec.zero_noise = noise;
    }
    if let Some(c) = args.compression {
        spec.compression = c;
    }
    if args.lesion.is_some() {
        spec.phantom.lesion = args.lesion;
    }
    let exp = generate_experiment(&spec, &args.out)?;
    println!("{}", exp.config_path.display());
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), HfeError> {
    let c = compare_model_dirs(&args.a, &args.b)?;
    let json = to_json(&c)?;
    match &args.out {
        Some(p) => std::fs::write(p, json).map_err(|e| HfeError::Io {
            path: p.clone(),
            source: e,
        }),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn print_error(e: &HfeError) {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let staged = |args: &StageArgs, last: Stage| run_stage(args, last).map(|r| r.excluded());
    let result = match &cli.command {
        Command::Calibrate(a) => staged(a, Stage::Calibrate),
        Command::MapMaterials(a) => staged(a, Stage::MapMaterials),
        Command::Solve(a) => staged(a, Stage::Solve),
        Command::Validate(a) => staged(a, Stage::Compare),
        Command::Exclude(a) => staged(a, Stage::Exclusion),
        Command::PropagateError(a) => staged(a, Stage::Propagation),
        Command::Pipeline(a) => staged(a, Stage::Clinical),
        Command::Phantom(a) => phantom(a).map(|()| false),
        Command::CompareModels(a) => compare(a).map(|()| false),
    };
    match result {
        Ok(true) if cli.strict => ExitCode::from(EXIT_EXCLUDED),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            print_error(&e);
            ExitCode::from(EXIT_ERROR)
        }
    }
}
