use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use surfstokes_core::assembly::{assemble_system, AssemblyConfig, PenaltyNormal};
use surfstokes_core::geometry::{AnalyticSurface, SurfaceKind};
use surfstokes_core::mesh::build_base_mesh;
use surfstokes_core::mms::{ManufacturedCase, MmsKind};
use surfstokes_core::solver::PreconditionerKind;
use surfstokes_core::study::{report_csv, report_json, run_study, LevelRange, ReportFormat, SolverKind, StudyConfig};
use surfstokes_core::Error;

#[derive(Parser)]
#[command(name = "surfstokes", version, about = "Taylor-Hood surface finite elements for the surface Stokes problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Sphere,
    Torus,
}

#[derive(Clone, Copy, ValueEnum)]
enum MmsArg {
    Killing,
    Polynomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalArg {
    Improved,
    Discrete,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Direct,
    Minres,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecondArg {
    Exact,
    Diagonal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum BlockArg {
    A,
    B,
    BStar,
    Mu,
    Mp,
}

#[derive(clap::Args)]
struct SurfaceArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    surface: SurfaceArg,
    /// Sphere radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Torus distance from the axis to the tube centre.
    #[arg(long, default_value_t = 1.0)]
    major_radius: f64,
    /// Torus tube radius.
    #[arg(long, default_value_t = 0.4)]
    minor_radius: f64,
}

impl SurfaceArgs {
    fn kind(&self) -> SurfaceKind {
        match self.surface {
            SurfaceArg::Sphere => SurfaceKind::Sphere { radius: self.radius },
            SurfaceArg::Torus => SurfaceKind::Torus { major_radius: self.major_radius, minor_radius: self.minor_radius },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Refinement sweep against a manufactured solution.
    Study {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, default_value_t = 2)]
        geom_degree: usize,
        #[arg(long, default_value_t = 2)]
        velocity_degree: usize,
        /// Inclusive level range, e.g. `1..4`.
        #[arg(long, default_value = "1..4")]
        levels: String,
        #[arg(long, value_enum, default_value = "killing")]
        mms: MmsArg,
        #[arg(long, default_value_t = 2.0)]
        penalty_exponent: f64,
        #[arg(long, value_enum, default_value = "improved")]
        penalty_normal: NormalArg,
        #[arg(long, value_enum, default_value = "direct")]
        solver: SolverArg,
        #[arg(long, value_enum, default_value = "exact")]
        preconditioner: PrecondArg,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long, value_enum, default_value = "off")]
        spectra: Switch,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Report path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the flat triangulation of a refinement level as OFF.
    Mesh {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes one assembled block in MatrixMarket coordinate format.
    Matrix {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long, default_value_t = 2)]
        geom_degree: usize,
        #[arg(long, default_value_t = 2)]
        velocity_degree: usize,
        #[arg(long, value_enum, default_value = "a")]
        block: BlockArg,
        /// Assemble the right-hand side of this manufactured solution (sphere only).
        #[arg(long, value_enum)]
        mms: Option<MmsArg>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit status 2 for configuration problems, 1 for everything else.
fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Config(_) | Error::UnsupportedSurface(_) | Error::UnsupportedDegree(_) | Error::UnsupportedExactness(_) => {
            ExitCode::from(2)
        }
        _ => ExitCode::from(1),
    }
}

fn mms_kind(arg: MmsArg) -> MmsKind {
    match arg {
        MmsArg::Killing => MmsKind::Killing,
        MmsArg::Polynomial => MmsKind::Polynomial,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("SURFSTOKES_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("SURFSTOKES_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Study {
            surface,
            geom_degree,
            velocity_degree,
            levels,
            mms,
            penalty_exponent,
            penalty_normal,
            solver,
            preconditioner,
            tol,
            max_iter,
            spectra,
            format,
            out,
        } => {
            let config = StudyConfig {
                surface: surface.kind(),
                geom_degree,
                velocity_degree,
                levels: levels.parse::<LevelRange>()?,
                mms: mms_kind(mms),
                penalty_exponent,
                penalty_normal: match penalty_normal {
                    NormalArg::Improved => PenaltyNormal::Improved,
                    NormalArg::Discrete => PenaltyNormal::Discrete,
                },
                solver: match solver {
                    SolverArg::Direct => SolverKind::Direct,
                    SolverArg::Minres => SolverKind::Minres,
                },
                preconditioner: match preconditioner {
                    PrecondArg::Exact => PreconditionerKind::Exact,
                    PrecondArg::Diagonal => PreconditionerKind::Diagonal,
                },
                tol,
                max_iter,
                spectra: matches!(spectra, Switch::On),
            };
            let report = run_study(&config)?;
            let format = match format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            match out {
                Some(path) => surfstokes_core::study::emit_report(&report, format, &path)?,
                None => match format {
                    ReportFormat::Json => print!("{}", report_json(&report)?),
                    ReportFormat::Csv => print!("{}", report_csv(&report)),
                },
            }
            for l in report.levels.iter().filter(|l| l.failure.is_some()) {
                eprintln!("level {} failed: {}", l.level, l.failure.as_deref().unwrap_or_default());
            }
            Ok(!report.has_failures())
        }
        Command::Mesh { surface, level, out } => {
            let s = AnalyticSurface::from_kind(surface.kind()).map_err(|e| Error::Config(e.to_string()))?;
            let mesh = build_base_mesh(&s)?.refine_to(&s, level)?;
            mesh.write_off(BufWriter::new(File::create(out)?))?;
            Ok(true)
        }
        Command::Matrix { surface, level, geom_degree, velocity_degree, block, mms, out } => {
            let s = AnalyticSurface::from_kind(surface.kind()).map_err(|e| Error::Config(e.to_string()))?;
            let case = mms.map(|m| ManufacturedCase::new(mms_kind(m), &s)).transpose()?;
            let mesh = build_base_mesh(&s)?.refine_to(&s, level)?;
            let data = case.as_ref().map(|c| c as &dyn surfstokes_core::assembly::StokesData);
            let (_, system) =
                assemble_system(&mesh, &s, geom_degree, velocity_degree, data, AssemblyConfig::default())?;
            let m = match block {
                BlockArg::A => &system.a,
                BlockArg::B => &system.b,
                BlockArg::BStar => &system.b_star,
                BlockArg::Mu => &system.m_u,
                BlockArg::Mp => &system.m_p,
            };
            m.write_matrix_market(BufWriter::new(File::create(out)?))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(e);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(e),
    }
}
