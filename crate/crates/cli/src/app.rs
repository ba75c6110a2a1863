//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use adaptmesh::driver::solve_poisson;
use adaptmesh::{adaptmesh_observed, estimate, EstimatorVariant, FemSolution, GenConfig, GenError, Stage, TriMesh};
use clap::{Parser, Subcommand, ValueEnum};

use crate::input::{parse_domain, DomainFormat};
use crate::output::{render_svg, write_mesh, ColorBy, MeshFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_TARGET_UNMET: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "adaptmesh", version, about = "Adaptive triangular mesh generation for polygonal domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mesh a polygonal domain.
    Generate(GenerateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    Json,
    Poly,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Msh2,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Paper,
    Classical,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SvgColor {
    None,
    #[default]
    Quality,
    Eta,
}

#[derive(clap::Args, Debug)]
pub struct GenerateArgs {
    /// Domain file (JSON or .poly).
    pub input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Marking threshold in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 20)]
    pub max_refinements: usize,
    /// Average quality at which refinement stops.
    #[arg(long, default_value_t = 0.9)]
    pub quality: f64,
    /// Also require this average minimum angle, in degrees.
    #[arg(long, value_name = "DEG")]
    pub min_angle_target: Option<f64>,
    /// Flip/move rounds per smoothing pass.
    #[arg(long, default_value_t = 20)]
    pub smooth_iters: usize,
    #[arg(long, value_enum, default_value_t = Estimator::Paper)]
    pub estimator: Estimator,
    /// Mesh output path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Mesh format; inferred from the output extension when omitted.
    #[arg(long, value_enum)]
    pub output_format: Option<OutputFormat>,
    /// Render the final mesh to this SVG file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SvgColor::Quality)]
    pub svg_color: SvgColor,
    /// Write one SVG per iteration into this directory.
    #[arg(long, value_name = "DIR")]
    pub snapshots: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Exit with status 4 when the quality target is not reached.
    #[arg(long)]
    pub strict: bool,
}

impl GenerateArgs {
    pub fn config(&self) -> GenConfig {
        GenConfig {
            theta: self.theta,
            max_refinements: self.max_refinements,
            quality_target: self.quality,
            min_angle_target: self.min_angle_target,
            smooth_max_iters: self.smooth_iters,
            estimator_variant: match self.estimator {
                Estimator::Paper => EstimatorVariant::Paper,
                Estimator::Classical => EstimatorVariant::Classical,
            },
            ..GenConfig::default()
        }
    }
}

/// Parses `argv` (including the program name) and runs it, returning the
/// process exit status. Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Generate(args) => generate(&args),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), i32> {
    fs::write(path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_IO
    })
}

fn snapshot_name(stage: Stage) -> Option<String> {
    match stage {
        Stage::Initial => Some("iter_000.svg".into()),
        Stage::Smoothed(k) => Some(format!("iter_{k:03}.svg")),
        Stage::Refined(_) => None,
    }
}

pub fn generate(args: &GenerateArgs) -> i32 {
    match generate_inner(args) {
        Ok(code) | Err(code) => code,
    }
}

fn generate_inner(args: &GenerateArgs) -> Result<i32, i32> {
    let text = fs::read_to_string(&args.input).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", args.input.display());
        EXIT_IO
    })?;
    let format = match args.format {
        Some(InputFormat::Json) => DomainFormat::Json,
        Some(InputFormat::Poly) => DomainFormat::Poly,
        None => DomainFormat::from_path(&args.input),
    };
    let domain = parse_domain(&text, format).map_err(|e| {
        eprintln!("error: {}: {e}", args.input.display());
        EXIT_INVALID_INPUT
    })?;

    if let Some(dir) = &args.snapshots {
        fs::create_dir_all(dir).map_err(|e| {
            eprintln!("error: cannot create {}: {e}", dir.display());
            EXIT_IO
        })?;
    }
    let mut snapshot_error = None;
    let cfg = args.config();
    let result = adaptmesh_observed(&domain, &cfg, |stage, mesh| {
        let (Some(dir), Some(name)) = (&args.snapshots, snapshot_name(stage)) else { return };
        if snapshot_error.is_none() {
            let path = dir.join(name);
            if let Err(e) = fs::write(&path, render_svg(mesh, &ColorBy::Quality)) {
                snapshot_error = Some(format!("cannot write {}: {e}", path.display()));
            }
        }
    });
    if let Some(msg) = snapshot_error {
        eprintln!("error: {msg}");
        return Err(EXIT_IO);
    }
    let (mesh, report) = result.map_err(|e| {
        eprintln!("error: {e}");
        match e {
            GenError::Solver { .. } => EXIT_SOLVER,
            _ => EXIT_INVALID_INPUT,
        }
    })?;

    let mesh_format = match args.output_format {
        Some(OutputFormat::Msh2) => MeshFormat::Msh2,
        Some(OutputFormat::Json) => MeshFormat::Json,
        None => args.output.as_deref().map_or(MeshFormat::Msh2, MeshFormat::from_path),
    };
    let mesh_text = write_mesh(&mesh, mesh_format);
    match &args.output {
        Some(path) => write_file(path, &mesh_text)?,
        None => print!("{mesh_text}"),
    }
    if let Some(path) = &args.svg {
        let color = match args.svg_color {
            SvgColor::None => ColorBy::None,
            SvgColor::Quality => ColorBy::Quality,
            SvgColor::Eta => ColorBy::Scalar(eta_field(&mesh, &cfg)?),
        };
        write_file(path, &render_svg(&mesh, &color))?;
    }
    if let Some(path) = &args.stats {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(path, &(json + "\n"))?;
    }

    let last = report.final_summary();
    eprintln!(
        "{} refinements, {} vertices, {} triangles, average quality {:.4}, minimum quality {:.4}, target {}",
        report.iterations_run,
        last.vertex_count,
        last.triangle_count,
        last.average_quality,
        last.min_quality,
        if report.target_reached { "reached" } else { "not reached" }
    );
    if args.strict && !report.target_reached {
        eprintln!("error: quality target {} not reached", cfg.quality_target);
        return Ok(EXIT_TARGET_UNMET);
    }
    Ok(EXIT_OK)
}

fn eta_field(mesh: &TriMesh, cfg: &GenConfig) -> Result<Vec<f64>, i32> {
    let solver_failed = |e| {
        eprintln!("error: {e}");
        EXIT_SOLVER
    };
    let solution = solve_poisson(mesh, cfg).map_err(solver_failed)?.unwrap_or_else(|| FemSolution {
        nodal_values: vec![0.0; mesh.num_vertices()],
        solver_iterations: 0,
        residual_norm: 0.0,
    });
    estimate(mesh, &solution, adaptmesh::driver::SOURCE, cfg.estimator_variant)
        .map(|field| field.eta)
        .map_err(solver_failed)
}
