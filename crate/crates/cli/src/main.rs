use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lowdist::io::{self, MeshFormat};
use lowdist::stiffen::Stagnation;
use lowdist::{
    quality_stats, stiffen, untangle, ConstraintSet, ContinuationReport, DeformationState, Density, Error,
    SimplicialMesh, StiffenConfig, Summary, UntangleConfig,
};

#[derive(Parser)]
#[command(
    name = "lowdist",
    version,
    about = "Foldover-free and quasi-isometric simplicial maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove inverted elements from an initial map.
    Untangle(UntangleCmd),
    /// Tighten the distortion bound of an untangled map.
    Stiffen(StiffenCmd),
    /// Untangle, then stiffen.
    Pipeline(PipelineCmd),
    /// Print element quality statistics of a map.
    Quality(QualityCmd),
}

#[derive(Args)]
struct Problem {
    /// Reference mesh (.mesh or .obj).
    #[arg(long)]
    mesh: PathBuf,
    /// Initial map; defaults to OBJ texture coordinates, or the reference positions for
    /// planar and volume meshes.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Constraint file (lock / affine / singularity lines, 0-based vertices).
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Shape/volume balance of the mixed density.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Output mesh (.mesh or .obj).
    #[arg(long)]
    out: PathBuf,
    /// Report CSV; the histogram goes to `<stem>.hist.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Outer iteration budget per phase.
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
}

#[derive(Args)]
struct UntangleOpts {
    /// Lower bound for the regularization ε.
    #[arg(long, default_value_t = 1e-9)]
    eps_floor: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Mixed,
    Sd,
}

impl From<DensityArg> for Density {
    fn from(d: DensityArg) -> Self {
        match d {
            DensityArg::Mixed => Density::MixedShapeVolume,
            DensityArg::Sd => Density::SymmetricDirichlet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StopRule {
    /// Stop when the relative increase of t falls below the threshold.
    Increment,
    /// Stop when W(X^{k+1}, t^{k+1}) > (1 - threshold)·W(X^k, t^k).
    Ratio,
}

#[derive(Args)]
struct StiffenOpts {
    /// Floor of the descent coefficient σ (and its first value).
    #[arg(long, default_value_t = 0.1)]
    sigma0: f64,
    #[arg(long, value_enum, default_value_t = DensityArg::Mixed)]
    density: DensityArg,
    #[arg(long, value_enum, default_value_t = StopRule::Increment)]
    stop_rule: StopRule,
}

#[derive(Args)]
struct UntangleCmd {
    #[command(flatten)]
    problem: Problem,
    #[command(flatten)]
    opts: UntangleOpts,
    /// Relative stagnation threshold.
    #[arg(long, default_value_t = 1e-3)]
    stagnation: f64,
}

#[derive(Args)]
struct StiffenCmd {
    #[command(flatten)]
    problem: Problem,
    #[command(flatten)]
    opts: StiffenOpts,
    /// Relative stagnation threshold.
    #[arg(long, default_value_t = 1e-3)]
    stagnation: f64,
}

#[derive(Args)]
struct PipelineCmd {
    #[command(flatten)]
    problem: Problem,
    #[command(flatten)]
    untangle: UntangleOpts,
    #[command(flatten)]
    stiffen: StiffenOpts,
    /// Relative stagnation threshold for both phases.
    #[arg(long, default_value_t = 1e-3)]
    stagnation: f64,
}

#[derive(Args)]
struct QualityCmd {
    #[arg(long)]
    mesh: PathBuf,
    /// Map to evaluate; defaults to OBJ texture coordinates.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Per-element CSV; the histogram goes to `<stem>.hist.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, value_enum, default_value_t = DensityArg::Mixed)]
    density: DensityArg,
}

enum Failure {
    Input(Error),
    Budget,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

struct Loaded {
    mesh: SimplicialMesh,
    initial: DeformationState,
    constraints: ConstraintSet,
}

fn load_problem(p: &Problem) -> Result<Loaded, Error> {
    let file = io::load_mesh(&p.mesh, MeshFormat::from_path(&p.mesh)?)?;
    let initial = match (&p.init, file.state) {
        (Some(path), _) => io::load_state(path, &file.mesh)?,
        (None, Some(uv)) => uv,
        (None, None) if file.mesh.is_surface() => {
            return Err(Error::InvalidParameter(format!(
                "{} is a surface; flattening needs an initial planar map (--init)",
                p.mesh.display()
            )))
        }
        (None, None) => file.positions,
    };
    let constraints = match &p.constraints {
        Some(path) => io::load_constraints(path, file.mesh.dim())?.resolve(&file.mesh)?,
        None => ConstraintSet::new(file.mesh.dim()),
    };
    Ok(Loaded {
        mesh: file.mesh,
        initial,
        constraints,
    })
}

fn untangle_config(p: &Problem, opts: &UntangleOpts, stagnation: f64) -> UntangleConfig {
    UntangleConfig {
        theta: p.theta,
        epsilon_floor: opts.eps_floor,
        relative_stagnation: stagnation,
        max_outer_iterations: p.max_outer,
        ..Default::default()
    }
}

fn stiffen_config(p: &Problem, opts: &StiffenOpts, stagnation: f64) -> StiffenConfig {
    StiffenConfig {
        theta: p.theta,
        density: opts.density.into(),
        sigma_floor: opts.sigma0,
        relative_stagnation: stagnation,
        stagnation: match opts.stop_rule {
            StopRule::Increment => Stagnation::ParameterIncrement,
            StopRule::Ratio => Stagnation::ObjectiveRatio,
        },
        max_outer_iterations: p.max_outer,
        ..Default::default()
    }
}

fn log_phase(name: &str, report: &ContinuationReport) {
    let status = match report.status {
        lowdist::RunStatus::Converged => "converged",
        lowdist::RunStatus::BudgetExhausted => "budget exhausted",
    };
    eprintln!("{name}: {status} after {} outer iterations", report.outer_iterations());
}

fn finish(
    p: &Problem,
    loaded: &Loaded,
    state: &DeformationState,
    reports: &[&ContinuationReport],
    density: Density,
    t: Option<f64>,
) -> Result<(), Error> {
    io::store_mesh(&p.out, &loaded.mesh, Some(state), MeshFormat::from_path(&p.out)?)?;
    let stats = quality_stats(&loaded.mesh, state, density, p.theta)?;
    let summary = Summary::new(&stats, density, p.theta, loaded.mesh.dim(), t);
    if let Some(path) = &p.report {
        io::write_report(path, reports, Some(&stats), Some(&summary))?;
    }
    println!("{}", summary.line());
    Ok(())
}

fn budget(converged: bool) -> Outcome {
    if converged {
        Ok(())
    } else {
        Err(Failure::Budget)
    }
}

fn run_untangle(cmd: &UntangleCmd) -> Outcome {
    let p = &cmd.problem;
    let loaded = load_problem(p)?;
    let config = untangle_config(p, &cmd.opts, cmd.stagnation);
    let out = untangle(&loaded.mesh, &loaded.initial, &loaded.constraints, &config)?;
    log_phase("untangle", &out.report);
    finish(p, &loaded, &out.state, &[&out.report], Density::MixedShapeVolume, None)?;
    budget(out.converged())
}

fn run_stiffen(cmd: &StiffenCmd) -> Outcome {
    let p = &cmd.problem;
    let loaded = load_problem(p)?;
    let config = stiffen_config(p, &cmd.opts, cmd.stagnation);
    let out = stiffen(&loaded.mesh, &loaded.initial, &loaded.constraints, &config)?;
    log_phase("stiffen", &out.report);
    finish(
        p,
        &loaded,
        &out.state,
        &[&out.report],
        config.density,
        Some(out.terminal_t),
    )?;
    budget(out.converged())
}

fn run_pipeline(cmd: &PipelineCmd) -> Outcome {
    let p = &cmd.problem;
    let loaded = load_problem(p)?;
    let uconfig = untangle_config(p, &cmd.untangle, cmd.stagnation);
    let untangled = untangle(&loaded.mesh, &loaded.initial, &loaded.constraints, &uconfig)?;
    log_phase("untangle", &untangled.report);
    if !untangled.converged() {
        eprintln!("stiffen: skipped");
        finish(
            p,
            &loaded,
            &untangled.state,
            &[&untangled.report],
            Density::MixedShapeVolume,
            None,
        )?;
        return Err(Failure::Budget);
    }
    let sconfig = stiffen_config(p, &cmd.stiffen, cmd.stagnation);
    let stiffened = stiffen(&loaded.mesh, &untangled.state, &loaded.constraints, &sconfig)?;
    log_phase("stiffen", &stiffened.report);
    finish(
        p,
        &loaded,
        &stiffened.state,
        &[&untangled.report, &stiffened.report],
        sconfig.density,
        Some(stiffened.terminal_t),
    )?;
    budget(stiffened.converged())
}

fn run_quality(cmd: &QualityCmd) -> Outcome {
    let file = io::load_mesh(&cmd.mesh, MeshFormat::from_path(&cmd.mesh)?)?;
    let state = match (&cmd.state, file.state) {
        (Some(path), _) => io::load_state(path, &file.mesh)?,
        (None, Some(uv)) => uv,
        (None, None) => {
            return Err(Error::InvalidParameter(format!("{} carries no map; pass --state", cmd.mesh.display())).into())
        }
    };
    let density = cmd.density.into();
    let stats = quality_stats(&file.mesh, &state, density, cmd.theta)?;
    let summary = Summary::new(&stats, density, cmd.theta, file.mesh.dim(), None);
    if let Some(path) = &cmd.report {
        io::write_quality(path, &stats, Some(&summary))?;
    }
    println!(
        "elements={} inverted={} max_condition={} min_det={}",
        stats.elements.len(),
        stats.inverted,
        stats.max_condition,
        stats.d_min
    );
    if stats.inverted > 0 {
        eprintln!(
            "warning: {} inverted elements (d_min = {})",
            stats.inverted, stats.d_min
        );
    }
    println!("{}", summary.line());
    Ok(())
}

fn exit_with(outcome: Outcome) -> ExitCode {
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Budget) => {
            eprintln!("error: outer iteration budget exhausted; best state written");
            ExitCode::from(2)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    exit_with(match &cli.command {
        Command::Untangle(c) => run_untangle(c),
        Command::Stiffen(c) => run_stiffen(c),
        Command::Pipeline(c) => run_pipeline(c),
        Command::Quality(c) => run_quality(c),
    })
}
