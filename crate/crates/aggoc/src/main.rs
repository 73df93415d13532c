use std::path::PathBuf;
use std::process::ExitCode;

use aggoc::experiment::{self, Algorithm, ExperimentConfig, Source};
use aggoc::format::{self, FormatError};
use aggoc_core::battery::BatteryParams;
use aggoc_core::exact::DEFAULT_CAP;
use aggoc_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 3;
const EXIT_CAP: u8 = 4;
const EXIT_IO: u8 = 5;

/// Aggregative optimal control: relaxed Frank-Wolfe, stochastic Frank-Wolfe,
/// exact enumeration and mixed-integer export.
#[derive(Parser)]
#[command(name = "aggoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance and list every violation.
    Validate(InstanceArgs),
    /// Write a battery-fleet instance file.
    Generate {
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Relaxed Frank-Wolfe; writes fw.csv.
    Fw(RunArgs),
    /// Stochastic Frank-Wolfe repetitions; writes sfw_*.csv and fw.csv.
    Sfw(RunArgs),
    /// Exact enumeration; writes exact_solution.csv.
    Exact(RunArgs),
    /// Mixed-integer model in LP format; writes model.lp.
    ExportMicp(RunArgs),
    /// Relaxation constants and convergence-bound quantities.
    Bounds(RunArgs),
    /// Any of the solver subcommands, selected by --algorithm.
    Experiment {
        #[arg(long, value_enum)]
        algorithm: AlgorithmArg,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Fw,
    Sfw,
    Exact,
    ExportMicp,
}

#[derive(Args, Clone)]
struct GeneratorArgs {
    #[arg(long, default_value_t = 100)]
    agents: usize,
    #[arg(long, default_value_t = 24)]
    horizon: usize,
    #[arg(long, default_value_t = 4)]
    u_max: i64,
    #[arg(long, default_value_t = 0)]
    s_in_min: i64,
    #[arg(long, default_value_t = 20)]
    s_in_max: i64,
    #[arg(long, default_value_t = 20)]
    s_max_min: i64,
    #[arg(long, default_value_t = 40)]
    s_max_max: i64,
    #[arg(long, default_value_t = 1.0)]
    alpha_min: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.0)]
    beta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 1.5)]
    target_scale: f64,
    /// Use the unfloored sine target.
    #[arg(long)]
    smooth_target: bool,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GeneratorArgs {
    fn params(&self) -> BatteryParams {
        BatteryParams {
            agents: self.agents,
            horizon: self.horizon,
            u_max: self.u_max,
            s_in_range: (self.s_in_min, self.s_in_max),
            s_max_range: (self.s_max_min, self.s_max_max),
            alpha_range: (self.alpha_min, self.alpha_max),
            beta_range: (self.beta_min, self.beta_max),
            target_scale: self.target_scale,
            smooth_target: self.smooth_target,
            seed: self.seed,
        }
    }
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Instance file; without it a battery fleet is generated.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
}

impl InstanceArgs {
    fn source(&self) -> Source {
        match &self.instance {
            Some(p) => Source::File(p.clone()),
            None => Source::Battery(self.generator.params()),
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Iterations K.
    #[arg(long, short = 'k', default_value_t = 100)]
    iterations: usize,
    /// Candidate profiles per iteration, n_k.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Repetition r uses seed master_seed + r.
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Iterations of the relaxed reference run used for gamma.
    #[arg(long, default_value_t = 500)]
    reference_iterations: usize,
    #[arg(long, env = "AGGOC_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Coarse battery bounds (u_max diameters, 2 max alpha curvature).
    #[arg(long)]
    coarse: bool,
    /// Largest product space the exact solver will enumerate.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Deviation at which the probability bound is reported.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record wall-clock milliseconds (otherwise wall_ms is 0).
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn config(&self, algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            source: self.instance.source(),
            algorithm,
            iterations: self.iterations,
            samples: self.samples,
            reps: self.reps,
            master_seed: self.master_seed,
            reference_iterations: self.reference_iterations,
            out_dir: self.out_dir.clone(),
            coarse_bounds: self.coarse,
            cap: self.cap,
            epsilon: self.epsilon,
            workers: self.workers,
            timing: self.timing,
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::CapExceeded { .. } => EXIT_CAP,
                _ => EXIT_VALIDATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<FormatError>() {
            return match e {
                FormatError::Json(j) if j.is_io() => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            if e.is_io_error() {
                return EXIT_IO;
            }
        }
    }
    EXIT_OTHER
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Validate(args) => {
            let inst = match args.source() {
                Source::File(path) => format::read_instance(&path)?,
                Source::Battery(params) => aggoc_core::battery::generate(&params)?,
            };
            let report = inst.validate();
            if report.is_empty() {
                println!("valid: N = {}, T = {}", inst.num_agents(), inst.horizon);
            } else {
                for v in report.iter() {
                    println!("{v}");
                }
                return Err(Error::Invalid(report).into());
            }
        }
        Command::Generate { generator, output } => {
            let inst = aggoc_core::battery::generate(&generator.params())?;
            format::write_instance(&output, &inst)?;
            println!("wrote {}", output.display());
        }
        Command::Bounds(args) => {
            let cfg = args.config(Algorithm::Sfw);
            cfg.check()?;
            let inst = experiment::load_instance(&cfg.source)?;
            let report = experiment::constants(&inst, &cfg.source, cfg.coarse_bounds)?;
            let (text, _) =
                experiment::report_bounds(&inst, &report, cfg.coarse_bounds, cfg.iterations, cfg.samples, cfg.epsilon)?;
            print!("{text}");
        }
        Command::Fw(args) => print!("{}", experiment::run_experiment(&args.config(Algorithm::Fw))?),
        Command::Sfw(args) => print!("{}", experiment::run_experiment(&args.config(Algorithm::Sfw))?),
        Command::Exact(args) => print!("{}", experiment::run_experiment(&args.config(Algorithm::Exact))?),
        Command::ExportMicp(args) => {
            print!("{}", experiment::run_experiment(&args.config(Algorithm::ExportMicp))?)
        }
        Command::Experiment { algorithm, run } => {
            let algorithm = match algorithm {
                AlgorithmArg::Fw => Algorithm::Fw,
                AlgorithmArg::Sfw => Algorithm::Sfw,
                AlgorithmArg::Exact => Algorithm::Exact,
                AlgorithmArg::ExportMicp => Algorithm::ExportMicp,
            };
            print!("{}", experiment::run_experiment(&run.config(algorithm))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
