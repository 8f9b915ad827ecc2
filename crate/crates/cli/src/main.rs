use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use dqd_core::eigen::half_period;
use dqd_core::oct::{optimize_with_observer, OptimizationResult, TargetSpec};
use dqd_core::propagate::Recording;
use dqd_core::sequence::{build_sequence, chain_table, run_sequence, TableRow};
use dqd_core::sweep::run_sweep;
use dqd_core::{DoubleDot, Task};
use serde_json::json;

mod config;
mod output;

use config::{ConfigError, ExperimentConfig};
use output::{read_field, threshold_cell, threshold_json, Artifacts};

#[derive(Parser, Debug)]
#[command(name = "dqd", version, about = "Charge-transfer control in a double quantum dot")]
struct Cli {
    /// Config file of `section.key = value` lines.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set oct.E0=1.0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Directory for all artifacts; overrides `output.dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Exit with status 1 when an optimization does not converge.
    #[arg(long, global = true)]
    strict: bool,
    /// No progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectrum, resonance frequency and eigenvector dump.
    Eigen,
    /// Optimize a control field.
    Optimize {
        #[arg(value_enum)]
        task: TaskArg,
    },
    /// One optimization per value of `sweep.parameter`.
    Sweep,
    /// n-fold transfer chains from an optimized field and its inversion.
    Sequence {
        /// Base field CSV; overrides `sequence.base_field`. Optimized inline if absent.
        #[arg(long)]
        base_field: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TaskArg {
    Prepare,
    Transfer,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Prepare => Task::Prepare,
            TaskArg::Transfer => Task::Transfer,
        }
    }
}

enum Failure {
    Config(ConfigError),
    Runtime(String),
    NotConverged,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<dqd_core::Error> for Failure {
    fn from(e: dqd_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(format!("i/o: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: optimization did not converge (--strict)");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if let Command::Sequence { base_field: Some(p) } = &cli.command {
        config.sequence_base_field = Some(p.clone());
    }
    if let Command::Sweep = cli.command {
        if config.sweep_parameter.is_none() || config.sweep_values.is_empty() {
            return Err(ConfigError::BadValue {
                key: "sweep.parameter".into(),
                value: String::new(),
                reason: "the sweep command needs sweep.parameter and sweep.values".into(),
            });
        }
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    let system = DoubleDot::new(config.grid()?, config.well()?, config.n_states)?;
    let out = Artifacts::new(&config.output_dir, config.digest())?;
    match &cli.command {
        Command::Eigen => cmd_eigen(&config, &system, &out),
        Command::Optimize { task } => cmd_optimize(cli, &config, &system, &out, (*task).into()),
        Command::Sweep => cmd_sweep(cli, &config, &system, &out),
        Command::Sequence { .. } => cmd_sequence(cli, &config, &system, &out),
    }
}

fn grid_json(config: &ExperimentConfig, system: &DoubleDot) -> serde_json::Value {
    json!({
        "x_min": config.x_min,
        "x_max": config.x_max,
        "n_points": config.n_points,
        "dx": system.grid().dx(),
    })
}

fn cmd_eigen(config: &ExperimentConfig, system: &DoubleDot, out: &Artifacts) -> Result<(), Failure> {
    let spec = system.spectrum();
    let mut w = out.csv("eigenvalues.csv", "index,energy")?;
    for p in spec.pairs() {
        writeln!(w, "{},{:.15e}", p.index, p.energy)?;
    }
    w.flush()?;

    let columns: String = std::iter::once("x".to_string())
        .chain((0..spec.len()).map(|n| format!("psi{n}")))
        .collect::<Vec<_>>()
        .join(",");
    let mut w = out.csv("eigenvectors.csv", &columns)?;
    for (i, x) in system.grid().coordinates().iter().enumerate() {
        write!(w, "{x:.6}")?;
        for p in spec.pairs() {
            write!(w, ",{:.12e}", p.state.amplitudes()[i].re)?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    let energies = spec.energies();
    println!("E0 = {:.10}", energies[0]);
    println!("E1 = {:.10}", energies[1]);
    println!("omega01 = {:.10}", spec.omega01());
    match half_period(spec.omega01()) {
        Ok(t) => println!("half_period = {t:.6}"),
        Err(_) => println!("half_period = inf"),
    }
    println!("artifacts in {}", config.output_dir.display());
    Ok(())
}

fn run_optimization(
    cli: &Cli,
    config: &ExperimentConfig,
    system: &DoubleDot,
    task: Task,
) -> Result<OptimizationResult, Failure> {
    let (start, target) = task.endpoints(system);
    let target = TargetSpec::new(target)?;
    let quiet = cli.quiet;
    let result = optimize_with_observer(system.propagator(), &start, &target, &config.optimization(), |rec| {
        if !quiet && rec.iteration % 10 == 0 {
            eprintln!("iteration {:4}  yield {:.8}  alpha {:.4e}", rec.iteration, rec.yield_value, rec.alpha);
        }
    })?;
    Ok(result)
}

fn cmd_optimize(
    cli: &Cli,
    config: &ExperimentConfig,
    system: &DoubleDot,
    out: &Artifacts,
    task: Task,
) -> Result<(), Failure> {
    let result = run_optimization(cli, config, system, task)?;
    let field = &result.final_field;
    let (start, _) = task.endpoints(system);
    let traj = system
        .propagator()
        .propagate(&start, field, &system.tracked_basis(), Recording::every(config.stride))?;

    out.write_field("field.csv", field)?;
    out.write_occupations("occupations.csv", &traj, config.n_states)?;
    out.write_spectrum("spectrum.csv", field)?;
    let mut w = out.csv("history.csv", "iteration,yield,alpha")?;
    for (k, y) in result.yield_history.iter().enumerate() {
        let alpha = if k == 0 { f64::NAN } else { result.alpha_history[k - 1] };
        writeln!(w, "{k},{y:.15e},{alpha:.15e}")?;
    }
    w.flush()?;
    let summary = json!({
        "task": task.name(),
        "yield": result.final_yield,
        "iterations": result.iterations(),
        "converged": result.converged,
        "fluence": field.fluence(),
        "T": config.t_final,
        "E0": config.fluence,
        "omega_th": threshold_json(config.omega_th),
        "omega01": system.spectrum().omega01(),
        "dt": field.mesh().dt(),
        "grid": grid_json(config, system),
        "units": out.units_json(),
        "config_sha256": config.digest(),
    });
    out.write_json("summary.json", &summary)?;

    println!("{} yield = {:.8}", task.name(), result.final_yield);
    println!("iterations = {}  converged = {}", result.iterations(), result.converged);
    println!("fluence = {:.10}", field.fluence());
    println!("artifacts in {}", config.output_dir.display());
    if cli.strict && !result.converged {
        return Err(Failure::NotConverged);
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, config: &ExperimentConfig, system: &DoubleDot, out: &Artifacts) -> Result<(), Failure> {
    let parameter = config.sweep_parameter.expect("checked in load_config");
    let columns = format!("{},yield,iterations,converged", parameter.name());
    let row = |p: &dqd_core::sweep::SweepPoint| {
        format!("{},{:.15e},{},{}", threshold_cell(p.value), p.yield_value, p.iterations, p.converged)
    };
    // completed points land here as they finish, so an interrupted sweep keeps them
    let partial_path = out.path("sweep.partial.csv");
    let partial = Mutex::new(out.csv("sweep.partial.csv", &columns)?);
    let quiet = cli.quiet;
    let points = run_sweep(
        system,
        config.sweep_task,
        &config.optimization(),
        parameter,
        &config.sweep_values,
        |p| {
            let mut w = partial.lock().expect("writer lock");
            let _ = writeln!(w, "{}", row(p)).and_then(|_| w.flush());
            if !quiet {
                eprintln!("{} = {}  yield {:.8}", parameter.name(), threshold_cell(p.value), p.yield_value);
            }
        },
    )?;
    drop(partial);

    let mut w = out.csv("sweep.csv", &columns)?;
    for p in &points {
        writeln!(w, "{}", row(p))?;
        println!("{}", row(p));
    }
    w.flush()?;
    fs::remove_file(partial_path)?;
    if cli.strict && points.iter().any(|p| !p.converged) {
        return Err(Failure::NotConverged);
    }
    Ok(())
}

fn write_table(out: &Artifacts, rows: &[TableRow]) -> Result<(), Failure> {
    let mut w = out.csv("table.csv", "E0,omega_th,n,computed_yield,power_law_yield")?;
    for r in rows {
        let line = format!(
            "{},{},{},{:.10},{:.10}",
            r.fluence,
            threshold_cell(r.omega_th),
            r.n,
            r.computed_yield,
            r.power_law_yield
        );
        writeln!(w, "{line}")?;
        println!("{line}");
    }
    w.flush()?;
    Ok(())
}

fn cmd_sequence(cli: &Cli, config: &ExperimentConfig, system: &DoubleDot, out: &Artifacts) -> Result<(), Failure> {
    if !config.sequence_rows.is_empty() {
        let settings: Vec<(f64, f64)> = config.sequence_rows.iter().map(|r| (r.fluence, r.omega_th)).collect();
        let rows = chain_table(system, &config.optimization(), &settings, &config.sequence_n)?;
        return write_table(out, &rows);
    }

    let base = match &config.sequence_base_field {
        Some(path) => read_field(path).map_err(Failure::Runtime)?,
        None => {
            let result = run_optimization(cli, config, system, Task::Transfer)?;
            if cli.strict && !result.converged {
                return Err(Failure::NotConverged);
            }
            result.final_field
        }
    };
    let (left, right) = Task::Transfer.endpoints(system);
    let n_max = *config.sequence_n.iter().max().expect("validated non-empty");
    let seq = run_sequence(system.propagator(), &left, &base, n_max, &right, &left)?;
    let rows: Vec<TableRow> = config
        .sequence_n
        .iter()
        .map(|&n| TableRow {
            fluence: config.fluence,
            omega_th: config.omega_th,
            n,
            computed_yield: seq.per_segment_yield[n - 1],
            power_law_yield: seq.power_law_prediction[n - 1],
        })
        .collect();
    write_table(out, &rows)?;

    let merged = build_sequence(&base, config.sequence_field_n)?;
    out.write_field("merged_field.csv", &merged)?;
    let traj = system
        .propagator()
        .propagate(&left, &merged, &system.tracked_basis(), Recording::every(config.stride))?;
    out.write_occupations("merged_occupations.csv", &traj, config.n_states)?;
    if !cli.quiet {
        eprintln!("largest norm deviation along the chain: {:.3e}", seq.max_norm_error);
    }
    Ok(())
}
