use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use cutc_core::controller::{demand_instance, run, ControlError, Demand};
use cutc_core::io::{self, Config, ScheduleFile};
use cutc_core::microsim::{compare_baseline, metrics, simulate, CompareError, SimRequest};
use cutc_core::net_model::Network;
use cutc_core::scheduler::{solve, SolveError};

/// Centralized urban traffic controller.
///
/// Files are plain text, one whitespace-separated record per line, `#`
/// starts a comment. Exit status: 0 success, 1 infeasible or out of time,
/// 2 bad input.
#[derive(Parser)]
#[command(name = "cutc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build candidate routes and enter windows for every vehicle of a
    /// demand file and write the scheduling instance.
    Preprocess(PreprocessArgs),
    /// Solve a scheduling instance written by `preprocess`.
    Schedule(ScheduleArgs),
    /// Run the micro-simulator over a controller trace or a solved schedule.
    Simulate(SimulateArgs),
    /// Run the rolling-horizon controller over a demand file.
    Run(RunArgs),
    /// Simulate controller routes and traffic-blind shortest paths for the
    /// same demand and print both metric reports.
    CompareBaseline(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// Network file.
    #[arg(long)]
    network: PathBuf,
    /// Config file of `key value` lines; command-line flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RouteFlags {
    /// Candidate routes kept per controlled vehicle.
    #[arg(long)]
    k_routes: Option<usize>,
    /// Jaccard similarity at which two routes fall in the same cluster.
    #[arg(long)]
    similarity_threshold: Option<f64>,
}

#[derive(Args)]
struct SolveFlags {
    /// Wall-clock budget per solve, in seconds.
    #[arg(long)]
    budget_secs: Option<f64>,
    /// Search workers; one worker is fully deterministic.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for the shuffled search strategies.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ControlFlags {
    /// Steps between controller epochs.
    #[arg(long)]
    epoch_steps: Option<u32>,
    /// Epochs a vehicle may be deferred before the run fails.
    #[arg(long)]
    max_defer: Option<u32>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    common: Common,
    /// Demand file.
    #[arg(long)]
    demand: PathBuf,
    #[command(flatten)]
    routes: RouteFlags,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    common: Common,
    /// Instance file written by `preprocess`.
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    solve: SolveFlags,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Trace written by `run`.
    #[arg(long, conflicts_with_all = ["instance", "schedule"], required_unless_present = "schedule")]
    trace: Option<PathBuf>,
    /// Instance file the schedule was solved from.
    #[arg(long, requires = "schedule")]
    instance: Option<PathBuf>,
    /// Schedule written by `schedule`.
    #[arg(long, requires = "instance")]
    schedule: Option<PathBuf>,
    /// Simulation tick in seconds; must divide the network step.
    #[arg(long)]
    tick_secs: Option<u32>,
    /// Also write the event log here.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Demand file.
    #[arg(long)]
    demand: PathBuf,
    #[command(flatten)]
    routes: RouteFlags,
    #[command(flatten)]
    solve: SolveFlags,
    #[command(flatten)]
    control: ControlFlags,
    /// Write per-epoch solver statistics here instead of stderr.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Demand file.
    #[arg(long)]
    demand: PathBuf,
    #[command(flatten)]
    routes: RouteFlags,
    #[command(flatten)]
    solve: SolveFlags,
    #[command(flatten)]
    control: ControlFlags,
    /// Simulation tick in seconds; must divide the network step.
    #[arg(long)]
    tick_secs: Option<u32>,
    /// Also write the controller trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

enum Failure {
    /// No schedule: infeasible, deferred too long, or out of time.
    Unsolved(anyhow::Error),
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn located<T>(path: &Path, r: Result<T, io::ParseError>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow!("{}:{}: {}", path.display(), e.line, e.message))
}

fn load_network(path: &Path) -> anyhow::Result<Network> {
    located(path, io::parse_network(&read(path)?))
}

fn load_demand(path: &Path, network: &Network) -> anyhow::Result<Vec<Demand>> {
    located(path, io::parse_demand(&read(path)?, network))
}

fn load_config(common: &Common) -> anyhow::Result<Config> {
    match &common.config {
        Some(p) => Config::parse(&read(p)?).with_context(|| format!("config {}", p.display())),
        None => Ok(Config::default()),
    }
}

impl RouteFlags {
    fn apply(&self, c: &mut Config) {
        if let Some(k) = self.k_routes {
            c.k_routes = k;
        }
        if let Some(t) = self.similarity_threshold {
            c.similarity_threshold = t;
        }
    }
}

impl SolveFlags {
    fn apply(&self, c: &mut Config) {
        if let Some(b) = self.budget_secs {
            c.budget_secs = b;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
    }
}

impl ControlFlags {
    fn apply(&self, c: &mut Config) {
        if let Some(e) = self.epoch_steps {
            c.epoch_steps = e;
        }
        if let Some(m) = self.max_defer {
            c.max_defer = m;
        }
    }
}

/// Validates the merged config; the network file decides the step length.
fn finish_config(mut c: Config, network: &Network) -> anyhow::Result<Config> {
    c.step_seconds = network.step_seconds();
    c.validate()?;
    Ok(c)
}

fn control_failure(e: ControlError) -> Failure {
    match e {
        ControlError::DeferLimit { .. } => Failure::Unsolved(e.into()),
        other => Failure::Input(other.into()),
    }
}

fn preprocess(a: PreprocessArgs) -> Outcome {
    let network = load_network(&a.common.network)?;
    let demand = load_demand(&a.demand, &network)?;
    let mut config = load_config(&a.common)?;
    a.routes.apply(&mut config);
    let config = finish_config(config, &network)?;
    let instance = demand_instance(&demand, &network, &config.controller().routes)
        .map_err(|e| Failure::Input(e.into()))?;
    emit(a.common.out.as_deref(), &io::write_instance(&instance))?;
    Ok(())
}

fn schedule(a: ScheduleArgs) -> Outcome {
    let network = load_network(&a.common.network)?;
    let instance = located(&a.instance, io::parse_instance(&read(&a.instance)?, &network))?;
    let mut config = load_config(&a.common)?;
    a.solve.apply(&mut config);
    let config = finish_config(config, &network)?;
    let solution = solve(&instance, &config.controller().solve).map_err(|e| match e {
        SolveError::Invalid(_) => Failure::Input(e.into()),
        _ => Failure::Unsolved(e.into()),
    })?;
    let file = ScheduleFile {
        optimality: Some(solution.optimality),
        objective: Some(solution.objective),
        schedule: solution.schedule,
    };
    emit(a.common.out.as_deref(), &io::write_schedule(&file, &network))?;
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> Outcome {
    let network = load_network(&a.common.network)?;
    let mut config = load_config(&a.common)?;
    if let Some(t) = a.tick_secs {
        config.tick_seconds = t;
    }
    let config = finish_config(config, &network)?;
    let requests = match (&a.trace, &a.instance, &a.schedule) {
        (Some(t), _, _) => {
            let trace = located(t, io::parse_trace(&read(t)?, &network))?;
            SimRequest::from_trace(&trace, &network)
        }
        (None, Some(i), Some(s)) => {
            let instance = located(i, io::parse_instance(&read(i)?, &network))?;
            let file = located(s, io::parse_schedule(&read(s)?, &network))?;
            SimRequest::from_schedule(&instance, &file.schedule)
        }
        _ => return Err(anyhow!("give --trace, or --instance with --schedule").into()),
    };
    let log = simulate(&requests, &network, &config.sim());
    if let Some(p) = &a.events {
        emit(Some(p), &io::write_event_log(&log, &network))?;
    }
    let report = metrics(&log).map_err(|e| Failure::Unsolved(e.into()))?;
    emit(a.common.out.as_deref(), &io::write_metrics(&report))?;
    Ok(())
}

fn run_cmd(a: RunArgs) -> Outcome {
    let network = load_network(&a.common.network)?;
    let demand = load_demand(&a.demand, &network)?;
    let mut config = load_config(&a.common)?;
    a.routes.apply(&mut config);
    a.solve.apply(&mut config);
    a.control.apply(&mut config);
    let config = finish_config(config, &network)?;
    let out = run(&demand, &network, &config.controller()).map_err(control_failure)?;
    emit(a.common.out.as_deref(), &io::write_trace(&out.trace, &network))?;
    let stats = io::write_epoch_stats(&out.epochs);
    match &a.stats {
        Some(p) => emit(Some(p), &stats)?,
        None => eprint!("{stats}"),
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Outcome {
    let network = load_network(&a.common.network)?;
    let demand = load_demand(&a.demand, &network)?;
    let mut config = load_config(&a.common)?;
    a.routes.apply(&mut config);
    a.solve.apply(&mut config);
    a.control.apply(&mut config);
    if let Some(t) = a.tick_secs {
        config.tick_seconds = t;
    }
    let config = finish_config(config, &network)?;
    let cmp = compare_baseline(&demand, &network, &config.controller(), &config.sim()).map_err(|e| match e {
        CompareError::Control(c) => control_failure(c),
        CompareError::Metrics { .. } => Failure::Unsolved(e.into()),
        CompareError::Baseline(_) => Failure::Input(e.into()),
    })?;
    if let Some(p) = &a.trace {
        emit(Some(p), &io::write_trace(&cmp.run.trace, &network))?;
    }
    emit(a.common.out.as_deref(), &io::write_comparison(&cmp.optimized, &cmp.baseline))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Schedule(a) => schedule(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::CompareBaseline(a) => compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unsolved(e)) => {
            eprintln!("cutc: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("cutc: {e:#}");
            ExitCode::from(2)
        }
    }
}
