use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gtv::analysis::{check_well_connected, verify_theorem_bound, CheckMode};
use gtv::io::{
    load_graph, load_losses, load_partition, parse_penalty, read_weights_csv, save_datasets, save_graph,
    save_partition, save_trace, save_weights,
};
use gtv::{solve, SolverConfig, StopReason};
use gtv_cli::config::Workload;
use gtv_cli::experiment::{recovery_instance, station_instance};
use gtv_cli::{emit_plots_data, run_experiment, CliError, ExperimentConfig, PRESETS};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "gtv",
    version,
    about = "Generalized total variation minimization over empirical graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the graph, datasets, partition and ground truth of one seed of
    /// an experiment into a directory.
    Generate {
        /// Preset name or JSON config path.
        experiment: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the primal-dual solver on a graph and dataset file.
    Solve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// norm2 | norm1 | quadratic | quadratic_q:<matrix file>
        #[arg(long, default_value = "norm2")]
        penalty: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long)]
        gap_tol: Option<f64>,
        #[arg(long, default_value_t = 10)]
        trace_every: usize,
        /// Trace CSV output.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Weights CSV output (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify clusters as well-connected and, given learnt weights, check
    /// the deviation bound. Prints JSON with 1-based node ids.
    Analyze {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = "norm2")]
        penalty: String,
        /// Weights CSV of a solution to compare against the bound.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Maxflow)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a preset or JSON-configured experiment and write its CSV.
    Experiment {
        /// Preset name or JSON config path.
        experiment: String,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        /// CSV output (the config's output path, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved config as JSON and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Normalize a trace, weights or experiment CSV for plotting.
    Plots {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Maxflow,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut out = sink(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Io(e.to_string()))
}

fn generate(experiment: &str, seed: u64, out: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::resolve(experiment)?;
    cfg.validate()?;
    let point = gtv_cli::experiment::points(&cfg)?.remove(0);
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    match &point.workload {
        Workload::Recovery { topology, labels, rho } => {
            let (g, p, losses, truth) = recovery_instance(topology, labels, *rho, seed)?;
            let datasets: Vec<_> = losses.iter().map(|l| l.dataset().cloned()).collect();
            save_graph(&out.join("graph.json"), &g)?;
            save_datasets(&out.join("data.json"), &datasets, labels.d)?;
            save_partition(&out.join("partition.json"), &p)?;
            save_weights(&out.join("truth.csv"), &truth)?;
        }
        Workload::Stations {
            stations,
            eta,
            data_seed,
        } => {
            let (g, losses, validation) = station_instance(stations, *eta, *data_seed, seed)?;
            let d = stations.models[0].len();
            let train: Vec<_> = losses.iter().map(|l| l.dataset().cloned()).collect();
            let val: Vec<_> = validation.into_iter().map(Some).collect();
            save_graph(&out.join("graph.json"), &g)?;
            save_datasets(&out.join("data.json"), &train, d)?;
            save_datasets(&out.join("validation.json"), &val, d)?;
        }
    }
    eprintln!("wrote {} (first point of {}, seed {seed})", out.display(), cfg.name);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_solve(
    graph: &Path,
    data: &Path,
    penalty: &str,
    lambda: f64,
    iters: usize,
    gap_tol: Option<f64>,
    trace_every: usize,
    trace: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let g = load_graph(graph)?;
    let losses = load_losses(data, g.node_count())?;
    let mut config = SolverConfig::new(lambda, parse_penalty(penalty)?)
        .with_max_iters(iters)
        .with_trace_every(trace_every);
    if let Some(tol) = gap_tol {
        config = config.with_gap_tol(tol);
    }
    let result = solve(&g, &losses, &config)?;
    if let Some(path) = trace {
        save_trace(path, &result.trace)?;
    }
    if result.stop_reason == StopReason::NonFinite {
        return Err(CliError::Numerical(format!(
            "iterates became non-finite after {} iterations",
            result.iterations
        )));
    }
    match out {
        Some(path) => save_weights(path, &result.w)?,
        None => gtv::io::write_weights_csv(io::stdout().lock(), &result.w)?,
    }
    let last = result.trace.last();
    eprintln!(
        "iterations {} stop {:?} objective {} gap {}",
        result.iterations,
        result.stop_reason,
        last.map_or(f64::NAN, |r| r.objective),
        last.and_then(|r| r.gap).map_or("n/a".into(), |g| g.to_string()),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    graph: &Path,
    data: &Path,
    partition: &Path,
    lambda: f64,
    penalty: &str,
    weights: Option<&Path>,
    mode: Mode,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let g = load_graph(graph)?;
    let losses = load_losses(data, g.node_count())?;
    let p = load_partition(partition, g.node_count())?;
    let mode = match mode {
        Mode::Exhaustive => CheckMode::Exhaustive,
        Mode::Maxflow => CheckMode::MaxFlow,
    };
    let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    let mut clusters = Vec::new();
    for c in 0..p.cluster_count() {
        let cert = check_well_connected(&g, &p, c, &losses, lambda, None, mode)?;
        let verdict = match &cert.verdict {
            gtv::analysis::Verdict::WellConnected => json!({"verdict": "well_connected"}),
            gtv::analysis::Verdict::Violated { witness } => {
                json!({"verdict": "violated", "witness": one_based(witness)})
            }
        };
        clusters.push(json!({
            "cluster": c + 1,
            "members": one_based(p.cluster(c)),
            "hub": cert.hub + 1,
            "sigma": cert.sigma,
            "lipschitz": cert.lipschitz,
            "clustering_error": cert.clustering_error,
            "boundary": cert.boundary,
            "demands": cert.demands,
            "min_slack": cert.min_slack,
            "verdict": verdict,
        }));
    }
    let mut report = json!({ "lambda": lambda, "clusters": clusters });
    if let Some(path) = weights {
        let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let w = read_weights_csv(file)?;
        let bounds = verify_theorem_bound(&g, &p, &losses, lambda, &parse_penalty(penalty)?, &w)?;
        report["bounds"] = bounds
            .iter()
            .map(|b| {
                json!({
                    "cluster": b.cluster + 1,
                    "certified": b.certified,
                    "spread": b.spread,
                    "deviation": b.deviation,
                    "bound": b.bound,
                })
            })
            .collect();
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_text(out, &text)
}

fn experiment(
    name: &str,
    seed: Option<u64>,
    iters: Option<usize>,
    out: Option<&Path>,
    print_config: bool,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::resolve(name)?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(iters) = iters {
        cfg.iters = iters;
    }
    if print_config {
        return write_text(out, &(cfg.to_json() + "\n"));
    }
    let table = run_experiment(&cfg)?;
    let out = out.map(Path::to_path_buf).or(cfg.output.clone());
    table.write_csv(sink(out.as_deref())?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { experiment, seed, out } => generate(&experiment, seed, &out),
        Command::Solve {
            graph,
            data,
            penalty,
            lambda,
            iters,
            gap_tol,
            trace_every,
            trace,
            out,
        } => run_solve(
            &graph,
            &data,
            &penalty,
            lambda,
            iters,
            gap_tol,
            trace_every,
            trace.as_deref(),
            out.as_deref(),
        ),
        Command::Analyze {
            graph,
            data,
            partition,
            lambda,
            penalty,
            weights,
            mode,
            out,
        } => analyze(
            &graph,
            &data,
            &partition,
            lambda,
            &penalty,
            weights.as_deref(),
            mode,
            out.as_deref(),
        ),
        Command::Experiment {
            experiment: name,
            seed,
            iters,
            out,
            print_config,
        } => experiment(&name, seed, iters, out.as_deref(), print_config),
        Command::Plots { input, out } => {
            let file = File::open(&input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
            emit_plots_data(file, sink(out.as_deref())?)
        }
        Command::Presets => {
            let list = PRESETS.join("\n") + "\n";
            write_text(None, &list)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gtv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
