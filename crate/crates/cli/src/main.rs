//! Command-line driver: simulation, fitting, radius selection, clustering,
//! evaluation, studies, and backtests. Exit codes: 0 success, 2 validation
//! error, 3 numerical failure.

mod config;
mod study;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use droclust::cluster::{ami, spectral_cluster, symmetrize, SimilarityMatrix};
use droclust::datamodel::{generate_block_model, standardize_with_ids, BlockModelConfig};
use droclust::delta::{select_delta, DeltaConfig};
use droclust::dro::{admm_fit, SolverOptions};
use droclust::error::Error;
use droclust::io;
use droclust::portfolio::{backtest, load_returns};

use config::{config_hash, provenance, BacktestCliConfig, StudyConfig};

#[derive(Parser)]
#[command(name = "droclust", version, about = "Robust nodewise-regression variable clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic panel from the multi-factor block model.
    Simulate(SimulateArgs),
    /// Fit the robust nodewise regression on a panel CSV.
    FitDro(FitArgs),
    /// Select the robustness radius from a panel CSV.
    SelectDelta(SelectDeltaArgs),
    /// Spectral-cluster a saved similarity matrix.
    Cluster(ClusterArgs),
    /// Score two partition files against each other (AMI).
    Evaluate(EvaluateArgs),
    /// Run a clustering comparison study over a parameter grid.
    SimStudy(StudyArgs),
    /// Backtest the cluster-driven minimum-variance portfolio.
    Backtest(BacktestArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Generator config JSON (BlockModelConfig schema).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output directory for panel.csv, partition.json, spec.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Panel CSV (header row, one observation per row). Standardized
    /// internally.
    #[arg(long)]
    input: PathBuf,
    /// Robustness radius; omit to select it from the data.
    #[arg(long)]
    delta: Option<f64>,
    /// Seed (required when the radius is selected from the data).
    #[arg(long)]
    seed: Option<u64>,
    /// Solver options JSON; defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Emit per-iteration residuals as trace.csv.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelectDeltaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Delta config JSON; flag overrides below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Similarity matrix CSV (square, symmetric, zero diagonal).
    #[arg(long)]
    similarity: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the plot-convention matrix (diagonal filled to 2.0) here,
    /// with a `.order.json` sidecar giving the cluster ordering.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    partition_a: PathBuf,
    #[arg(long)]
    partition_b: PathBuf,
    /// Optional JSON output; the score always prints to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Study config JSON (StudyConfig schema).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    /// Returns/prices CSV: date column plus one column per ticker.
    #[arg(long)]
    input: PathBuf,
    /// Backtest config JSON (BacktestCliConfig schema).
    #[arg(long)]
    config: PathBuf,
    /// Whether the CSV holds prices or simple returns; overrides the config.
    #[arg(long, value_parser = ["price", "return"])]
    input_kind: Option<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for validation problems, 3 for numerical failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SolverStalled(_)
        | Error::NumericalFailure(_)
        | Error::SingularCovariance
        | Error::InvalidUpsilon(_)
        | Error::InvalidCovariance(_) => 3,
        _ => 2,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::FitDro(args) => fit_dro(args),
        Command::SelectDelta(args) => select_delta_cmd(args),
        Command::Cluster(args) => cluster_cmd(args),
        Command::Evaluate(args) => evaluate(args),
        Command::SimStudy(args) => sim_study(args),
        Command::Backtest(args) => backtest_cmd(args),
    }
}

fn read_config<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let config: BlockModelConfig = read_config(&args.config)?;
    let hash = config_hash(&config);
    ensure_dir(&args.out_dir)?;
    let (panel, partition, spec) = generate_block_model(&config, args.seed)?;

    io::write_panel_csv_path(&panel, &args.out_dir.join("panel.csv"))?;
    let mut doc = io::PartitionDocument::new(&partition, Some(args.seed));
    doc.config_hash = Some(hash.clone());
    io::write_json(&doc, &args.out_dir.join("partition.json"))?;

    #[derive(Serialize)]
    struct SpecDocument<'a> {
        config_hash: &'a str,
        seed: u64,
        config: &'a BlockModelConfig,
        spec: &'a droclust::datamodel::BlockModelSpec,
    }
    io::write_json(
        &SpecDocument {
            config_hash: &hash,
            seed: args.seed,
            config: &config,
            spec: &spec,
        },
        &args.out_dir.join("spec.json"),
    )?;
    println!(
        "simulate: wrote panel.csv ({}x{}), partition.json, spec.json to {}",
        panel.n(),
        panel.d(),
        args.out_dir.display()
    );
    Ok(())
}

fn load_panel(path: &Path) -> Result<droclust::datamodel::StandardizedPanel, Error> {
    let (ids, raw) = io::read_matrix_csv_path(path)?;
    standardize_with_ids(&raw, ids)
}

fn fit_dro(args: FitArgs) -> Result<(), Error> {
    let opts: SolverOptions = match &args.config {
        Some(path) => read_config(path)?,
        None => SolverOptions::default(),
    };
    let panel = load_panel(&args.input)?;

    let (delta, delta_estimate, seed) = match (args.delta, args.seed) {
        (Some(delta), _) => (delta, None, args.seed.unwrap_or(0)),
        (None, Some(seed)) => {
            let est = select_delta(&panel, &DeltaConfig::default(), seed)?;
            (est.delta, Some(est), seed)
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "--seed is required when --delta is not given (the radius is selected from the data)".into(),
            ))
        }
    };

    #[derive(Serialize)]
    struct FitInputs<'a> {
        solver: &'a SolverOptions,
        delta: f64,
    }
    let hash = config_hash(&FitInputs {
        solver: &opts,
        delta,
    });

    let (coef, state) = admm_fit(&panel, delta, &opts)?;
    ensure_dir(&args.out_dir)?;
    io::write_matrix_csv_path(
        coef.values(),
        Some(&provenance(&hash, seed)),
        &args.out_dir.join("b.csv"),
    )?;
    let similarity = symmetrize(&coef);
    io::write_matrix_csv_path(
        similarity.values(),
        Some(&provenance(&hash, seed)),
        &args.out_dir.join("c.csv"),
    )?;

    #[derive(Serialize)]
    struct FitReport<'a> {
        config_hash: &'a str,
        seed: u64,
        delta: f64,
        delta_estimate: Option<droclust::delta::DeltaEstimate>,
        options: &'a SolverOptions,
        iterations: usize,
        converged: bool,
        primal_residuals: &'a [f64],
        dual_residuals: &'a [f64],
    }
    io::write_json(
        &FitReport {
            config_hash: &hash,
            seed,
            delta,
            delta_estimate,
            options: &opts,
            iterations: state.iteration,
            converged: state.converged,
            primal_residuals: &state.primal_residuals,
            dual_residuals: &state.dual_residuals,
        },
        &args.out_dir.join("fit.json"),
    )?;

    if args.trace {
        let mut wtr = csv::Writer::from_path(args.out_dir.join("trace.csv"))?;
        wtr.write_record(["iteration", "primal_residual", "dual_residual"])?;
        for (i, (p, d)) in state
            .primal_residuals
            .iter()
            .zip(&state.dual_residuals)
            .enumerate()
        {
            wtr.write_record([format!("{}", i + 1), format!("{p}"), format!("{d}")])?;
        }
        wtr.flush()?;
    }
    println!(
        "fit-dro: delta={delta:.6}, {} iterations, converged={}, wrote b.csv, c.csv, fit.json to {}",
        state.iteration,
        state.converged,
        args.out_dir.display()
    );
    Ok(())
}

fn select_delta_cmd(args: SelectDeltaArgs) -> Result<(), Error> {
    let mut config: DeltaConfig = match &args.config {
        Some(path) => read_config(path)?,
        None => DeltaConfig::default(),
    };
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if let Some(samples) = args.samples {
        config.samples = samples;
    }
    let hash = config_hash(&config);
    let panel = load_panel(&args.input)?;
    let estimate = select_delta(&panel, &config, args.seed)?;

    #[derive(Serialize)]
    struct DeltaReport<'a> {
        config_hash: &'a str,
        seed: u64,
        #[serde(flatten)]
        estimate: &'a droclust::delta::DeltaEstimate,
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    io::write_json(
        &DeltaReport {
            config_hash: &hash,
            seed: args.seed,
            estimate: &estimate,
        },
        &args.out,
    )?;
    println!("select-delta: delta={:.6} -> {}", estimate.delta, args.out.display());
    Ok(())
}

fn cluster_cmd(args: ClusterArgs) -> Result<(), Error> {
    let (_, values) = io::read_matrix_csv_path(&args.similarity)?;
    let similarity = SimilarityMatrix::new(values)?;
    #[derive(Serialize)]
    struct ClusterInputs<'a> {
        similarity: &'a Path,
        k: usize,
    }
    let hash = config_hash(&ClusterInputs {
        similarity: &args.similarity,
        k: args.k,
    });
    let partition = spectral_cluster(&similarity, args.k, args.seed)?;
    let mut doc = io::PartitionDocument::new(&partition, Some(args.seed));
    doc.config_hash = Some(hash.clone());
    io::write_json(&doc, &args.out)?;

    if let Some(heatmap) = &args.heatmap {
        io::write_matrix_csv_path(
            &similarity.plot_matrix(),
            Some(&provenance(&hash, args.seed)),
            heatmap,
        )?;
        // variables grouped by cluster label, original indices preserved
        let mut order: Vec<usize> = (0..partition.len()).collect();
        order.sort_by_key(|&i| (partition.assignment()[i], i));
        #[derive(Serialize)]
        struct HeatmapOrder<'a> {
            config_hash: &'a str,
            seed: u64,
            order: Vec<usize>,
            assignment: &'a [usize],
        }
        let sidecar = heatmap.with_extension("order.json");
        io::write_json(
            &HeatmapOrder {
                config_hash: &hash,
                seed: args.seed,
                order,
                assignment: partition.assignment(),
            },
            &sidecar,
        )?;
    }
    println!(
        "cluster: {} items into {} clusters -> {}",
        partition.len(),
        partition.k(),
        args.out.display()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let a: io::PartitionDocument = io::read_json(&args.partition_a)?;
    let b: io::PartitionDocument = io::read_json(&args.partition_b)?;
    let score = ami(&a.to_partition()?, &b.to_partition()?)?;
    println!("ami: {score:.6}");
    if let Some(out) = args.out {
        #[derive(Serialize)]
        struct AmiReport {
            ami: f64,
        }
        io::write_json(&AmiReport { ami: score }, &out)?;
    }
    Ok(())
}

fn sim_study(args: StudyArgs) -> Result<(), Error> {
    let config: StudyConfig = read_config(&args.config)?;
    let hash = config_hash(&config);
    ensure_dir(&args.out_dir)?;
    let (rows, summaries) = study::run_study(&config, args.seed)?;

    let results_path = args.out_dir.join("results.csv");
    {
        use std::io::Write;
        let mut file = std::fs::File::create(&results_path)?;
        writeln!(file, "# {}", provenance(&hash, args.seed))?;
        let mut wtr = csv::Writer::from_writer(file);
        wtr.write_record(["method", "grid_value", "trial", "ami", "error"])?;
        for row in &rows {
            wtr.write_record([
                row.method.to_string(),
                format!("{}", row.grid_value),
                format!("{}", row.trial),
                row.ami.map(|v| format!("{v}")).unwrap_or_default(),
                row.error.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
    }

    let summary_path = args.out_dir.join("summary.csv");
    {
        use std::io::Write;
        let mut file = std::fs::File::create(&summary_path)?;
        writeln!(file, "# {}", provenance(&hash, args.seed))?;
        let mut wtr = csv::Writer::from_writer(file);
        wtr.write_record(["method", "grid_value", "mean_ami", "trials_ok", "trials"])?;
        for s in &summaries {
            wtr.write_record([
                s.method.to_string(),
                format!("{}", s.grid_value),
                format!("{}", s.mean_ami),
                format!("{}", s.trials_ok),
                format!("{}", s.trials),
            ])?;
        }
        wtr.flush()?;
    }

    for s in &summaries {
        println!(
            "sim-study: {} @ {:>6}: mean AMI {:.3} ({}/{} trials)",
            s.method, s.grid_value, s.mean_ami, s.trials_ok, s.trials
        );
    }
    println!(
        "sim-study: wrote {} and {}",
        results_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn backtest_cmd(args: BacktestArgs) -> Result<(), Error> {
    let mut config: BacktestCliConfig = read_config(&args.config)?;
    if let Some(kind) = &args.input_kind {
        config.filters.input_kind = match kind.as_str() {
            "price" => droclust::portfolio::InputKind::Price,
            _ => droclust::portfolio::InputKind::Return,
        };
    }
    config.backtest.seed = args.seed;
    let hash = config_hash(&config);
    let panel = load_returns(&args.input, &config.filters)?;
    let (ledger, metrics) = backtest(&panel, &config.backtest)?;
    ensure_dir(&args.out_dir)?;

    let ledger_path = args.out_dir.join("ledger.csv");
    {
        use std::io::Write;
        let mut file = std::fs::File::create(&ledger_path)?;
        writeln!(file, "# {}", provenance(&hash, args.seed))?;
        let mut wtr = csv::Writer::from_writer(file);
        wtr.write_record(["date", "portfolio_return", "vami"])?;
        for ((date, ret), vami) in ledger.dates.iter().zip(&ledger.returns).zip(&ledger.vami) {
            wtr.write_record([date.to_string(), format!("{ret}"), format!("{vami}")])?;
        }
        wtr.flush()?;
    }

    #[derive(Serialize)]
    struct MetricsDocument<'a> {
        config_hash: &'a str,
        seed: u64,
        metrics: &'a droclust::portfolio::MetricsReport,
    }
    io::write_json(
        &MetricsDocument {
            config_hash: &hash,
            seed: args.seed,
            metrics: &metrics,
        },
        &args.out_dir.join("metrics.json"),
    )?;

    #[derive(Serialize)]
    struct RebalanceDocument<'a> {
        config_hash: &'a str,
        seed: u64,
        rebalances: &'a [droclust::portfolio::RebalanceRecord],
    }
    io::write_json(
        &RebalanceDocument {
            config_hash: &hash,
            seed: args.seed,
            rebalances: &ledger.rebalances,
        },
        &args.out_dir.join("rebalances.json"),
    )?;

    println!(
        "backtest: {} trading days, ending VAMI {:.1}, sharpe {}, wrote ledger.csv, metrics.json, rebalances.json to {}",
        ledger.returns.len(),
        ledger.ending_vami(),
        metrics
            .sharpe_ratio
            .map(|s| format!("{s:.2}"))
            .unwrap_or_else(|| "undefined".into()),
        args.out_dir.display()
    );
    Ok(())
}
