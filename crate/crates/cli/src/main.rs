//! netab: simulate A/B tests on social graphs, fit treatment-effect
//! estimators, and compare their error against theoretical floors.
//!
//! Subcommands compose through one interchange format, the response CSV
//! (node_id, z, g, y): `simulate` writes it, `estimate` and `bounds` read
//! it, `study` runs the whole replication pipeline from a config file and
//! `report` re-renders a saved study.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netab_core::bounds::{
    crlb_linear, crlb_logit, crlb_probit, crlb_tau, fim_logit, fim_probit, mse_tau_closed,
    mse_taubin_closed, BoundResult,
};
use netab_core::estimators::{
    apply_estimator, build_design_linear, build_design_tau, classify_exposure, EstimationResult,
};
use netab_core::experiment::{assign_treatment, GraphSource};
use netab_core::graph::{treated_fraction, Separator};
use netab_core::models::{generate_with_exposure, true_ate, ModelParams};
use netab_core::report::{
    from_json, read_response_csv, to_csv, to_json, to_markdown, write_response_csv,
};
use netab_core::{
    run_study, Error as CoreError, EstimatorKind, ExperimentConfig, ModelKind, DEFAULT_SEED,
};

#[derive(Parser)]
#[command(
    name = "netab",
    version,
    about = "A/B tests on graphs: spillover-aware simulation, estimation and error analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one randomized assignment, generate responses, write them as CSV
    Simulate(SimulateArgs),
    /// Fit a single estimator to a response file
    Estimate(EstimateArgs),
    /// Print variance bounds and closed-form error references for a design
    Bounds(BoundsArgs),
    /// Run a replicated estimator comparison from a config file
    Study(StudyArgs),
    /// Re-render a saved study report into another format
    Report(ReportArgs),
}

/// Graph input shared by the subcommands that need one: either an edge
/// list on disk or a generated Erdos-Renyi graph.
#[derive(Args)]
struct GraphArgs {
    /// Edge list file; comma or whitespace separated, '#' starts a comment
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,

    /// Generate an Erdos-Renyi graph with this many nodes instead
    #[arg(long, value_name = "N", conflicts_with = "graph")]
    nodes: Option<usize>,

    /// Mean degree of the generated graph
    #[arg(long, value_name = "DEG", default_value_t = 8.0)]
    mean_degree: f64,
}

impl GraphArgs {
    fn source(&self) -> Result<GraphSource, Failure> {
        match (&self.graph, self.nodes) {
            (Some(path), None) => Ok(GraphSource::File {
                path: path.clone(),
                separator: Separator::Auto,
            }),
            (None, Some(nodes)) => Ok(GraphSource::ErdosRenyi {
                nodes,
                mean_degree: self.mean_degree,
            }),
            (None, None) => Err(fail(3, "give either --graph FILE or --nodes N")),
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphArgs,

    /// Response model generating the outcomes
    #[arg(long, value_enum)]
    model: ModelArg,

    /// Coefficients as "b0,b1,b2": baseline, treatment, spillover
    #[arg(long, value_parser = parse_beta, default_value = "0,1,1")]
    beta: [f64; 3],

    /// Noise scale (ignored by the logistic model)
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// Saturation threshold for the tau-exposure models
    #[arg(long, default_value_t = 0.85)]
    tau: f64,

    /// Marginal probability that a node is treated
    #[arg(long, value_name = "P", default_value_t = 0.5)]
    treatment_probability: f64,

    /// Master seed; falls back to NETAB_SEED, then a fixed default
    #[arg(long)]
    seed: Option<u64>,

    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Response CSV produced by `netab simulate`
    input: PathBuf,

    /// Estimator to fit
    #[arg(long, value_enum)]
    estimator: EstimatorArg,

    /// Saturation threshold for the tau-aware estimators
    #[arg(long, default_value_t = 0.85)]
    tau: f64,

    /// Print the full result as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Response CSV carrying the design (the y column is ignored)
    input: PathBuf,

    /// Model whose bound to evaluate
    #[arg(long, value_enum)]
    model: ModelArg,

    /// Coefficients the bound is evaluated at, as "b0,b1,b2"
    #[arg(long, value_parser = parse_beta, default_value = "0,1,1")]
    beta: [f64; 3],

    /// Noise scale
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// Saturation threshold
    #[arg(long, default_value_t = 0.85)]
    tau: f64,

    /// Print as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration (TOML)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,

    /// Override the number of replications
    #[arg(long, value_name = "R")]
    reps: Option<usize>,

    /// Override the noise scale
    #[arg(long)]
    sigma: Option<f64>,

    /// Override the saturation threshold
    #[arg(long)]
    tau: Option<f64>,

    /// Override the significance level used for the table stars
    #[arg(long)]
    alpha: Option<f64>,

    /// Master seed; beats the config value and NETAB_SEED
    #[arg(long)]
    seed: Option<u64>,

    /// Cap the worker threads (default: one per core)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Directory for report.json, report.csv and report.md
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Study report JSON written by `netab study`
    input: PathBuf,

    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
    format: FormatArg,

    /// Write here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Probit,
    Logistic,
    TauExposure,
    TauExposureBinary,
}

impl From<ModelArg> for ModelKind {
    fn from(arg: ModelArg) -> ModelKind {
        match arg {
            ModelArg::Linear => ModelKind::Linear,
            ModelArg::Probit => ModelKind::Probit,
            ModelArg::Logistic => ModelKind::Logistic,
            ModelArg::TauExposure => ModelKind::TauExposure,
            ModelArg::TauExposureBinary => ModelKind::TauExposureBinary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Sutva,
    TauDim,
    LinearOls,
    TauOls,
    ProbitMle,
    LogitMle,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(arg: EstimatorArg) -> EstimatorKind {
        match arg {
            EstimatorArg::Sutva => EstimatorKind::Sutva,
            EstimatorArg::TauDim => EstimatorKind::TauDim,
            EstimatorArg::LinearOls => EstimatorKind::LinearOls,
            EstimatorArg::TauOls => EstimatorKind::TauOls,
            EstimatorArg::ProbitMle => EstimatorKind::ProbitMle,
            EstimatorArg::LogitMle => EstimatorKind::LogitMle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
    Json,
}

fn parse_beta(text: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {text:?}"));
    }
    let mut beta = [0.0; 3];
    for (slot, part) in beta.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| format!("not a number: {part:?}"))?;
    }
    Ok(beta)
}

/// Failure carrying the process exit code: 1 estimator failure, 2 broken
/// or unreadable input, 3 invalid configuration.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Failure {
        let code = match &err {
            CoreError::SingularDesign { .. }
            | CoreError::SingularInformation { .. }
            | CoreError::EmptyExposureClass { .. }
            | CoreError::EmptyArm { .. }
            | CoreError::DegenerateResponse
            | CoreError::NonBinaryResponse { .. }
            | CoreError::InsufficientData { .. }
            | CoreError::AsymmetricCovariance => 1,
            CoreError::EdgeListParse { .. }
            | CoreError::EmptyEdgeList
            | CoreError::ResponseCsv { .. }
            | CoreError::LengthMismatch { .. }
            | CoreError::Io(_)
            | CoreError::Json(_) => 2,
            CoreError::InvalidParameter { .. } | CoreError::Config(_) => 3,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    // Rust installs a SIGPIPE handler that turns a closed consumer
    // (`netab report big.json | head`) into a panic with a backtrace.
    // Restore the default so we die quietly like the rest of the pipeline.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("netab: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Study(args) => cmd_study(args),
        Command::Report(args) => cmd_report(args),
    }
}

/// Seed precedence: explicit flag, then the config file, then the
/// NETAB_SEED environment variable, then the fixed default.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, Failure> {
    if let Some(seed) = flag.or(config) {
        return Ok(seed);
    }
    match std::env::var("NETAB_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| fail(3, format!("NETAB_SEED must be an unsigned integer, got {text:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(err) => Err(fail(3, format!("NETAB_SEED: {err}"))),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|err| fail(2, format!("{}: {err}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|err| fail(2, format!("{}: {err}", path.display())))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let seed = resolve_seed(args.seed, None)?;
    let model: ModelKind = args.model.into();
    let params = ModelParams::new(args.beta)
        .with_sigma(args.sigma)
        .with_tau(args.tau);
    params.validate()?;
    let p = args.treatment_probability;
    if !(p.is_finite() && p > 0.0 && p < 1.0) {
        return Err(fail(3, format!("treatment probability must lie in (0, 1), got {p}")));
    }
    for warning in params.realism_warnings() {
        eprintln!("netab: warning: {warning}");
    }

    let (graph, label) = args.graph.source()?.load(seed)?;
    // The graph substream is derived from the seed inside load(), so the
    // plain seed is free for the assignment and noise draws.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = assign_treatment(graph.n_nodes(), p, &mut rng);
    let g = treated_fraction(&graph, &z)?;
    let y = generate_with_exposure(model, &params, &z, &g, &mut rng)?;

    let mut buffer = Vec::new();
    write_response_csv(&mut buffer, &z, &g, y.values())?;

    let ate = true_ate(model, &params);
    match &args.out {
        Some(path) => {
            write_file(path, &buffer)?;
            println!("graph: {label} ({} nodes, {} edges)", graph.n_nodes(), graph.n_edges());
            println!("treated: {} of {}", z.treated_count(), z.len());
            println!("true ATE: {ate}");
        }
        None => {
            std::io::stdout()
                .write_all(&buffer)
                .map_err(|err| fail(2, format!("stdout: {err}")))?;
            eprintln!("true ATE: {ate}");
        }
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Failure> {
    let (z, g, y) = read_response_csv(&read_file(&args.input)?)?;
    let kind: EstimatorKind = args.estimator.into();
    let result = apply_estimator(kind, &z, &g, &y, args.tau)?;
    if args.json {
        let text = serde_json::to_string_pretty(&result)
            .map_err(|err| fail(2, format!("serializing result: {err}")))?;
        println!("{text}");
    } else {
        print_estimate(&result);
    }
    Ok(())
}

fn print_estimate(result: &EstimationResult) {
    println!("estimator: {}", result.estimator.label());
    println!("ate_hat: {}", result.ate_hat);
    if let Some(beta) = result.beta_hat {
        println!("beta_hat: {}, {}, {}", beta[0], beta[1], beta[2]);
    }
    if let Some(sigma2) = result.sigma2_hat {
        println!("sigma2_hat: {sigma2}");
    }
    println!(
        "converged: {} ({} iterations)",
        result.converged, result.iterations
    );
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    let (z, g, _) = read_response_csv(&read_file(&args.input)?)?;
    let model: ModelKind = args.model.into();
    let params = ModelParams::new(args.beta)
        .with_sigma(args.sigma)
        .with_tau(args.tau);
    params.validate()?;

    let mut json = serde_json::Map::new();
    json.insert("model".into(), serde_json::json!(model.label()));
    json.insert("n_nodes".into(), serde_json::json!(z.len()));
    let mut lines = vec![format!("model: {} ({} nodes)", model.label(), z.len())];

    fn push_bound(
        name: &str,
        bound: &BoundResult,
        json: &mut serde_json::Map<String, serde_json::Value>,
        lines: &mut Vec<String>,
    ) {
        let note = if bound.asymptotic { "asymptotic" } else { "exact" };
        lines.push(format!("{name}: {} ({note})", bound.crlb));
        lines.push(format!(
            "{name} gradient: {}, {}, {}",
            bound.gradient[0], bound.gradient[1], bound.gradient[2]
        ));
        json.insert(name.replace(' ', "_"), serde_json::json!(bound));
    }

    match model {
        ModelKind::Linear => {
            let x = build_design_linear(&z, &g)?;
            let bound = crlb_linear(&x, args.sigma)?;
            push_bound("crlb", &bound, &mut json, &mut lines);
        }
        ModelKind::Probit => {
            let x = build_design_linear(&z, &g)?;
            let bound = crlb_probit(&fim_probit(&x, &args.beta, params), &args.beta)?;
            push_bound("crlb", &bound, &mut json, &mut lines);
        }
        ModelKind::Logistic => {
            let x = build_design_linear(&z, &g)?;
            let bound = crlb_logit(&fim_logit(&x, &args.beta, params), &args.beta)?;
            push_bound("crlb", &bound, &mut json, &mut lines);
        }
        ModelKind::TauExposure => {
            let x = build_design_tau(&z, &g, args.tau)?;
            let bounds = crlb_tau(&x, args.sigma)?;
            push_bound("crlb treatment only", &bounds.treatment_only, &mut json, &mut lines);
            push_bound("crlb full effect", &bounds.full_effect, &mut json, &mut lines);
            let sizes = classify_exposure(&z, &g, args.tau)?.sizes();
            let closed = mse_tau_closed(&sizes, args.sigma)?;
            lines.push(format!("diff-in-means mse (closed form): {closed}"));
            json.insert("diff_in_means_mse".into(), serde_json::json!(closed));
        }
        ModelKind::TauExposureBinary => {
            let sizes = classify_exposure(&z, &g, args.tau)?.sizes();
            let closed = mse_taubin_closed(&sizes, &params)?;
            lines.push(format!("diff-in-means mse (closed form): {closed}"));
            json.insert("diff_in_means_mse".into(), serde_json::json!(closed));
        }
    }

    if args.json {
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(json))
            .map_err(|err| fail(2, format!("serializing bounds: {err}")))?;
        println!("{text}");
    } else {
        for line in lines {
            println!("{line}");
        }
    }
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Result<(), Failure> {
    let text = read_file(&args.config)?;
    // Overrides are applied after this first validation pass, but run_study
    // validates again, so an out-of-range flag value is still rejected.
    let mut config = ExperimentConfig::from_toml_str(&text)?;

    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(sigma) = args.sigma {
        config.sigma = sigma;
    }
    if let Some(tau) = args.tau {
        config.tau = tau;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    config.seed = Some(resolve_seed(args.seed, config.seed)?);

    let report = match args.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|err| fail(3, format!("thread pool: {err}")))?;
            pool.install(|| run_study(&config))?
        }
        None => run_study(&config)?,
    };

    fs::create_dir_all(&args.out)
        .map_err(|err| fail(2, format!("{}: {err}", args.out.display())))?;
    let markdown = to_markdown(&report);
    write_file(&args.out.join("report.json"), to_json(&report)?.as_bytes())?;
    write_file(&args.out.join("report.csv"), to_csv(&report).as_bytes())?;
    write_file(&args.out.join("report.md"), markdown.as_bytes())?;

    print!("{markdown}");
    eprintln!(
        "netab: wrote report.json, report.csv, report.md under {}",
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let report = from_json(&read_file(&args.input)?)?;
    let rendered = match args.format {
        FormatArg::Markdown => to_markdown(&report),
        FormatArg::Csv => to_csv(&report),
        FormatArg::Json => to_json(&report)?,
    };
    match &args.out {
        Some(path) => write_file(path, rendered.as_bytes())?,
        None => print!("{rendered}"),
    }
    Ok(())
}
