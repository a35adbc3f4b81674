//! Command-line front end for latentgp.

mod error;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latentgp::analysis::{nis, nrmse, sobol_indices, InputDomain};
use latentgp::bayesopt::{run_bo, AcquisitionKind, BOConfig, BenchmarkOracle, StopReason, TableOracle};
use latentgp::benchmarks::{BenchmarkProblem, NAMES};
use latentgp::calibration::{calibrate, CalibrationConfig};
use latentgp::config::{polynomial, BasisTerm, MeanSpec, NoiseSpec, SourceEmbedding};
use latentgp::gp::FitOptions;
use latentgp::kernel::{KernelFamily, MaternNu};
use latentgp::{CalibrationMode, Inputs, MfDataset, ModelConfig, ModelFile, OptimizerConfig, Surrogate};

use error::CliError;
use io::{RoleArgs, Roles};

#[derive(Parser)]
#[command(
    name = "latentgp",
    version,
    about = "Gaussian-process emulation, multi-fidelity fusion, calibration and Bayesian optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a dataset and save it
    Fit(FitArgs),
    /// Predict with a saved model
    Predict(PredictArgs),
    /// Accuracy of predictions against true responses
    Metrics(MetricsArgs),
    /// Estimate calibration parameters from fused data
    Calibrate(CalibrateArgs),
    /// Run cost-aware Bayesian optimization
    Bo(BoArgs),
    /// Sobol sensitivity indices of a model or benchmark
    Sobol(SobolArgs),
    /// Sample a benchmark problem
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Delimited dataset with a header row
    #[arg(long)]
    data: PathBuf,
    /// Response column
    #[arg(long, default_value = "y")]
    response: String,
    /// Data-source column (0 is high fidelity)
    #[arg(long)]
    source: Option<String>,
    /// Categorical columns and level counts, e.g. "grade:5,shape:3"
    #[arg(long)]
    qual_dict: Option<String>,
    /// Numeric columns (default: every column without another role)
    #[arg(long)]
    numeric: Option<String>,
}

#[derive(Args)]
struct ModelArgs {
    /// gaussian, power-exp:P, matern12, matern32 or matern52
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Dimension of each latent embedding
    #[arg(long, default_value_t = 2)]
    embedding_dim: usize,
    /// zero, constant, per-source, poly:DEGREE (zero high-fidelity mean) or nn:H1,H2
    #[arg(long, default_value = "constant")]
    mean: String,
    /// Optimizer restarts
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// One noise variance per data source
    #[arg(long)]
    multiple_noise: bool,
    /// Lower bound of the noise variance (standardized responses)
    #[arg(long, default_value = "1e-8")]
    lb_noise: f64,
    /// Fix the noise variance at --fixed-noise-val
    #[arg(long)]
    fix_noise: bool,
    /// Fixed noise variance (standardized responses)
    #[arg(long, default_value = "1e-5")]
    fixed_noise_val: f64,
    /// Probabilistic source embedding
    #[arg(long)]
    probabilistic: bool,
    /// Latent draws per training iteration (M)
    #[arg(long, default_value_t = 20)]
    train_draws: usize,
    /// Latent draws per prediction (Q)
    #[arg(long, default_value_t = 30)]
    predict_draws: usize,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for optimizer restarts (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Query rows with the model's input columns
    #[arg(long)]
    data: PathBuf,
    /// Add the estimated noise to the predictive variance
    #[arg(long)]
    include_noise: bool,
    /// Output table with mean and std columns
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Prediction table with mean and std columns
    #[arg(long)]
    pred: PathBuf,
    /// Table holding the true responses
    #[arg(long)]
    truth: PathBuf,
    /// Response column of the truth table
    #[arg(long, default_value = "y")]
    response: String,
    /// Miss level of the prediction intervals
    #[arg(long, default_value_t = 0.05)]
    level: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Calibration columns (empty on high-fidelity rows)
    #[arg(long)]
    calibration_ids: String,
    /// det or prob
    #[arg(long, default_value = "det")]
    mode: String,
    /// Prior means, one per calibration column (default: centred on the data)
    #[arg(long)]
    prior_mean: Option<String>,
    /// Prior standard deviations, one per calibration column
    #[arg(long)]
    prior_std: Option<String>,
    /// Sources that share the unknown calibration values
    #[arg(long, default_value = "0")]
    hf_sources: String,
    /// Model file to write
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoArgs {
    /// Benchmark problem
    #[arg(long)]
    problem: Option<String>,
    /// Table of candidate rows per source
    #[arg(long)]
    data_sources: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    qual_dict: Option<String>,
    /// Query cost per source (default: the problem's costs, else 1)
    #[arg(long)]
    costs: Option<String>,
    /// Maximum accumulated cost
    #[arg(long, default_value = "40000")]
    max_cost: f64,
    /// Iterations without high-fidelity improvement before stopping
    #[arg(long, default_value_t = 50)]
    stall: usize,
    /// Maximum number of iterations
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Initial rows per source (default: the problem's counts)
    #[arg(long)]
    init: Option<String>,
    /// Maximize instead of minimize
    #[arg(long)]
    maximize: bool,
    /// Single-fidelity optimization with expected improvement
    #[arg(long)]
    sfbo: bool,
    /// Candidates per source
    #[arg(long, default_value_t = 2000)]
    pool: usize,
    /// Optimizer restarts (each refit uses a quarter)
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Refit without the interval-score penalty
    #[arg(long)]
    no_interval_score: bool,
    /// Interval-score penalty scale
    #[arg(long, default_value_t = 0.08)]
    is_eps: f64,
    /// Add observation noise to benchmark queries
    #[arg(long)]
    noise: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-iteration history table
    #[arg(long)]
    out_history: Option<PathBuf>,
}

#[derive(Args)]
struct SobolArgs {
    /// Model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Benchmark problem (high-fidelity source)
    #[arg(long)]
    problem: Option<String>,
    /// Base sample size
    #[arg(long, default_value_t = 16384)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Problem name
    #[arg(long)]
    name: String,
    /// Source index (0 is high fidelity)
    #[arg(long, default_value_t = 0)]
    source: usize,
    /// Number of rows
    #[arg(long)]
    n: usize,
    /// Add the source's observation noise
    #[arg(long)]
    noise: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output table
    #[arg(long)]
    out: PathBuf,
}

fn parse_kernel(s: &str) -> Result<KernelFamily, CliError> {
    Ok(match s {
        "gaussian" => KernelFamily::Gaussian,
        "matern12" => KernelFamily::Matern(MaternNu::Half),
        "matern32" => KernelFamily::Matern(MaternNu::ThreeHalves),
        "matern52" => KernelFamily::Matern(MaternNu::FiveHalves),
        _ => match s.strip_prefix("power-exp:").map(str::parse::<f64>) {
            Some(Ok(p)) => KernelFamily::PowerExponential(p),
            _ => return Err(CliError::Usage(format!("unknown kernel '{s}'"))),
        },
    })
}

fn parse_mean(s: &str, dx: usize, sources: usize) -> Result<MeanSpec, CliError> {
    Ok(match s {
        "zero" => MeanSpec::Zero,
        "constant" => MeanSpec::SingleConstant,
        "per-source" => MeanSpec::PerSourceConstants,
        _ => {
            if let Some(d) = s.strip_prefix("poly:") {
                let deg: i32 = d.parse().map_err(|_| CliError::Usage(format!("invalid polynomial degree in '{s}'")))?;
                let mut lf = vec![BasisTerm::Constant];
                for col in 0..dx {
                    lf.extend(polynomial(col, deg).into_iter().skip(1));
                }
                let mut terms = vec![vec![]];
                terms.extend((1..sources).map(|_| lf.clone()));
                MeanSpec::PolynomialBases { terms }
            } else if let Some(h) = s.strip_prefix("nn:") {
                let hidden = h
                    .split(',')
                    .map(|v| v.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| CliError::Usage(format!("invalid hidden layer sizes in '{s}'")))?;
                MeanSpec::FeedForward { hidden }
            } else {
                return Err(CliError::Usage(format!("unknown mean '{s}'")));
            }
        }
    })
}

fn model_config(m: &ModelArgs, data: &MfDataset, roles: &Roles) -> Result<ModelConfig, CliError> {
    let sources = data.num_sources().max(1);
    let mut cfg = ModelConfig::multi_fidelity(sources).with_categorical(roles.levels())?;
    cfg.kernel = parse_kernel(&m.kernel)?;
    cfg.embedding_dim = m.embedding_dim;
    cfg.source_dim = m.embedding_dim;
    cfg.mean = parse_mean(&m.mean, data.inputs.dx(), sources)?;
    cfg.lb_noise = m.lb_noise;
    cfg.noise = if m.fix_noise {
        NoiseSpec::Fixed(m.fixed_noise_val)
    } else if m.multiple_noise {
        NoiseSpec::PerSource
    } else {
        NoiseSpec::Single
    };
    if m.probabilistic {
        if let SourceEmbedding::Probabilistic { hidden, .. } = SourceEmbedding::probabilistic() {
            cfg.source_embedding =
                SourceEmbedding::Probabilistic { hidden, train_draws: m.train_draws, predict_draws: m.predict_draws };
        }
    }
    Ok(cfg)
}

fn optimizer(restarts: usize, jobs: Option<usize>) -> OptimizerConfig {
    OptimizerConfig { n_jobs: jobs, ..OptimizerConfig::with_restarts(restarts) }
}

fn role_args(d: &DataArgs, calibration: Vec<String>) -> RoleArgs {
    RoleArgs {
        response: d.response.clone(),
        source: d.source.clone(),
        qual_dict: d.qual_dict.clone(),
        calibration,
        numeric: d.numeric.as_deref().map(io::parse_names),
    }
}

fn report(model: &Surrogate) {
    println!("loss {}", model.loss());
    let s2 = model.standardization().y_std.powi(2);
    for (j, n) in model.estimates().noise.iter().enumerate() {
        println!("noise[{j}] {}", n * s2);
    }
    if let Some(c) = model.mean_coefficients() {
        for (j, v) in c.iter().enumerate() {
            let coefs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            println!("mean[{j}] {}", coefs.join(" "));
        }
    }
}

fn save(model: &Surrogate, roles: &Roles, path: &Path) -> Result<(), CliError> {
    ModelFile::from_surrogate(model, &roles.tagged()).save(path)?;
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let (data, roles) = io::read_dataset(&a.data.data, &role_args(&a.data, vec![]))?;
    let cfg = model_config(&a.model, &data, &roles)?;
    let model =
        Surrogate::fit(&cfg, &data, &optimizer(a.model.restarts, a.model.jobs), a.model.seed, &FitOptions::default())?;
    report(&model);
    save(&model, &roles, &a.out)
}

fn cmd_predict(a: PredictArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&a.model)?;
    let roles = Roles::from_tagged(&file.fingerprint.columns)?;
    let data = io::read_with_roles(&a.data, &roles, false).map_err(|e| match e {
        CliError::Usage(m) => CliError::Data(format!("dataset does not match the model: {m}")),
        other => other,
    })?;
    let model = file.to_surrogate()?;
    let p = model.predict(&data.inputs, a.include_noise)?;
    io::write_predictions(&a.out, &p.mean, &p.std())
}

fn cmd_metrics(a: MetricsArgs) -> Result<(), CliError> {
    let pred = io::read_columns(&a.pred, &["mean", "std"])?;
    let truth = io::read_columns(&a.truth, &[a.response.as_str()])?;
    if pred[0].len() != truth[0].len() {
        return Err(CliError::Data(format!("{} predictions for {} responses", pred[0].len(), truth[0].len())));
    }
    println!("nrmse {}", nrmse(&truth[0], &pred[0])?);
    println!("nis {}", nis(&truth[0], &pred[0], &pred[1], a.level)?);
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let ids = io::parse_names(&a.calibration_ids);
    if ids.is_empty() {
        return Err(CliError::Usage("no calibration columns given".into()));
    }
    let (data, roles) = io::read_dataset(&a.data.data, &role_args(&a.data, ids.clone()))?;
    let mode = match a.mode.as_str() {
        "det" => CalibrationMode::Deterministic,
        "prob" => CalibrationMode::Probabilistic,
        m => return Err(CliError::Usage(format!("unknown calibration mode '{m}' (det or prob)"))),
    };
    let hf_sources = a
        .hf_sources
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("invalid source '{v}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    if !data.inputs.s.iter().any(|s| hf_sources.contains(s)) {
        return Err(CliError::Usage("the dataset has no high-fidelity rows".into()));
    }
    let prior = match (&a.prior_mean, &a.prior_std) {
        (Some(m), Some(s)) => {
            let (m, s) = (io::parse_list(m, "prior mean")?, io::parse_list(s, "prior std")?);
            if m.len() != ids.len() || s.len() != ids.len() {
                return Err(CliError::Usage("one prior mean and std per calibration column are required".into()));
            }
            Some(m.into_iter().zip(s).collect())
        }
        (None, None) => None,
        _ => return Err(CliError::Usage("--prior-mean and --prior-std go together".into())),
    };
    let cfg = model_config(&a.model, &data, &roles)?;
    let cal = CalibrationConfig { mode, prior, hf_sources };
    let res = calibrate(&cfg, &cal, &data, &optimizer(a.model.restarts, a.model.jobs), a.model.seed)?;
    for (k, name) in ids.iter().enumerate() {
        match &res.posterior {
            Some(p) => println!("{name} {} std {}", res.estimate[k], p.std[k]),
            None => println!("{name} {}", res.estimate[k]),
        }
    }
    if let Some(out) = &a.out {
        save(&res.model, &roles, out)?;
    }
    Ok(())
}

fn parse_counts(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("invalid count '{v}'"))))
        .collect()
}

fn unknown_problem(name: &str) -> CliError {
    CliError::Usage(format!("unknown benchmark '{name}'; valid names: {}", NAMES.join(", ")))
}

fn cmd_bo(a: BoArgs) -> Result<(), CliError> {
    let mut cfg = BOConfig {
        max_cost: a.max_cost,
        stall_limit: a.stall,
        maximize: a.maximize,
        pool_size: a.pool,
        interval_score: !a.no_interval_score,
        optimizer: optimizer(a.restarts, a.jobs),
        max_iterations: a.max_iterations,
        ..BOConfig::default()
    };
    cfg.penalty.eps = a.is_eps;
    if a.sfbo {
        cfg.acquisition = AcquisitionKind::ExpectedImprovement;
    }
    let explicit_costs = a.costs.as_deref().map(|c| io::parse_list(c, "cost")).transpose()?;
    let explicit_init = a.init.as_deref().map(parse_counts).transpose()?;
    let (state, names) = match (&a.problem, &a.data_sources) {
        (Some(name), None) => {
            let problem = BenchmarkProblem::by_name(name, a.seed).ok_or_else(|| unknown_problem(name))?;
            if problem.calibration.is_some() {
                return Err(CliError::Usage(format!("'{name}' is a calibration problem")));
            }
            let sources = if a.sfbo { 1 } else { problem.num_sources() };
            let costs = match explicit_costs {
                Some(c) => c,
                None => problem.costs().unwrap_or_else(|| vec![1.0; problem.num_sources()])[..sources].to_vec(),
            };
            if costs.len() != sources {
                return Err(CliError::Usage(format!("{} costs given for {sources} sources", costs.len())));
            }
            let counts = explicit_init.unwrap_or_else(|| problem.initial_counts()[..sources].to_vec());
            if counts.len() != sources {
                return Err(CliError::Usage(format!("{} initial counts given for {sources} sources", counts.len())));
            }
            let mut full = vec![0; problem.num_sources()];
            full[..sources].copy_from_slice(&counts);
            let init = problem.sample_sources(&full, a.seed, a.noise)?;
            cfg.costs = costs;
            cfg.model = ModelConfig::multi_fidelity(sources).with_categorical(problem.levels())?;
            let mut names = problem.variables.clone();
            names.extend(problem.categorical.iter().map(|c| c.name.clone()));
            let mut oracle = BenchmarkOracle::new(problem, a.noise, a.seed.wrapping_add(1));
            (run_bo(&mut oracle, init, &cfg, a.seed)?, names)
        }
        (None, Some(path)) => {
            let args = RoleArgs {
                response: a.response.clone(),
                source: a.source.clone(),
                qual_dict: a.qual_dict.clone(),
                calibration: vec![],
                numeric: None,
            };
            let (table, roles) = io::read_dataset(path, &args)?;
            let available = table.num_sources();
            let sources = if a.sfbo { 1 } else { available };
            let costs = explicit_costs.unwrap_or_else(|| vec![1.0; sources]);
            if costs.len() != sources {
                return Err(CliError::Usage(format!("{} costs given for {sources} sources", costs.len())));
            }
            let counts = explicit_init.unwrap_or_else(|| vec![2; sources]);
            if counts.len() != sources {
                return Err(CliError::Usage(format!("{} initial counts given for {sources} sources", counts.len())));
            }
            let mut oracle = TableOracle::new(table)?;
            let init = oracle.initial(&counts)?;
            cfg.costs = costs;
            cfg.model = ModelConfig::multi_fidelity(sources).with_categorical(roles.levels())?;
            let mut names = roles.numeric.clone();
            names.extend(roles.categorical.iter().map(|c| c.0.clone()));
            (run_bo(&mut oracle, init, &cfg, a.seed)?, names)
        }
        _ => return Err(CliError::Usage("give exactly one of --problem and --data-sources".into())),
    };
    if let Some(path) = &a.out_history {
        let mut w = io::writer(path)?;
        let mut header = vec!["iteration".to_string(), "source".into()];
        header.extend(names.iter().cloned());
        header.extend(["y", "incumbent", "cost", "acquisition"].map(String::from));
        io::write_row(&mut w, &header, path)?;
        for r in &state.log {
            let mut row = vec![r.iteration.to_string(), r.source.to_string()];
            row.extend(r.x.iter().map(|v| v.to_string()));
            row.extend(r.t.iter().map(|v| v.to_string()));
            row.push(r.y.to_string());
            row.push(r.incumbent.map_or(String::new(), |v| v.to_string()));
            row.push(r.cost.to_string());
            row.push(r.acquisition.to_string());
            io::write_row(&mut w, &row, path)?;
        }
        io::flush(w, path)?;
    }
    println!("iterations {}", state.log.len());
    println!("cost {}", state.cost);
    if let Some(best) = state.incumbents[0] {
        println!("incumbent {best}");
    }
    println!("stop {:?}", state.stop);
    match state.stop {
        StopReason::QueryFailed(m) => Err(CliError::Data(m)),
        StopReason::ModelFailed(m) => Err(CliError::Numerical(m)),
        _ => Ok(()),
    }
}

fn cmd_sobol(a: SobolArgs) -> Result<(), CliError> {
    let report = match (&a.model, &a.problem) {
        (Some(path), None) => {
            let file = ModelFile::load(path)?;
            let roles = Roles::from_tagged(&file.fingerprint.columns)?;
            let model = file.to_surrogate()?;
            let data = model.data();
            let ranges = (0..data.inputs.dx())
                .map(|k| {
                    data.inputs
                        .x
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[k]), hi.max(r[k])))
                })
                .collect();
            let mut names = roles.numeric.clone();
            names.extend(roles.categorical.iter().map(|c| c.0.clone()));
            let domain = InputDomain { names, ranges, levels: roles.levels() };
            sobol_indices(|q: &Inputs| Ok(model.predict(q, false)?.mean), &domain, a.n, a.seed)?
        }
        (None, Some(name)) => {
            let problem = BenchmarkProblem::by_name(name, a.seed).ok_or_else(|| unknown_problem(name))?;
            let mut names = problem.variables.clone();
            names.extend(problem.categorical.iter().map(|c| c.name.clone()));
            let domain = InputDomain { names, ranges: problem.ranges.clone(), levels: problem.levels() };
            let f = |q: &Inputs| (0..q.len()).map(|i| problem.evaluate(0, &q.x[i], &q.t[i], None)).collect();
            sobol_indices(f, &domain, a.n, a.seed)?
        }
        _ => return Err(CliError::Usage("give exactly one of --model and --problem".into())),
    };
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<(), CliError> {
    let problem = BenchmarkProblem::by_name(&a.name, a.seed).ok_or_else(|| unknown_problem(&a.name))?;
    if a.source >= problem.num_sources() {
        return Err(CliError::Usage(format!("'{}' has {} sources", a.name, problem.num_sources())));
    }
    if a.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let data = problem.sample(a.source, a.n, a.seed, a.noise)?;
    let roles = Roles {
        numeric: problem.variables.clone(),
        categorical: problem.categorical.iter().map(|c| (c.name.clone(), c.values.len())).collect(),
        source: Some("source".into()),
        calibration: problem.calibration.as_ref().map(|c| c.names.clone()).unwrap_or_default(),
        response: "y".into(),
    };
    io::write_dataset(&a.out, &data, &roles)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Bo(a) => cmd_bo(a),
        Command::Sobol(a) => cmd_sobol(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
