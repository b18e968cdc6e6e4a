use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use etpr::baselines::LoessConfig;
use etpr::fit::{fit, std_errors, StartRecord};
use etpr::predict::{credible_interval, influence_sweep, predict_y, IntervalMethod};
use etpr::sim::{figure_curves, run_experiment, shrinkage_fraction, ExperimentSettings, Method, SimScenario};
use etpr::{Dataset, FittedModel, Hyperparams, IntervalTarget, Matrix, ModelConfig, ModelKind};

mod table;

use table::{num, opt_num, read_dataset, read_inputs, write_rows};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "etpr", version, about = "Extended t-process regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV of covariates followed by a response column.
    Fit(FitArgs),
    /// Predict at new covariates from a saved model.
    Predict(PredictArgs),
    /// Run a named or inline-JSON simulation scenario.
    Simulate(SimulateArgs),
    /// Sweep one response by powers of ten and report score norms.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Etpr,
    Gpr,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Etpr => ModelKind::Etpr,
            KindArg::Gpr => ModelKind::Gpr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IntervalArg {
    Gaussian,
    Emtd,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "etpr")]
    kind: KindArg,
    #[arg(long, default_value_t = 1.05)]
    nu: f64,
    #[arg(long, default_value_t = 1e-8)]
    jitter: f64,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl ModelArgs {
    fn config(&self) -> anyhow::Result<ModelConfig<f64>> {
        let mut cfg = ModelConfig { kind: self.kind.into(), nu: self.nu, jitter: self.jitter, ..ModelConfig::default() };
        cfg.optimizer.seed = self.seed;
        if let Some(m) = self.max_iters {
            cfg.optimizer.max_iters = m;
        }
        cfg.validate()?;
        if !(self.jitter >= 0.0) {
            bail!("jitter must be non-negative");
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Covariate-only CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    interval: IntervalArg,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario name, or a JSON scenario object.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1.05)]
    nu: f64,
    #[arg(long, default_value_t = 0.75)]
    span: f64,
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, default_value_t = 0)]
    robust_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    jitter: f64,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    input: PathBuf,
    /// Sweep CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Row to scale; defaults to the largest |y|.
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, default_value_t = 1.05)]
    nu: f64,
    #[arg(long, default_value_t = 1e-8)]
    jitter: f64,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    max_k: i32,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn bad_input(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, err: err.into() }
}

fn fit_failed(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, err: err.into() }
}

type CmdResult = Result<(), Failure>;

#[derive(Serialize, Deserialize)]
struct TrainingData {
    columns: Vec<String>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    kind: ModelKind,
    nu: f64,
    jitter: f64,
    beta_hat: Hyperparams<f64>,
    s0: f64,
    s1: f64,
    loglik: f64,
    std_errors: Vec<Option<f64>>,
    converged: bool,
    iterations: usize,
    at_bound: Vec<bool>,
    gradient: Vec<f64>,
    starts: Vec<StartRecord<f64>>,
    training: TrainingData,
}

impl ModelFile {
    fn dataset(&self) -> anyhow::Result<Dataset<f64>> {
        let n = self.training.y.len();
        let p = self.beta_hat.dim();
        if self.training.x.len() != n || self.training.x.iter().any(|r| r.len() != p) {
            bail!("training data in model file is inconsistent with its parameters");
        }
        Ok(Dataset::new(Matrix::from_fn(n, p, |i, j| self.training.x[i][j]), self.training.y.clone())?)
    }

    fn config(&self) -> ModelConfig<f64> {
        ModelConfig { kind: self.kind, nu: self.nu, jitter: self.jitter, ..ModelConfig::default() }
    }
}

fn cmd_fit(args: &FitArgs) -> CmdResult {
    let cfg = args.model.config().map_err(bad_input)?;
    let (data, header) = read_dataset(&args.input).map_err(bad_input)?;
    if data.len() < 2 {
        return Err(bad_input(anyhow!("need at least 2 rows to fit")));
    }
    let model = fit(&data, &cfg).map_err(fit_failed)?;
    let se = std_errors(&model);
    let p = data.dim();
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        kind: model.kind,
        nu: model.nu,
        jitter: model.jitter,
        beta_hat: model.beta_hat.clone(),
        s0: model.s0,
        s1: model.s1,
        loglik: model.loglik,
        std_errors: se.clone(),
        converged: model.converged,
        iterations: model.iterations,
        at_bound: model.at_bound.clone(),
        gradient: model.gradient.clone(),
        starts: model.starts.clone(),
        training: TrainingData {
            columns: header.clone(),
            x: (0..data.len()).map(|i| data.x.row(i).to_vec()).collect(),
            y: data.y.clone(),
        },
    };
    let json = serde_json::to_string_pretty(&file).map_err(bad_input)?;
    fs::write(&args.output, json + "\n").with_context(|| format!("cannot write {}", args.output.display())).map_err(bad_input)?;

    let mut names = vec!["phi".to_string(), "theta0".to_string()];
    names.extend((1..=p).map(|l| format!("theta1_{l}")));
    names.extend((1..=p).map(|l| format!("theta2_{l}")));
    println!("model      {} (nu = {})", model.kind, model.nu);
    println!("data       {} rows, {} covariates, response '{}'", data.len(), p, header[p]);
    println!("loglik     {:.6}", model.loglik);
    println!("converged  {} after {} iterations", model.converged, model.iterations);
    println!("s0, s1     {:.6}, {:.6}", model.s0, model.s1);
    println!("{:<10} {:>14} {:>14}", "parameter", "estimate", "std.error");
    for ((name, v), s) in names.iter().zip(model.beta_hat.to_vec()).zip(&se) {
        let s = s.map_or("-".to_string(), |s| format!("{s:.6e}"));
        println!("{name:<10} {v:>14.6e} {s:>14}");
    }
    if model.boundary() {
        println!("warning: some estimates finished on the parameter box boundary");
    }
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text).with_context(|| format!("{}: not a model file", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!("unsupported model schema version {}", file.schema_version);
    }
    Ok(file)
}

fn cmd_predict(args: &PredictArgs) -> CmdResult {
    let file = load_model(&args.model).map_err(bad_input)?;
    let data = file.dataset().map_err(bad_input)?;
    let u = read_inputs(&args.input, data.dim()).map_err(bad_input)?;
    let model = FittedModel::at(file.beta_hat.clone(), &data, &file.config()).map_err(fit_failed)?;
    let preds = predict_y(&model, &data, &u).map_err(fit_failed)?;
    let method = match args.interval {
        IntervalArg::Gaussian => IntervalMethod::Gaussian,
        IntervalArg::Emtd => IntervalMethod::Emtd,
    };
    let mut header: Vec<String> = file.training.columns[..data.dim()].to_vec();
    header.extend(["mean", "var_f", "var_y", "lo", "hi"].map(String::from));
    let rows = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (lo, hi) = credible_interval(p, args.level, IntervalTarget::Y, method)?;
            let mut row: Vec<String> = u.row(i).iter().map(|&v| num(v)).collect();
            row.extend([p.mean, p.var_f, p.var_y, lo, hi].map(num));
            Ok(row)
        })
        .collect::<etpr::Result<Vec<_>>>()
        .map_err(bad_input)?;
    write_rows(&args.output, &header, &rows).map_err(bad_input)
}

fn resolve_scenario(spec: &str) -> anyhow::Result<SimScenario> {
    if spec.trim_start().starts_with('{') {
        let s: SimScenario = serde_json::from_str(spec).context("invalid scenario JSON")?;
        s.validate()?;
        Ok(s)
    } else {
        SimScenario::named(spec).map_err(|e| anyhow!("{e}; known scenarios: {}", SimScenario::names().join(", ")))
    }
}

#[derive(Serialize)]
struct SimSummary<'a> {
    schema_version: u32,
    scenario: &'a SimScenario,
    settings: &'a ExperimentSettings,
    reps: usize,
    failed_replicates: usize,
    methods: &'a [etpr::sim::MethodSummary],
    shrinkage_fraction_at_last_probe: Option<f64>,
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    if args.reps == 0 {
        return Err(bad_input(anyhow!("--reps must be at least 1")));
    }
    let scenario = resolve_scenario(&args.scenario).map_err(bad_input)?;
    let loess = LoessConfig { span: args.span, degree: args.degree, robust_iters: args.robust_iters };
    let mut settings = ExperimentSettings::new(&Method::ALL, args.reps, args.seed);
    settings.nu = args.nu;
    settings.loess = loess;
    settings.jitter = args.jitter;
    fs::create_dir_all(&args.output).with_context(|| format!("cannot create {}", args.output.display())).map_err(bad_input)?;
    let result = run_experiment(&scenario, &settings).map_err(bad_input)?;

    let n_probes = scenario.probes.len();
    let mut header: Vec<String> = ["rep", "stream", "method", "mse", "converged", "outlier_rows", "error"].map(String::from).to_vec();
    header.extend((0..n_probes).map(|j| format!("probe_{j}")));
    let mut rows = Vec::new();
    for r in &result.records {
        let outliers = r.outlier_rows.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        for m in &r.methods {
            let mut row = vec![
                r.rep.to_string(),
                r.stream.to_string(),
                m.method.to_string(),
                opt_num(m.mse),
                m.converged.to_string(),
                outliers.clone(),
                m.error.clone().unwrap_or_default(),
            ];
            row.extend((0..n_probes).map(|j| opt_num(m.probes.get(j).copied())));
            rows.push(row);
        }
    }
    write_rows(&args.output.join("replicates.csv"), &header, &rows).map_err(bad_input)?;

    let shrink = if n_probes > 0 { shrinkage_fraction(&result, n_probes - 1, 0.0) } else { None };
    let summary = SimSummary {
        schema_version: SCHEMA_VERSION,
        scenario: &scenario,
        settings: &settings,
        reps: result.reps,
        failed_replicates: result.failed_replicates(),
        methods: &result.summaries,
        shrinkage_fraction_at_last_probe: shrink,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(bad_input)?;
    fs::write(args.output.join("summary.json"), json + "\n").map_err(bad_input)?;

    if scenario.dim() == 1 && scenario.name.starts_with("fig1") {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.02).collect();
        let (_, curves) = figure_curves(&scenario, &settings, &grid).map_err(fit_failed)?;
        let header = ["method", "x", "mean", "lo", "hi", "approximate"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = curves
            .iter()
            .map(|c| vec![c.method.to_string(), num(c.x), num(c.mean), num(c.lo), num(c.hi), c.approximate.to_string()])
            .collect();
        write_rows(&args.output.join("curves.csv"), &header, &rows).map_err(bad_input)?;
    }

    println!("scenario {} ({} replicates, seed {})", scenario.name, result.reps, args.seed);
    println!("{:<6} {:>18}", "method", "MSE mean(sd)");
    for s in &result.summaries {
        println!("{:<6} {:>9.3}({:.3})  failed {}  unconverged {}", s.method.to_string(), s.mean_mse, s.sd_mse, s.failed, s.unconverged);
    }
    if let Some(f) = shrink {
        println!("eTPR closer to 0 than GPR at the last probe in {:.1}% of replicates", 100.0 * f);
    }
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> CmdResult {
    let (data, _) = read_dataset(&args.input).map_err(bad_input)?;
    let index = match args.index {
        Some(i) if i >= data.len() => return Err(bad_input(anyhow!("--index {i} out of range for {} rows", data.len()))),
        Some(i) => i,
        None => (0..data.len()).max_by(|&a, &b| data.y[a].abs().total_cmp(&data.y[b].abs())).unwrap_or(0),
    };
    if args.max_k < 0 {
        return Err(bad_input(anyhow!("--max-k must be non-negative")));
    }
    let mut ct = ModelConfig::etpr().with_nu(args.nu);
    let mut cg = ModelConfig::gpr();
    for c in [&mut ct, &mut cg] {
        c.jitter = args.jitter;
        c.optimizer.seed = args.seed;
    }
    ct.validate().map_err(bad_input)?;
    let mt = fit(&data, &ct).map_err(fit_failed)?;
    let mg = fit(&data, &cg).map_err(fit_failed)?;
    let ks: Vec<i32> = (0..=args.max_k).collect();
    let u = data.x.row(index).to_vec();
    let rows = influence_sweep(&mt, &mg, &data, index, &ks, &u, 0.0).map_err(fit_failed)?;
    let header = ["k", "scale", "score_norm_etpr", "score_norm_gpr", "m_t", "m_g"].map(String::from).to_vec();
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.k.to_string(), num(r.scale), num(r.score_norm_etpr), num(r.score_norm_gpr), opt_num(r.m_t), opt_num(r.m_g)])
        .collect();
    write_rows(&args.output, &header, &out).map_err(bad_input)?;

    println!("scaled row {index} (y = {}) by 10^k, k = 0..{}", data.y[index], args.max_k);
    println!("{:>3} {:>14} {:>14} {:>12} {:>12}", "k", "|score| eTPR", "|score| GPR", "M_T", "M_G");
    for r in &rows {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
        println!("{:>3} {:>14.6e} {:>14.6e} {:>12} {:>12}", r.k, r.score_norm_etpr, r.score_norm_gpr, f(r.m_t), f(r.m_g));
    }
    if rows.len() > 3 {
        let (a, b) = (&rows[3], &rows[rows.len() - 1]);
        let rt = b.score_norm_etpr / a.score_norm_etpr;
        let rg = b.score_norm_gpr / a.score_norm_gpr;
        let plateau = (rt - 1.0).abs() < 0.1;
        println!("eTPR score ratio k={}/k=3: {rt:.4} ({})", b.k, if plateau { "plateaus" } else { "does not plateau" });
        println!("GPR score ratio k={}/k=3: {rg:.4e}", b.k);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
