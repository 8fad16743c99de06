//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.
//! Every command echoes its resolved configuration as JSON on stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::consistency::{self, check_landscape};
use crate::datagen::{generate, Design, LogitBaseline, SimSpec};
use crate::error::{Result, VdaError};
use crate::io::{read_csv, read_csv_from, write_csv_file, Dataset, LabelColumn};
use crate::loss::Polynomial;
use crate::model::{confusion_matrix, error_rate, train_detailed, TrainOptions, VdaModel};
use crate::penalty::PenaltyConfig;
use crate::tuning::{cross_validate, default_grid, stability_select, Grid, DEFAULT_SUBSAMPLES};

#[derive(Debug, Parser)]
#[command(name = "vda", version, about = "Penalized vertex discriminant analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a simulated dataset.
    Simulate(SimulateArgs),
    /// Fit a model and save it as JSON.
    Fit(FitArgs),
    /// Classify rows with a saved model.
    Predict(PredictArgs),
    /// Choose penalties by stratified cross-validation.
    Cv(CvArgs),
    /// Selection frequencies over random half-samples.
    Stability(StabilityArgs),
    /// Minimize the population risk and check the Bayes rule.
    Consistency(ConsistencyArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    design: Design,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Class separation (example 1).
    #[arg(long)]
    d: Option<f64>,
    /// Predictor correlation (examples 5 and 6).
    #[arg(long)]
    rho: Option<f64>,
    /// First logit coefficient convention (examples 3 and 5): one or zero.
    #[arg(long)]
    logit_baseline: Option<LogitBaseline>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label column name; the last column by default.
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "quartic")]
    polynomial: Polynomial,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 30)]
    max_halvings: usize,
    /// Fit on the raw predictor scale.
    #[arg(long)]
    no_standardize: bool,
}

impl TrainArgs {
    fn options(&self, penalties: PenaltyConfig) -> TrainOptions {
        TrainOptions {
            epsilon: self.epsilon,
            delta: self.delta,
            polynomial: self.polynomial,
            penalties,
            max_sweeps: self.max_sweeps,
            tol: self.tol,
            max_halvings: self.max_halvings,
            standardize: !self.no_standardize,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.0)]
    lambda_l: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_e: f64,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature file; a trailing label column is detected automatically.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Comma-separated lambda_L values; log-spaced from lambda_max by default.
    #[arg(long, value_delimiter = ',')]
    lambda_l_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda_e_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    train: TrainArgs,
    /// Per-cell errors as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_SUBSAMPLES)]
    subsamples: usize,
    #[arg(long, default_value_t = 0.9)]
    pi: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// One probability vector; otherwise `--draws` random ones.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Risk surface CSV for k = 3, using the first probability vector.
    #[arg(long)]
    contour: Option<PathBuf>,
    #[arg(long, default_value_t = 1.5)]
    contour_half_width: f64,
    #[arg(long, default_value_t = 151)]
    contour_steps: usize,
}

/// Parse `argv` (including the program name) and run the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let threads = match std::env::var("VDA_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("error: VDA_THREADS must be a positive integer, got '{v}'");
                return 2;
            }
        },
        Err(_) => None,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(VdaError::InvalidArgument(m)) => {
            eprintln!("error: invalid argument: {m}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Cv(a) => cv(a),
        Command::Stability(a) => stability(a),
        Command::Consistency(a) => consistency_cmd(a),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        eprintln!("seed: {s}");
        s
    })
}

fn echo(config: serde_json::Value) {
    eprintln!("config: {config}");
}

fn label_column(name: &Option<String>) -> LabelColumn {
    match name {
        Some(n) => LabelColumn::Named(n.clone()),
        None => LabelColumn::Last,
    }
}

fn load(data: &DataArgs) -> Result<Dataset> {
    read_csv(&data.data, &label_column(&data.label_column))
}

fn train_json(o: &TrainOptions) -> serde_json::Value {
    json!({
        "epsilon": o.epsilon,
        "delta": o.delta,
        "polynomial": o.polynomial,
        "max_sweeps": o.max_sweeps,
        "tol": o.tol,
        "max_halvings": o.max_halvings,
        "standardize": o.standardize,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut spec = SimSpec::new(a.design);
    if let Some(k) = a.k {
        spec.k = k;
        if a.design == Design::Ex1 {
            spec.n = 20 * k;
        }
    }
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(p) = a.p {
        spec.p = p;
    }
    if let Some(d) = a.d {
        spec.d = d;
    }
    if let Some(r) = a.rho {
        spec.rho = r;
    }
    if let Some(b) = a.logit_baseline {
        spec.logit_baseline = b;
    }
    spec.seed = resolve_seed(a.seed);
    spec.validate()?;
    echo(json!({ "command": "simulate", "spec": spec, "out": a.out }));
    let data = generate(&spec)?;
    let labels: Vec<String> = data.labels.iter().map(|l| l.to_string()).collect();
    write_csv_file(&a.out, data.x.view(), Some(&labels), None)?;
    println!("wrote {} rows x {} predictors to {}", spec.n, spec.p, a.out.display());
    Ok(())
}

/// Confusion matrix over the model's label set, as printed by `fit` and
/// `predict`.
fn confusion_report(model: &VdaModel, truth: &[String], pred: &[String]) -> Result<String> {
    let index = |l: &String| {
        model
            .labels
            .iter()
            .position(|m| m == l)
            .ok_or_else(|| VdaError::data(format!("label '{l}' is not known to the model")))
    };
    let t: Vec<usize> = truth.iter().map(index).collect::<Result<_>>()?;
    let p: Vec<usize> = pred.iter().map(index).collect::<Result<_>>()?;
    let m = confusion_matrix(&t, &p, model.k());
    let mut s = String::from("confusion matrix (rows: true, columns: predicted)\n");
    writeln!(s, "true\\pred,{}", model.labels.join(",")).unwrap();
    for (i, row) in m.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(s, "{},{}", model.labels[i], cells.join(",")).unwrap();
    }
    writeln!(s, "error rate: {}", error_rate(truth, pred)).unwrap();
    Ok(s)
}

fn fit(a: FitArgs) -> Result<()> {
    let pen = PenaltyConfig::new(a.lambda_l, a.lambda_e)?;
    let opts = a.train.options(pen);
    echo(json!({
        "command": "fit",
        "data": a.data.data,
        "label_column": a.data.label_column,
        "lambda_L": pen.lambda_l,
        "lambda_E": pen.lambda_e,
        "train": train_json(&opts),
        "model": a.model,
    }));
    let data = load(&a.data)?;
    let labels = data.labels()?;
    let (model, result) = train_detailed(data.x.view(), labels, &opts)?;
    model.save(&a.model)?;
    let active: Vec<&str> = model
        .active_predictors()
        .iter()
        .map(|&l| data.column_names[l].as_str())
        .collect();
    println!(
        "sweeps: {} (converged: {}), objective: {}",
        result.sweeps_used,
        result.converged,
        result.final_objective()
    );
    println!("active predictors ({}): {}", active.len(), active.join(","));
    let pred = model.predict(data.x.view())?;
    print!("{}", confusion_report(&model, labels, &pred)?);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    echo(json!({
        "command": "predict",
        "model": a.model,
        "data": a.data,
        "label_column": a.label_column,
        "out": a.out,
    }));
    let model = VdaModel::load(&a.model)?;
    let text = fs::read_to_string(&a.data)?;
    let label = match &a.label_column {
        Some(n) => LabelColumn::Named(n.clone()),
        None => {
            let width = csv::Reader::from_reader(text.as_bytes()).headers()?.len();
            if width == model.n_predictors() + 1 {
                LabelColumn::Last
            } else {
                LabelColumn::None
            }
        }
    };
    let data = read_csv_from(text.as_bytes(), &label)?;
    let pred = model.predict(data.x.view())?;
    let mut out = String::from("prediction\n");
    for p in &pred {
        writeln!(out, "{p}").unwrap();
    }
    write_text(&a.out, &out)?;
    println!("wrote {} predictions to {}", pred.len(), a.out.display());
    if let Some(truth) = &data.labels {
        print!("{}", confusion_report(&model, truth, &pred)?);
    }
    Ok(())
}

fn resolve_grid(g: &GridArgs, data: &Dataset, opts: &TrainOptions) -> Result<Grid> {
    match (&g.lambda_l_grid, &g.lambda_e_grid) {
        (Some(l), Some(e)) => Grid::new(l.clone(), e.clone()),
        (l, e) => {
            let d = default_grid(data.x.view(), data.labels()?, opts)?;
            Grid::new(
                l.clone().unwrap_or_else(|| d.lambda_l().to_vec()),
                e.clone().unwrap_or_else(|| d.lambda_e().to_vec()),
            )
        }
    }
}

fn cv(a: CvArgs) -> Result<()> {
    let seed = resolve_seed(a.seed);
    let opts = a.train.options(PenaltyConfig::default());
    let data = load(&a.data)?;
    let grid = resolve_grid(&a.grid, &data, &opts)?;
    echo(json!({
        "command": "cv",
        "data": a.data.data,
        "label_column": a.data.label_column,
        "lambda_L_grid": grid.lambda_l(),
        "lambda_E_grid": grid.lambda_e(),
        "folds": a.folds,
        "seed": seed,
        "train": train_json(&opts),
        "out": a.out,
    }));
    let report = cross_validate(data.x.view(), data.labels()?, &grid, a.folds, seed, &opts)?;
    if let Some(out) = &a.out {
        write_text(out, &report.to_csv())?;
    }
    let best = report.best_cell();
    println!(
        "best lambda_L: {}, lambda_E: {}, mean error: {} (se {})",
        best.lambda_l, best.lambda_e, best.mean_error, best.se
    );
    Ok(())
}

fn stability(a: StabilityArgs) -> Result<()> {
    let seed = resolve_seed(a.seed);
    let opts = a.train.options(PenaltyConfig::default());
    let data = load(&a.data)?;
    let grid = resolve_grid(&a.grid, &data, &opts)?;
    echo(json!({
        "command": "stability",
        "data": a.data.data,
        "label_column": a.data.label_column,
        "lambda_L_grid": grid.lambda_l(),
        "lambda_E_grid": grid.lambda_e(),
        "subsamples": a.subsamples,
        "pi": a.pi,
        "seed": seed,
        "train": train_json(&opts),
        "out": a.out,
    }));
    let report = stability_select(
        data.x.view(),
        data.labels()?,
        &grid,
        a.subsamples,
        a.pi,
        seed,
        &opts,
    )?;
    write_text(&a.out, &report.to_csv())?;
    let stable: Vec<&str> = report
        .stable_set
        .iter()
        .map(|&l| data.column_names[l].as_str())
        .collect();
    println!("stable set (pi = {}): {}", report.pi, stable.join(","));
    println!("q: {}, expected false positives <= {}", report.q, report.fp_bound);
    Ok(())
}

fn consistency_cmd(a: ConsistencyArgs) -> Result<()> {
    let (probs, seed) = match &a.probs {
        Some(p) => (vec![p.clone()], None),
        None => {
            let s = resolve_seed(a.seed);
            (consistency::random_probabilities(a.k, a.draws, s), Some(s))
        }
    };
    echo(json!({
        "command": "consistency",
        "k": a.k,
        "probs": a.probs,
        "draws": if seed.is_some() { Some(a.draws) } else { None },
        "seed": seed,
        "epsilon": a.epsilon,
        "out": a.out,
        "contour": a.contour,
    }));
    let lands = consistency::sweep(&probs, a.k, a.epsilon)?;
    let mut s = String::new();
    let p_cols: Vec<String> = (1..=a.k).map(|j| format!("p{j}")).collect();
    let z_cols: Vec<String> = (1..a.k).map(|j| format!("z{j}")).collect();
    writeln!(s, "{},{},winner,boundary,fisher", p_cols.join(","), z_cols.join(",")).unwrap();
    let mut counts = [0usize; 3];
    for land in &lands {
        let check = check_landscape(land)?;
        counts[check as usize] += 1;
        let p: Vec<String> = land.probs.iter().map(|v| v.to_string()).collect();
        let z: Vec<String> = land.minimizer.iter().map(|v| v.to_string()).collect();
        writeln!(
            s,
            "{},{},{},{},{}",
            p.join(","),
            z.join(","),
            land.nearest_vertex + 1,
            land.on_boundary,
            check.as_str()
        )
        .unwrap();
    }
    write_text(&a.out, &s)?;
    if let Some(path) = &a.contour {
        if a.k != 3 {
            return Err(VdaError::arg("contour output requires k = 3"));
        }
        let csv = consistency::contour_grid_csv(
            &probs[0],
            a.epsilon,
            a.contour_half_width,
            a.contour_steps,
        )?;
        write_text(path, &csv)?;
    }
    println!(
        "consistent: {}, inconsistent: {}, indeterminate: {}",
        counts[0], counts[1], counts[2]
    );
    Ok(())
}
