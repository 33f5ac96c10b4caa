//! Command-line entry point: simulation, fitting, filtering, rolling
//! evaluation, method comparison and predictive-curve emission.
//!
//! Exit codes: 0 success, 1 runtime failure (one machine-parsable
//! `error: <Category>: <message>` line on stderr), 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{load_csv, standardize, to_returns, ReturnKind, DEFAULT_STALE_GAP};
use crate::error::{Error, Result};
use crate::eval::{
    friedman_test, nemenyi_critical_distance, pairwise_significance, rolling_evaluate,
    EvalConfig, EvalRun, Method, ScoreTable,
};
use crate::mle::{fit_bekk, FitConfig, Innovation, Variant};
use crate::models::{
    simulate, tri_diag_index, tri_len, BekkCoeff, BekkParams, DriftHypers, ParamState, SimModel,
};
use crate::mvstat::CovMatrix;
use crate::rapf::{predictive_density_curve, run_filter, save_cloud_to_path, RapfConfig};
use crate::series::ReturnSeries;

#[derive(Parser)]
#[command(
    name = "dyncov",
    version,
    about = "Dynamic covariance forecasting: BEKK baselines and a particle-filtered dynamic covariance model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Random seed shared by every stochastic component.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Number of particles for the filter.
    #[arg(long, global = true, default_value_t = 4000)]
    particles: usize,

    /// Shrinkage mixing coefficient of the regularized proposal.
    #[arg(long, global = true, default_value_t = 0.95)]
    shrinkage: f64,

    /// Training prefix length before sequential prediction starts.
    #[arg(long, global = true, default_value_t = 50)]
    warmup: usize,

    /// Innovation law: gaussian or student-t.
    #[arg(long, global = true, default_value = "gaussian")]
    innovation: String,

    /// Skip column standardization of input series.
    #[arg(long, global = true, default_value_t = false)]
    no_standardize: bool,

    /// Output path (format-specific siblings are derived from it).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format for summary artifacts: csv or json.
    #[arg(long, global = true, default_value = "csv")]
    format: String,

    /// Worker threads for multi-dataset evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Write zero in the elapsed_seconds column so reruns are byte-identical.
    #[arg(long, global = true, default_value_t = false)]
    deterministic_timing: bool,
}

#[derive(Args, Clone)]
struct InputOpts {
    /// Input CSV of returns (or prices with --prices).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,

    /// Treat inputs as price levels and convert to returns.
    #[arg(long, default_value_t = false)]
    prices: bool,

    /// Return construction for --prices: log or simple.
    #[arg(long, default_value = "log")]
    return_kind: String,

    /// Consecutive all-zero-return rows treated as a stale-price gap.
    #[arg(long, default_value_t = DEFAULT_STALE_GAP)]
    stale_gap: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a return series from a diagonal BEKK or the dynamic model.
    Simulate {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        length: usize,
        /// Generative model: bekk or bmdc.
        #[arg(long, default_value = "bekk")]
        model: String,
        /// Persistence coefficient applied to every coordinate.
        #[arg(long, default_value_t = 0.9)]
        a: f64,
        /// ARCH coefficient applied to every coordinate.
        #[arg(long, default_value_t = 0.35)]
        b: f64,
        /// Student-t degrees of freedom (omit for Gaussian innovations).
        #[arg(long)]
        nu: Option<f64>,
        /// Drift scale for all three parameter groups (bmdc model).
        #[arg(long, default_value_t = 0.01)]
        drift: f64,
    },
    /// Fit a static BEKK model by constrained maximum likelihood.
    Fit {
        #[command(flatten)]
        input: InputOpts,
        /// Coefficient structure: diagonal or full.
        #[arg(long, default_value = "diagonal")]
        variant: String,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
    },
    /// Run the particle filter over a series and emit prediction records.
    Filter {
        #[command(flatten)]
        input: InputOpts,
        /// Write the final particle cloud snapshot to this path.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Rolling one-step-ahead evaluation of one or more methods.
    Evaluate {
        #[command(flatten)]
        input: InputOpts,
        /// Comma-separated methods: BEKK,BEKK-T,BMDC,BMDC-T.
        #[arg(long, default_value = "BEKK,BMDC")]
        methods: String,
        /// Refit cadence for the static methods.
        #[arg(long, default_value_t = 1)]
        refit_every: usize,
        /// Full multistart refits instead of warm starts.
        #[arg(long, default_value_t = false)]
        cold_refit: bool,
    },
    /// Friedman + Nemenyi comparison over a score-table CSV.
    Compare {
        /// Score table: header `method,<dataset...>`, one row per method.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Predictive density curve along one coordinate after a filter pass.
    Curve {
        #[command(flatten)]
        input: InputOpts,
        /// Coordinate to sweep.
        #[arg(long, default_value_t = 0)]
        dim_index: usize,
        /// Grid as lo:hi:points.
        #[arg(long, default_value = "-8:8:161", allow_hyphen_values = true)]
        grid: String,
    },
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version on stdout with exit 0; usage errors exit 2
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.category(), e);
            1
        }
    }
}

fn parse_innovation(s: &str) -> Result<Innovation> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" => Ok(Innovation::Gaussian),
        "student-t" | "studentt" | "t" => Ok(Innovation::StudentT),
        other => Err(Error::Parse(format!("unknown innovation {other}"))),
    }
}

fn parse_variant(s: &str) -> Result<Variant> {
    match s.to_ascii_lowercase().as_str() {
        "diagonal" => Ok(Variant::Diagonal),
        "full" => Ok(Variant::Full),
        other => Err(Error::Parse(format!("unknown variant {other}"))),
    }
}

/// 17-significant-digit decimal text; round-trips every finite f64.
fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn output_path(global: &GlobalOpts, default_name: &str) -> PathBuf {
    global
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    datasets: Vec<String>,
    methods: Vec<String>,
    seed: u64,
    particles: usize,
    shrinkage: f64,
    warmup: usize,
    innovation: String,
    standardized: bool,
    deterministic_timing: bool,
    version: String,
    wall_seconds: f64,
}

impl RunManifest {
    fn new(command: &str, global: &GlobalOpts) -> Self {
        RunManifest {
            command: command.to_string(),
            datasets: Vec::new(),
            methods: Vec::new(),
            seed: global.seed,
            particles: global.particles,
            shrinkage: global.shrinkage,
            warmup: global.warmup,
            innovation: global.innovation.clone(),
            standardized: !global.no_standardize,
            deterministic_timing: global.deterministic_timing,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_seconds: 0.0,
        }
    }

    fn write(&self, out: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(sibling(out, "manifest.json"), body + "\n")?;
        Ok(())
    }
}

fn load_dataset(path: &Path, input: &InputOpts, global: &GlobalOpts) -> Result<(String, ReturnSeries)> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let table = load_csv(path)?;
    if table.dropped_rows > 0 {
        eprintln!("warning: {name}: dropped {} corrupt rows", table.dropped_rows);
    }
    let series = if input.prices {
        let kind: ReturnKind = input.return_kind.parse()?;
        let (series, dropped) = to_returns(&table, kind, input.stale_gap)?;
        if dropped > 0 {
            eprintln!("warning: {name}: dropped {dropped} stale-gap rows");
        }
        series
    } else {
        table.to_series()?
    };
    let series = if global.no_standardize { series } else { standardize(&series)? };
    Ok((name, series))
}

fn rapf_config(global: &GlobalOpts) -> Result<RapfConfig> {
    Ok(RapfConfig {
        n_particles: global.particles,
        shrinkage_a: global.shrinkage,
        innovation: parse_innovation(&global.innovation)?,
        seed: global.seed,
        ..Default::default()
    })
}

fn record_header(d: usize) -> String {
    let mut cols = vec![
        "step".to_string(),
        "method".to_string(),
        "pred_loglik_mixture".to_string(),
        "pred_loglik_plugin".to_string(),
        "ess".to_string(),
        "elapsed_seconds".to_string(),
    ];
    for i in 0..d {
        for j in i..d {
            cols.push(format!("cov_{i}_{j}"));
        }
    }
    cols.join(",")
}

fn record_line(
    method: &str,
    r: &crate::rapf::PredictionRecord,
    deterministic_timing: bool,
) -> String {
    let d = r.predicted_cov_mean.dim();
    let elapsed = if deterministic_timing { 0.0 } else { r.elapsed_seconds };
    let mut fields = vec![
        r.step.to_string(),
        method.to_string(),
        fmt17(r.pred_logdensity_mixture),
        fmt17(r.pred_logdensity_plugin),
        fmt17(r.ess),
        fmt17(elapsed),
    ];
    for i in 0..d {
        for j in i..d {
            fields.push(fmt17(r.predicted_cov_mean.matrix()[(i, j)]));
        }
    }
    fields.join(",")
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate { dim, length, model, a, b, nu, drift } => {
            cmd_simulate(g, *dim, *length, model, *a, *b, *nu, *drift)
        }
        Command::Fit { input, variant, restarts, max_iters } => {
            cmd_fit(g, input, variant, *restarts, *max_iters)
        }
        Command::Filter { input, snapshot } => cmd_filter(g, input, snapshot.as_deref()),
        Command::Evaluate { input, methods, refit_every, cold_refit } => {
            cmd_evaluate(g, input, methods, *refit_every, *cold_refit)
        }
        Command::Compare { scores, alpha } => cmd_compare(g, scores, *alpha),
        Command::Curve { input, dim_index, grid } => cmd_curve(g, input, *dim_index, grid),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    g: &GlobalOpts,
    dim: usize,
    length: usize,
    model: &str,
    a: f64,
    b: f64,
    nu: Option<f64>,
    drift: f64,
) -> Result<()> {
    if dim == 0 || length < 2 {
        return Err(Error::InvalidParams("need dim >= 1 and length >= 2".into()));
    }
    let resid = 1.0 - a * a - b * b;
    if resid <= 0.0 {
        return Err(Error::InvalidParams("need a^2 + b^2 < 1".into()));
    }
    // C chosen so the unconditional covariance is the identity
    let c_diag = resid.sqrt();
    let mut c = DVector::zeros(tri_len(dim));
    for i in 0..dim {
        c[tri_diag_index(i, dim)] = c_diag;
    }
    let av = DVector::from_element(dim, a);
    let bv = DVector::from_element(dim, b);
    let sigma0 = CovMatrix::identity(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let theta0 = ParamState { a: av.clone(), b: bv.clone(), c: c.clone() };
    let hypers = DriftHypers::new(drift, drift, drift);
    let params = BekkParams::diagonal(av, bv, c, nu);
    let (series, _) = match model.to_ascii_lowercase().as_str() {
        "bekk" => simulate(SimModel::Bekk(&params), length, &sigma0, &mut rng)?,
        "bmdc" => simulate(
            SimModel::Bmdc { theta0: &theta0, hypers: &hypers, nu },
            length,
            &sigma0,
            &mut rng,
        )?,
        other => return Err(Error::Parse(format!("unknown model {other}"))),
    };

    let out = output_path(g, "simulated.csv");
    let mut w = fs::File::create(&out).map(std::io::BufWriter::new)?;
    let header: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for t in 0..series.len() {
        let row = series.row(t);
        let line: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    let mut manifest = RunManifest::new("simulate", g);
    manifest.datasets.push(out.display().to_string());
    manifest.write(&out)?;
    Ok(())
}

#[derive(Serialize)]
struct FitOutput {
    variant: String,
    innovation: String,
    a: Vec<f64>,
    b: Vec<f64>,
    c_upper_triangle: Vec<f64>,
    nu: Option<f64>,
    loglik: f64,
    iterations: usize,
    converged: bool,
}

fn cmd_fit(
    g: &GlobalOpts,
    input: &InputOpts,
    variant: &str,
    restarts: usize,
    max_iters: usize,
) -> Result<()> {
    let path = &input.input[0];
    let (name, series) = load_dataset(path, input, g)?;
    let cfg = FitConfig {
        variant: parse_variant(variant)?,
        innovation: parse_innovation(&g.innovation)?,
        max_iters,
        n_restarts: restarts,
        ..Default::default()
    };
    let start = Instant::now();
    let fit = fit_bekk(&series, &cfg, g.seed)?;
    let (a, b) = match &fit.params.coeff {
        BekkCoeff::Diagonal { a, b } => (a.iter().copied().collect(), b.iter().copied().collect()),
        BekkCoeff::Full { a, b } => (
            a.iter().copied().collect::<Vec<f64>>(),
            b.iter().copied().collect::<Vec<f64>>(),
        ),
    };
    let out = FitOutput {
        variant: variant.to_string(),
        innovation: g.innovation.clone(),
        a,
        b,
        c_upper_triangle: fit.params.c.iter().copied().collect(),
        nu: fit.params.nu,
        loglik: fit.loglik,
        iterations: fit.iterations,
        converged: fit.converged,
    };
    let out_path = output_path(g, "fit.json");
    let body = serde_json::to_string_pretty(&out).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&out_path, body + "\n")?;
    let mut manifest = RunManifest::new("fit", g);
    manifest.datasets.push(name);
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out_path)?;
    Ok(())
}

fn cmd_filter(g: &GlobalOpts, input: &InputOpts, snapshot: Option<&Path>) -> Result<()> {
    let path = &input.input[0];
    let (name, series) = load_dataset(path, input, g)?;
    let cfg = rapf_config(g)?;
    let start = Instant::now();
    let (records, cloud) = run_filter(&series, g.warmup, &cfg)?;
    let method = match cfg.innovation {
        Innovation::Gaussian => Method::Bmdc,
        Innovation::StudentT => Method::BmdcT,
    };
    let out = output_path(g, "filter.csv");
    let mut w = fs::File::create(&out).map(std::io::BufWriter::new)?;
    writeln!(w, "{}", record_header(series.dim()))?;
    for r in &records {
        writeln!(w, "{}", record_line(method.name(), r, g.deterministic_timing))?;
    }
    drop(w);
    if let Some(snap) = snapshot {
        save_cloud_to_path(&cloud, snap)?;
    }
    let mut manifest = RunManifest::new("filter", g);
    manifest.datasets.push(name);
    manifest.methods.push(method.name().to_string());
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out)?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    method: String,
    dataset: String,
    avg_loglik: f64,
    cum_loglik: f64,
    n_failed: usize,
}

#[derive(Serialize)]
struct EvaluateSummary {
    runs: Vec<RunSummary>,
    seed: u64,
    particles: usize,
    shrinkage: f64,
    warmup: usize,
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for tok in spec.split(',') {
        let tok = tok.trim();
        if !tok.is_empty() {
            out.push(tok.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("no methods given".into()));
    }
    Ok(out)
}

fn cmd_evaluate(
    g: &GlobalOpts,
    input: &InputOpts,
    methods: &str,
    refit_every: usize,
    cold_refit: bool,
) -> Result<()> {
    let methods = parse_methods(methods)?;
    let start = Instant::now();
    let mut datasets = Vec::new();
    for path in &input.input {
        datasets.push(load_dataset(path, input, g)?);
    }
    let cfg = EvalConfig {
        rapf: rapf_config(g)?,
        refit_every,
        cold_refit,
        ..Default::default()
    };

    // fan (dataset x method) tasks out to at most `jobs` workers
    let tasks: Vec<(usize, Method)> = datasets
        .iter()
        .enumerate()
        .flat_map(|(i, _)| methods.iter().map(move |&m| (i, m)))
        .collect();
    let jobs = g.jobs.max(1);
    let warmup = g.warmup;
    let mut results: Vec<Option<Result<EvalRun>>> = (0..tasks.len()).map(|_| None).collect();
    let counter = std::sync::atomic::AtomicUsize::new(0);
    let results_lock = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        let counter = &counter;
        let results = &results_lock;
        let tasks = &tasks;
        let datasets = &datasets;
        let cfg = &cfg;
        let worker = move || loop {
            let idx = counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if idx >= tasks.len() {
                break;
            }
            let (di, method) = tasks[idx];
            let run = rolling_evaluate(&datasets[di].1, method, warmup, &cfg);
            results.lock().unwrap()[idx] = Some(run);
        };
        let handles: Vec<_> = (0..jobs.min(tasks.len())).map(|_| scope.spawn(worker)).collect();
        for h in handles {
            let _ = h.join();
        }
    });

    let out = output_path(g, "evaluate.csv");
    let mut w = fs::File::create(&out).map(std::io::BufWriter::new)?;
    writeln!(w, "{}", record_header(datasets[0].1.dim()))?;
    let mut summaries = Vec::new();
    let mut scores = DMatrix::zeros(methods.len(), datasets.len());
    for (task_idx, (di, method)) in tasks.iter().enumerate() {
        let run = results[task_idx].take().unwrap()?;
        for r in &run.records {
            writeln!(w, "{}", record_line(method.name(), r, g.deterministic_timing))?;
        }
        let mi = methods.iter().position(|m| m == method).unwrap();
        scores[(mi, *di)] = run.avg_loglik;
        summaries.push(RunSummary {
            method: method.name().to_string(),
            dataset: datasets[*di].0.clone(),
            avg_loglik: run.avg_loglik,
            cum_loglik: run.cum_loglik,
            n_failed: run.n_failed,
        });
    }
    drop(w);

    // per-method average score table, one row per method
    let score_path = sibling(&out, "scores.csv");
    let mut sw = fs::File::create(&score_path).map(std::io::BufWriter::new)?;
    let header: Vec<String> = std::iter::once("method".to_string())
        .chain(datasets.iter().map(|(n, _)| n.clone()))
        .collect();
    writeln!(sw, "{}", header.join(","))?;
    for (mi, m) in methods.iter().enumerate() {
        let mut fields = vec![m.name().to_string()];
        for di in 0..datasets.len() {
            fields.push(fmt17(scores[(mi, di)]));
        }
        writeln!(sw, "{}", fields.join(","))?;
    }
    drop(sw);

    let summary = EvaluateSummary {
        runs: summaries,
        seed: g.seed,
        particles: g.particles,
        shrinkage: g.shrinkage,
        warmup: g.warmup,
    };
    let body = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(sibling(&out, "summary.json"), body + "\n")?;

    let mut manifest = RunManifest::new("evaluate", g);
    manifest.datasets = datasets.iter().map(|(n, _)| n.clone()).collect();
    manifest.methods = methods.iter().map(|m| m.name().to_string()).collect();
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out)?;
    Ok(())
}

#[derive(Serialize)]
struct CompareOutput {
    test: String,
    statistic: f64,
    reject: bool,
    alpha: f64,
    methods: Vec<String>,
    avg_ranks: Vec<f64>,
    critical_distance: f64,
    significant_pairs: Vec<(String, String)>,
}

fn cmd_compare(g: &GlobalOpts, scores_path: &Path, alpha: f64) -> Result<()> {
    let table = load_score_table(scores_path)?;
    let (statistic, reject, avg_ranks) = friedman_test(&table, alpha)?;
    let cd = nemenyi_critical_distance(table.n_methods(), table.n_datasets(), alpha)?;
    let sig = pairwise_significance(&avg_ranks, cd);
    let mut pairs = Vec::new();
    for i in 0..table.n_methods() {
        for j in (i + 1)..table.n_methods() {
            if sig[(i, j)] {
                pairs.push((table.methods[i].clone(), table.methods[j].clone()));
            }
        }
    }
    let out = CompareOutput {
        test: "friedman-chi-square".to_string(),
        statistic,
        reject,
        alpha,
        methods: table.methods.clone(),
        avg_ranks,
        critical_distance: cd,
        significant_pairs: pairs,
    };
    let body = serde_json::to_string_pretty(&out).map_err(|e| Error::Parse(e.to_string()))?;
    match &g.output {
        Some(path) => fs::write(path, body + "\n")?,
        None => println!("{body}"),
    }
    Ok(())
}

fn load_score_table(path: &Path) -> Result<ScoreTable> {
    let raw = load_csv(path)?;
    // load_csv routes the method-name column into timestamps
    let methods = raw
        .timestamps
        .clone()
        .ok_or_else(|| Error::HeaderMismatch("first column must hold method names".into()))?;
    let datasets = raw.columns.clone();
    let scores = DMatrix::from_fn(methods.len(), datasets.len(), |i, j| raw.rows[i][j]);
    ScoreTable::new(methods, datasets, scores)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid must be lo:hi:points, got {spec}")));
    }
    let lo: f64 = parts[0].parse().map_err(|_| Error::Parse("bad grid lo".into()))?;
    let hi: f64 = parts[1].parse().map_err(|_| Error::Parse("bad grid hi".into()))?;
    let n: usize = parts[2].parse().map_err(|_| Error::Parse("bad grid points".into()))?;
    if n < 2 || !(hi > lo) {
        return Err(Error::Parse("grid needs hi > lo and at least 2 points".into()));
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

fn cmd_curve(g: &GlobalOpts, input: &InputOpts, dim_index: usize, grid_spec: &str) -> Result<()> {
    let path = &input.input[0];
    let (name, series) = load_dataset(path, input, g)?;
    let cfg = rapf_config(g)?;
    let grid = parse_grid(grid_spec)?;
    let (_, cloud) = run_filter(&series, g.warmup, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let curve = predictive_density_curve(&cloud, dim_index, &grid, &cfg, &mut rng)?;
    let out = output_path(g, "curve.csv");
    let mut w = fs::File::create(&out).map(std::io::BufWriter::new)?;
    writeln!(w, "x,log_density_mixture,log_density_plugin")?;
    for (x, mix, plug) in &curve {
        writeln!(w, "{},{},{}", fmt17(*x), fmt17(*mix), fmt17(*plug))?;
    }
    drop(w);
    let mut manifest = RunManifest::new("curve", g);
    manifest.datasets.push(name);
    manifest.write(&out)?;
    Ok(())
}
