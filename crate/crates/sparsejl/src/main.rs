//! Command-line surface: bound queries, curve sweeps, comparison grids,
//! dataset dispersion, projection, verification, and a latency benchmark.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or domain error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sparsejl::data_io::{self, Format};
use sparsejl::embedding::{self, Variant};
use sparsejl::oracle;
use sparsejl::row_bound::{self, BoundParams};
use sparsejl::tail_bounds::{self, BoundKind, Mode, SparsityRule, DEFAULT_D_MAX};
use sparsejl::{moment_engine, rng, Error};

#[derive(Parser)]
#[command(name = "sparsejl", version, about = "Distortion guarantees for sparse random embeddings")]
struct Cli {
    /// Base seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker thread cap; 1 guarantees byte-stable output. Defaults to the
    /// SPARSEJL_THREADS environment variable, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format.
    #[arg(long, global = true, default_value = "pretty")]
    format: OutputFormat,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Pretty,
}

#[derive(Subcommand)]
enum Command {
    /// Proved distortion epsilon at a failure probability delta.
    Bound(BoundArgs),
    /// Curve families: confidence, sparsity, dimension, union.
    Curves(CurvesArgs),
    /// T_new/T_old comparison over a (d, p, v) grid.
    RatioGrid(RatioGridArgs),
    /// Pairwise dispersion profile of a dataset.
    Disperse(DisperseArgs),
    /// Project a dataset through a sampled embedding.
    Project(ProjectArgs),
    /// Check the proved bounds against simulation or exact enumeration.
    Verify(VerifyArgs),
    /// Latency distribution of full bound evaluations.
    Bench(BenchArgs),
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    s: u64,
    #[arg(long)]
    v: f64,
    #[arg(long)]
    delta: f64,
    /// corollary | optimized
    #[arg(long, default_value = "optimized")]
    mode: String,
    #[arg(long, default_value_t = DEFAULT_D_MAX)]
    d_max: usize,
}

#[derive(Args)]
struct CurvesArgs {
    /// confidence | sparsity | dimension | union
    family: String,
    #[arg(long)]
    n: u64,
    /// Target dimension (confidence and sparsity curves).
    #[arg(long)]
    m: Option<u64>,
    /// Fixed sparsity (confidence curve, and the fixed-s rule).
    #[arg(long)]
    s: Option<u64>,
    /// Fixed s/m ratio rule (dimension and union curves).
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    v: f64,
    /// Confidence target 1 - delta (sparsity, dimension, union).
    #[arg(long, default_value_t = 0.75)]
    confidence: f64,
    /// Distortion grid (log-spaced).
    #[arg(long, default_value_t = 0.05)]
    eps_min: f64,
    #[arg(long, default_value_t = 2.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Fixed distortion for the union curve.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Pair-count grid for the union curve (log-spaced).
    #[arg(long, default_value_t = 10)]
    pairs_min: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pairs_max: u64,
    #[arg(long, default_value_t = DEFAULT_D_MAX)]
    d_max: usize,
}

#[derive(Args)]
struct RatioGridArgs {
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 2)]
    d_min: u32,
    #[arg(long, default_value_t = 32)]
    d_max: u32,
    #[arg(long, default_value_t = 1e-3)]
    p_min: f64,
    #[arg(long, default_value_t = 0.5)]
    p_max: f64,
    #[arg(long, default_value_t = 20)]
    p_points: usize,
    #[arg(long, default_value_t = 1e-2)]
    v_min: f64,
    #[arg(long, default_value_t = 1.0)]
    v_max: f64,
    #[arg(long, default_value_t = 20)]
    v_points: usize,
}

#[derive(Args)]
struct DisperseArgs {
    #[arg(long)]
    input: PathBuf,
    /// csv | csv-header | matrix-market
    #[arg(long = "input-format", default_value = "csv")]
    input_format: String,
    #[arg(long, default_value_t = data_io::DEFAULT_SUBSAMPLE)]
    subsample: usize,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    /// csv | csv-header | matrix-market
    #[arg(long = "input-format", default_value = "csv")]
    input_format: String,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = Variant::ColumnWor)]
    variant: Variant,
}

#[derive(Args)]
struct VerifyArgs {
    /// mc | exact
    method: String,
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 1_000)]
    m: u64,
    #[arg(long, default_value_t = 10)]
    s: u64,
    #[arg(long, default_value_t = 0.2)]
    v: f64,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Ambient-size cap for the exact battery.
    #[arg(long, default_value_t = 4)]
    n_max: u64,
    #[arg(long, default_value_t = DEFAULT_D_MAX)]
    d_max: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1_000)]
    samples: usize,
}

fn main() {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("SPARSEJL_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> sparsejl::Result<i32> {
    match &cli.command {
        Command::Bound(a) => cmd_bound(cli, a),
        Command::Curves(a) => cmd_curves(cli, a),
        Command::RatioGrid(a) => cmd_ratio_grid(cli, a),
        Command::Disperse(a) => cmd_disperse(cli, a),
        Command::Project(a) => cmd_project(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
    }
}

/// Collected report: resolved config, tabular rows, and summary lines.
struct Report {
    command: String,
    config: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    summary: Vec<(String, String)>,
}

impl Report {
    fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            config: Vec::new(),
            columns: Vec::new(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    fn cfg(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    fn sum(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn columns(&mut self, cols: &[&str]) {
        self.columns = cols.iter().map(|c| c.to_string()).collect();
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.render_csv(),
            OutputFormat::Json => self.render_json(),
            OutputFormat::Pretty => self.render_pretty(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# command={}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k}={v}");
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    fn render_json(&self) -> String {
        let config: serde_json::Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let summary: serde_json::Map<String, Value> = self
            .summary
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, cell)| (c.clone(), Value::String(cell.clone())))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = json!({
            "schema_version": 1,
            "command": self.command,
            "config": config,
            "summary": summary,
            "columns": self.columns,
            "rows": rows,
        });
        serde_json::to_string_pretty(&doc).expect("string-valued document") + "\n"
    }

    fn render_pretty(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(out, "  {k} = {v}");
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k}: {v}");
        }
        if !self.columns.is_empty() {
            let _ = writeln!(out, "{}", self.columns.join("\t"));
            for r in &self.rows {
                let _ = writeln!(out, "{}", r.join("\t"));
            }
        }
        out
    }

    fn emit(&self, cli: &Cli) -> sparsejl::Result<()> {
        let text = self.render(cli.format);
        match &cli.output {
            Some(path) => fs::write(path, text)?,
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
            }
        }
        Ok(())
    }
}

fn f(x: f64) -> String {
    format!("{x:.12e}")
}

fn parse_mode(s: &str) -> sparsejl::Result<Mode> {
    match s {
        "corollary" => Ok(Mode::Corollary),
        "optimized" => Ok(Mode::Optimized),
        other => Err(Error::Argument(format!(
            "unknown mode '{other}' (expected corollary or optimized)"
        ))),
    }
}

fn parse_input_format(s: &str) -> sparsejl::Result<Format> {
    match s {
        "csv" => Ok(Format::DenseCsv { has_header: false }),
        "csv-header" => Ok(Format::DenseCsv { has_header: true }),
        "matrix-market" => Ok(Format::MatrixMarket),
        other => Err(Error::Argument(format!(
            "unknown input format '{other}' (expected csv, csv-header, or matrix-market)"
        ))),
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 0 {
        return Vec::new();
    }
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (lo.ln() * (1.0 - t) + hi.ln() * t).exp()
        })
        .collect()
}

fn global_cfg(report: &mut Report, cli: &Cli) {
    report.cfg("seed", cli.seed);
    report.cfg(
        "threads",
        cli.threads.map_or_else(|| "auto".to_string(), |t| t.to_string()),
    );
}

fn cmd_bound(cli: &Cli, a: &BoundArgs) -> sparsejl::Result<i32> {
    let mode = parse_mode(&a.mode)?;
    let params = BoundParams::new(a.n, a.m, a.s, a.v)?;
    let eb = tail_bounds::epsilon_bound(&params, a.delta, mode, a.d_max)?;
    let mut report = Report::new("bound");
    global_cfg(&mut report, cli);
    report.cfg("n", a.n);
    report.cfg("m", a.m);
    report.cfg("s", a.s);
    report.cfg("v", a.v);
    report.cfg("delta", a.delta);
    report.cfg("mode", &a.mode);
    report.cfg("d_max", a.d_max);
    report.sum("epsilon", f(eb.epsilon));
    report.sum("d_used", eb.d);
    report.sum("q", f(eb.q));
    if eb.d as u64 > a.m / 2 {
        report.sum("warning", format!("d = {} exceeds m/2 = {}", eb.d, a.m / 2));
        eprintln!("warning: moment order d = {} exceeds m/2 = {}", eb.d, a.m / 2);
    }
    report.columns(&["epsilon", "d", "q"]);
    report.row(vec![f(eb.epsilon), eb.d.to_string(), f(eb.q)]);
    report.emit(cli)?;
    Ok(0)
}

fn sparsity_rule(a: &CurvesArgs) -> sparsejl::Result<SparsityRule> {
    match (a.s, a.ratio) {
        (Some(s), None) => Ok(SparsityRule::FixedS(s)),
        (None, Some(r)) => Ok(SparsityRule::FixedRatio(r)),
        _ => Err(Error::Argument(
            "exactly one of --s and --ratio selects the sparsity rule".into(),
        )),
    }
}

fn opt_m(m: Option<u64>) -> String {
    m.map_or_else(|| "infeasible".to_string(), |m| m.to_string())
}

fn cmd_curves(cli: &Cli, a: &CurvesArgs) -> sparsejl::Result<i32> {
    let mut report = Report::new(&format!("curves-{}", a.family));
    global_cfg(&mut report, cli);
    report.cfg("n", a.n);
    report.cfg("v", a.v);
    report.cfg("d_max", a.d_max);
    match a.family.as_str() {
        "confidence" => {
            let (m, s) = match (a.m, a.s) {
                (Some(m), Some(s)) => (m, s),
                _ => {
                    return Err(Error::Argument(
                        "the confidence curve needs --m and --s".into(),
                    ))
                }
            };
            report.cfg("m", m);
            report.cfg("s", s);
            report.cfg("eps_min", a.eps_min);
            report.cfg("eps_max", a.eps_max);
            report.cfg("points", a.points);
            let params = BoundParams::new(a.n, m, s, a.v)?;
            report.columns(&["epsilon", "confidence_new", "confidence_baseline"]);
            for eps in log_grid(a.eps_min, a.eps_max, a.points) {
                let dn =
                    tail_bounds::confidence_at_epsilon_with(BoundKind::New, &params, eps, a.d_max)?;
                let db = tail_bounds::confidence_at_epsilon_with(
                    BoundKind::Baseline,
                    &params,
                    eps,
                    a.d_max,
                )?;
                report.row(vec![f(eps), f(1.0 - dn), f(1.0 - db)]);
            }
        }
        "sparsity" => {
            let m = a.m.ok_or_else(|| Error::Argument("the sparsity curve needs --m".into()))?;
            report.cfg("m", m);
            report.cfg("confidence", a.confidence);
            report.cfg("eps_min", a.eps_min);
            report.cfg("eps_max", a.eps_max);
            report.cfg("points", a.points);
            report.columns(&["epsilon", "s_new", "s_baseline"]);
            for eps in log_grid(a.eps_min, a.eps_max, a.points) {
                let sn = tail_bounds::min_sparsity_with(
                    BoundKind::New,
                    a.n,
                    m,
                    eps,
                    a.confidence,
                    a.v,
                    a.d_max,
                )?;
                let sb = tail_bounds::min_sparsity_with(
                    BoundKind::Baseline,
                    a.n,
                    m,
                    eps,
                    a.confidence,
                    a.v,
                    a.d_max,
                )?;
                report.row(vec![f(eps), sn.to_string(), sb.to_string()]);
            }
        }
        "dimension" => {
            let rule = sparsity_rule(a)?;
            report.cfg("rule", format!("{rule:?}"));
            report.cfg("confidence", a.confidence);
            report.cfg("eps_min", a.eps_min);
            report.cfg("eps_max", a.eps_max);
            report.cfg("points", a.points);
            report.columns(&["epsilon", "m_new", "m_baseline"]);
            for eps in log_grid(a.eps_min, a.eps_max, a.points) {
                let mn = tail_bounds::min_dimension_with(
                    BoundKind::New,
                    a.n,
                    rule,
                    eps,
                    a.confidence,
                    a.v,
                    a.d_max,
                )?;
                let mb = tail_bounds::min_dimension_with(
                    BoundKind::Baseline,
                    a.n,
                    rule,
                    eps,
                    a.confidence,
                    a.v,
                    a.d_max,
                )?;
                report.row(vec![f(eps), opt_m(mn), opt_m(mb)]);
            }
        }
        "union" => {
            let rule = sparsity_rule(a)?;
            let eps = a
                .epsilon
                .ok_or_else(|| Error::Argument("the union curve needs --epsilon".into()))?;
            report.cfg("rule", format!("{rule:?}"));
            report.cfg("confidence", a.confidence);
            report.cfg("epsilon", eps);
            report.cfg("pairs_min", a.pairs_min);
            report.cfg("pairs_max", a.pairs_max);
            report.columns(&["pair_count", "m_new", "m_baseline"]);
            let mut pairs = a.pairs_min.max(1);
            while pairs <= a.pairs_max {
                let mn = tail_bounds::union_bound_dimension_with(
                    BoundKind::New,
                    pairs,
                    a.n,
                    rule,
                    eps,
                    a.confidence,
                    a.v,
                    a.d_max,
                )?;
                let mb = tail_bounds::union_bound_dimension_with(
                    BoundKind::Baseline,
                    pairs,
                    a.n,
                    rule,
                    eps,
                    a.confidence,
                    a.v,
                    a.d_max,
                )?;
                report.row(vec![pairs.to_string(), opt_m(mn), opt_m(mb)]);
                if pairs > a.pairs_max / 10 {
                    break;
                }
                pairs *= 10;
            }
        }
        other => {
            return Err(Error::Argument(format!(
                "unknown curve family '{other}' (expected confidence, sparsity, dimension, or union)"
            )))
        }
    }
    report.emit(cli)?;
    Ok(0)
}

fn cmd_ratio_grid(cli: &Cli, a: &RatioGridArgs) -> sparsejl::Result<i32> {
    let d_grid: Vec<u32> = (a.d_min..=a.d_max).collect();
    let p_grid = log_grid(a.p_min, a.p_max, a.p_points);
    let v_grid = log_grid(a.v_min, a.v_max, a.v_points);
    let cells = row_bound::ratio_grid(a.n, &d_grid, &p_grid, &v_grid)?;
    let mut report = Report::new("ratio-grid");
    global_cfg(&mut report, cli);
    report.cfg("n", a.n);
    report.cfg("d_min", a.d_min);
    report.cfg("d_max", a.d_max);
    report.cfg("p_min", a.p_min);
    report.cfg("p_max", a.p_max);
    report.cfg("p_points", a.p_points);
    report.cfg("v_min", a.v_min);
    report.cfg("v_max", a.v_max);
    report.cfg("v_points", a.v_points);
    report.columns(&["d", "p", "v", "t_new", "t_old", "ratio", "interpolated"]);
    for c in &cells {
        report.row(vec![
            c.d.to_string(),
            f(c.p),
            f(c.v),
            c.t_new.map_or_else(String::new, f),
            f(c.t_old),
            c.ratio.map_or_else(String::new, f),
            c.interpolated.to_string(),
        ]);
    }
    report.emit(cli)?;
    Ok(0)
}

fn cmd_disperse(cli: &Cli, a: &DisperseArgs) -> sparsejl::Result<i32> {
    let format = parse_input_format(&a.input_format)?;
    let dataset = data_io::load(&a.input, format)?;
    let profile = data_io::dispersion_profile(&dataset, a.subsample, cli.seed)?;
    let mut report = Report::new("disperse");
    global_cfg(&mut report, cli);
    report.cfg("input", a.input.display());
    report.cfg("input_format", &a.input_format);
    report.cfg("subsample", a.subsample);
    report.cfg("rows", dataset.len());
    report.cfg("dim", dataset.dim());
    report.sum("sample_pairs", profile.sample_pairs);
    report.sum("skipped_identical", profile.skipped_identical);
    report.sum("typical_v", f(profile.typical));
    report.columns(&["quantile", "v"]);
    for &(q, v) in &profile.quantiles {
        report.row(vec![format!("{q}"), f(v)]);
    }
    report.emit(cli)?;
    Ok(0)
}

fn cmd_project(cli: &Cli, a: &ProjectArgs) -> sparsejl::Result<i32> {
    let format = parse_input_format(&a.input_format)?;
    let dataset = data_io::load(&a.input, format)?;
    let emb = embedding::sample_matrix(dataset.dim(), a.m, a.s, a.variant, cli.seed)?;
    let mut report = Report::new("project");
    global_cfg(&mut report, cli);
    report.cfg("input", a.input.display());
    report.cfg("input_format", &a.input_format);
    report.cfg("n", dataset.dim());
    report.cfg("m", a.m);
    report.cfg("s", a.s);
    report.cfg("variant", a.variant);
    let cols: Vec<String> = (0..a.m).map(|j| format!("y{j}")).collect();
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    report.columns(&col_refs);
    for x in dataset.rows() {
        let y = emb.apply(x)?;
        report.row(y.into_iter().map(f).collect());
    }
    report.emit(cli)?;
    Ok(0)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> sparsejl::Result<i32> {
    match a.method.as_str() {
        "mc" => verify_mc(cli, a),
        "exact" => verify_exact(cli, a),
        other => Err(Error::Argument(format!(
            "unknown verify method '{other}' (expected mc or exact)"
        ))),
    }
}

fn verify_mc(cli: &Cli, a: &VerifyArgs) -> sparsejl::Result<i32> {
    let params = BoundParams::new(a.n, a.m, a.s, a.v)?;
    let eb = tail_bounds::epsilon_bound(&params, a.delta, Mode::Optimized, a.d_max)?;
    let x = oracle::worst_case_vector(a.n as usize, a.v)?;
    let est = oracle::mc_error_tail(&params, &x, eb.epsilon, a.trials, cli.seed)?;
    let pass = est.wilson_99_high <= a.delta;
    let mut report = Report::new("verify-mc");
    global_cfg(&mut report, cli);
    report.cfg("n", a.n);
    report.cfg("m", a.m);
    report.cfg("s", a.s);
    report.cfg("v", a.v);
    report.cfg("delta", a.delta);
    report.cfg("trials", a.trials);
    report.sum("epsilon", f(eb.epsilon));
    report.sum("d_used", eb.d);
    report.sum("exceed_count", est.exceed_count);
    report.sum("empirical_rate", f(est.point_estimate));
    report.sum("wilson_99_high", f(est.wilson_99_high));
    report.sum("verdict", if pass { "pass" } else { "fail" });
    report.columns(&["epsilon", "exceed_count", "trials", "wilson_99_high", "delta"]);
    report.row(vec![
        f(eb.epsilon),
        est.exceed_count.to_string(),
        a.trials.to_string(),
        f(est.wilson_99_high),
        f(a.delta),
    ]);
    report.emit(cli)?;
    Ok(if pass { 0 } else { 1 })
}

/// Desk-scale exact battery: moment pipeline vs literal enumeration, and the
/// per-row bound against exact enumerated moments at the extremal vector.
fn verify_exact(cli: &Cli, a: &VerifyArgs) -> sparsejl::Result<i32> {
    use sparsejl::Rational;
    let n_max = a.n_max.min(6).max(2);
    let mut checks = 0u64;
    let mut failures = 0u64;
    let ps = [(1u64, 4u64), (1, 2)];
    for n in 2..=n_max {
        for &(num, den) in &ps {
            let p = moment_engine::ratio(num as i64, den as i64);
            // Moment pipeline vs 3^{n-1} enumeration.
            for j in (2..=6usize).step_by(2) {
                let fast = moment_engine::sum_moments(&p, n - 1, j)?.moment(j).clone();
                let slow = oracle::sum_moment_by_enumeration(&p, (n - 1) as usize, j)?;
                checks += 1;
                if fast != slow {
                    failures += 1;
                }
            }
            // Row bound vs exact row moments at a rational near-extremal
            // vector; the row moment is 2-homogeneous, so v is recomputed
            // from the actual unnormalized vector.
            let mut x: Vec<Rational> = vec![moment_engine::ratio(n as i64, 1)];
            x.extend(std::iter::repeat(moment_engine::ratio(1, 1)).take(n as usize - 1));
            let norm2: Rational = x.iter().map(|a| a * a).sum();
            let xf = oracle::rational_to_f64_vec(&x);
            let nf: f64 = xf.iter().map(|a| a * a).sum::<f64>();
            let v = (xf[0] * xf[0] / nf).sqrt();
            for d in (2..=6usize).step_by(2) {
                let exact = oracle::exact_row_moment(&x, &p, d)?;
                let scale = moment_engine::to_f64(&norm2);
                let exact_norm =
                    moment_engine::to_f64(&exact).powf(1.0 / d as f64) / scale;
                let bound = row_bound::row_moment_bound_np(n, &p, v, d)?;
                checks += 1;
                if exact_norm > bound + 1e-12 {
                    failures += 1;
                }
            }
        }
    }
    let mut report = Report::new("verify-exact");
    global_cfg(&mut report, cli);
    report.cfg("n_max", n_max);
    report.sum("checks", checks);
    report.sum("failures", failures);
    report.sum("verdict", if failures == 0 { "pass" } else { "fail" });
    report.columns(&["checks", "failures"]);
    report.row(vec![checks.to_string(), failures.to_string()]);
    report.emit(cli)?;
    Ok(if failures == 0 { 0 } else { 1 })
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> sparsejl::Result<i32> {
    let mut r = rng::SplitMix64::new(cli.seed);
    let mut latencies_ms = Vec::with_capacity(a.samples);
    let mut p_clamped = 0u64;
    let mut v_clamped = 0u64;
    for _ in 0..a.samples {
        // n uniform in [1e3, 1e6], m uniform in [0.01 n, n], d in [2, 30],
        // p and v uniform in (0, 1) clamped to the validity domain.
        let n = 1_000 + r.below(1_000_000 - 1_000 + 1);
        let m_lo = (n as f64 * 0.01).ceil() as u64;
        let m = m_lo + r.below(n - m_lo + 1);
        let d = 2 + r.below(29) as usize;
        let mut p = r.next_f64();
        if p > 0.5 {
            p = 0.5;
            p_clamped += 1;
        }
        let s = ((p * m as f64).round() as u64).clamp(1, m / 2);
        let mut v = r.next_f64();
        let v_floor = 1.0 / (n as f64).sqrt();
        if v < v_floor {
            v = v_floor;
            v_clamped += 1;
        }
        let delta = (-(d as f64)).exp().max(1e-13);
        let start = Instant::now();
        let params = BoundParams::new(n, m, s, v)?;
        let _ = tail_bounds::epsilon_bound(&params, delta, Mode::Corollary, DEFAULT_D_MAX)?;
        latencies_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mut sorted = latencies_ms.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let pick = |q: f64| sorted[((q * (sorted.len() - 1) as f64).round()) as usize];
    let mut report = Report::new("bench");
    global_cfg(&mut report, cli);
    report.cfg("samples", a.samples);
    report.sum("p_clamp_rate", f(p_clamped as f64 / a.samples as f64));
    report.sum("v_clamp_rate", f(v_clamped as f64 / a.samples as f64));
    report.sum("min_ms", f(sorted[0]));
    report.sum("median_ms", f(pick(0.5)));
    report.sum("p90_ms", f(pick(0.9)));
    report.sum("p99_ms", f(pick(0.99)));
    report.sum("max_ms", f(sorted[sorted.len() - 1]));
    // Half-decade log histogram from 1 microsecond up.
    report.columns(&["bucket_lo_ms", "bucket_hi_ms", "count"]);
    let mut lo = 1e-3;
    while lo <= sorted[sorted.len() - 1] {
        let hi = lo * 10f64.sqrt();
        let count = sorted.iter().filter(|&&x| x >= lo && x < hi).count();
        report.row(vec![f(lo), f(hi), count.to_string()]);
        lo = hi;
    }
    let below = sorted.iter().filter(|&&x| x < 1e-3).count();
    if below > 0 {
        report.row(vec![f(0.0), f(1e-3), below.to_string()]);
    }
    report.emit(cli)?;
    Ok(0)
}
