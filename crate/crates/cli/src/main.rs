//! `nonsignal` command-line front end.
//!
//! Exit codes: 0 ok, 1 box failed validation or a computation failed, 2 usage or parameter
//! error, 3 the Q1 solver hit its iteration cap on more than 10% of evaluations.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nonsignal::npa::{build_moment, critical_e_ml_many, q1_feasible, Q1Options};
use nonsignal::protocol::{evaluate, simulate_nested, ProtocolConfig};
use nonsignal::report::fmt_sig6;
use nonsignal::threshold::{curve, table_csv, TableRow, DEFAULT_MAX_DEPTH, DEFAULT_TOL};
use nonsignal::{make_isotropic, make_pr_j, make_uniform, CorrelationBoxF64, NoiseParameter};

const MAX_Q1_D: usize = 5;

#[derive(Parser)]
#[command(
    name = "nonsignal",
    version,
    about = "Information causality and Q1 tests for d-ary no-signalling boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a box, print it as JSON and report validation on stderr.
    Box(BoxArgs),
    /// Success probability, simulation and information bounds of the nested game.
    Protocol(ProtocolArgs),
    /// Critical noise level versus nesting depth, plus the per-d optimum.
    Figure2(Figure2Args),
    /// Q1 boundary along the isotropic line.
    Q1(Q1Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum BoxKind {
    Prj,
    Uniform,
    Isotropic,
}

impl BoxKind {
    fn name(self) -> &'static str {
        match self {
            BoxKind::Prj => "prj",
            BoxKind::Uniform => "uniform",
            BoxKind::Isotropic => "isotropic",
        }
    }
}

#[derive(clap::Args)]
struct BoxArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, value_enum)]
    kind: BoxKind,
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[arg(long = "E")]
    e: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ProtocolArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u32>,
    #[arg(long = "E", value_delimiter = ',', required = true)]
    e: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also enumerate the exact information when it fits the budget.
    #[arg(long)]
    exact_i: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct Figure2Args {
    #[arg(long, value_delimiter = ',', required = true)]
    d_list: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    n_max: u32,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the optimum table here instead of appending it after a blank line.
    #[arg(long)]
    table_out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct Q1Args {
    #[arg(long, value_delimiter = ',', required = true)]
    d_list: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    tol_e: f64,
    /// Allow d above 5.
    #[arg(long)]
    force: bool,
    /// Dump the moment-matrix completion at the largest feasible E of the last d.
    #[arg(long)]
    dump_moment: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Usage(String),
    Degraded(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Degraded(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Usage(m) | Failure::Degraded(m) => m,
        }
    }
}

impl From<nonsignal::Error> for Failure {
    fn from(e: nonsignal::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunManifest {
    command: String,
    parameters: BTreeMap<String, String>,
    seed: Option<u64>,
    output_path: String,
    tool_version: String,
}

/// Writes `text` to `out` (plus a manifest sidecar) or to stdout.
fn emit(
    text: &str,
    out: Option<&Path>,
    command: &str,
    parameters: &BTreeMap<String, String>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let Some(path) = out else {
        print!("{text}");
        return Ok(());
    };
    let io = |e: std::io::Error| Failure::Invalid(format!("{}: {e}", path.display()));
    fs::write(path, text).map_err(io)?;
    let manifest = RunManifest {
        command: command.into(),
        parameters: parameters.clone(),
        seed,
        output_path: path.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
    };
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&sidecar, json + "\n").map_err(io)
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn run_box(args: &BoxArgs) -> Result<(), Failure> {
    let b: CorrelationBoxF64 = match args.kind {
        BoxKind::Prj => make_pr_j(args.d, args.j)?,
        BoxKind::Uniform => make_uniform(args.d)?,
        BoxKind::Isotropic => {
            let e = args
                .e
                .ok_or_else(|| Failure::Usage("--kind isotropic needs --E".into()))?;
            make_isotropic(args.d, NoiseParameter::new(e)?)?
        }
    };
    let mut params = BTreeMap::from([
        ("d".to_string(), args.d.to_string()),
        ("kind".to_string(), args.kind.name().to_string()),
    ]);
    if let BoxKind::Prj = args.kind {
        params.insert("j".into(), args.j.to_string());
    }
    if let (BoxKind::Isotropic, Some(e)) = (args.kind, args.e) {
        params.insert("E".into(), e.to_string());
    }
    emit(
        &(b.to_json() + "\n"),
        args.out.as_deref(),
        "box",
        &params,
        None,
    )?;

    let report = b.validate(nonsignal::TOL_PROB);
    let nonsignalling = b.is_nonsignalling(nonsignal::TOL_PROB);
    eprintln!("valid: {}", report.is_valid());
    for v in &report.violations {
        eprintln!("  {v}");
    }
    eprintln!("no-signalling: {nonsignalling}");
    if report.is_valid() && nonsignalling {
        Ok(())
    } else {
        Err(Failure::Invalid("box failed validation".into()))
    }
}

fn run_protocol(args: &ProtocolArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let mut grid = Vec::new();
    for &d in &args.d {
        for &n in &args.n {
            for &e in &args.e {
                grid.push(ProtocolConfig::new(d, n, e)?);
            }
        }
    }
    grid.sort_by(|a, b| {
        (a.d, a.depth)
            .cmp(&(b.d, b.depth))
            .then(a.e().total_cmp(&b.e()))
    });
    grid.dedup_by(|a, b| a.d == b.d && a.depth == b.depth && a.e() == b.e());

    let mut text = String::from("d,n,E,p_closed,p_empirical,fano_bound,exact_I\n");
    for cfg in &grid {
        let outcome = evaluate(cfg, args.exact_i)?;
        let empirical = simulate_nested(cfg, args.trials, args.seed)?;
        let exact = outcome.exact_information.map(fmt_sig6).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cfg.d,
            cfg.depth,
            fmt_sig6(cfg.e()),
            fmt_sig6(outcome.success_probability),
            fmt_sig6(empirical),
            fmt_sig6(outcome.fano_bound),
            exact
        ));
    }
    let params = BTreeMap::from([
        ("d".to_string(), join(&args.d)),
        ("n".to_string(), join(&args.n)),
        ("E".to_string(), join(&args.e)),
        ("trials".to_string(), args.trials.to_string()),
        ("exactI".to_string(), args.exact_i.to_string()),
    ]);
    emit(
        &text,
        args.out.as_deref(),
        "protocol",
        &params,
        Some(args.seed),
    )
}

fn run_figure2(args: &Figure2Args) -> Result<(), Failure> {
    let mut d_list = args.d_list.clone();
    d_list.sort_unstable();
    d_list.dedup();
    let mut text = String::from("d,n,e_critical,e_tsirelson\n");
    let mut rows = Vec::new();
    for &d in &d_list {
        let c = curve(d, args.n_max, args.tol)?;
        for r in &c.records {
            text.push_str(&format!(
                "{},{},{},{}\n",
                r.d,
                r.depth,
                fmt_sig6(r.e_critical),
                fmt_sig6(FRAC_1_SQRT_2)
            ));
        }
        rows.push(TableRow {
            d,
            e_ic: c.e_optimal,
            n_at_optimum: c.n_at_optimum,
        });
    }
    let table = table_csv(&rows);
    let params = BTreeMap::from([
        ("dList".to_string(), join(&d_list)),
        ("nMax".to_string(), args.n_max.to_string()),
        ("tol".to_string(), args.tol.to_string()),
    ]);
    match &args.table_out {
        Some(path) => {
            emit(&text, args.out.as_deref(), "figure2", &params, None)?;
            emit(&table, Some(path), "figure2", &params, None)
        }
        None => {
            text.push('\n');
            text.push_str(&table);
            emit(&text, args.out.as_deref(), "figure2", &params, None)
        }
    }
}

fn run_q1(args: &Q1Args) -> Result<(), Failure> {
    let mut d_list = args.d_list.clone();
    d_list.sort_unstable();
    d_list.dedup();
    if let Some(&d) = d_list.iter().find(|&&d| d > MAX_Q1_D) {
        if !args.force {
            return Err(Failure::Usage(format!(
                "d={d} exceeds {MAX_Q1_D}; pass --force to run anyway"
            )));
        }
    }
    let opts = Q1Options::default();
    let results = critical_e_ml_many(&d_list, args.tol_e, &opts)?;

    let mut text = String::from("d,e_ml\n");
    for r in &results {
        text.push_str(&format!("{},{}\n", r.d, fmt_sig6(r.e_ml)));
    }
    let params = BTreeMap::from([
        ("dList".to_string(), join(&d_list)),
        ("tolE".to_string(), args.tol_e.to_string()),
        ("force".to_string(), args.force.to_string()),
    ]);
    emit(&text, args.out.as_deref(), "q1", &params, None)?;

    if let (Some(path), Some(last)) = (&args.dump_moment, results.last()) {
        // step just inside the bracket so the dumped completion is a feasible one
        let e = (last.e_ml - args.tol_e).max(0.0);
        let b = make_isotropic(last.d, NoiseParameter::new(e)?)?;
        let mut moment = build_moment(&b)?;
        moment.entries = q1_feasible(&b, &opts)?.completion;
        fs::write(path, moment.to_json() + "\n")
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    }

    let degraded: Vec<_> = results
        .iter()
        .filter(|r| r.max_iter_fraction() > 0.1)
        .map(|r| format!("d={} ({}/{})", r.d, r.max_iter_hits, r.evaluations))
        .collect();
    if degraded.is_empty() {
        Ok(())
    } else {
        Err(Failure::Degraded(format!(
            "solver hit its iteration cap on more than 10% of evaluations: {}",
            degraded.join(", ")
        )))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("NONSIGNAL_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "NONSIGNAL_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Invalid(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Box(a) => run_box(a),
        Command::Protocol(a) => run_protocol(a),
        Command::Figure2(a) => run_figure2(a),
        Command::Q1(a) => run_q1(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
