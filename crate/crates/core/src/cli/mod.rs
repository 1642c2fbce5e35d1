//! Batch front end: JSON job in, JSON report out.
//!
//! Exit codes: 0 all checks hold, 1 violated, 2 premise failed or domain
//! error, 3 configuration or parse error. Errors are also written to stderr
//! as `{"error": {"kind": …, "message": …}}`.

mod job;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::report::{AnyReport, Report, Witness};
use crate::theorems::TheoremId;

pub use job::{
    execute, list_builtins, Catalog, ChartSpec, Command, DomainSpec, JobError, JobReport, JobSpec, MapSpec, Mode,
    PhiPredicate, ProductSetSpec, TheoremParams, SCHEMA_VERSION,
};

pub const EXIT_CONFIG: i32 = 3;
pub const SEED_ENV: &str = "GEOCONVEX_SEED";

#[derive(Debug, Parser)]
#[command(name = "geoconvex", version, about = "Sampling checks of phi_E-convexity on closed-form manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Function check (interval or geodesic, per `mode`)
    Check(JobArgs),
    /// Geodesic E-convexity of the domain
    CheckSet(JobArgs),
    /// Geodesic phi_E-convexity of each listed product set
    CheckProductSet(JobArgs),
    /// Epigraph set check and membership queries
    CheckEpigraph(JobArgs),
    /// Premise and conclusion checks of one theorem
    Verify(JobArgs),
    /// Counterexample search for the function inequality
    Search(JobArgs),
    /// Bifunction predicates
    CheckPhi(JobArgs),
    /// Print manifolds, charts, theorem ids and expression builtins
    List,
}

#[derive(Debug, Args)]
struct JobArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    witness_csv: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    theorem: Option<String>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall time in the report (otherwise 0, keeping output byte-stable)
    #[arg(long)]
    timing: bool,
}

/// Knobs that shape a run without being part of the job.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub theorem: Option<TheoremId>,
    pub workers: Option<usize>,
    pub timing: bool,
}

/// Applies overrides (flag over environment over file) and runs the job.
pub fn run_job(mut spec: JobSpec, command: Command, opts: &RunOptions) -> Result<JobReport, JobError> {
    if let Some(seed) = opts.seed {
        spec.config.seed = seed;
    }
    if let Some(samples) = opts.samples {
        spec.config.samples = samples;
    }
    if let Some(id) = opts.theorem {
        spec.theorem = Some(id);
    }
    spec.command = Some(command);
    let start = Instant::now();
    let reports = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| JobError::Spec(format!("cannot start {n} workers: {e}")))?
            .install(|| execute(&spec, command))?,
        None => execute(&spec, command)?,
    };
    let wall_time_ms = if opts.timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(JobReport {
        schema_version: SCHEMA_VERSION,
        job: spec,
        reports,
        wall_time_ms,
    })
}

fn env_seed() -> Result<Option<u64>, JobError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| JobError::Spec(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn collect_witnesses<'a>(r: &'a Report, out: &mut Vec<&'a Witness>) {
    if r.refined.is_empty() {
        out.extend(r.witness.as_ref());
    } else {
        out.extend(r.refined.iter());
    }
    if let Some(p) = &r.premise {
        collect_witnesses(p, out);
    }
}

/// Rows `sample_index, coords…, t, lhs, rhs, violation` for every refined
/// violation in the job, in report order.
pub fn witness_csv(report: &JobReport) -> Result<String, csv::Error> {
    let mut ws = Vec::new();
    for r in &report.reports {
        match r {
            AnyReport::Check(r) => collect_witnesses(r, &mut ws),
            AnyReport::Theorem(t) => {
                for r in t.premise_reports.iter().chain(&t.conclusion_report).chain(&t.supporting_reports) {
                    collect_witnesses(r, &mut ws);
                }
            }
        }
    }
    let width = ws.iter().map(|w| w.points.iter().map(|p| p.len()).sum::<usize>()).max().unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample_index".to_string()];
    header.extend((0..width).map(|i| format!("c{i}")));
    header.extend(["t", "lhs", "rhs", "violation"].map(String::from));
    wtr.write_record(&header)?;
    for w in ws {
        let mut row = vec![w.sample_index.to_string()];
        let coords: Vec<String> = w.points.iter().flat_map(|p| p.0.iter().map(|x| x.to_string())).collect();
        let pad = width - coords.len();
        row.extend(coords);
        row.extend(std::iter::repeat_n(String::new(), pad));
        row.extend([w.t, w.lhs, w.rhs, w.violation].map(|x| x.to_string()));
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), JobError> {
    fs::write(path, contents).map_err(|source| JobError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn run_args(command: Command, args: JobArgs) -> Result<i32, JobError> {
    let src = fs::read_to_string(&args.config).map_err(|source| JobError::Io {
        path: args.config.display().to_string(),
        source,
    })?;
    let spec = JobSpec::from_json(&src)?;
    let theorem = args.theorem.as_deref().map(str::parse::<TheoremId>).transpose()?;
    let opts = RunOptions {
        seed: args.seed.or(env_seed()?),
        samples: args.samples,
        theorem,
        workers: args.workers,
        timing: args.timing,
    };
    let report = run_job(spec, command, &opts)?;
    let json = report.to_json();
    match &args.out {
        Some(path) => write_file(path, &json)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(json.as_bytes());
        }
    }
    if let Some(path) = &args.witness_csv {
        let csv = witness_csv(&report).map_err(|e| JobError::Spec(format!("csv: {e}")))?;
        write_file(path, &csv)?;
    }
    Ok(report.top_verdict().exit_code())
}

fn print_catalog() {
    let c = list_builtins();
    println!("manifolds:");
    for k in crate::manifold::ManifoldKind::ALL {
        println!("  {k:?} ({})", k.name());
    }
    println!("diffeomorphisms:");
    for (name, doc) in &c.diffeomorphisms {
        println!("  {name}: {doc}");
    }
    println!("theorems:");
    for (name, doc) in &c.theorems {
        println!("  {name}: {doc}");
    }
    println!("builtins: {}", c.builtins.join(", "));
    println!("commands: {}", c.commands.join(", "));
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return EXIT_CONFIG;
        }
    };
    let (command, args) = match cli.command {
        Sub::List => {
            print_catalog();
            return 0;
        }
        Sub::Check(a) => (Command::Check, a),
        Sub::CheckSet(a) => (Command::CheckSet, a),
        Sub::CheckProductSet(a) => (Command::CheckProductSet, a),
        Sub::CheckEpigraph(a) => (Command::CheckEpigraph, a),
        Sub::Verify(a) => (Command::Verify, a),
        Sub::Search(a) => (Command::Search, a),
        Sub::CheckPhi(a) => (Command::CheckPhi, a),
    };
    match run_args(command, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            EXIT_CONFIG
        }
    }
}
