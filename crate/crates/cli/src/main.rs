use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vmm_core::acceptance::{self, format_table, CheckRow};
use vmm_core::config::{parse_overrides, GridConfig, RunConfig};
use vmm_core::entropy::classify_entropy_sigmas;
use vmm_core::io;
use vmm_core::pipeline::{self, RunRecord};
use vmm_core::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

const DEMOS: &[(&str, &str)] = &[
    ("double_well", include_str!("../../../configs/double_well.cfg")),
    ("quadratic_saddle", include_str!("../../../configs/quadratic_saddle.cfg")),
    ("planted_saddle", include_str!("../../../configs/planted_saddle.cfg")),
    ("monkey_saddle", include_str!("../../../configs/monkey_saddle.cfg")),
    ("ellipsoid_geodesic", include_str!("../../../configs/ellipsoid_geodesic.cfg")),
];

#[derive(Parser, Debug)]
#[command(name = "vmm", version, about = "Viscosity min-max: widths, entropy selection and Morse index certification")]
struct Cli {
    /// Print progress and summaries (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the width curve and write width.csv.
    Width(RunArgs),
    /// Run the full pipeline and write all artifacts.
    Solve(RunArgs),
    /// Width curve plus the entropy verdict at every grid point.
    SweepSigma(RunArgs),
    /// Run the full pipeline, re-verify the records, exit 3 on any failed check.
    Certify(RunArgs),
    /// Run a bundled configuration.
    Demo(DemoArgs),
    /// Run the acceptance checks and print a table.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Configuration file (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Problem key, overriding the configuration (e.g. "torus_loop:R=2,r=0.5,N=64").
    #[arg(short, long)]
    problem: Option<String>,
    /// Sigma grid as min:max:points, overriding the configuration.
    #[arg(short, long)]
    grid: Option<String>,
    /// Override a configuration key, e.g. --set grid.points=24 (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, overriding the configuration.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// RNG seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Demo name; omit to list the available demos.
    name: Option<String>,
    /// Override a configuration key (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, overriding the configuration.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Run only the groups whose name contains this string.
    #[arg(short, long)]
    filter: Option<String>,
    /// Corrupt the tolerance of the named group to exercise the failure path.
    #[arg(long, value_name = "GROUP")]
    inject: Option<String>,
    /// List the check groups and exit.
    #[arg(long)]
    list: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }

    fn from_run(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::UnknownKeys { .. } | Error::UnknownProblem(_) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut pairs = parse_overrides(&args.set).map_err(Failure::validation)?;
    if let Some(p) = &args.problem {
        pairs.push(("problem".into(), format!("\"{p}\"")));
    }
    if let Some(s) = args.seed {
        pairs.push(("seed".into(), s.to_string()));
    }
    if let Some(o) = &args.out {
        pairs.push(("output".into(), format!("{:?}", o.display().to_string())));
    }
    let mut cfg = match &args.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Failure::validation(format!(
                    "config file not found: {}",
                    path.display()
                )));
            }
            RunConfig::from_path(path, &pairs).map_err(Failure::validation)?
        }
        None => RunConfig::from_toml_str("", &pairs).map_err(Failure::validation)?,
    };
    if let Some(g) = &args.grid {
        cfg.grid = GridConfig::parse_spec(g).map_err(Failure::validation)?;
        cfg.validate().map_err(Failure::validation)?;
    }
    Ok(cfg)
}

fn set_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("VM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::validation(format!("VM_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: e.to_string(),
            })?;
    }
    Ok(())
}

fn summarize(record: &RunRecord) {
    println!(
        "problem {} | beta(0) = {:.10e} | {} entropy-certified of {} classified",
        record.config.problem,
        record.width.betas.first().copied().unwrap_or(f64::NAN),
        record.entropy.iter().filter(|c| c.accepted()).count(),
        record.entropy.len()
    );
    for run in &record.runs {
        match &run.record {
            Some(r) => println!(
                "sigma {:.4e}: value {:.10e}, index {:?}, nullity {:?}, grad {:.3e}, entropy residual {:?}, index bound {:?}{}{}",
                run.sigma,
                r.value,
                r.index(),
                r.nullity(),
                r.grad_norm,
                r.entropy_residual,
                run.index_bound,
                if run.surgery.is_empty() { String::new() } else { format!(", {} surgeries", run.surgery.len()) },
                if run.perturbation.is_some() { ", perturbed" } else { "" },
            ),
            None => println!("sigma {:.4e}: no critical point", run.sigma),
        }
        for n in &run.notes {
            println!("  note: {n}");
        }
    }
    for n in &record.notes {
        println!("note: {n}");
    }
    println!("complete: {}", record.complete);
}

fn solve(cfg: &RunConfig, verbose: u8) -> Result<RunRecord, Failure> {
    let record = pipeline::run(cfg).map_err(Failure::from_run)?;
    let dir = Path::new(&cfg.output);
    pipeline::emit(&record, dir).map_err(Failure::from_run)?;
    summarize(&record);
    if verbose > 0 {
        print!("{}", format_table(&record.checks));
    }
    println!("wrote {}", dir.join("run.json").display());
    Ok(record)
}

fn width(cfg: &RunConfig, entropy: bool) -> Result<(), Failure> {
    let (_, curve, _) = pipeline::width_curve(cfg).map_err(Failure::from_run)?;
    let dir = Path::new(&cfg.output);
    io::write_width_csv(&dir.join("width.csv"), &curve).map_err(Failure::from_run)?;
    if entropy {
        let certs = classify_entropy_sigmas(&curve, cfg.selection.window_steps).map_err(Failure::from_run)?;
        io::write_width_entropy_csv(&dir.join("plotdata/width_entropy.csv"), &curve, &certs)
            .map_err(Failure::from_run)?;
        println!("{:>12}  {:>20}  {:>12}  {:>12}  verdict", "sigma", "beta", "beta'", "bound");
        for (i, s) in curve.sigmas.iter().enumerate() {
            match certs.iter().find(|c| c.sigma == *s) {
                Some(c) => println!(
                    "{s:>12.5e}  {:>20.12e}  {:>12.4e}  {:>12.4e}  {}",
                    curve.betas[i],
                    c.beta_prime_est,
                    c.bound,
                    if c.accepted() { "accepted" } else { "rejected" }
                ),
                None => println!("{s:>12.5e}  {:>20.12e}  {:>12}  {:>12}  n/a", curve.betas[i], "-", "-"),
            }
        }
    } else {
        println!("{} rows", curve.len());
    }
    println!("wrote {}", dir.join("width.csv").display());
    Ok(())
}

fn certify(cfg: &RunConfig, verbose: u8) -> Result<(), Failure> {
    let record = solve(cfg, verbose)?;
    let mut rows: Vec<CheckRow> = record.checks.clone();
    rows.extend(pipeline::reverify(&record).map_err(Failure::from_run)?);
    print!("{}", format_table(&rows));
    if let Some(bad) = rows.iter().find(|r| !r.pass) {
        return Err(Failure {
            code: EXIT_ACCEPTANCE,
            message: format!("check failed: {}", bad.name),
        });
    }
    Ok(())
}

fn demo(args: &DemoArgs, verbose: u8) -> Result<(), Failure> {
    let Some(name) = &args.name else {
        for (n, _) in DEMOS {
            println!("{n}");
        }
        return Ok(());
    };
    let text = DEMOS
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = DEMOS.iter().map(|(n, _)| *n).collect();
            Failure::validation(format!("unknown demo '{name}' (available: {names:?})"))
        })?;
    let mut pairs = parse_overrides(&args.set).map_err(Failure::validation)?;
    if let Some(o) = &args.out {
        pairs.push(("output".into(), format!("{:?}", o.display().to_string())));
    }
    let cfg = RunConfig::from_toml_str(text, &pairs).map_err(Failure::validation)?;
    solve(&cfg, verbose).map(|_| ())
}

fn selftest(args: &SelftestArgs) -> Result<(), Failure> {
    if args.list {
        for g in acceptance::GROUPS {
            println!("{g}");
        }
        return Ok(());
    }
    if let Some(g) = &args.inject {
        if !acceptance::GROUPS.contains(&g.as_str()) {
            return Err(Failure::validation(format!(
                "unknown group '{g}' (available: {:?})",
                acceptance::GROUPS
            )));
        }
    }
    let opts = acceptance::SuiteOptions {
        filter: args.filter.clone(),
        inject: args.inject.clone(),
    };
    let rows = acceptance::run_suite(&opts).map_err(Failure::from_run)?;
    print!("{}", format_table(&rows));
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        println!("{} checks passed", rows.len());
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_ACCEPTANCE,
            message: format!("{} of {} checks failed: {}", failed.len(), rows.len(), failed.join("; ")),
        })
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    set_threads()?;
    match &cli.command {
        Command::Width(a) => width(&load_config(a)?, false),
        Command::SweepSigma(a) => width(&load_config(a)?, true),
        Command::Solve(a) => solve(&load_config(a)?, cli.verbose).map(|_| ()),
        Command::Certify(a) => certify(&load_config(a)?, cli.verbose),
        Command::Demo(a) => demo(a, cli.verbose),
        Command::Selftest(a) => selftest(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
